// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

namespace neuralsurv::numkit {

// Logistic function, evaluated without overflow for any finite z.
double sigmoid(double z) noexcept;

// log(sigmoid(z)), accurate in both tails.
double log_sigmoid(double z) noexcept;

// Exponent of the Polya-Gamma sigmoid identity:
// sigmoid(z) = E_{w ~ PG(1,0)}[exp(pg_f(w, z))].
double pg_f(double omega, double z) noexcept;

// Mean of PG(b, c): b/(2c) tanh(c/2), with the series b/4 - b c^2/48 near c = 0.
double pg_mean(double b, double c) noexcept;

inline constexpr double kPgMeanTaylorSwitch = 1e-4;

// Throws InputError for x <= 0.
double digamma(double x);
double log_gamma(double x);

}  // namespace neuralsurv::numkit
