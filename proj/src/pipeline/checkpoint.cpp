// Licensed under the Apache License 2.0 (see LICENSE file).

#include "pipeline/checkpoint.hpp"

#include <chrono>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "common/errors.hpp"
#include "json.hpp"

namespace neuralsurv::pipeline {

namespace {

constexpr char kMagic[8] = {'N', 'S', 'U', 'R', 'V', 'C', 'K', '1'};

struct ArrayBlock {
  std::string name;
  std::vector<double> data;
};

std::vector<double> to_vec(const Eigen::MatrixXd& m) { return {m.data(), m.data() + m.size()}; }

std::vector<ArrayBlock> arrays_of(const FittedModel& fm) {
  const auto& sig = fm.posterior.sigma;
  return {{"theta_map", to_vec(fm.theta_map)},
          {"mu", to_vec(fm.posterior.mu)},
          {"sigma", to_vec(sig.is_dense() ? sig.dense() : sig.W())},
          {"feature_mean", fm.scaling.mean},
          {"feature_scale", fm.scaling.scale}};
}

nlohmann::json header_of(const FittedModel& fm, const std::vector<ArrayBlock>& arrays) {
  nlohmann::json h;
  h["format"] = "neuralsurv-checkpoint";
  h["version"] = 1;
  h["config_hash"] = fm.config_hash;
  h["config"] = fm.config_text;
  h["layer_sizes"] = fm.network.layer_sizes();
  h["activation"] = net::to_string(fm.network.activation());
  h["feature_names"] = fm.feature_names;
  h["t_max"] = fm.t_max;
  h["prior"] = {{"alpha0", fm.prior.alpha0}, {"beta0", fm.prior.beta0}, {"rho", fm.prior.rho}};
  h["phi_map"] = fm.phi_map;
  h["alpha"] = fm.posterior.alpha;
  h["beta"] = fm.posterior.beta;
  h["sigma_form"] = fm.posterior.sigma.is_dense() ? "dense" : "factor";
  h["sigma_cols"] = fm.posterior.sigma.is_dense() ? fm.posterior.sigma.dim() : fm.posterior.sigma.W().cols();
  h["em"] = {{"iterations", fm.em_iterations}, {"converged", fm.em_converged}};
  h["cavi"] = {{"iterations", fm.cavi_iterations}, {"converged", fm.cavi_converged}};
  std::size_t offset = 0;
  auto& blocks = h["arrays"] = nlohmann::json::array();
  for (const auto& a : arrays) {
    blocks.push_back({{"name", a.name}, {"offset", offset}, {"count", a.data.size()}});
    offset += a.data.size();
  }
  return h;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return v;
}

std::string encode_doubles(const std::vector<ArrayBlock>& arrays) {
  std::string out;
  for (const auto& a : arrays)
    for (double d : a.data) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      put_u64(out, bits);
    }
  return out;
}

}  // namespace

std::string checkpoint_body(const FittedModel& fm) { return encode_doubles(arrays_of(fm)); }

void save_checkpoint(const FittedModel& fm, const std::string& path) {
  const auto arrays = arrays_of(fm);
  auto header = header_of(fm, arrays);
  header["created"] = timestamp();
  const std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out += text;
  out += encode_doubles(arrays);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("checkpoint: cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw InputError("checkpoint: write failed for " + path);
}

FittedModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("checkpoint: cannot open " + path);
  const std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, sizeof kMagic) != 0)
    throw InputError("checkpoint: " + path + " is not a checkpoint file");
  const std::uint64_t hlen = get_u64(raw.data() + 8);
  if (raw.size() < 16 + hlen) throw InputError("checkpoint: truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(raw.substr(16, hlen));
  } catch (const std::exception& e) {
    throw InputError(std::string("checkpoint: malformed header: ") + e.what());
  }
  const std::size_t body = 16 + hlen;
  auto read_array = [&](const std::string& name) {
    for (const auto& b : h.at("arrays")) {
      if (b.at("name") != name) continue;
      const auto off = b.at("offset").get<std::size_t>(), cnt = b.at("count").get<std::size_t>();
      if (body + 8 * (off + cnt) > raw.size()) throw InputError("checkpoint: truncated array " + name);
      std::vector<double> v(cnt);
      for (std::size_t k = 0; k < cnt; ++k) {
        const std::uint64_t bits = get_u64(raw.data() + body + 8 * (off + k));
        std::memcpy(&v[k], &bits, sizeof bits);
      }
      return v;
    }
    throw InputError("checkpoint: missing array " + name);
  };
  try {
    FittedModel fm;
    fm.network = net::MlpModel(h.at("layer_sizes").get<std::vector<std::size_t>>(),
                               net::activation_from_string(h.at("activation").get<std::string>()));
    fm.prior = {h.at("prior").at("alpha0"), h.at("prior").at("beta0"), h.at("prior").at("rho")};
    fm.t_max = h.at("t_max");
    fm.feature_names = h.at("feature_names").get<std::vector<std::string>>();
    fm.phi_map = h.at("phi_map");
    fm.config_text = h.at("config");
    fm.config_hash = h.at("config_hash");
    fm.em_iterations = h.at("em").at("iterations");
    fm.em_converged = h.at("em").at("converged");
    fm.cavi_iterations = h.at("cavi").at("iterations");
    fm.cavi_converged = h.at("cavi").at("converged");
    fm.scaling.mean = read_array("feature_mean");
    fm.scaling.scale = read_array("feature_scale");
    const auto m = static_cast<Eigen::Index>(fm.network.parameter_count());
    const auto th = read_array("theta_map");
    const auto mu = read_array("mu");
    if (static_cast<Eigen::Index>(th.size()) != m || static_cast<Eigen::Index>(mu.size()) != m)
      throw InputError("checkpoint: parameter vectors do not match the architecture");
    fm.theta_map = Eigen::Map<const Eigen::VectorXd>(th.data(), m);
    fm.posterior.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), m);
    fm.posterior.theta_star = fm.theta_map;
    fm.posterior.alpha = h.at("alpha");
    fm.posterior.beta = h.at("beta");
    const auto cols = h.at("sigma_cols").get<Eigen::Index>();
    const auto sig = read_array("sigma");
    if (static_cast<Eigen::Index>(sig.size()) != m * cols) throw InputError("checkpoint: covariance block has wrong size");
    const Eigen::MatrixXd S = Eigen::Map<const Eigen::MatrixXd>(sig.data(), m, cols);
    fm.posterior.sigma = h.at("sigma_form") == "dense" ? cavi::Covariance::from_dense(S)
                                                       : cavi::Covariance::from_precision_factor(S, 0);
    return fm;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: bad header field: ") + e.what());
  }
}

}  // namespace neuralsurv::pipeline
