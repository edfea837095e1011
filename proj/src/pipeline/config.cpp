// Licensed under the Apache License 2.0 (see LICENSE file).

#include "pipeline/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "common/errors.hpp"
#include "net/mlp.hpp"

namespace neuralsurv::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw InputError("config: " + key + " expects a number, got '" + v + "'");
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw InputError("config: " + key + " expects a non-negative integer, got '" + v + "'");
  return out;
}

std::string format_double(double d) {
  std::ostringstream os;
  os << std::setprecision(17) << d;
  return os.str();
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define NS_DOUBLE(name)                                                                                   \
  {                                                                                                       \
#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = parse_double(k, v); }, \
            [](const RunConfig& c) { return format_double(c.name); } }                                    \
  }
#define NS_INT(name, type)                                                                                     \
  {                                                                                                            \
#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = parse_integer<type>(k, v); }, \
            [](const RunConfig& c) { return std::to_string(c.name); } }                                        \
  }
#define NS_STRING(name)                                                                           \
  {                                                                                               \
#name, {[](RunConfig& c, const std::string&, const std::string& v) { c.name = v; }, \
            [](const RunConfig& c) { return c.name; } }                                           \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      NS_INT(seed, std::uint64_t),
      NS_INT(grid_size, std::size_t),
      {"hidden",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          std::vector<std::size_t> h;
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) h.push_back(parse_integer<std::size_t>(k, item));
          }
          c.hidden = h;
        },
        [](const RunConfig& c) { return join(c.hidden); }}},
      NS_STRING(activation),
      NS_DOUBLE(alpha0),
      NS_DOUBLE(beta0),
      NS_DOUBLE(rho),
      NS_DOUBLE(em_tolerance),
      NS_INT(em_max_iterations, int),
      NS_DOUBLE(em_init_scale),
      NS_INT(lbfgs_max_iterations, int),
      NS_INT(lbfgs_memory, int),
      NS_DOUBLE(cavi_tolerance),
      NS_INT(cavi_max_iterations, int),
      NS_INT(dense_limit, std::size_t),
      NS_INT(draws, std::size_t),
      NS_DOUBLE(level),
      NS_INT(eval_grid, std::size_t),
      NS_STRING(time_col),
      NS_STRING(event_col),
      NS_STRING(features),
      NS_INT(threads, std::size_t),
  };
  return f;
}

#undef NS_DOUBLE
#undef NS_INT
#undef NS_STRING

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(trim(key));
  if (it == fields().end()) throw InputError("config: unknown key '" + key + "'");
  it->second.set(*this, it->first, trim(value));
}

std::string RunConfig::get(const std::string& key) const {
  const auto it = fields().find(key);
  if (it == fields().end()) throw InputError("config: unknown key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, _] : fields()) out.push_back(name);
    return out;
  }();
  return k;
}

void RunConfig::validate() const {
  if (grid_size < 2) throw InputError("config: grid_size must be >= 2");
  if (hidden.empty()) throw InputError("config: need at least one hidden layer");
  for (auto h : hidden)
    if (h == 0) throw InputError("config: hidden widths must be positive");
  net::activation_from_string(activation);
  prior().validate();
  if (!(em_tolerance > 0.0) || !(cavi_tolerance > 0.0)) throw InputError("config: tolerances must be > 0");
  if (em_max_iterations < 1 || cavi_max_iterations < 1 || lbfgs_max_iterations < 1 || lbfgs_memory < 1)
    throw InputError("config: iteration caps and memory must be >= 1");
  if (!(em_init_scale >= 0.0)) throw InputError("config: em_init_scale must be >= 0");
  if (draws < 2) throw InputError("config: draws must be >= 2");
  if (!(level > 0.0 && level < 1.0)) throw InputError("config: level must lie in (0, 1)");
  if (eval_grid < 2) throw InputError("config: eval_grid must be >= 2");
}

void RunConfig::load_text(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash_pos = line.find('#'); hash_pos != std::string::npos) line.resize(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  load_text(buf.str());
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + "=" + f.get(*this) + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

map_em::EmConfig RunConfig::em() const {
  map_em::EmConfig c;
  c.tolerance = em_tolerance;
  c.max_iterations = em_max_iterations;
  c.init_scale = em_init_scale;
  c.seed = seed;
  c.lbfgs.max_iterations = lbfgs_max_iterations;
  c.lbfgs.memory = lbfgs_memory;
  return c;
}

cavi::CaviConfig RunConfig::cavi() const {
  cavi::CaviConfig c;
  c.tolerance = cavi_tolerance;
  c.max_iterations = cavi_max_iterations;
  c.dense_limit = static_cast<Eigen::Index>(dense_limit);
  return c;
}

}  // namespace neuralsurv::pipeline
