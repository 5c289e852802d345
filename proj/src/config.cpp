#include "rnnpb/config.hpp"

#include <fstream>
#include <sstream>

#include "rnnpb/error.hpp"
#include "rnnpb/text.hpp"

namespace rnnpb {

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

KeyValueConfig KeyValueConfig::parse(const std::string& content, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(content);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::Format, origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = std::string(text::trim(body.substr(0, eq)));
    const auto value = std::string(text::trim(body.substr(eq + 1)));
    if (key.empty()) throw Error(ErrorKind::Format, origin + ":" + std::to_string(line_no) + ": empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

void KeyValueConfig::check_keys(const std::set<std::string>& known) const {
  for (const auto& [k, _] : values_) {
    if (!known.count(k)) throw Error(ErrorKind::Argument, origin_ + ": unknown config key '" + k + "'");
  }
}

void KeyValueConfig::read(const std::string& key, double& out) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return;
  if (!text::parse_double(it->second, out)) {
    throw Error(ErrorKind::Argument, origin_ + ": '" + key + "' is not a number: " + it->second);
  }
}

void KeyValueConfig::read(const std::string& key, std::size_t& out) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return;
  if (!text::parse_size(it->second, out)) {
    throw Error(ErrorKind::Argument, origin_ + ": '" + key + "' is not a non-negative integer: " + it->second);
  }
}

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{"eta_init",  "eta_min",        "eta_max",      "xi_plus",   "xi_minus",
                                          "m_gamma",   "epochs",         "convergence_mse", "seed",   "workers",
                                          "hidden",    "pb",             "eta_r",        "window",    "stop_threshold",
                                          "stop_patience", "max_iters", "stream_iterations"};
  return keys;
}

void apply_config(const KeyValueConfig& cfg, TrainerConfig& t) {
  cfg.read("eta_init", t.eta_init);
  cfg.read("eta_min", t.eta_min);
  cfg.read("eta_max", t.eta_max);
  cfg.read("xi_plus", t.xi_plus);
  cfg.read("xi_minus", t.xi_minus);
  cfg.read("m_gamma", t.m_gamma);
  cfg.read("epochs", t.epochs);
  cfg.read("convergence_mse", t.convergence_mse);
  cfg.read("seed", t.seed);
  cfg.read("workers", t.workers);
}

void apply_config(const KeyValueConfig& cfg, NetworkTopology& topology) {
  cfg.read("hidden", topology.hidden_dim);
  cfg.read("pb", topology.pb_dim);
}

void apply_config(const KeyValueConfig& cfg, RecognitionConfig& r) {
  cfg.read("eta_r", r.eta_r);
  cfg.read("window", r.window);
  cfg.read("stop_threshold", r.stop_threshold);
  cfg.read("stop_patience", r.stop_patience);
  cfg.read("max_iters", r.max_iters);
  cfg.read("stream_iterations", r.stream_iterations);
}

}  // namespace rnnpb
