#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "rnnpb/learning.hpp"
#include "rnnpb/network.hpp"
#include "rnnpb/recognition.hpp"

namespace rnnpb {

/// Flat `key = value` configuration. Blank lines and lines starting with '#'
/// are ignored.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig load(const std::filesystem::path& path);
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Rejects keys outside `known`.
  void check_keys(const std::set<std::string>& known) const;

  void read(const std::string& key, double& out) const;
  void read(const std::string& key, std::size_t& out) const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

/// Keys: eta_init eta_min eta_max xi_plus xi_minus m_gamma epochs
/// convergence_mse seed workers hidden pb eta_r window stop_threshold
/// stop_patience max_iters stream_iterations
const std::set<std::string>& known_config_keys();

void apply_config(const KeyValueConfig& cfg, TrainerConfig& trainer);
void apply_config(const KeyValueConfig& cfg, NetworkTopology& topology);
void apply_config(const KeyValueConfig& cfg, RecognitionConfig& recognition);

}  // namespace rnnpb
