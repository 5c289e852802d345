#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "rnnpb/learning.hpp"
#include "rnnpb/seqdata.hpp"

namespace rnnpb::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("rnnpb_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Frames random_frames(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Frames f(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) f(i, j) = u(rng);
  return f;
}

/// Rates that train small networks in a few thousand epochs.
inline TrainerConfig fast_trainer(std::size_t epochs) {
  TrainerConfig c;
  c.eta_init = 1e-3;
  c.eta_min = 1e-8;
  c.eta_max = 1e-2;
  c.xi_plus = 1.05;
  c.xi_minus = 0.7;
  c.m_gamma = 10.0;
  c.epochs = epochs;
  c.seed = 3;
  return c;
}

/// A small two-class model shared by tests that need a trained network.
struct SmallModel {
  SequenceSet data;
  TrainResult trained;
};

inline const SmallModel& small_model() {
  static const SmallModel m = [] {
    const auto raw = synth_corpus({2, 3, 40, 11, 20.0});
    auto data = apply_normalizer(raw, fit_normalizer(raw));
    auto trained = train(data, {3, 8, 2}, fast_trainer(3000));
    return SmallModel{std::move(data), std::move(trained)};
  }();
  return m;
}

}  // namespace rnnpb::testing
