#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace rnnpb::defaults {

// Published network parameters. Every default configuration value below is
// taken from this table and nowhere else.
inline constexpr double kInitialLearningRate = 2.0e-6;
inline constexpr double kMaxLearningRate = 1.0e-4;
inline constexpr double kMinLearningRate = 1.0e-8;
inline constexpr double kRecognitionRate = 8.0e-3;
inline constexpr double kPbRateConstant = 0.001;
inline constexpr std::size_t kHiddenSize = 100;
inline constexpr std::size_t kPbSize = 2;
inline constexpr double kRateDecrease = 0.999999;
inline constexpr double kRateIncrease = 1.000001;

struct Entry {
  std::string_view key;
  std::string_view description;
  double value;
};

inline constexpr std::array<Entry, 9> kTable{{
    {"eta_init", "initial learning rate", kInitialLearningRate},
    {"eta_max", "maximum learning rate", kMaxLearningRate},
    {"eta_min", "minimum learning rate", kMinLearningRate},
    {"eta_r", "PB updating rate during recognition", kRecognitionRate},
    {"m_gamma", "proportionality constant of the PB updating rate", kPbRateConstant},
    {"hidden", "hidden layer size", static_cast<double>(kHiddenSize)},
    {"pb", "PB layer size", static_cast<double>(kPbSize)},
    {"xi_minus", "learning rate decrease factor", kRateDecrease},
    {"xi_plus", "learning rate increase factor", kRateIncrease},
}};

}  // namespace rnnpb::defaults
