#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rnnpb/defaults.hpp"
#include "rnnpb/error.hpp"
#include "rnnpb/network.hpp"
#include "rnnpb/seqdata.hpp"

namespace rnnpb {

struct TrainerConfig {
  double eta_init = defaults::kInitialLearningRate;
  double eta_min = defaults::kMinLearningRate;
  double eta_max = defaults::kMaxLearningRate;
  double xi_plus = defaults::kRateIncrease;
  double xi_minus = defaults::kRateDecrease;
  double m_gamma = defaults::kPbRateConstant;
  std::size_t epochs = 20000;
  /// Stop once the mean per-sequence MSE falls to this value; 0 disables.
  double convergence_mse = 0.0;
  std::uint64_t seed = 0;
  /// Threads used for per-sequence BPTT. Results do not depend on it.
  std::size_t workers = 1;

  void validate() const;
  std::map<std::string, std::string> describe() const;
};

/// Per-weight adaptive learning rates and the previous epoch's gradient.
struct TrainerState {
  WeightMatrices eta;
  WeightMatrices prev_grad;
  std::size_t epoch = 0;

  static TrainerState initial(const NetworkTopology& topology, const TrainerConfig& config);
};

struct BpttResult {
  WeightMatrices grad;  // dC/dw; left empty when weight gradients are not requested
  /// Row t: descent direction on rho contributed at step t, i.e. -dC/drho
  /// through the PB input of step t (sigmoid Jacobian included).
  Frames delta_pb;
  double cost = 0.0;  // 1/2 sum of squared prediction errors
  double mse = 0.0;   // cost / ((T-1) * D)
};

/// Teacher-forced forward pass and full-unroll backpropagation through time.
/// Every row of `frames` after the first is a target. The context entering
/// step 0 is `init_context` (zeros when empty) and is treated as a constant.
BpttResult bptt_gradients(const WeightMatrices& weights, const Frames& frames, const PBState& pb,
                          const Vector& init_context = {}, bool weight_gradients = true);
BpttResult bptt_gradients(const WeightMatrices& weights, const Sequence& seq, const PBState& pb);

/// Sign-adaptive rate step: same-sign consecutive gradients grow eta by
/// xi_plus (capped at eta_max), sign flips shrink it by xi_minus (floored at
/// eta_min), a zero product leaves it. prev_grad becomes grad.
void update_learning_rates(TrainerState& state, const WeightMatrices& grad, const TrainerConfig& config);

/// w <- w - eta * grad, componentwise.
void apply_weight_update(WeightMatrices& weights, const WeightMatrices& grad, const TrainerState& state);

/// gamma_i = m_gamma * mean_t |delta_i,t|
Vector pb_learning_rate(const Frames& delta_pb, double m_gamma);
/// rho_i <- rho_i + gamma_i * sum_t delta_i,t
PBState update_pb_learning(const PBState& pb, const Frames& delta_pb, double m_gamma);

struct TrainReport {
  std::vector<std::string> sequence_ids;
  /// mse_history[e][s]: MSE of sequence s during epoch e (before that epoch's update).
  std::vector<std::vector<double>> mse_history;
  /// Final PB of every training sequence, aligned with sequence_ids.
  std::vector<PBState> sequence_pb;
  /// Final-epoch MSE per label (mean over that label's sequences).
  std::map<std::string, double> final_label_mse;
  double eta_min_seen = 0.0;
  double eta_max_seen = 0.0;
  double eta_mean = 0.0;
  std::size_t epochs_run = 0;

  double final_mean_mse() const;
};

struct TrainResult {
  ModelSnapshot model;
  TrainReport report;
};

struct EpochProgress {
  std::size_t epoch;
  double mean_mse;
};

/// Raised when training produces non-finite values; carries the report up to
/// the last completed epoch.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, TrainReport partial)
      : Error(ErrorKind::NumericOverflow, what), partial_(std::move(partial)) {}
  const TrainReport& partial_report() const { return partial_; }

 private:
  TrainReport partial_;
};

/// Offline learning: one PB per sequence (rho starts at 0); weight gradients
/// of all sequences are summed and applied once per epoch with adaptive
/// rates; each sequence's PB follows its own accumulated error. The model's
/// PB table holds, per label, the mean activation of that label's sequences.
TrainResult train(const SequenceSet& set, const NetworkTopology& topology, const TrainerConfig& config,
                  const std::function<void(const EpochProgress&)>& on_epoch = {});

}  // namespace rnnpb
