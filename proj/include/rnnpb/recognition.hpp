#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rnnpb/defaults.hpp"
#include "rnnpb/network.hpp"

namespace rnnpb {

struct RecognitionConfig {
  /// Constant PB updating rate.
  double eta_r = defaults::kRecognitionRate;
  /// Number of most recent prediction steps (input/target pairs) whose error
  /// drives the PB; clamped to the sequence length.
  std::size_t window = 100;
  /// Convergence: max-norm of the per-iteration PB activation change stays
  /// below stop_threshold for stop_patience consecutive iterations.
  double stop_threshold = 1e-4;
  std::size_t stop_patience = 100;
  std::size_t max_iters = 5000;
  /// PB update iterations performed after each streamed frame.
  std::size_t stream_iterations = 1;

  /// Literal stopping rule of the original Case 2 experiment (threshold 0.1,
  /// 100 consecutive iterations).
  static RecognitionConfig original_stopping_rule();
  void validate() const;
};

struct RecognitionResult {
  PBState pb;
  std::size_t iterations = 0;
  bool converged = false;
  Frames pb_trajectory;  // iterations x pb_dim, activation space
  std::string nearest_label;
  std::map<std::string, double> distance_to_labels;
};

/// Euclidean distance between PB activation vectors.
double pb_distance(const PBState& p, const PBState& q);
double pb_distance(const Vector& p_activation, const Vector& q_activation);

/// Nearest entry of the model's PB table; ties go to the lexicographically
/// smallest label.
std::pair<std::string, double> nearest_label(const ModelSnapshot& model, const Vector& activation,
                                             std::map<std::string, double>* all = nullptr);

/// One PB-only gradient step over the last `window` steps of `frames`:
/// returns rho + eta_r * sum of delta^PB inside the window. The context at the
/// window start comes from an open-loop pass over the prefix.
PBState recognition_step(const WeightMatrices& weights, const Frames& frames, const PBState& pb, std::size_t window,
                         double eta_r);

/// Infers the PB of a normalized sequence with the weights frozen. rho starts
/// at 0 for every call.
RecognitionResult recognize(const ModelSnapshot& model, const Sequence& seq, const RecognitionConfig& config);

struct StreamEmission {
  std::size_t frame_index;  // index of the frame that triggered the emission
  PBState pb;
  std::string nearest_label;
  double distance;
};

/// Online recognition over a sliding window of normalized frames. The PB is
/// warm-started from frame to frame; context restarts at the window start.
class StreamRecognizer {
 public:
  StreamRecognizer(const ModelSnapshot& model, RecognitionConfig config);

  /// Returns an emission once window + 1 frames have been seen.
  std::optional<StreamEmission> push(const Vector& frame);

  const PBState& pb() const { return pb_; }
  std::size_t frames_seen() const { return seen_; }

 private:
  const ModelSnapshot& model_;
  RecognitionConfig config_;
  PBState pb_;
  std::deque<Vector> buffer_;
  std::size_t seen_ = 0;
};

/// Drains `next_frame` (std::nullopt ends the stream) through a StreamRecognizer.
std::vector<StreamEmission> recognize_stream(const ModelSnapshot& model,
                                             const std::function<std::optional<Vector>()>& next_frame,
                                             const RecognitionConfig& config);

}  // namespace rnnpb
