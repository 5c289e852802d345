#include "rnnpb/recognition.hpp"

#include <algorithm>
#include <cmath>

#include "rnnpb/error.hpp"
#include "rnnpb/learning.hpp"

namespace rnnpb {

RecognitionConfig RecognitionConfig::original_stopping_rule() {
  RecognitionConfig c;
  c.stop_threshold = 0.1;
  c.stop_patience = 100;
  return c;
}

void RecognitionConfig::validate() const {
  if (!(eta_r >= 0.0) || !std::isfinite(eta_r)) throw Error(ErrorKind::Argument, "eta_r must be finite and >= 0");
  if (window < 1) throw Error(ErrorKind::Argument, "recognition window must be >= 1");
  if (stop_patience < 1) throw Error(ErrorKind::Argument, "stop_patience must be >= 1");
  if (!(stop_threshold >= 0.0)) throw Error(ErrorKind::Argument, "stop_threshold must be >= 0");
  if (max_iters < 1) throw Error(ErrorKind::Argument, "max_iters must be >= 1");
  if (stream_iterations < 1) throw Error(ErrorKind::Argument, "stream_iterations must be >= 1");
}

double pb_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw Error(ErrorKind::DimensionMismatch, "PB distance between different PB sizes");
  return (p - q).norm();
}

double pb_distance(const PBState& p, const PBState& q) { return pb_distance(p.activation(), q.activation()); }

std::pair<std::string, double> nearest_label(const ModelSnapshot& model, const Vector& activation,
                                             std::map<std::string, double>* all) {
  std::map<std::string, double> distances;
  for (const auto& e : model.pb_table) distances[e.label] = pb_distance(e.activation, activation);
  std::pair<std::string, double> best{"", std::numeric_limits<double>::infinity()};
  // map order is lexicographic, so strict < keeps the smallest label on ties
  for (const auto& [label, d] : distances) {
    if (d < best.second) best = {label, d};
  }
  if (all) *all = std::move(distances);
  return best;
}

PBState recognition_step(const WeightMatrices& weights, const Frames& frames, const PBState& pb, std::size_t window,
                         double eta_r) {
  const auto steps = static_cast<std::size_t>(frames.rows()) - 1;
  const auto a = std::min(window, steps);
  const auto start = static_cast<Eigen::Index>(steps - a);

  Vector context = Vector::Zero(static_cast<Eigen::Index>(weights.topology().context_dim()));
  StepState state{context, Vector()};
  for (Eigen::Index t = 0; t < start; ++t) {
    state = forward_step(weights, frames.row(t).transpose(), pb, state).state;
  }
  const auto r = bptt_gradients(weights, frames.bottomRows(static_cast<Eigen::Index>(a) + 1), pb, state.context,
                                /*weight_gradients=*/false);
  return {pb.rho + eta_r * r.delta_pb.colwise().sum().transpose()};
}

RecognitionResult recognize(const ModelSnapshot& model, const Sequence& seq, const RecognitionConfig& config) {
  config.validate();
  if (seq.dim() != model.topology.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "sequence '" + seq.id() + "' has dimension " + std::to_string(seq.dim()) +
                                                  ", model expects " + std::to_string(model.topology.input_dim));
  }

  RecognitionResult result;
  PBState pb = PBState::zeros(model.topology.pb_dim);
  Vector activation = pb.activation();
  std::vector<Vector> trace;
  std::size_t quiet = 0;
  while (trace.size() < config.max_iters) {
    pb = recognition_step(model.weights, seq.values(), pb, config.window, config.eta_r);
    if (!pb.rho.allFinite()) {
      throw Error(ErrorKind::NumericOverflow, "recognition diverged at iteration " + std::to_string(trace.size()));
    }
    const Vector next = pb.activation();
    const double change = (next - activation).cwiseAbs().maxCoeff();
    activation = next;
    trace.push_back(activation);
    quiet = change < config.stop_threshold ? quiet + 1 : 0;
    if (quiet >= config.stop_patience) {
      result.converged = true;
      break;
    }
  }

  result.iterations = trace.size();
  result.pb_trajectory.resize(static_cast<Eigen::Index>(trace.size()), static_cast<Eigen::Index>(pb.dim()));
  for (std::size_t i = 0; i < trace.size(); ++i) result.pb_trajectory.row(static_cast<Eigen::Index>(i)) = trace[i];
  result.pb = std::move(pb);
  if (!model.pb_table.empty()) {
    result.nearest_label = nearest_label(model, activation, &result.distance_to_labels).first;
  }
  return result;
}

// ---------------------------------------------------------------------------

StreamRecognizer::StreamRecognizer(const ModelSnapshot& model, RecognitionConfig config)
    : model_(model), config_(config), pb_(PBState::zeros(model.topology.pb_dim)) {
  config_.validate();
}

std::optional<StreamEmission> StreamRecognizer::push(const Vector& frame) {
  const auto index = seen_;
  if (static_cast<std::size_t>(frame.size()) != model_.topology.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "stream frame " + std::to_string(index) + " has dimension " +
                                                  std::to_string(frame.size()) + ", expected " +
                                                  std::to_string(model_.topology.input_dim));
  }
  if (!frame.allFinite()) throw Error(ErrorKind::NumericInput, "stream frame " + std::to_string(index) + " is not finite");
  ++seen_;
  buffer_.push_back(frame);
  if (buffer_.size() > config_.window + 1) buffer_.pop_front();
  if (buffer_.size() < config_.window + 1) return std::nullopt;

  Frames window(static_cast<Eigen::Index>(buffer_.size()), frame.size());
  for (std::size_t i = 0; i < buffer_.size(); ++i) window.row(static_cast<Eigen::Index>(i)) = buffer_[i].transpose();
  for (std::size_t k = 0; k < config_.stream_iterations; ++k) {
    pb_ = recognition_step(model_.weights, window, pb_, config_.window, config_.eta_r);
  }
  if (!pb_.rho.allFinite()) {
    throw Error(ErrorKind::NumericOverflow, "stream recognition diverged at frame " + std::to_string(index));
  }
  StreamEmission e{index, pb_, "", 0.0};
  if (!model_.pb_table.empty()) std::tie(e.nearest_label, e.distance) = nearest_label(model_, pb_.activation());
  return e;
}

std::vector<StreamEmission> recognize_stream(const ModelSnapshot& model,
                                             const std::function<std::optional<Vector>()>& next_frame,
                                             const RecognitionConfig& config) {
  StreamRecognizer rec(model, config);
  std::vector<StreamEmission> out;
  while (auto frame = next_frame()) {
    if (auto e = rec.push(*frame)) out.push_back(std::move(*e));
  }
  return out;
}

}  // namespace rnnpb
