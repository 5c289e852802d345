#include "rnnpb/learning.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "rnnpb/text.hpp"

namespace rnnpb {

void TrainerConfig::validate() const {
  if (!(eta_min > 0.0 && eta_min <= eta_init && eta_init <= eta_max)) {
    throw Error(ErrorKind::Argument, "learning rates must satisfy 0 < eta_min <= eta_init <= eta_max");
  }
  if (!(xi_minus < 1.0 && xi_plus > 1.0 && xi_minus > 0.0)) {
    throw Error(ErrorKind::Argument, "rate factors must satisfy 0 < xi_minus < 1 < xi_plus");
  }
  if (!(m_gamma > 0.0)) throw Error(ErrorKind::Argument, "m_gamma must be positive");
  if (convergence_mse < 0.0) throw Error(ErrorKind::Argument, "convergence_mse must be >= 0");
  if (workers < 1) throw Error(ErrorKind::Argument, "workers must be >= 1");
}

std::map<std::string, std::string> TrainerConfig::describe() const {
  return {{"eta_init", text::format_double(eta_init)},
          {"eta_min", text::format_double(eta_min)},
          {"eta_max", text::format_double(eta_max)},
          {"xi_plus", text::format_double(xi_plus)},
          {"xi_minus", text::format_double(xi_minus)},
          {"m_gamma", text::format_double(m_gamma)},
          {"epochs", std::to_string(epochs)},
          {"convergence_mse", text::format_double(convergence_mse)},
          {"seed", std::to_string(seed)}};
}

TrainerState TrainerState::initial(const NetworkTopology& topology, const TrainerConfig& config) {
  return {WeightMatrices(topology, config.eta_init), WeightMatrices(topology, 0.0), 0};
}

// ---------------------------------------------------------------------------

BpttResult bptt_gradients(const WeightMatrices& weights, const Frames& frames, const PBState& pb,
                          const Vector& init_context, bool weight_gradients) {
  const auto& topo = weights.topology();
  const auto H = static_cast<Eigen::Index>(topo.hidden_dim);
  const auto D = static_cast<Eigen::Index>(topo.input_dim);
  if (frames.rows() < 2) throw Error(ErrorKind::Format, "BPTT needs at least 2 frames");
  if (frames.cols() != D || pb.dim() != topo.pb_dim) {
    throw Error(ErrorKind::DimensionMismatch, "BPTT: sequence or PB dimension does not match topology");
  }
  if (init_context.size() != 0 && init_context.size() != H) {
    throw Error(ErrorKind::DimensionMismatch, "BPTT: initial context has the wrong size");
  }
  const Eigen::Index steps = frames.rows() - 1;

  const Matrix inputs = frames.topRows(steps).transpose();
  const Matrix targets = frames.bottomRows(steps).transpose();
  const Vector p = pb.activation();
  const Vector h0 = init_context.size() ? init_context : Vector::Zero(H);

  // Forward. Column t of `hidden` is h_t.
  Matrix hidden = weights.w_in() * inputs;
  hidden.colwise() += weights.w_pb() * p + weights.b_h();
  for (Eigen::Index t = 0; t < steps; ++t) {
    if (t == 0) {
      hidden.col(0).noalias() += weights.w_ctx() * h0;
    } else {
      hidden.col(t).noalias() += weights.w_ctx() * hidden.col(t - 1);
    }
    hidden.col(t) = hidden.col(t).array().tanh();
  }
  Matrix output = weights.w_out() * hidden;
  output.colwise() += weights.b_out();
  output = output.unaryExpr([](double v) { return sigmoid(v); });

  const Matrix error = output - targets;
  BpttResult r;
  r.cost = 0.5 * error.squaredNorm();
  r.mse = r.cost / static_cast<double>(steps * D);
  if (!std::isfinite(r.cost)) throw Error(ErrorKind::NumericOverflow, "non-finite cost in BPTT");

  // Backward.
  const Matrix d_out = error.cwiseProduct(output.cwiseProduct((1.0 - output.array()).matrix()));
  Matrix d_hidden = weights.w_out().transpose() * d_out;
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    if (t + 1 < steps) d_hidden.col(t).noalias() += weights.w_ctx().transpose() * d_hidden.col(t + 1);
    d_hidden.col(t).array() *= 1.0 - hidden.col(t).array().square();
  }
  // d_hidden now holds dC/dz_t for the hidden pre-activations.

  const Vector pb_slope = p.cwiseProduct((1.0 - p.array()).matrix());
  r.delta_pb = -(weights.w_pb().transpose() * d_hidden).transpose();
  r.delta_pb.array().rowwise() *= pb_slope.transpose().array();

  if (weight_gradients) {
    r.grad = WeightMatrices(topo);
    Matrix prev_hidden(H, steps);
    prev_hidden.col(0) = h0;
    if (steps > 1) prev_hidden.rightCols(steps - 1) = hidden.leftCols(steps - 1);
    const Vector dz_sum = d_hidden.rowwise().sum();
    r.grad.w_in().noalias() = d_hidden * inputs.transpose();
    r.grad.w_pb().noalias() = dz_sum * p.transpose();
    r.grad.w_ctx().noalias() = d_hidden * prev_hidden.transpose();
    r.grad.b_h() = dz_sum;
    r.grad.w_out().noalias() = d_out * hidden.transpose();
    r.grad.b_out() = d_out.rowwise().sum();
    if (!r.grad.flat().allFinite()) throw Error(ErrorKind::NumericOverflow, "non-finite weight gradient in BPTT");
  }
  if (!r.delta_pb.allFinite()) throw Error(ErrorKind::NumericOverflow, "non-finite PB gradient in BPTT");
  return r;
}

BpttResult bptt_gradients(const WeightMatrices& weights, const Sequence& seq, const PBState& pb) {
  return bptt_gradients(weights, seq.values(), pb);
}

// ---------------------------------------------------------------------------

void update_learning_rates(TrainerState& state, const WeightMatrices& grad, const TrainerConfig& config) {
  auto& eta = state.eta.flat();
  auto& prev = state.prev_grad.flat();
  const auto& g = grad.flat();
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double sigma = prev[i] * g[i];
    if (sigma > 0.0) {
      eta[i] = std::min(eta[i] * config.xi_plus, config.eta_max);
    } else if (sigma < 0.0) {
      eta[i] = std::max(eta[i] * config.xi_minus, config.eta_min);
    }
  }
  prev = g;
  ++state.epoch;
}

void apply_weight_update(WeightMatrices& weights, const WeightMatrices& grad, const TrainerState& state) {
  if (weights.size() != grad.size() || weights.size() != state.eta.size()) {
    throw Error(ErrorKind::DimensionMismatch, "weight update: shapes differ");
  }
  weights.flat().array() -= state.eta.flat().array() * grad.flat().array();
}

Vector pb_learning_rate(const Frames& delta_pb, double m_gamma) {
  if (delta_pb.rows() == 0) return Vector::Zero(delta_pb.cols());
  return m_gamma * delta_pb.cwiseAbs().colwise().mean().transpose();
}

PBState update_pb_learning(const PBState& pb, const Frames& delta_pb, double m_gamma) {
  if (static_cast<std::size_t>(delta_pb.cols()) != pb.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "PB update: delta width does not match PB size");
  }
  const Vector gamma = pb_learning_rate(delta_pb, m_gamma);
  const Vector total = delta_pb.colwise().sum().transpose();
  return {pb.rho + gamma.cwiseProduct(total)};
}

// ---------------------------------------------------------------------------

double TrainReport::final_mean_mse() const {
  if (mse_history.empty()) return 0.0;
  const auto& last = mse_history.back();
  double s = 0.0;
  for (double v : last) s += v;
  return s / static_cast<double>(last.size());
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

}  // namespace

TrainResult train(const SequenceSet& set, const NetworkTopology& topology, const TrainerConfig& config,
                  const std::function<void(const EpochProgress&)>& on_epoch) {
  config.validate();
  topology.validate();
  if (set.dim() != topology.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "training data has dimension " + std::to_string(set.dim()) +
                                                  " but the topology expects " + std::to_string(topology.input_dim));
  }

  const std::size_t n = set.size();
  WeightMatrices weights = init_network(topology, config.seed);
  TrainerState state = TrainerState::initial(topology, config);
  std::vector<PBState> pbs(n, PBState::zeros(topology.pb_dim));

  TrainReport report;
  for (const auto& s : set.sequences()) report.sequence_ids.push_back(s.id());

  std::vector<BpttResult> results(n);
  std::vector<std::string> failures(n);
  WeightMatrices total(topology);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    parallel_for(n, config.workers, [&](std::size_t i) {
      try {
        results[i] = bptt_gradients(weights, set[i].values(), pbs[i]);
      } catch (const Error& e) {
        failures[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < n; ++i) {
      if (!failures[i].empty()) {
        report.sequence_pb = pbs;
        throw TrainingError("epoch " + std::to_string(epoch) + ", sequence '" + set[i].id() + "': " + failures[i],
                            std::move(report));
      }
    }

    // Fixed-order reduction keeps the sum independent of the worker count.
    total.flat().setZero();
    std::vector<double> mse(n);
    for (std::size_t i = 0; i < n; ++i) {
      total.flat() += results[i].grad.flat();
      mse[i] = results[i].mse;
    }
    report.mse_history.push_back(mse);
    ++report.epochs_run;

    update_learning_rates(state, total, config);
    apply_weight_update(weights, total, state);
    for (std::size_t i = 0; i < n; ++i) pbs[i] = update_pb_learning(pbs[i], results[i].delta_pb, config.m_gamma);

    if (!weights.flat().allFinite()) {
      report.sequence_pb = pbs;
      throw TrainingError("epoch " + std::to_string(epoch) + ": weights became non-finite", std::move(report));
    }
    const double mean = report.final_mean_mse();
    if (on_epoch) on_epoch({epoch, mean});
    if (config.convergence_mse > 0.0 && mean <= config.convergence_mse) break;
  }

  report.sequence_pb = pbs;
  report.eta_min_seen = state.eta.flat().minCoeff();
  report.eta_max_seen = state.eta.flat().maxCoeff();
  report.eta_mean = state.eta.flat().mean();

  TrainResult result;
  auto& model = result.model;
  model.topology = topology;
  model.weights = std::move(weights);
  model.normalization = set.normalization();
  model.metadata = config.describe();
  for (const auto& label : set.labels()) {
    LabeledPB entry{label, Vector::Zero(static_cast<Eigen::Index>(topology.pb_dim)), {}};
    double count = 0.0;
    double label_mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (set[i].label() != label) continue;
      if (entry.seed_frame.size() == 0) entry.seed_frame = set[i].frame(0);
      entry.activation += pbs[i].activation();
      if (!report.mse_history.empty()) label_mse += report.mse_history.back()[i];
      count += 1.0;
    }
    entry.activation /= count;
    model.pb_table.push_back(std::move(entry));
    if (!report.mse_history.empty()) report.final_label_mse[label] = label_mse / count;
  }
  result.report = std::move(report);
  return result;
}

}  // namespace rnnpb
