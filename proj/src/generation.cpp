#include "rnnpb/generation.hpp"

#include "rnnpb/error.hpp"
#include "rnnpb/text.hpp"

namespace rnnpb {

Frames rollout(const ModelSnapshot& model, const Vector& pb_activation, const Vector& seed_frame, std::size_t steps) {
  const auto& topo = model.topology;
  if (steps < 1) throw Error(ErrorKind::Argument, "generation needs at least one step");
  if (static_cast<std::size_t>(pb_activation.size()) != topo.pb_dim) {
    throw Error(ErrorKind::DimensionMismatch, "PB has " + std::to_string(pb_activation.size()) +
                                                  " components, model expects " + std::to_string(topo.pb_dim));
  }
  if (static_cast<std::size_t>(seed_frame.size()) != topo.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "seed frame has dimension " + std::to_string(seed_frame.size()) +
                                                  ", model expects " + std::to_string(topo.input_dim));
  }
  const PBState pb = PBState::from_activation(pb_activation);

  Frames out(static_cast<Eigen::Index>(steps) + 1, seed_frame.size());
  out.row(0) = seed_frame.transpose();
  StepState state = StepState::initial(topo);
  Vector input = seed_frame;
  for (std::size_t t = 1; t <= steps; ++t) {
    auto step = forward_step(model.weights, input, pb, state);
    if (!step.output.allFinite()) {
      throw Error(ErrorKind::NumericOverflow, "generation produced non-finite output at step " + std::to_string(t));
    }
    out.row(static_cast<Eigen::Index>(t)) = step.output.transpose();
    input = std::move(step.output);
    state = std::move(step.state);
  }
  return out;
}

Sequence generate(const ModelSnapshot& model, const Vector& pb_activation, const Vector& seed_frame, std::size_t steps,
                  const std::string& description) {
  Frames frames = rollout(model, pb_activation, seed_frame, steps);
  if (model.normalization) frames = model.normalization->invert(frames);
  return Sequence("gen_" + description, "gen:" + description, std::move(frames));
}

Sequence generate_by_label(const ModelSnapshot& model, const std::string& label, std::size_t steps) {
  const auto& entry = model.at(label);
  return generate(model, entry.activation, entry.seed_frame, steps, label);
}

Vector interpolate_pb(const ModelSnapshot& model, const std::string& label_a, const std::string& label_b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorKind::Domain, "alpha " + text::format_double(alpha) + " is outside [0,1]");
  }
  const auto& a = model.at(label_a).activation;
  const auto& b = model.at(label_b).activation;
  if (alpha == 1.0) return b;
  // a + alpha (b - a) is exact at alpha = 0 and for a == b; the clamp removes
  // rounding excursions outside the segment.
  Vector out = a + alpha * (b - a);
  return out.cwiseMax(a.cwiseMin(b)).cwiseMin(a.cwiseMax(b));
}

}  // namespace rnnpb
