#pragma once

#include <string>

#include "rnnpb/network.hpp"

namespace rnnpb {

/// Closed-loop rollout in normalized space: row 0 is the seed frame, each
/// following row is the prediction fed back as the next input.
Frames rollout(const ModelSnapshot& model, const Vector& pb_activation, const Vector& seed_frame, std::size_t steps);

/// Closed-loop generation with an externally set PB. The seed frame is in
/// normalized space; the returned sequence (steps + 1 frames) is
/// denormalized with the model's statistics when it has any.
Sequence generate(const ModelSnapshot& model, const Vector& pb_activation, const Vector& seed_frame, std::size_t steps,
                  const std::string& description = "custom");

/// Generation from a trained label's stored PB and seed frame.
Sequence generate_by_label(const ModelSnapshot& model, const std::string& label, std::size_t steps);

/// (1 - alpha) * PB_a + alpha * PB_b in activation space.
Vector interpolate_pb(const ModelSnapshot& model, const std::string& label_a, const std::string& label_b, double alpha);

}  // namespace rnnpb
