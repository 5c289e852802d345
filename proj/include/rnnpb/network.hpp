#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rnnpb/defaults.hpp"
#include "rnnpb/seqdata.hpp"
#include "rnnpb/types.hpp"

namespace rnnpb {

struct NetworkTopology {
  std::size_t input_dim = 9;
  std::size_t hidden_dim = defaults::kHiddenSize;
  std::size_t pb_dim = defaults::kPbSize;

  std::size_t context_dim() const { return hidden_dim; }
  void validate() const;
  bool operator==(const NetworkTopology&) const = default;
};

/// All trainable parameters in one flat buffer, with typed views onto each
/// block. The same shape doubles as storage for per-weight learning rates and
/// gradients, so elementwise optimizer arithmetic works on `flat()`.
///
/// Block order: W_in (H x D), W_pb (H x P), W_ctx (H x H), b_h (H),
/// W_out (D x H), b_out (D). Matrices are column-major.
class WeightMatrices {
 public:
  using MatrixView = Eigen::Map<Matrix>;
  using ConstMatrixView = Eigen::Map<const Matrix>;
  using VectorView = Eigen::Map<Vector>;
  using ConstVectorView = Eigen::Map<const Vector>;

  WeightMatrices() = default;
  explicit WeightMatrices(const NetworkTopology& topology, double fill = 0.0);

  const NetworkTopology& topology() const { return topology_; }
  std::size_t size() const { return static_cast<std::size_t>(flat_.size()); }
  Vector& flat() { return flat_; }
  const Vector& flat() const { return flat_; }

  MatrixView w_in() { return matrix(0, H(), D()); }
  MatrixView w_pb() { return matrix(off_pb(), H(), P()); }
  MatrixView w_ctx() { return matrix(off_ctx(), H(), H()); }
  VectorView b_h() { return vector(off_bh(), H()); }
  MatrixView w_out() { return matrix(off_out(), D(), H()); }
  VectorView b_out() { return vector(off_bout(), D()); }

  ConstMatrixView w_in() const { return matrix(0, H(), D()); }
  ConstMatrixView w_pb() const { return matrix(off_pb(), H(), P()); }
  ConstMatrixView w_ctx() const { return matrix(off_ctx(), H(), H()); }
  ConstVectorView b_h() const { return vector(off_bh(), H()); }
  ConstMatrixView w_out() const { return matrix(off_out(), D(), H()); }
  ConstVectorView b_out() const { return vector(off_bout(), D()); }

  struct Block {
    const char* name;
    Eigen::Index offset;
    Eigen::Index rows;
    Eigen::Index cols;
  };
  std::vector<Block> blocks() const;

  /// FNV-1a over the raw bytes; used to prove weights were not touched.
  std::uint64_t checksum() const;

  bool operator==(const WeightMatrices& other) const;

 private:
  Eigen::Index D() const { return static_cast<Eigen::Index>(topology_.input_dim); }
  Eigen::Index H() const { return static_cast<Eigen::Index>(topology_.hidden_dim); }
  Eigen::Index P() const { return static_cast<Eigen::Index>(topology_.pb_dim); }
  Eigen::Index off_pb() const { return H() * D(); }
  Eigen::Index off_ctx() const { return off_pb() + H() * P(); }
  Eigen::Index off_bh() const { return off_ctx() + H() * H(); }
  Eigen::Index off_out() const { return off_bh() + H(); }
  Eigen::Index off_bout() const { return off_out() + D() * H(); }

  MatrixView matrix(Eigen::Index off, Eigen::Index r, Eigen::Index c) { return {flat_.data() + off, r, c}; }
  ConstMatrixView matrix(Eigen::Index off, Eigen::Index r, Eigen::Index c) const { return {flat_.data() + off, r, c}; }
  VectorView vector(Eigen::Index off, Eigen::Index n) { return {flat_.data() + off, n}; }
  ConstVectorView vector(Eigen::Index off, Eigen::Index n) const { return {flat_.data() + off, n}; }

  NetworkTopology topology_;
  Vector flat_;
};

double sigmoid(double x);
Vector sigmoid(const Vector& x);
double logit(double p);

/// Parametric bias: unbounded internal values rho, exposed through sigmoid.
struct PBState {
  Vector rho;

  static PBState zeros(std::size_t pb_dim) { return {Vector::Zero(static_cast<Eigen::Index>(pb_dim))}; }
  /// Inverse of activation(); every component must lie strictly in (0,1).
  static PBState from_activation(const Vector& activation);

  std::size_t dim() const { return static_cast<std::size_t>(rho.size()); }
  Vector activation() const { return sigmoid(rho); }
};

struct StepState {
  Vector context;
  Vector last_output;

  static StepState initial(const NetworkTopology& topology);
};

struct StepCache {
  Vector input;
  Vector pb_activation;
  Vector context_in;
  Vector hidden_pre;
  Vector hidden;
  Vector output_pre;
  Vector output;
};

struct StepResult {
  Vector output;
  StepState state;
  StepCache cache;
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per weight matrix; biases zero.
WeightMatrices init_network(const NetworkTopology& topology, std::uint64_t seed);

/// h = tanh(W_in x + W_pb sigmoid(rho) + W_ctx context + b_h)
/// y = sigmoid(W_out h + b_out)
StepResult forward_step(const WeightMatrices& weights, const Vector& input, const PBState& pb, const StepState& state);

enum class LoopMode { Open, Closed };

struct SequenceForward {
  Frames predictions;  // (T-1) x D; row t predicts frame t+1
  StepState final_state;
  std::vector<StepCache> caches;
};

/// Open loop feeds every observed frame; closed loop feeds frame 0 and then
/// the network's own outputs.
SequenceForward forward_sequence(const WeightMatrices& weights, const Frames& frames, const PBState& pb, LoopMode mode,
                                 const StepState& init);
SequenceForward forward_sequence(const WeightMatrices& weights, const Sequence& seq, const PBState& pb, LoopMode mode);

struct LabeledPB {
  std::string label;
  Vector activation;  // trained PB in activation space
  Vector seed_frame;  // first normalized frame of the label's training data
};

struct ModelSnapshot {
  static constexpr int kFormatVersion = 1;

  NetworkTopology topology;
  WeightMatrices weights;
  std::vector<LabeledPB> pb_table;
  std::optional<NormStats> normalization;
  int format_version = kFormatVersion;
  /// Effective training configuration, echoed for provenance.
  std::map<std::string, std::string> metadata;

  const LabeledPB* find(const std::string& label) const;
  const LabeledPB& at(const std::string& label) const;
  std::vector<std::string> labels() const;
  void validate() const;
};

void save_model(const ModelSnapshot& snapshot, const std::filesystem::path& path);
ModelSnapshot load_model(const std::filesystem::path& path);

}  // namespace rnnpb
