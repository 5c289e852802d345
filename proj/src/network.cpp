#include "rnnpb/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "rnnpb/error.hpp"
#include "rnnpb/text.hpp"

namespace rnnpb {

void NetworkTopology::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || pb_dim < 1) {
    throw Error(ErrorKind::Argument, "topology dimensions must all be >= 1 (input " + std::to_string(input_dim) +
                                         ", hidden " + std::to_string(hidden_dim) + ", pb " + std::to_string(pb_dim) +
                                         ")");
  }
}

WeightMatrices::WeightMatrices(const NetworkTopology& topology, double fill) : topology_(topology) {
  topology_.validate();
  const auto D = static_cast<Eigen::Index>(topology.input_dim);
  const auto H = static_cast<Eigen::Index>(topology.hidden_dim);
  const auto P = static_cast<Eigen::Index>(topology.pb_dim);
  flat_ = Vector::Constant(H * D + H * P + H * H + H + D * H + D, fill);
}

std::vector<WeightMatrices::Block> WeightMatrices::blocks() const {
  return {{"W_in", 0, H(), D()},          {"W_pb", off_pb(), H(), P()},   {"W_ctx", off_ctx(), H(), H()},
          {"b_h", off_bh(), H(), 1},      {"W_out", off_out(), D(), H()}, {"b_out", off_bout(), D(), 1}};
}

std::uint64_t WeightMatrices::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(flat_.data());
  for (std::size_t i = 0; i < size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

bool WeightMatrices::operator==(const WeightMatrices& other) const {
  return topology_ == other.topology_ && flat_.size() == other.flat_.size() &&
         std::memcmp(flat_.data(), other.flat_.data(), size() * sizeof(double)) == 0;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vector sigmoid(const Vector& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }

double logit(double p) { return std::log(p / (1.0 - p)); }

PBState PBState::from_activation(const Vector& activation) {
  PBState pb{Vector(activation.size())};
  for (Eigen::Index i = 0; i < activation.size(); ++i) {
    const double a = activation[i];
    if (!(a > 0.0 && a < 1.0)) {
      throw Error(ErrorKind::Domain, "PB activation " + text::format_double(a) + " is outside the open interval (0,1)");
    }
    pb.rho[i] = logit(a);
  }
  return pb;
}

StepState StepState::initial(const NetworkTopology& topology) {
  return {Vector::Zero(static_cast<Eigen::Index>(topology.context_dim())),
          Vector::Zero(static_cast<Eigen::Index>(topology.input_dim))};
}

WeightMatrices init_network(const NetworkTopology& topology, std::uint64_t seed) {
  WeightMatrices w(topology);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](auto&& m, double fan_in) {
    const double r = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        m(i, j) = (2.0 * u - 1.0) * r;
      }
    }
  };
  fill(w.w_in(), static_cast<double>(topology.input_dim));
  fill(w.w_pb(), static_cast<double>(topology.pb_dim));
  fill(w.w_ctx(), static_cast<double>(topology.context_dim()));
  fill(w.w_out(), static_cast<double>(topology.hidden_dim));
  return w;
}

StepResult forward_step(const WeightMatrices& weights, const Vector& input, const PBState& pb, const StepState& state) {
  const auto& topo = weights.topology();
  if (static_cast<std::size_t>(input.size()) != topo.input_dim || pb.dim() != topo.pb_dim ||
      static_cast<std::size_t>(state.context.size()) != topo.context_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "forward_step: input, PB or context dimension does not match topology");
  }
  if (!input.allFinite()) throw Error(ErrorKind::NumericInput, "forward_step: non-finite input frame");
  if (!pb.rho.allFinite()) throw Error(ErrorKind::NumericInput, "forward_step: non-finite PB value");

  StepResult r;
  auto& c = r.cache;
  c.input = input;
  c.pb_activation = pb.activation();
  c.context_in = state.context;
  c.hidden_pre = weights.w_in() * input + weights.w_pb() * c.pb_activation + weights.w_ctx() * state.context +
                 weights.b_h();
  c.hidden = c.hidden_pre.array().tanh();
  c.output_pre = weights.w_out() * c.hidden + weights.b_out();
  c.output = sigmoid(c.output_pre);
  r.output = c.output;
  r.state.context = c.hidden;
  r.state.last_output = c.output;
  return r;
}

SequenceForward forward_sequence(const WeightMatrices& weights, const Frames& frames, const PBState& pb, LoopMode mode,
                                 const StepState& init) {
  if (frames.rows() < 2) throw Error(ErrorKind::Format, "forward_sequence: need at least 2 frames");
  const auto steps = frames.rows() - 1;
  SequenceForward out;
  out.predictions.resize(steps, frames.cols());
  out.caches.reserve(static_cast<std::size_t>(steps));
  StepState state = init;
  Vector input = frames.row(0).transpose();
  for (Eigen::Index t = 0; t < steps; ++t) {
    if (mode == LoopMode::Open) input = frames.row(t).transpose();
    auto step = forward_step(weights, input, pb, state);
    out.predictions.row(t) = step.output.transpose();
    if (mode == LoopMode::Closed) input = step.output;
    state = std::move(step.state);
    out.caches.push_back(std::move(step.cache));
  }
  out.final_state = std::move(state);
  return out;
}

SequenceForward forward_sequence(const WeightMatrices& weights, const Sequence& seq, const PBState& pb, LoopMode mode) {
  return forward_sequence(weights, seq.values(), pb, mode, StepState::initial(weights.topology()));
}

// ---------------------------------------------------------------------------

const LabeledPB* ModelSnapshot::find(const std::string& label) const {
  for (const auto& e : pb_table) {
    if (e.label == label) return &e;
  }
  return nullptr;
}

const LabeledPB& ModelSnapshot::at(const std::string& label) const {
  if (const auto* e = find(label)) return *e;
  std::string known;
  for (const auto& e : pb_table) known += (known.empty() ? "" : ", ") + e.label;
  throw Error(ErrorKind::UnknownLabel, "unknown label '" + label + "'; available: " + known);
}

std::vector<std::string> ModelSnapshot::labels() const {
  std::vector<std::string> out;
  for (const auto& e : pb_table) out.push_back(e.label);
  return out;
}

void ModelSnapshot::validate() const {
  topology.validate();
  if (!(weights.topology() == topology)) {
    throw Error(ErrorKind::DimensionMismatch, "model weights do not match the declared topology");
  }
  if (!weights.flat().allFinite()) throw Error(ErrorKind::NumericOverflow, "model contains non-finite weights");
  for (std::size_t i = 0; i < pb_table.size(); ++i) {
    const auto& e = pb_table[i];
    if (static_cast<std::size_t>(e.activation.size()) != topology.pb_dim) {
      throw Error(ErrorKind::DimensionMismatch, "PB entry '" + e.label + "' has the wrong dimension");
    }
    if (static_cast<std::size_t>(e.seed_frame.size()) != topology.input_dim) {
      throw Error(ErrorKind::DimensionMismatch, "seed frame for '" + e.label + "' has the wrong dimension");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (pb_table[j].label == e.label) throw Error(ErrorKind::Format, "duplicate PB label '" + e.label + "'");
    }
  }
  if (normalization) {
    normalization->validate();
    if (normalization->dim() != topology.input_dim) {
      throw Error(ErrorKind::DimensionMismatch, "model normalization dimension does not match input_dim");
    }
  }
}

// ---------------------------------------------------------------------------
// Text snapshot format, one item per line:
//
//   rnnpb-model
//   format_version = 1
//   input_dim = D / hidden_dim = H / pb_dim = P
//   norm_target_low, norm_target_high, norm_min, norm_max   (optional)
//   meta.<key> = <value>                                   (any number)
//   block <name> <rows> <cols>     followed by <rows> comma-separated rows
//   pb_table <count>               followed by `label;activations;seed_frame`
//   end
//
// Doubles use the shortest exact round-trip representation.

namespace {

constexpr const char* kMagic = "rnnpb-model";

[[noreturn]] void corrupt(const std::filesystem::path& path, std::size_t line, const std::string& why) {
  throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line) + ": corrupt model file: " + why);
}

}  // namespace

void save_model(const ModelSnapshot& snapshot, const std::filesystem::path& path) {
  snapshot.validate();
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << kMagic << '\n';
  out << "format_version = " << snapshot.format_version << '\n';
  out << "input_dim = " << snapshot.topology.input_dim << '\n';
  out << "hidden_dim = " << snapshot.topology.hidden_dim << '\n';
  out << "pb_dim = " << snapshot.topology.pb_dim << '\n';
  if (const auto& n = snapshot.normalization) {
    out << "norm_target_low = " << text::format_double(n->target_low) << '\n';
    out << "norm_target_high = " << text::format_double(n->target_high) << '\n';
    out << "norm_min = " << text::join(n->min) << '\n';
    out << "norm_max = " << text::join(n->max) << '\n';
  }
  for (const auto& [k, v] : snapshot.metadata) out << "meta." << k << " = " << v << '\n';
  const auto& flat = snapshot.weights.flat();
  for (const auto& b : snapshot.weights.blocks()) {
    out << "block " << b.name << ' ' << b.rows << ' ' << b.cols << '\n';
    for (Eigen::Index i = 0; i < b.rows; ++i) {
      for (Eigen::Index j = 0; j < b.cols; ++j) {
        if (j) out << ',';
        out << text::format_double(flat[b.offset + j * b.rows + i]);
      }
      out << '\n';
    }
  }
  out << "pb_table " << snapshot.pb_table.size() << '\n';
  for (const auto& e : snapshot.pb_table) {
    out << e.label << ';' << text::join(e.activation) << ';' << text::join(e.seed_frame) << '\n';
  }
  out << "end\n";
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

ModelSnapshot load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open model " + path.string());

  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    lines.push_back(std::move(l));
  }
  std::size_t pos = 0;
  auto next = [&]() -> const std::string& {
    if (pos >= lines.size()) corrupt(path, pos, "unexpected end of file");
    return lines[pos++];
  };

  if (next() != kMagic) corrupt(path, 1, "missing '" + std::string(kMagic) + "' header");

  ModelSnapshot m;
  std::map<std::string, std::string> header;
  while (pos < lines.size() && lines[pos].rfind("block ", 0) != 0) {
    const auto& l = next();
    const auto eq = l.find(" = ");
    if (eq == std::string::npos) corrupt(path, pos, "expected 'key = value'");
    header[l.substr(0, eq)] = l.substr(eq + 3);
  }
  auto get_size = [&](const std::string& key) {
    std::size_t v = 0;
    if (!header.count(key) || !text::parse_size(header[key], v)) corrupt(path, pos, "missing or bad '" + key + "'");
    return v;
  };

  const auto version = get_size("format_version");
  if (version != static_cast<std::size_t>(ModelSnapshot::kFormatVersion)) {
    throw Error(ErrorKind::Version, path.string() + ": unsupported model format_version " + std::to_string(version) +
                                        " (this build reads version " +
                                        std::to_string(ModelSnapshot::kFormatVersion) + ")");
  }
  m.format_version = static_cast<int>(version);
  m.topology = {get_size("input_dim"), get_size("hidden_dim"), get_size("pb_dim")};
  try {
    m.topology.validate();
  } catch (const Error& e) {
    corrupt(path, pos, e.what());
  }

  try {
    if (header.count("norm_min")) {
      NormStats n;
      if (!text::parse_double(header["norm_target_low"], n.target_low) ||
          !text::parse_double(header["norm_target_high"], n.target_high)) {
        corrupt(path, pos, "bad normalization targets");
      }
      n.min = text::parse_vector(header["norm_min"]);
      n.max = text::parse_vector(header["norm_max"]);
      m.normalization = n;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Parse) throw;
    corrupt(path, pos, e.what());
  }
  for (const auto& [k, v] : header) {
    if (k.rfind("meta.", 0) == 0) m.metadata[k.substr(5)] = v;
  }

  m.weights = WeightMatrices(m.topology);
  auto& flat = m.weights.flat();
  for (const auto& b : m.weights.blocks()) {
    const auto head = text::split(next(), ' ');
    std::size_t r = 0, c = 0;
    if (head.size() != 4 || head[0] != "block" || head[1] != b.name || !text::parse_size(head[2], r) ||
        !text::parse_size(head[3], c) || static_cast<Eigen::Index>(r) != b.rows ||
        static_cast<Eigen::Index>(c) != b.cols) {
      corrupt(path, pos, std::string("expected block ") + b.name + " " + std::to_string(b.rows) + " " +
                             std::to_string(b.cols));
    }
    for (Eigen::Index i = 0; i < b.rows; ++i) {
      const auto cells = text::split(next(), ',');
      if (static_cast<Eigen::Index>(cells.size()) != b.cols) corrupt(path, pos, "wrong row length in block " + std::string(b.name));
      for (Eigen::Index j = 0; j < b.cols; ++j) {
        if (!text::parse_double(cells[static_cast<std::size_t>(j)], flat[b.offset + j * b.rows + i])) {
          corrupt(path, pos, "non-numeric weight");
        }
      }
    }
  }

  const auto table_head = text::split(next(), ' ');
  std::size_t count = 0;
  if (table_head.size() != 2 || table_head[0] != "pb_table" || !text::parse_size(table_head[1], count)) {
    corrupt(path, pos, "expected 'pb_table <count>'");
  }
  for (std::size_t i = 0; i < count; ++i) {
    const auto fields = text::split(next(), ';');
    if (fields.size() != 3) corrupt(path, pos, "expected 'label;pb;seed_frame'");
    try {
      m.pb_table.push_back({fields[0], text::parse_vector(fields[1]), text::parse_vector(fields[2])});
    } catch (const Error& e) {
      corrupt(path, pos, e.what());
    }
  }
  if (next() != "end") corrupt(path, pos, "missing 'end' marker");

  m.validate();
  return m;
}

}  // namespace rnnpb
