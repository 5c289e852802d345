#include "rnnpb/seqdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "rnnpb/error.hpp"
#include "rnnpb/text.hpp"

namespace rnnpb {

namespace fs = std::filesystem;

Sequence::Sequence(std::string id, std::string label, Frames values, double sample_rate_hz)
    : id_(std::move(id)), label_(std::move(label)), values_(std::move(values)), sample_rate_hz_(sample_rate_hz) {
  if (values_.rows() < 2) {
    throw Error(ErrorKind::Format, "sequence '" + id_ + "' has " + std::to_string(values_.rows()) +
                                       " time steps; at least 2 are required");
  }
  if (values_.cols() < 1) throw Error(ErrorKind::Format, "sequence '" + id_ + "' has no columns");
  if (!values_.allFinite()) throw Error(ErrorKind::NumericInput, "sequence '" + id_ + "' contains non-finite values");
  if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) {
    throw Error(ErrorKind::Format, "sequence '" + id_ + "' has a non-positive sample rate");
  }
}

Sequence Sequence::with_values(Frames values) const {
  return Sequence(id_, label_, std::move(values), sample_rate_hz_);
}

Sequence Sequence::relabeled(std::string label) const {
  return Sequence(id_, std::move(label), values_, sample_rate_hz_);
}

// ---------------------------------------------------------------------------

bool NormStats::is_constant(std::size_t d) const {
  return max[static_cast<Eigen::Index>(d)] == min[static_cast<Eigen::Index>(d)];
}

void NormStats::validate() const {
  if (min.size() != max.size() || min.size() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "normalizer min/max sizes differ or are empty");
  }
  if (!(target_low < target_high)) throw Error(ErrorKind::Domain, "normalizer target_low must be below target_high");
  for (Eigen::Index d = 0; d < min.size(); ++d) {
    if (!(min[d] <= max[d])) throw Error(ErrorKind::Domain, "normalizer min exceeds max in dimension " + std::to_string(d));
  }
}

Vector NormStats::apply(const Vector& x) const {
  if (x.size() != min.size()) {
    throw Error(ErrorKind::DimensionMismatch, "normalizer expects dimension " + std::to_string(min.size()) + ", got " +
                                                  std::to_string(x.size()));
  }
  const double band = target_high - target_low;
  const double mid = 0.5 * (target_low + target_high);
  Vector y(x.size());
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double span = max[d] - min[d];
    y[d] = span == 0.0 ? mid : target_low + (x[d] - min[d]) / span * band;
  }
  return y;
}

Vector NormStats::invert(const Vector& y) const {
  if (y.size() != min.size()) {
    throw Error(ErrorKind::DimensionMismatch, "normalizer expects dimension " + std::to_string(min.size()) + ", got " +
                                                  std::to_string(y.size()));
  }
  const double band = target_high - target_low;
  Vector x(y.size());
  for (Eigen::Index d = 0; d < y.size(); ++d) {
    const double span = max[d] - min[d];
    // constant dimensions collapse to their single observed value
    x[d] = span == 0.0 ? min[d] : min[d] + (y[d] - target_low) / band * span;
  }
  return x;
}

Frames NormStats::apply(const Frames& x) const {
  if (x.rows() == 0) throw Error(ErrorKind::Format, "cannot normalize an empty slice");
  Frames out(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) out.row(t) = apply(Vector(x.row(t).transpose())).transpose();
  return out;
}

Frames NormStats::invert(const Frames& y) const {
  if (y.rows() == 0) throw Error(ErrorKind::Format, "cannot denormalize an empty slice");
  Frames out(y.rows(), y.cols());
  for (Eigen::Index t = 0; t < y.rows(); ++t) out.row(t) = invert(Vector(y.row(t).transpose())).transpose();
  return out;
}

// ---------------------------------------------------------------------------

SequenceSet::SequenceSet(std::vector<Sequence> sequences, std::optional<NormStats> normalization)
    : sequences_(std::move(sequences)), normalization_(std::move(normalization)) {
  if (sequences_.empty()) throw Error(ErrorKind::Format, "sequence set is empty");
  dim_ = sequences_.front().dim();
  std::unordered_set<std::string> ids;
  for (const auto& s : sequences_) {
    if (s.dim() != dim_) {
      throw Error(ErrorKind::DimensionMismatch, "sequence '" + s.id() + "' has dimension " + std::to_string(s.dim()) +
                                                    ", expected " + std::to_string(dim_));
    }
    if (!ids.insert(s.id()).second) throw Error(ErrorKind::Format, "duplicate sequence id '" + s.id() + "'");
  }
  if (normalization_ && normalization_->dim() != dim_) {
    throw Error(ErrorKind::DimensionMismatch, "normalization dimension does not match sequence set");
  }
}

std::vector<std::string> SequenceSet::labels() const {
  std::vector<std::string> out;
  for (const auto& s : sequences_) {
    if (std::find(out.begin(), out.end(), s.label()) == out.end()) out.push_back(s.label());
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Metadata {
  std::optional<std::string> label;
  std::optional<double> rate;
};

Metadata parse_metadata(std::string_view line) {
  Metadata meta;
  line.remove_prefix(1);  // '#'
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "label") {
      meta.label = value;
    } else if (key == "rate") {
      double r = 0.0;
      if (!text::parse_double(value, r)) throw Error(ErrorKind::Parse, "bad rate value '" + value + "'");
      meta.rate = r;
    }
  }
  return meta;
}

}  // namespace

Sequence read_sequence_csv(const fs::path& file, const CsvLayout& layout) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file.string());

  const std::string where = file.string();
  std::string line;
  std::size_t line_no = 0;
  Metadata meta;
  std::optional<std::size_t> dim;
  std::vector<double> data;

  bool header_seen = false;
  bool meta_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    if (line.front() == '#') {
      // only the first comment line carries label/rate; later ones are free text
      if (!header_seen && !meta_seen) meta = parse_metadata(line);
      meta_seen = true;
      continue;
    }
    const auto cells = text::split(line, layout.delimiter);
    if (!header_seen) {
      header_seen = true;
      dim = cells.size();
      continue;
    }
    if (cells.size() != *dim) {
      throw Error(ErrorKind::Format, where + ":" + std::to_string(line_no) + ": expected " + std::to_string(*dim) +
                                         " columns, found " + std::to_string(cells.size()));
    }
    for (const auto& cell : cells) {
      double v = 0.0;
      if (!text::parse_double(text::trim(cell), v)) {
        throw Error(ErrorKind::Parse, where + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                                          std::string(text::trim(cell)) + "'");
      }
      data.push_back(v);
    }
  }
  if (!dim || data.empty()) throw Error(ErrorKind::Format, where + ": no data rows");

  const auto rows = static_cast<Eigen::Index>(data.size() / *dim);
  Frames values = Eigen::Map<Frames>(data.data(), rows, static_cast<Eigen::Index>(*dim));

  const std::string stem = file.stem().string();
  std::string label = meta.label.value_or(stem.substr(0, stem.find(layout.filename_label_separator)));
  try {
    return Sequence(stem, std::move(label), std::move(values), meta.rate.value_or(120.0));
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
}

void write_sequence_csv(const Sequence& seq, const fs::path& file, const std::vector<std::string>& column_names,
                        const std::vector<std::string>& comments) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + file.string());
  write_sequence_csv(seq, out, column_names, comments);
  if (!out) throw Error(ErrorKind::Io, "failed writing " + file.string());
}

void write_sequence_csv(const Sequence& seq, std::ostream& out, const std::vector<std::string>& column_names,
                        const std::vector<std::string>& comments) {
  out << "# label=" << seq.label() << " rate=" << text::format_double(seq.sample_rate_hz()) << '\n';
  for (const auto& c : comments) out << "# " << c << '\n';
  for (std::size_t d = 0; d < seq.dim(); ++d) {
    if (d) out << ',';
    out << (d < column_names.size() ? column_names[d] : "x" + std::to_string(d));
  }
  out << '\n';
  const auto& v = seq.values();
  for (Eigen::Index t = 0; t < v.rows(); ++t) {
    for (Eigen::Index d = 0; d < v.cols(); ++d) {
      if (d) out << ',';
      out << text::format_double(v(t, d));
    }
    out << '\n';
  }
}

SequenceSet load_sequences(const fs::path& path, const CsvLayout& layout) {
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "no such file or directory: " + path.string());
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorKind::Format, "no .csv files in " + path.string());
  } else {
    files.push_back(path);
  }
  std::vector<Sequence> seqs;
  seqs.reserve(files.size());
  for (const auto& f : files) {
    seqs.push_back(read_sequence_csv(f, layout));
    if (seqs.back().dim() != seqs.front().dim()) {
      throw Error(ErrorKind::DimensionMismatch, f.string() + ": dimension " + std::to_string(seqs.back().dim()) +
                                                    " differs from " + std::to_string(seqs.front().dim()) + " in " +
                                                    files.front().string());
    }
  }
  return SequenceSet(std::move(seqs));
}

void save_sequences(const SequenceSet& set, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& s : set.sequences()) write_sequence_csv(s, dir / (s.id() + ".csv"));
}

// ---------------------------------------------------------------------------

NormStats fit_normalizer(const SequenceSet& set, double target_low, double target_high) {
  NormStats stats;
  stats.target_low = target_low;
  stats.target_high = target_high;
  const auto D = static_cast<Eigen::Index>(set.dim());
  stats.min = Vector::Constant(D, std::numeric_limits<double>::infinity());
  stats.max = Vector::Constant(D, -std::numeric_limits<double>::infinity());
  for (const auto& s : set.sequences()) {
    stats.min = stats.min.cwiseMin(s.values().colwise().minCoeff().transpose());
    stats.max = stats.max.cwiseMax(s.values().colwise().maxCoeff().transpose());
  }
  stats.validate();
  return stats;
}

Sequence apply_normalizer(const Sequence& seq, const NormStats& stats) {
  return seq.with_values(stats.apply(seq.values()));
}

SequenceSet apply_normalizer(const SequenceSet& set, const NormStats& stats) {
  if (stats.dim() != set.dim()) throw Error(ErrorKind::DimensionMismatch, "normalizer dimension does not match set");
  std::vector<Sequence> out;
  out.reserve(set.size());
  for (const auto& s : set.sequences()) out.push_back(apply_normalizer(s, stats));
  return SequenceSet(std::move(out), stats);
}

Sequence invert_normalizer(const Sequence& seq, const NormStats& stats) {
  return seq.with_values(stats.invert(seq.values()));
}

// ---------------------------------------------------------------------------

namespace {

// mt19937_64 output is fully specified by the standard; the conversion to
// [0,1) is done here rather than through a distribution object so the corpus
// is identical across standard library implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<std::size_t> permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

// Stratified draw: class k gets a value from the k-th of K equal strata of
// [lo, hi], so no two classes collide.
std::vector<double> stratified(std::size_t K, double lo, double hi, std::mt19937_64& rng) {
  const auto order = permutation(K, rng);
  std::vector<double> out(K);
  const double width = (hi - lo) / static_cast<double>(K);
  for (std::size_t k = 0; k < K; ++k) {
    out[k] = lo + (static_cast<double>(order[k]) + 0.2 + 0.6 * unit(rng)) * width;
  }
  return out;
}

}  // namespace

SequenceSet synth_corpus(const SynthSpec& spec) {
  if (spec.classes < 2) throw Error(ErrorKind::Argument, "synth: classes must be >= 2");
  if (spec.dim < 1) throw Error(ErrorKind::Argument, "synth: dim must be >= 1");
  if (spec.length < 20) throw Error(ErrorKind::Argument, "synth: length must be >= 20");
  if (!(spec.period > 0.0)) throw Error(ErrorKind::Argument, "synth: period must be positive");

  std::mt19937_64 rng(spec.seed);
  const auto K = spec.classes;
  const auto amplitude = stratified(K, 1.0, 2.0, rng);
  const auto frequency = stratified(K, 0.6, 2.4, rng);
  const auto offset = stratified(K, -0.5, 0.5, rng);

  std::vector<Sequence> seqs;
  seqs.reserve(K);
  const auto T = static_cast<Eigen::Index>(spec.length);
  const auto D = static_cast<Eigen::Index>(spec.dim);
  for (std::size_t k = 0; k < K; ++k) {
    Frames x(T, D);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index d = 0; d < D; ++d) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(d) / static_cast<double>(D);
        x(t, d) = offset[k] + amplitude[k] * std::sin(2.0 * std::numbers::pi * frequency[k] * static_cast<double>(t) /
                                                              spec.period +
                                                          phase);
      }
    }
    const std::string label = "class" + std::to_string(k);
    seqs.emplace_back(label, label, std::move(x), spec.sample_rate_hz);
  }
  return SequenceSet(std::move(seqs));
}

}  // namespace rnnpb
