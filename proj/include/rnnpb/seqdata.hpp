#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <optional>
#include <string>
#include <vector>

#include "rnnpb/types.hpp"

namespace rnnpb {

/// A labeled multivariate time series, T x D, with T >= 2 and finite values.
class Sequence {
 public:
  Sequence(std::string id, std::string label, Frames values, double sample_rate_hz = 120.0);

  const std::string& id() const { return id_; }
  const std::string& label() const { return label_; }
  const Frames& values() const { return values_; }
  double sample_rate_hz() const { return sample_rate_hz_; }

  std::size_t length() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
  Vector frame(std::size_t t) const { return values_.row(static_cast<Eigen::Index>(t)).transpose(); }

  Sequence with_values(Frames values) const;
  Sequence relabeled(std::string label) const;

 private:
  std::string id_;
  std::string label_;
  Frames values_;
  double sample_rate_hz_;
};

/// Per-dimension affine map of [min, max] onto [target_low, target_high].
struct NormStats {
  Vector min;
  Vector max;
  double target_low = 0.1;
  double target_high = 0.9;

  std::size_t dim() const { return static_cast<std::size_t>(min.size()); }
  bool is_constant(std::size_t d) const;
  void validate() const;

  Vector apply(const Vector& x) const;
  Vector invert(const Vector& y) const;
  Frames apply(const Frames& x) const;
  Frames invert(const Frames& y) const;
};

class SequenceSet {
 public:
  explicit SequenceSet(std::vector<Sequence> sequences, std::optional<NormStats> normalization = std::nullopt);

  const std::vector<Sequence>& sequences() const { return sequences_; }
  std::size_t size() const { return sequences_.size(); }
  std::size_t dim() const { return dim_; }
  const std::optional<NormStats>& normalization() const { return normalization_; }
  const Sequence& operator[](std::size_t i) const { return sequences_[i]; }

  /// Labels in first-appearance order, deduplicated.
  std::vector<std::string> labels() const;

 private:
  std::vector<Sequence> sequences_;
  std::size_t dim_ = 0;
  std::optional<NormStats> normalization_;
};

struct CsvLayout {
  char delimiter = ',';
  /// Used when a file has no `# label=` metadata line: the label becomes the
  /// file stem up to the first occurrence of this character.
  char filename_label_separator = '_';
};

Sequence read_sequence_csv(const std::filesystem::path& file, const CsvLayout& layout = {});
/// Extra `comments` are written as `# ...` lines after the label line.
void write_sequence_csv(const Sequence& seq, const std::filesystem::path& file,
                        const std::vector<std::string>& column_names = {},
                        const std::vector<std::string>& comments = {});
void write_sequence_csv(const Sequence& seq, std::ostream& out, const std::vector<std::string>& column_names = {},
                        const std::vector<std::string>& comments = {});

/// Reads a single CSV file or every `*.csv` in a directory (sorted by name).
SequenceSet load_sequences(const std::filesystem::path& path, const CsvLayout& layout = {});
/// Writes one `<id>.csv` per sequence into `dir`, creating it if needed.
void save_sequences(const SequenceSet& set, const std::filesystem::path& dir);

NormStats fit_normalizer(const SequenceSet& set, double target_low = 0.1, double target_high = 0.9);
SequenceSet apply_normalizer(const SequenceSet& set, const NormStats& stats);
Sequence apply_normalizer(const Sequence& seq, const NormStats& stats);
Sequence invert_normalizer(const Sequence& seq, const NormStats& stats);

struct SynthSpec {
  std::size_t classes = 5;
  std::size_t dim = 9;
  std::size_t length = 200;
  std::uint64_t seed = 7;
  /// Time steps spanned by one unit of frequency.
  double period = 50.0;
  double sample_rate_hz = 120.0;
};

/// Deterministic oscillator corpus: one sequence per class, labels
/// "class0".."class{K-1}".
SequenceSet synth_corpus(const SynthSpec& spec);

}  // namespace rnnpb
