#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rnnpb/network.hpp"
#include "rnnpb/recognition.hpp"

namespace rnnpb {

/// Trained-vs-recognized PB distances. Row i is the trained PB of labels[i],
/// column j the PB recognized from the test data labelled labels[j].
struct DistanceReport {
  std::vector<std::string> labels;
  Matrix matrix;
  std::size_t diagonal_min_rows = 0;
  std::vector<std::size_t> iterations;  // per column
  std::vector<bool> converged;          // per column
  std::vector<Vector> recognized;       // per column, activation space
  std::map<std::string, std::string> metadata;
};

/// Counts rows whose diagonal entry is strictly below every other entry in
/// the row. A 1x1 matrix counts as one.
std::size_t count_diagonal_minima(const Matrix& m);

/// Recognizes every test sequence (normalized) and tabulates distances to
/// the trained PB values. Labels with several test sequences use the mean
/// recognized activation.
DistanceReport distance_matrix(const ModelSnapshot& model, const SequenceSet& test_set,
                               const RecognitionConfig& config);

struct RegenError {
  std::vector<double> per_step;  // MSE of generated frame t+1 against the data
  double mean = 0.0;
};

/// Closed-loop regeneration of each label from its stored PB and seed frame,
/// scored against that label's first training sequence in normalized space
/// over min(steps, T-1) predicted frames.
std::map<std::string, RegenError> regen_error_table(const ModelSnapshot& model, const SequenceSet& train_set,
                                                    std::size_t steps);

/// Copies of `set` with i.i.d. Gaussian noise of standard deviation `stddev`
/// added to every value; deterministic in `seed`.
SequenceSet perturb(const SequenceSet& set, double stddev, std::uint64_t seed);

enum class ReportFormat { Csv, JsonLines };

void emit_report(const DistanceReport& report, const std::filesystem::path& path, ReportFormat format);
void emit_regen_report(const std::map<std::string, RegenError>& table, const std::filesystem::path& path);

/// Reads back the CSV matrix written by emit_report.
DistanceReport read_distance_csv(const std::filesystem::path& path);

}  // namespace rnnpb
