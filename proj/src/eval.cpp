#include "rnnpb/eval.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "rnnpb/error.hpp"
#include "rnnpb/generation.hpp"
#include "rnnpb/text.hpp"

namespace rnnpb {

std::size_t count_diagonal_minima(const Matrix& m) {
  if (m.rows() == 1 && m.cols() == 1) return 1;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    bool strict = true;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j != i && !(m(i, i) < m(i, j))) strict = false;
    }
    if (strict) ++count;
  }
  return count;
}

DistanceReport distance_matrix(const ModelSnapshot& model, const SequenceSet& test_set,
                               const RecognitionConfig& config) {
  DistanceReport report;
  report.labels = test_set.labels();
  for (const auto& l : report.labels) {
    if (!model.find(l)) throw Error(ErrorKind::UnknownLabel, "test label '" + l + "' is not in the model's PB table");
  }
  const auto K = static_cast<Eigen::Index>(report.labels.size());
  report.matrix = Matrix::Zero(K, K);

  for (Eigen::Index j = 0; j < K; ++j) {
    const auto& label = report.labels[static_cast<std::size_t>(j)];
    Vector mean = Vector::Zero(static_cast<Eigen::Index>(model.topology.pb_dim));
    double count = 0.0;
    std::size_t iters = 0;
    bool converged = true;
    for (const auto& seq : test_set.sequences()) {
      if (seq.label() != label) continue;
      const auto r = recognize(model, seq, config);
      mean += r.pb.activation();
      iters += r.iterations;
      converged = converged && r.converged;
      count += 1.0;
    }
    mean /= count;
    report.recognized.push_back(mean);
    report.iterations.push_back(iters);
    report.converged.push_back(converged);
    for (Eigen::Index i = 0; i < K; ++i) {
      report.matrix(i, j) = pb_distance(model.at(report.labels[static_cast<std::size_t>(i)]).activation, mean);
    }
  }
  report.diagonal_min_rows = count_diagonal_minima(report.matrix);
  report.metadata = {{"eta_r", text::format_double(config.eta_r)},
                     {"window", std::to_string(config.window)},
                     {"stop_threshold", text::format_double(config.stop_threshold)},
                     {"stop_patience", std::to_string(config.stop_patience)},
                     {"max_iters", std::to_string(config.max_iters)}};
  return report;
}

std::map<std::string, RegenError> regen_error_table(const ModelSnapshot& model, const SequenceSet& train_set,
                                                    std::size_t steps) {
  std::map<std::string, RegenError> table;
  for (const auto& label : train_set.labels()) {
    const auto& entry = model.at(label);
    const Sequence* seq = nullptr;
    for (const auto& s : train_set.sequences()) {
      if (s.label() == label) {
        seq = &s;
        break;
      }
    }
    const auto n = std::min(steps, seq->length() - 1);
    if (n == 0) throw Error(ErrorKind::Argument, "regeneration needs at least one step");
    const Frames generated = rollout(model, entry.activation, seq->frame(0), n);
    RegenError err;
    for (std::size_t t = 1; t <= n; ++t) {
      const auto row = static_cast<Eigen::Index>(t);
      const double mse = (generated.row(row) - seq->values().row(row)).squaredNorm() /
                         static_cast<double>(seq->dim());
      err.per_step.push_back(mse);
      err.mean += mse;
    }
    err.mean /= static_cast<double>(n);
    table[label] = std::move(err);
  }
  return table;
}

SequenceSet perturb(const SequenceSet& set, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  std::vector<Sequence> out;
  for (const auto& s : set.sequences()) {
    Frames v = s.values();
    for (Eigen::Index t = 0; t < v.rows(); ++t) {
      for (Eigen::Index d = 0; d < v.cols(); ++d) {
        // Box-Muller, one variate per pair of uniforms
        const double g = std::sqrt(-2.0 * std::log(unit())) * std::cos(2.0 * std::numbers::pi * unit());
        v(t, d) += stddev * g;
      }
    }
    out.push_back(s.with_values(std::move(v)));
  }
  return SequenceSet(std::move(out), set.normalization());
}

void emit_report(const DistanceReport& report, const std::filesystem::path& path, ReportFormat format) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const auto K = report.labels.size();
  if (format == ReportFormat::Csv) {
    out << "train\\rec";
    for (const auto& l : report.labels) out << ',' << l;
    out << '\n';
    for (std::size_t i = 0; i < K; ++i) {
      out << report.labels[i];
      for (std::size_t j = 0; j < K; ++j) {
        out << ',' << text::format_double(report.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      }
      out << '\n';
    }
  } else {
    nlohmann::json meta = {{"type", "meta"},
                           {"labels", report.labels},
                           {"diagonal_min_rows", report.diagonal_min_rows},
                           {"iterations", report.iterations},
                           {"converged", report.converged},
                           {"config", report.metadata}};
    out << meta.dump() << '\n';
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < K; ++j) {
        nlohmann::json cell = {{"type", "cell"},
                               {"train", report.labels[i]},
                               {"rec", report.labels[j]},
                               {"distance", report.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))}};
        out << cell.dump() << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

void emit_regen_report(const std::map<std::string, RegenError>& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "label,mean_mse";
  std::size_t width = 0;
  for (const auto& [_, e] : table) width = std::max(width, e.per_step.size());
  for (std::size_t t = 1; t <= width; ++t) out << ",step" << t;
  out << '\n';
  for (const auto& [label, e] : table) {
    out << label << ',' << text::format_double(e.mean);
    for (double v : e.per_step) out << ',' << text::format_double(v);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

DistanceReport read_distance_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, path.string() + ": empty report");
  auto header = text::split(line, ',');
  DistanceReport r;
  r.labels.assign(header.begin() + 1, header.end());
  const auto K = static_cast<Eigen::Index>(r.labels.size());
  r.matrix = Matrix::Zero(K, K);
  for (Eigen::Index i = 0; i < K; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorKind::Format, path.string() + ": missing matrix row");
    const auto cells = text::split(line, ',');
    if (static_cast<Eigen::Index>(cells.size()) != K + 1 || cells[0] != r.labels[static_cast<std::size_t>(i)]) {
      throw Error(ErrorKind::Format, path.string() + ": malformed matrix row " + std::to_string(i + 1));
    }
    for (Eigen::Index j = 0; j < K; ++j) {
      if (!text::parse_double(cells[static_cast<std::size_t>(j) + 1], r.matrix(i, j))) {
        throw Error(ErrorKind::Parse, path.string() + ": non-numeric distance");
      }
    }
  }
  r.diagonal_min_rows = count_diagonal_minima(r.matrix);
  return r;
}

}  // namespace rnnpb
