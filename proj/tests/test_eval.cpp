#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "rnnpb/error.hpp"
#include "rnnpb/eval.hpp"

using namespace rnnpb;
using rnnpb::testing::TempDir;

namespace {

RecognitionConfig quick_config() {
  RecognitionConfig c;
  c.eta_r = 0.05;
  c.window = 1000;
  c.stop_patience = 20;
  c.stop_threshold = 1e-5;
  return c;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);) ++n;
  return n;
}

DistanceReport sample_report(std::size_t K) {
  DistanceReport r;
  r.matrix = Matrix(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < K; ++i) {
    r.labels.push_back("l" + std::to_string(i));
    for (std::size_t j = 0; j < K; ++j) {
      r.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.1 * static_cast<double>(i) + 1.0 / (1.0 + static_cast<double>(j) * 3.0);
    }
  }
  r.diagonal_min_rows = count_diagonal_minima(r.matrix);
  r.iterations.assign(K, 7);
  r.converged.assign(K, true);
  return r;
}

}  // namespace

TEST_CASE("diagonal minimum counting") {
  CHECK(count_diagonal_minima(Matrix::Constant(1, 1, 3.0)) == 1);
  Matrix m(3, 3);
  m << 0.1, 0.5, 0.4,  //
      0.2, 0.3, 0.9,   // row minimum off-diagonal
      0.8, 0.7, 0.7;   // tie is not strict
  CHECK(count_diagonal_minima(m) == 1);
}

TEST_CASE("distance matrix on the trained small model") {
  const auto& sm = rnnpb::testing::small_model();
  const auto report = distance_matrix(sm.trained.model, sm.data, quick_config());
  CHECK(report.labels == std::vector<std::string>{"class0", "class1"});
  CHECK(report.diagonal_min_rows == 2);
  CHECK((report.matrix.array() >= 0.0).all());
  CHECK(report.iterations.size() == 2);

  // column 1 alone is unchanged when recomputed without column 0
  const SequenceSet only1({sm.data[1]});
  const auto single = distance_matrix(sm.trained.model, only1, quick_config());
  CHECK(single.matrix(0, 0) == report.matrix(1, 1));
  CHECK(single.diagonal_min_rows == 1);
}

TEST_CASE("identical trained and recognized PB gives zero diagonal") {
  ModelSnapshot m;
  m.topology = {2, 3, 2};
  m.weights = WeightMatrices(m.topology);
  m.pb_table = {{"x", Vector::Constant(2, 0.5), Vector::Constant(2, 0.5)}};
  const SequenceSet set({Sequence("s", "x", Frames::Constant(6, 2, 0.2))});
  const auto r = distance_matrix(m, set, quick_config());
  CHECK(r.matrix(0, 0) == 0.0);
}

TEST_CASE("distance matrix rejects unknown labels") {
  const auto& sm = rnnpb::testing::small_model();
  const SequenceSet set({sm.data[0].relabeled("stranger")});
  CHECK_THROWS_AS(distance_matrix(sm.trained.model, set, quick_config()), Error);
}

TEST_CASE("regeneration error: perfect and zero-weight models") {
  ModelSnapshot m;
  m.topology = {2, 3, 1};
  m.weights = WeightMatrices(m.topology);
  m.pb_table = {{"flat", Vector::Constant(1, 0.5), Vector::Constant(2, 0.5)},
                {"wave", Vector::Constant(1, 0.5), Vector::Constant(2, 0.2)}};
  Frames wave(8, 2);
  for (Eigen::Index t = 0; t < 8; ++t) wave.row(t) << 0.2 + 0.05 * static_cast<double>(t), 0.8 - 0.03 * static_cast<double>(t);
  const SequenceSet set({Sequence("f", "flat", Frames::Constant(8, 2, 0.5)), Sequence("w", "wave", wave)});
  const auto table = regen_error_table(m, set, 50);

  CHECK(table.at("flat").mean == 0.0);
  CHECK(table.at("flat").per_step.size() == 7);

  double expected = 0.0;
  for (Eigen::Index t = 1; t < 8; ++t) expected += (wave.row(t).array() - 0.5).square().sum() / 2.0;
  expected /= 7.0;
  CHECK(table.at("wave").mean == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("trained model regenerates better than an untrained one") {
  const auto& sm = rnnpb::testing::small_model();
  ModelSnapshot untrained = sm.trained.model;
  untrained.weights = WeightMatrices(untrained.topology);
  const auto trained = regen_error_table(sm.trained.model, sm.data, 20);
  const auto baseline = regen_error_table(untrained, sm.data, 20);
  for (const auto& [label, e] : trained) CHECK(e.mean < baseline.at(label).mean);
}

TEST_CASE("perturb is deterministic and changes values") {
  const auto& sm = rnnpb::testing::small_model();
  const auto a = perturb(sm.data, 0.01, 3);
  const auto b = perturb(sm.data, 0.01, 3);
  CHECK(a[0].values() == b[0].values());
  CHECK(a[0].values() != sm.data[0].values());
  const double rms = std::sqrt((a[0].values() - sm.data[0].values()).squaredNorm() / static_cast<double>(a[0].values().size()));
  CHECK(rms == doctest::Approx(0.01).epsilon(0.3));
}

TEST_CASE("CSV report mirrors the matrix layout and round-trips") {
  TempDir dir("report");
  const auto r = sample_report(5);
  emit_report(r, dir / "m_distance.csv", ReportFormat::Csv);
  CHECK(count_lines(dir / "m_distance.csv") == 6);
  const auto back = read_distance_csv(dir / "m_distance.csv");
  CHECK(back.labels == r.labels);
  CHECK(back.matrix == r.matrix);
}

TEST_CASE("json-lines report has a metadata record and one record per cell") {
  TempDir dir("report");
  const auto r = sample_report(3);
  emit_report(r, dir / "m.jsonl", ReportFormat::JsonLines);
  std::ifstream in(dir / "m.jsonl");
  std::vector<nlohmann::json> records;
  for (std::string l; std::getline(in, l);) records.push_back(nlohmann::json::parse(l));
  REQUIRE(records.size() == 1 + 9);
  CHECK(records[0]["type"] == "meta");
  CHECK(records[0]["labels"].size() == 3);
  CHECK(records[0]["diagonal_min_rows"] == r.diagonal_min_rows);
  for (std::size_t i = 1; i < records.size(); ++i) {
    CHECK(records[i]["type"] == "cell");
    const auto row = (i - 1) / 3, col = (i - 1) % 3;
    CHECK(records[i]["train"] == r.labels[row]);
    CHECK(records[i]["rec"] == r.labels[col]);
    CHECK(records[i]["distance"].get<double>() == r.matrix(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)));
  }
}

TEST_CASE("report to an unwritable path is an I/O error") {
  try {
    emit_report(sample_report(2), "/nonexistent_dir/x.csv", ReportFormat::Csv);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}
