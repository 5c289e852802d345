#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "rnnpb/error.hpp"
#include "rnnpb/learning.hpp"
#include "rnnpb/recognition.hpp"

using namespace rnnpb;

namespace {

RecognitionConfig quick_config() {
  RecognitionConfig c;
  c.eta_r = 0.05;
  c.window = 1000;
  c.stop_patience = 20;
  c.stop_threshold = 1e-5;
  c.max_iters = 3000;
  return c;
}

ModelSnapshot zero_model(const NetworkTopology& topo) {
  ModelSnapshot m;
  m.topology = topo;
  m.weights = WeightMatrices(topo);
  m.pb_table = {{"a", Vector::Constant(static_cast<Eigen::Index>(topo.pb_dim), 0.5),
                 Vector::Constant(static_cast<Eigen::Index>(topo.input_dim), 0.5)}};
  return m;
}

}  // namespace

TEST_CASE("pb_distance") {
  Vector p(2), q(2);
  p << 0.1, 0.1;
  q << 0.4, 0.5;
  CHECK(pb_distance(p, q) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pb_distance(p, p) == 0.0);
  CHECK_THROWS_AS(pb_distance(p, Vector::Zero(3)), Error);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    const PBState a{Vector::NullaryExpr(3, [&] { return g(rng); })};
    const PBState b{Vector::NullaryExpr(3, [&] { return g(rng); })};
    CHECK(pb_distance(a, b) == pb_distance(b, a));
  }
}

TEST_CASE("nearest label ties break lexicographically") {
  ModelSnapshot m = zero_model({1, 1, 1});
  m.pb_table = {{"zeta", Vector::Constant(1, 0.4), Vector::Zero(1)},
                {"alpha", Vector::Constant(1, 0.6), Vector::Zero(1)}};
  std::map<std::string, double> all;
  const auto [label, d] = nearest_label(m, Vector::Constant(1, 0.5), &all);
  CHECK(label == "alpha");
  CHECK(d == doctest::Approx(0.1));
  CHECK(all.size() == 2);
}

TEST_CASE("recognizing a training sequence restores its PB") {
  const auto& m = rnnpb::testing::small_model();
  const auto& model = m.trained.model;
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    const auto r = recognize(model, m.data[i], quick_config());
    CHECK(r.nearest_label == m.data[i].label());
    const auto& d = r.distance_to_labels;
    for (const auto& [label, dist] : d) CHECK(d.at(m.data[i].label()) <= dist);
  }
}

TEST_CASE("recognition never touches the weights and is deterministic") {
  const auto& m = rnnpb::testing::small_model();
  const auto& model = m.trained.model;
  const auto before = model.weights.checksum();
  const auto a = recognize(model, m.data[1], quick_config());
  const auto b = recognize(model, m.data[1], quick_config());
  CHECK(model.weights.checksum() == before);
  CHECK(a.pb.rho == b.pb.rho);
  CHECK(a.pb_trajectory == b.pb_trajectory);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("trajectory rows and convergence tail") {
  const auto& m = rnnpb::testing::small_model();
  const auto cfg = quick_config();
  const auto r = recognize(m.trained.model, m.data[0], cfg);
  CHECK(static_cast<std::size_t>(r.pb_trajectory.rows()) == r.iterations);
  REQUIRE(r.converged);
  const auto n = r.pb_trajectory.rows();
  const auto tail = static_cast<Eigen::Index>(cfg.stop_patience);
  for (Eigen::Index i = n - tail; i < n; ++i) {
    CHECK((r.pb_trajectory.row(i) - r.pb_trajectory.row(i - 1)).cwiseAbs().maxCoeff() < cfg.stop_threshold);
  }
}

TEST_CASE("zero rate holds the PB at 0.5 and converges after the patience window") {
  const auto& m = rnnpb::testing::small_model();
  auto cfg = quick_config();
  cfg.eta_r = 0.0;
  const auto r = recognize(m.trained.model, m.data[0], cfg);
  CHECK(r.converged);
  CHECK(r.iterations == cfg.stop_patience);
  CHECK(r.pb.rho.isZero(0.0));
  CHECK(r.pb_trajectory.isApproxToConstant(0.5));
}

TEST_CASE("hitting max_iters reports no convergence") {
  const auto& m = rnnpb::testing::small_model();
  auto cfg = quick_config();
  cfg.max_iters = 3;
  cfg.stop_threshold = 0.0;
  const auto r = recognize(m.trained.model, m.data[0], cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 3);
}

TEST_CASE("window = full sequence: the update ignores nothing, a short window ignores the prefix") {
  const auto& m = rnnpb::testing::small_model();
  const auto& w = m.trained.model.weights;
  const Frames& x = m.data[0].values();
  const PBState pb{Vector::Constant(2, 0.2)};

  // window equal to all steps is exact BPTT over the whole sequence
  const auto full = recognition_step(w, x, pb, static_cast<std::size_t>(x.rows()) - 1, 0.1);
  const auto bptt = bptt_gradients(w, x, pb, {}, false);
  CHECK(full.rho.isApprox(pb.rho + 0.1 * bptt.delta_pb.colwise().sum().transpose(), 1e-14));

  // a window over the last 10 steps depends only on those frames and the
  // context entering them
  const std::size_t a = 10;
  const auto start = x.rows() - 1 - static_cast<Eigen::Index>(a);
  Frames padded = x;
  std::mt19937_64 rng(3);
  padded.topRows(start) = rnnpb::testing::random_frames(rng, start, x.cols(), 0.1, 0.9);
  StepState s = StepState::initial(w.topology());
  for (Eigen::Index t = 0; t < start; ++t) s = forward_step(w, padded.row(t).transpose(), pb, s).state;
  const auto direct = bptt_gradients(w, padded.bottomRows(static_cast<Eigen::Index>(a) + 1), pb, s.context, false);
  const auto step = recognition_step(w, padded, pb, a, 0.1);
  CHECK(step.rho.isApprox(pb.rho + 0.1 * direct.delta_pb.colwise().sum().transpose(), 1e-14));
}

TEST_CASE("recognize rejects dimension mismatch") {
  const auto m = zero_model({2, 3, 1});
  const Sequence s("s", "x", Frames::Constant(5, 3, 0.5));
  CHECK_THROWS_AS(recognize(m, s, quick_config()), Error);
}

TEST_CASE("streaming: boundaries and symmetric degenerate case") {
  const auto model = zero_model({2, 3, 2});
  RecognitionConfig cfg;
  cfg.window = 4;

  SUBCASE("exactly window frames emit nothing") {
    int left = 4;
    const auto out = recognize_stream(
        model, [&]() -> std::optional<Vector> { return left-- > 0 ? std::optional<Vector>(Vector::Constant(2, 0.3)) : std::nullopt; },
        cfg);
    CHECK(out.empty());
  }
  SUBCASE("constant feed on a zero-weight model keeps PB at 0.5") {
    int left = 12;
    const auto out = recognize_stream(
        model, [&]() -> std::optional<Vector> { return left-- > 0 ? std::optional<Vector>(Vector::Constant(2, 0.3)) : std::nullopt; },
        cfg);
    REQUIRE(out.size() == 8);
    CHECK(out.front().frame_index == 4);
    for (const auto& e : out) CHECK(e.pb.activation().isApprox(Vector::Constant(2, 0.5)));
  }
  SUBCASE("dimension change mid-stream names the frame") {
    StreamRecognizer rec(model, cfg);
    rec.push(Vector::Constant(2, 0.3));
    try {
      rec.push(Vector::Constant(3, 0.3));
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DimensionMismatch);
      CHECK(std::string(e.what()).find("frame 1") != std::string::npos);
    }
  }
}

TEST_CASE("streaming a repeated training sequence settles on its label") {
  const auto& m = rnnpb::testing::small_model();
  RecognitionConfig cfg;
  cfg.window = 15;
  cfg.eta_r = 0.05;
  cfg.stream_iterations = 5;
  for (const auto& seq : m.data.sequences()) {
    const auto T = seq.length();
    std::size_t i = 0;
    const auto out = recognize_stream(
        m.trained.model,
        [&]() -> std::optional<Vector> {
          if (i >= 3 * T) return std::nullopt;
          return seq.frame(i++ % T);
        },
        cfg);
    const auto before = m.trained.model.weights.checksum();
    for (const auto& e : out) {
      if (e.frame_index >= T) CHECK(e.nearest_label == seq.label());
    }
    CHECK(m.trained.model.weights.checksum() == before);
  }
}
