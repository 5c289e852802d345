// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "rnnpb/defaults.hpp"
#include "rnnpb/eval.hpp"
#include "rnnpb/generation.hpp"
#include "rnnpb/learning.hpp"
#include "rnnpb/recognition.hpp"

using namespace rnnpb;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr double kFiniteDiffStep = 1e-5;
constexpr double kGradSeconds = 10.0;
constexpr std::size_t kGradNets = 24;
constexpr std::size_t kRateHistories = 200;
constexpr std::size_t kRateEpochs = 50;
constexpr std::size_t kDeskEpochs = 20000;
constexpr double kDeskSeconds = 600.0;
constexpr std::size_t kDiagonalRowsRequired = 4;
constexpr std::size_t kRestoredRequired = 4;
constexpr std::size_t kRegenSteps = 50;
constexpr double kRegenRatio = 5.0;
constexpr double kRoundTripTolerance = 1e-12;

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Rates that make desk-scale training reach low error within the epoch
// budget; the published rates are far too small for that (see README).
TrainerConfig desk_trainer(std::size_t epochs, std::uint64_t seed) {
  TrainerConfig c;
  c.eta_init = 1e-3;
  c.eta_min = 1e-8;
  c.eta_max = 1e-2;
  c.xi_plus = 1.05;
  c.xi_minus = 0.7;
  c.m_gamma = 10.0;
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

RecognitionConfig desk_recognition() {
  RecognitionConfig c;
  c.window = 199;
  c.max_iters = 3000;
  return c;
}

void gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::size_t n = 0; n < kGradNets; ++n) {
    const NetworkTopology topo{1 + rng() % 3, 1 + rng() % 4, 1 + rng() % 2};
    const auto T = static_cast<Eigen::Index>(2 + rng() % 5);
    const auto weights = init_network(topo, rng());
    std::uniform_real_distribution<double> u(0.05, 0.95), r(-1.5, 1.5);
    Frames x(T, static_cast<Eigen::Index>(topo.input_dim));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    Vector rho(static_cast<Eigen::Index>(topo.pb_dim));
    for (Eigen::Index k = 0; k < rho.size(); ++k) rho[k] = r(rng);

    const auto result = bptt_gradients(weights, x, PBState{rho});
    const Vector numeric = oracle::weight_gradient(weights, x, rho, kFiniteDiffStep);
    for (Eigen::Index i = 0; i < numeric.size(); ++i, ++compared)
      worst = std::max(worst, oracle::relative_error(result.grad.flat()[i], numeric[i]));
    const Vector pb_numeric = oracle::pb_gradient(weights, x, rho, kFiniteDiffStep);
    const Vector pb_analytic = -result.delta_pb.colwise().sum().transpose();
    for (Eigen::Index k = 0; k < rho.size(); ++k, ++compared)
      worst = std::max(worst, oracle::relative_error(pb_analytic[k], pb_numeric[k]));
  }
  const double secs = seconds_since(t0);
  report(1, "gradient correctness", worst <= kGradTolerance && secs < kGradSeconds,
         std::to_string(kGradNets) + " nets, " + std::to_string(compared) + " partials, max rel err " +
             fmt("%.2e", worst) + " (tol 1e-4), " + fmt("%.2f s", secs));
}

void adaptive_rate_law() {
  TrainerConfig cfg;  // published constants
  const NetworkTopology topo{2, 3, 1};
  std::mt19937_64 rng(99);
  std::size_t checks = 0, violations = 0;
  for (std::size_t h = 0; h < kRateHistories; ++h) {
    TrainerState state = TrainerState::initial(topo, cfg);
    // Start some histories near the bounds so the clamps are exercised.
    if (h % 3 == 1) state.eta.flat().setConstant(cfg.eta_max * 0.9999995);
    if (h % 3 == 2) state.eta.flat().setConstant(cfg.eta_min * 1.0000005);
    WeightMatrices grad(topo);
    for (std::size_t e = 0; e < kRateEpochs; ++e) {
      for (Eigen::Index i = 0; i < grad.flat().size(); ++i) {
        const auto pick = rng() % 5;
        const double mag = std::ldexp(1.0, static_cast<int>(rng() % 20) - 10);
        grad.flat()[i] = pick == 0 ? 0.0 : (pick % 2 ? mag : -mag);
      }
      const WeightMatrices before = state.eta, prev = state.prev_grad;
      update_learning_rates(state, grad, cfg);
      for (Eigen::Index i = 0; i < grad.flat().size(); ++i, ++checks) {
        const double s = prev.flat()[i] * grad.flat()[i];
        const double b = before.flat()[i];
        const double expected = s > 0   ? std::min(b * cfg.xi_plus, cfg.eta_max)
                                : s < 0 ? std::max(b * cfg.xi_minus, cfg.eta_min)
                                        : b;
        const double got = state.eta.flat()[i];
        if (got != expected || got < cfg.eta_min || got > cfg.eta_max) ++violations;
      }
      if (state.prev_grad.flat() != grad.flat()) ++violations;
    }
  }
  const bool constants = cfg.xi_plus == 1.000001 && cfg.xi_minus == 0.999999 && cfg.eta_max == 1.0e-4 &&
                         cfg.eta_min == 1.0e-8;
  report(2, "adaptive-rate law", violations == 0 && constants,
         std::to_string(checks) + " per-weight updates, " + std::to_string(violations) + " violations");
}

void desk_reproduction() {
  const auto raw = synth_corpus({5, 9, 200, 7, 50.0});
  const auto set = apply_normalizer(raw, fit_normalizer(raw));

  const auto t0 = Clock::now();
  const auto trained = train(set, {9, 30, 2}, desk_trainer(kDeskEpochs, 1));
  const double train_secs = seconds_since(t0);
  const auto dist = distance_matrix(trained.model, set, desk_recognition());
  const double secs = seconds_since(t0);

  std::printf("  desk model: %zu epochs, final mean MSE %.3e, %.1f s training\n", trained.report.epochs_run,
              trained.report.final_mean_mse(), train_secs);
  std::printf("  distance matrix (row = trained, column = recognized):\n");
  for (Eigen::Index i = 0; i < dist.matrix.rows(); ++i) {
    std::printf("    %-7s", dist.labels[static_cast<std::size_t>(i)].c_str());
    for (Eigen::Index j = 0; j < dist.matrix.cols(); ++j) std::printf(" %.4f", dist.matrix(i, j));
    std::printf("\n");
  }
  report(3, "distance-matrix diagonal minima",
         dist.diagonal_min_rows >= kDiagonalRowsRequired && secs <= kDeskSeconds,
         std::to_string(dist.diagonal_min_rows) + "/5 rows diagonal-minimal (need 4), " + fmt("%.1f s", secs));

  // Column j holds distances from the recognized PB of class j to every trained PB.
  std::size_t restored = 0;
  const auto K = dist.matrix.rows();
  for (Eigen::Index j = 0; j < K; ++j) {
    double others = 0.0;
    for (Eigen::Index i = 0; i < K; ++i)
      if (i != j) others += pb_distance(dist.recognized[static_cast<std::size_t>(j)], trained.model.pb_table[static_cast<std::size_t>(i)].activation);
    others /= static_cast<double>(K - 1);
    if (dist.matrix(j, j) < others) ++restored;
  }
  report(4, "recognition restores trained PB", restored >= kRestoredRequired,
         std::to_string(restored) + "/5 classes closer to own PB than mean of others (need 4)");

  const auto regen = regen_error_table(trained.model, set, kRegenSteps);
  std::size_t within = 0;
  std::string detail;
  for (const auto& [label, e] : regen) {
    const double ratio = e.mean / trained.report.final_label_mse.at(label);
    if (ratio <= kRegenRatio) ++within;
    detail += label + fmt(" %.3g", ratio) + "x ";
  }
  report(5, "generation fidelity", within == regen.size(),
         std::to_string(within) + "/" + std::to_string(regen.size()) + " labels within 5x training MSE; " + detail);
}

void interpolation_property() {
  const auto raw = synth_corpus({2, 9, 200, 7, 50.0});
  const auto set = apply_normalizer(raw, fit_normalizer(raw));
  const auto trained = train(set, {9, 30, 2}, desk_trainer(10000, 1));
  const auto& model = trained.model;
  const std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
  const Vector seed = model.at("class0").seed_frame;
  std::vector<Frames> runs;
  for (double a : alphas) {
    const Vector pb = interpolate_pb(model, "class0", "class1", a);
    runs.push_back(generate(model, pb, seed, 200).values().bottomRows(150));
  }
  // Mean absolute deviation from the mean, per dimension.
  auto amplitude = [](const Frames& f) -> Vector {
    return (f.rowwise() - f.colwise().mean()).cwiseAbs().colwise().mean().transpose();
  };
  const Vector ends = amplitude(runs.front()) + amplitude(runs.back());
  Eigen::Index dom = 0;
  ends.maxCoeff(&dom);
  std::vector<double> stat;
  std::string detail = "dim " + std::to_string(dom) + ":";
  for (const auto& r : runs) {
    stat.push_back(amplitude(r)[dom]);
    detail += fmt(" %.4f", stat.back());
  }
  bool up = true, down = true;
  for (std::size_t i = 1; i < stat.size(); ++i) {
    up = up && stat[i] >= stat[i - 1];
    down = down && stat[i] <= stat[i - 1];
  }
  report(6, "interpolation monotonicity", up || down, detail);
}

void mode_contracts() {
  const auto raw = synth_corpus({3, 4, 60, 5, 20.0});
  const auto set = apply_normalizer(raw, fit_normalizer(raw));
  const auto a = train(set, {4, 10, 2}, desk_trainer(500, 42));
  const auto b = train(set, {4, 10, 2}, desk_trainer(500, 42));
  bool reproducible = a.model.weights == b.model.weights;
  for (std::size_t i = 0; i < a.model.pb_table.size(); ++i)
    reproducible = reproducible && a.model.pb_table[i].activation == b.model.pb_table[i].activation;

  RecognitionConfig rc;
  rc.eta_r = 0.05;
  rc.max_iters = 300;
  const auto checksum = a.model.weights.checksum();
  const WeightMatrices copy = a.model.weights;
  const auto r1 = recognize(a.model, set[1], rc);
  const auto r2 = recognize(a.model, set[1], rc);
  const bool frozen = a.model.weights == copy && a.model.weights.checksum() == checksum;
  reproducible = reproducible && r1.pb.rho == r2.pb.rho && r1.pb_trajectory == r2.pb_trajectory;
  reproducible = reproducible && generate_by_label(a.model, "class2", 80).values() ==
                                     generate_by_label(a.model, "class2", 80).values();

  const auto dir = std::filesystem::temp_directory_path() / "rnnpb_acceptance";
  std::filesystem::create_directories(dir);
  save_model(a.model, dir / "m.rnnpb");
  const auto loaded = load_model(dir / "m.rnnpb");
  std::filesystem::remove_all(dir);
  double worst = 0.0;
  for (std::size_t s = 0; s < set.size(); ++s) {
    for (const auto mode : {LoopMode::Open, LoopMode::Closed}) {
      const auto pb = PBState::from_activation(a.model.pb_table[s].activation);
      const auto pb2 = PBState::from_activation(loaded.pb_table[s].activation);
      const auto x = forward_sequence(a.model.weights, set[s], pb, mode).predictions;
      const auto y = forward_sequence(loaded.weights, set[s], pb2, mode).predictions;
      worst = std::max(worst, (x - y).cwiseAbs().maxCoeff());
    }
  }
  report(7, "mode contracts", frozen && reproducible && worst <= kRoundTripTolerance,
         std::string("weights frozen: ") + (frozen ? "yes" : "no") + ", bit-reproducible: " +
             (reproducible ? "yes" : "no") + ", round-trip max diff " + fmt("%.1e", worst));
}

void frozen_defaults() {
  const TrainerConfig t;
  const RecognitionConfig r;
  const NetworkTopology n;
  const std::map<std::string_view, double> actual{
      {"eta_init", t.eta_init}, {"eta_max", t.eta_max}, {"eta_min", t.eta_min},
      {"eta_r", r.eta_r}, {"m_gamma", t.m_gamma}, {"hidden", static_cast<double>(n.hidden_dim)},
      {"pb", static_cast<double>(n.pb_dim)}, {"xi_minus", t.xi_minus}, {"xi_plus", t.xi_plus}};
  // Literal published values, independent of the defaults header.
  const std::map<std::string_view, double> published{
      {"eta_init", 2.0e-6}, {"eta_max", 1.0e-4}, {"eta_min", 1.0e-8}, {"eta_r", 8.0e-3}, {"m_gamma", 0.001},
      {"hidden", 100}, {"pb", 2}, {"xi_minus", 0.999999}, {"xi_plus", 1.000001}};
  std::size_t matched = 0;
  for (const auto& e : defaults::kTable)
    if (actual.at(e.key) == e.value && published.at(e.key) == e.value) ++matched;
  report(8, "frozen defaults", matched == 9 && defaults::kTable.size() == 9,
         std::to_string(matched) + "/9 table entries equal the configuration defaults");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{gradient_check, adaptive_rate_law, desk_reproduction,
                                                    interpolation_property, mode_contracts, frozen_defaults};
  for (const auto& c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion aborted: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
