// rnnpb command-line tool: synth, train, recognize, stream, generate, eval.
//
// Exit status: 0 ok, 2 argument error, 3 data/format error, 4 numeric failure.
// Failures print a single line `rnnpb: error kind=<kind> exit=<code>: <message>`
// on standard error.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rnnpb/config.hpp"
#include "rnnpb/error.hpp"
#include "rnnpb/eval.hpp"
#include "rnnpb/generation.hpp"
#include "rnnpb/learning.hpp"
#include "rnnpb/recognition.hpp"
#include "rnnpb/seqdata.hpp"
#include "rnnpb/text.hpp"

namespace fs = std::filesystem;
using namespace rnnpb;

namespace {

constexpr int kExitArgument = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Argument:
      return kExitArgument;
    case ErrorKind::NumericInput:
    case ErrorKind::NumericOverflow:
    case ErrorKind::Domain:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

int fail(const std::string& kind, int code, std::string message) {
  for (char& c : message)
    if (c == '\n' || c == '\r') c = ' ';
  std::fprintf(stderr, "rnnpb: error kind=%s exit=%d: %s\n", kind.c_str(), code, message.c_str());
  return code;
}

// Flags shared by every subcommand, plus config-key flags that override the
// --config file.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
  std::map<std::string, std::string> overrides;  // config key -> flag text
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key = value configuration file");
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--out", c.out, "output path");
  app->add_flag("--quiet", c.quiet, "suppress progress output");
}

void add_keys(CLI::App* app, Common& c, const std::vector<std::string>& keys) {
  for (const auto& key : keys) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    app->add_option_function<std::string>(
        flag, [&c, key](const std::string& v) { c.overrides[key] = v; }, "overrides config key " + key);
  }
}

const std::vector<std::string> kTrainKeys{"eta_init", "eta_min", "eta_max", "xi_plus", "xi_minus", "m_gamma",
                                          "epochs", "convergence_mse", "workers", "hidden", "pb"};
const std::vector<std::string> kRecognizeKeys{"eta_r", "window", "stop_threshold", "stop_patience", "max_iters",
                                              "stream_iterations"};

struct Effective {
  KeyValueConfig raw;
  TrainerConfig trainer;
  NetworkTopology topology;
  RecognitionConfig recognition;
};

Effective resolve(const Common& c) {
  Effective e;
  if (!c.config_path.empty()) {
    if (!fs::exists(c.config_path)) throw Error(ErrorKind::Io, "config file not found: " + c.config_path);
    e.raw = KeyValueConfig::load(c.config_path);
  }
  for (const auto& [k, v] : c.overrides) e.raw.set(k, v);
  if (c.seed) e.raw.set("seed", std::to_string(*c.seed));
  e.raw.check_keys(known_config_keys());
  try {
    apply_config(e.raw, e.trainer);
    apply_config(e.raw, e.topology);
    apply_config(e.raw, e.recognition);
  } catch (const Error& err) {
    // a bad value on the command line or in the config is an argument problem
    throw Error(ErrorKind::Argument, err.what());
  }
  return e;
}

std::map<std::string, std::string> recognition_meta(const RecognitionConfig& r) {
  return {{"eta_r", text::format_double(r.eta_r)},
          {"window", std::to_string(r.window)},
          {"stop_threshold", text::format_double(r.stop_threshold)},
          {"stop_patience", std::to_string(r.stop_patience)},
          {"max_iters", std::to_string(r.max_iters)},
          {"stream_iterations", std::to_string(r.stream_iterations)}};
}

std::string meta_line(const std::map<std::string, std::string>& meta) {
  std::string s = "config";
  for (const auto& [k, v] : meta) s += " " + k + "=" + v;
  return s;
}

void note(const Common& c, const std::string& msg) {
  if (!c.quiet) std::fprintf(stderr, "%s\n", msg.c_str());
}

Sequence normalized(const ModelSnapshot& model, const Sequence& s) {
  if (s.dim() != model.topology.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, s.id() + ": dimension " + std::to_string(s.dim()) +
                                                  " does not match model input " +
                                                  std::to_string(model.topology.input_dim));
  }
  return model.normalization ? apply_normalizer(s, *model.normalization) : s;
}

SequenceSet normalized(const ModelSnapshot& model, const SequenceSet& set) {
  std::vector<Sequence> out;
  for (const auto& s : set.sequences()) out.push_back(normalized(model, s));
  return SequenceSet(std::move(out), model.normalization);
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + parent.string() + ": " + ec.message());
}

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      ensure_parent(path);
      file_.open(path);
      if (!file_) throw Error(ErrorKind::Io, "cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::size_t classes = 5, dims = 9, len = 200;
  double period = 50.0, rate = 120.0;
};

int cmd_synth(const Common& c, const SynthArgs& a) {
  if (c.out.empty()) throw Error(ErrorKind::Argument, "synth requires --out <dir>");
  const auto e = resolve(c);
  SynthSpec spec{a.classes, a.dims, a.len, e.raw.has("seed") ? e.trainer.seed : 7, a.period, a.rate};
  const auto set = synth_corpus(spec);
  save_sequences(set, c.out);
  note(c, "wrote " + std::to_string(set.size()) + " sequences to " + c.out);
  return 0;
}

int cmd_train(const Common& c, const std::string& data, const std::string& history) {
  if (c.out.empty()) throw Error(ErrorKind::Argument, "train requires --out <model>");
  auto e = resolve(c);
  const auto raw = load_sequences(data);
  ensure_parent(c.out);
  if (!history.empty()) ensure_parent(history);
  const auto stats = fit_normalizer(raw);
  const auto set = apply_normalizer(raw, stats);
  e.topology.input_dim = set.dim();
  note(c, "training " + std::to_string(set.size()) + " sequences, D=" + std::to_string(set.dim()) +
              " hidden=" + std::to_string(e.topology.hidden_dim) + " pb=" + std::to_string(e.topology.pb_dim) +
              " epochs=" + std::to_string(e.trainer.epochs));

  auto progress = [&](const EpochProgress& p) {
    if (!c.quiet && (p.epoch % 1000 == 0 || p.epoch + 1 == e.trainer.epochs)) {
      std::fprintf(stderr, "epoch %zu mse %.6e\n", p.epoch, p.mean_mse);
    }
  };
  auto result = train(set, e.topology, e.trainer, progress);
  auto& model = result.model;
  model.metadata = e.trainer.describe();
  model.metadata["workers"] = std::to_string(e.trainer.workers);
  model.metadata["hidden"] = std::to_string(e.topology.hidden_dim);
  model.metadata["pb"] = std::to_string(e.topology.pb_dim);
  model.metadata["data"] = data;
  model.metadata["epochs_run"] = std::to_string(result.report.epochs_run);
  model.metadata["final_mse"] = text::format_double(result.report.final_mean_mse());
  save_model(model, c.out);

  if (!history.empty()) {
    std::ofstream h(history);
    if (!h) throw Error(ErrorKind::Io, "cannot write " + history);
    h << "# " << meta_line(model.metadata) << "\nepoch";
    for (const auto& id : result.report.sequence_ids) h << ',' << id;
    h << '\n';
    for (std::size_t ep = 0; ep < result.report.mse_history.size(); ++ep) {
      h << ep;
      for (double v : result.report.mse_history[ep]) h << ',' << text::format_double(v);
      h << '\n';
    }
  }
  note(c, "final mse " + text::format_double(result.report.final_mean_mse()) + ", model written to " + c.out);
  return 0;
}

int cmd_recognize(const Common& c, const std::string& model_path, const std::vector<std::string>& inputs) {
  const auto e = resolve(c);
  const auto model = load_model(model_path);
  std::vector<Sequence> seqs;
  for (const auto& in : inputs) {
    const auto set = load_sequences(in);
    for (const auto& s : set.sequences()) seqs.push_back(normalized(model, s));
  }
  Output out(c.out);
  auto& os = out.stream();
  os << "# " << meta_line(recognition_meta(e.recognition)) << " model=" << model_path << '\n';
  os << "id,label";
  for (std::size_t k = 0; k < model.topology.pb_dim; ++k) os << ",pb" << k;
  os << ",nearest,distance,iterations,converged\n";
  for (const auto& s : seqs) {
    const auto r = recognize(model, s, e.recognition);
    const Vector act = r.pb.activation();
    os << s.id() << ',' << s.label();
    for (Eigen::Index k = 0; k < act.size(); ++k) os << ',' << text::format_double(act[k]);
    const double d = r.distance_to_labels.at(r.nearest_label);
    os << ',' << r.nearest_label << ',' << text::format_double(d) << ',' << r.iterations << ','
       << (r.converged ? 1 : 0) << '\n';
  }
  return 0;
}

// Frames from a CSV file or stdin ("-"), read one line at a time. Comment
// lines and a non-numeric header line are skipped.
class FrameReader {
 public:
  explicit FrameReader(const std::string& path) : name_(path == "-" ? "<stdin>" : path) {
    if (path != "-") {
      file_.open(path);
      if (!file_) throw Error(ErrorKind::Io, "cannot open " + path);
    }
  }

  std::optional<Vector> next() {
    std::istream& in = file_.is_open() ? static_cast<std::istream&>(file_) : std::cin;
    std::string line;
    while (std::getline(in, line)) {
      ++line_no_;
      const auto t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto cells = text::split(t, ',');
      Vector v(static_cast<Eigen::Index>(cells.size()));
      bool numeric = true;
      for (std::size_t i = 0; i < cells.size() && numeric; ++i)
        numeric = text::parse_double(text::trim(cells[i]), v[static_cast<Eigen::Index>(i)]);
      if (numeric) {
        ++frames_;
        return v;
      }
      if (seen_header_ || frames_ > 0) {
        throw Error(ErrorKind::Parse, name_ + ":" + std::to_string(line_no_) + ": non-numeric row");
      }
      seen_header_ = true;
    }
    return std::nullopt;
  }

 private:
  std::string name_;
  std::ifstream file_;
  std::size_t line_no_ = 0;
  std::size_t frames_ = 0;
  bool seen_header_ = false;
};

int cmd_stream(const Common& c, const std::string& model_path, const std::string& input) {
  const auto e = resolve(c);
  const auto model = load_model(model_path);
  FrameReader reader(input);
  StreamRecognizer rec(model, e.recognition);
  Output out(c.out);
  auto& os = out.stream();
  os << "# " << meta_line(recognition_meta(e.recognition)) << " model=" << model_path << '\n';
  while (auto frame = reader.next()) {
    if (static_cast<std::size_t>(frame->size()) != model.topology.input_dim) {
      throw Error(ErrorKind::DimensionMismatch, "frame " + std::to_string(rec.frames_seen()) + " has " +
                                                    std::to_string(frame->size()) + " values, model expects " +
                                                    std::to_string(model.topology.input_dim));
    }
    if (model.normalization) *frame = model.normalization->apply(*frame);
    if (auto em = rec.push(*frame)) {
      os << em->frame_index;
      const Vector act = em->pb.activation();
      for (Eigen::Index k = 0; k < act.size(); ++k) os << ',' << text::format_double(act[k]);
      os << ',' << em->nearest_label << ',' << text::format_double(em->distance) << '\n';
      os.flush();
    }
  }
  return 0;
}

struct GenerateArgs {
  std::string model;
  std::string label;
  std::string pb;
  std::string between;
  std::optional<double> alpha;
  std::string seed_label;
  std::size_t steps = 100;
};

int cmd_generate(const Common& c, const GenerateArgs& a) {
  resolve(c);
  const auto model = load_model(a.model);
  const int modes = !a.label.empty() + !a.pb.empty() + !a.between.empty();
  if (modes != 1) throw Error(ErrorKind::Argument, "give exactly one of --label, --pb, --between");
  if (!a.between.empty() && !a.alpha) throw Error(ErrorKind::Argument, "--between requires --alpha");
  if (a.alpha && a.between.empty()) throw Error(ErrorKind::Argument, "--alpha is only valid with --between");

  Vector pb;
  std::string desc;
  std::string seed_from = a.seed_label;
  if (!a.label.empty()) {
    pb = model.at(a.label).activation;
    desc = a.label;
    if (seed_from.empty()) seed_from = a.label;
  } else if (!a.between.empty()) {
    const auto parts = text::split(a.between, ',');
    if (parts.size() != 2) throw Error(ErrorKind::Argument, "--between expects LABEL_A,LABEL_B");
    const std::string la(text::trim(parts[0])), lb(text::trim(parts[1]));
    if (*a.alpha < 0.0 || *a.alpha > 1.0) throw Error(ErrorKind::Argument, "--alpha must lie in [0,1]");
    pb = interpolate_pb(model, la, lb, *a.alpha);
    desc = la + "~" + lb + "@" + text::format_double(*a.alpha);
    if (seed_from.empty()) seed_from = la;
  } else {
    try {
      pb = text::parse_vector(a.pb, ',');
    } catch (const Error& err) {
      throw Error(ErrorKind::Argument, std::string("--pb: ") + err.what());
    }
    if (static_cast<std::size_t>(pb.size()) != model.topology.pb_dim) {
      throw Error(ErrorKind::Argument, "--pb has " + std::to_string(pb.size()) + " values, model PB size is " +
                                           std::to_string(model.topology.pb_dim));
    }
    if ((pb.array() <= 0.0).any() || (pb.array() >= 1.0).any()) {
      throw Error(ErrorKind::Argument, "--pb activations must lie strictly inside (0,1)");
    }
    desc = "pb";
    for (Eigen::Index k = 0; k < pb.size(); ++k) desc += (k ? "_" : "") + text::format_double(pb[k]);
    if (seed_from.empty()) seed_from = model.pb_table.front().label;
  }
  if (a.steps == 0) throw Error(ErrorKind::Argument, "--steps must be at least 1");

  const auto seq = generate(model, pb, model.at(seed_from).seed_frame, a.steps, desc);
  std::map<std::string, std::string> meta{{"model", a.model}, {"steps", std::to_string(a.steps)}, {"seed_label", seed_from}};
  std::string pbs;
  for (Eigen::Index k = 0; k < pb.size(); ++k) pbs += (k ? ";" : "") + text::format_double(pb[k]);
  meta["pb"] = pbs;
  Output out(c.out);
  write_sequence_csv(seq, out.stream(), {}, {meta_line(meta)});
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string data;
  std::string format = "csv";
  std::size_t steps = 50;
  double noise = 0.0;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  const auto e = resolve(c);
  const auto model = load_model(a.model);
  const auto train_set = normalized(model, load_sequences(a.data));
  const std::uint64_t seed = c.seed.value_or(0);
  const auto test_set = a.noise > 0.0 ? perturb(train_set, a.noise, seed) : train_set;

  auto report = distance_matrix(model, test_set, e.recognition);
  report.metadata = recognition_meta(e.recognition);
  report.metadata["model"] = a.model;
  report.metadata["data"] = a.data;
  report.metadata["noise"] = text::format_double(a.noise);
  report.metadata["seed"] = std::to_string(seed);
  report.metadata["regen_steps"] = std::to_string(a.steps);
  const auto regen = regen_error_table(model, train_set, a.steps);

  const fs::path dir = c.out.empty() ? fs::path(a.model).parent_path() : fs::path(c.out);
  if (!dir.empty()) fs::create_directories(dir);
  const std::string stem = fs::path(a.model).stem().string();
  const bool jsonl = a.format == "jsonl";
  const fs::path dist_path = dir / (stem + (jsonl ? "_distance.jsonl" : "_distance.csv"));
  emit_report(report, dist_path, jsonl ? ReportFormat::JsonLines : ReportFormat::Csv);
  emit_regen_report(regen, dir / (stem + "_regen.csv"));

  // The CSV matrix has no room for metadata; it goes to a sidecar file.
  nlohmann::json meta = {{"config", report.metadata},
                         {"labels", report.labels},
                         {"diagonal_min_rows", report.diagonal_min_rows},
                         {"iterations", report.iterations},
                         {"converged", report.converged}};
  for (const auto& [label, r] : regen) meta["regen_mean_mse"][label] = r.mean;
  std::ofstream side(dir / (stem + "_eval.json"));
  if (!side) throw Error(ErrorKind::Io, "cannot write " + (dir / (stem + "_eval.json")).string());
  side << meta.dump(2) << '\n';

  if (!c.quiet) {
    std::printf("diagonal minima: %zu/%zu\n", report.diagonal_min_rows, report.labels.size());
    for (const auto& [label, r] : regen) std::printf("regen %s mean mse %s\n", label.c_str(), text::format_double(r.mean).c_str());
    std::printf("wrote %s\n", dist_path.string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent network with parametric bias: train, recognize and generate sequences"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "write a synthetic multi-class oscillator corpus");
  add_common(s, common);
  s->add_option("--classes", synth.classes, "number of classes")->capture_default_str();
  s->add_option("--dims", synth.dims, "frame dimension")->capture_default_str();
  s->add_option("--len", synth.len, "frames per sequence")->capture_default_str();
  s->add_option("--period", synth.period, "base period in frames")->capture_default_str();
  s->add_option("--rate", synth.rate, "sample rate in Hz")->capture_default_str();

  std::string data, history;
  auto* t = app.add_subcommand("train", "train a model on a corpus");
  add_common(t, common);
  add_keys(t, common, kTrainKeys);
  t->add_option("--data", data, "CSV file or directory")->required();
  t->add_option("--history", history, "write per-epoch MSE to this CSV");

  std::string model;
  std::vector<std::string> seqs;
  auto* r = app.add_subcommand("recognize", "infer PB values of sequences with frozen weights");
  add_common(r, common);
  add_keys(r, common, kRecognizeKeys);
  r->add_option("--model", model, "model file")->required();
  r->add_option("--seq", seqs, "CSV file(s) or directory")->required();

  std::string stream_in;
  auto* st = app.add_subcommand("stream", "online recognition over a sliding window");
  add_common(st, common);
  add_keys(st, common, kRecognizeKeys);
  st->add_option("--model", model, "model file")->required();
  st->add_option("--seq", stream_in, "CSV file, or - for standard input")->required();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "closed-loop generation from a PB value");
  add_common(g, common);
  g->add_option("--model", gen.model, "model file")->required();
  g->add_option("--label", gen.label, "use a trained label's PB");
  g->add_option("--pb", gen.pb, "explicit PB activations, comma separated");
  g->add_option("--between", gen.between, "interpolate between LABEL_A,LABEL_B");
  g->add_option("--alpha", gen.alpha, "interpolation weight in [0,1]");
  g->add_option("--seed-label", gen.seed_label, "label whose first frame seeds the rollout");
  g->add_option("--steps", gen.steps, "frames to generate after the seed")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "distance matrix and regeneration error reports");
  add_common(e, common);
  add_keys(e, common, kRecognizeKeys);
  e->add_option("--model", ev.model, "model file")->required();
  e->add_option("--data", ev.data, "CSV file or directory")->required();
  e->add_option("--format", ev.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
  e->add_option("--steps", ev.steps, "regeneration steps")->capture_default_str();
  e->add_option("--noise", ev.noise, "stddev of Gaussian noise added to test copies (normalized units)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    return fail("argument", kExitArgument, ex.what());
  }

  try {
    if (s->parsed()) return cmd_synth(common, synth);
    if (t->parsed()) return cmd_train(common, data, history);
    if (r->parsed()) return cmd_recognize(common, model, seqs);
    if (st->parsed()) return cmd_stream(common, model, stream_in);
    if (g->parsed()) return cmd_generate(common, gen);
    if (e->parsed()) return cmd_eval(common, ev);
  } catch (const Error& ex) {
    return fail(std::string(to_string(ex.kind())), exit_code(ex.kind()), ex.what());
  } catch (const fs::filesystem_error& ex) {
    return fail("io", kExitData, ex.what());
  } catch (const std::exception& ex) {
    return fail("internal", 1, ex.what());
  }
  return 0;
}
