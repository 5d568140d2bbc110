#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "balgraph/pipeline.hpp"
#include "balgraph/spectral.hpp"

namespace balgraph::cli {

namespace fs = std::filesystem;

json default_config() {
  const SynthConfig sy;
  const ArchitectureConfig ar;
  const TrainConfig tr;
  const BenchConfig be;
  return {
      {"seed", std::uint64_t{1}},
      {"data", {{"dir", ""}}},
      {"topology",
       {{"path", ""}, {"line_graph", false}, {"chunks", 1}, {"temporal_w", 1.0}, {"chunk_length", 0},
        {"drop_head", 0}, {"drop_tail", 0}}},
      {"synth",
       {{"n_nodes", sy.n_nodes}, {"extra_edges", sy.extra_edges}, {"length", sy.length}, {"omega0", sy.omega0},
        {"omega1", sy.omega1}, {"decay", sy.decay}, {"flip_fraction", sy.flip_fraction},
        {"n_samples", sy.n_samples}, {"snr_db", sy.snr_db}, {"subjects", sy.subjects},
        {"sample_rate", sy.sample_rate}, {"graph_seed", sy.graph_seed}}},
      {"model",
       {{"blocks", ar.blocks}, {"conv_layers", ar.conv_layers}, {"conv_channels", ar.conv_channels},
        {"kernel", ar.kernel}, {"stride", ar.stride}, {"feature_dim", ar.feature_dim},
        {"metric_rank", ar.metric_rank}, {"alpha", ar.alpha}, {"omega", ar.omega}, {"scheme", "balanced_cht"},
        {"d_star", 0.5}}},
      {"train",
       {{"noise_sigma", tr.noise_sigma}, {"rho", tr.rho}, {"contrastive", tr.contrastive},
        {"epochs", tr.epochs}, {"patience", tr.patience}, {"batch_size", tr.batch_size},
        {"train_shape", tr.train_shape}, {"init_sweeps", tr.init_sweeps}, {"polarity_sweeps", tr.polarity_sweeps},
        {"init_keep_fraction", tr.init_keep_fraction},
        {"lr", {{"initial", tr.lr.initial}, {"floor", tr.lr.floor}, {"t0", tr.lr.t0}, {"mult", tr.lr.mult}}},
        {"spsa", {{"perturb_scale", tr.spsa.perturb_scale}, {"decay", tr.spsa.decay}}}}},
      {"learn", {{"sweeps", 20}}},
      {"eval", {{"models", ""}, {"tie_rule", 0}, {"backend", "exact"}, {"krylov_dim", 0}}},
      {"inspect", {{"model", ""}, {"sample", 0}}},
      {"bench",
       {{"ladder", be.ladder}, {"krylov", be.krylov}, {"full_max", be.full_max}, {"exact_max", be.exact_max},
        {"repeats", be.repeats}, {"degree", be.degree}, {"omega_fraction", be.omega_fraction},
        {"alpha", be.alpha}}},
  };
}

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

bool is_int(const json& v) { return v.is_number_integer() || v.is_number_unsigned(); }

void check_leaf(const json& base, const json& v, const std::string& path) {
  auto fail = [&](const char* what) { throw InvalidArgument("config key '" + path + "' must be " + what); };
  if (base.is_boolean() && !v.is_boolean()) fail("a boolean");
  if (base.is_string() && !v.is_string()) fail("a string");
  if (base.is_number_float() && !v.is_number()) fail("a number");
  if (base.is_number_unsigned() && !(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0))) {
    fail("a nonnegative integer");
  }
  if (base.is_number_integer() && !base.is_number_unsigned() && !is_int(v)) fail("an integer");
  if (base.is_array()) {
    if (!v.is_array()) fail("an array");
    for (const auto& e : v)
      if (!is_int(e)) fail("an array of integers");
  }
}

}  // namespace

void merge_checked(json& base, const json& overlay, const std::string& path) {
  if (!overlay.is_object()) throw InvalidArgument("config section '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string at = join(path, key);
    if (!base.contains(key)) throw InvalidArgument("unknown config key '" + at + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_checked(slot, value, at);
      continue;
    }
    check_leaf(slot, value, at);
    if (slot.is_number_float()) {
      slot = value.get<double>();
    } else {
      slot = value;
    }
  }
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidArgument("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json overlay = value;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) overlay = json{{*it, overlay}};
  merge_checked(config, overlay);
}

std::vector<BenchRow> lanczos_bench(const BenchConfig& cfg) {
  std::vector<BenchRow> rows;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> mag(0.5, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int n : cfg.ladder) {
    if (n < 3) throw InvalidArgument("bench.ladder sizes must be at least 3");
    // Ring plus random chords for the requested average degree.
    std::set<std::pair<int, int>> used;
    std::vector<Edge> edges;
    auto add = [&](int a, int b) {
      if (a == b) return;
      if (a > b) std::swap(a, b);
      if (used.emplace(a, b).second) edges.push_back({a, b, mag(rng)});
    };
    for (int i = 0; i < n; ++i) add(i, (i + 1) % n);
    std::uniform_int_distribution<int> pick(0, n - 1);
    const long target = static_cast<long>(n) * cfg.degree / 2;
    while (static_cast<long>(edges.size()) < target) add(pick(rng), pick(rng));
    const SignedGraph g(n, std::move(edges));
    const auto sparse = build_sparse_laplacian(g, LaplacianVariant::combinatorial);
    const auto deg = g.abs_degrees();
    FilterSpec spec;
    spec.alpha = cfg.alpha;
    spec.omega = cfg.omega_fraction * 2.0 * *std::max_element(deg.begin(), deg.end());
    spec.backend = FilterBackend::lanczos;
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = nd(rng);

    Eigen::VectorXd exact;
    if (n <= cfg.exact_max) {
      FilterSpec e = spec;
      e.backend = FilterBackend::exact;
      exact = lp_filter_exact(build_laplacian(g, LaplacianVariant::combinatorial), y, e).col(0);
    }
    std::vector<int> ms = cfg.krylov;
    if (n <= cfg.full_max) ms.push_back(n);
    for (int m : ms) {
      if (m < 1 || m > n) continue;
      spec.krylov_dim = m;
      std::vector<double> times;
      Eigen::VectorXd approx;
      for (int r = 0; r < std::max(cfg.repeats, 1); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        approx = lp_filter_lanczos(sparse, y, spec);
        times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      }
      std::nth_element(times.begin(), times.begin() + static_cast<long>(times.size() / 2), times.end());
      BenchRow row{n, m, static_cast<long>(g.n_edges()), -1.0, times[times.size() / 2]};
      if (exact.size() == n) row.err_inf = (approx - exact).cwiseAbs().maxCoeff();
      rows.push_back(row);
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "n,m,err_inf,wall_ms\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.m << ',';
    if (r.err_inf >= 0.0) os << format_double(r.err_inf);
    char ms[32];
    std::snprintf(ms, sizeof ms, "%.3f", r.wall_ms);
    os << ',' << ms << '\n';
  }
  return os.str();
}

namespace {

struct Settings {
  json config;
  fs::path out;
  std::string split = "ratio";
  bool audit = false;
  std::uint64_t seed = 1;
  fs::path data_dir;
  fs::path topology_path;
  TopologySpec topology;
  SynthConfig synth;
  PipelineConfig pipe;
  int learn_sweeps = 20;
  fs::path models_dir;
  int tie_rule = 0;
  FilterBackend eval_backend = FilterBackend::exact;
  int krylov_dim = 0;
  fs::path inspect_model;
  int inspect_sample = 0;
  BenchConfig bench;
};

Settings resolve(json config, const fs::path& out, const std::string& split, bool audit) {
  Settings s;
  s.out = out;
  s.split = split;
  s.audit = audit;
  if (split != "ratio" && split != "loso") throw InvalidArgument("--split must be ratio or loso");
  const json& c = config;
  s.seed = c["seed"].get<std::uint64_t>();

  const auto data_dir = c["data"]["dir"].get<std::string>();
  s.data_dir = data_dir.empty() ? out / "dataset" : fs::path(data_dir);
  const auto& t = c["topology"];
  const auto topo_path = t["path"].get<std::string>();
  s.topology_path = topo_path.empty() ? s.data_dir / "topology.txt" : fs::path(topo_path);
  s.topology.line_graph = t["line_graph"].get<bool>();
  s.topology.chunks = t["chunks"].get<int>();
  s.topology.temporal_w = t["temporal_w"].get<double>();

  const auto& sy = c["synth"];
  s.synth.n_nodes = sy["n_nodes"];
  s.synth.extra_edges = sy["extra_edges"];
  s.synth.length = sy["length"];
  s.synth.omega0 = sy["omega0"];
  s.synth.omega1 = sy["omega1"];
  s.synth.decay = sy["decay"];
  s.synth.flip_fraction = sy["flip_fraction"];
  s.synth.n_samples = sy["n_samples"];
  s.synth.snr_db = sy["snr_db"];
  s.synth.subjects = sy["subjects"];
  s.synth.sample_rate = sy["sample_rate"];
  s.synth.graph_seed = sy["graph_seed"].get<std::uint64_t>();
  s.synth.seed = s.seed;

  auto& p = s.pipe;
  const auto& m = c["model"];
  p.arch.blocks = m["blocks"];
  p.arch.conv_layers = m["conv_layers"];
  p.arch.conv_channels = m["conv_channels"];
  p.arch.kernel = m["kernel"];
  p.arch.stride = m["stride"];
  p.arch.feature_dim = m["feature_dim"];
  p.arch.metric_rank = m["metric_rank"];
  p.arch.alpha = m["alpha"];
  p.arch.omega = m["omega"];
  p.scheme = WeightScheme{weight_scheme_from_string(m["scheme"].get<std::string>()), m["d_star"].get<double>()};

  const auto& tr = c["train"];
  p.train.noise_sigma = tr["noise_sigma"];
  p.train.rho = tr["rho"];
  p.train.contrastive = tr["contrastive"];
  p.train.epochs = tr["epochs"];
  p.train.patience = tr["patience"];
  p.train.batch_size = tr["batch_size"];
  p.train.train_shape = tr["train_shape"];
  p.train.init_sweeps = tr["init_sweeps"];
  p.train.polarity_sweeps = tr["polarity_sweeps"];
  p.train.init_keep_fraction = tr["init_keep_fraction"];
  p.train.lr.initial = tr["lr"]["initial"];
  p.train.lr.floor = tr["lr"]["floor"];
  p.train.lr.t0 = tr["lr"]["t0"];
  p.train.lr.mult = tr["lr"]["mult"];
  p.train.spsa.perturb_scale = tr["spsa"]["perturb_scale"];
  p.train.spsa.decay = tr["spsa"]["decay"];
  p.train.seed = s.seed;
  p.train.validate();
  p.chunks = s.topology.chunks;
  p.chunk_length = t["chunk_length"];
  p.drop_head = t["drop_head"];
  p.drop_tail = t["drop_tail"];
  p.seed = s.seed;

  s.learn_sweeps = c["learn"]["sweeps"];
  if (s.learn_sweeps < 0) throw InvalidArgument("learn.sweeps must be nonnegative");
  const auto& ev = c["eval"];
  const auto models = ev["models"].get<std::string>();
  s.models_dir = models.empty() ? out / "models" : fs::path(models);
  s.tie_rule = ev["tie_rule"];
  if (s.tie_rule != 0 && s.tie_rule != 1) throw InvalidArgument("eval.tie_rule must be 0 or 1");
  s.eval_backend = filter_backend_from_string(ev["backend"].get<std::string>());
  s.krylov_dim = ev["krylov_dim"];
  const auto inspect = c["inspect"]["model"].get<std::string>();
  s.inspect_model = inspect.empty() ? s.models_dir / "psi0.json" : fs::path(inspect);
  s.inspect_sample = c["inspect"]["sample"];

  const auto& b = c["bench"];
  s.bench.ladder = b["ladder"].get<std::vector<int>>();
  s.bench.krylov = b["krylov"].get<std::vector<int>>();
  s.bench.full_max = b["full_max"];
  s.bench.exact_max = b["exact_max"];
  s.bench.repeats = b["repeats"];
  s.bench.degree = b["degree"];
  s.bench.omega_fraction = b["omega_fraction"];
  s.bench.alpha = b["alpha"];
  s.bench.seed = s.seed;
  s.config = std::move(config);
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write " + path.string());
  os << text;
  if (!os) throw InvalidArgument("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

struct Outputs {
  fs::path root;
  std::vector<std::string> files;
  void add(const fs::path& p) { files.push_back(fs::relative(p, root).generic_string()); }
};

void write_manifest(const Settings& s, const std::string& command, Outputs& outs) {
  std::sort(outs.files.begin(), outs.files.end());
  const json doc{{"format", "balgraph-run/1"},
                 {"command", command},
                 {"seed", s.seed},
                 {"split", s.split},
                 {"config", s.config},
                 {"outputs", outs.files}};
  write_json(s.out / ("run_" + command + ".json"), doc);
}

struct Problem {
  LabeledDataset data;
  SignedGraph topology;
};

Problem load_problem(const Settings& s) {
  Problem p;
  p.data = read_dataset(s.data_dir.string());
  if (p.data.samples.empty()) throw InvalidArgument("dataset " + s.data_dir.string() + " has no samples");
  std::ifstream is(s.topology_path);
  if (!is) throw InvalidArgument("missing topology file " + s.topology_path.string());
  TopologySpec spec = s.topology;
  spec.primary = read_graph(is);
  p.topology = build_topology(spec);
  return p;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json edges_json(const SignedGraph& g) {
  json out = json::array();
  for (const auto& e : g.edges()) out.push_back({e.i, e.j, e.w});
  return out;
}

json report_json(const std::string& name, const MetricsReport& r) {
  return {{"name", name},
          {"tp", r.counts.tp},
          {"fp", r.counts.fp},
          {"tn", r.counts.tn},
          {"fn", r.counts.fn},
          {"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"specificity", r.specificity},
          {"f1", r.f1},
          {"g_mean", r.g_mean},
          {"undefined", r.undefined}};
}

// ---- commands ----

int cmd_synth(const Settings& s, std::ostream& out) {
  Outputs outs{s.out, {}};
  const auto r = synth_two_class(s.synth);
  write_dataset(s.data_dir.string(), r.dataset);
  outs.add(s.data_dir / "manifest.json");
  {
    std::ostringstream os;
    write_graph(os, r.truth.topology);
    write_text(s.data_dir / "topology.txt", os.str());
    outs.add(s.data_dir / "topology.txt");
  }
  const json truth{{"beta0", r.truth.beta[0].values()},
                   {"beta1", r.truth.beta[1].values()},
                   {"omega0", s.synth.omega0},
                   {"omega1", s.synth.omega1}};
  write_json(s.data_dir / "truth.json", truth);
  outs.add(s.data_dir / "truth.json");
  write_manifest(s, "synth", outs);
  out << "wrote " << r.dataset.size() << " samples (" << s.synth.n_nodes << " channels x " << s.synth.length
      << ") to " << s.data_dir.string() << "\n";
  return 0;
}

int cmd_learn_graph(const Settings& s, std::ostream& out) {
  Outputs outs{s.out, {}};
  const auto prob = load_problem(s);
  const Split sp = split_ratio(prob.data, s.seed);
  const int n = prob.topology.n_nodes();
  json summary{{"nodes", n}, {"edges", prob.topology.n_edges()}, {"classes", json::array()}};
  for (int c = 0; c < 2; ++c) {
    std::vector<Eigen::MatrixXd> xs;
    for (auto i : sp.train)
      if (prob.data.samples[i].label == c) xs.push_back(graph_signal(prob.data.samples[i], s.pipe));
    if (xs.empty()) throw InvalidArgument("class " + std::to_string(c) + " has no training samples");
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
    for (const auto& x : xs) {
      cov += x * x.transpose();
      const Eigen::VectorXd sq = x.rowwise().squaredNorm();
      Eigen::MatrixXd d = (sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * x * x.transpose());
      dist += d.cwiseMax(0.0);
    }
    // Mean edge distance 1 keeps weights away from both ends of the kernel.
    double edge_mean = 0.0;
    for (const auto& e : prob.topology.edges()) edge_mean += dist(e.i, e.j);
    edge_mean /= static_cast<double>(std::max<std::size_t>(prob.topology.n_edges(), 1));
    if (edge_mean > 0.0) dist /= edge_mean;
    const FeatureDistanceField field(dist);

    const PolarityVector beta0 = init_polarity(cov, default_anchor(cov));
    const auto mags = assign_weights(field, PolarityVector::ones(n), WeightScheme::positive(), prob.topology);
    Eigen::MatrixXd signals(n, 0);
    for (const auto& x : xs) {
      Eigen::MatrixXd grown(n, signals.cols() + x.cols());
      grown << signals, x;
      signals = std::move(grown);
    }
    const auto upd = update_polarities(mags, beta0, signals, s.learn_sweeps);
    const auto g = normalize_weights(assign_weights(field, upd.beta, s.pipe.scheme, prob.topology));
    const auto check = is_balanced(g);
    const auto shifted = gct_shift(build_laplacian(g, LaplacianVariant::combinatorial));
    const auto eig = eigh(similarity_transform(shifted.laplacian, upd.beta));

    std::ostringstream os;
    write_graph(os, g);
    const fs::path gp = s.out / "graphs" / ("class" + std::to_string(c) + ".txt");
    write_text(gp, os.str());
    outs.add(gp);
    int agree = 0;
    for (int i = 0; i < n; ++i) agree += beta0[i] == upd.beta[i];
    summary["classes"].push_back({{"class", c},
                                  {"samples", xs.size()},
                                  {"anchor", default_anchor(cov)},
                                  {"beta_init", beta0.values()},
                                  {"beta", upd.beta.values()},
                                  {"unchanged_polarities", agree},
                                  {"sweeps", upd.sweeps},
                                  {"converged", upd.converged},
                                  {"objective", upd.objective},
                                  {"balanced", check.balanced},
                                  {"delta", shifted.delta},
                                  {"eigenvalues", to_vector(eig.values)}});
    out << "class " << c << ": " << xs.size() << " samples, " << upd.sweeps << " sweeps, balanced "
        << (check.balanced ? "yes" : "no") << ", lambda_min " << eig.values.minCoeff() << "\n";
  }
  write_json(s.out / "graphs" / "summary.json", summary);
  outs.add(s.out / "graphs" / "summary.json");
  write_manifest(s, "learn-graph", outs);
  return 0;
}

std::vector<std::pair<std::string, Split>> folds(const Settings& s, const LabeledDataset& data) {
  std::vector<std::pair<std::string, Split>> out;
  if (s.split == "ratio") {
    out.emplace_back("ratio", split_ratio(data, s.seed));
  } else {
    for (int subject : data.subjects())
      out.emplace_back("subject_" + std::to_string(subject), split_loso(data, subject, s.seed));
  }
  return out;
}

fs::path fold_dir(const Settings& s, const std::string& fold) {
  return s.split == "ratio" ? s.models_dir : s.models_dir / fold;
}

int cmd_train(const Settings& s, std::ostream& out) {
  Outputs outs{s.out, {}};
  const auto prob = load_problem(s);
  json summary{{"split", s.split}, {"folds", json::array()}};
  for (const auto& [name, sp] : folds(s, prob.data)) {
    const auto tp = train_pair(prob.data, sp, prob.topology, s.pipe);
    const fs::path dir = fold_dir(s, name);
    json fold{{"fold", name}, {"train", sp.train.size()}, {"val", sp.val.size()}, {"classes", json::array()}};
    for (int c = 0; c < 2; ++c) {
      const auto& r = tp.result[c];
      const fs::path model_path = dir / ("psi" + std::to_string(c) + ".json");
      fs::create_directories(dir);
      save_model_file(model_path.string(), r.model);
      outs.add(model_path);
      std::string log;
      for (const auto& e : r.log) {
        log += json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr},
                    {"wall_ms", e.wall_ms}}
                   .dump() +
               "\n";
      }
      const fs::path log_path = dir / ("log" + std::to_string(c) + ".jsonl");
      write_text(log_path, log);
      outs.add(log_path);
      json cls{{"class", c},
               {"epochs_run", r.log.size()},
               {"best_epoch", r.best_epoch},
               {"stopped_early", r.stopped_early},
               {"noise_sigma", r.noise_sigma},
               {"omega", to_vector(spectral_parameters(r.model))}};
      cls["final_train_loss"] = r.log.empty() ? json(nullptr) : json(r.log.back().train_loss);
      cls["final_val_loss"] = r.log.empty() ? json(nullptr) : json(r.log.back().val_loss);
      fold["classes"].push_back(cls);
      out << name << " class " << c << ": " << r.log.size() << " epochs, best " << r.best_epoch << "\n";
    }
    summary["folds"].push_back(fold);
  }
  write_json(s.models_dir / "summary.json", summary);
  outs.add(s.models_dir / "summary.json");
  write_manifest(s, "train", outs);
  return 0;
}

DenoiserModel load_for_eval(const Settings& s, const fs::path& path) {
  if (!fs::exists(path)) throw InvalidArgument("missing checkpoint " + path.string());
  auto m = load_model_file(path.string());
  for (auto& b : m.blocks) {
    b.filter.backend = s.eval_backend;
    b.filter.krylov_dim = s.krylov_dim;
  }
  m.validate();
  return m;
}

int cmd_eval(const Settings& s, std::ostream& out) {
  Outputs outs{s.out, {}};
  const auto prob = load_problem(s);
  std::vector<std::pair<std::string, MetricsReport>> rows;
  Confusion pooled;
  std::string audit = "fold,sample,subject,label,predicted,err0,err1\n";
  const auto fs_list = folds(s, prob.data);
  for (const auto& [name, sp] : fs_list) {
    const fs::path dir = fold_dir(s, name);
    ClassifierPair pair{load_for_eval(s, dir / "psi0.json"), load_for_eval(s, dir / "psi1.json"), s.tie_rule};
    pair.validate();
    const auto ev = evaluate_indices(pair, prob.data, sp.test, s.pipe);
    rows.emplace_back(name, ev.report);
    pooled.tp += ev.report.counts.tp;
    pooled.fp += ev.report.counts.fp;
    pooled.tn += ev.report.counts.tn;
    pooled.fn += ev.report.counts.fn;
    for (std::size_t k = 0; k < sp.test.size(); ++k) {
      const auto& smp = prob.data.samples[sp.test[k]];
      const auto& d = ev.decisions[k];
      audit += name + "," + std::to_string(sp.test[k]) + "," + std::to_string(smp.subject) + "," +
               std::to_string(smp.label) + "," + std::to_string(d.label) + "," + format_double(d.err0) + "," +
               format_double(d.err1) + "\n";
    }
  }
  if (fs_list.size() > 1) rows.emplace_back("pooled", metrics_from_counts(pooled));
  json doc{{"split", s.split}, {"rows", json::array()}};
  for (const auto& [name, r] : rows) doc["rows"].push_back(report_json(name, r));
  write_json(s.out / "metrics.json", doc);
  outs.add(s.out / "metrics.json");
  const std::string table = format_metrics_table(rows);
  write_text(s.out / "metrics.txt", table);
  outs.add(s.out / "metrics.txt");
  if (s.audit) {
    write_text(s.out / "audit.csv", audit);
    outs.add(s.out / "audit.csv");
  }
  write_manifest(s, "eval", outs);
  out << table;
  return 0;
}

int cmd_bench(const Settings& s, std::ostream& out) {
  Outputs outs{s.out, {}};
  const std::string csv = bench_csv(lanczos_bench(s.bench));
  write_text(s.out / "bench.csv", csv);
  outs.add(s.out / "bench.csv");
  write_manifest(s, "lanczos-bench", outs);
  out << csv;
  return 0;
}

int cmd_inspect(const Settings& s, std::ostream& out) {
  Outputs outs{s.out, {}};
  if (!fs::exists(s.inspect_model)) throw InvalidArgument("missing checkpoint " + s.inspect_model.string());
  const auto model = load_model_file(s.inspect_model.string());
  json doc{{"model", s.inspect_model.generic_string()},
           {"nodes", model.n_nodes()},
           {"scheme", to_string(model.scheme.kind)},
           {"chunking",
            {{"channels", model.chunking.channels},
             {"chunks", model.chunking.chunks},
             {"chunk_length", model.chunking.chunk_length}}},
           {"blocks", json::array()}};
  for (const auto& b : model.blocks) {
    doc["blocks"].push_back({{"omega", b.filter.omega},
                             {"alpha", b.filter.alpha},
                             {"mode", to_string(b.filter.mode)},
                             {"backend", to_string(b.filter.backend)},
                             {"beta", b.beta.values()},
                             {"feature_dim", b.features.feature_dim},
                             {"conv_layers", b.features.conv.size()}});
  }
  out << "model " << s.inspect_model.string() << ": " << model.blocks.size() << " blocks, " << model.n_nodes()
      << " nodes\n";
  for (std::size_t t = 0; t < model.blocks.size(); ++t) out << "  block " << t << " omega " << model.blocks[t].filter.omega << "\n";
  if (s.inspect_sample >= 0 && fs::exists(s.data_dir / "manifest.json")) {
    const auto data = read_dataset(s.data_dir.string());
    if (static_cast<std::size_t>(s.inspect_sample) >= data.size()) {
      throw InvalidArgument("inspect.sample is past the end of the dataset");
    }
    const auto trace = denoise_trace(model, graph_signal(data.samples[static_cast<std::size_t>(s.inspect_sample)], s.pipe));
    json graphs = json::array();
    for (const auto& tr : trace) {
      graphs.push_back({{"delta", tr.graph.delta},
                        {"edges", edges_json(tr.graph.weights)},
                        {"eigenvalues", to_vector(tr.eig.values)}});
    }
    doc["sample"] = s.inspect_sample;
    doc["graphs"] = graphs;
  }
  write_json(s.out / "inspect.json", doc);
  outs.add(s.out / "inspect.json");
  write_manifest(s, "inspect", outs);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Balanced signed graph denoisers for two-class signal classification"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "out";
  std::string split = "ratio";
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool audit = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "Seed for every random stream");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--split", split, "ratio or loso")->check(CLI::IsMember({"ratio", "loso"}));
    sub->add_option("--set", sets, "Override a config key, e.g. train.epochs=5");
  };
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "Write a synthetic two-class dataset"},
      {"learn-graph", "Learn one balanced graph per class from the training split"},
      {"train", "Train the two class denoisers"},
      {"eval", "Classify the test split and report metrics"},
      {"lanczos-bench", "Time the Lanczos filter over a ladder of graph sizes"},
      {"inspect", "Dump a model's cutoffs, polarities and graphs"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    if (name == "eval") sub->add_flag("--audit", audit, "Write per-sample errors to audit.csv");
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    json config = default_config();
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw InvalidArgument("cannot read config " + config_path);
      const json user = json::parse(is, nullptr, false);
      if (user.is_discarded()) throw ParseError("config " + config_path + " is not valid JSON");
      merge_checked(config, user);
    }
    for (const auto& a : sets) apply_override(config, a);
    auto* chosen = app.get_subcommands().front();
    if (chosen->count("--seed") > 0) config["seed"] = seed;
    const Settings s = resolve(config, out_dir, split, audit);
    fs::create_directories(s.out);
    const std::string name = chosen->get_name();
    if (name == "synth") return cmd_synth(s, out);
    if (name == "learn-graph") return cmd_learn_graph(s, out);
    if (name == "train") return cmd_train(s, out);
    if (name == "eval") return cmd_eval(s, out);
    if (name == "lanczos-bench") return cmd_bench(s, out);
    return cmd_inspect(s, out);
  } catch (const DivergedLoss& e) {
    err << "error: " << e.what() << " (epoch " << e.epoch() << ")\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace balgraph::cli
