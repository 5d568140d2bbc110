#include "balgraph/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "balgraph/spectral.hpp"

namespace balgraph {

namespace fs = std::filesystem;
using json = nlohmann::json;

void LabeledDataset::validate() const {
  if (samples.empty()) return;
  const auto rows = samples.front().signal.rows();
  const auto cols = samples.front().signal.cols();
  for (const auto& s : samples) {
    if (s.signal.rows() != rows || s.signal.cols() != cols) throw InvalidArgument("samples differ in shape");
    if (s.label != 0 && s.label != 1) throw InvalidArgument("labels must be 0 or 1");
    if (!s.signal.allFinite()) throw InvalidArgument("sample contains non-finite values");
  }
  if (!channel_names.empty() && static_cast<Eigen::Index>(channel_names.size()) != rows) {
    throw InvalidArgument("channel name count differs from signal rows");
  }
}

std::vector<int> LabeledDataset::subjects() const {
  std::set<int> s;
  for (const auto& x : samples) s.insert(x.subject);
  return {s.begin(), s.end()};
}

SignedGraph build_line_graph(const SignedGraph& g0) {
  if (g0.n_edges() == 0) throw InvalidArgument("line graph needs at least one edge");
  const auto inc = g0.incidence();
  std::set<std::pair<int, int>> pairs;
  for (const auto& around : inc) {
    for (std::size_t a = 0; a < around.size(); ++a)
      for (std::size_t b = a + 1; b < around.size(); ++b) {
        const int x = static_cast<int>(std::min(around[a], around[b]));
        const int y = static_cast<int>(std::max(around[a], around[b]));
        pairs.emplace(x, y);
      }
  }
  std::vector<Edge> edges;
  for (const auto& [x, y] : pairs) edges.push_back({x, y, 1.0});
  return SignedGraph(static_cast<int>(g0.n_edges()), std::move(edges));
}

SignedGraph build_product_graph(const SignedGraph& spatial, int chunks, double temporal_w) {
  if (chunks < 1) throw InvalidArgument("chunk count must be at least 1");
  if (!(temporal_w > 0.0)) throw InvalidArgument("temporal weight must be positive");
  const int n = spatial.n_nodes();
  std::vector<Edge> edges;
  for (int h = 0; h < chunks; ++h)
    for (const auto& e : spatial.edges()) edges.push_back({h * n + e.i, h * n + e.j, e.w});
  for (int h = 0; h + 1 < chunks; ++h)
    for (int i = 0; i < n; ++i) edges.push_back({h * n + i, (h + 1) * n + i, temporal_w});
  return SignedGraph(n * chunks, std::move(edges));
}

SignedGraph build_topology(const TopologySpec& spec) {
  const SignedGraph spatial = spec.line_graph ? build_line_graph(spec.primary) : spec.primary;
  return build_product_graph(spatial, spec.chunks, spec.temporal_w);
}

Eigen::MatrixXd chunk(const Eigen::MatrixXd& signal, int chunks, int chunk_length, int drop_head, int drop_tail) {
  if (chunks < 1 || chunk_length < 1 || drop_head < 0 || drop_tail < 0) {
    throw InvalidArgument("chunk sizes must be positive and drops nonnegative");
  }
  const long need = static_cast<long>(drop_head) + drop_tail + static_cast<long>(chunks) * chunk_length;
  if (signal.cols() < need) {
    throw TooShort("signal has " + std::to_string(signal.cols()) + " samples, need " + std::to_string(need));
  }
  const auto channels = signal.rows();
  Eigen::MatrixXd out(channels * chunks, chunk_length);
  for (int h = 0; h < chunks; ++h)
    out.middleRows(h * channels, channels) = signal.middleCols(drop_head + h * chunk_length, chunk_length);
  return out;
}

void SynthConfig::validate() const {
  if (n_nodes < 3) throw InvalidArgument("synth.n_nodes must be at least 3");
  if (extra_edges < 0) throw InvalidArgument("synth.extra_edges must be nonnegative");
  if (length < 2) throw InvalidArgument("synth.length must be at least 2");
  if (omega0 < 1 || omega0 > n_nodes || omega1 < 1 || omega1 > n_nodes) {
    throw InvalidArgument("synth.omega0 and synth.omega1 must lie in [1, n_nodes]");
  }
  if (!(flip_fraction > 0.0 && flip_fraction < 1.0) && omega0 == omega1) {
    throw InvalidArgument("classes need different polarities or different subspace sizes");
  }
  if (!(decay >= 0.0)) throw InvalidArgument("synth.decay must be nonnegative");
  if (n_samples < 2) throw InvalidArgument("synth.n_samples must be at least 2");
  if (!std::isfinite(snr_db)) throw InvalidArgument("synth.snr_db must be finite");
  if (subjects < 1) throw InvalidArgument("synth.subjects must be at least 1");
  if (!(sample_rate > 0.0)) throw InvalidArgument("synth.sample_rate must be positive");
}

namespace {

SignedGraph random_connected(int n, int extra, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::set<std::pair<int, int>> used;
  std::vector<Edge> edges;
  auto add = [&](int a, int b) {
    if (a == b) return;
    if (a > b) std::swap(a, b);
    if (used.emplace(a, b).second) edges.push_back({a, b, 1.0});
  };
  for (int i = 0; i + 1 < n; ++i) add(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i + 1)]);
  std::uniform_int_distribution<int> pick(0, n - 1);
  const std::size_t cap = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
  for (int k = 0; k < extra && edges.size() < cap; ++k) add(pick(rng), pick(rng));
  return SignedGraph(n, std::move(edges));
}

}  // namespace

SynthResult synth_two_class(const SynthConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_nodes;
  std::mt19937_64 grng(cfg.graph_seed);
  SynthResult out;
  auto& truth = out.truth;
  truth.topology = random_connected(n, cfg.extra_edges, grng);

  std::bernoulli_distribution coin(0.5);
  std::vector<int> b0(static_cast<std::size_t>(n));
  for (auto& v : b0) v = coin(grng) ? -1 : 1;
  std::vector<int> nodes(static_cast<std::size_t>(n));
  std::iota(nodes.begin(), nodes.end(), 0);
  std::shuffle(nodes.begin(), nodes.end(), grng);
  const int flips = std::max(1, static_cast<int>(std::lround(cfg.flip_fraction * n)));
  std::vector<int> b1 = b0;
  for (int k = 0; k < flips && k < n; ++k) b1[static_cast<std::size_t>(nodes[static_cast<std::size_t>(k)])] *= -1;
  truth.beta[0] = PolarityVector(b0);
  truth.beta[1] = PolarityVector(b1);

  const int omegas[2] = {cfg.omega0, cfg.omega1};
  Eigen::VectorXd amplitudes[2];
  std::uniform_real_distribution<double> mag(0.5, 1.0);
  for (int c = 0; c < 2; ++c) {
    std::vector<double> w;
    std::vector<double> abs_w;
    for (const auto& e : truth.topology.edges()) {
      const double m = mag(grng);
      abs_w.push_back(m);
      w.push_back(truth.beta[c][e.i] * truth.beta[c][e.j] * m);
    }
    truth.graphs[c] = truth.topology.with_weights(w);
    const auto eig = eigh(build_laplacian(truth.topology.with_weights(abs_w), LaplacianVariant::combinatorial));
    truth.subspace[c] = truth.beta[c].apply(eig.vectors.leftCols(omegas[c]));
    Eigen::VectorXd amp(omegas[c]);
    for (int k = 0; k < omegas[c]; ++k) amp(k) = 1.0 / (1.0 + cfg.decay * eig.values(k));
    amplitudes[c] = amp / amp.norm();
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double noise_sigma = std::sqrt(std::pow(10.0, -cfg.snr_db / 10.0) / (static_cast<double>(n) * cfg.length));
  auto& data = out.dataset;
  data.sample_rate = cfg.sample_rate;
  for (int i = 0; i < n; ++i) data.channel_names.push_back("ch" + std::to_string(i));
  for (int k = 0; k < cfg.n_samples; ++k) {
    Sample s;
    s.label = (k / cfg.subjects) % 2;
    s.subject = k % cfg.subjects;
    const int w = omegas[s.label];
    Eigen::MatrixXd z(w, cfg.length);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = nd(rng);
    // Unit expected energy per sample.
    const Eigen::MatrixXd clean =
        truth.subspace[s.label] * (amplitudes[s.label].asDiagonal() * z) / std::sqrt(static_cast<double>(cfg.length));
    Eigen::MatrixXd noisy = clean;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += noise_sigma * nd(rng);
    s.signal = std::move(noisy);
    truth.clean.push_back(clean);
    data.samples.push_back(std::move(s));
  }
  return out;
}

namespace {

std::size_t tenth(std::size_t n) { return static_cast<std::size_t>(std::lround(static_cast<double>(n) / 10.0)); }

}  // namespace

Split split_ratio(const LabeledDataset& data, std::uint64_t seed) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_test = tenth(idx.size());
  const std::size_t n_val = tenth(idx.size());
  if (n_test == 0 || n_val == 0 || n_test + n_val >= idx.size()) {
    throw InvalidArgument("dataset too small for an 8:1:1 split");
  }
  Split s;
  s.train.assign(idx.begin(), idx.end() - static_cast<long>(n_test + n_val));
  s.val.assign(idx.end() - static_cast<long>(n_test + n_val), idx.end() - static_cast<long>(n_test));
  s.test.assign(idx.end() - static_cast<long>(n_test), idx.end());
  return s;
}

Split split_loso(const LabeledDataset& data, int subject, std::uint64_t seed) {
  Split s;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (data.samples[i].subject == subject ? s.test : rest).push_back(i);
  }
  if (s.test.empty()) throw InvalidArgument("subject " + std::to_string(subject) + " not present");
  std::mt19937_64 rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  const std::size_t n_val = std::max<std::size_t>(1, tenth(rest.size()));
  if (n_val >= rest.size()) throw InvalidArgument("too few samples outside the held-out subject");
  s.train.assign(rest.begin(), rest.end() - static_cast<long>(n_val));
  s.val.assign(rest.end() - static_cast<long>(n_val), rest.end());
  return s;
}

void write_sample_csv(const std::string& path, const Sample& s, const std::vector<std::string>& channels) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write " + path);
  for (std::size_t c = 0; c < channels.size(); ++c) os << (c ? "," : "") << channels[c];
  os << '\n';
  for (Eigen::Index t = 0; t < s.signal.cols(); ++t) {
    for (Eigen::Index c = 0; c < s.signal.rows(); ++c) os << (c ? "," : "") << format_double(s.signal(c, t));
    os << '\n';
  }
  if (!os) throw InvalidArgument("write failed for " + path);
}

Eigen::MatrixXd read_sample_csv(const std::string& path, std::vector<std::string>* channels) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot read " + path);
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path + ": missing header");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != names.size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(names.size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t c = 0; c < names.size(); ++c) m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = rows[t][c];
  if (channels) *channels = std::move(names);
  return m;
}

void write_dataset(const std::string& dir, const LabeledDataset& data) {
  data.validate();
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "samples", ec);
  if (ec) throw InvalidArgument("cannot create " + dir + ": " + ec.message());
  std::vector<std::string> channels = data.channel_names;
  if (channels.empty() && !data.samples.empty()) {
    for (Eigen::Index c = 0; c < data.samples.front().signal.rows(); ++c) channels.push_back("ch" + std::to_string(c));
  }
  json entries = json::array();
  for (std::size_t k = 0; k < data.size(); ++k) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%05zu", k);
    const std::string csv = std::string("samples/") + stem + ".csv";
    const std::string side = std::string("samples/") + stem + ".json";
    const auto& s = data.samples[k];
    write_sample_csv((fs::path(dir) / csv).string(), s, channels);
    std::ofstream os(fs::path(dir) / side);
    os << json{{"sample_rate", data.sample_rate}, {"label", s.label}, {"subject_id", s.subject}}.dump(1) << '\n';
    if (!os) throw InvalidArgument("cannot write sidecar for " + csv);
    entries.push_back({{"csv", csv}, {"sidecar", side}, {"label", s.label}, {"subject_id", s.subject}});
  }
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw InvalidArgument("cannot write manifest in " + dir);
  os << json{{"format", "balgraph-dataset/1"},
             {"sample_rate", data.sample_rate},
             {"channels", channels},
             {"n_samples", data.size()},
             {"samples", std::move(entries)}}
            .dump(1)
     << '\n';
}

LabeledDataset read_dataset(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / "manifest.json";
  std::ifstream is(manifest);
  if (!is) throw InvalidArgument("missing dataset manifest " + manifest.string());
  LabeledDataset data;
  try {
    const json doc = json::parse(is);
    data.sample_rate = doc.at("sample_rate").get<double>();
    data.channel_names = doc.at("channels").get<std::vector<std::string>>();
    for (const auto& e : doc.at("samples")) {
      Sample s;
      std::vector<std::string> names;
      s.signal = read_sample_csv((fs::path(dir) / e.at("csv").get<std::string>()).string(), &names);
      if (names != data.channel_names) throw ParseError("channel header differs from manifest");
      std::ifstream sis(fs::path(dir) / e.at("sidecar").get<std::string>());
      if (!sis) throw ParseError("missing sidecar " + e.at("sidecar").get<std::string>());
      const json side = json::parse(sis);
      s.label = side.at("label").get<int>();
      s.subject = side.at("subject_id").get<int>();
      data.samples.push_back(std::move(s));
    }
    if (doc.at("n_samples").get<std::size_t>() != data.size()) throw ParseError("manifest sample count mismatch");
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed dataset metadata: ") + e.what());
  }
  data.validate();
  return data;
}

}  // namespace balgraph
