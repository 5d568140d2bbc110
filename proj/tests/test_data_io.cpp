#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "balgraph/data_io.hpp"
#include "oracles.hpp"

using namespace balgraph;
namespace fs = std::filesystem;

namespace {

// Edge pairs sharing an endpoint, by direct enumeration.
std::set<std::pair<int, int>> line_graph_oracle(const SignedGraph& g) {
  std::set<std::pair<int, int>> out;
  const auto e = g.edges();
  for (std::size_t a = 0; a < e.size(); ++a)
    for (std::size_t b = a + 1; b < e.size(); ++b)
      if (e[a].i == e[b].i || e[a].i == e[b].j || e[a].j == e[b].i || e[a].j == e[b].j)
        out.emplace(static_cast<int>(a), static_cast<int>(b));
  return out;
}

std::set<std::pair<int, int>> edge_set(const SignedGraph& g) {
  std::set<std::pair<int, int>> out;
  for (const auto& e : g.edges()) out.emplace(e.i, e.j);
  return out;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("balgraph_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("line graph") {
  CHECK(build_line_graph(SignedGraph(2, {{0, 1, 1.0}})).n_nodes() == 1);
  CHECK(build_line_graph(SignedGraph(2, {{0, 1, 1.0}})).n_edges() == 0);
  const auto path = build_line_graph(SignedGraph(3, {{0, 1, 1.0}, {1, 2, 1.0}}));
  CHECK(path.n_nodes() == 2);
  CHECK(path.n_edges() == 1);
  const auto tri = build_line_graph(SignedGraph(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}}));
  CHECK(tri.n_nodes() == 3);
  CHECK(tri.n_edges() == 3);
  CHECK_THROWS_AS(build_line_graph(SignedGraph(3)), InvalidArgument);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 11;
    const auto g = oracle::random_topology(n, n, rng);
    const auto lg = build_line_graph(g);
    CHECK(lg.n_nodes() == static_cast<int>(g.n_edges()));
    CHECK(edge_set(lg) == line_graph_oracle(g));
    std::vector<int> deg(static_cast<std::size_t>(n), 0);
    for (const auto& e : g.edges()) {
      ++deg[static_cast<std::size_t>(e.i)];
      ++deg[static_cast<std::size_t>(e.j)];
    }
    std::size_t handshake = 0;
    for (int d : deg) handshake += static_cast<std::size_t>(d * (d - 1) / 2);
    CHECK(lg.n_edges() == handshake);
  }
}

TEST_CASE("product graph") {
  const SignedGraph tri(3, {{0, 1, 1.0}, {1, 2, -0.5}, {0, 2, 2.0}});
  CHECK(build_product_graph(tri, 1) == tri);
  const auto p = build_product_graph(tri, 2, 0.7);
  CHECK(p.n_nodes() == 6);
  CHECK(p.n_edges() == 3 * 2 + 3 * 1);
  for (const auto& e : p.edges())
    if (e.j - e.i == 3 && e.i % 3 == e.j % 3) CHECK(e.w == 0.7);
  CHECK_THROWS_AS(build_product_graph(tri, 0), InvalidArgument);

  std::mt19937_64 rng(5);
  const auto spatial = oracle::random_signed(oracle::random_topology(5, 4, rng), rng);
  const int h = 4;
  const auto big = build_laplacian(build_product_graph(spatial, h, 0.3), LaplacianVariant::combinatorial).matrix();
  const auto small = build_laplacian(spatial, LaplacianVariant::combinatorial).matrix();
  for (int a = 0; a < h; ++a) {
    // Temporal degree: one neighbour at the ends, two inside.
    const double temporal_deg = 0.3 * ((a > 0) + (a + 1 < h));
    const Eigen::MatrixXd expect = small + temporal_deg * Eigen::MatrixXd::Identity(5, 5);
    CHECK((big.block(a * 5, a * 5, 5, 5) - expect).cwiseAbs().maxCoeff() < 1e-14);
    for (int b = 0; b < h; ++b) {
      if (std::abs(a - b) == 1)
        CHECK((big.block(a * 5, b * 5, 5, 5) + 0.3 * Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-14);
      if (std::abs(a - b) > 1) CHECK(big.block(a * 5, b * 5, 5, 5).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  TopologySpec spec{SignedGraph(3, {{0, 1, 1.0}, {1, 2, 1.0}}), true, 3, 1.0};
  CHECK(build_topology(spec).n_nodes() == 6);
}

TEST_CASE("chunk") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = oracle::random_matrix(3, 12, rng);
  const auto c = chunk(x, 4, 3);
  CHECK(c.rows() == 12);
  CHECK(c.cols() == 3);
  for (int h = 0; h < 4; ++h)
    for (int ch = 0; ch < 3; ++ch) CHECK(c.row(h * 3 + ch) == x.block(ch, h * 3, 1, 3));
  const Eigen::MatrixXd long_signal = Eigen::MatrixXd::Zero(2, 6000);
  const auto six = chunk(long_signal, 6, 1000);
  CHECK(six.rows() == 12);
  CHECK(six.cols() == 1000);
  const auto trimmed = chunk(x, 2, 4, 2, 1);
  CHECK(trimmed.row(0) == x.block(0, 2, 1, 4));
  CHECK(trimmed.row(3) == x.block(0, 6, 1, 4));
  CHECK_THROWS_AS(chunk(x, 4, 3, 13, 0), TooShort);
  CHECK_THROWS_AS(chunk(x, 4, 3, 1, 0), TooShort);
}

TEST_CASE("synthetic two-class data") {
  SynthConfig cfg;
  cfg.n_samples = 200;
  SUBCASE("noiseless samples lie in their own subspace only") {
    cfg.snr_db = 400.0;
    const auto r = synth_two_class(cfg);
    int separated = 0;
    for (std::size_t k = 0; k < r.dataset.size(); ++k) {
      const auto& s = r.dataset.samples[k];
      const Eigen::MatrixXd& v_own = r.truth.subspace[s.label];
      const Eigen::MatrixXd& v_other = r.truth.subspace[1 - s.label];
      const Eigen::MatrixXd& x = r.truth.clean[k];
      CHECK((x - v_own * (v_own.transpose() * x)).norm() <= 1e-9);
      if ((x - v_other * (v_other.transpose() * x)).norm() > 1e-6) ++separated;
    }
    CHECK(separated >= 0.99 * static_cast<double>(r.dataset.size()));
  }
  SUBCASE("balanced class graphs with the stated polarities") {
    const auto r = synth_two_class(cfg);
    for (int c = 0; c < 2; ++c)
      for (const auto& e : r.truth.graphs[c].edges()) CHECK(r.truth.beta[c][e.i] * r.truth.beta[c][e.j] * e.w > 0);
    int differ = 0;
    for (int i = 0; i < cfg.n_nodes; ++i) differ += r.truth.beta[0][i] != r.truth.beta[1][i];
    CHECK(differ == 10);
  }
  SUBCASE("signal to noise ratio and energy") {
    const auto r = synth_two_class(cfg);
    double signal = 0.0, noise = 0.0;
    for (std::size_t k = 0; k < r.dataset.size(); ++k) {
      signal += r.truth.clean[k].squaredNorm();
      noise += (r.dataset.samples[k].signal - r.truth.clean[k]).squaredNorm();
    }
    CHECK(signal / static_cast<double>(r.dataset.size()) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(10 * std::log10(signal / noise) == doctest::Approx(10.0).epsilon(0.05));
  }
  SUBCASE("labels and subjects") {
    const auto r = synth_two_class(cfg);
    CHECK(r.dataset.subjects() == std::vector<int>{0, 1, 2, 3});
    for (int subj = 0; subj < 4; ++subj) {
      int counts[2] = {0, 0};
      for (const auto& s : r.dataset.samples)
        if (s.subject == subj) ++counts[s.label];
      CHECK(counts[0] == 25);
      CHECK(counts[1] == 25);
    }
  }
  SUBCASE("deterministic") {
    const auto a = synth_two_class(cfg);
    const auto b = synth_two_class(cfg);
    for (std::size_t k = 0; k < a.dataset.size(); ++k) CHECK(a.dataset.samples[k].signal == b.dataset.samples[k].signal);
  }
  SUBCASE("invalid configs") {
    cfg.omega0 = 0;
    CHECK_THROWS_AS(synth_two_class(cfg), InvalidArgument);
  }
}

TEST_CASE("splits") {
  SynthConfig cfg;
  cfg.n_samples = 100;
  cfg.subjects = 5;
  const auto data = synth_two_class(cfg).dataset;
  const auto s = split_ratio(data, 3);
  CHECK(s.train.size() == 80);
  CHECK(s.val.size() == 10);
  CHECK(s.test.size() == 10);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 100);
  const auto again = split_ratio(data, 3);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);

  std::set<std::size_t> covered;
  for (int subj : data.subjects()) {
    const auto l = split_loso(data, subj, 3);
    for (auto i : l.test) {
      CHECK(data.samples[i].subject == subj);
      CHECK(covered.insert(i).second);
    }
    CHECK(l.val.size() == 8);
    CHECK(l.train.size() + l.val.size() + l.test.size() == 100);
    for (auto i : l.train) CHECK(data.samples[i].subject != subj);
  }
  CHECK(covered.size() == 100);
  CHECK_THROWS_AS(split_loso(data, 42, 3), InvalidArgument);
}

TEST_CASE("dataset files round-trip") {
  SynthConfig cfg;
  cfg.n_samples = 6;
  cfg.n_nodes = 5;
  cfg.extra_edges = 2;
  cfg.length = 7;
  const auto data = synth_two_class(cfg).dataset;
  const auto dir = scratch_dir("roundtrip");
  write_dataset(dir.string(), data);
  const auto back = read_dataset(dir.string());
  REQUIRE(back.size() == data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    CHECK(back.samples[k].signal == data.samples[k].signal);
    CHECK(back.samples[k].label == data.samples[k].label);
    CHECK(back.samples[k].subject == data.samples[k].subject);
  }
  CHECK(back.channel_names == data.channel_names);

  {
    std::ofstream bad(dir / "samples" / "sample_00002.csv");
    bad << "ch0,ch1,ch2,ch3,ch4\n1,2,x,4,5\n";
  }
  CHECK_THROWS_AS(read_dataset(dir.string()), ParseError);
  CHECK_THROWS_AS(read_dataset((dir / "missing").string()), InvalidArgument);
  fs::remove_all(dir);
}
