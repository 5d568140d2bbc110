#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <tuple>

#include "doctest.h"
#include "balgraph/pipeline.hpp"
#include "balgraph/train.hpp"
#include "oracles.hpp"

using namespace balgraph;

namespace {

std::string dump(const DenoiserModel& m) {
  std::ostringstream os;
  save_model(os, m);
  return os.str();
}

// Constant-error model: all-pass blocks, so reconstruction error is ||x - y||^2.
DenoiserModel pass_model(int n, int length, std::mt19937_64& rng) {
  ArchitectureConfig arch;
  arch.blocks = 1;
  arch.conv_layers = 1;
  arch.conv_channels = 2;
  arch.kernel = 3;
  arch.feature_dim = 3;
  auto m = init_model(arch, oracle::random_topology(n, n, rng), Chunking{n, 1, length},
                      PolarityVector::ones(n), WeightScheme::balanced(), rng);
  m.blocks[0].filter.mode = FilterMode::ideal;
  m.blocks[0].filter.omega = n;
  return m;
}

struct Tiny {
  SynthResult synth;
  Split split;
  PipelineConfig cfg;
};

Tiny tiny_problem(int epochs) {
  Tiny t;
  SynthConfig sc;
  sc.n_nodes = 10;
  sc.extra_edges = 8;
  sc.length = 16;
  sc.omega0 = 3;
  sc.omega1 = 3;
  sc.n_samples = 60;
  sc.subjects = 2;
  t.synth = synth_two_class(sc);
  t.split = split_ratio(t.synth.dataset, 3);
  t.cfg.arch.blocks = 2;
  t.cfg.arch.conv_layers = 1;
  t.cfg.arch.conv_channels = 3;
  t.cfg.arch.kernel = 3;
  t.cfg.arch.feature_dim = 4;
  t.cfg.train.epochs = epochs;
  t.cfg.train.patience = epochs + 1;
  t.cfg.seed = 11;
  return t;
}

TrainResult train_class(const Tiny& t, int c) {
  ClassData by[2];
  const auto& data = t.synth.dataset;
  for (auto i : t.split.train) by[data.samples[i].label].train.push_back(graph_signal(data.samples[i], t.cfg));
  for (auto i : t.split.val) by[data.samples[i].label].val.push_back(graph_signal(data.samples[i], t.cfg));
  const auto chunking = chunking_for(data, t.cfg);
  return train_denoiser(seeded_model(t.cfg, t.synth.truth.topology, chunking, c), by[c], by[1 - c], t.cfg.train);
}

}  // namespace

TEST_CASE("corrupt") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(100, 1000);
  const double sigma = 0.7;
  const Eigen::MatrixXd y = corrupt(x, sigma, rng);
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
  CHECK(std::abs(var - sigma * sigma) < 0.02 * sigma * sigma);

  std::mt19937_64 a(5), b(5);
  CHECK(corrupt(x.topRows(3), 0.3, a) == corrupt(x.topRows(3), 0.3, b));
  CHECK(corrupt(x.topRows(3), 0.0, a) == x.topRows(3));
  CHECK_THROWS_AS(corrupt(x, -1.0, a), InvalidArgument);
}

TEST_CASE("losses") {
  std::mt19937_64 rng(2);
  const int n = 6, len = 4;
  const auto model = pass_model(n, len, rng);
  const Eigen::MatrixXd x = oracle::random_matrix(n, len, rng);

  SUBCASE("own error 0 and other error 0.25 give 0.75") {
    Eigen::MatrixXd off = x;
    off(0, 0) += 0.5;
    const std::vector<SignalPair> own{{x, x}};
    const std::vector<SignalPair> other{{off, x}};
    CHECK(reconstruction_error(model, other[0]) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(loss_contrastive(model, own, other, 1.0) == doctest::Approx(0.75).epsilon(1e-9));
  }
  SUBCASE("saturated hinge and zero margin reduce to the plain loss") {
    std::vector<SignalPair> own, other;
    for (int i = 0; i < 5; ++i) {
      own.push_back({x + 0.1 * oracle::random_matrix(n, len, rng), x});
      other.push_back({x + 2.0 * oracle::random_matrix(n, len, rng), x});
    }
    const double plain = loss_plain(model, own);
    CHECK(loss_contrastive(model, own, other, 0.0) == plain);
    double min_other = 1e300;
    for (const auto& p : other) min_other = std::min(min_other, reconstruction_error(model, p));
    CHECK(loss_contrastive(model, own, other, min_other) == doctest::Approx(plain));
  }
  SUBCASE("bounds") {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<SignalPair> own, other;
      const int count = 1 + trial % 6;
      for (int i = 0; i < count; ++i) {
        own.push_back({x + oracle::random_matrix(n, len, rng), x});
        other.push_back({x + 0.3 * oracle::random_matrix(n, len, rng), x});
      }
      const double rho = 0.5 * (trial % 5);
      const double c = loss_contrastive(model, own, other, rho);
      CHECK(c >= 0.0);
      CHECK(c >= loss_plain(model, own) - rho * count);
      CHECK(c <= loss_plain(model, own) + rho * count + 1e-12);
    }
  }
  CHECK_THROWS_AS(loss_contrastive(model, {{x, x}}, {}, 1.0), DimensionMismatch);
}

TEST_CASE("mine_hard_pairs") {
  auto pt = [](double a, double b) {
    Eigen::MatrixXd m(2, 1);
    m << a, b;
    return m;
  };
  SUBCASE("unique nearest") {
    const auto r = mine_hard_pairs({pt(0, 0)}, {pt(0, 1), pt(5, 5)}, 1);
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0] == std::make_pair<std::size_t, std::size_t>(0, 0));
    CHECK_FALSE(r.truncated);
  }
  SUBCASE("zero distance goes first") {
    const auto r = mine_hard_pairs({pt(3, 3), pt(1, 1)}, {pt(9, 9), pt(1, 1)}, 2);
    CHECK(r.pairs[0] == std::make_pair<std::size_t, std::size_t>(1, 1));
    CHECK(r.pairs[1] == std::make_pair<std::size_t, std::size_t>(0, 0));
  }
  SUBCASE("count is truncated to the smaller class") {
    const auto r = mine_hard_pairs({pt(0, 0), pt(1, 0)}, {pt(0, 1)}, 2);
    CHECK(r.truncated);
    CHECK(r.pairs.size() == 1);
  }
  SUBCASE("matches a rescan greedy oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Eigen::MatrixXd> a, b;
      for (int i = 0; i < 10; ++i) {
        a.push_back(oracle::random_matrix(2, 1, rng));
        b.push_back(oracle::random_matrix(2, 1, rng));
      }
      // Rescan all unmatched pairs each round.
      std::vector<std::pair<std::size_t, std::size_t>> expect;
      std::vector<bool> ua(10, false), ub(10, false);
      for (int round = 0; round < 7; ++round) {
        std::tuple<double, std::size_t, std::size_t> best{1e300, 0, 0};
        for (std::size_t i = 0; i < 10; ++i)
          for (std::size_t j = 0; j < 10; ++j)
            if (!ua[i] && !ub[j]) best = std::min(best, {(a[i] - b[j]).squaredNorm(), i, j});
        ua[std::get<1>(best)] = ub[std::get<2>(best)] = true;
        expect.emplace_back(std::get<1>(best), std::get<2>(best));
      }
      CHECK(mine_hard_pairs(a, b, 7).pairs == expect);
    }
  }
  CHECK_THROWS_AS(mine_hard_pairs({}, {pt(0, 0)}, 1), InvalidArgument);
}

TEST_CASE("cutoff gradient") {
  std::mt19937_64 rng(4);
  const double h = 1e-4;
  SUBCASE("fixed graph, finite differences") {
    int checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const int n = trial == 0 ? 3 : 3 + trial % 10;
      const auto topo = oracle::random_topology(n, n, rng);
      const auto eig = eigh(build_laplacian(oracle::random_positive(topo, rng), LaplacianVariant::combinatorial));
      const Eigen::MatrixXd y = oracle::random_matrix(n, 3, rng);
      const Eigen::MatrixXd target = oracle::random_matrix(n, 3, rng);
      FilterSpec spec;
      spec.alpha = 4.0;
      spec.omega = std::uniform_real_distribution<double>(eig.values.minCoeff(), eig.values.maxCoeff())(rng);
      auto loss = [&](double w) {
        FilterSpec s = spec;
        s.omega = w;
        return (target - apply_spectral_filter(eig, y, s)).squaredNorm();
      };
      const double fd = (loss(spec.omega + h) - loss(spec.omega - h)) / (2 * h);
      const double an = filter_loss_omega_gradient(eig, y, target, spec);
      if (std::abs(fd) < 1e-6) continue;
      ++checked;
      CHECK(std::abs(an - fd) <= 1e-4 * std::abs(fd));
    }
    CHECK(checked >= 45);
  }
  SUBCASE("one block through the whole pipeline") {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 5 + trial;
      auto model = pass_model(n, 8, rng);
      model.blocks[0].filter.mode = FilterMode::sigmoid;
      model.blocks[0].filter.alpha = 3.0;
      model.blocks[0].filter.omega = 0.5;
      const SignalPair p{oracle::random_matrix(n, 8, rng), oracle::random_matrix(n, 8, rng)};
      auto at = [&](double w) {
        auto m = model;
        m.blocks[0].filter.omega = w;
        return reconstruction_error(m, p);
      };
      const double fd = (at(0.5 + h) - at(0.5 - h)) / (2 * h);
      const double an = error_omega_gradient(model, p)(0);
      CHECK(std::abs(an - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
    }
  }
  SUBCASE("ideal filters are rejected") {
    const auto eig = eigh(Eigen::MatrixXd::Identity(3, 3).eval());
    FilterSpec spec;
    spec.mode = FilterMode::ideal;
    spec.omega = 1;
    CHECK_THROWS_AS(filter_loss_omega_gradient(eig, Eigen::MatrixXd::Ones(3, 1), Eigen::MatrixXd::Ones(3, 1), spec),
                    InvalidArgument);
  }
}

TEST_CASE("spsa") {
  std::mt19937_64 rng(5);
  Eigen::VectorXd theta(3);
  theta << 1.0, -2.0, 0.5;
  auto quad = [](const Eigen::VectorXd& t) { return t.squaredNorm(); };
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) mean += spsa_estimate(quad, theta, 0.01, rng);
  mean /= draws;
  CHECK((mean - 2.0 * theta).norm() <= 0.05 * (2.0 * theta).norm());

  auto flat = [](const Eigen::VectorXd&) { return 3.0; };
  CHECK(spsa_estimate(flat, theta, 0.1, rng).isZero(0.0));

  std::mt19937_64 a(9), b(9);
  CHECK(spsa_estimate(quad, theta, 0.1, a) == spsa_estimate(quad, theta, 0.1, b));
  CHECK_THROWS_AS(spsa_estimate(quad, theta, 0.0, rng), InvalidArgument);
}

TEST_CASE("lr schedule") {
  LrSchedule s;
  CHECK(s.at(0) == doctest::Approx(1e-3));
  CHECK(s.at(5) == doctest::Approx(1e-3));
  CHECK(s.at(4) < s.at(3));
  CHECK(s.at(4) >= s.floor);
  s.mult = 2;
  CHECK(s.at(5) == doctest::Approx(1e-3));
  CHECK(s.at(14) < s.at(13));
  CHECK(s.at(15) == doctest::Approx(1e-3));
}

TEST_CASE("train_denoiser") {
  SUBCASE("zero epochs keep the initialization") {
    const auto t = tiny_problem(0);
    const auto r = train_class(t, 0);
    CHECK(r.log.empty());
    CHECK(r.best_epoch == 0);
    const auto init = seeded_model(t.cfg, t.synth.truth.topology, chunking_for(t.synth.dataset, t.cfg), 0);
    for (std::size_t b = 0; b < init.blocks.size(); ++b) {
      CHECK(r.model.blocks[b].features.conv[0].weight == init.blocks[b].features.conv[0].weight);
      CHECK(r.model.blocks[b].metric.q == init.blocks[b].metric.q);
    }
  }
  SUBCASE("same seed, same model") {
    const auto t = tiny_problem(3);
    CHECK(dump(train_class(t, 1).model) == dump(train_class(t, 1).model));
  }
  SUBCASE("zero margin is plain training") {
    auto t = tiny_problem(3);
    t.cfg.train.rho = 0.0;
    const auto a = train_class(t, 0);
    t.cfg.train.contrastive = false;
    t.cfg.train.rho = 1.0;
    const auto b = train_class(t, 0);
    CHECK(dump(a.model) == dump(b.model));
  }
  SUBCASE("training loss mostly decreases and classes separate") {
    const auto t = tiny_problem(12);
    TrainResult r[2] = {train_class(t, 0), train_class(t, 1)};
    for (const auto& res : r) {
      REQUIRE(res.log.size() >= 2);
      int down = 0;
      double prev = res.log.front().train_loss;
      for (std::size_t e = 1; e < res.log.size(); ++e) {
        down += res.log[e].train_loss <= prev;
        prev = res.log[e].train_loss;
      }
      CHECK(down >= 0.8 * static_cast<double>(res.log.size() - 1));
    }
    const auto& data = t.synth.dataset;
    for (int c = 0; c < 2; ++c) {
      double own = 0, cross = 0;
      int n_own = 0, n_cross = 0;
      for (auto i : t.split.test) {
        const auto y = graph_signal(data.samples[i], t.cfg);
        const double e = (y - denoise(r[c].model, y)).squaredNorm();
        if (data.samples[i].label == c) own += e, ++n_own;
        else cross += e, ++n_cross;
      }
      CHECK(own / n_own < cross / n_cross);
    }
  }
  SUBCASE("bad inputs") {
    auto t = tiny_problem(1);
    t.cfg.train.batch_size = 0;
    CHECK_THROWS_AS(train_class(t, 0), InvalidArgument);
  }
}
