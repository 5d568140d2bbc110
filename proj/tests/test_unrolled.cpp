#include <random>
#include <sstream>

#include "doctest.h"
#include "balgraph/unrolled.hpp"
#include "oracles.hpp"

using namespace balgraph;

namespace {

DenoiserModel small_model(int n, int length, std::mt19937_64& rng, int blocks = 2,
                          WeightScheme scheme = WeightScheme::balanced()) {
  ArchitectureConfig arch;
  arch.blocks = blocks;
  arch.conv_layers = 2;
  arch.conv_channels = 3;
  arch.kernel = 3;
  arch.feature_dim = 5;
  arch.omega = 0.7;
  arch.alpha = 6.0;
  const auto topo = oracle::random_topology(n, n, rng);
  const PolarityVector beta(oracle::random_polarity(n, rng));
  return init_model(arch, topo, Chunking{n, 1, length}, beta, scheme, rng);
}

ConvLayer identity_norm_layer(Eigen::MatrixXd weight, int kernel, int stride) {
  ConvLayer l;
  l.in_channels = static_cast<int>(weight.cols()) / kernel;
  l.out_channels = static_cast<int>(weight.rows());
  l.kernel = kernel;
  l.stride = stride;
  l.weight = std::move(weight);
  l.bias = Eigen::VectorXd::Zero(l.out_channels);
  l.bn_scale = Eigen::VectorXd::Ones(l.out_channels);
  l.bn_shift = Eigen::VectorXd::Zero(l.out_channels);
  l.bn_mean = Eigen::VectorXd::Zero(l.out_channels);
  l.bn_var = Eigen::VectorXd::Constant(l.out_channels, 1.0 - l.bn_eps);
  return l;
}

}  // namespace

TEST_CASE("adaptive average pooling bins") {
  Eigen::VectorXd x(5);
  x << 1, 2, 3, 4, 5;
  const auto y = adaptive_avg_pool(x, 3);
  // Bins [0, 2), [1, 4), [3, 5).
  CHECK(y(0) == doctest::Approx(1.5));
  CHECK(y(1) == doctest::Approx(3.0));
  CHECK(y(2) == doctest::Approx(4.5));
  CHECK((adaptive_avg_pool(x, 5) - x).norm() == 0.0);
}

TEST_CASE("extract_features") {
  std::mt19937_64 rng(1);
  SUBCASE("zero input with zero offsets gives zero features") {
    auto model = small_model(6, 12, rng);
    const auto f = extract_features(model.blocks[0].features, Eigen::MatrixXd::Zero(6, 12));
    CHECK(f.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("identical embeddings give identical rows") {
    auto model = small_model(6, 12, rng);
    Eigen::MatrixXd e = oracle::random_matrix(6, 12, rng);
    e.row(4) = e.row(1);
    const auto f = extract_features(model.blocks[0].features, e);
    CHECK((f.row(4) - f.row(1)).norm() == 0.0);
  }
  SUBCASE("unit first tap copies the input prefix") {
    FeatureExtractorParams p;
    p.input_length = 10;
    p.feature_dim = 6;
    Eigen::MatrixXd w(1, 5);
    w << 1, 0, 0, 0, 0;
    p.conv.push_back(identity_norm_layer(w, 5, 1));
    p.projection = Eigen::VectorXd::Ones(1);
    Eigen::MatrixXd e(1, 10);
    e << 3, 1, 4, 1, 5, 9, 2, 6, 5, 3;
    const auto f = extract_features(p, e);
    for (int k = 0; k < 6; ++k) CHECK(f(0, k) == doctest::Approx(e(0, k)));
  }
  SUBCASE("strided two-channel convolution matches direct arithmetic") {
    const Eigen::MatrixXd w = oracle::random_matrix(2, 3, rng);
    const ConvLayer l = identity_norm_layer(w, 3, 2);
    const Eigen::MatrixXd x = oracle::random_matrix(1, 10, rng);
    const Eigen::MatrixXd out = l.convolve(x);
    REQUIRE(out.cols() == 4);
    for (int o = 0; o < 2; ++o)
      for (int t = 0; t < 4; ++t) {
        const double ref = w(o, 0) * x(0, 2 * t) + w(o, 1) * x(0, 2 * t + 1) + w(o, 2) * x(0, 2 * t + 2);
        CHECK(out(o, t) == doctest::Approx(ref));
      }
  }
  SUBCASE("shape errors") {
    auto model = small_model(6, 12, rng);
    CHECK_THROWS_AS(extract_features(model.blocks[0].features, Eigen::MatrixXd::Zero(6, 11)), DimensionMismatch);
    auto bad = model.blocks[0].features;
    bad.feature_dim = 12;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  }
}

TEST_CASE("mahalanobis distances") {
  Eigen::MatrixXd f(2, 2);
  f << 0, 0, 3, 4;
  const MetricFactor id{Eigen::MatrixXd::Identity(2, 2)};
  CHECK(raw_mahalanobis(f, id)(0, 1) == doctest::Approx(25.0));
  CHECK(mahalanobis_distances(f, id)(0, 1) == doctest::Approx(1.0));
  const Eigen::MatrixXd same = Eigen::MatrixXd::Ones(4, 3);
  CHECK(mahalanobis_distances(same, MetricFactor{Eigen::MatrixXd::Identity(3, 3)}).matrix().norm() == 0.0);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd feats = oracle::random_matrix(7, 4, rng);
    const MetricFactor q{oracle::random_matrix(4, 2, rng)};
    const Eigen::MatrixXd raw = raw_mahalanobis(feats, q);
    const Eigen::MatrixXd m = q.q * q.q.transpose();
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j) {
        const Eigen::VectorXd diff = (feats.row(i) - feats.row(j)).transpose();
        CHECK(raw(i, j) == doctest::Approx(diff.dot(m * diff)));
        CHECK(raw(i, j) >= 0.0);
      }
    const auto d = mahalanobis_distances(feats, q).matrix();
    CHECK(d.minCoeff() >= 0.0);
    CHECK(d.maxCoeff() == doctest::Approx(1.0));
  }
}

TEST_CASE("bgl_block") {
  std::mt19937_64 rng(11);
  SUBCASE("positive semidefinite with nonpositive off-diagonals") {
    for (int trial = 0; trial < 500; ++trial) {
      const int n = 3 + trial % 14;
      auto model = small_model(n, 10, rng, 1);
      const Eigen::MatrixXd e = oracle::random_matrix(n, 10, rng);
      const auto g = bgl_block(model.blocks[0], model.topology, model.scheme, e);
      CHECK(oracle::eigenvalues(g.laplacian.matrix()).minCoeff() >= -1e-9);
      const Eigen::MatrixXd& l = g.laplacian.matrix();
      double worst = -1.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j) worst = std::max(worst, l(i, j));
      CHECK(worst <= 0.0);
    }
  }
  SUBCASE("deterministic") {
    auto model = small_model(9, 10, rng, 1);
    const Eigen::MatrixXd e = oracle::random_matrix(9, 10, rng);
    const auto a = bgl_block(model.blocks[0], model.topology, model.scheme, e);
    const auto b = bgl_block(model.blocks[0], model.topology, model.scheme, e);
    CHECK(a.laplacian.matrix() == b.laplacian.matrix());
  }
  SUBCASE("normalized weights act as attention scores") {
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 4 + trial % 10;
      auto model = small_model(n, 10, rng, 1);
      const bool uniform = trial % 2 == 0;
      if (uniform) model.blocks[0].beta = PolarityVector::ones(n);
      const Eigen::MatrixXd e = oracle::random_matrix(n, 10, rng);
      const auto g = bgl_block(model.blocks[0], model.topology, model.scheme, e);
      const auto d = mahalanobis_distances(extract_features(model.blocks[0].features, e), model.blocks[0].metric);
      const auto& beta = model.blocks[0].beta;
      // Row sums of unnormalized magnitudes over topology neighbours.
      std::vector<double> deg_exp(static_cast<std::size_t>(n), 0.0), deg_abs(static_cast<std::size_t>(n), 0.0);
      auto magnitude = [&](int i, int j) {
        return beta[i] == beta[j] ? std::exp(-d(i, j)) : 1.0 - std::exp(-d(i, j));
      };
      for (const auto& t : model.topology.edges()) {
        deg_exp[static_cast<std::size_t>(t.i)] += std::exp(-d(t.i, t.j));
        deg_exp[static_cast<std::size_t>(t.j)] += std::exp(-d(t.i, t.j));
        deg_abs[static_cast<std::size_t>(t.i)] += magnitude(t.i, t.j);
        deg_abs[static_cast<std::size_t>(t.j)] += magnitude(t.i, t.j);
      }
      REQUIRE(g.weights.n_edges() == model.topology.n_edges());
      for (const auto& w : g.weights.edges()) {
        const auto i = static_cast<std::size_t>(w.i), j = static_cast<std::size_t>(w.j);
        CHECK(std::abs(w.w) == doctest::Approx(magnitude(w.i, w.j) / std::sqrt(deg_abs[i] * deg_abs[j])).epsilon(1e-10));
        if (uniform) CHECK(std::abs(w.w) == doctest::Approx(std::exp(-d(w.i, w.j)) / std::sqrt(deg_exp[i] * deg_exp[j])).epsilon(1e-10));
      }
    }
  }
  SUBCASE("ablation schemes") {
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 4 + trial % 8;
      auto pos = small_model(n, 10, rng, 1, WeightScheme::positive());
      auto logi = small_model(n, 10, rng, 1, WeightScheme::logistic(0.5));
      const Eigen::MatrixXd e = oracle::random_matrix(n, 10, rng);
      const auto gp = bgl_block(pos.blocks[0], pos.topology, pos.scheme, e);
      CHECK(gp.beta == PolarityVector::ones(n));
      CHECK(gp.delta < 1e-12);
      CHECK(oracle::eigenvalues(gp.laplacian.matrix()).minCoeff() >= -1e-9);
      const auto gl = bgl_block(logi.blocks[0], logi.topology, logi.scheme, e);
      CHECK(gl.laplacian.variant() == LaplacianVariant::signed_abs);
      CHECK(oracle::eigenvalues(gl.laplacian.matrix()).minCoeff() >= -1e-9);
    }
  }
  SUBCASE("polarity refinement lowers the block objective") {
    for (int trial = 0; trial < 30; ++trial) {
      const int n = 5 + trial % 8;
      auto model = small_model(n, 10, rng, 1);
      const Eigen::MatrixXd e = oracle::random_matrix(n, 10, rng);
      const auto g = bgl_block(model.blocks[0], model.topology, model.scheme, e, true);
      const auto mags = assign_weights(
          mahalanobis_distances(extract_features(model.blocks[0].features, e), model.blocks[0].metric),
          PolarityVector::ones(n), WeightScheme::positive(), model.topology);
      CHECK(polarity_objective(mags, g.beta, e) <= polarity_objective(mags, model.blocks[0].beta, e) + 1e-12);
    }
  }
}

TEST_CASE("denoise") {
  std::mt19937_64 rng(13);
  SUBCASE("all-pass blocks return the input") {
    auto model = small_model(8, 10, rng, 3);
    for (auto& b : model.blocks) {
      b.filter.mode = FilterMode::ideal;
      b.filter.omega = 8;
    }
    const Eigen::MatrixXd y = oracle::random_matrix(8, 10, rng);
    CHECK((denoise(model, y) - y).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("ideal blocks are non-expansive and reduce variation") {
    for (int trial = 0; trial < 40; ++trial) {
      const int n = 5 + trial % 10;
      auto model = small_model(n, 10, rng, 2);
      for (auto& b : model.blocks) {
        b.filter.mode = FilterMode::ideal;
        b.filter.omega = 1 + trial % (n - 1);
      }
      const Eigen::MatrixXd y = oracle::random_matrix(n, 10, rng);
      const auto trace = denoise_trace(model, y);
      for (const auto& t : trace) {
        const Eigen::MatrixXd yp = t.graph.beta.apply(t.input);
        const Eigen::MatrixXd xp = t.graph.beta.apply(t.output);
        CHECK(xp.norm() <= yp.norm() * (1 + 1e-12));
        CHECK((xp.transpose() * t.graph.laplacian.matrix() * xp).trace() <=
              (yp.transpose() * t.graph.laplacian.matrix() * yp).trace() + 1e-9);
      }
      CHECK((trace.back().output - denoise(model, y)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("eigenvector sign convention does not matter") {
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 5 + trial % 10;
      auto model = small_model(n, 10, rng, 1);
      model.blocks[0].filter.mode = trial % 2 ? FilterMode::ideal : FilterMode::sigmoid;
      model.blocks[0].filter.omega = trial % 2 ? 2.0 : 0.5;
      const Eigen::MatrixXd y = oracle::random_matrix(n, 10, rng);
      const auto g = bgl_block(model.blocks[0], model.topology, model.scheme, y);
      const Eigen::MatrixXd yp = g.beta.apply(y);
      const auto a = apply_spectral_filter(eigh(g.laplacian, SignConvention::largest_positive), yp, model.blocks[0].filter);
      const auto b = apply_spectral_filter(eigh(g.laplacian, SignConvention::largest_negative), yp, model.blocks[0].filter);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SUBCASE("polarity map is an involution") {
    const PolarityVector beta(oracle::random_polarity(9, rng));
    const Eigen::MatrixXd y = oracle::random_matrix(9, 4, rng);
    CHECK(beta.apply(beta.apply(y)) == y);
  }
  SUBCASE("lanczos backend with full Krylov dimension matches exact") {
    auto model = small_model(8, 10, rng, 2);
    const Eigen::MatrixXd y = oracle::random_matrix(8, 10, rng);
    const auto exact = denoise(model, y);
    for (auto& b : model.blocks) {
      b.filter.backend = FilterBackend::lanczos;
      b.filter.krylov_dim = 8;
    }
    CHECK((denoise(model, y) - exact).cwiseAbs().maxCoeff() < 1e-7);
  }
  CHECK_THROWS_AS(denoise(small_model(6, 10, rng), Eigen::MatrixXd::Zero(5, 10)), DimensionMismatch);
}

TEST_CASE("parameter vectors") {
  std::mt19937_64 rng(19);
  auto model = small_model(7, 12, rng, 2);
  const Eigen::VectorXd theta = shape_parameters(model);
  // Per block: 2 conv layers (3*3 + 3*3*3 weights, 3 bias, 3 scale, 3 shift
  // each), projection 3 + 1, Q 5 x 5.
  CHECK(theta.size() == 2 * ((9 + 9) + (27 + 9) + 4 + 25));
  auto copy = model;
  const Eigen::VectorXd bumped = theta.array() + 0.5;
  set_shape_parameters(copy, bumped);
  CHECK(shape_parameters(copy) == bumped);
  CHECK_THROWS_AS(set_shape_parameters(copy, Eigen::VectorXd::Zero(3)), DimensionMismatch);
  Eigen::VectorXd omega(2);
  omega << 0.3, 0.9;
  set_spectral_parameters(copy, omega);
  CHECK(spectral_parameters(copy) == omega);
}

TEST_CASE("batch norm calibration") {
  std::mt19937_64 rng(23);
  auto model = small_model(6, 12, rng, 2);
  std::vector<Eigen::MatrixXd> inputs;
  for (int k = 0; k < 5; ++k) inputs.push_back(oracle::random_matrix(6, 12, rng));
  calibrate_batch_norm(model, inputs);
  const auto& layer = model.blocks[0].features.conv[0];
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(layer.out_channels);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(layer.out_channels);
  double count = 0;
  for (const auto& x : inputs)
    for (int i = 0; i < 6; ++i) {
      const Eigen::MatrixXd pre = layer.convolve(Eigen::MatrixXd(x.row(i)));
      mean += pre.rowwise().sum();
      sq += pre.array().square().matrix().rowwise().sum();
      count += static_cast<double>(pre.cols());
    }
  mean /= count;
  const Eigen::VectorXd var = sq / count - mean.array().square().matrix();
  CHECK((layer.bn_mean - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((layer.bn_var - var).cwiseAbs().maxCoeff() < 1e-10);
  // Second block is calibrated on first-block outputs, so its stats differ
  // from a calibration on raw inputs.
  CHECK(model.blocks[1].features.conv[0].bn_var.allFinite());
}

TEST_CASE("model serialization") {
  std::mt19937_64 rng(29);
  auto model = small_model(7, 12, rng, 2);
  model.blocks[1].filter.mode = FilterMode::ideal;
  model.blocks[1].filter.omega = 3;
  std::ostringstream os;
  save_model(os, model);
  std::istringstream is(os.str());
  const auto loaded = load_model(is);
  CHECK(shape_parameters(loaded) == shape_parameters(model));
  CHECK(loaded.topology == model.topology);
  CHECK(loaded.blocks[1].filter.mode == FilterMode::ideal);
  const Eigen::MatrixXd y = oracle::random_matrix(7, 12, rng);
  CHECK(denoise(loaded, y) == denoise(model, y));
  std::ostringstream again;
  save_model(again, loaded);
  CHECK(again.str() == os.str());

  std::istringstream bad("{\"format\": \"other\"}");
  CHECK_THROWS_AS(load_model(bad), ParseError);
  std::istringstream garbage("not json");
  CHECK_THROWS_AS(load_model(garbage), ParseError);
}
