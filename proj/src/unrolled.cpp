#include "balgraph/unrolled.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace balgraph {

using json = nlohmann::json;

int ConvLayer::output_length(int input_length) const {
  if (input_length < kernel) return 0;
  return (input_length - kernel) / stride + 1;
}

Eigen::MatrixXd ConvLayer::convolve(const Eigen::MatrixXd& input) const {
  if (input.rows() != in_channels) throw DimensionMismatch("conv input channel count");
  const int len = output_length(static_cast<int>(input.cols()));
  if (len <= 0) throw DimensionMismatch("conv input shorter than kernel");
  Eigen::MatrixXd out(out_channels, len);
  for (int o = 0; o < out_channels; ++o) {
    for (int t = 0; t < len; ++t) {
      double acc = bias(o);
      const int start = t * stride;
      for (int c = 0; c < in_channels; ++c) {
        for (int k = 0; k < kernel; ++k) acc += weight(o, c * kernel + k) * input(c, start + k);
      }
      out(o, t) = acc;
    }
  }
  return out;
}

Eigen::MatrixXd ConvLayer::normalize_activate(const Eigen::MatrixXd& pre) const {
  Eigen::MatrixXd out(pre.rows(), pre.cols());
  for (Eigen::Index o = 0; o < pre.rows(); ++o) {
    const double inv = bn_scale(o) / std::sqrt(bn_var(o) + bn_eps);
    for (Eigen::Index t = 0; t < pre.cols(); ++t) {
      const double v = (pre(o, t) - bn_mean(o)) * inv + bn_shift(o);
      out(o, t) = v >= 0.0 ? v : leaky_slope * v;
    }
  }
  return out;
}

int FeatureExtractorParams::conv_output_length() const {
  int len = input_length;
  for (const auto& layer : conv) len = layer.output_length(len);
  return len;
}

void FeatureExtractorParams::validate() const {
  if (feature_dim < 1 || feature_dim >= input_length) {
    throw InvalidArgument("feature dimension must lie in [1, embedding length)");
  }
  int channels = 1;
  for (const auto& layer : conv) {
    if (layer.in_channels != channels) throw InvalidArgument("conv channel chain is inconsistent");
    if (layer.kernel < 1 || layer.stride < 1) throw InvalidArgument("conv kernel and stride must be positive");
    const auto oc = static_cast<Eigen::Index>(layer.out_channels);
    if (layer.weight.rows() != oc || layer.weight.cols() != layer.in_channels * layer.kernel ||
        layer.bias.size() != oc || layer.bn_scale.size() != oc || layer.bn_shift.size() != oc ||
        layer.bn_mean.size() != oc || layer.bn_var.size() != oc) {
      throw InvalidArgument("conv parameter shapes are inconsistent");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite() || !layer.bn_scale.allFinite() ||
        !layer.bn_shift.allFinite() || !layer.bn_mean.allFinite() || !layer.bn_var.allFinite() ||
        (layer.bn_var.array() < 0.0).any()) {
      throw InvalidArgument("conv parameters must be finite");
    }
    channels = layer.out_channels;
  }
  if (projection.size() != channels || !projection.allFinite() || !std::isfinite(projection_bias)) {
    throw InvalidArgument("projection size must match the last conv layer");
  }
  if (conv_output_length() < 1) throw InvalidArgument("embedding too short for the conv stack");
}

Eigen::VectorXd adaptive_avg_pool(const Eigen::VectorXd& x, int out) {
  const auto len = x.size();
  Eigen::VectorXd y(out);
  for (int i = 0; i < out; ++i) {
    const Eigen::Index start = (static_cast<Eigen::Index>(i) * len) / out;
    const Eigen::Index end = ((static_cast<Eigen::Index>(i) + 1) * len + out - 1) / out;
    y(i) = x.segment(start, end - start).mean();
  }
  return y;
}

namespace {

Eigen::VectorXd node_features(const FeatureExtractorParams& params, const Eigen::RowVectorXd& e) {
  Eigen::MatrixXd h = e;
  for (const auto& layer : params.conv) h = layer.normalize_activate(layer.convolve(h));
  const Eigen::VectorXd p = (params.projection.transpose() * h).transpose().array() + params.projection_bias;
  return adaptive_avg_pool(p, params.feature_dim);
}

}  // namespace

Eigen::MatrixXd extract_features(const FeatureExtractorParams& params,
                                 const Eigen::MatrixXd& embeddings) {
  if (embeddings.cols() != params.input_length) {
    throw DimensionMismatch("embedding length " + std::to_string(embeddings.cols()) + " differs from " +
                            std::to_string(params.input_length));
  }
  Eigen::MatrixXd f(embeddings.rows(), params.feature_dim);
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) f.row(i) = node_features(params, embeddings.row(i));
  return f;
}

Eigen::MatrixXd raw_mahalanobis(const Eigen::MatrixXd& features, const MetricFactor& metric) {
  if (metric.q.rows() != features.cols()) throw DimensionMismatch("metric factor rows differ from feature dim");
  const Eigen::MatrixXd z = features * metric.q;  // rows are Q^T f_i
  const Eigen::Index n = z.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (z.row(i) - z.row(j)).squaredNorm();
  }
  return d;
}

FeatureDistanceField mahalanobis_distances(const Eigen::MatrixXd& features, const MetricFactor& metric) {
  Eigen::MatrixXd d = raw_mahalanobis(features, metric);
  if (d.size() == 0) return FeatureDistanceField(d);
  const double lo = d.minCoeff();
  const double hi = d.maxCoeff();
  if (hi - lo > 0.0) {
    d = (d.array() - lo) / (hi - lo);
  } else {
    d.setZero();
  }
  return FeatureDistanceField(std::move(d));
}

void DenoiserModel::validate() const {
  if (blocks.empty()) throw InvalidArgument("model needs at least one block");
  const int n = topology.n_nodes();
  if (n != chunking.nodes()) throw InvalidArgument("topology node count differs from channels x chunks");
  if (beta0.size() != n) throw InvalidArgument("initial polarity length differs from node count");
  for (const auto& b : blocks) {
    b.features.validate();
    if (b.features.input_length != chunking.chunk_length) {
      throw InvalidArgument("feature extractor length differs from chunk length");
    }
    if (b.metric.q.rows() != b.features.feature_dim || b.metric.q.cols() < 1 ||
        b.metric.q.cols() > b.features.feature_dim || !b.metric.q.allFinite()) {
      throw InvalidArgument("metric factor must be K x r with 1 <= r <= K");
    }
    if (b.beta.size() != n) throw InvalidArgument("block polarity length differs from node count");
    b.filter.validate(n);
  }
}

namespace {

// Drops edges whose weight is exactly zero when they would leave an
// endpoint with zero total magnitude, so normalization stays defined.
SignedGraph drop_dead_edges(const SignedGraph& g) {
  const auto deg = g.abs_degrees();
  bool any = false;
  for (double v : deg) any = any || v == 0.0;
  if (!any) return g;
  std::vector<Edge> kept;
  for (const auto& e : g.edges()) {
    if (deg[static_cast<std::size_t>(e.i)] > 0.0 && deg[static_cast<std::size_t>(e.j)] > 0.0) kept.push_back(e);
  }
  return SignedGraph(g.n_nodes(), std::move(kept), g.self_loops());
}

}  // namespace

BlockGraph bgl_block(const DenoiserBlock& block, const SignedGraph& topology, const WeightScheme& scheme,
                     const Eigen::MatrixXd& embeddings, bool update_polarity) {
  const int n = topology.n_nodes();
  if (embeddings.rows() != n) throw DimensionMismatch("embedding rows differ from node count");
  const Eigen::MatrixXd f = extract_features(block.features, embeddings);
  const FeatureDistanceField d = mahalanobis_distances(f, block.metric);

  BlockGraph out;
  switch (scheme.kind) {
    case WeightSchemeKind::balanced_cht: {
      PolarityVector beta = block.beta;
      if (update_polarity) {
        // Magnitudes do not depend on the sweep, only the signs do.
        const SignedGraph magnitudes = assign_weights(d, PolarityVector::ones(n), WeightScheme::positive(), topology);
        beta = update_polarities(magnitudes, beta, embeddings, 1).beta;
      }
      const SignedGraph w = normalize_weights(drop_dead_edges(assign_weights(d, beta, scheme, topology)));
      const auto shifted = gct_shift(build_laplacian(w, LaplacianVariant::combinatorial));
      out.laplacian = similarity_transform(shifted.laplacian, beta);
      out.beta = std::move(beta);
      out.delta = shifted.delta;
      out.weights = w;
      break;
    }
    case WeightSchemeKind::positive_only: {
      const PolarityVector ones = PolarityVector::ones(n);
      const SignedGraph w = normalize_weights(drop_dead_edges(assign_weights(d, ones, scheme, topology)));
      const auto shifted = gct_shift(build_laplacian(w, LaplacianVariant::combinatorial));
      out.laplacian = shifted.laplacian;
      out.beta = ones;
      out.delta = shifted.delta;
      out.weights = w;
      break;
    }
    case WeightSchemeKind::logistic_unbalanced: {
      const PolarityVector ones = PolarityVector::ones(n);
      const SignedGraph w = normalize_weights(drop_dead_edges(assign_weights(d, ones, scheme, topology)));
      out.laplacian = build_laplacian(w, LaplacianVariant::signed_abs);
      out.beta = ones;
      out.weights = w;
      break;
    }
  }
  return out;
}

std::vector<BlockTrace> denoise_trace(const DenoiserModel& model, const Eigen::MatrixXd& y) {
  if (y.rows() != model.n_nodes()) throw DimensionMismatch("signal rows differ from node count");
  std::vector<BlockTrace> trace;
  trace.reserve(model.blocks.size());
  Eigen::MatrixXd x = y;
  for (const auto& block : model.blocks) {
    BlockTrace t;
    t.input = x;
    t.graph = bgl_block(block, model.topology, model.scheme, x, model.adapt_polarity);
    const Eigen::MatrixXd y_plus = t.graph.beta.apply(x);
    Eigen::MatrixXd x_plus;
    if (block.filter.backend == FilterBackend::exact) {
      block.filter.validate(t.graph.laplacian.size());
      t.eig = eigh(t.graph.laplacian);
      x_plus = apply_spectral_filter(t.eig, y_plus, block.filter);
    } else {
      x_plus = lp_filter_lanczos(t.graph.laplacian, y_plus, block.filter);
    }
    x = t.graph.beta.apply(x_plus);
    t.output = x;
    trace.push_back(std::move(t));
  }
  return trace;
}

Eigen::MatrixXd denoise(const DenoiserModel& model, const Eigen::MatrixXd& y) {
  if (y.rows() != model.n_nodes()) throw DimensionMismatch("signal rows differ from node count");
  Eigen::MatrixXd x = y;
  for (std::size_t t = 0; t < model.blocks.size(); ++t) x = run_block(model, t, x);
  return x;
}

DenoiserModel init_model(const ArchitectureConfig& arch, const SignedGraph& topology, const Chunking& chunking,
                         const PolarityVector& beta0, const WeightScheme& scheme, std::mt19937_64& rng) {
  if (arch.blocks < 1 || arch.conv_layers < 0 || arch.conv_channels < 1) {
    throw InvalidArgument("architecture needs at least one block and one channel");
  }
  std::normal_distribution<double> nd(0.0, 1.0);
  DenoiserModel model;
  model.topology = topology;
  model.chunking = chunking;
  model.beta0 = beta0;
  model.scheme = scheme;
  const int rank = arch.metric_rank > 0 ? arch.metric_rank : arch.feature_dim;
  for (int b = 0; b < arch.blocks; ++b) {
    DenoiserBlock block;
    auto& fe = block.features;
    fe.input_length = chunking.chunk_length;
    fe.feature_dim = arch.feature_dim;
    int channels = 1;
    for (int l = 0; l < arch.conv_layers; ++l) {
      ConvLayer layer;
      layer.in_channels = channels;
      layer.out_channels = arch.conv_channels;
      layer.kernel = arch.kernel;
      layer.stride = arch.stride;
      const double scale = std::sqrt(2.0 / (channels * arch.kernel));
      layer.weight.resize(layer.out_channels, channels * arch.kernel);
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = scale * nd(rng);
      layer.bias = Eigen::VectorXd::Zero(layer.out_channels);
      layer.bn_scale = Eigen::VectorXd::Ones(layer.out_channels);
      layer.bn_shift = Eigen::VectorXd::Zero(layer.out_channels);
      layer.bn_mean = Eigen::VectorXd::Zero(layer.out_channels);
      layer.bn_var = Eigen::VectorXd::Ones(layer.out_channels);
      fe.conv.push_back(std::move(layer));
      channels = arch.conv_channels;
    }
    fe.projection.resize(channels);
    for (int c = 0; c < channels; ++c) fe.projection(c) = nd(rng) / std::sqrt(static_cast<double>(channels));
    block.metric.q = Eigen::MatrixXd::Identity(arch.feature_dim, rank);
    block.filter.omega = arch.omega;
    block.filter.alpha = arch.alpha;
    block.beta = beta0;
    model.blocks.push_back(std::move(block));
  }
  model.validate();
  return model;
}

namespace {

template <typename F>
void visit_shape(DenoiserModel& model, F&& f) {
  for (auto& block : model.blocks) {
    for (auto& layer : block.features.conv) {
      f(layer.weight.data(), layer.weight.size());
      f(layer.bias.data(), layer.bias.size());
      f(layer.bn_scale.data(), layer.bn_scale.size());
      f(layer.bn_shift.data(), layer.bn_shift.size());
    }
    f(block.features.projection.data(), block.features.projection.size());
    f(&block.features.projection_bias, 1);
    f(block.metric.q.data(), block.metric.q.size());
  }
}

}  // namespace

Eigen::VectorXd shape_parameters(const DenoiserModel& model) {
  std::vector<double> flat;
  visit_shape(const_cast<DenoiserModel&>(model), [&](double* p, Eigen::Index len) { flat.insert(flat.end(), p, p + len); });
  return Eigen::Map<Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

void set_shape_parameters(DenoiserModel& model, const Eigen::VectorXd& theta) {
  Eigen::Index pos = 0;
  visit_shape(model, [&](double* p, Eigen::Index len) {
    if (pos + len > theta.size()) throw DimensionMismatch("shape parameter vector too short");
    std::copy(theta.data() + pos, theta.data() + pos + len, p);
    pos += len;
  });
  if (pos != theta.size()) throw DimensionMismatch("shape parameter vector too long");
}

Eigen::VectorXd spectral_parameters(const DenoiserModel& model) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(model.blocks.size()));
  for (std::size_t b = 0; b < model.blocks.size(); ++b) w(static_cast<Eigen::Index>(b)) = model.blocks[b].filter.omega;
  return w;
}

void set_spectral_parameters(DenoiserModel& model, const Eigen::VectorXd& omega) {
  if (omega.size() != static_cast<Eigen::Index>(model.blocks.size())) {
    throw DimensionMismatch("one cutoff per block expected");
  }
  for (std::size_t b = 0; b < model.blocks.size(); ++b) model.blocks[b].filter.omega = omega(static_cast<Eigen::Index>(b));
}

Eigen::MatrixXd run_block(const DenoiserModel& model, std::size_t index, const Eigen::MatrixXd& x) {
  const auto& block = model.blocks.at(index);
  const BlockGraph g = bgl_block(block, model.topology, model.scheme, x, model.adapt_polarity);
  return g.beta.apply(lp_filter(g.laplacian, g.beta.apply(x), block.filter));
}

void calibrate_block_batch_norm(DenoiserBlock& block, const std::vector<Eigen::MatrixXd>& inputs) {
  // Activations per node row, carried layer to layer.
  std::vector<Eigen::MatrixXd> acts;
  for (const auto& x : inputs)
    for (Eigen::Index i = 0; i < x.rows(); ++i) acts.emplace_back(x.row(i));
  if (acts.empty()) return;
  for (auto& layer : block.features.conv) {
    std::vector<Eigen::MatrixXd> pre;
    pre.reserve(acts.size());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(layer.out_channels);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(layer.out_channels);
    double count = 0.0;
    for (const auto& a : acts) {
      pre.push_back(layer.convolve(a));
      sum += pre.back().rowwise().sum();
      count += static_cast<double>(pre.back().cols());
    }
    const Eigen::VectorXd mean = sum / count;
    for (const auto& p : pre) sq += (p.colwise() - mean).rowwise().squaredNorm();
    layer.bn_mean = mean;
    layer.bn_var = sq / count;
    for (std::size_t k = 0; k < acts.size(); ++k) acts[k] = layer.normalize_activate(pre[k]);
  }
}

void calibrate_batch_norm(DenoiserModel& model, const std::vector<Eigen::MatrixXd>& inputs) {
  std::vector<Eigen::MatrixXd> current = inputs;
  for (std::size_t t = 0; t < model.blocks.size(); ++t) {
    calibrate_block_batch_norm(model.blocks[t], current);
    if (t + 1 == model.blocks.size()) break;
    for (auto& x : current) x = run_block(model, t, x);
  }
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw ParseError("matrix row count mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = data.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(r.size()) != cols) throw ParseError("matrix column count mismatch");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = r.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

json graph_to_json(const SignedGraph& g) {
  json edges = json::array();
  for (const auto& e : g.edges()) edges.push_back(json::array({e.i, e.j, e.w}));
  return json{{"nodes", g.n_nodes()}, {"edges", std::move(edges)}, {"self_loops", g.self_loops()}};
}

SignedGraph graph_from_json(const json& j) {
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
  return SignedGraph(j.at("nodes").get<int>(), std::move(edges), j.value("self_loops", std::vector<double>{}));
}

constexpr const char* kFormat = "balgraph-model/1";

}  // namespace

void save_model(std::ostream& os, const DenoiserModel& model) {
  json blocks = json::array();
  for (const auto& b : model.blocks) {
    json conv = json::array();
    for (const auto& l : b.features.conv) {
      conv.push_back({{"in_channels", l.in_channels},
                      {"out_channels", l.out_channels},
                      {"kernel", l.kernel},
                      {"stride", l.stride},
                      {"weight", matrix_to_json(l.weight)},
                      {"bias", vector_to_json(l.bias)},
                      {"bn_scale", vector_to_json(l.bn_scale)},
                      {"bn_shift", vector_to_json(l.bn_shift)},
                      {"bn_mean", vector_to_json(l.bn_mean)},
                      {"bn_var", vector_to_json(l.bn_var)},
                      {"bn_eps", l.bn_eps},
                      {"leaky_slope", l.leaky_slope}});
    }
    blocks.push_back({{"features",
                       {{"input_length", b.features.input_length},
                        {"feature_dim", b.features.feature_dim},
                        {"conv", std::move(conv)},
                        {"projection", vector_to_json(b.features.projection)},
                        {"projection_bias", b.features.projection_bias}}},
                      {"metric", matrix_to_json(b.metric.q)},
                      {"filter",
                       {{"omega", b.filter.omega},
                        {"alpha", b.filter.alpha},
                        {"mode", to_string(b.filter.mode)},
                        {"backend", to_string(b.filter.backend)},
                        {"krylov_dim", b.filter.krylov_dim}}},
                      {"beta", b.beta.values()}});
  }
  const json doc{{"format", kFormat},
                 {"chunking",
                  {{"channels", model.chunking.channels},
                   {"chunks", model.chunking.chunks},
                   {"chunk_length", model.chunking.chunk_length}}},
                 {"scheme", {{"kind", to_string(model.scheme.kind)}, {"d_star", model.scheme.d_star}}},
                 {"adapt_polarity", model.adapt_polarity},
                 {"topology", graph_to_json(model.topology)},
                 {"beta0", model.beta0.values()},
                 {"block_count", model.blocks.size()},
                 {"blocks", std::move(blocks)}};
  os << doc.dump(1) << '\n';
}

DenoiserModel load_model(std::istream& is) {
  DenoiserModel model;
  try {
    const json doc = json::parse(is);
    if (doc.at("format").get<std::string>() != kFormat) throw ParseError("unsupported model format");
    const auto& ch = doc.at("chunking");
    model.chunking = {ch.at("channels").get<int>(), ch.at("chunks").get<int>(), ch.at("chunk_length").get<int>()};
    model.scheme.kind = weight_scheme_from_string(doc.at("scheme").at("kind").get<std::string>());
    model.scheme.d_star = doc.at("scheme").at("d_star").get<double>();
    model.adapt_polarity = doc.at("adapt_polarity").get<bool>();
    model.topology = graph_from_json(doc.at("topology"));
    model.beta0 = PolarityVector(doc.at("beta0").get<std::vector<int>>());
    for (const auto& jb : doc.at("blocks")) {
      DenoiserBlock b;
      const auto& jf = jb.at("features");
      b.features.input_length = jf.at("input_length").get<int>();
      b.features.feature_dim = jf.at("feature_dim").get<int>();
      for (const auto& jl : jf.at("conv")) {
        ConvLayer l;
        l.in_channels = jl.at("in_channels").get<int>();
        l.out_channels = jl.at("out_channels").get<int>();
        l.kernel = jl.at("kernel").get<int>();
        l.stride = jl.at("stride").get<int>();
        l.weight = matrix_from_json(jl.at("weight"));
        l.bias = vector_from_json(jl.at("bias"));
        l.bn_scale = vector_from_json(jl.at("bn_scale"));
        l.bn_shift = vector_from_json(jl.at("bn_shift"));
        l.bn_mean = vector_from_json(jl.at("bn_mean"));
        l.bn_var = vector_from_json(jl.at("bn_var"));
        l.bn_eps = jl.at("bn_eps").get<double>();
        l.leaky_slope = jl.at("leaky_slope").get<double>();
        b.features.conv.push_back(std::move(l));
      }
      b.features.projection = vector_from_json(jf.at("projection"));
      b.features.projection_bias = jf.at("projection_bias").get<double>();
      b.metric.q = matrix_from_json(jb.at("metric"));
      const auto& fl = jb.at("filter");
      b.filter.omega = fl.at("omega").get<double>();
      b.filter.alpha = fl.at("alpha").get<double>();
      b.filter.mode = filter_mode_from_string(fl.at("mode").get<std::string>());
      b.filter.backend = filter_backend_from_string(fl.at("backend").get<std::string>());
      b.filter.krylov_dim = fl.at("krylov_dim").get<int>();
      b.beta = PolarityVector(jb.at("beta").get<std::vector<int>>());
      model.blocks.push_back(std::move(b));
    }
    if (doc.at("block_count").get<std::size_t>() != model.blocks.size()) throw ParseError("block count mismatch");
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid model document: ") + e.what());
  }
  model.validate();
  return model;
}

void save_model_file(const std::string& path, const DenoiserModel& model) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write " + path);
  save_model(os, model);
  if (!os) throw InvalidArgument("write failed for " + path);
}

DenoiserModel load_model_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot read " + path);
  return load_model(is);
}

}  // namespace balgraph
