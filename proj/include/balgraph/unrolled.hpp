#pragma once

#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "balgraph/balance.hpp"
#include "balgraph/graph_core.hpp"
#include "balgraph/spectral.hpp"

namespace balgraph {

/// One (1, k) convolution over the time axis of a node embedding, followed
/// by batch norm (running statistics) and a leaky ReLU.
struct ConvLayer {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 5;
  int stride = 1;
  Eigen::MatrixXd weight;  // out x (in * kernel), column c * kernel + k
  Eigen::VectorXd bias;
  Eigen::VectorXd bn_scale;
  Eigen::VectorXd bn_shift;
  Eigen::VectorXd bn_mean;
  Eigen::VectorXd bn_var;
  double bn_eps = 1e-5;
  double leaky_slope = 0.01;

  int output_length(int input_length) const;
  /// Convolution plus bias, before normalization. Input is in x length.
  Eigen::MatrixXd convolve(const Eigen::MatrixXd& input) const;
  /// Batch norm with running statistics, then the activation.
  Eigen::MatrixXd normalize_activate(const Eigen::MatrixXd& pre) const;
};

struct FeatureExtractorParams {
  int input_length = 0;  // E
  int feature_dim = 0;   // K
  std::vector<ConvLayer> conv;
  Eigen::VectorXd projection;  // 1x1 projection over the last layer's channels
  double projection_bias = 0.0;

  void validate() const;
  int conv_output_length() const;
};

/// Per-node features: rows of `embeddings` are node time series of length E.
Eigen::MatrixXd extract_features(const FeatureExtractorParams& params,
                                 const Eigen::MatrixXd& embeddings);

/// Average pooling to `out` bins with bin i spanning
/// [floor(i L / out), ceil((i + 1) L / out)).
Eigen::VectorXd adaptive_avg_pool(const Eigen::VectorXd& x, int out);

/// M = Q Q^T.
struct MetricFactor {
  Eigen::MatrixXd q;  // K x r
};

/// ||Q^T (f_i - f_j)||^2 for all pairs, without normalization.
Eigen::MatrixXd raw_mahalanobis(const Eigen::MatrixXd& features, const MetricFactor& metric);

/// Raw distances scaled to [0, 1] per sample; a constant field maps to 0.
FeatureDistanceField mahalanobis_distances(const Eigen::MatrixXd& features,
                                           const MetricFactor& metric);

/// Node layout of a sample: channels x chunks nodes, each carrying a chunk
/// of length `chunk_length`. Node index is chunk * channels + channel.
struct Chunking {
  int channels = 1;
  int chunks = 1;
  int chunk_length = 1;
  int nodes() const noexcept { return channels * chunks; }
};

struct DenoiserBlock {
  FeatureExtractorParams features;
  MetricFactor metric;
  FilterSpec filter;
  PolarityVector beta;
};

struct DenoiserModel {
  std::vector<DenoiserBlock> blocks;
  SignedGraph topology;
  PolarityVector beta0;
  Chunking chunking;
  WeightScheme scheme;
  /// Run one polarity sweep per block on the block's input at inference.
  bool adapt_polarity = false;

  int n_nodes() const noexcept { return topology.n_nodes(); }
  void validate() const;
};

struct BlockGraph {
  Laplacian laplacian;  // positive-graph form fed to the filter
  PolarityVector beta;
  double delta = 0.0;
  SignedGraph weights;  // normalized signed weights
};

/// Features, distances, signed weights, normalization, Gershgorin shift and
/// the polarity transform. With `update_polarity`, one sweep over the
/// embeddings refines the block's polarities first.
BlockGraph bgl_block(const DenoiserBlock& block, const SignedGraph& topology,
                     const WeightScheme& scheme, const Eigen::MatrixXd& embeddings,
                     bool update_polarity = false);

struct BlockTrace {
  Eigen::MatrixXd input;   // x_{t-1}, original domain
  BlockGraph graph;
  EigenPair eig;           // empty unless the filter used the exact backend
  Eigen::MatrixXd output;  // x_t, original domain
};

/// Runs every block, keeping intermediate results.
std::vector<BlockTrace> denoise_trace(const DenoiserModel& model, const Eigen::MatrixXd& y);

/// x_hat for a signal with one row per node and one column per time sample.
Eigen::MatrixXd denoise(const DenoiserModel& model, const Eigen::MatrixXd& y);

struct ArchitectureConfig {
  int blocks = 3;
  int conv_layers = 3;
  int conv_channels = 4;
  int kernel = 5;
  int stride = 1;
  int feature_dim = 16;
  int metric_rank = 0;  // 0 means feature_dim
  double alpha = 10.0;
  double omega = 1.0;
};

/// Seeded random initialization with identity batch norm.
DenoiserModel init_model(const ArchitectureConfig& arch, const SignedGraph& topology,
                         const Chunking& chunking, const PolarityVector& beta0,
                         const WeightScheme& scheme, std::mt19937_64& rng);

/// Flattened shape parameters (conv weights, biases, batch-norm affine,
/// projection, Q) in a fixed order.
Eigen::VectorXd shape_parameters(const DenoiserModel& model);
void set_shape_parameters(DenoiserModel& model, const Eigen::VectorXd& theta);

Eigen::VectorXd spectral_parameters(const DenoiserModel& model);
void set_spectral_parameters(DenoiserModel& model, const Eigen::VectorXd& omega);

/// Output of block `index` for the block input x.
Eigen::MatrixXd run_block(const DenoiserModel& model, std::size_t index, const Eigen::MatrixXd& x);

/// Running mean and (biased) variance of each conv layer from the given
/// block inputs, layer by layer.
void calibrate_block_batch_norm(DenoiserBlock& block, const std::vector<Eigen::MatrixXd>& inputs);

/// Sets every conv layer's running mean and variance from the given
/// embeddings, layer by layer, for each block. Embeddings for block t are
/// the outputs of block t-1 on the same inputs.
void calibrate_batch_norm(DenoiserModel& model, const std::vector<Eigen::MatrixXd>& inputs);

void save_model(std::ostream& os, const DenoiserModel& model);
DenoiserModel load_model(std::istream& is);
void save_model_file(const std::string& path, const DenoiserModel& model);
DenoiserModel load_model_file(const std::string& path);

}  // namespace balgraph
