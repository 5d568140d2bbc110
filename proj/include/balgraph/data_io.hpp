#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "balgraph/graph_core.hpp"

namespace balgraph {

struct Sample {
  Eigen::MatrixXd signal;  // channels x time
  int label = 0;
  int subject = 0;
};

struct LabeledDataset {
  std::vector<Sample> samples;
  double sample_rate = 1.0;
  std::vector<std::string> channel_names;

  std::size_t size() const noexcept { return samples.size(); }
  /// Uniform shapes, binary labels, channel names matching the row count.
  void validate() const;
  std::vector<int> subjects() const;  // sorted, distinct
};

/// One node per edge of g0, adjacent when the edges share an endpoint.
SignedGraph build_line_graph(const SignedGraph& g0);

/// H copies of the spatial graph; node (i, h) is h * N + i and is linked to
/// (i, h + 1) with weight temporal_w.
SignedGraph build_product_graph(const SignedGraph& spatial, int chunks, double temporal_w = 1.0);

struct TopologySpec {
  SignedGraph primary;
  bool line_graph = false;
  int chunks = 1;
  double temporal_w = 1.0;
};

SignedGraph build_topology(const TopologySpec& spec);

/// Trims drop_head and drop_tail samples, then cuts H consecutive chunks of
/// length D. Row h * channels + c holds chunk h of channel c.
Eigen::MatrixXd chunk(const Eigen::MatrixXd& signal, int chunks, int chunk_length, int drop_head = 0,
                      int drop_tail = 0);

struct SynthConfig {
  int n_nodes = 30;
  int extra_edges = 30;  // chords on top of a random spanning path
  int length = 32;       // time samples per sample
  int omega0 = 4;
  int omega1 = 4;
  double decay = 5.0;  // coefficient k has amplitude proportional to 1 / (1 + decay * lambda_k)
  double flip_fraction = 1.0 / 3.0;  // nodes whose polarity differs between the classes
  int n_samples = 400;
  double snr_db = 10.0;
  int subjects = 4;
  double sample_rate = 256.0;
  std::uint64_t graph_seed = 1;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SynthTruth {
  SignedGraph topology;             // unit weights
  SignedGraph graphs[2];            // balanced signed graphs per class
  PolarityVector beta[2];
  Eigen::MatrixXd subspace[2];      // n x omega_c orthonormal basis in the signed domain
  std::vector<Eigen::MatrixXd> clean;
};

struct SynthResult {
  LabeledDataset dataset;
  SynthTruth truth;
};

/// Two-class data: class c draws T_c V_c z with V_c the lowest omega_c
/// eigenvectors of its positive-graph Laplacian, then adds white noise at
/// the configured SNR. Labels alternate in runs of `subjects` so every
/// subject sees both classes; subjects are assigned round-robin.
SynthResult synth_two_class(const SynthConfig& config);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle then 8:1:1.
Split split_ratio(const LabeledDataset& data, std::uint64_t seed);
/// Held-out subject for test; the rest is shuffled and cut 9:1 into train/val.
Split split_loso(const LabeledDataset& data, int subject, std::uint64_t seed);

// Files: one CSV per sample (header row of channel names, one row per time
// step) plus a JSON sidecar {sample_rate, label, subject_id}, and a
// manifest.json listing both.
void write_sample_csv(const std::string& path, const Sample& s, const std::vector<std::string>& channels);
Eigen::MatrixXd read_sample_csv(const std::string& path, std::vector<std::string>* channels = nullptr);
void write_dataset(const std::string& dir, const LabeledDataset& data);
LabeledDataset read_dataset(const std::string& dir);

}  // namespace balgraph
