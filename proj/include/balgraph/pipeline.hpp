#pragma once

#include <cstdint>
#include <vector>

#include "balgraph/classify.hpp"
#include "balgraph/data_io.hpp"
#include "balgraph/train.hpp"
#include "balgraph/unrolled.hpp"

namespace balgraph {

struct PipelineConfig {
  ArchitectureConfig arch;
  TrainConfig train;
  WeightScheme scheme;
  int chunks = 1;         // H
  int chunk_length = 0;   // D; 0 uses the whole trimmed signal
  int drop_head = 0;
  int drop_tail = 0;
  std::uint64_t seed = 1;
};

/// Graph signal for one sample: chunked rows, one per node.
Eigen::MatrixXd graph_signal(const Sample& s, const PipelineConfig& cfg);
Chunking chunking_for(const LabeledDataset& data, const PipelineConfig& cfg);

struct TrainedPair {
  ClassifierPair pair;
  TrainResult result[2];
};

/// Seeded, untrained model for class c.
DenoiserModel seeded_model(const PipelineConfig& cfg, const SignedGraph& topology, const Chunking& chunking, int c);

/// Trains Psi_0 and Psi_1 on split.train / split.val.
TrainedPair train_pair(const LabeledDataset& data, const Split& split, const SignedGraph& topology,
                       const PipelineConfig& cfg);

Evaluation evaluate_indices(const ClassifierPair& pair, const LabeledDataset& data,
                            const std::vector<std::size_t>& indices, const PipelineConfig& cfg);

}  // namespace balgraph
