#include "balgraph/pipeline.hpp"

namespace balgraph {

Chunking chunking_for(const LabeledDataset& data, const PipelineConfig& cfg) {
  if (data.samples.empty()) throw InvalidArgument("dataset is empty");
  const auto& s = data.samples.front().signal;
  const int usable = static_cast<int>(s.cols()) - cfg.drop_head - cfg.drop_tail;
  const int length = cfg.chunk_length > 0 ? cfg.chunk_length : usable / std::max(cfg.chunks, 1);
  return Chunking{static_cast<int>(s.rows()), cfg.chunks, length};
}

Eigen::MatrixXd graph_signal(const Sample& s, const PipelineConfig& cfg) {
  const int usable = static_cast<int>(s.signal.cols()) - cfg.drop_head - cfg.drop_tail;
  const int length = cfg.chunk_length > 0 ? cfg.chunk_length : usable / std::max(cfg.chunks, 1);
  return chunk(s.signal, cfg.chunks, length, cfg.drop_head, cfg.drop_tail);
}

DenoiserModel seeded_model(const PipelineConfig& cfg, const SignedGraph& topology, const Chunking& chunking, int c) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(100 + c)};
  std::mt19937_64 rng(seq);
  return init_model(cfg.arch, topology, chunking, PolarityVector::ones(topology.n_nodes()), cfg.scheme, rng);
}

TrainedPair train_pair(const LabeledDataset& data, const Split& split, const SignedGraph& topology,
                       const PipelineConfig& cfg) {
  const Chunking chunking = chunking_for(data, cfg);
  if (topology.n_nodes() != chunking.nodes()) {
    throw InvalidArgument("topology has " + std::to_string(topology.n_nodes()) + " nodes, data needs " +
                          std::to_string(chunking.nodes()));
  }
  ClassData by_class[2];
  for (auto i : split.train) by_class[data.samples[i].label].train.push_back(graph_signal(data.samples[i], cfg));
  for (auto i : split.val) by_class[data.samples[i].label].val.push_back(graph_signal(data.samples[i], cfg));
  TrainedPair out;
  for (int c = 0; c < 2; ++c) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train.seed * 2 + static_cast<std::uint64_t>(c);
    out.result[c] = train_denoiser(seeded_model(cfg, topology, chunking, c), by_class[c], by_class[1 - c], tc);
  }
  out.pair.psi0 = out.result[0].model;
  out.pair.psi1 = out.result[1].model;
  return out;
}

Evaluation evaluate_indices(const ClassifierPair& pair, const LabeledDataset& data,
                            const std::vector<std::size_t>& indices, const PipelineConfig& cfg) {
  std::vector<Eigen::MatrixXd> signals;
  std::vector<int> labels;
  for (auto i : indices) {
    signals.push_back(graph_signal(data.samples[i], cfg));
    labels.push_back(data.samples[i].label);
  }
  return evaluate(pair, signals, labels);
}

}  // namespace balgraph
