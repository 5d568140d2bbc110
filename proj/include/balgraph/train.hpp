#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "balgraph/unrolled.hpp"

namespace balgraph {

/// Cosine annealing with warm restarts.
struct LrSchedule {
  double initial = 1e-3;
  double floor = 1e-5;
  int t0 = 5;
  int mult = 1;
  double at(int epoch) const;
};

struct SpsaConfig {
  double perturb_scale = 0.01;
  double decay = 0.101;
  /// c_k = perturb_scale / (k + 1)^decay for the k-th estimate.
  double c(int k) const;
};

struct TrainConfig {
  double noise_sigma = 0.0;  // 0 selects a 10 dB level from the training signals
  double rho = 1.0;
  bool contrastive = true;
  LrSchedule lr;
  int epochs = 100;
  int patience = 10;
  int batch_size = 8;
  SpsaConfig spsa;
  bool train_shape = true;
  int init_sweeps = 20;             // to convergence, before training
  int polarity_sweeps = 1;          // per block per epoch
  double init_keep_fraction = 0.15;  // initial cutoff sits in this spectral gap
  std::uint64_t seed = 1;

  void validate() const;
};

/// y = x + n, n ~ N(0, sigma^2 I).
Eigen::MatrixXd corrupt(const Eigen::MatrixXd& x, double sigma, std::mt19937_64& rng);

struct SignalPair {
  Eigen::MatrixXd y;  // noisy
  Eigen::MatrixXd x;  // target
};

double reconstruction_error(const DenoiserModel& model, const SignalPair& p);

/// sum_i ||x_i - Psi(y_i)||^2.
double loss_plain(const DenoiserModel& model, const std::vector<SignalPair>& pairs);

/// sum_i ||x_i - Psi(y_i)||^2 + max(rho - ||x'_i - Psi(y'_i)||^2, 0) with
/// primed pairs from the other class.
double loss_contrastive(const DenoiserModel& model, const std::vector<SignalPair>& own,
                        const std::vector<SignalPair>& other, double rho);

struct HardPairs {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (index in class 0, index in class 1)
  bool truncated = false;
};

/// Greedy matching: repeatedly takes the closest unmatched cross-class pair
/// in Frobenius distance. Ties go to the smaller (i, j).
HardPairs mine_hard_pairs(const std::vector<Eigen::MatrixXd>& class0,
                          const std::vector<Eigen::MatrixXd>& class1, std::size_t count);

/// d/d omega of ||target - V g(Lambda; omega) V^T y||^2 for a fixed graph.
double filter_loss_omega_gradient(const EigenPair& eig, const Eigen::MatrixXd& y,
                                  const Eigen::MatrixXd& target, const FilterSpec& spec);

/// Gradient of ||x - Psi(y)||^2 with respect to every block's omega, with
/// each block's eigenpairs held fixed. Requires sigmoid mode and the exact
/// backend in every block.
Eigen::VectorXd error_omega_gradient(const DenoiserModel& model, const SignalPair& p);

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Mean contrastive loss over the batch and its omega gradient.
LossAndGradient grad_spectral(const DenoiserModel& model, const std::vector<SignalPair>& own,
                              const std::vector<SignalPair>& other, double rho);

/// One simultaneous-perturbation estimate with a Rademacher direction.
Eigen::VectorXd spsa_estimate(const std::function<double(const Eigen::VectorXd&)>& loss,
                              const Eigen::VectorXd& theta, double c, std::mt19937_64& rng);

/// SPSA estimate of the batch loss gradient over the model's shape parameters.
Eigen::VectorXd grad_shape_spsa(const DenoiserModel& model, const std::vector<SignalPair>& own,
                                const std::vector<SignalPair>& other, double rho, double c,
                                std::mt19937_64& rng);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  DenoiserModel model;
  std::vector<EpochRecord> log;
  int best_epoch = 0;  // 0 means the initialization
  bool stopped_early = false;
  double noise_sigma = 0.0;
};

struct ClassData {
  std::vector<Eigen::MatrixXd> train;
  std::vector<Eigen::MatrixXd> val;
};

/// Initial polarities, cutoffs and batch-norm statistics from own-class
/// training signals.
DenoiserModel initialize_for_training(DenoiserModel model, const std::vector<Eigen::MatrixXd>& own_train,
                                      const std::vector<Eigen::MatrixXd>& noisy_train, double keep_fraction,
                                      int init_sweeps = 0);

/// Trains the denoiser for one class. `own` holds that class's signals and
/// `other` the other class's; both are used as clean targets and corrupted
/// once with seeded noise.
TrainResult train_denoiser(const DenoiserModel& init, const ClassData& own, const ClassData& other,
                           const TrainConfig& config);

/// Noise level for roughly 10 dB SNR on the given signals.
double default_noise_sigma(const std::vector<Eigen::MatrixXd>& signals);

}  // namespace balgraph
