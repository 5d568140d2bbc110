#include "balgraph/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <tuple>

#include "balgraph/parallel.hpp"

namespace balgraph {

double LrSchedule::at(int epoch) const {
  int period = t0;
  int pos = epoch;
  while (pos >= period) {
    pos -= period;
    period *= mult;
  }
  const double pi = 3.14159265358979323846;
  return floor + (initial - floor) * 0.5 * (1.0 + std::cos(pi * pos / period));
}

double SpsaConfig::c(int k) const { return perturb_scale / std::pow(static_cast<double>(k + 1), decay); }

void TrainConfig::validate() const {
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("train.noise_sigma must be nonnegative");
  if (!(rho >= 0.0)) throw InvalidArgument("train.rho must be nonnegative");
  if (!(lr.initial > 0.0 && lr.floor > 0.0 && lr.floor <= lr.initial)) {
    throw InvalidArgument("train.lr needs 0 < floor <= initial");
  }
  if (lr.t0 < 1 || lr.mult < 1) throw InvalidArgument("train.lr.t0 and train.lr.mult must be at least 1");
  if (epochs < 0) throw InvalidArgument("train.epochs must be nonnegative");
  if (patience < 1) throw InvalidArgument("train.patience must be at least 1");
  if (batch_size < 1) throw InvalidArgument("train.batch_size must be at least 1");
  if (!(spsa.perturb_scale > 0.0) || !(spsa.decay >= 0.0)) throw InvalidArgument("train.spsa values must be positive");
  if (init_sweeps < 0) throw InvalidArgument("train.init_sweeps must be nonnegative");
  if (polarity_sweeps < 0) throw InvalidArgument("train.polarity_sweeps must be nonnegative");
  if (!(init_keep_fraction > 0.0 && init_keep_fraction < 1.0)) {
    throw InvalidArgument("train.init_keep_fraction must lie in (0, 1)");
  }
}

Eigen::MatrixXd corrupt(const Eigen::MatrixXd& x, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) throw InvalidArgument("noise level must be nonnegative");
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd y = x;
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] += sigma * nd(rng);
  return y;
}

double default_noise_sigma(const std::vector<Eigen::MatrixXd>& signals) {
  double energy = 0.0;
  double count = 0.0;
  for (const auto& s : signals) {
    energy += s.squaredNorm();
    count += static_cast<double>(s.size());
  }
  if (count == 0.0 || energy == 0.0) throw InvalidArgument("cannot pick a noise level for empty signals");
  return std::sqrt(energy / count / 10.0);
}

double reconstruction_error(const DenoiserModel& model, const SignalPair& p) {
  return (p.x - denoise(model, p.y)).squaredNorm();
}

double loss_plain(const DenoiserModel& model, const std::vector<SignalPair>& pairs) {
  std::vector<double> err(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) { err[i] = reconstruction_error(model, pairs[i]); });
  return std::accumulate(err.begin(), err.end(), 0.0);
}

double loss_contrastive(const DenoiserModel& model, const std::vector<SignalPair>& own,
                        const std::vector<SignalPair>& other, double rho) {
  if (own.size() != other.size()) throw DimensionMismatch("own and other pair lists differ in length");
  std::vector<double> term(own.size());
  parallel_for(own.size(), [&](std::size_t i) {
    term[i] = reconstruction_error(model, own[i]) + std::max(rho - reconstruction_error(model, other[i]), 0.0);
  });
  return std::accumulate(term.begin(), term.end(), 0.0);
}

HardPairs mine_hard_pairs(const std::vector<Eigen::MatrixXd>& class0, const std::vector<Eigen::MatrixXd>& class1,
                          std::size_t count) {
  if (class0.empty() || class1.empty()) throw InvalidArgument("both classes need samples for pair mining");
  HardPairs out;
  const std::size_t cap = std::min(class0.size(), class1.size());
  if (count > cap) {
    out.truncated = true;
    count = cap;
  }
  std::vector<std::tuple<double, std::size_t, std::size_t>> all;
  all.reserve(class0.size() * class1.size());
  for (std::size_t i = 0; i < class0.size(); ++i)
    for (std::size_t j = 0; j < class1.size(); ++j) all.emplace_back((class0[i] - class1[j]).squaredNorm(), i, j);
  std::sort(all.begin(), all.end());
  std::vector<char> used0(class0.size(), 0), used1(class1.size(), 0);
  for (const auto& [d, i, j] : all) {
    if (out.pairs.size() == count) break;
    if (used0[i] || used1[j]) continue;
    used0[i] = used1[j] = 1;
    out.pairs.emplace_back(i, j);
  }
  return out;
}

namespace {

Eigen::VectorXd sigmoid_slope(const FilterSpec& spec, const Eigen::VectorXd& lambda) {
  Eigen::VectorXd d(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    const double s = sigmoid(spec.alpha * (spec.omega - lambda(k)));
    d(k) = spec.alpha * s * (1.0 - s);
  }
  return d;
}

void require_trainable(const FilterSpec& spec) {
  if (spec.mode != FilterMode::sigmoid || spec.backend != FilterBackend::exact) {
    throw InvalidArgument("cutoff gradients need sigmoid filters on the exact backend");
  }
}

}  // namespace

double filter_loss_omega_gradient(const EigenPair& eig, const Eigen::MatrixXd& y, const Eigen::MatrixXd& target,
                                  const FilterSpec& spec) {
  require_trainable(spec);
  const Eigen::MatrixXd c = eig.vectors.transpose() * y;
  const Eigen::VectorXd g = frequency_response(spec, eig.values);
  const Eigen::MatrixXd r = eig.vectors * (g.asDiagonal() * c) - target;
  const Eigen::VectorXd dg = sigmoid_slope(spec, eig.values);
  return 2.0 * (eig.vectors.transpose() * r).cwiseProduct(dg.asDiagonal() * c).sum();
}

namespace {

struct ErrorGrad {
  double err = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

ErrorGrad error_and_gradient(const DenoiserModel& model, const SignalPair& p) {
  for (const auto& b : model.blocks) require_trainable(b.filter);
  const auto trace = denoise_trace(model, p.y);
  const auto nb = static_cast<Eigen::Index>(trace.size());
  ErrorGrad out;
  out.grad.resize(nb);
  out.lo.resize(nb);
  out.hi.resize(nb);
  const Eigen::MatrixXd resid = trace.back().output - p.x;
  out.err = resid.squaredNorm();
  Eigen::MatrixXd a = 2.0 * resid;  // d err / d x_t, original domain
  for (Eigen::Index t = nb - 1; t >= 0; --t) {
    const auto& tr = trace[static_cast<std::size_t>(t)];
    const auto& spec = model.blocks[static_cast<std::size_t>(t)].filter;
    const Eigen::MatrixXd& v = tr.eig.vectors;
    const Eigen::MatrixXd c_in = v.transpose() * tr.graph.beta.apply(tr.input);
    const Eigen::MatrixXd c_a = v.transpose() * tr.graph.beta.apply(a);
    const Eigen::VectorXd dg = sigmoid_slope(spec, tr.eig.values);
    out.grad(t) = c_a.cwiseProduct(dg.asDiagonal() * c_in).sum();
    out.lo(t) = tr.eig.values.minCoeff();
    out.hi(t) = tr.eig.values.maxCoeff();
    const Eigen::VectorXd g = frequency_response(spec, tr.eig.values);
    a = tr.graph.beta.apply(v * (g.asDiagonal() * c_a));
  }
  return out;
}

}  // namespace

Eigen::VectorXd error_omega_gradient(const DenoiserModel& model, const SignalPair& p) {
  return error_and_gradient(model, p).grad;
}

namespace {

struct BatchGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

BatchGrad batch_gradient(const DenoiserModel& model, const std::vector<SignalPair>& own,
                         const std::vector<SignalPair>& other, double rho) {
  const bool hinge = rho > 0.0 && !other.empty();
  if (hinge && other.size() != own.size()) throw DimensionMismatch("own and other pair lists differ in length");
  std::vector<ErrorGrad> eo(own.size()), ex(hinge ? own.size() : 0);
  parallel_for(own.size(), [&](std::size_t i) {
    eo[i] = error_and_gradient(model, own[i]);
    if (hinge) ex[i] = error_and_gradient(model, other[i]);
  });
  const auto nb = static_cast<Eigen::Index>(model.blocks.size());
  BatchGrad out;
  out.grad = Eigen::VectorXd::Zero(nb);
  out.lo = Eigen::VectorXd::Constant(nb, std::numeric_limits<double>::infinity());
  out.hi = Eigen::VectorXd::Constant(nb, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < own.size(); ++i) {
    double term = eo[i].err;
    out.grad += eo[i].grad;
    out.lo = out.lo.cwiseMin(eo[i].lo);
    out.hi = out.hi.cwiseMax(eo[i].hi);
    if (hinge) {
      const double gap = rho - ex[i].err;
      if (gap > 0.0) {
        term += gap;
        out.grad -= ex[i].grad;
      }
      out.lo = out.lo.cwiseMin(ex[i].lo);
      out.hi = out.hi.cwiseMax(ex[i].hi);
    }
    out.loss += term;
  }
  const double n = static_cast<double>(std::max<std::size_t>(own.size(), 1));
  out.loss /= n;
  out.grad /= n;
  return out;
}

double batch_loss(const DenoiserModel& model, const std::vector<SignalPair>& own,
                  const std::vector<SignalPair>& other, double rho) {
  const bool hinge = rho > 0.0 && !other.empty();
  std::vector<double> term(own.size());
  parallel_for(own.size(), [&](std::size_t i) {
    term[i] = reconstruction_error(model, own[i]);
    if (hinge) term[i] += std::max(rho - reconstruction_error(model, other[i]), 0.0);
  });
  double total = 0.0;
  for (double t : term) total += t;
  return total / static_cast<double>(std::max<std::size_t>(own.size(), 1));
}

}  // namespace

LossAndGradient grad_spectral(const DenoiserModel& model, const std::vector<SignalPair>& own,
                              const std::vector<SignalPair>& other, double rho) {
  auto g = batch_gradient(model, own, other, rho);
  return {g.loss, std::move(g.grad)};
}

Eigen::VectorXd spsa_estimate(const std::function<double(const Eigen::VectorXd&)>& loss, const Eigen::VectorXd& theta,
                              double c, std::mt19937_64& rng) {
  if (!(c > 0.0)) throw InvalidArgument("SPSA perturbation must be positive");
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd delta(theta.size());
  for (Eigen::Index i = 0; i < delta.size(); ++i) delta(i) = coin(rng) ? 1.0 : -1.0;
  const double plus = loss(theta + c * delta);
  const double minus = loss(theta - c * delta);
  // Rademacher entries are their own inverses.
  return ((plus - minus) / (2.0 * c)) * delta;
}

Eigen::VectorXd grad_shape_spsa(const DenoiserModel& model, const std::vector<SignalPair>& own,
                                const std::vector<SignalPair>& other, double rho, double c, std::mt19937_64& rng) {
  DenoiserModel probe = model;
  auto loss = [&](const Eigen::VectorXd& theta) {
    set_shape_parameters(probe, theta);
    return batch_loss(probe, own, other, rho);
  };
  return spsa_estimate(loss, shape_parameters(model), c, rng);
}

DenoiserModel initialize_for_training(DenoiserModel model, const std::vector<Eigen::MatrixXd>& own_train,
                                      const std::vector<Eigen::MatrixXd>& noisy_train, double keep_fraction,
                                      int init_sweeps) {
  if (own_train.empty() || noisy_train.size() != own_train.size()) {
    throw InvalidArgument("initialization needs matching clean and noisy training signals");
  }
  const int n = model.n_nodes();
  if (model.scheme.kind == WeightSchemeKind::balanced_cht) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (const auto& x : own_train) cov += x * x.transpose();
    PolarityVector beta = init_polarity(cov, default_anchor(cov));
    if (init_sweeps > 0) {
      // Sweep to convergence on the first block's magnitudes.
      auto& first = model.blocks.front();
      calibrate_block_batch_norm(first, noisy_train);
      std::vector<SignedGraph> mags(own_train.size());
      parallel_for(own_train.size(), [&](std::size_t k) {
        const auto f = extract_features(first.features, noisy_train[k]);
        mags[k] = assign_weights(mahalanobis_distances(f, first.metric), PolarityVector::ones(n),
                                 WeightScheme::positive(), model.topology);
      });
      beta = update_polarities(mags, own_train, beta, init_sweeps).beta;
    }
    model.beta0 = beta;
    for (auto& b : model.blocks) b.beta = beta;
  }
  const int keep = std::clamp(static_cast<int>(std::lround(keep_fraction * n)), 1, n - 1);
  std::vector<Eigen::MatrixXd> current = noisy_train;
  const std::size_t probe_count = std::min<std::size_t>(current.size(), 64);
  for (std::size_t t = 0; t < model.blocks.size(); ++t) {
    auto& block = model.blocks[t];
    calibrate_block_batch_norm(block, current);
    std::vector<double> cut(probe_count);
    parallel_for(probe_count, [&](std::size_t k) {
      const auto g = bgl_block(block, model.topology, model.scheme, current[k], model.adapt_polarity);
      const auto eig = eigh(g.laplacian);
      cut[k] = 0.5 * (eig.values(keep - 1) + eig.values(keep));
    });
    if (block.filter.mode == FilterMode::sigmoid) {
      block.filter.omega = std::accumulate(cut.begin(), cut.end(), 0.0) / static_cast<double>(probe_count);
    }
    if (t + 1 < model.blocks.size()) {
      parallel_for(current.size(), [&](std::size_t k) { current[k] = run_block(model, t, current[k]); });
    }
  }
  return model;
}

namespace {

// One sweep per block over the training reconstructions, block by block so
// later blocks see inputs produced with the refined polarities.
// Returns true when any polarity changed.
bool refine_polarities(DenoiserModel& model, const std::vector<Eigen::MatrixXd>& inputs, int sweeps) {
  const int n = model.n_nodes();
  bool changed = false;
  std::vector<Eigen::MatrixXd> current = inputs;
  for (std::size_t t = 0; t < model.blocks.size(); ++t) {
    auto& block = model.blocks[t];
    std::vector<SignedGraph> mags(current.size());
    parallel_for(current.size(), [&](std::size_t k) {
      const auto f = extract_features(block.features, current[k]);
      mags[k] = assign_weights(mahalanobis_distances(f, block.metric), PolarityVector::ones(n),
                               WeightScheme::positive(), model.topology);
    });
    auto beta = update_polarities(mags, current, block.beta, sweeps).beta;
    changed = changed || !(beta == block.beta);
    block.beta = std::move(beta);
    if (t + 1 < model.blocks.size()) {
      parallel_for(current.size(), [&](std::size_t k) { current[k] = run_block(model, t, current[k]); });
    }
  }
  return changed;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  std::uint64_t out[1];
  seq.generate(reinterpret_cast<std::uint32_t*>(out), reinterpret_cast<std::uint32_t*>(out) + 2);
  return out[0];
}

}  // namespace

TrainResult train_denoiser(const DenoiserModel& init, const ClassData& own, const ClassData& other,
                           const TrainConfig& cfg) {
  cfg.validate();
  if (own.train.empty() || own.val.empty()) throw InvalidArgument("training needs nonempty train and val splits");
  std::mt19937_64 noise_rng(stream_seed(cfg.seed, 1));
  std::mt19937_64 order_rng(stream_seed(cfg.seed, 2));
  std::mt19937_64 spsa_rng(stream_seed(cfg.seed, 3));

  TrainResult result;
  const double sigma = cfg.noise_sigma > 0.0 ? cfg.noise_sigma : default_noise_sigma(own.train);
  result.noise_sigma = sigma;
  const double rho = cfg.contrastive ? cfg.rho : 0.0;

  auto noisy = [&](const std::vector<Eigen::MatrixXd>& xs) {
    std::vector<Eigen::MatrixXd> ys;
    ys.reserve(xs.size());
    for (const auto& x : xs) ys.push_back(corrupt(x, sigma, noise_rng));
    return ys;
  };
  const auto own_train_y = noisy(own.train);
  const auto own_val_y = noisy(own.val);
  const auto other_train_y = noisy(other.train);
  const auto other_val_y = noisy(other.val);

  // Own samples in order; the partner is the mined hard negative when one exists.
  auto make_pairs = [&](const std::vector<Eigen::MatrixXd>& xo, const std::vector<Eigen::MatrixXd>& yo,
                        const std::vector<Eigen::MatrixXd>& xx, const std::vector<Eigen::MatrixXd>& yx,
                        std::vector<SignalPair>& po, std::vector<SignalPair>& px) {
    if (xx.empty()) {
      for (std::size_t i = 0; i < xo.size(); ++i) po.push_back({yo[i], xo[i]});
      return;
    }
    const auto mined = mine_hard_pairs(xo, xx, xo.size());
    for (const auto& [i, j] : mined.pairs) {
      po.push_back({yo[i], xo[i]});
      px.push_back({yx[j], xx[j]});
    }
  };
  std::vector<SignalPair> train_own, train_other, val_own, val_other;
  make_pairs(own.train, own_train_y, other.train, other_train_y, train_own, train_other);
  make_pairs(own.val, own_val_y, other.val, other_val_y, val_own, val_other);

  DenoiserModel model = initialize_for_training(init, own.train, own_train_y, cfg.init_keep_fraction, cfg.init_sweeps);
  double best_val = batch_loss(model, val_own, val_other, rho);
  if (!std::isfinite(best_val)) throw DivergedLoss("validation loss is not finite at initialization", 0);
  result.model = model;

  const bool sweep = cfg.polarity_sweeps > 0 && model.scheme.kind == WeightSchemeKind::balanced_cht &&
                     model.chunking.chunks == 1;
  std::vector<std::size_t> order(train_own.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  int spsa_step = 0;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = cfg.lr.at(epoch - 1);
    if (sweep && refine_polarities(model, own_train_y, cfg.polarity_sweeps)) {
      calibrate_batch_norm(model, own_train_y);
    }
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
      std::vector<SignalPair> bo, bx;
      for (std::size_t k = b0; k < std::min(order.size(), b0 + bs); ++k) {
        bo.push_back(train_own[order[k]]);
        if (!train_other.empty()) bx.push_back(train_other[order[k]]);
      }
      const auto g = batch_gradient(model, bo, bx, rho);
      if (!std::isfinite(g.loss) || !g.grad.allFinite()) throw DivergedLoss("training loss diverged", epoch);
      Eigen::VectorXd shape_step;
      if (cfg.train_shape) shape_step = grad_shape_spsa(model, bo, bx, rho, cfg.spsa.c(spsa_step++), spsa_rng);
      Eigen::VectorXd omega = spectral_parameters(model) - lr * g.grad;
      omega = omega.cwiseMax(g.lo).cwiseMin(g.hi);
      // Blocking: a step that raises the batch loss is dropped, shape part first.
      DenoiserModel trial = model;
      set_spectral_parameters(trial, omega);
      if (cfg.train_shape) {
        if (!shape_step.allFinite()) throw DivergedLoss("shape gradient diverged", epoch);
        DenoiserModel shaped = trial;
        set_shape_parameters(shaped, shape_parameters(model) - lr * shape_step);
        if (batch_loss(shaped, bo, bx, rho) <= g.loss) {
          model = std::move(shaped);
          continue;
        }
      }
      if (batch_loss(trial, bo, bx, rho) <= g.loss) model = std::move(trial);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = batch_loss(model, train_own, train_other, rho);
    rec.val_loss = batch_loss(model, val_own, val_other, rho);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
      throw DivergedLoss("loss became non-finite", epoch);
    }
    result.log.push_back(rec);
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace balgraph
