#include "atl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace atl {

namespace {

template <typename T>
void momentum_update(T& w, const T& g, T& v, double lr, double momentum) {
  v = momentum * v - lr * g;
  w += v;
}

Vector one_hot(std::size_t label, std::size_t classes) {
  Vector y = Vector::Zero(static_cast<Eigen::Index>(classes));
  y[static_cast<Eigen::Index>(label)] = 1.0;
  return y;
}

NetworkParams zeros_like(const ElasticNetwork& net) {
  return NetworkParams::zeros(net.input_dim(), net.hidden_count(), net.class_count());
}

// Density model driving the expectations of one domain.
struct DensityView {
  std::span<const GaussianComponent> mixture;
  Vector weights;
  std::size_t grow_count;
};

DensityView density_view(const Agmm& agmm, const RunningGaussian& gauss,
                         const Vector& x, const TrainerConfig& config) {
  if (config.disable_agmm_ns || agmm.empty()) {
    return {std::span<const GaussianComponent>(&gauss.component(), 1),
            Vector::Ones(1), 1};
  }
  return {agmm.components(), agmm.mixing_coefficients(x), agmm.size()};
}

void apply_grow(AtlState& s, std::size_t count) {
  s.net.grow(count, s.rng);
  append_zero_units(s.velocity, count);
  ++s.grow_events;
}

void apply_prune(AtlState& s, std::span<const GaussianComponent> mixture) {
  const auto victims = select_prune_victims(s.net.hidden_contributions(mixture));
  if (victims.empty()) return;
  s.net.prune(victims);
  drop_hidden_units(s.velocity, victims);  // victims are sorted and unique
  ++s.prune_events;
}

void step(AtlState& s, const NetworkParams& grads, const TrainerConfig& config,
          unsigned groups) {
  if (!sgd_step(s.net.params(), grads, s.velocity, config.learning_rate,
                config.momentum, groups)) {
    ++s.skipped_steps;
  }
}

}  // namespace

void TrainerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (epochs_per_batch < 1) throw std::invalid_argument("epochs_per_batch must be >= 1");
  if (!(noise_fraction >= 0.0 && noise_fraction < 1.0)) {
    throw std::invalid_argument("noise_fraction must lie in [0, 1)");
  }
}

bool sgd_step(NetworkParams& params, const NetworkParams& grads,
              NetworkParams& velocity, double lr, double momentum,
              unsigned groups) {
  const bool enc = groups & kEncoder;
  const bool head = groups & kHead;
  const bool dec = groups & kDecoder;
  if ((enc && !(grads.w_in.allFinite() && grads.b.allFinite())) ||
      (head && !(grads.w_out.allFinite() && grads.c.allFinite())) ||
      (dec && !(grads.w_dec.allFinite() && grads.d.allFinite()))) {
    return false;
  }
  if (enc) {
    momentum_update(params.w_in, grads.w_in, velocity.w_in, lr, momentum);
    momentum_update(params.b, grads.b, velocity.b, lr, momentum);
  }
  if (head) {
    momentum_update(params.w_out, grads.w_out, velocity.w_out, lr, momentum);
    momentum_update(params.c, grads.c, velocity.c, lr, momentum);
  }
  if (dec) {
    momentum_update(params.w_dec, grads.w_dec, velocity.w_dec, lr, momentum);
    momentum_update(params.d, grads.d, velocity.d, lr, momentum);
  }
  return true;
}

double cross_entropy_gradient(const ElasticNetwork& net, const Vector& x,
                              std::size_t label, NetworkParams& grads) {
  const auto& p = net.params();
  grads = zeros_like(net);
  const ClassifyPass pass = net.forward_classify(x);
  const auto y = static_cast<Eigen::Index>(label);
  Vector delta = pass.y_hat;
  delta[y] -= 1.0;
  grads.w_out = pass.hidden * delta.transpose();
  grads.c = delta;
  const Vector dz =
      (p.w_out * delta).cwiseProduct(pass.hidden.cwiseProduct(
          (1.0 - pass.hidden.array()).matrix()));
  grads.w_in = x * dz.transpose();
  grads.b = dz;
  // log-softmax directly to keep the loss finite for saturated outputs
  const double shift = pass.logits.maxCoeff();
  const double lse = shift + std::log((pass.logits.array() - shift).exp().sum());
  return lse - pass.logits[y];
}

double reconstruction_gradient(const ElasticNetwork& net, const Vector& x_tilde,
                               const Vector& x_clean, NetworkParams& grads) {
  const auto& p = net.params();
  grads = zeros_like(net);
  const ReconstructPass pass = net.forward_reconstruct(x_tilde);
  const Vector err = pass.x_hat - x_clean;
  const Vector dpre =
      (2.0 * err).cwiseProduct(pass.x_hat.cwiseProduct((1.0 - pass.x_hat.array()).matrix()));
  grads.w_dec = pass.hidden * dpre.transpose();
  grads.d = dpre;
  const Vector dz = (p.w_dec * dpre).cwiseProduct(
      pass.hidden.cwiseProduct((1.0 - pass.hidden.array()).matrix()));
  grads.w_in = x_tilde * dz.transpose();
  grads.b = dz;
  return err.squaredNorm();
}

namespace {

Matrix batch_hidden(const ElasticNetwork& net, const Matrix& batch) {
  const auto& p = net.params();
  Matrix z = batch * p.w_in;
  z.rowwise() += p.b.transpose();
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

Vector floor_and_normalise(Vector pi) {
  pi /= pi.sum();
  if ((pi.array() < kProbFloor).any()) {
    pi = pi.cwiseMax(kProbFloor);
    pi /= pi.sum();
  }
  return pi;
}

}  // namespace

Vector activation_distribution(const ElasticNetwork& net, const Matrix& batch) {
  return floor_and_normalise(batch_hidden(net, batch).colwise().mean().transpose());
}

double symmetric_kl(const Vector& p, const Vector& q) {
  return ((p - q).array() * (p.array().log() - q.array().log())).sum();
}

double kl_gradient(const ElasticNetwork& net, const Matrix& source,
                   const Matrix& target, NetworkParams& grads) {
  grads = zeros_like(net);
  const Matrix hs = batch_hidden(net, source);
  const Matrix ht = batch_hidden(net, target);
  const Vector pi_s = hs.colwise().mean().transpose();
  const Vector pi_t = ht.colwise().mean().transpose();
  const Vector ps = floor_and_normalise(pi_s);
  const Vector pt = floor_and_normalise(pi_t);

  const Eigen::ArrayXd log_ratio = ps.array().log() - pt.array().log();
  const Vector g_ps = (log_ratio + 1.0 - pt.array() / ps.array()).matrix();
  const Vector g_pt = (-log_ratio + 1.0 - ps.array() / pt.array()).matrix();

  // Through the normalisation onto the simplex (floor treated as inactive).
  auto through_norm = [](const Vector& g, const Vector& prob, double total) {
    return Vector((g.array() - g.dot(prob)) / total);
  };
  const Vector g_pi_s = through_norm(g_ps, ps, pi_s.sum());
  const Vector g_pi_t = through_norm(g_pt, pt, pi_t.sum());

  auto accumulate = [&grads](const Matrix& x, const Matrix& h, const Vector& g_pi) {
    Matrix g = h.cwiseProduct((1.0 - h.array()).matrix());
    g = g.array().rowwise() * (g_pi.transpose().array() / static_cast<double>(x.rows()));
    grads.w_in += x.transpose() * g;
    grads.b += g.colwise().sum().transpose();
  };
  accumulate(source, hs, g_pi_s);
  accumulate(target, ht, g_pi_t);
  return symmetric_kl(ps, pt);
}

RunningGaussian::RunningGaussian(std::size_t input_dim)
    : m2_(Vector::Zero(static_cast<Eigen::Index>(input_dim))) {
  comp_.center = Vector::Zero(static_cast<Eigen::Index>(input_dim));
  comp_.width = Vector::Constant(static_cast<Eigen::Index>(input_dim), kInitialWidth);
  comp_.support = 1;
}

void RunningGaussian::update(const Vector& x) {
  ++count_;
  const Vector delta = x - comp_.center;
  comp_.center += delta / static_cast<double>(count_);
  m2_ += delta.cwiseProduct(x - comp_.center);
  comp_.support = count_;
  if (count_ >= 2) {
    comp_.width = (m2_ / static_cast<double>(count_)).cwiseSqrt().cwiseMax(kWidthFloor);
  }
}

AtlState AtlState::create(std::size_t input_dim, std::size_t classes,
                          std::size_t exemption_window, const TrainerConfig& config) {
  config.validate();
  Rng rng(config.seed);
  ElasticNetwork net(input_dim, classes, 1, rng);
  NetworkParams velocity = NetworkParams::zeros(input_dim, 1, classes);
  return AtlState{std::move(net),
                  Agmm(input_dim, exemption_window),
                  Agmm(input_dim, exemption_window),
                  RunningGaussian(input_dim),
                  RunningGaussian(input_dim),
                  NsTracker{},
                  NsTracker{},
                  std::move(velocity),
                  std::move(rng)};
}

std::size_t AtlState::state_bytes() const {
  return sizeof(*this) + net.state_bytes() + velocity.scalar_count() * sizeof(double) +
         agmm_source.state_bytes() + agmm_target.state_bytes() +
         4 * static_cast<std::size_t>(net.input_dim()) * sizeof(double);
}

std::size_t AtlState::source_components(const TrainerConfig& config) const {
  return config.disable_agmm_ns ? 1 : agmm_source.size();
}

std::size_t AtlState::target_components(const TrainerConfig& config) const {
  return config.disable_agmm_ns ? 1 : agmm_target.size();
}

void discriminative_phase(AtlState& state, LabelledBatch source,
                          const TrainerConfig& config) {
  const Matrix& xs = source.features;
  if (xs.rows() == 0) return;
  if (static_cast<std::size_t>(xs.rows()) != source.labels.size()) {
    throw std::invalid_argument("discriminative_phase: label count mismatch");
  }
  const std::size_t classes = state.net.class_count();
  NetworkParams grads;
  for (Eigen::Index n = 0; n < xs.rows(); ++n) {
    const Vector x = xs.row(n).transpose();
    const std::size_t label = source.labels[static_cast<std::size_t>(n)];
    if (label >= classes) {
      throw std::invalid_argument("discriminative_phase: label " + std::to_string(label) +
                                  " outside class range");
    }
    cross_entropy_gradient(state.net, x, label, grads);
    step(state, grads, config, kEncoder | kHead);

    if (config.disable_structural) continue;
    const DensityView view =
        density_view(state.agmm_source, state.gauss_source, x, config);
    const Vector ey = softmax(state.net.expected_output(view.mixture, view.weights));
    const double bias_sq = compute_bias_sq(ey, one_hot(label, classes));
    if (state.ns_disc.update_and_check_grow(bias_sq)) {
      apply_grow(state, view.grow_count);
      continue;
    }
    const double var = compute_softmax_var(state.net, view.mixture, view.weights);
    if (state.ns_disc.update_and_check_prune(var)) apply_prune(state, view.mixture);
  }
}

void generative_phase(AtlState& state, UnlabelledBatch target,
                      const TrainerConfig& config) {
  const Matrix& xt = target.features;
  NetworkParams grads;
  for (Eigen::Index n = 0; n < xt.rows(); ++n) {
    const Vector x = xt.row(n).transpose();
    const Vector x_tilde = corrupt(x, config.noise_fraction, state.rng);
    reconstruction_gradient(state.net, x_tilde, x, grads);
    step(state, grads, config, kEncoder | kDecoder);

    if (config.disable_structural) continue;
    const DensityView view =
        density_view(state.agmm_target, state.gauss_target, x, config);
    const Vector ex = state.net.expected_reconstruction(view.mixture, view.weights);
    const double bias_sq = compute_bias_sq(ex, x);
    if (state.ns_gen.update_and_check_grow(bias_sq)) {
      apply_grow(state, view.grow_count);
      continue;
    }
    const double var = compute_reconstruction_var(state.net, view.mixture, view.weights);
    if (state.ns_gen.update_and_check_prune(var)) apply_prune(state, view.mixture);
  }
}

double kl_phase(AtlState& state, LabelledBatch source, UnlabelledBatch target,
                const TrainerConfig& config) {
  if (config.disable_kl || source.features.rows() == 0 || target.features.rows() == 0) {
    return 0.0;
  }
  NetworkParams grads;
  const double loss = kl_gradient(state.net, source.features, target.features, grads);
  step(state, grads, config, kEncoder);
  return loss;
}

ChunkResult process_chunk(AtlState& state, LabelledBatch source,
                          UnlabelledBatch target, const TrainerConfig& config,
                          bool evaluate) {
  const auto u = static_cast<Eigen::Index>(state.net.input_dim());
  if ((source.features.rows() > 0 && source.features.cols() != u) ||
      (target.features.rows() > 0 && target.features.cols() != u)) {
    throw std::invalid_argument("process_chunk: feature dimension does not match the network");
  }
  ChunkResult result;
  if (evaluate) {
    result.source_predictions.reserve(static_cast<std::size_t>(source.features.rows()));
    std::size_t correct = 0;
    for (Eigen::Index n = 0; n < source.features.rows(); ++n) {
      const std::size_t pred = state.net.predict(source.features.row(n).transpose());
      result.source_predictions.push_back(pred);
      if (pred == source.labels[static_cast<std::size_t>(n)]) ++correct;
    }
    if (!result.source_predictions.empty()) {
      result.source_accuracy =
          static_cast<double>(correct) / static_cast<double>(result.source_predictions.size());
    }
    result.target_predictions.reserve(static_cast<std::size_t>(target.features.rows()));
    for (Eigen::Index n = 0; n < target.features.rows(); ++n) {
      result.target_predictions.push_back(state.net.predict(target.features.row(n).transpose()));
    }
  }

  const auto start = std::chrono::steady_clock::now();
  if (config.disable_agmm_ns) {
    for (Eigen::Index n = 0; n < source.features.rows(); ++n) {
      state.gauss_source.update(source.features.row(n).transpose());
    }
    for (Eigen::Index n = 0; n < target.features.rows(); ++n) {
      state.gauss_target.update(target.features.row(n).transpose());
    }
  } else {
    for (Eigen::Index n = 0; n < source.features.rows(); ++n) {
      state.agmm_source.observe(source.features.row(n).transpose(), state.ns_disc.chi());
    }
    for (Eigen::Index n = 0; n < target.features.rows(); ++n) {
      state.agmm_target.observe(target.features.row(n).transpose(), state.ns_gen.chi());
    }
  }
  for (std::size_t epoch = 0; epoch < config.epochs_per_batch; ++epoch) {
    generative_phase(state, target, config);
    discriminative_phase(state, source, config);
    kl_phase(state, source, target, config);
  }
  result.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ++state.chunk_counter;
  result.hidden_nodes = state.net.hidden_count();
  result.source_components = state.source_components(config);
  result.target_components = state.target_components(config);
  return result;
}

}  // namespace atl
