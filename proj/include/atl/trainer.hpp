#ifndef ATL_TRAINER_HPP
#define ATL_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "atl/agmm.hpp"
#include "atl/elastic_net.hpp"
#include "atl/ns_engine.hpp"

namespace atl {

struct TrainerConfig {
  double learning_rate = 0.01;
  double momentum = 0.95;
  std::size_t epochs_per_batch = 1;
  double noise_fraction = 0.1;
  bool disable_kl = false;        // ablation A
  bool disable_agmm_ns = false;   // ablation B
  bool disable_structural = false;  // ablation C
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// Parameter groups touched by an SGD step.
enum ParamGroup : unsigned {
  kEncoder = 1u << 0,  // w_in, b
  kHead = 1u << 1,     // w_out, c
  kDecoder = 1u << 2,  // w_dec, d
  kAllGroups = kEncoder | kHead | kDecoder,
};

/// Classical momentum: v <- momentum * v - lr * g; w <- w + v, applied to the
/// selected groups only. Returns false (and changes nothing) when any selected
/// gradient is non-finite.
bool sgd_step(NetworkParams& params, const NetworkParams& grads,
              NetworkParams& velocity, double lr, double momentum,
              unsigned groups);

/// Labelled source samples, one row per sample.
struct LabelledBatch {
  const Matrix& features;
  std::span<const std::size_t> labels;
};

/// Target samples. Carries no labels by construction.
struct UnlabelledBatch {
  const Matrix& features;
};

// Per-sample losses with their analytic gradients (written into `grads`,
// which is reshaped to match the network).
double cross_entropy_gradient(const ElasticNetwork& net, const Vector& x,
                              std::size_t label, NetworkParams& grads);
double reconstruction_gradient(const ElasticNetwork& net, const Vector& x_tilde,
                               const Vector& x_clean, NetworkParams& grads);

/// Probability floor applied to normalised mean activations.
inline constexpr double kProbFloor = 1e-8;

/// Batch-mean hidden activation normalised onto the simplex, with floor.
Vector activation_distribution(const ElasticNetwork& net, const Matrix& batch);

/// KL(p || q) + KL(q || p).
double symmetric_kl(const Vector& p, const Vector& q);

/// Symmetric KL between source and target hidden distributions and its
/// gradient with respect to the encoder (w_in, b) only.
double kl_gradient(const ElasticNetwork& net, const Matrix& source,
                   const Matrix& target, NetworkParams& grads);

/// Incrementally updated diagonal Gaussian used when the mixture is disabled.
class RunningGaussian {
 public:
  explicit RunningGaussian(std::size_t input_dim);
  void update(const Vector& x);
  const GaussianComponent& component() const { return comp_; }
  std::size_t count() const { return count_; }

 private:
  std::size_t count_ = 0;
  Vector m2_;
  GaussianComponent comp_;
};

struct AtlState {
  ElasticNetwork net;
  Agmm agmm_source;
  Agmm agmm_target;
  RunningGaussian gauss_source;
  RunningGaussian gauss_target;
  NsTracker ns_disc;
  NsTracker ns_gen;
  NetworkParams velocity;
  Rng rng;
  std::size_t chunk_counter = 0;
  std::size_t skipped_steps = 0;
  std::size_t grow_events = 0;
  std::size_t prune_events = 0;

  /// Fresh state: one hidden unit, empty mixtures, zero velocity.
  static AtlState create(std::size_t input_dim, std::size_t classes,
                         std::size_t exemption_window, const TrainerConfig& config);

  /// Approximate heap footprint of the learner in bytes.
  std::size_t state_bytes() const;
  /// Number of mixture components describing each domain.
  std::size_t source_components(const TrainerConfig& config) const;
  std::size_t target_components(const TrainerConfig& config) const;
};

void discriminative_phase(AtlState& state, LabelledBatch source,
                          const TrainerConfig& config);
void generative_phase(AtlState& state, UnlabelledBatch target,
                      const TrainerConfig& config);
/// One encoder step on the symmetric KL loss. Returns the loss before the step.
double kl_phase(AtlState& state, LabelledBatch source, UnlabelledBatch target,
                const TrainerConfig& config);

struct ChunkResult {
  std::vector<std::size_t> target_predictions;
  std::vector<std::size_t> source_predictions;
  double source_accuracy = 0.0;
  std::size_t hidden_nodes = 0;
  std::size_t source_components = 0;
  std::size_t target_components = 0;
  double train_seconds = 0.0;
};

/// Test-then-train on one chunk. With `evaluate == false` (warm-up) the
/// prediction step is skipped.
ChunkResult process_chunk(AtlState& state, LabelledBatch source,
                          UnlabelledBatch target, const TrainerConfig& config,
                          bool evaluate = true);

}  // namespace atl

#endif  // ATL_TRAINER_HPP
