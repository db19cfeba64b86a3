#ifndef ATL_ELASTIC_NET_HPP
#define ATL_ELASTIC_NET_HPP

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "atl/agmm.hpp"

namespace atl {

using Rng = std::mt19937_64;

double sigmoid(double z);
Vector sigmoid(const Vector& z);
Vector softmax(const Vector& z);

/// Every trainable tensor of the network. Also used for gradients and
/// momentum buffers, which share the exact same shapes.
struct NetworkParams {
  Matrix w_in;   // u x R, shared encoder
  Vector b;      // R
  Matrix w_out;  // R x m, softmax head
  Vector c;      // m
  Matrix w_dec;  // R x u, untied decoder
  Vector d;      // u

  static NetworkParams zeros(std::size_t input_dim, std::size_t hidden,
                             std::size_t classes);
  bool same_shape(const NetworkParams& other) const;
  bool all_finite() const;
  std::size_t scalar_count() const;
};

struct ClassifyPass {
  Vector hidden;
  Vector logits;
  Vector y_hat;
};

struct ReconstructPass {
  Vector hidden;
  Vector x_hat;
};

/// Masking noise: zeroes round(noise_fraction * u) distinct coordinates.
Vector corrupt(const Vector& x, double noise_fraction, Rng& rng);

/// Single hidden layer network whose encoder is shared between a softmax
/// classifier and a denoising decoder. The hidden width changes online.
class ElasticNetwork {
 public:
  /// Xavier-initialised network with `hidden` units; output and decoder
  /// biases start at zero.
  ElasticNetwork(std::size_t input_dim, std::size_t classes, std::size_t hidden,
                 Rng& rng);
  explicit ElasticNetwork(NetworkParams params);

  std::size_t input_dim() const { return static_cast<std::size_t>(p_.w_in.rows()); }
  std::size_t hidden_count() const { return static_cast<std::size_t>(p_.w_in.cols()); }
  std::size_t class_count() const { return static_cast<std::size_t>(p_.w_out.cols()); }

  const NetworkParams& params() const { return p_; }
  NetworkParams& params() { return p_; }

  bool shapes_consistent() const;

  Vector hidden(const Vector& x) const;
  ClassifyPass forward_classify(const Vector& x) const;
  ReconstructPass forward_reconstruct(const Vector& x_tilde) const;
  std::size_t predict(const Vector& x) const;

  /// Appends `count` Xavier-initialised units; existing weights are untouched.
  void grow(std::size_t count, Rng& rng);

  /// Removes the given hidden units. Throws without mutating if the set would
  /// remove every unit or holds an out-of-range index.
  void prune(const std::vector<std::size_t>& indices);

  // Expectations under a diagonal Gaussian mixture, using the probit
  // approximation of the sigmoid.
  Vector expected_hidden(std::span<const GaussianComponent> mixture,
                         const Vector& weights) const;
  Vector expected_output(std::span<const GaussianComponent> mixture,
                         const Vector& weights) const;
  Vector expected_reconstruction(std::span<const GaussianComponent> mixture,
                                 const Vector& weights) const;
  /// Unweighted sum over components of the expected activation of each unit.
  Vector hidden_contributions(std::span<const GaussianComponent> mixture) const;

  std::size_t state_bytes() const;

 private:
  Vector shifted_activation(const GaussianComponent& comp) const;

  NetworkParams p_;
};

/// Probit-shifted center mu_j / sqrt(1 + pi sigma_j^2 / 8).
Vector probit_shift(const GaussianComponent& comp);

/// Removes entries/rows/columns belonging to pruned hidden units from any
/// tensor bundle shaped like the network (used for momentum buffers).
void drop_hidden_units(NetworkParams& p, const std::vector<std::size_t>& sorted_unique);
/// Appends `count` zero hidden units to a tensor bundle.
void append_zero_units(NetworkParams& p, std::size_t count);

}  // namespace atl

#endif  // ATL_ELASTIC_NET_HPP
