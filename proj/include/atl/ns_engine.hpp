#ifndef ATL_NS_ENGINE_HPP
#define ATL_NS_ENGINE_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "atl/agmm.hpp"
#include "atl/elastic_net.hpp"

namespace atl {

/// Adaptive sigma-rule confidence 1.25 exp(-v^2) + 0.75, always in [0.75, 2].
double adaptive_sigma(double v);

/// Running mean and population standard deviation (Welford) plus a
/// resettable minimum tracker of the (mean, std) pair.
class SigmaRuleStat {
 public:
  void update(double value);

  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  double stddev() const;
  double min_mean() const { return min_mean_; }
  double min_std() const { return min_std_; }
  double last() const { return last_; }

  /// mean + std >= min_mean + factor * min_std, evaluated after update().
  bool exceeds_min(double factor) const;
  void reset_min();

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double min_mean_ = 0.0;
  double min_std_ = 0.0;
  bool has_min_ = false;
  double last_ = 0.0;
};

/// Network-significance statistics for one learning phase.
class NsTracker {
 public:
  /// Feeds one Bias^2 value; true when the network should grow. Resets the
  /// bias minimum trackers when it fires.
  bool update_and_check_grow(double bias_sq);
  /// Feeds one Var value; true when the network should be pruned. Resets the
  /// variance minimum trackers when it fires.
  bool update_and_check_prune(double var);

  /// Confidence used by the growing rule and by the mixture novelty test.
  double chi() const { return adaptive_sigma(bias_.last()); }
  double gamma() const { return adaptive_sigma(var_.last()); }

  const SigmaRuleStat& bias() const { return bias_; }
  const SigmaRuleStat& variance() const { return var_; }

 private:
  SigmaRuleStat bias_;
  SigmaRuleStat var_;
};

/// Mean squared difference between an expected output and its target.
double compute_bias_sq(const Vector& expected, const Vector& target);

/// Classifier variance E[y^2] - E[y]^2 with E[y^2] = (E[h] .* E[h]) W_out + c,
/// averaged over outputs and clamped at zero.
double compute_var(const ElasticNetwork& net,
                   std::span<const GaussianComponent> mixture,
                   const Vector& weights);

/// Same decomposition taken through the softmax head:
/// E[y] = softmax(E[h] W_out + c), E[y^2] = softmax((E[h] .* E[h]) W_out + c).
double compute_softmax_var(const ElasticNetwork& net,
                           std::span<const GaussianComponent> mixture,
                           const Vector& weights);

/// Decoder analogue: E[x^2] = s((E[h] .* E[h]) W_dec + d).
double compute_reconstruction_var(const ElasticNetwork& net,
                                  std::span<const GaussianComponent> mixture,
                                  const Vector& weights);

/// Units whose contribution falls strictly below mean - std (sample std).
/// Never returns every unit.
std::vector<std::size_t> select_prune_victims(const Vector& contributions);

}  // namespace atl

#endif  // ATL_NS_ENGINE_HPP
