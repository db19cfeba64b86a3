#ifndef ATL_AGMM_HPP
#define ATL_AGMM_HPP

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace atl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Width assigned per dimension to the very first component of a mixture.
inline constexpr double kInitialWidth = 1.0;
/// Lower bound applied to every component width.
inline constexpr double kWidthFloor = 1e-3;

/// One diagonal Gaussian of the mixture.
struct GaussianComponent {
  Vector center;
  Vector width;  // per-dimension standard deviation
  std::size_t support = 1;
  std::size_t born = 0;
  double matching_sum = 0.0;  // accumulated matching degrees since birth
};

/// min_j exp(-(x_j - mu_j)^2 / (2 sigma_j^2)).
double matching_degree(const GaussianComponent& comp, const Vector& x);

/// Right-hand side of the novelty test: exp(-u*chi / (4 - 2 exp(-u/2))).
double novelty_threshold(std::size_t input_dim, double chi);

/// Self-evolving diagonal Gaussian mixture estimating p(x) for one domain.
///
/// Components are added when a sample is both novel (no component matches it
/// well enough) and the winning component has no room left to grow; otherwise
/// the winner is tuned towards the sample. Components whose average matching
/// degree drops below the half-sigma rule are pruned once they have lived
/// longer than the exemption window.
class Agmm {
 public:
  Agmm(std::size_t input_dim, std::size_t exemption_window);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t exemption_window() const { return exemption_window_; }
  std::size_t samples_seen() const { return samples_seen_; }
  std::size_t size() const { return components_.size(); }
  bool empty() const { return components_.empty(); }
  std::span<const GaussianComponent> components() const { return components_; }

  /// Resets the mixture to a single component centred on `x`.
  void init_from_sample(const Vector& x, std::size_t sample_index);

  /// True when `x` lies outside the zone of influence of every component.
  bool compatibility_test(const Vector& x, double chi) const;

  /// Index of the component whose center is closest (Euclidean) to `x`.
  std::size_t find_winner(const Vector& x) const;

  /// Overlap-based control parameter in [0.1, 1] for the vigilance test.
  double overlap_rho(std::size_t winner) const;

  /// True when the winner has no space left, i.e. V_win >= rho * sum V_m.
  bool vigilance_test(std::size_t winner, double rho) const;

  void add_component(const Vector& x, std::size_t sample_index,
                     std::size_t winner);
  void tune_winner(std::size_t winner, const Vector& x);

  /// Accrues matching degrees for `x` and removes inactive components.
  /// `sample_count` is the number of samples seen including `x`.
  /// Returns the number of components removed.
  std::size_t update_activity_and_prune(const Vector& x,
                                        std::size_t sample_count);

  /// Posterior responsibilities of each component for `x`; sums to one.
  Vector mixing_coefficients(const Vector& x) const;

  /// Mixture density with exact diagonal-Gaussian normalisers and support
  /// priors.
  double density(const Vector& x) const;

  /// Single per-sample entry point: add or tune, then prune.
  void observe(const Vector& x, double chi);

  /// Approximate heap footprint in bytes.
  std::size_t state_bytes() const;

  nlohmann::json to_json() const;
  static Agmm from_json(const nlohmann::json& j);

  friend bool operator==(const Agmm& a, const Agmm& b);

 private:
  void check_input(const Vector& x) const;

  std::size_t input_dim_;
  std::size_t exemption_window_;
  std::size_t samples_seen_ = 0;
  std::vector<GaussianComponent> components_;
};

bool operator==(const GaussianComponent& a, const GaussianComponent& b);

}  // namespace atl

#endif  // ATL_AGMM_HPP
