#include "atl/ns_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace atl {

double adaptive_sigma(double v) { return 1.25 * std::exp(-v * v) + 0.75; }

void SigmaRuleStat::update(double value) {
  last_ = value;
  ++count_;
  const double delta = value - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (value - mean_);
  const double sd = stddev();
  if (!has_min_ || mean_ + sd < min_mean_ + min_std_) {
    min_mean_ = mean_;
    min_std_ = sd;
    has_min_ = true;
  }
}

double SigmaRuleStat::stddev() const {
  if (count_ == 0) return 0.0;
  return std::sqrt(std::max(0.0, m2_ / static_cast<double>(count_)));
}

bool SigmaRuleStat::exceeds_min(double factor) const {
  return mean_ + stddev() >= min_mean_ + factor * min_std_;
}

void SigmaRuleStat::reset_min() {
  min_mean_ = mean_;
  min_std_ = stddev();
  has_min_ = true;
}

bool NsTracker::update_and_check_grow(double bias_sq) {
  bias_.update(bias_sq);
  if (bias_.count() < 2) return false;
  if (!bias_.exceeds_min(chi())) return false;
  bias_.reset_min();
  return true;
}

bool NsTracker::update_and_check_prune(double var) {
  var_.update(var);
  if (var_.count() < 2) return false;
  if (!var_.exceeds_min(2.0 * gamma())) return false;
  var_.reset_min();
  return true;
}

double compute_bias_sq(const Vector& expected, const Vector& target) {
  if (expected.size() != target.size()) {
    throw std::invalid_argument("compute_bias_sq: length mismatch");
  }
  if (expected.size() == 0) return 0.0;
  return (expected - target).squaredNorm() / static_cast<double>(expected.size());
}

double compute_var(const ElasticNetwork& net,
                   std::span<const GaussianComponent> mixture,
                   const Vector& weights) {
  const auto& p = net.params();
  const Vector eh = net.expected_hidden(mixture, weights);
  const Vector ey = p.w_out.transpose() * eh + p.c;
  const Vector ey2 = p.w_out.transpose() * eh.cwiseAbs2() + p.c;
  return std::max(0.0, (ey2 - ey.cwiseAbs2()).mean());
}

double compute_softmax_var(const ElasticNetwork& net,
                           std::span<const GaussianComponent> mixture,
                           const Vector& weights) {
  const auto& p = net.params();
  const Vector eh = net.expected_hidden(mixture, weights);
  const Vector ey = softmax(p.w_out.transpose() * eh + p.c);
  const Vector ey2 = softmax(p.w_out.transpose() * eh.cwiseAbs2() + p.c);
  return std::max(0.0, (ey2 - ey.cwiseAbs2()).mean());
}

double compute_reconstruction_var(const ElasticNetwork& net,
                                  std::span<const GaussianComponent> mixture,
                                  const Vector& weights) {
  const auto& p = net.params();
  const Vector eh = net.expected_hidden(mixture, weights);
  const Vector ex = sigmoid(p.w_dec.transpose() * eh + p.d);
  const Vector ex2 = sigmoid(p.w_dec.transpose() * eh.cwiseAbs2() + p.d);
  return std::max(0.0, (ex2 - ex.cwiseAbs2()).mean());
}

std::vector<std::size_t> select_prune_victims(const Vector& contributions) {
  const auto r = contributions.size();
  std::vector<std::size_t> victims;
  if (r < 2) return victims;
  const double mean = contributions.mean();
  const double sd =
      std::sqrt((contributions.array() - mean).square().sum() / static_cast<double>(r - 1));
  const double threshold = mean - sd;
  for (Eigen::Index i = 0; i < r; ++i) {
    if (contributions[i] < threshold) victims.push_back(static_cast<std::size_t>(i));
  }
  if (victims.size() == static_cast<std::size_t>(r)) {
    Eigen::Index keep = 0;
    contributions.maxCoeff(&keep);
    victims.erase(std::find(victims.begin(), victims.end(), static_cast<std::size_t>(keep)));
  }
  return victims;
}

}  // namespace atl
