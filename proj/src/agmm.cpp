#include "atl/agmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace atl {

namespace {

double log_volume(const GaussianComponent& c) {
  // log prod_j sigma_j^2
  return 2.0 * c.width.array().log().sum();
}

// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

enum class Overlap { kNone, kPartial, kFull };

// Compares the mu +- sigma boxes of `other` against `winner`.
Overlap classify_overlap(const GaussianComponent& winner,
                         const GaussianComponent& other) {
  bool contained = true;
  for (Eigen::Index j = 0; j < winner.center.size(); ++j) {
    const double wlo = winner.center[j] - winner.width[j];
    const double whi = winner.center[j] + winner.width[j];
    const double olo = other.center[j] - other.width[j];
    const double ohi = other.center[j] + other.width[j];
    if (ohi < wlo || olo > whi) return Overlap::kNone;
    if (olo < wlo || ohi > whi) contained = false;
  }
  return contained ? Overlap::kFull : Overlap::kPartial;
}

double normalized_gap(const Vector& a, const Vector& b) {
  const double denom = (a + b).norm();
  if (denom == 0.0) return 0.0;
  return (a - b).norm() / denom;
}

}  // namespace

double matching_degree(const GaussianComponent& comp, const Vector& x) {
  const Vector z = (x - comp.center).cwiseQuotient(comp.width);
  return std::exp(-0.5 * z.cwiseAbs2().maxCoeff());
}

double novelty_threshold(std::size_t input_dim, double chi) {
  const double u = static_cast<double>(input_dim);
  return std::exp(-u * chi / (4.0 - 2.0 * std::exp(-u / 2.0)));
}

Agmm::Agmm(std::size_t input_dim, std::size_t exemption_window)
    : input_dim_(input_dim), exemption_window_(exemption_window) {
  if (input_dim == 0) throw std::invalid_argument("Agmm: input_dim must be >= 1");
  if (exemption_window == 0) {
    throw std::invalid_argument("Agmm: exemption_window must be >= 1");
  }
}

void Agmm::check_input(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != input_dim_) {
    throw std::invalid_argument("Agmm: expected input of length " +
                                std::to_string(input_dim_) + ", got " +
                                std::to_string(x.size()));
  }
  if (!x.allFinite()) {
    throw std::invalid_argument("Agmm: input contains non-finite values");
  }
}

void Agmm::init_from_sample(const Vector& x, std::size_t sample_index) {
  check_input(x);
  GaussianComponent c;
  c.center = x;
  c.width = Vector::Constant(x.size(), kInitialWidth);
  c.support = 1;
  c.born = sample_index;
  components_.assign(1, std::move(c));
}

bool Agmm::compatibility_test(const Vector& x, double chi) const {
  double best = 0.0;
  for (const auto& c : components_) best = std::max(best, matching_degree(c, x));
  return best < novelty_threshold(input_dim_, chi);
}

std::size_t Agmm::find_winner(const Vector& x) const {
  std::size_t winner = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < components_.size(); ++m) {
    const double d = (x - components_[m].center).squaredNorm();
    if (d < best) {
      best = d;
      winner = m;
    }
  }
  return winner;
}

double Agmm::overlap_rho(std::size_t winner) const {
  const std::size_t count = components_.size();
  double rho = 0.0;
  if (count > 1) {
    const auto& win = components_[winner];
    const double share = 1.0 / static_cast<double>(count - 1);
    for (std::size_t m = 0; m < count; ++m) {
      if (m == winner) continue;
      const auto& other = components_[m];
      switch (classify_overlap(win, other)) {
        case Overlap::kFull:
          rho += share;
          break;
        case Overlap::kPartial:
          rho += share * (normalized_gap(other.center, win.center) +
                          normalized_gap(other.width, win.width));
          break;
        case Overlap::kNone:
          break;
      }
    }
  }
  return std::clamp(rho, 0.1, 1.0);
}

bool Agmm::vigilance_test(std::size_t winner, double rho) const {
  // Volumes relative to the largest one so that tiny widths never underflow.
  std::vector<double> logv(components_.size());
  std::transform(components_.begin(), components_.end(), logv.begin(), log_volume);
  const double top = *std::max_element(logv.begin(), logv.end());
  double total = 0.0;
  for (double lv : logv) total += std::exp(lv - top);
  return std::exp(logv[winner] - top) >= rho * total;
}

void Agmm::add_component(const Vector& x, std::size_t sample_index,
                         std::size_t winner) {
  GaussianComponent c;
  c.center = x;
  c.width = (x - components_[winner].center).cwiseAbs().cwiseMax(kWidthFloor);
  c.support = 1;
  c.born = sample_index;
  c.matching_sum = 0.0;
  components_.push_back(std::move(c));
}

void Agmm::tune_winner(std::size_t winner, const Vector& x) {
  auto& c = components_[winner];
  const double step = 1.0 / static_cast<double>(c.support + 1);
  c.center += (x - c.center) * step;
  Vector var = c.width.cwiseAbs2();
  var += ((x - c.center).cwiseAbs2() - var) * step;
  c.width = var.cwiseSqrt().cwiseMax(kWidthFloor);
  ++c.support;
}

std::size_t Agmm::update_activity_and_prune(const Vector& x,
                                            std::size_t sample_count) {
  const std::size_t count = components_.size();
  std::vector<double> phi(count);
  for (std::size_t m = 0; m < count; ++m) {
    auto& c = components_[m];
    c.matching_sum += matching_degree(c, x);
    const std::size_t life = sample_count > c.born ? sample_count - c.born : 1;
    phi[m] = c.matching_sum / static_cast<double>(life);
  }
  if (count < 2) return 0;

  const double mean =
      std::accumulate(phi.begin(), phi.end(), 0.0) / static_cast<double>(count);
  const double threshold = mean - 0.5 * sample_std(phi, mean);

  std::vector<bool> remove(count, false);
  std::size_t removed = 0;
  for (std::size_t m = 0; m < count; ++m) {
    const std::size_t age = sample_count - std::min(sample_count, components_[m].born);
    if (age > exemption_window_ && phi[m] <= threshold) {
      remove[m] = true;
      ++removed;
    }
  }
  if (removed == count) {
    // Keep the most active component (lowest index among ties).
    const auto keep = static_cast<std::size_t>(
        std::max_element(phi.begin(), phi.end()) - phi.begin());
    remove[keep] = false;
    --removed;
  }
  if (removed == 0) return 0;

  std::vector<GaussianComponent> kept;
  kept.reserve(count - removed);
  for (std::size_t m = 0; m < count; ++m) {
    if (!remove[m]) kept.push_back(std::move(components_[m]));
  }
  components_ = std::move(kept);
  return removed;
}

Vector Agmm::mixing_coefficients(const Vector& x) const {
  const auto count = static_cast<Eigen::Index>(components_.size());
  Vector logw(count);
  double total_support = 0.0;
  for (const auto& c : components_) total_support += static_cast<double>(c.support);
  for (Eigen::Index m = 0; m < count; ++m) {
    const auto& c = components_[static_cast<std::size_t>(m)];
    const double maha = (x - c.center).cwiseQuotient(c.width).squaredNorm();
    // Normaliser approximated by sqrt(2 pi min_j sigma_j).
    const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi * c.width.minCoeff());
    const double log_prior = std::log(static_cast<double>(c.support) / total_support);
    logw[m] = -0.5 * maha - log_norm + log_prior;
  }
  Vector w(count);
  double sum = 0.0;
  for (Eigen::Index m = 0; m < count; ++m) {
    w[m] = std::exp(logw[m]);
    sum += w[m];
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    return Vector::Constant(count, 1.0 / static_cast<double>(count));
  }
  return w / sum;
}

double Agmm::density(const Vector& x) const {
  double total_support = 0.0;
  for (const auto& c : components_) total_support += static_cast<double>(c.support);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double p = 0.0;
  for (const auto& c : components_) {
    const double maha = (x - c.center).cwiseQuotient(c.width).squaredNorm();
    const double log_norm = 0.5 * static_cast<double>(input_dim_) * log2pi +
                            c.width.array().log().sum();
    p += static_cast<double>(c.support) / total_support *
         std::exp(-0.5 * maha - log_norm);
  }
  return p;
}

void Agmm::observe(const Vector& x, double chi) {
  check_input(x);
  const std::size_t index = samples_seen_++;
  if (components_.empty()) {
    init_from_sample(x, index);
    components_.front().matching_sum = 1.0;
    return;
  }
  const std::size_t winner = find_winner(x);
  if (compatibility_test(x, chi) && vigilance_test(winner, overlap_rho(winner))) {
    add_component(x, index, winner);
  } else {
    tune_winner(winner, x);
  }
  update_activity_and_prune(x, samples_seen_);
}

std::size_t Agmm::state_bytes() const {
  std::size_t bytes = sizeof(*this) +
                      components_.capacity() * sizeof(GaussianComponent);
  for (const auto& c : components_) {
    bytes += static_cast<std::size_t>(c.center.size() + c.width.size()) * sizeof(double);
  }
  return bytes;
}

nlohmann::json Agmm::to_json() const {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : components_) {
    comps.push_back({
        {"center", std::vector<double>(c.center.data(), c.center.data() + c.center.size())},
        {"width", std::vector<double>(c.width.data(), c.width.data() + c.width.size())},
        {"support", c.support},
        {"born", c.born},
        {"matching_sum", c.matching_sum},
    });
  }
  return {{"version", 1},
          {"input_dim", input_dim_},
          {"exemption_window", exemption_window_},
          {"samples_seen", samples_seen_},
          {"components", std::move(comps)}};
}

Agmm Agmm::from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != 1) {
    throw std::invalid_argument("Agmm: unsupported snapshot version");
  }
  Agmm g(j.at("input_dim").get<std::size_t>(),
         j.at("exemption_window").get<std::size_t>());
  g.samples_seen_ = j.at("samples_seen").get<std::size_t>();
  for (const auto& jc : j.at("components")) {
    const auto center = jc.at("center").get<std::vector<double>>();
    const auto width = jc.at("width").get<std::vector<double>>();
    if (center.size() != g.input_dim_ || width.size() != g.input_dim_) {
      throw std::invalid_argument("Agmm: component dimension mismatch in snapshot");
    }
    GaussianComponent c;
    c.center = Eigen::Map<const Vector>(center.data(), static_cast<Eigen::Index>(center.size()));
    c.width = Eigen::Map<const Vector>(width.data(), static_cast<Eigen::Index>(width.size()));
    c.support = jc.at("support").get<std::size_t>();
    c.born = jc.at("born").get<std::size_t>();
    c.matching_sum = jc.at("matching_sum").get<double>();
    g.components_.push_back(std::move(c));
  }
  return g;
}

bool operator==(const GaussianComponent& a, const GaussianComponent& b) {
  return a.center == b.center && a.width == b.width && a.support == b.support &&
         a.born == b.born && a.matching_sum == b.matching_sum;
}

bool operator==(const Agmm& a, const Agmm& b) {
  return a.input_dim_ == b.input_dim_ && a.exemption_window_ == b.exemption_window_ &&
         a.samples_seen_ == b.samples_seen_ && a.components_ == b.components_;
}

}  // namespace atl
