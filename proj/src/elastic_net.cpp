#include "atl/elastic_net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace atl {

namespace {

double xavier_bound(Eigen::Index fan_in, Eigen::Index fan_out) {
  // Uniform(-a, a) has variance a^2 / 3 = 2 / (fan_in + fan_out).
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_uniform(auto&& block, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, j) = dist(rng);
  }
}

template <typename M>
M keep_rows(const M& src, const std::vector<Eigen::Index>& rows) {
  M out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = src.row(rows[k]);
  }
  return out;
}

Matrix keep_cols(const Matrix& src, const std::vector<Eigen::Index>& cols) {
  Matrix out(src.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = src.col(cols[k]);
  }
  return out;
}

}  // namespace

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Vector sigmoid(const Vector& z) {
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

Vector softmax(const Vector& z) {
  const Vector e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

NetworkParams NetworkParams::zeros(std::size_t input_dim, std::size_t hidden,
                                   std::size_t classes) {
  const auto u = static_cast<Eigen::Index>(input_dim);
  const auto r = static_cast<Eigen::Index>(hidden);
  const auto m = static_cast<Eigen::Index>(classes);
  return {Matrix::Zero(u, r), Vector::Zero(r), Matrix::Zero(r, m),
          Vector::Zero(m),    Matrix::Zero(r, u), Vector::Zero(u)};
}

bool NetworkParams::same_shape(const NetworkParams& o) const {
  auto eq = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols();
  };
  return eq(w_in, o.w_in) && eq(b, o.b) && eq(w_out, o.w_out) && eq(c, o.c) &&
         eq(w_dec, o.w_dec) && eq(d, o.d);
}

bool NetworkParams::all_finite() const {
  return w_in.allFinite() && b.allFinite() && w_out.allFinite() && c.allFinite() &&
         w_dec.allFinite() && d.allFinite();
}

std::size_t NetworkParams::scalar_count() const {
  return static_cast<std::size_t>(w_in.size() + b.size() + w_out.size() + c.size() +
                                  w_dec.size() + d.size());
}

Vector corrupt(const Vector& x, double noise_fraction, Rng& rng) {
  const auto u = static_cast<std::size_t>(x.size());
  const auto masked = std::min<std::size_t>(
      u, static_cast<std::size_t>(std::llround(noise_fraction * static_cast<double>(u))));
  Vector out = x;
  if (masked == 0) return out;
  // Partial Fisher-Yates: the first `masked` slots hold a uniform subset.
  std::vector<Eigen::Index> idx(u);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (std::size_t k = 0; k < masked; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, u - 1);
    std::swap(idx[k], idx[pick(rng)]);
    out[idx[k]] = 0.0;
  }
  return out;
}

ElasticNetwork::ElasticNetwork(std::size_t input_dim, std::size_t classes,
                               std::size_t hidden, Rng& rng)
    : p_(NetworkParams::zeros(input_dim, 0, classes)) {
  if (input_dim == 0 || classes == 0 || hidden == 0) {
    throw std::invalid_argument("ElasticNetwork: dimensions must be positive");
  }
  grow(hidden, rng);
}

ElasticNetwork::ElasticNetwork(NetworkParams params) : p_(std::move(params)) {
  if (!shapes_consistent() || hidden_count() == 0) {
    throw std::invalid_argument("ElasticNetwork: inconsistent parameter shapes");
  }
}

bool ElasticNetwork::shapes_consistent() const {
  const auto u = p_.w_in.rows();
  const auto r = p_.w_in.cols();
  const auto m = p_.w_out.cols();
  return p_.b.size() == r && p_.w_out.rows() == r && p_.c.size() == m &&
         p_.w_dec.rows() == r && p_.w_dec.cols() == u && p_.d.size() == u;
}

Vector ElasticNetwork::hidden(const Vector& x) const {
  return sigmoid(p_.w_in.transpose() * x + p_.b);
}

ClassifyPass ElasticNetwork::forward_classify(const Vector& x) const {
  ClassifyPass pass;
  pass.hidden = hidden(x);
  pass.logits = p_.w_out.transpose() * pass.hidden + p_.c;
  pass.y_hat = softmax(pass.logits);
  return pass;
}

ReconstructPass ElasticNetwork::forward_reconstruct(const Vector& x_tilde) const {
  ReconstructPass pass;
  pass.hidden = hidden(x_tilde);
  pass.x_hat = sigmoid(p_.w_dec.transpose() * pass.hidden + p_.d);
  return pass;
}

std::size_t ElasticNetwork::predict(const Vector& x) const {
  const Vector logits = p_.w_out.transpose() * hidden(x) + p_.c;
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

void ElasticNetwork::grow(std::size_t count, Rng& rng) {
  if (count == 0) return;
  const auto u = p_.w_in.rows();
  const auto m = p_.w_out.cols();
  const auto old_r = p_.w_in.cols();
  const auto add = static_cast<Eigen::Index>(count);
  const auto r = old_r + add;

  p_.w_in.conservativeResize(u, r);
  p_.b.conservativeResize(r);
  p_.w_out.conservativeResize(r, m);
  p_.w_dec.conservativeResize(r, u);

  fill_uniform(p_.w_in.rightCols(add), xavier_bound(u, r), rng);
  fill_uniform(p_.b.tail(add), xavier_bound(u, r), rng);
  fill_uniform(p_.w_out.bottomRows(add), xavier_bound(r, m), rng);
  fill_uniform(p_.w_dec.bottomRows(add), xavier_bound(r, u), rng);
}

void ElasticNetwork::prune(const std::vector<std::size_t>& indices) {
  if (indices.empty()) return;
  std::vector<std::size_t> victims = indices;
  std::sort(victims.begin(), victims.end());
  victims.erase(std::unique(victims.begin(), victims.end()), victims.end());
  if (victims.back() >= hidden_count()) {
    throw std::out_of_range("ElasticNetwork::prune: unit index out of range");
  }
  if (victims.size() >= hidden_count()) {
    throw std::invalid_argument("ElasticNetwork::prune: cannot remove every hidden unit");
  }
  drop_hidden_units(p_, victims);
}

Vector probit_shift(const GaussianComponent& comp) {
  const Vector scale =
      (1.0 + std::numbers::pi / 8.0 * comp.width.array().square()).sqrt().matrix();
  return comp.center.cwiseQuotient(scale);
}

Vector ElasticNetwork::shifted_activation(const GaussianComponent& comp) const {
  return hidden(probit_shift(comp));
}

Vector ElasticNetwork::expected_hidden(std::span<const GaussianComponent> mixture,
                                       const Vector& weights) const {
  Vector eh = Vector::Zero(p_.w_in.cols());
  for (std::size_t m = 0; m < mixture.size(); ++m) {
    eh += weights[static_cast<Eigen::Index>(m)] * shifted_activation(mixture[m]);
  }
  return eh;
}

Vector ElasticNetwork::expected_output(std::span<const GaussianComponent> mixture,
                                       const Vector& weights) const {
  return p_.w_out.transpose() * expected_hidden(mixture, weights) + p_.c;
}

Vector ElasticNetwork::expected_reconstruction(
    std::span<const GaussianComponent> mixture, const Vector& weights) const {
  return sigmoid(p_.w_dec.transpose() * expected_hidden(mixture, weights) + p_.d);
}

Vector ElasticNetwork::hidden_contributions(
    std::span<const GaussianComponent> mixture) const {
  Vector hc = Vector::Zero(p_.w_in.cols());
  for (const auto& comp : mixture) hc += shifted_activation(comp);
  return hc;
}

std::size_t ElasticNetwork::state_bytes() const {
  return sizeof(*this) + p_.scalar_count() * sizeof(double);
}

void drop_hidden_units(NetworkParams& p, const std::vector<std::size_t>& sorted_unique) {
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(p.w_in.cols()));
  std::size_t next = 0;
  for (Eigen::Index i = 0; i < p.w_in.cols(); ++i) {
    if (next < sorted_unique.size() && sorted_unique[next] == static_cast<std::size_t>(i)) {
      ++next;
      continue;
    }
    keep.push_back(i);
  }
  p.w_in = keep_cols(p.w_in, keep);
  p.b = keep_rows(p.b, keep);
  p.w_out = keep_rows(p.w_out, keep);
  p.w_dec = keep_rows(p.w_dec, keep);
}

void append_zero_units(NetworkParams& p, std::size_t count) {
  const auto add = static_cast<Eigen::Index>(count);
  const auto r = p.w_in.cols() + add;
  p.w_in.conservativeResize(Eigen::NoChange, r);
  p.w_in.rightCols(add).setZero();
  p.b.conservativeResize(r);
  p.b.tail(add).setZero();
  p.w_out.conservativeResize(r, Eigen::NoChange);
  p.w_out.bottomRows(add).setZero();
  p.w_dec.conservativeResize(r, Eigen::NoChange);
  p.w_dec.bottomRows(add).setZero();
}

}  // namespace atl
