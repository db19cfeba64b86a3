#ifndef ATL_TESTS_SUPPORT_HPP
#define ATL_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "atl/agmm.hpp"
#include "atl/elastic_net.hpp"

namespace atl::test {

struct CompSpec {
  std::vector<double> center;
  std::vector<double> width;
  std::size_t support = 1;
  std::size_t born = 0;
  double matching_sum = 0.0;
};

// Builds a mixture with exactly the given components through the snapshot
// format, bypassing the online add/tune rules.
inline Agmm make_agmm(const std::vector<CompSpec>& comps, std::size_t window = 10,
                      std::size_t samples_seen = 0) {
  nlohmann::json jc = nlohmann::json::array();
  for (const auto& c : comps) {
    jc.push_back({{"center", c.center},
                  {"width", c.width},
                  {"support", c.support},
                  {"born", c.born},
                  {"matching_sum", c.matching_sum}});
  }
  return Agmm::from_json({{"version", 1},
                          {"input_dim", comps.front().center.size()},
                          {"exemption_window", window},
                          {"samples_seen", samples_seen},
                          {"components", jc}});
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Vector uniform_vector(std::size_t n, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
  return v;
}

inline Matrix uniform_matrix(std::size_t r, std::size_t c, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
  return m;
}

inline NetworkParams random_params(std::size_t u, std::size_t r, std::size_t m, double scale,
                                   Rng& rng) {
  return {uniform_matrix(u, r, -scale, scale, rng), uniform_vector(r, -scale, scale, rng),
          uniform_matrix(r, m, -scale, scale, rng), uniform_vector(m, -scale, scale, rng),
          uniform_matrix(r, u, -scale, scale, rng), uniform_vector(u, -scale, scale, rng)};
}

inline double plain_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace atl::test

#endif  // ATL_TESTS_SUPPORT_HPP
