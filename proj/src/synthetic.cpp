#include "atl/synthetic.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

namespace atl {

SyntheticData generate_sea(std::size_t rows, std::uint64_t seed,
                           const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw std::invalid_argument("generate_sea: no thresholds");
  if (rows == 0 || rows % thresholds.size() != 0) {
    throw std::invalid_argument("generate_sea: rows must be a positive multiple of the "
                                "number of drift segments");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> feature(0.0, 10.0);
  const std::size_t segment = rows / thresholds.size();

  SyntheticData data;
  data.feature_names = {"f1", "f2", "f3"};
  data.features.resize(static_cast<Eigen::Index>(rows), 3);
  data.labels.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < 3; ++j) data.features(r, j) = feature(rng);
    const double theta = thresholds[i / segment];
    data.labels[i] = data.features(r, 0) + data.features(r, 1) < theta ? 1 : 0;
  }
  return data;
}

SyntheticData generate_hyperplane(std::size_t rows, std::uint64_t seed, std::size_t dims,
                                  double transition_begin, double transition_end) {
  if (rows == 0 || dims == 0) throw std::invalid_argument("generate_hyperplane: empty stream");
  if (!(0.0 <= transition_begin && transition_begin <= transition_end &&
        transition_end <= 1.0)) {
    throw std::invalid_argument("generate_hyperplane: invalid transition window");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dims);

  // w0 = sum(w) / 2 puts the plane through the cube centre, giving balanced classes.
  auto random_plane = [&] {
    Vector w(d);
    for (Eigen::Index j = 0; j < d; ++j) w[j] = unit(rng);
    return w;
  };
  const Vector before = random_plane();
  const Vector after = random_plane();

  SyntheticData data;
  for (std::size_t j = 0; j < dims; ++j) data.feature_names.push_back("x" + std::to_string(j + 1));
  data.features.resize(static_cast<Eigen::Index>(rows), d);
  data.labels.resize(rows);
  const double begin = transition_begin * static_cast<double>(rows);
  const double end = transition_end * static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < d; ++j) data.features(r, j) = unit(rng);
    const double t = static_cast<double>(i);
    double p_after = 0.0;
    if (t >= end) {
      p_after = 1.0;
    } else if (t >= begin) {
      p_after = (t - begin) / (end - begin);
    }
    const Vector& w = unit(rng) < p_after ? after : before;
    data.labels[i] = data.features.row(r).dot(w) > 0.5 * w.sum() ? 1 : 0;
  }
  return data;
}

void write_csv(const SyntheticData& data, const std::filesystem::path& path,
               const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (const auto& name : data.feature_names) out << name << ',';
  out << label_column << '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features(r, j));
      out << buf << ',';
    }
    out << data.labels[static_cast<std::size_t>(r)] << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace atl
