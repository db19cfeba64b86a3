#ifndef ATL_SYNTHETIC_HPP
#define ATL_SYNTHETIC_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atl/agmm.hpp"

namespace atl {

struct SyntheticData {
  std::vector<std::string> feature_names;
  Matrix features;
  std::vector<std::size_t> labels;
};

/// SEA concepts: three features uniform in [0, 10], label 1 iff f1 + f2 < theta.
/// The stream is cut into equal segments, one per threshold.
/// Throws if `rows` is not divisible by the number of thresholds.
SyntheticData generate_sea(std::size_t rows, std::uint64_t seed,
                           const std::vector<double>& thresholds = {4.0, 7.0, 4.0, 7.0});

/// Rotating hyperplane in [0, 1]^dims with a gradual drift: labels come from
/// a first random hyperplane, then from a linear mixture with a second one
/// across [transition_begin, transition_end) (fractions of the stream), then
/// from the second hyperplane alone.
SyntheticData generate_hyperplane(std::size_t rows, std::uint64_t seed, std::size_t dims = 4,
                                  double transition_begin = 0.4, double transition_end = 0.6);

void write_csv(const SyntheticData& data, const std::filesystem::path& path,
               const std::string& label_column = "label");

}  // namespace atl

#endif  // ATL_SYNTHETIC_HPP
