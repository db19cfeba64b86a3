#ifndef ATL_STREAM_HPP
#define ATL_STREAM_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atl/trainer.hpp"

namespace atl {

/// One equal-sized slice of the input file, before the source/target split.
struct LabelledChunk {
  Matrix features;  // n x u
  std::vector<std::size_t> labels;
  std::size_t chunk_index = 0;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<double> class_values;  // class id -> original label value
  std::vector<LabelledChunk> chunks;

  std::size_t class_count() const { return class_values.size(); }
  std::size_t input_dim() const;
  std::size_t row_count() const;
};

/// Reads a numeric CSV and cuts it into ordered chunks. A header is detected
/// when the first line is not fully numeric; `label_column` is a header name
/// or, without a header, a zero-based column index. A trailing partial chunk
/// is kept when it holds at least 10% of `chunk_size` rows, otherwise it is
/// merged into the previous chunk. Throws std::runtime_error with the row
/// number on malformed input.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 std::size_t chunk_size);

/// Splits rows into chunks following the same trailing-chunk rule.
std::vector<LabelledChunk> make_chunks(const Matrix& features,
                                       const std::vector<std::size_t>& labels,
                                       std::size_t chunk_size);

struct ScalingParams {
  Vector min;
  Vector max;
  Vector apply(const Vector& x) const;
};

/// Min-max scaling fitted on the first (warm-up) chunk and applied to every
/// chunk in place; later values are clamped to [0, 1] and constant features
/// map to 0.5.
ScalingParams scale_features(std::vector<LabelledChunk>& chunks);

enum class Domain { kSource, kTarget };

struct StreamChunk {
  Matrix features;
  std::optional<std::vector<std::size_t>> labels;
  Domain domain = Domain::kSource;
  std::size_t chunk_index = 0;
};

struct SplitChunk {
  StreamChunk source;
  StreamChunk target;  // labels stripped
  std::vector<std::size_t> target_labels;  // evaluation only
};

/// Biased source/target split: rows close to the chunk mean are more likely
/// to be drawn into the source half. Sampling is without replacement with
/// probability proportional to exp(-||x - mean||^2 / sigma), sigma being the
/// mean per-feature standard deviation of the chunk.
SplitChunk covariate_split(const LabelledChunk& chunk, double source_fraction, Rng& rng);

struct HarnessConfig {
  double source_fraction = 0.5;
};

struct ChunkRecord {
  std::size_t chunk_index = 0;
  double target_accuracy = 0.0;
  double source_accuracy = 0.0;
  std::size_t hidden_nodes = 0;
  std::size_t source_components = 0;
  std::size_t target_components = 0;
  double cumulative_seconds = 0.0;
};

struct RunMetrics {
  std::vector<ChunkRecord> chunks;
  double mean_target_accuracy = 0.0;
  double mean_source_accuracy = 0.0;
  std::size_t final_hidden_nodes = 0;
  std::size_t final_source_components = 0;
  std::size_t final_target_components = 0;
  double training_seconds = 0.0;
  std::size_t peak_state_bytes = 0;
  TrainerConfig trainer;
  ScalingParams scaling;

  nlohmann::json summary_json() const;
};

/// Prequential test-then-train over already chunked data. The first chunk is
/// a training-only warm-up; features are scaled with its statistics.
RunMetrics run_prequential(std::vector<LabelledChunk> chunks, std::size_t class_count,
                           const HarnessConfig& harness, const TrainerConfig& trainer);

RunMetrics run_prequential(const Dataset& dataset, const HarnessConfig& harness,
                           const TrainerConfig& trainer);

enum class TimingColumn { kWallClock, kOmitted };

/// Writes one CSV record per evaluated chunk plus a trailing summary record.
/// With TimingColumn::kOmitted the seconds column is written as 0 so that
/// identical runs produce identical files.
void write_metrics(const RunMetrics& metrics, const std::filesystem::path& path,
                   TimingColumn timing = TimingColumn::kWallClock);

}  // namespace atl

#endif  // ATL_STREAM_HPP
