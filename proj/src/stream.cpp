#include "atl/stream.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace atl {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string{}
                                               : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* begin = s.data();
  if (*begin == '+') ++begin;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool all_numeric(const std::vector<std::string>& cells) {
  return std::all_of(cells.begin(), cells.end(),
                     [](const std::string& c) { return parse_number(c).has_value(); });
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::size_t Dataset::input_dim() const {
  return chunks.empty() ? feature_names.size()
                        : static_cast<std::size_t>(chunks.front().features.cols());
}

std::size_t Dataset::row_count() const {
  std::size_t n = 0;
  for (const auto& c : chunks) n += c.labels.size();
  return n;
}

std::vector<LabelledChunk> make_chunks(const Matrix& features,
                                       const std::vector<std::size_t>& labels,
                                       std::size_t chunk_size) {
  if (chunk_size == 0) throw std::invalid_argument("chunk_size must be >= 1");
  const auto rows = static_cast<std::size_t>(features.rows());
  if (rows != labels.size()) throw std::invalid_argument("make_chunks: label count mismatch");

  std::vector<std::pair<std::size_t, std::size_t>> bounds;  // [begin, end)
  for (std::size_t begin = 0; begin < rows; begin += chunk_size) {
    bounds.emplace_back(begin, std::min(rows, begin + chunk_size));
  }
  if (bounds.size() > 1) {
    const std::size_t tail = bounds.back().second - bounds.back().first;
    if (10 * tail < chunk_size) {
      bounds[bounds.size() - 2].second = bounds.back().second;
      bounds.pop_back();
    }
  }
  std::vector<LabelledChunk> chunks;
  chunks.reserve(bounds.size());
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    const auto [begin, end] = bounds[k];
    LabelledChunk c;
    c.features = features.middleRows(static_cast<Eigen::Index>(begin),
                                     static_cast<Eigen::Index>(end - begin));
    c.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
    c.chunk_index = k;
    chunks.push_back(std::move(c));
  }
  return chunks;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 std::size_t chunk_size) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_line(line);
    if (columns == 0) {
      columns = cells.size();
      if (!all_numeric(cells)) {
        header = std::move(cells);
        continue;
      }
    }
    if (cells.size() != columns) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(columns) + " columns, found " +
                               std::to_string(cells.size()));
    }
    std::vector<double> row(columns);
    for (std::size_t j = 0; j < columns; ++j) {
      const auto v = parse_number(cells[j]);
      if (!v || !std::isfinite(*v)) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": non-numeric value '" + cells[j] + "' in column " +
                                 std::to_string(j + 1));
      }
      row[j] = *v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no data rows");
  if (columns < 2) throw std::runtime_error(path.string() + ": need at least two columns");

  std::size_t label_idx = columns;
  if (!header.empty()) {
    const auto it = std::find(header.begin(), header.end(), label_column);
    if (it != header.end()) label_idx = static_cast<std::size_t>(it - header.begin());
  }
  if (label_idx == columns) {
    const auto idx = parse_number(label_column);
    if (idx && *idx >= 0 && *idx == std::floor(*idx) && *idx < static_cast<double>(columns)) {
      label_idx = static_cast<std::size_t>(*idx);
    } else {
      throw std::runtime_error(path.string() + ": label column '" + label_column +
                               "' not found");
    }
  }

  Dataset ds;
  std::map<double, std::size_t> class_ids;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double v = rows[r][label_idx];
    if (v != std::floor(v)) {
      throw std::runtime_error(path.string() + ": data row " + std::to_string(r + 1) +
                               ": label " + fmt_double(v) + " is not integral");
    }
    class_ids.emplace(v, 0);
  }
  std::size_t next = 0;
  for (auto& [value, id] : class_ids) {
    id = next++;
    ds.class_values.push_back(value);
  }

  const auto u = static_cast<Eigen::Index>(columns - 1);
  Matrix features(static_cast<Eigen::Index>(rows.size()), u);
  std::vector<std::size_t> labels(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Eigen::Index j_out = 0;
    for (std::size_t j = 0; j < columns; ++j) {
      if (j == label_idx) continue;
      features(static_cast<Eigen::Index>(r), j_out++) = rows[r][j];
    }
    labels[r] = class_ids.at(rows[r][label_idx]);
  }
  for (std::size_t j = 0; j < columns; ++j) {
    if (j == label_idx) continue;
    ds.feature_names.push_back(header.empty() ? "f" + std::to_string(j) : header[j]);
  }
  ds.chunks = make_chunks(features, labels, chunk_size);
  return ds;
}

Vector ScalingParams::apply(const Vector& x) const {
  Vector out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double range = max[j] - min[j];
    out[j] = range > 0.0 ? std::clamp((x[j] - min[j]) / range, 0.0, 1.0) : 0.5;
  }
  return out;
}

ScalingParams scale_features(std::vector<LabelledChunk>& chunks) {
  ScalingParams params;
  if (chunks.empty()) return params;
  const Matrix& warm = chunks.front().features;
  params.min = warm.colwise().minCoeff().transpose();
  params.max = warm.colwise().maxCoeff().transpose();
  for (auto& chunk : chunks) {
    for (Eigen::Index n = 0; n < chunk.features.rows(); ++n) {
      chunk.features.row(n) = params.apply(chunk.features.row(n).transpose()).transpose();
    }
  }
  return params;
}

SplitChunk covariate_split(const LabelledChunk& chunk, double source_fraction, Rng& rng) {
  if (!(source_fraction > 0.0 && source_fraction < 1.0)) {
    throw std::invalid_argument("source_fraction must lie in (0, 1)");
  }
  const Matrix& x = chunk.features;
  const auto n = static_cast<std::size_t>(x.rows());
  const Vector mean = x.colwise().mean().transpose();
  const Vector std_per_feature =
      ((x.rowwise() - mean.transpose()).cwiseAbs2().colwise().sum() /
       static_cast<double>(std::max<std::size_t>(n, 1)))
          .cwiseSqrt()
          .transpose();
  const double sigma = std_per_feature.mean();

  std::vector<double> weight(n, 1.0);
  if (sigma > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      weight[i] = std::exp(-(x.row(static_cast<Eigen::Index>(i)).transpose() - mean).squaredNorm() /
                           sigma);
    }
  }
  // Rows that underflow still need a chance once all heavier rows are taken.
  for (double& w : weight) w = std::max(w, 1e-300);

  const auto n_source =
      std::min(n, static_cast<std::size_t>(std::llround(source_fraction * static_cast<double>(n))));
  std::vector<bool> taken(n, false);
  double remaining = std::accumulate(weight.begin(), weight.end(), 0.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < n_source; ++k) {
    const double r = unit(rng) * remaining;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      acc += weight[i];
      pick = i;
      if (acc > r) break;
    }
    taken[pick] = true;
    remaining -= weight[pick];
    // Re-sum occasionally to stop cancellation drift.
    if ((k & 63u) == 63u) {
      remaining = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i]) remaining += weight[i];
      }
    }
  }

  SplitChunk out;
  out.source.domain = Domain::kSource;
  out.target.domain = Domain::kTarget;
  out.source.chunk_index = out.target.chunk_index = chunk.chunk_index;
  out.source.features.resize(static_cast<Eigen::Index>(n_source), x.cols());
  out.target.features.resize(static_cast<Eigen::Index>(n - n_source), x.cols());
  std::vector<std::size_t> source_labels;
  source_labels.reserve(n_source);
  out.target_labels.reserve(n - n_source);
  Eigen::Index si = 0;
  Eigen::Index ti = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(static_cast<Eigen::Index>(i));
    if (taken[i]) {
      out.source.features.row(si++) = row;
      source_labels.push_back(chunk.labels[i]);
    } else {
      out.target.features.row(ti++) = row;
      out.target_labels.push_back(chunk.labels[i]);
    }
  }
  out.source.labels = std::move(source_labels);
  return out;
}

nlohmann::json RunMetrics::summary_json() const {
  return {
      {"chunks_evaluated", chunks.size()},
      {"target_accuracy", mean_target_accuracy},
      {"source_accuracy", mean_source_accuracy},
      {"hidden_nodes", final_hidden_nodes},
      {"agmm_source_components", final_source_components},
      {"agmm_target_components", final_target_components},
      {"training_seconds", training_seconds},
      {"epochs", trainer.epochs_per_batch},
      {"learning_rate", trainer.learning_rate},
      {"momentum", trainer.momentum},
      {"noise_fraction", trainer.noise_fraction},
      {"seed", trainer.seed},
      {"kl_disabled", trainer.disable_kl},
      {"agmm_ns_disabled", trainer.disable_agmm_ns},
      {"structural_disabled", trainer.disable_structural},
  };
}

RunMetrics run_prequential(std::vector<LabelledChunk> chunks, std::size_t class_count,
                           const HarnessConfig& harness, const TrainerConfig& trainer) {
  trainer.validate();
  RunMetrics metrics;
  metrics.trainer = trainer;
  if (chunks.empty()) return metrics;
  const auto u = static_cast<std::size_t>(chunks.front().features.cols());
  for (const auto& c : chunks) {
    if (static_cast<std::size_t>(c.features.cols()) != u) {
      throw std::invalid_argument("run_prequential: chunks disagree on feature count");
    }
  }
  metrics.scaling = scale_features(chunks);

  const auto window = static_cast<std::size_t>(chunks.front().features.rows());
  AtlState state = AtlState::create(u, class_count, window, trainer);
  Rng split_rng(trainer.seed ^ 0x5bd1e995ULL);

  double elapsed = 0.0;
  double target_sum = 0.0;
  double source_sum = 0.0;
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    SplitChunk split = covariate_split(chunks[k], harness.source_fraction, split_rng);
    const LabelledBatch source{split.source.features, *split.source.labels};
    const UnlabelledBatch target{split.target.features};
    const bool evaluate = k > 0;

    const auto start = std::chrono::steady_clock::now();
    ChunkResult r = process_chunk(state, source, target, trainer, evaluate);
    elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    metrics.peak_state_bytes = std::max(metrics.peak_state_bytes, state.state_bytes());
    if (!evaluate) continue;

    std::size_t correct = 0;
    for (std::size_t i = 0; i < r.target_predictions.size(); ++i) {
      if (r.target_predictions[i] == split.target_labels[i]) ++correct;
    }
    ChunkRecord rec;
    rec.chunk_index = chunks[k].chunk_index;
    rec.target_accuracy = r.target_predictions.empty()
                              ? 0.0
                              : static_cast<double>(correct) /
                                    static_cast<double>(r.target_predictions.size());
    rec.source_accuracy = r.source_accuracy;
    rec.hidden_nodes = r.hidden_nodes;
    rec.source_components = r.source_components;
    rec.target_components = r.target_components;
    rec.cumulative_seconds = elapsed;
    target_sum += rec.target_accuracy;
    source_sum += rec.source_accuracy;
    metrics.chunks.push_back(rec);
  }
  if (!metrics.chunks.empty()) {
    const auto count = static_cast<double>(metrics.chunks.size());
    metrics.mean_target_accuracy = target_sum / count;
    metrics.mean_source_accuracy = source_sum / count;
  }
  metrics.final_hidden_nodes = state.net.hidden_count();
  metrics.final_source_components = state.source_components(trainer);
  metrics.final_target_components = state.target_components(trainer);
  metrics.training_seconds = elapsed;
  return metrics;
}

RunMetrics run_prequential(const Dataset& dataset, const HarnessConfig& harness,
                           const TrainerConfig& trainer) {
  return run_prequential(dataset.chunks, dataset.class_count(), harness, trainer);
}

void write_metrics(const RunMetrics& metrics, const std::filesystem::path& path,
                   TimingColumn timing) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics file '" + path.string() + "'");
  const bool wall = timing == TimingColumn::kWallClock;
  out << "chunk_index,target_acc,source_acc,hidden_nodes,agmm_source_M,agmm_target_M,"
         "cumulative_seconds\n";
  for (const auto& r : metrics.chunks) {
    out << r.chunk_index << ',' << fmt_double(r.target_accuracy) << ','
        << fmt_double(r.source_accuracy) << ',' << r.hidden_nodes << ','
        << r.source_components << ',' << r.target_components << ','
        << fmt_double(wall ? r.cumulative_seconds : 0.0) << '\n';
  }
  out << "summary," << fmt_double(metrics.mean_target_accuracy) << ','
      << fmt_double(metrics.mean_source_accuracy) << ',' << metrics.final_hidden_nodes << ','
      << metrics.final_source_components << ',' << metrics.final_target_components << ','
      << fmt_double(wall ? metrics.training_seconds : 0.0) << '\n';
  if (!out) throw std::runtime_error("failed writing metrics file '" + path.string() + "'");
}

}  // namespace atl
