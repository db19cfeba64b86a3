#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "atl/stream.hpp"
#include "atl/synthetic.hpp"
#include "support.hpp"

namespace atl {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("atl_stream_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name) const { return path_ / name; }
  fs::path write(const std::string& name, const std::string& contents) const {
    std::ofstream(path_ / name) << contents;
    return path_ / name;
  }

 private:
  fs::path path_;
};

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::size_t field_count(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

Matrix ramp(std::size_t rows, std::size_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<double>(r * 10 + c);
  }
  return m;
}

TEST(MakeChunks, EvenSplit) {
  const auto chunks = make_chunks(ramp(1000, 2), std::vector<std::size_t>(1000, 0), 100);
  ASSERT_EQ(chunks.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_EQ(chunks[k].features.rows(), 100);
    EXPECT_EQ(chunks[k].chunk_index, k);
    EXPECT_EQ(chunks[k].features(0, 0), static_cast<double>(k * 100 * 10));
  }
}

TEST(MakeChunks, LargeTailKept) {
  const auto chunks = make_chunks(ramp(1050, 2), std::vector<std::size_t>(1050, 0), 100);
  ASSERT_EQ(chunks.size(), 11u);
  EXPECT_EQ(chunks.back().features.rows(), 50);
}

TEST(MakeChunks, TinyTailMerged) {
  const auto chunks = make_chunks(ramp(1005, 2), std::vector<std::size_t>(1005, 0), 100);
  ASSERT_EQ(chunks.size(), 10u);
  EXPECT_EQ(chunks.back().features.rows(), 105);
  EXPECT_EQ(chunks.back().features(104, 0), 1004.0 * 10.0);
}

TEST(MakeChunks, TailAtTenPercentKept) {
  EXPECT_EQ(make_chunks(ramp(1010, 1), std::vector<std::size_t>(1010, 0), 100).size(), 11u);
}

TEST(MakeChunks, OrderPreservedAndDisjoint) {
  std::vector<std::size_t> labels(537);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i;
  const auto chunks = make_chunks(ramp(537, 1), labels, 50);
  std::size_t expect = 0;
  for (const auto& c : chunks) {
    for (std::size_t l : c.labels) EXPECT_EQ(l, expect++);
  }
  EXPECT_EQ(expect, 537u);
}

TEST(MakeChunks, Errors) {
  EXPECT_THROW(make_chunks(ramp(10, 1), std::vector<std::size_t>(10, 0), 0),
               std::invalid_argument);
  EXPECT_THROW(make_chunks(ramp(10, 1), std::vector<std::size_t>(9, 0), 5),
               std::invalid_argument);
}

TEST(LoadCsv, HeaderAndNamedLabel) {
  TempDir dir;
  const auto p = dir.write("d.csv", "a,label,b\n1,0,2\n3,1,4\n5,0,6\n");
  const Dataset ds = load_csv(p, "label", 2);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.class_count(), 2u);
  EXPECT_EQ(ds.row_count(), 3u);
  ASSERT_EQ(ds.chunks.size(), 2u);
  EXPECT_EQ(ds.chunks[0].features(1, 0), 3.0);
  EXPECT_EQ(ds.chunks[0].features(1, 1), 4.0);
  EXPECT_EQ(ds.chunks[0].labels, (std::vector<std::size_t>{0, 1}));
}

TEST(LoadCsv, NoHeaderUsesIndex) {
  TempDir dir;
  const auto p = dir.write("d.csv", "1.5,2,7\n-3,4,9\n");
  const Dataset ds = load_csv(p, "2", 10);
  EXPECT_EQ(ds.input_dim(), 2u);
  EXPECT_EQ(ds.class_values, (std::vector<double>{7.0, 9.0}));
  EXPECT_EQ(ds.chunks[0].labels, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(ds.chunks[0].features(1, 0), -3.0);
}

TEST(LoadCsv, ClassIdsFollowSortedLabelValues) {
  TempDir dir;
  const auto p = dir.write("d.csv", "x,y\n0,5\n0,-1\n0,2\n");
  const Dataset ds = load_csv(p, "y", 10);
  EXPECT_EQ(ds.class_values, (std::vector<double>{-1.0, 2.0, 5.0}));
  EXPECT_EQ(ds.chunks[0].labels, (std::vector<std::size_t>{2, 0, 1}));
}

TEST(LoadCsv, ErrorsCarryRowDiagnostics) {
  TempDir dir;
  EXPECT_THROW(load_csv(dir.file("missing.csv"), "label", 10), std::runtime_error);

  const auto bad_cell = dir.write("cell.csv", "a,label\n1,0\n2,x\n");
  try {
    load_csv(bad_cell, "label", 10);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }

  const auto ragged = dir.write("ragged.csv", "a,label\n1,0\n2,1,3\n");
  try {
    load_csv(ragged, "label", 10);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }

  EXPECT_THROW(load_csv(dir.write("lbl.csv", "a,label\n1,0.5\n"), "label", 10),
               std::runtime_error);
  EXPECT_THROW(load_csv(dir.write("nolbl.csv", "a,b\n1,0\n"), "label", 10),
               std::runtime_error);
  EXPECT_THROW(load_csv(dir.write("empty.csv", "a,label\n"), "label", 10), std::runtime_error);
  EXPECT_THROW(load_csv(dir.write("nan.csv", "a,label\nnan,1\n"), "label", 10),
               std::runtime_error);
}

TEST(ScaleFeatures, Examples) {
  std::vector<LabelledChunk> chunks(2);
  chunks[0].features.resize(2, 2);
  chunks[0].features << 2.0, 7.0, 4.0, 7.0;
  chunks[0].labels = {0, 0};
  chunks[1].features.resize(3, 2);
  chunks[1].features << 3.0, 7.0, 5.0, 8.0, 0.0, 1.0;
  chunks[1].labels = {0, 0, 0};
  const ScalingParams params = scale_features(chunks);
  EXPECT_EQ(params.min, test::vec({2.0, 7.0}));
  EXPECT_EQ(params.max, test::vec({4.0, 7.0}));
  EXPECT_DOUBLE_EQ(chunks[1].features(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(chunks[1].features(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(chunks[1].features(2, 0), 0.0);
  for (const auto& c : chunks) {
    for (Eigen::Index r = 0; r < c.features.rows(); ++r) EXPECT_DOUBLE_EQ(c.features(r, 1), 0.5);
  }
}

LabelledChunk labelled(const Matrix& x) {
  LabelledChunk c;
  c.features = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) c.labels.push_back(static_cast<std::size_t>(r));
  return c;
}

TEST(CovariateSplit, SizesAndPartition) {
  Rng rng(1);
  const LabelledChunk chunk = labelled(test::uniform_matrix(100, 3, 0, 1, rng));
  const SplitChunk s = covariate_split(chunk, 0.5, rng);
  EXPECT_EQ(s.source.features.rows(), 50);
  EXPECT_EQ(s.target.features.rows(), 50);
  ASSERT_TRUE(s.source.labels.has_value());
  EXPECT_FALSE(s.target.labels.has_value());
  EXPECT_EQ(s.source.domain, Domain::kSource);
  EXPECT_EQ(s.target.domain, Domain::kTarget);
  // labels are row ids here, so every row appears exactly once across both sides
  std::vector<std::size_t> ids = *s.source.labels;
  ids.insert(ids.end(), s.target_labels.begin(), s.target_labels.end());
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(ids[i], i);
  for (std::size_t k = 0; k < s.target_labels.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(s.target_labels[k]);
    EXPECT_EQ(s.target.features.row(static_cast<Eigen::Index>(k)), chunk.features.row(row));
  }
}

TEST(CovariateSplit, OddSizesAndFractions) {
  Rng rng(2);
  const LabelledChunk chunk = labelled(test::uniform_matrix(7, 2, 0, 1, rng));
  const SplitChunk s = covariate_split(chunk, 0.3, rng);
  EXPECT_EQ(s.source.features.rows(), 2);
  EXPECT_EQ(s.target.features.rows(), 5);
  EXPECT_THROW(covariate_split(chunk, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(covariate_split(chunk, 1.0, rng), std::invalid_argument);
}

TEST(CovariateSplit, IdenticalRowsSplitUniformly) {
  Rng rng(3);
  std::vector<int> hits(20, 0);
  const LabelledChunk chunk = labelled(Matrix::Constant(20, 2, 0.3));
  for (int rep = 0; rep < 2000; ++rep) {
    const SplitChunk s = covariate_split(chunk, 0.5, rng);
    for (std::size_t id : *s.source.labels) ++hits[id];
  }
  for (int h : hits) EXPECT_NEAR(h, 1000, 5 * std::sqrt(2000 * 0.25));
}

TEST(CovariateSplit, NearRowsOverRepresentedInSource) {
  // 80 rows close to the chunk mean, 20 rows far away.
  Rng data_rng(4);
  std::normal_distribution<double> noise(0.0, 0.1);
  Matrix x(100, 2);
  for (Eigen::Index r = 0; r < 100; ++r) {
    const double base = r < 80 ? 0.0 : 2.0;
    x(r, 0) = base + noise(data_rng);
    x(r, 1) = base + noise(data_rng);
  }
  const LabelledChunk chunk = labelled(x);
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const SplitChunk s = covariate_split(chunk, 0.5, rng);
    const auto near = std::count_if(s.source.labels->begin(), s.source.labels->end(),
                                    [](std::size_t id) { return id < 80; });
    wins += static_cast<double>(near) / 50.0 > 0.8;
  }
  EXPECT_GT(wins, 990);
}

TEST(CovariateSplit, SeededDeterminism) {
  Rng data_rng(5);
  const LabelledChunk chunk = labelled(test::uniform_matrix(60, 3, 0, 1, data_rng));
  Rng a(9);
  Rng b(9);
  EXPECT_EQ(*covariate_split(chunk, 0.5, a).source.labels,
            *covariate_split(chunk, 0.5, b).source.labels);
}

std::vector<LabelledChunk> sea_chunks(std::size_t chunks, std::size_t size, std::uint64_t seed) {
  const SyntheticData sea = generate_sea(chunks * size, seed);
  return make_chunks(sea.features, sea.labels, size);
}

TEST(Prequential, RecordsExcludeWarmUp) {
  TrainerConfig cfg;
  const RunMetrics m = run_prequential(sea_chunks(6, 100, 1), 2, {}, cfg);
  ASSERT_EQ(m.chunks.size(), 5u);
  double sum = 0.0;
  double last_seconds = 0.0;
  for (std::size_t k = 0; k < m.chunks.size(); ++k) {
    const auto& r = m.chunks[k];
    EXPECT_EQ(r.chunk_index, k + 1);
    EXPECT_GE(r.target_accuracy, 0.0);
    EXPECT_LE(r.target_accuracy, 1.0);
    EXPECT_GE(r.source_accuracy, 0.0);
    EXPECT_LE(r.source_accuracy, 1.0);
    EXPECT_GE(r.cumulative_seconds, last_seconds);
    last_seconds = r.cumulative_seconds;
    sum += r.target_accuracy;
  }
  EXPECT_DOUBLE_EQ(m.mean_target_accuracy, sum / 5.0);
  EXPECT_EQ(m.final_hidden_nodes, m.chunks.back().hidden_nodes);
  EXPECT_GT(m.peak_state_bytes, 0u);
}

TEST(Prequential, SameSeedSameMetrics) {
  TrainerConfig cfg;
  cfg.seed = 4;
  const RunMetrics a = run_prequential(sea_chunks(5, 100, 2), 2, {}, cfg);
  const RunMetrics b = run_prequential(sea_chunks(5, 100, 2), 2, {}, cfg);
  ASSERT_EQ(a.chunks.size(), b.chunks.size());
  for (std::size_t k = 0; k < a.chunks.size(); ++k) {
    EXPECT_EQ(a.chunks[k].target_accuracy, b.chunks[k].target_accuracy);
    EXPECT_EQ(a.chunks[k].hidden_nodes, b.chunks[k].hidden_nodes);
    EXPECT_EQ(a.chunks[k].source_components, b.chunks[k].source_components);
  }
}

TEST(Prequential, EmptyAndMismatchedInput) {
  TrainerConfig cfg;
  const RunMetrics empty = run_prequential(std::vector<LabelledChunk>{}, 2, {}, cfg);
  EXPECT_TRUE(empty.chunks.empty());
  auto chunks = sea_chunks(4, 50, 3);
  chunks[2].features.conservativeResize(Eigen::NoChange, 2);
  EXPECT_THROW(run_prequential(chunks, 2, {}, cfg), std::invalid_argument);
  cfg.epochs_per_batch = 0;
  EXPECT_THROW(run_prequential(sea_chunks(4, 50, 3), 2, {}, cfg), std::invalid_argument);
}

TEST(WriteMetrics, Format) {
  TempDir dir;
  TrainerConfig cfg;
  const RunMetrics m = run_prequential(sea_chunks(4, 100, 5), 2, {}, cfg);
  const auto p = dir.file("m.csv");
  write_metrics(m, p);
  const auto lines = read_lines(p);
  ASSERT_EQ(lines.size(), 1 + m.chunks.size() + 1);
  EXPECT_EQ(lines.front(),
            "chunk_index,target_acc,source_acc,hidden_nodes,agmm_source_M,agmm_target_M,"
            "cumulative_seconds");
  for (const auto& line : lines) EXPECT_EQ(field_count(line), 7u) << line;
  EXPECT_EQ(lines.back().rfind("summary,", 0), 0u);
  for (std::size_t k = 1; k + 1 < lines.size(); ++k) {
    std::stringstream row(lines[k]);
    std::string cell;
    std::getline(row, cell, ',');
    std::getline(row, cell, ',');
    const double acc = std::stod(cell);
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);
  }
}

TEST(WriteMetrics, EmptyRunHasSummaryOnly) {
  TempDir dir;
  write_metrics(RunMetrics{}, dir.file("e.csv"), TimingColumn::kOmitted);
  const auto lines = read_lines(dir.file("e.csv"));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[1], "summary,0,0,0,0,0,0");
}

TEST(WriteMetrics, OmittedTimingIsReproducible) {
  TempDir dir;
  TrainerConfig cfg;
  cfg.seed = 8;
  write_metrics(run_prequential(sea_chunks(4, 100, 6), 2, {}, cfg), dir.file("a.csv"),
                TimingColumn::kOmitted);
  write_metrics(run_prequential(sea_chunks(4, 100, 6), 2, {}, cfg), dir.file("b.csv"),
                TimingColumn::kOmitted);
  EXPECT_EQ(read_lines(dir.file("a.csv")), read_lines(dir.file("b.csv")));
}

TEST(WriteMetrics, UnwritablePath) {
  EXPECT_THROW(write_metrics(RunMetrics{}, "/nonexistent-dir/m.csv"), std::runtime_error);
}

TEST(Summary, JsonFields) {
  TrainerConfig cfg;
  cfg.disable_kl = true;
  RunMetrics m;
  m.trainer = cfg;
  const auto j = m.summary_json();
  EXPECT_TRUE(j.at("kl_disabled").get<bool>());
  EXPECT_FALSE(j.at("structural_disabled").get<bool>());
  for (const char* key : {"target_accuracy", "source_accuracy", "hidden_nodes",
                          "agmm_source_components", "agmm_target_components",
                          "training_seconds"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(Sea, LabelsFollowThresholdSchedule) {
  const SyntheticData d = generate_sea(40000, 7);
  const double thresholds[] = {4.0, 7.0, 4.0, 7.0};
  // P(f1 + f2 < t) for f1, f2 uniform on [0, 10] and t <= 10 is t^2 / 200.
  for (std::size_t seg = 0; seg < 4; ++seg) {
    const double theta = thresholds[seg];
    std::size_t positives = 0;
    for (std::size_t i = seg * 10000; i < (seg + 1) * 10000; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const bool expected = d.features(r, 0) + d.features(r, 1) < theta;
      ASSERT_EQ(d.labels[i], expected ? 1u : 0u);
      positives += d.labels[i];
    }
    const double rate = static_cast<double>(positives) / 10000.0;
    EXPECT_NEAR(rate, theta * theta / 200.0, 0.015) << "segment " << seg;
  }
  EXPECT_GE(d.features.minCoeff(), 0.0);
  EXPECT_LE(d.features.maxCoeff(), 10.0);
}

TEST(Sea, FormulaExamples) {
  const SyntheticData d = generate_sea(4, 1, {4.0, 4.0, 4.0, 4.0});
  for (Eigen::Index r = 0; r < 4; ++r) {
    EXPECT_EQ(d.labels[static_cast<std::size_t>(r)], d.features(r, 0) + d.features(r, 1) < 4.0);
  }
  EXPECT_THROW(generate_sea(10, 1), std::invalid_argument);
  EXPECT_THROW(generate_sea(0, 1), std::invalid_argument);
}

TEST(Sea, SeedDeterministic) {
  EXPECT_EQ(generate_sea(400, 3).features, generate_sea(400, 3).features);
  EXPECT_NE(generate_sea(400, 3).features, generate_sea(400, 4).features);
}

TEST(Hyperplane, ShapeBalanceAndDeterminism) {
  const SyntheticData d = generate_hyperplane(20000, 5);
  EXPECT_EQ(d.features.cols(), 4);
  EXPECT_GE(d.features.minCoeff(), 0.0);
  EXPECT_LE(d.features.maxCoeff(), 1.0);
  const double positives =
      static_cast<double>(std::count(d.labels.begin(), d.labels.end(), 1u)) / 20000.0;
  EXPECT_NEAR(positives, 0.5, 0.1);
  EXPECT_EQ(d.labels, generate_hyperplane(20000, 5).labels);
  EXPECT_THROW(generate_hyperplane(10, 1, 4, 0.7, 0.2), std::invalid_argument);
  EXPECT_THROW(generate_hyperplane(0, 1), std::invalid_argument);
}

TEST(Hyperplane, StationaryOutsideTransition) {
  // Outside the mixing window the concept is a fixed half-space, so a
  // least-squares linear fit on one half predicts the other half closely.
  const SyntheticData d = generate_hyperplane(10000, 6);
  auto fit_accuracy = [&](std::size_t begin, std::size_t end) {
    const auto n = static_cast<Eigen::Index>(end - begin);
    Matrix a(n, 5);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(begin) + i;
      a.row(i) << d.features.row(r), 1.0;
      y[i] = d.labels[static_cast<std::size_t>(r)] ? 1.0 : -1.0;
    }
    const Vector w = a.colPivHouseholderQr().solve(y);
    const Vector pred = a * w;
    std::size_t ok = 0;
    for (Eigen::Index i = 0; i < n; ++i) ok += (pred[i] > 0) == (y[i] > 0);
    return static_cast<double>(ok) / static_cast<double>(n);
  };
  EXPECT_GT(fit_accuracy(0, 4000), 0.9);
  EXPECT_GT(fit_accuracy(6000, 10000), 0.9);
}

TEST(SyntheticCsv, RoundTripThroughLoader) {
  TempDir dir;
  const SyntheticData d = generate_sea(400, 9);
  write_csv(d, dir.file("sea.csv"));
  const Dataset ds = load_csv(dir.file("sea.csv"), "label", 100);
  ASSERT_EQ(ds.chunks.size(), 4u);
  EXPECT_EQ(ds.feature_names, d.feature_names);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(ds.chunks[k].features, d.features.middleRows(static_cast<Eigen::Index>(k * 100), 100));
  }
}

}  // namespace
}  // namespace atl
