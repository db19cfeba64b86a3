#include "atl/cli.hpp"

#include <algorithm>
#include <exception>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "atl/stream.hpp"
#include "atl/synthetic.hpp"

namespace atl {

namespace {

struct RunOptions {
  std::string dataset;
  std::string label_column = "label";
  std::size_t chunk_size = 1000;
  std::size_t epochs = 1;
  double lr = 0.01;
  double momentum = 0.95;
  double noise_fraction = 0.1;
  std::uint64_t seed = 0;
  std::string ablation = "none";
  std::string out = "metrics.csv";
  double source_fraction = 0.5;
  bool no_timing = false;
};

struct GenerateOptions {
  std::string kind = "sea";
  std::size_t rows = 100000;
  std::uint64_t seed = 0;
  std::size_t dims = 4;
  std::string out;
};

TrainerConfig trainer_config(const RunOptions& o) {
  TrainerConfig c;
  c.learning_rate = o.lr;
  c.momentum = o.momentum;
  c.epochs_per_batch = o.epochs;
  c.noise_fraction = o.noise_fraction;
  c.seed = o.seed;
  c.disable_kl = o.ablation == "A";
  c.disable_agmm_ns = o.ablation == "B";
  c.disable_structural = o.ablation == "C";
  return c;
}

int do_run(const RunOptions& o, std::ostream& out) {
  const TrainerConfig trainer = trainer_config(o);
  trainer.validate();
  const Dataset ds = load_csv(o.dataset, o.label_column, o.chunk_size);
  const RunMetrics metrics = run_prequential(ds, HarnessConfig{o.source_fraction}, trainer);
  write_metrics(metrics, o.out,
                o.no_timing ? TimingColumn::kOmitted : TimingColumn::kWallClock);
  nlohmann::json summary = metrics.summary_json();
  summary["dataset"] = o.dataset;
  summary["ablation"] = o.ablation;
  summary["metrics_path"] = o.out;
  out << summary.dump() << '\n';
  return 0;
}

int do_generate(const GenerateOptions& o, std::ostream& out) {
  const SyntheticData data = o.kind == "sea" ? generate_sea(o.rows, o.seed)
                                             : generate_hyperplane(o.rows, o.seed, o.dims);
  write_csv(data, o.out);
  out << nlohmann::json{{"kind", o.kind}, {"rows", o.rows}, {"seed", o.seed}, {"out", o.out}}
             .dump()
      << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Online multistream transfer learner with a self-evolving network"};
  app.name("atl");
  app.require_subcommand(0, 1);

  RunOptions run;
  app.add_option("--dataset", run.dataset, "Input CSV, one row per sample");
  app.add_option("--label-column", run.label_column, "Label column name (or index without header)")
      ->capture_default_str();
  app.add_option("--chunk-size", run.chunk_size, "Rows per data chunk")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--epochs", run.epochs, "Epochs per chunk (>= 1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--lr", run.lr, "SGD learning rate (> 0)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--momentum", run.momentum, "SGD momentum in [0, 1)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--noise-fraction", run.noise_fraction,
                 "Fraction of inputs masked by the denoising step, in [0, 1)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--seed", run.seed, "Random seed")->capture_default_str();
  app.add_option("--ablation", run.ablation,
                 "none | A (no KL) | B (no mixture model) | C (frozen structure)")
      ->check(CLI::IsMember({"none", "A", "B", "C"}))
      ->capture_default_str();
  app.add_option("--out", run.out, "Metrics CSV output path")->capture_default_str();
  app.add_option("--source-fraction", run.source_fraction,
                 "Share of each chunk drawn into the source stream, in (0, 1)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_flag("--no-timing", run.no_timing,
               "Write zeros in the seconds column so repeated runs are byte-identical");

  GenerateOptions gen;
  CLI::App* generate = app.add_subcommand("generate", "Write a synthetic drift stream to CSV");
  generate->add_option("--kind", gen.kind, "sea | hyperplane")
      ->check(CLI::IsMember({"sea", "hyperplane"}))
      ->capture_default_str();
  generate->add_option("--rows", gen.rows, "Number of rows")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  generate->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  generate->add_option("--dims", gen.dims, "Hyperplane dimensionality")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  generate->add_option("--out", gen.out, "Output CSV path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (generate->parsed()) return do_generate(gen, out);
    if (run.dataset.empty()) {
      err << "error: --dataset is required\n" << app.help();
      return 2;
    }
    return do_run(run, out);
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace atl
