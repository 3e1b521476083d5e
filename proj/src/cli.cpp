// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cacti/benchmark.hpp"
#include "cacti/checkpoint.hpp"
#include "cacti/context.hpp"
#include "cacti/error.hpp"
#include "cacti/imputation.hpp"
#include "cacti/metrics.hpp"
#include "cacti/missingness.hpp"
#include "cacti/training.hpp"
#include "json.hpp"

namespace cacti {
namespace {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kCheckpoint: return 3;
    case ErrorKind::kIo:
    case ErrorKind::kNumeric: return 1;
    default: return 2;
  }
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvOptions csv_options(const std::string& schema_path) {
  CsvOptions o;
  if (!schema_path.empty()) o.hint = load_schema_hint(schema_path);
  return o;
}

Table with_mask(Table t, const std::string& mask_path) {
  if (mask_path.empty()) return t;
  return apply_mask(t, load_mask_csv(mask_path, t.schema));
}

// Column names from the header line only, so a checkpoint mismatch is
// reported as such rather than as a parse failure further in.
std::vector<std::string> csv_header(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> names;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) {
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') {
      cell = cell.substr(1, cell.size() - 2);
    }
    names.push_back(cell);
  }
  return names;
}

struct SimulateArgs {
  std::string data, schema, out, mechanism = "mcar";
  double p_miss = 0.3, p_obs = 0.3;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const Table t = load_csv(a.data, csv_options(a.schema));
  SimConfig cfg{parse_mechanism(a.mechanism), a.p_miss, a.p_obs, a.seed};
  const bool complete = std::all_of(t.observed.flat().begin(), t.observed.flat().end(),
                                    [](auto v) { return v != 0; });
  if (cfg.mechanism != Mechanism::kMCAR) {
    require(complete, ErrorKind::kSimulator,
            "MAR/MNAR simulation needs a fully observed table");
  }
  SimResult sim = simulate(t.values, cfg);
  // Cells already missing in the data stay missing.
  for (std::size_t i = 0; i < sim.mask.size(); ++i) {
    sim.mask.flat()[i] = sim.mask.flat()[i] & t.observed.flat()[i];
  }
  write_mask_csv(fs::path(a.out), sim.mask, t.schema);
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (auto c : sim.observed_columns) cols.push_back({{"index", c}, {"name", t.schema[c].name}});
  const nlohmann::ordered_json side{
      {"mechanism", std::string(to_string(cfg.mechanism))},
      {"p_miss", cfg.p_miss},
      {"p_obs", cfg.p_obs},
      {"seed", cfg.seed},
      {"rows", t.rows()},
      {"cols", t.cols()},
      {"observed_columns", cols},
      {"realized_rate", missing_rate(sim.mask)},
      {"maskable_rate", sim.maskable_rate},
  };
  std::ofstream(a.out + ".json") << side.dump(2) << '\n';
  out << "wrote " << a.out << " (missing rate " << format_number(missing_rate(sim.mask))
      << ") and " << a.out << ".json\n";
  return 0;
}

struct TrainArgs {
  std::string data, mask, context, config, out, trace, schema, dump_batch;
  bool no_context = false;
  bool allow_missing_context = false;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy, loss_mode;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig tc;
  ModelConfig mc;
  if (!a.config.empty()) apply_config_json(read_text(a.config), tc, &mc);
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.seed) tc.seed = *a.seed;
  if (a.strategy) tc.mask_strategy = parse_mask_strategy(*a.strategy);
  if (a.loss_mode) tc.loss_mode = parse_loss_mode(*a.loss_mode);
  tc.validate();

  const Table table = with_mask(load_csv(a.data, csv_options(a.schema)), a.mask);
  mc.features = table.cols();
  std::optional<Matrix<double>> ctx;
  if (!a.context.empty() && !a.no_context) {
    ctx = align_to_schema(load_context(a.context), table.schema, a.allow_missing_context);
    mc.ctx_raw_dim = ctx->cols();
  }
  mc.validate();
  const ScalerState scaler = fit_scaler(table);
  const Table scaled = apply_scaler(table, scaler);

  TrainHooks hooks;
  if (!a.quiet) {
    hooks.on_epoch = [&out, &tc](const EpochStats& s) {
      if (s.epoch == 1 || s.epoch % 10 == 0 || s.epoch == tc.epochs) {
        out << "epoch " << s.epoch << " loss " << format_number(s.mean_loss) << " lr "
            << format_number(s.lr) << '\n';
      }
    };
  }
  if (!a.dump_batch.empty()) {
    hooks.on_first_batch = [&a](const MaskedBatch& b) {
      std::ofstream(a.dump_batch) << masked_batch_json(b) << '\n';
    };
  }
  TrainResult result =
      train(scaled.values, scaled.observed, ctx ? &*ctx : nullptr, mc, tc, hooks);
  save_checkpoint(fs::path(a.out), Checkpoint{scaler, table.schema, std::move(result.params)});
  const std::string trace = a.trace.empty() ? a.out + ".trace.csv" : a.trace;
  write_loss_trace(trace, result.trace);
  out << "wrote " << a.out << " and " << trace << '\n';
  return 0;
}

struct ImputeArgs {
  std::string data, mask, checkpoint, context, out;
  std::size_t batch_size = 256;
  bool round_categorical = false;
  bool allow_missing_context = false;
};

int cmd_impute(const ImputeArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(fs::path(a.checkpoint));
  const auto header = csv_header(a.data);
  std::vector<std::string> want;
  for (const auto& c : ckpt.schema) want.push_back(c.name);
  if (header != want) {
    std::string joined;
    for (const auto& n : want) joined += (joined.empty() ? "" : ",") + n;
    fail(ErrorKind::kCheckpoint, "checkpoint schema mismatch (expected columns " + joined + ")");
  }
  CsvOptions opts;
  opts.fixed_schema = ckpt.schema;
  const Table table = with_mask(load_csv(a.data, opts), a.mask);
  check_schema(ckpt, table.schema);
  std::optional<Matrix<double>> ctx;
  if (ckpt.config().has_context()) {
    require(!a.context.empty(), ErrorKind::kConfig,
            "checkpoint was trained with context; pass --context");
    ctx = align_to_schema(load_context(a.context), table.schema, a.allow_missing_context);
    require(ctx->cols() == ckpt.config().ctx_raw_dim, ErrorKind::kConfig,
            "context dim " + std::to_string(ctx->cols()) + " differs from checkpoint's " +
                std::to_string(ckpt.config().ctx_raw_dim));
  }
  ImputeOptions opt{a.batch_size, a.round_categorical};
  const Table result = impute(table, ckpt, ctx ? &*ctx : nullptr, opt);
  write_csv(fs::path(a.out), result, a.round_categorical);
  out << "wrote " << a.out << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string truth, imputed, mask, checkpoint, schema, json_out, scale = "standardized";
  bool json = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const Table truth = load_csv(a.truth, csv_options(a.schema));
  CsvOptions iopts;
  iopts.fixed_schema = truth.schema;
  iopts.numeric_categorical_codes = true;
  Table imputed;
  try {
    imputed = load_csv(a.imputed, iopts);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kSchema) fail(ErrorKind::kShape, e.what());
    throw;
  }
  require(imputed.rows() == truth.rows(), ErrorKind::kShape,
          "imputed has " + std::to_string(imputed.rows()) + " rows, truth has " +
              std::to_string(truth.rows()));
  const Mask mask = load_mask_csv(a.mask, truth.schema);
  require(mask.rows() == truth.rows(), ErrorKind::kShape, "mask row count differs from truth");
  // Scored cells: hidden by the mask, present in the truth.
  Mask eval(mask.rows(), mask.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    eval.flat()[i] = mask.flat()[i] == 0 && truth.observed.flat()[i] != 0;
  }
  std::optional<Checkpoint> ckpt;
  if (!a.checkpoint.empty()) ckpt = load_checkpoint(fs::path(a.checkpoint));
  const MetricsReport rep = evaluate(truth, imputed.values, eval, parse_rmse_scale(a.scale),
                                     ckpt ? &ckpt->scaler : nullptr);
  if (!a.json_out.empty()) std::ofstream(a.json_out) << report_to_json(rep) << '\n';
  out << (a.json ? report_to_json(rep) + "\n" : report_to_text(rep));
  return 0;
}

struct BenchmarkArgs {
  std::string config, out;
  std::size_t workers = 0;
};

int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out) {
  const BenchmarkConfig cfg =
      parse_benchmark_config(read_text(a.config), fs::path(a.config).parent_path().string());
  const BenchmarkReport rep = run_benchmark(cfg, a.workers);
  const std::string json = benchmark_to_json(cfg, rep);
  if (!a.out.empty()) {
    std::ofstream(a.out) << json << '\n';
  }
  out << benchmark_to_text(rep);
  if (a.out.empty()) out << json << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cacti: context-aware masked-autoencoder imputation for tabular data"};
  app.require_subcommand(0, 1);
  bool version = false;
  app.add_flag("--version", version, "Print version and file-format versions");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Simulate a missingness mask for a table");
  sim->add_option("--data", sa.data, "Input CSV")->required();
  sim->add_option("--out", sa.out, "Output mask CSV (a .json sidecar is written next to it)")
      ->required();
  sim->add_option("--mechanism", sa.mechanism, "mcar | mar | mnar")->capture_default_str();
  sim->add_option("--p-miss", sa.p_miss, "Target missing rate")->capture_default_str();
  sim->add_option("--p-obs", sa.p_obs, "Fraction of always-observed columns (MAR/MNAR)")
      ->capture_default_str();
  sim->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  sim->add_option("--schema", sa.schema, "JSON column-kind hints");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->add_option("--data", ta.data, "Training CSV")->required();
  tr->add_option("--mask", ta.mask, "Mask CSV hiding extra cells (1 = keep)");
  tr->add_option("--context", ta.context, "Column context embeddings JSON");
  tr->add_flag("--no-context", ta.no_context, "Train the context-free variant");
  tr->add_option("--config", ta.config, "Training config JSON");
  tr->add_option("--out", ta.out, "Checkpoint path")->required();
  tr->add_option("--trace", ta.trace, "Loss trace CSV (default <out>.trace.csv)");
  tr->add_option("--schema", ta.schema, "JSON column-kind hints");
  tr->add_option("--epochs", ta.epochs, "Override epochs");
  tr->add_option("--batch-size", ta.batch_size, "Override batch size");
  tr->add_option("--seed", ta.seed, "Override seed");
  tr->add_option("--mask-strategy", ta.strategy, "mtcm | naive_cm | random");
  tr->add_option("--loss-mode", ta.loss_mode, "both | observed | masked");
  tr->add_option("--dump-first-batch", ta.dump_batch, "Write the first masked batch as JSON");
  tr->add_flag("--allow-missing-context", ta.allow_missing_context,
               "Use zero vectors for columns absent from the context file");
  tr->add_flag("--quiet", ta.quiet, "No per-epoch progress");

  ImputeArgs ia;
  auto* im = app.add_subcommand("impute", "Fill missing cells with a trained model");
  im->add_option("--data", ia.data, "CSV to impute")->required();
  im->add_option("--mask", ia.mask, "Mask CSV hiding extra cells (1 = keep)");
  im->add_option("--checkpoint", ia.checkpoint, "Checkpoint from `train`")->required();
  im->add_option("--context", ia.context, "Context embeddings JSON (context models)");
  im->add_option("--out", ia.out, "Output CSV")->required();
  im->add_option("--batch-size", ia.batch_size, "Rows per forward pass")->capture_default_str();
  im->add_flag("--allow-missing-context", ia.allow_missing_context,
               "Use zero vectors for columns absent from the context file");
  im->add_flag("--round-categorical", ia.round_categorical,
               "Snap categorical imputations to labels");

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Score imputations at masked cells");
  ev->add_option("--truth", ea.truth, "Ground-truth CSV")->required();
  ev->add_option("--imputed", ea.imputed, "Imputed CSV")->required();
  ev->add_option("--mask", ea.mask, "Mask CSV; cells with 0 are scored")->required();
  ev->add_option("--checkpoint", ea.checkpoint, "Checkpoint whose scaler enables minmax RMSE");
  ev->add_option("--schema", ea.schema, "JSON column-kind hints");
  ev->add_option("--metrics-scale", ea.scale, "standardized | original | minmax")
      ->capture_default_str();
  ev->add_option("--json-out", ea.json_out, "Also write the JSON report here");
  ev->add_flag("--json", ea.json, "Print JSON instead of a text table");

  BenchmarkArgs ba;
  auto* be = app.add_subcommand("benchmark", "Run a benchmark grid from a JSON config");
  be->add_option("--config", ba.config, "Benchmark config JSON")->required();
  be->add_option("--out", ba.out, "Results JSON");
  be->add_option("--workers", ba.workers, "Concurrent grid cells (default CACTI_THREADS or 1)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return 2;
  }
  if (version) {
    out << "cacti " << kVersion << " (checkpoint format " << kCheckpointVersion << ")\n";
    return 0;
  }
  try {
    if (*sim) return cmd_simulate(sa, out);
    if (*tr) return cmd_train(ta, out);
    if (*im) return cmd_impute(ia, out);
    if (*ev) return cmd_evaluate(ea, out);
    if (*be) return cmd_benchmark(ba, out);
  } catch (const Error& e) {
    err << "error: " << kind_name(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return 1;
  }
  out << app.help();
  return 2;
}

}  // namespace cacti
