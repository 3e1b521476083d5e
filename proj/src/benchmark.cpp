// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include "cacti/benchmark.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "cacti/checkpoint.hpp"
#include "cacti/context.hpp"
#include "cacti/error.hpp"
#include "cacti/imputation.hpp"
#include "cacti/kernels.hpp"
#include "cacti/rng.hpp"
#include "cacti/synthetic.hpp"
#include "json.hpp"

namespace cacti {
namespace {

struct MethodSpec {
  bool baseline = false;
  MaskStrategy strategy = MaskStrategy::kMtcm;
  bool context = false;
};

MethodSpec method_spec(const std::string& name) {
  if (name == "cacti") return {false, MaskStrategy::kMtcm, true};
  if (name == "cmae") return {false, MaskStrategy::kMtcm, false};
  if (name == "rmae") return {false, MaskStrategy::kRandom, false};
  if (name == "rmae_ctx") return {false, MaskStrategy::kRandom, true};
  if (name == "cacti_naive") return {false, MaskStrategy::kNaiveCm, true};
  if (name == "mean") return {true, MaskStrategy::kMtcm, false};
  fail(ErrorKind::kConfig, "unknown method '" + name + "'");
}

struct Dataset {
  Table table;
  std::optional<Matrix<double>> context;
};

Dataset load_dataset(const BenchmarkConfig& cfg) {
  Dataset ds;
  if (cfg.data) {
    CsvOptions opts;
    if (cfg.schema_hint) opts.hint = load_schema_hint(*cfg.schema_hint);
    ds.table = load_csv(*cfg.data, opts);
    for (auto v : ds.table.observed.flat()) {
      require(v != 0, ErrorKind::kInvalidInput, "benchmark data must be fully observed");
    }
    if (cfg.context) ds.context = align_to_schema(load_context(*cfg.context), ds.table.schema);
  } else {
    const auto& s = cfg.synthetic;
    ds.table = gaussian_table(s.rows, s.cols, s.rho, derive_seed(cfg.root_seed, stream_id("data")));
    Rng rng(derive_seed(cfg.root_seed, stream_id("context")));
    Matrix<double> ctx(s.cols, s.context_dim);
    for (auto& v : ctx.flat()) v = rng.normal();
    ds.context = std::move(ctx);
  }
  return ds;
}

struct Cell {
  Mechanism mechanism;
  double p_miss;
  std::size_t seed_index;
};

std::uint64_t cell_seed(std::uint64_t root, const Cell& c) {
  std::uint64_t s = derive_seed(root, stream_id(to_string(c.mechanism)));
  s = derive_seed(s, std::bit_cast<std::uint64_t>(c.p_miss));
  return derive_seed(s, c.seed_index);
}

Mask invert(const Mask& m) {
  Mask out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.flat()[i] = m.flat()[i] == 0;
  return out;
}

std::vector<std::size_t> rows_with_data(const Table& t, bool want) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto obs = t.observed.row(r);
    const bool any = std::any_of(obs.begin(), obs.end(), [](auto v) { return v != 0; });
    if (any == want) rows.push_back(r);
  }
  return rows;
}

// Missing cells of `t` take the column means.
Table fill_means(Table t, const std::vector<double>& means) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (t.is_observed(r, c)) continue;
      t.values(r, c) = means[c];
      t.observed(r, c) = 1;
    }
  }
  return t;
}

// Model imputation for rows with at least one visible feature, mean fill for
// the rest.
Table impute_rows(const Table& t, const Checkpoint& ckpt, const Matrix<double>* ctx,
                  const std::vector<double>& means) {
  const auto empty = rows_with_data(t, false);
  if (empty.empty()) return impute(t, ckpt, ctx);
  const auto keep = rows_with_data(t, true);
  Table out = fill_means(t, means);
  if (keep.empty()) return out;
  const Table part = impute(select_rows(t, keep), ckpt, ctx);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    for (std::size_t c = 0; c < t.cols(); ++c) out.values(keep[i], c) = part.values(i, c);
  }
  return out;
}

std::vector<RunResult> run_cell(const BenchmarkConfig& cfg, const Dataset& ds, const Cell& cell) {
  const std::uint64_t seed = cell_seed(cfg.root_seed, cell);
  auto [train_full, test_full] =
      split_train_test(ds.table, cfg.test_fraction, derive_seed(seed, stream_id("split")));
  SimConfig sim{cell.mechanism, cell.p_miss, cfg.p_obs, derive_seed(seed, stream_id("sim-train"))};
  const Mask train_mask = simulate(train_full.values, sim).mask;
  sim.seed = derive_seed(seed, stream_id("sim-test"));
  const Mask test_mask = test_full.rows() > 0 ? simulate(test_full.values, sim).mask : Mask();
  const Table train_in = apply_mask(train_full, train_mask);
  const Table test_in = test_full.rows() > 0 ? apply_mask(test_full, test_mask) : test_full;
  const ScalerState scaler = fit_scaler(train_in);
  std::vector<double> train_means(train_in.cols(), 0.0);
  for (std::size_t c = 0; c < train_in.cols(); ++c) {
    std::size_t n = 0;
    for (std::size_t r = 0; r < train_in.rows(); ++r) {
      if (!train_in.is_observed(r, c)) continue;
      train_means[c] += train_in.values(r, c);
      ++n;
    }
    train_means[c] /= static_cast<double>(std::max<std::size_t>(n, 1));
  }

  std::vector<RunResult> out;
  for (const auto& method : cfg.methods) {
    const MethodSpec spec = method_spec(method);
    std::array<Table, 2> imputed;
    if (spec.baseline) {
      // Test cells take the training means, like a fitted model would.
      imputed[0] = fill_means(train_in, train_means);
      imputed[1] = fill_means(test_in, train_means);
    } else {
      ModelConfig mc = cfg.model;
      mc.features = ds.table.cols();
      const Matrix<double>* ctx = nullptr;
      if (spec.context) {
        require(ds.context.has_value(), ErrorKind::kConfig,
                "method '" + method + "' needs a context file");
        ctx = &*ds.context;
        mc.ctx_raw_dim = ctx->cols();
      } else {
        mc.ctx_raw_dim = 0;
      }
      TrainConfig tc = cfg.train;
      tc.mask_strategy = spec.strategy;
      tc.seed = derive_seed(seed, stream_id("train"));
      const Table scaled =
          apply_scaler(select_rows(train_in, rows_with_data(train_in, true)), scaler);
      TrainResult tr = train(scaled.values, scaled.observed, ctx, mc, tc);
      const Checkpoint ckpt{scaler, ds.table.schema, std::move(tr.params)};
      imputed[0] = impute_rows(train_in, ckpt, ctx, train_means);
      imputed[1] = impute_rows(test_in, ckpt, ctx, train_means);
    }
    const std::array<const Table*, 2> truth{&train_full, &test_full};
    const std::array<const Mask*, 2> masks{&train_mask, &test_mask};
    const std::array<std::size_t, 2> fallback{rows_with_data(train_in, false).size(),
                                              rows_with_data(test_in, false).size()};
    for (std::size_t s = 0; s < 2; ++s) {
      if (truth[s]->rows() == 0) continue;
      const MetricsReport rep =
          evaluate(*truth[s], imputed[s].values, invert(*masks[s]), cfg.scale, &scaler);
      out.push_back({cell.mechanism, cell.p_miss, method, cell.seed_index, seed,
                     s == 0 ? "train" : "test", rep.r2_mean, rep.rmse, rep.wd_mean, rep.n_eval, fallback[s]});
    }
  }
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

std::size_t workers_from_env() {
  const char* env = std::getenv("CACTI_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  require(end != env && *end == '\0' && v >= 1, ErrorKind::kConfig,
          "CACTI_THREADS must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

BenchmarkConfig parse_benchmark_config(std::string_view json_text, const std::string& base_dir) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("benchmark config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorKind::kConfig, "benchmark config must be a JSON object");
  BenchmarkConfig cfg;
  auto path = [&](const json& v) {
    std::filesystem::path p = v.get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    return p.string();
  };
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "data") cfg.data = path(v);
      else if (k == "schema") cfg.schema_hint = path(v);
      else if (k == "context") cfg.context = path(v);
      else if (k == "synthetic") {
        for (auto s = v.begin(); s != v.end(); ++s) {
          if (s.key() == "rows") cfg.synthetic.rows = s->get<std::size_t>();
          else if (s.key() == "cols") cfg.synthetic.cols = s->get<std::size_t>();
          else if (s.key() == "rho") cfg.synthetic.rho = s->get<double>();
          else if (s.key() == "context_dim") cfg.synthetic.context_dim = s->get<std::size_t>();
          else fail(ErrorKind::kConfig, "unknown synthetic key '" + s.key() + "'");
        }
      } else if (k == "mechanisms") {
        cfg.mechanisms.clear();
        for (const auto& m : v) cfg.mechanisms.push_back(parse_mechanism(m.get<std::string>()));
      } else if (k == "p_miss") cfg.p_miss = v.get<std::vector<double>>();
      else if (k == "p_obs") cfg.p_obs = v.get<double>();
      else if (k == "methods") cfg.methods = v.get<std::vector<std::string>>();
      else if (k == "preset") {
        require(v.get<std::string>() == "ablation", ErrorKind::kConfig,
                "unknown preset '" + v.get<std::string>() + "'");
        cfg.methods = {"rmae", "rmae_ctx", "cmae", "cacti"};
      } else if (k == "seeds") cfg.seeds = v.get<std::size_t>();
      else if (k == "root_seed") cfg.root_seed = v.get<std::uint64_t>();
      else if (k == "test_fraction") cfg.test_fraction = v.get<double>();
      else if (k == "metrics_scale") cfg.scale = parse_rmse_scale(v.get<std::string>());
      else if (k == "train") apply_config_json(v.dump(), cfg.train, &cfg.model);
      else fail(ErrorKind::kConfig, "unknown benchmark key '" + k + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("bad benchmark value: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    fail(ErrorKind::kConfig, e.what());
  }
  require(cfg.seeds >= 1, ErrorKind::kConfig, "seeds must be >= 1");
  require(!cfg.methods.empty() && !cfg.mechanisms.empty() && !cfg.p_miss.empty(),
          ErrorKind::kConfig, "methods, mechanisms and p_miss must be non-empty");
  for (const auto& m : cfg.methods) method_spec(m);
  require(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0, ErrorKind::kConfig,
          "test_fraction must lie in [0, 1)");
  return cfg;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, std::size_t workers) {
  if (workers == 0) workers = workers_from_env();
  const Dataset ds = load_dataset(cfg);
  std::vector<Cell> cells;
  for (auto mech : cfg.mechanisms) {
    for (double p : cfg.p_miss) {
      for (std::size_t s = 0; s < cfg.seeds; ++s) cells.push_back({mech, p, s});
    }
  }
  std::vector<std::vector<RunResult>> results(cells.size());
  workers = std::min(workers, cells.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) results[i] = run_cell(cfg, ds, cells[i]);
  } else {
    // Each worker owns whole cells; kernels run single-threaded inside.
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(cells.size());
    std::vector<std::thread> pool;
    const int saved = kernels::max_threads();
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        kernels::set_threads(1);
        for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
          try {
            results[i] = run_cell(cfg, ds, cells[i]);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    kernels::set_threads(saved);
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  BenchmarkReport rep;
  for (auto& r : results) rep.runs.insert(rep.runs.end(), r.begin(), r.end());

  std::vector<std::string> keys;
  std::map<std::string, std::vector<const RunResult*>> groups;
  for (const auto& r : rep.runs) {
    std::ostringstream key;
    key << to_string(r.mechanism) << '|' << format_number(r.p_miss) << '|' << r.method << '|'
        << r.split;
    auto [it, fresh] = groups.try_emplace(key.str());
    if (fresh) keys.push_back(key.str());
    it->second.push_back(&r);
  }
  for (const auto& key : keys) {
    const auto& g = groups[key];
    AggregateRow a;
    a.mechanism = g.front()->mechanism;
    a.p_miss = g.front()->p_miss;
    a.method = g.front()->method;
    a.split = g.front()->split;
    a.runs = g.size();
    std::vector<double> r2, rmse, wd;
    for (const auto* r : g) {
      r2.push_back(r->r2);
      rmse.push_back(r->rmse);
      wd.push_back(r->wd);
    }
    std::tie(a.r2_mean, a.r2_std) = mean_std(r2);
    std::tie(a.rmse_mean, a.rmse_std) = mean_std(rmse);
    std::tie(a.wd_mean, a.wd_std) = mean_std(wd);
    rep.aggregates.push_back(a);
  }
  return rep;
}

std::string benchmark_to_json(const BenchmarkConfig& cfg, const BenchmarkReport& rep) {
  using oj = nlohmann::ordered_json;
  oj mechs = oj::array();
  for (auto m : cfg.mechanisms) mechs.push_back(std::string(to_string(m)));
  oj config{
      {"data", cfg.data ? oj(*cfg.data) : oj(nullptr)},
      {"synthetic",
       cfg.data ? oj(nullptr)
                : oj{{"rows", cfg.synthetic.rows},
                     {"cols", cfg.synthetic.cols},
                     {"rho", cfg.synthetic.rho},
                     {"context_dim", cfg.synthetic.context_dim}}},
      {"mechanisms", mechs},
      {"p_miss", cfg.p_miss},
      {"p_obs", cfg.p_obs},
      {"methods", cfg.methods},
      {"seeds", cfg.seeds},
      {"root_seed", cfg.root_seed},
      {"test_fraction", cfg.test_fraction},
      {"metrics_scale", std::string(to_string(cfg.scale))},
      {"model",
       {{"embed_dim", cfg.model.embed_dim},
        {"ctx_fraction", cfg.model.ctx_fraction},
        {"enc_depth", cfg.model.enc_depth},
        {"dec_depth", cfg.model.dec_depth},
        {"heads", cfg.model.heads},
        {"mlp_ratio", cfg.model.mlp_ratio}}},
      {"train", oj::parse(to_json(cfg.train))},
  };
  oj runs = oj::array();
  for (const auto& r : rep.runs) {
    runs.push_back({{"mechanism", std::string(to_string(r.mechanism))},
                    {"p_miss", r.p_miss},
                    {"method", r.method},
                    {"seed_index", r.seed_index},
                    {"run_seed", r.run_seed},
                    {"split", r.split},
                    {"r2", r.r2},
                    {"rmse", r.rmse},
                    {"wd", r.wd},
                    {"n_eval", r.n_eval},
                    {"fallback_rows", r.fallback_rows}});
  }
  oj aggs = oj::array();
  for (const auto& a : rep.aggregates) {
    aggs.push_back({{"mechanism", std::string(to_string(a.mechanism))},
                    {"p_miss", a.p_miss},
                    {"method", a.method},
                    {"split", a.split},
                    {"runs", a.runs},
                    {"r2_mean", a.r2_mean},
                    {"r2_std", a.r2_std},
                    {"rmse_mean", a.rmse_mean},
                    {"rmse_std", a.rmse_std},
                    {"wd_mean", a.wd_mean},
                    {"wd_std", a.wd_std}});
  }
  return oj{{"config", config}, {"runs", runs}, {"aggregates", aggs}}.dump(2);
}

std::string benchmark_to_text(const BenchmarkReport& rep) {
  std::ostringstream out;
  out << std::left << std::setw(6) << "mech" << std::setw(8) << "p_miss" << std::setw(10)
      << "method" << std::setw(7) << "split" << std::right << std::setw(5) << "runs"
      << std::setw(18) << "r2" << std::setw(18) << "rmse" << std::setw(18) << "wd" << '\n';
  out << std::fixed << std::setprecision(3);
  auto pm = [&out](double m, double s) {
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(3) << m << " ± " << s;
    out << std::setw(19) << cell.str();
  };
  for (const auto& a : rep.aggregates) {
    out << std::left << std::setw(6) << to_string(a.mechanism) << std::setw(8)
        << format_number(a.p_miss) << std::setw(10) << a.method << std::setw(7) << a.split
        << std::right << std::setw(5) << a.runs;
    pm(a.r2_mean, a.r2_std);
    pm(a.rmse_mean, a.rmse_std);
    pm(a.wd_mean, a.wd_std);
    out << '\n';
  }
  return out.str();
}

}  // namespace cacti
