// Copyright 2026 The cacti-impute Authors
// SPDX-License-Identifier: Apache-2.0

#include <regex>
#include <sstream>

#include "cacti/cli.hpp"
#include "cacti/dataset.hpp"
#include "cacti/synthetic.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace cacti;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

bool machine_error_line(const std::string& err) {
  static const std::regex line(R"(^error: [a-z-]+: .+\n)");
  return std::regex_search(err, line);
}

// 100×8 correlated table plus a categorical column and matching context.
struct Workspace {
  fs::path dir = test::temp_dir("cli");
  std::string p(const std::string& name) const { return (dir / name).string(); }
  Workspace() {
    const Table g = gaussian_table(100, 8, 0.8, 3);
    std::ostringstream csv;
    for (std::size_t c = 0; c < 8; ++c) csv << g.schema[c].name << ',';
    csv << "grade\n";
    for (std::size_t r = 0; r < 100; ++r) {
      for (std::size_t c = 0; c < 8; ++c) csv << format_number(g.values(r, c)) << ',';
      csv << (g.values(r, 0) > 0 ? "A" : "B") << '\n';
    }
    test::write_file(dir / "data.csv", csv.str());
    nlohmann::json cols;
    for (std::size_t c = 0; c <= 8; ++c) {
      const std::string name = c < 8 ? g.schema[c].name : "grade";
      cols[name] = {0.1 * static_cast<double>(c), 1.0, -0.5};
    }
    test::write_file(dir / "ctx.json",
                     nlohmann::json{{"model", "test"}, {"dim", 3}, {"columns", cols}}.dump());
    test::write_file(dir / "train.json", R"({"warmup_epochs": 2, "batch_size": 50,
        "model": {"embed_dim": 8, "heads": 2, "enc_depth": 1, "dec_depth": 1}})");
  }
};

const Workspace& ws() {
  static const Workspace w;
  return w;
}

}  // namespace

TEST_CASE("cli: version and usage") {
  const Result v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("checkpoint format 1") != std::string::npos);
  const Result missing = run({"simulate", "--data", ws().p("data.csv")});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--out") != std::string::npos);
  CHECK(missing.err.find("Usage") != std::string::npos);
}

TEST_CASE("cli: simulate writes mask and sidecar") {
  const Result r = run({"simulate", "--data", ws().p("data.csv"), "--mechanism", "mcar",
                        "--p-miss", "0.3", "--seed", "4", "--out", ws().p("mcar.csv")});
  REQUIRE(r.code == 0);
  const Table m = parse_csv(test::read_file(ws().p("mcar.csv")));
  std::size_t zeros = 0;
  for (double v : m.values.flat()) zeros += v == 0.0;
  const double rate = static_cast<double>(zeros) / static_cast<double>(m.values.size());
  CHECK(std::abs(rate - 0.3) < 0.07);  // 4 sigma over 900 cells
  const auto side = nlohmann::json::parse(test::read_file(ws().p("mcar.csv.json")));
  CHECK(side["observed_columns"].empty());

  const Result mar = run({"simulate", "--data", ws().p("data.csv"), "--mechanism", "mar",
                          "--out", ws().p("mar.csv")});
  REQUIRE(mar.code == 0);
  const auto ms = nlohmann::json::parse(test::read_file(ws().p("mar.csv.json")));
  CHECK(ms["observed_columns"].size() == 2);  // max(1, floor(0.3 * 9))

  const Result bad = run({"simulate", "--data", ws().p("data.csv"), "--mechanism", "xnar",
                          "--out", ws().p("x.csv")});
  CHECK(bad.code == 2);
  CHECK(machine_error_line(bad.err));
  CHECK(bad.err.find("invalid-argument") != std::string::npos);
}

TEST_CASE("cli: train, impute, evaluate round") {
  const auto& w = ws();
  REQUIRE(run({"simulate", "--data", w.p("data.csv"), "--seed", "2", "--out", w.p("mask.csv")})
              .code == 0);
  const Result tr = run({"train", "--data", w.p("data.csv"), "--mask", w.p("mask.csv"),
                         "--context", w.p("ctx.json"), "--config", w.p("train.json"), "--out",
                         w.p("m.ckpt"), "--quiet", "--dump-first-batch", w.p("batch.json")});
  REQUIRE(tr.code == 0);
  // Default epoch count reaches the trace.
  const std::string trace = test::read_file(w.p("m.ckpt.trace.csv"));
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 301);
  CHECK(nlohmann::json::parse(test::read_file(w.p("batch.json"))).contains("observed_sets"));

  const Result im = run({"impute", "--data", w.p("data.csv"), "--mask", w.p("mask.csv"),
                         "--checkpoint", w.p("m.ckpt"), "--context", w.p("ctx.json"), "--out",
                         w.p("imputed.csv")});
  REQUIRE(im.code == 0);
  const std::string imputed = test::read_file(w.p("imputed.csv"));
  CHECK(imputed.find(",,") == std::string::npos);
  CHECK(imputed.find(",\n") == std::string::npos);

  // Observed cells keep their exact input rendering.
  const Table in = parse_csv(test::read_file(w.p("data.csv")));
  const Table mask = parse_csv(test::read_file(w.p("mask.csv")));
  // Unrounded categorical imputations are written as numeric codes.
  CsvOptions as_codes;
  as_codes.hint = {{"grade", ColumnKind::kCategorical}};
  const Table out = parse_csv(imputed, as_codes);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    for (std::size_t c = 0; c < in.cols(); ++c) {
      if (mask.values(r, c) == 1.0) CHECK(out.text[r * in.cols() + c] == in.text[r * in.cols() + c]);
    }
  }

  const Result ev = run({"evaluate", "--truth", w.p("data.csv"), "--imputed", w.p("imputed.csv"),
                         "--mask", w.p("mask.csv"), "--json"});
  REQUIRE(ev.code == 0);
  const auto rep = nlohmann::json::parse(ev.out);
  CHECK(rep["aggregate"]["n_eval"].get<std::size_t>() > 0);

  const Result same = run({"evaluate", "--truth", w.p("data.csv"), "--imputed", w.p("data.csv"),
                           "--mask", w.p("mask.csv"), "--json"});
  REQUIRE(same.code == 0);
  CHECK(nlohmann::json::parse(same.out)["aggregate"]["r2_mean"].get<double>() ==
        doctest::Approx(1.0));
}

TEST_CASE("cli: ablation arms and error exits") {
  const auto& w = ws();
  REQUIRE(run({"simulate", "--data", w.p("data.csv"), "--seed", "2", "--out", w.p("mask.csv")})
              .code == 0);
  CHECK(run({"train", "--data", w.p("data.csv"), "--mask", w.p("mask.csv"), "--no-context",
             "--config", w.p("train.json"), "--epochs", "4", "--out", w.p("cmae.ckpt"), "--quiet"})
            .code == 0);
  CHECK(run({"train", "--data", w.p("data.csv"), "--mask", w.p("mask.csv"), "--mask-strategy",
             "random", "--config", w.p("train.json"), "--epochs", "4", "--out", w.p("rmae.ckpt"),
             "--quiet"})
            .code == 0);

  // Context-free checkpoint imputes without --context.
  CHECK(run({"impute", "--data", w.p("data.csv"), "--mask", w.p("mask.csv"), "--checkpoint",
             w.p("cmae.ckpt"), "--out", w.p("cmae.csv")})
            .code == 0);

  // Wrong schema: exit 3.
  test::write_file(w.dir / "other.csv", "p,q\n1,2\n3,4\n");
  const Result wrong = run({"impute", "--data", w.p("other.csv"), "--checkpoint",
                            w.p("cmae.ckpt"), "--out", w.p("o.csv")});
  CHECK(wrong.code == 3);
  CHECK(wrong.err.find("checkpoint schema mismatch") != std::string::npos);
  CHECK(machine_error_line(wrong.err));

  // Corrupt checkpoint: exit 3.
  test::write_file(w.dir / "junk.ckpt", "not a checkpoint");
  CHECK(run({"impute", "--data", w.p("data.csv"), "--checkpoint", w.p("junk.ckpt"), "--out",
             w.p("o.csv")})
            .code == 3);

  // Shape mismatch in evaluate: exit 2.
  test::write_file(w.dir / "short.csv", test::read_file(w.p("data.csv")).substr(0, 200));
  const Result shape = run({"evaluate", "--truth", w.p("data.csv"), "--imputed", w.p("short.csv"),
                            "--mask", w.p("mask.csv")});
  CHECK(shape.code == 2);
  CHECK(machine_error_line(shape.err));

  // Missing input file: exit 1.
  const Result io = run({"train", "--data", w.p("nope.csv"), "--out", w.p("x.ckpt")});
  CHECK(io.code == 1);
  CHECK(machine_error_line(io.err));

  // Context coverage gap: exit 2, and the opt-in fallback succeeds.
  test::write_file(w.dir / "partial.json", R"({"model":"m","dim":2,"columns":{"x0":[1,2]}})");
  const Result gap = run({"train", "--data", w.p("data.csv"), "--mask", w.p("mask.csv"),
                          "--context", w.p("partial.json"), "--config", w.p("train.json"),
                          "--epochs", "3", "--out", w.p("g.ckpt"), "--quiet"});
  CHECK(gap.code == 2);
  CHECK(gap.err.find("coverage-error") != std::string::npos);
  CHECK(run({"train", "--data", w.p("data.csv"), "--mask", w.p("mask.csv"), "--context",
             w.p("partial.json"), "--allow-missing-context", "--config", w.p("train.json"),
             "--epochs", "3", "--out", w.p("g.ckpt"), "--quiet"})
            .code == 0);
}

TEST_CASE("cli: mean imputation scores R2 0") {
  const auto& w = ws();
  REQUIRE(run({"simulate", "--data", w.p("data.csv"), "--seed", "5", "--out", w.p("m5.csv")})
              .code == 0);
  const Table truth = parse_csv(test::read_file(w.p("data.csv")));
  const Table mask = parse_csv(test::read_file(w.p("m5.csv")));
  // Column means of the visible cells, written as a full table.
  std::ostringstream csv;
  for (std::size_t c = 0; c < truth.cols(); ++c) csv << truth.schema[c].name << (c + 1 < truth.cols() ? ',' : '\n');
  std::vector<double> mean(truth.cols(), 0.0), n(truth.cols(), 0.0);
  for (std::size_t r = 0; r < truth.rows(); ++r) {
    for (std::size_t c = 0; c < truth.cols(); ++c) {
      if (mask.values(r, c) == 1.0) mean[c] += truth.values(r, c), n[c] += 1;
    }
  }
  for (std::size_t r = 0; r < truth.rows(); ++r) {
    for (std::size_t c = 0; c < truth.cols(); ++c) {
      const double v = mask.values(r, c) == 1.0 ? truth.values(r, c) : mean[c] / n[c];
      csv << format_number(v) << (c + 1 < truth.cols() ? ',' : '\n');
    }
  }
  test::write_file(w.dir / "mean.csv", csv.str());
  const Result ev = run({"evaluate", "--truth", w.p("data.csv"), "--imputed", w.p("mean.csv"),
                         "--mask", w.p("m5.csv"), "--json"});
  REQUIRE(ev.code == 0);
  CHECK(nlohmann::json::parse(ev.out)["aggregate"]["r2_mean"].get<double>() == 0.0);
}

TEST_CASE("cli: benchmark") {
  const auto& w = ws();
  test::write_file(w.dir / "bench.json", R"({
    "synthetic": {"rows": 40, "cols": 3, "context_dim": 2},
    "methods": ["cmae", "mean"], "seeds": 1, "root_seed": 3,
    "train": {"epochs": 2, "warmup_epochs": 1, "batch_size": 16,
              "model": {"embed_dim": 8, "heads": 2, "enc_depth": 1, "dec_depth": 1}}})");
  const Result b = run({"benchmark", "--config", w.p("bench.json"), "--out", w.p("bench_out.json")});
  REQUIRE(b.code == 0);
  const auto j = nlohmann::json::parse(test::read_file(w.p("bench_out.json")));
  CHECK(j["runs"].size() == 4);
  CHECK(b.out.find("cmae") != std::string::npos);
}
