// Copyright 2026 The c2dfb Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "c2dfb/metrics.hpp"
#include <json.hpp>

namespace c2dfb {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("c2dfb_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  fs::path write_config(const std::string& name, json doc) {
    if (!doc.contains("output_dir")) doc["output_dir"] = (dir_ / "out").string();
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }

  Result cli(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string(C2DFB_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static std::string field(const std::string& text, const std::string& key) {
    const auto pos = text.find(key + ": ");
    if (pos == std::string::npos) return "";
    const auto start = pos + key.size() + 2;
    return text.substr(start, text.find('\n', start) - start);
  }

  fs::path dir_;
};

json quadratic(int T = 20) {
  return {{"problem", {{"family", "quadratic"}}},
          {"schedule",
           {{"lambda", 400.0}, {"K", 15}, {"T", T}, {"eta_in", 0.1}, {"eta_out", 0.05}, {"gamma_out", 0.8}}},
          {"seeds", {{"master", 5}}}};
}

TEST_F(Cli, DefaultScheduleWithShortHorizon) {
  const auto cfg = write_config("defaults.json", {{"schedule", {{"T", 2}}}});
  const Result r = cli("run --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const json summary = json::parse(slurp(field(r.out, "summary")));
  EXPECT_EQ(summary["family"], "coefficient_tuning");
  EXPECT_GT(summary["payload_words"]["total"].get<Words>(), 0u);
  EXPECT_EQ(summary["config"]["schedule"]["lambda"], 10.0);
  const auto rows = read_csv_log(field(r.out, "csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows.back().val_accuracy.has_value());
}

TEST_F(Cli, EchoedConfigReproducesRun) {
  const auto cfg = write_config("q.json", quadratic(10));
  const Result a = cli("run --config " + cfg.string());
  ASSERT_EQ(a.code, 0) << a.err;
  const std::string csv_a = slurp(field(a.out, "csv"));
  const json summary = json::parse(slurp(field(a.out, "summary")));
  json echo = summary["config"];
  echo["output_dir"] = (dir_ / "again").string();
  const auto cfg2 = write_config("echo.json", echo);
  const Result b = cli("run --config " + cfg2.string());
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(field(b.out, "csv")), csv_a);
  EXPECT_EQ(fs::path(field(b.out, "csv")).filename(), fs::path(field(a.out, "csv")).filename());
}

TEST_F(Cli, UncompressedVariantMatchesIdentityCompressor) {
  const auto cfg = write_config("q.json", quadratic(8));
  const Result a = cli("run --config " + cfg.string() + " --variant uncompressed --output-dir " +
                       (dir_ / "a").string());
  json ident = quadratic(8);
  ident["compressor"] = {{"kind", "identity"}};
  const auto cfg2 = write_config("ident.json", ident);
  const Result b = cli("run --config " + cfg2.string() + " --output-dir " + (dir_ / "b").string());
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const auto ra = read_csv_log(field(a.out, "csv"));
  const auto rb = read_csv_log(field(b.out, "csv"));
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    EXPECT_EQ(ra[i].grad_norm_oracle, rb[i].grad_norm_oracle);
    EXPECT_EQ(ra[i].payload_total, rb[i].payload_total);
  }
}

TEST_F(Cli, ValidationErrorsExitOne) {
  const auto cfg = write_config("bad.json", {{"schedule", {{"lamda", 3}, {"K", -1}}}});
  const Result r = cli("run --config " + cfg.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("did you mean"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("schedule.K"), std::string::npos) << r.err;
  EXPECT_EQ(cli("run --config " + (dir_ / "missing.json").string()).code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("run --config " + cfg.string() + " --variant turbo").code, 1);
}

TEST_F(Cli, RuntimeErrorsExitTwo) {
  json doc = quadratic(2);
  doc["output_dir"] = "/proc/c2dfb_not_writable";
  const auto cfg = write_config("io.json", doc);
  const Result r = cli("run --config " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("runtime"), std::string::npos) << r.err;
}

TEST_F(Cli, SweepRatioIncreasesPayload) {
  const auto cfg = write_config("q.json", quadratic(5));
  const Result r = cli("sweep --config " + cfg.string() + " --axis ratio --values 0.1,0.2,0.3 --jobs 2");
  ASSERT_EQ(r.code, 0) << r.err;
  const json table = json::parse(slurp(field(r.out, "summary")));
  ASSERT_EQ(table["cells"].size(), 3u);
  Words prev = 0;
  for (const auto& cell : table["cells"]) {
    ASSERT_EQ(cell["status"], "ok");
    const Words w = cell["payload_words_total"].get<Words>();
    EXPECT_GT(w, prev);
    prev = w;
  }
}

TEST_F(Cli, SweepLambdaReportsBias) {
  json doc = quadratic(3);
  doc["compressor"] = {{"kind", "identity"}};
  const auto cfg = write_config("q.json", doc);
  const Result r = cli("sweep --config " + cfg.string() + " --axis lambda --values 10,20,40,80");
  ASSERT_EQ(r.code, 0) << r.err;
  const json table = json::parse(slurp(field(r.out, "summary")));
  double prev = 1e300;
  for (const auto& cell : table["cells"]) {
    const double bias = cell["final"]["hypergradient_bias"].get<double>();
    EXPECT_LT(bias, prev);
    prev = bias;
  }
}

TEST_F(Cli, SweepKeepsGoingPastFailedCells) {
  const auto cfg = write_config("q.json", quadratic(2));
  const Result r = cli("sweep --config " + cfg.string() + " --axis K --values 3,0,5");
  EXPECT_EQ(r.code, 1);
  const json table = json::parse(slurp(field(r.out, "summary")));
  EXPECT_EQ(table["cells"][0]["status"], "ok");
  EXPECT_EQ(table["cells"][1]["status"], "failed");
  EXPECT_EQ(table["cells"][2]["status"], "ok");
  EXPECT_EQ(cli("sweep --config " + cfg.string() + " --axis colour --values 1").code, 1);
}

TEST_F(Cli, TopologyInfoRing) {
  const auto cfg = write_config("t.json", {{"topology", {{"kind", "ring"}, {"nodes", 4}}}});
  const Result r = cli("topology-info --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(std::stod(field(r.out, "spectral_gap")), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(std::stod(field(r.out, "second_eigen")), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(field(r.out, "spectral_gap").rfind("0.666666", 0), 0u);
  const auto bad = write_config("b.json", {{"topology", {{"kind", "erdos_renyi"}, {"nodes", 30}, {"edge_probability", 1e-6}}}});
  EXPECT_EQ(cli("topology-info --config " + bad.string()).code, 1);
}

TEST_F(Cli, CheckCompressor) {
  const auto ident = write_config("i.json", {{"compressor", {{"kind", "identity"}}}});
  const Result a = cli("check-compressor --config " + ident.string() + " --dim 100 --trials 20");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(std::stod(field(a.out, "worst_ratio")), 0.0);
  const auto topk = write_config("k.json", {{"compressor", {{"kind", "top_k"}, {"ratio", 0.2}}}});
  const Result b = cli("check-compressor --config " + topk.string());
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_LE(std::stod(field(b.out, "worst_ratio")), 0.8);
  EXPECT_EQ(field(b.out, "violations"), "0");
  EXPECT_EQ(field(b.out, "dimension"), "500");
}

}  // namespace
}  // namespace c2dfb
