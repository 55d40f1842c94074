/*
 * Copyright 2026 The modred Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <sys/wait.h>

#include "modred/cli/app.hpp"
#include "modred/datapipe/io.hpp"

using namespace modred;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "modred");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Tiny 12-channel run on 5 subjects x 4 records; `patches` picks the grid
// (10 patches at 20 Hz, 25 patches at 50 Hz).
fs::path write_config(const fs::path& dir, std::size_t patches = 10, std::int64_t epochs = 2) {
  const double fs_hz = patches == 25 ? 50.0 : 20.0;
  json j = {{"train",
             {{"channels", 12},
              {"model",
               {{"signal_len", patches * 10},
                {"patch_len", 10},
                {"enc_dim", 32},
                {"enc_depth", 2},
                {"enc_heads", 4},
                {"dec_dim", 16},
                {"dec_depth", 1},
                {"dec_heads", 4},
                {"mlp_ratio", 2.0},
                {"mask_ratio", 0.75}}},
              {"batch_size", 4},
              {"epochs", epochs},
              {"base_lr", 0.003}}},
            {"preprocess", {{"target_fs", fs_hz}, {"crop_seconds", 5}, {"normalize", true}}},
            {"synth", {{"n_subjects", 5}, {"records_per_subject", 4}}},
            {"out_dir", (dir / "run").string()},
            {"seed", 0}};
  fs::create_directories(dir);
  const auto path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("modred_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  // synth + pretrain into dir_/run; returns the config path.
  fs::path trained(std::size_t patches = 10, std::vector<std::string> extra = {}) {
    const auto cfg = write_config(dir_, patches);
    EXPECT_EQ(run_cli({"synth", "--config", cfg.string(), "--out", (dir_ / "data").string()}).code, 0);
    std::vector<std::string> args{"pretrain", "--config", cfg.string(), "--manifest", manifest().string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run_cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return cfg;
  }
  fs::path manifest() const { return dir_ / "data" / "manifest.json"; }
  fs::path run_dir() const { return dir_ / "run"; }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SynthWritesTwentyRecordsByteIdenticallyAcrossRuns) {
  const auto cfg = write_config(dir_);
  const auto a = run_cli({"synth", "--config", cfg.string(), "--out", (dir_ / "a").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(run_cli({"synth", "--config", cfg.string(), "--out", (dir_ / "b").string()}).code, 0);
  const auto m = data::load_manifest(dir_ / "a" / "manifest.json");
  EXPECT_EQ(m.records.size(), 20u);
  EXPECT_EQ(slurp(dir_ / "a" / "manifest.json"), slurp(dir_ / "b" / "manifest.json"));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "a" / "records")) {
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / "records" / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 20u);
  const auto c = run_cli({"synth", "--config", cfg.string(), "--seed", "9", "--out", (dir_ / "c").string()});
  ASSERT_EQ(c.code, 0);
  EXPECT_NE(slurp(dir_ / "a" / m.records[0].path), slurp(dir_ / "c" / m.records[0].path));
}

TEST_F(CliTest, NoiselessSynthPassesEinthovenTool) {
  const auto cfg = write_config(dir_);
  json j = json::parse(slurp(cfg));
  j["synth"]["noise_std"] = 0.0;
  std::ofstream(cfg) << j.dump();
  ASSERT_EQ(run_cli({"synth", "--config", cfg.string(), "--out", (dir_ / "clean").string()}).code, 0);
  const std::string tool = MODRED_EINTHOVEN_BIN;
  const auto clean = (dir_ / "clean" / "manifest.json").string();
  EXPECT_EQ(std::system((tool + " " + clean + " > /dev/null").c_str()), 0);

  ASSERT_EQ(run_cli({"synth", "--config", write_config(dir_).string(), "--out", (dir_ / "noisy").string()}).code, 0);
  const auto noisy = (dir_ / "noisy" / "manifest.json").string();
  const int status = std::system((tool + " " + noisy + " > /dev/null").c_str());
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 3);
}

TEST_F(CliTest, PretrainWritesOneMetricRowPerEpochAndCheckpoints) {
  trained();
  const auto rows = dist::read_metrics(run_dir() / "metrics.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].w_align, 0.0);
  EXPECT_GT(rows[1].w_align, 0.0);
  for (std::size_t c = 0; c < 12; ++c) EXPECT_TRUE(fs::exists(dist::checkpoint_path(run_dir() / "checkpoints", c)));
  const auto resolved = cli::load_run_config(run_dir() / cli::kResolvedConfigName);
  EXPECT_EQ(resolved.train.manifest, manifest().string());
  EXPECT_TRUE(resolved.train.align);
}

TEST_F(CliTest, NoAlignFlagTrainsBaselineModels) {
  trained(10, {"--no-align"});
  const auto rows = dist::read_metrics(run_dir() / "metrics.csv");
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_EQ(*r.align_loss, 0.0);
  EXPECT_FALSE(cli::load_run_config(run_dir() / cli::kResolvedConfigName).train.align);
}

TEST_F(CliTest, ResolvedConfigReloadsToAnIdenticalRun) {
  trained();
  const auto first = slurp(run_dir() / "metrics.csv");
  const auto ck = slurp(dist::checkpoint_path(run_dir() / "checkpoints", 3));
  const auto resolved = dir_ / "resolved.json";
  fs::copy_file(run_dir() / cli::kResolvedConfigName, resolved);
  fs::remove_all(run_dir());
  const auto r = run_cli({"pretrain", "--config", resolved.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(run_dir() / "metrics.csv"), first);
  EXPECT_EQ(slurp(dist::checkpoint_path(run_dir() / "checkpoints", 3)), ck);
  EXPECT_EQ(slurp(run_dir() / cli::kResolvedConfigName), slurp(resolved));
}

TEST_F(CliTest, LocalDistributedRunMatchesSingleProcessMetrics) {
  const auto cfg = trained();
  const auto ref = dist::read_metrics(run_dir() / "metrics.csv");
  const auto r = run_cli({"pretrain-dist", "--config", cfg.string(), "--manifest", manifest().string(), "--role",
                          "local", "--transport", "tcp", "--out", (dir_ / "dist").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto got = dist::read_metrics(dir_ / "dist" / "metrics.csv");
  ASSERT_EQ(got.size(), ref.size());
  for (std::size_t e = 0; e < ref.size(); ++e) {
    EXPECT_NEAR(*got[e].rec_loss, *ref[e].rec_loss, 1e-10);
    EXPECT_NEAR(*got[e].align_loss, *ref[e].align_loss, 1e-10);
  }
}

TEST_F(CliTest, ReconstructEmitsNativeAndSourceTracesWithMaskWindows) {
  // 25-patch grid: 50 Hz x 5 s windows.
  const auto cfg = trained(25);
  const auto r = run_cli({"reconstruct", "--config", cfg.string(), "--manifest", manifest().string(),
                          "--source-channel", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(run_dir() / "reconstruction.csv");
  ASSERT_EQ(rows[0], (std::vector<std::string>{"record_id", "subject_id", "source", "channel", "sample", "original",
                                               "reconstructed", "masked"}));
  // (record, source, channel) -> samples and masked samples.
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<int, int>> traces;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto& t = traces[{rows[i][0], rows[i][2], rows[i][3]}];
    ++t.first;
    t.second += rows[i][7] == "1";
  }
  EXPECT_EQ(traces.size(), 20u * 2 * 12);
  std::set<std::string> sources;
  for (const auto& [key, t] : traces) {
    sources.insert(std::get<1>(key));
    EXPECT_EQ(t.first, 250);        // 5 s at 50 Hz
    EXPECT_EQ(t.second, 19 * 10);   // 19 of 25 patches of 10 samples
  }
  EXPECT_EQ(sources, (std::set<std::string>{"native", "0"}));
  EXPECT_EQ(run_cli({"reconstruct", "--config", cfg.string(), "--manifest", manifest().string(), "--source-channel",
                     "12"})
                .code,
            2);
}

TEST_F(CliTest, EmbedAndEvalWriteReports) {
  const auto cfg = trained();
  const std::vector<std::string> data{"--config", cfg.string(), "--manifest", manifest().string()};
  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), data.begin(), data.end());
    return run_cli(head);
  };
  ASSERT_EQ(with({"embed"}).code, 0);
  const auto emb = read_csv(run_dir() / "embeddings.csv");
  EXPECT_EQ(emb.size(), 1u + 20 * 12);
  EXPECT_EQ(emb[0].size(), 3u + 32);

  ASSERT_EQ(with({"eval", "--kind", "similarity", "--repeats", "2"}).code, 0);
  const auto sim = read_csv(run_dir() / "similarity.csv");
  ASSERT_EQ(sim.size(), 13u);
  EXPECT_EQ(sim[0][0], "I");
  for (std::size_t i = 1; i < 13; ++i) EXPECT_EQ(sim[i].size(), 12u);
  const auto summary = json::parse(slurp(run_dir() / "similarity_summary.json"));
  for (const char* k : {"metric", "mean", "std", "seed", "config_hash"}) EXPECT_TRUE(summary.contains(k)) << k;

  ASSERT_EQ(with({"eval", "--kind", "recon-mae"}).code, 0);
  EXPECT_EQ(read_csv(run_dir() / "recon_mae.csv").size(), 13u);

  const auto knn = with({"eval", "--kind", "knn", "--folds", "4"});
  ASSERT_EQ(knn.code, 0) << knn.err;
  EXPECT_NE(knn.out.find("mean accuracy "), std::string::npos);
  for (int f = 0; f < 4; ++f) EXPECT_NE(knn.out.find("fold " + std::to_string(f) + " "), std::string::npos);
  EXPECT_EQ(read_csv(run_dir() / "knn.csv").size(), 5u);

  const auto mi = with({"eval", "--kind", "mi-clf", "--folds", "2"});
  ASSERT_EQ(mi.code, 0) << mi.err;
  EXPECT_EQ(json::parse(slurp(run_dir() / "mi_clf_summary.json"))["metric"], "f1");
  EXPECT_EQ(read_csv(run_dir() / "mi_clf.csv").size(), 3u);

  // Deterministic for a fixed (config, seed).
  const auto before = slurp(run_dir() / "knn.csv");
  ASSERT_EQ(with({"eval", "--kind", "knn", "--folds", "4"}).code, 0);
  EXPECT_EQ(slurp(run_dir() / "knn.csv"), before);
}

TEST_F(CliTest, ExitCodes) {
  const auto cfg = trained();
  const std::vector<std::string> data{"--config", cfg.string(), "--manifest", manifest().string()};
  auto eval_kind = [&](const std::string& kind) {
    std::vector<std::string> a{"eval", "--kind", kind};
    a.insert(a.end(), data.begin(), data.end());
    return run_cli(a).code;
  };
  EXPECT_EQ(eval_kind("bogus"), 2);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"pretrain", "--config", (dir_ / "missing.json").string()}).code, 2);

  std::ofstream(dir_ / "bad.json") << R"({"train": {"epochs": 3}, "colour": "blue"})";
  EXPECT_EQ(run_cli({"synth", "--config", (dir_ / "bad.json").string()}).code, 2);
  std::ofstream(dir_ / "broken.json") << "{not json";
  EXPECT_EQ(run_cli({"synth", "--config", (dir_ / "broken.json").string()}).code, 2);

  EXPECT_EQ(run_cli({"pretrain", "--config", cfg.string(), "--manifest", (dir_ / "nope.json").string()}).code, 3);
  // Checkpoints from another run configuration.
  json other = json::parse(slurp(cfg));
  other["train"]["epochs"] = 7;
  std::ofstream(dir_ / "other.json") << other.dump();
  EXPECT_EQ(run_cli({"embed", "--config", (dir_ / "other.json").string(), "--manifest", manifest().string()}).code, 3);

  // The real binary: unknown kind is a usage error.
  const std::string bin = MODRED_BIN;
  const int status = std::system((bin + " eval --kind bogus --config " + cfg.string() + " 2> /dev/null").c_str());
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
}
