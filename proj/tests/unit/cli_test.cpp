// Copyright 2026 The dgnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "dgnet/checkpoint.hpp"
#include "dgnet/data.hpp"

namespace dgnet {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(testing::TempDir()) /
           ("dgnet_cli_" + std::string(testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // A small dataset and a checkpoint trained on it for one epoch.
  void make_model() {
    ASSERT_EQ(run({"synth-gen", "--count", "6", "--frames", "8", "--seed", "3", "--out",
                   path("d.jsonl")}).code,
              0);
    const Result r = run({"train", "--data", path("d.jsonl"), "--out", path("run"), "--epochs",
                          "1", "--channels", "4", "--blocks", "1", "--batch", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

TEST_F(Cli, HelpOnEveryCommand) {
  for (const char* cmd :
       {"synth-gen", "train", "eval", "gradcheck", "dump-affinity", "ablate", "info"}) {
    const Result r = run({cmd, "--help"});
    EXPECT_EQ(r.code, cli::kExitOk) << cmd;
    EXPECT_NE(r.out.find("--"), std::string::npos) << cmd;
  }
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST_F(Cli, UnknownFlagsAndCommandsAreValidationErrors) {
  EXPECT_EQ(run({"synth-gen", "--bogus"}).code, cli::kExitValidation);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitValidation);
  EXPECT_EQ(run({}).code, cli::kExitValidation);
  EXPECT_EQ(run({"eval", "--checkpoint", "x"}).code, cli::kExitValidation);  // --data missing
  EXPECT_EQ(run({"eval", "--protocol", "3", "--checkpoint", "x", "--data", "y"}).code,
            cli::kExitValidation);
}

TEST_F(Cli, SynthGenIsDeterministicAndHonoursOutDir) {
  const Result a = run({"synth-gen", "--count", "3", "--frames", "4", "--out", path("a.jsonl")});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("wrote 3 sequences"), std::string::npos);
  run({"synth-gen", "--count", "3", "--frames", "4", "--out", path("b.jsonl")});
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  EXPECT_EQ(read_dataset(path("a.jsonl")).size(), 3u);

  ::setenv("DGNET_OUT_DIR", dir_.c_str(), 1);
  const Result env = run({"synth-gen", "--count", "1", "--frames", "4"});
  ::unsetenv("DGNET_OUT_DIR");
  EXPECT_EQ(env.code, 0) << env.err;
  EXPECT_TRUE(fs::exists(dir_ / "synth.jsonl"));

  const Result empty = run({"synth-gen", "--count", "0", "--out", path("e.jsonl")});
  EXPECT_EQ(empty.code, 0);
  EXPECT_FALSE(empty.err.empty());
  EXPECT_EQ(run({"synth-gen", "--frames", "1", "--out", path("f.jsonl")}).code,
            cli::kExitValidation);
}

TEST_F(Cli, TrainWithZeroLearningRateKeepsInitialWeights) {
  ASSERT_EQ(run({"synth-gen", "--count", "4", "--frames", "4", "--out", path("d.jsonl")}).code, 0);
  const Result r = run({"train", "--data", path("d.jsonl"), "--out", path("run"), "--epochs", "1",
                        "--channels", "4", "--blocks", "1", "--lr", "0", "--seed", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto trained = load_checkpoint(path("run/model.ckpt"));
  VariantSpec v = trained->variant();
  const auto fresh = configure_variant(v, trained->skeleton());
  EXPECT_EQ(serialize_checkpoint(*fresh), serialize_checkpoint(*trained));
  EXPECT_TRUE(fs::exists(path("run/train_log.jsonl")));
  EXPECT_TRUE(fs::exists(path("run/config.txt")));
}

TEST_F(Cli, TrainConfigFileAndOverrides) {
  ASSERT_EQ(run({"synth-gen", "--count", "4", "--frames", "4", "--out", path("d.jsonl")}).code, 0);
  {
    std::ofstream cfg(path("c.txt"));
    cfg << "epochs = 1\nchannels = 4\nblocks = 1\nbogus = 2\n";
  }
  const Result bad = run({"train", "--config", path("c.txt"), "--data", path("d.jsonl")});
  EXPECT_EQ(bad.code, cli::kExitValidation);
  EXPECT_NE(bad.err.find("bogus"), std::string::npos) << bad.err;
  {
    std::ofstream cfg(path("c.txt"));
    cfg << "epochs = 1\nchannels = 4\nblocks = 2\n";
  }
  const Result ok = run({"train", "--config", path("c.txt"), "--set", "blocks=1", "--data",
                         path("d.jsonl"), "--out", path("run")});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(slurp(path("run/config.txt")).find("blocks = 1"), std::string::npos);
  EXPECT_EQ(run({"train", "--data", path("missing.jsonl"), "--out", path("run2")}).code,
            cli::kExitValidation);
  EXPECT_EQ(run({"train", "--data", path("d.jsonl"), "--lr", "abc"}).code, cli::kExitValidation);
}

TEST_F(Cli, EvalTablesHaveOneLineHeaders) {
  make_model();
  const std::string ck = path("run/model.ckpt"), data = path("d.jsonl");
  const Result p1 = run({"eval", "--checkpoint", ck, "--data", data});
  ASSERT_EQ(p1.code, 0) << p1.err;
  EXPECT_EQ(first_line(p1.out), "action\tframes\tmpjpe_mm");
  const Result p2 = run({"eval", "--checkpoint", ck, "--data", data, "--protocol", "2"});
  ASSERT_EQ(p2.code, 0) << p2.err;
  EXPECT_EQ(first_line(p2.out), "action\tframes\tmpjpe_mm\tp_mpjpe_mm");
  // Every row: P-MPJPE never exceeds MPJPE.
  std::istringstream rows(p2.out);
  std::string line;
  std::getline(rows, line);
  bool saw_all = false;
  while (std::getline(rows, line)) {
    std::istringstream f(line);
    std::string action;
    double frames, m, pm;
    f >> action >> frames >> m >> pm;
    EXPECT_LE(pm, m) << line;
    saw_all |= action == "all";
  }
  EXPECT_TRUE(saw_all);
  const Result pck = run({"eval", "--checkpoint", ck, "--data", data, "--protocol", "pck"});
  EXPECT_EQ(first_line(pck.out), "action\tframes\tpck\tauc");
  const Result rob = run({"eval", "--checkpoint", ck, "--data", data, "--robustness"});
  ASSERT_EQ(rob.code, 0) << rob.err;
  EXPECT_EQ(first_line(rob.out), "sigma_px\tmpjpe_mm\tp_mpjpe_mm");
  EXPECT_EQ(std::count(rob.out.begin(), rob.out.end(), '\n'), 6);
  EXPECT_EQ(run({"eval", "--checkpoint", data, "--data", data}).code, cli::kExitValidation);
}

TEST_F(Cli, DumpAffinityWritesMatrices) {
  make_model();
  const auto seqs = read_dataset(path("d.jsonl"));
  const Result r = run({"dump-affinity", "--checkpoint", path("run/model.ckpt"), "--data",
                        path("d.jsonl"), "--seq-id", seqs[0].seq_id, "--frame", "2", "--out",
                        path("aff")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"B_t.tsv", "Q_next.tsv", "Q_prev.tsv"}) {
    const std::string text = slurp(dir_ / "aff" / f);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 18) << f;  // header + 17 rows
  }
  EXPECT_EQ(run({"dump-affinity", "--checkpoint", path("run/model.ckpt"), "--data",
                 path("d.jsonl"), "--seq-id", "nope", "--out", path("aff")})
                .code,
            cli::kExitValidation);
}

TEST_F(Cli, GradcheckReportsAndFailsWithExitTwo) {
  const Result ok = run({"gradcheck", "--layer", "ftg", "--trials", "2"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(first_line(ok.out), "group\tworst_rel_error\tchecked\tkinks");
  const Result fail = run({"gradcheck", "--layer", "dsg", "--trials", "1", "--tolerance", "0"});
  EXPECT_EQ(fail.code, cli::kExitRuntime);
  EXPECT_NE(fail.err.find("FAIL"), std::string::npos);
  EXPECT_EQ(run({"gradcheck", "--layer", "conv"}).code, cli::kExitValidation);
}

TEST_F(Cli, InfoPrintsParameterCounts) {
  const Result r = run({"info"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(first_line(r.out), "key\tvalue");
  EXPECT_NE(r.out.find("params_train\t2151472"), std::string::npos);
  EXPECT_NE(r.out.find("params_test\t2149537"), std::string::npos);
}

TEST_F(Cli, AblateWritesTheAxisTable) {
  const Result r = run({"ablate", "--axis", "coordinate", "--sequences", "20", "--frames", "8",
                        "--channels", "4", "--epochs", "1", "--batch", "8", "--out", path("abl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "abl" / "ablation_coordinate.tsv"));
  EXPECT_EQ(first_line(r.out), "axis\tgroup\tvariant\tparams\tval_mpjpe_mm\tval_p_mpjpe_mm\tframes");
}

}  // namespace
}  // namespace dgnet
