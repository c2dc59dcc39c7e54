#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tpa/harness.hpp"

using namespace tpa;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tpa_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config(std::uint64_t seed, const std::string& extra = "") {
  auto kv = KeyValueConfig::parse_string("seed=" + std::to_string(seed) +
                                         "\ndata.n_classes=3\ndata.dim=6\ndata.n_per_class=20\n"
                                         "model.proxy.hidden=8\nmodel.target.hidden=8\n"
                                         "train.proxy.epochs=8\ntrain.target.epochs=8\n"
                                         "attack.iterations=5\nattack.tpa.n_samples=3\nattack.vt.samples=3\n");
  std::istringstream lines(extra);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    kv.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return resolve_config(kv);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TPA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Harness, GenDataIsDeterministicAndLossless) {
  const Workspace a{fresh_dir("gen_a")}, b{fresh_dir("gen_b")};
  const auto cfg = small_config(7);
  cmd_gen_data(cfg, a);
  cmd_gen_data(cfg, b);
  EXPECT_EQ(slurp(a.dataset()), slurp(b.dataset()));
  EXPECT_EQ(slurp(a.split()), slurp(b.split()));
  const Dataset direct = gen_blobs(derive_seed(7, "data"), 3, 6, 20, 0.3);
  const LoadedData ld = load_data(a);
  EXPECT_EQ(ld.data.inputs, direct.inputs);
  EXPECT_EQ(ld.data.labels, direct.labels);
}

TEST(Harness, EmptyDatasetGivesValidManifest) {
  const Workspace ws{fresh_dir("empty")};
  cmd_gen_data(small_config(1, "data.n_per_class=0\n"), ws);
  const json m = read_json(ws.split());
  EXPECT_EQ(m.at("n").get<std::size_t>(), 0u);
  EXPECT_TRUE(m.at("eval").empty());
}

TEST(Harness, ZeroEpochTrainSavesInitialization) {
  const Workspace ws{fresh_dir("train0")};
  const auto cfg = small_config(2, "train.proxy.epochs=0\n");
  cmd_gen_data(cfg, ws);
  cmd_train(cfg, ws, "proxy");
  const RoleSpec& r = cfg.roles.at("proxy");
  const Model init = Model::initialize(mlp_spec(6, r.hidden, 3, r.depth, r.residual_blocks, r.activation), derive_seed(2, "init.proxy"));
  EXPECT_EQ(load_checkpoint(ws.checkpoint("proxy")), init);
}

TEST(Harness, AttackReductionAndZeroEpsilon) {
  const Workspace ws{fresh_dir("attack")};
  const auto cfg = small_config(3, "attack.kinds=bim,tpa\nattack.tpa.lambda=0\n");
  cmd_gen_data(cfg, ws);
  cmd_train(cfg, ws, "proxy");
  cmd_attack(cfg, ws, AttackKind::bim);
  cmd_attack(cfg, ws, AttackKind::tpa);
  EXPECT_EQ(slurp(ws.adv_csv(AttackKind::bim)), slurp(ws.adv_csv(AttackKind::tpa)));

  const auto zero = small_config(3, "attack.kinds=bim\nattack.epsilon=0\n");
  cmd_attack(zero, ws, AttackKind::bim);
  for (const auto& e : read_json(ws.attack_report(AttackKind::bim)).at("examples"))
    for (double v : e.at("delta")) EXPECT_EQ(v, 0.0);
}

TEST(Harness, SelfTransferEqualsProxySuccess) {
  const Workspace ws{fresh_dir("self")};
  const auto cfg = small_config(4, "attack.kinds=bim\n");
  cmd_gen_data(cfg, ws);
  cmd_train(cfg, ws, "proxy");
  fs::copy_file(ws.checkpoint("proxy"), ws.checkpoint("target"));
  cmd_attack(cfg, ws, AttackKind::bim);
  const auto entries = cmd_evaluate(cfg, ws);
  ASSERT_EQ(entries.size(), 1u);
  const json report = read_json(ws.attack_report(AttackKind::bim));
  std::size_t eligible_wins = 0;
  for (std::size_t j = 0; j < entries[0].outcome.examples.size(); ++j) {
    if (entries[0].outcome.examples[j].eligible && report.at("examples")[j].at("success_on_proxy").get<bool>()) ++eligible_wins;
  }
  EXPECT_EQ(entries[0].outcome.successes, eligible_wins);
  EXPECT_EQ(slurp(ws.asr_matrix()).substr(0, 16), "proxy,target,att");
}

TEST(Harness, LabelSpaceMismatchIsConsistencyError) {
  const Workspace ws{fresh_dir("mismatch")};
  const auto cfg = small_config(5, "attack.kinds=bim\n");
  cmd_gen_data(cfg, ws);
  cmd_train(cfg, ws, "proxy");
  save_checkpoint(Model::initialize(mlp_spec(6, 4, 5), 0), ws.checkpoint("target"));
  cmd_attack(cfg, ws, AttackKind::bim);
  EXPECT_THROW(cmd_evaluate(cfg, ws), ConsistencyError);
}

TEST(Harness, BoundWithZeroDeltaAndIdenticalModels) {
  const Workspace ws{fresh_dir("bound")};
  const auto cfg = small_config(6, "attack.kinds=bim\nattack.epsilon=0\nmodel.proxy.activation=softplus\n");
  cmd_gen_data(cfg, ws);
  cmd_train(cfg, ws, "proxy");
  fs::copy_file(ws.checkpoint("proxy"), ws.checkpoint("target"));
  cmd_attack(cfg, ws, AttackKind::bim);
  const BoundReport r = cmd_bound(cfg, ws, AttackKind::bim);
  EXPECT_EQ(r.first_order_component, 0.0);
  EXPECT_EQ(r.second_order_component, 0.0);
  EXPECT_EQ(r.mean_sq_transfer_gap, 0.0);
  const json j = read_json(ws.bound_report(AttackKind::bim));
  EXPECT_EQ(j.at("inputs").at("proxy_sha256"), j.at("inputs").at("target_sha256"));
  EXPECT_EQ(j.at("inputs").at("proxy_sha256").get<std::string>().size(), 64u);
}

TEST(Harness, PipelineIsByteIdenticalAcrossThreadCounts) {
  const Workspace a{fresh_dir("pipe_a")}, b{fresh_dir("pipe_b")};
  cmd_pipeline(small_config(8, "threads=1\n"), a);
  cmd_pipeline(small_config(8, "threads=3\n"), b);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a.dir)) {
    const fs::path other = b.dir / entry.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(entry.path()), slurp(other)) << entry.path().filename();
    ++files;
  }
  EXPECT_GE(files, 20u);
}

TEST(Harness, DemoSinCsv) {
  const Workspace ws{fresh_dir("sin")};
  const LandscapeDemo d = cmd_demo_sin(ws, -3, 3, 601);
  EXPECT_EQ(d.argmin_y1, 300u);
  EXPECT_TRUE(fs::exists(ws.sin_demo()));
}

TEST(Cli, ExitCodes) {
  const fs::path dir = fresh_dir("cli");
  EXPECT_EQ(run_cli("--out " + dir.string() + " demo-sin --points 101"), 0);
  EXPECT_EQ(run_cli("--out " + dir.string() + " gen-data"), 2);  // no seed
  EXPECT_EQ(run_cli("--seed 1 --out " + dir.string() + " --set attack.kinds=nope gen-data"), 2);
  EXPECT_EQ(run_cli("--seed 1 --out " + dir.string() + " attack --attack bim"), 3);  // nothing generated yet
  EXPECT_EQ(run_cli("--seed 1 --config /nonexistent.cfg --out " + dir.string() + " gen-data"), 3);
  EXPECT_EQ(run_cli("--seed 1 --out /proc/forbidden/x gen-data"), 3);
  EXPECT_EQ(run_cli("--bogus-flag"), 2);
}

TEST(Cli, SeededRunsAreByteIdentical) {
  const fs::path a = fresh_dir("cli_a"), b = fresh_dir("cli_b");
  const std::string common = " --set data.n_per_class=10 --set data.dim=6 --set data.n_classes=3 --set train.proxy.epochs=3"
                             " --set train.target.epochs=3 --set attack.iterations=3 --set attack.kinds=bim,tpa"
                             " --set attack.tpa.n_samples=2 ";
  ASSERT_EQ(run_cli("--seed 9 --out " + a.string() + common + "pipeline"), 0);
  ASSERT_EQ(run_cli("--seed 9 --out " + b.string() + common + "pipeline"), 0);
  for (const auto& entry : fs::directory_iterator(a)) EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
}
