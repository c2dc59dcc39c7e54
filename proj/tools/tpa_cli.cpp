// tpa: command-line front end for the transferability lab.
//
//   tpa --seed 7 --out run gen-data
//   tpa --seed 7 --out run train
//   tpa --seed 7 --out run attack --attack tpa
//   tpa --seed 7 --out run evaluate
//   tpa --seed 7 --out run bound --attack tpa
//   tpa --out run demo-sin
//
// Exit codes: 0 success, 2 config error, 3 I/O error, 1 anything else.

#include <chrono>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tpa/harness.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "tpa_out";
  std::optional<std::size_t> threads;
  std::vector<std::string> set;

  std::string role = "all";
  std::string attack = "tpa";
  std::optional<double> lambda;
  std::optional<double> epsilon;
  std::optional<std::size_t> n_per_class;

  double x_min = 0.5;
  double x_max = 3.0;
  std::size_t points = 10000;

  std::vector<double> ks{0.1, 0.05, 0.025, 0.0125};
  std::size_t hvp_points = 50;
};

tpa::KeyValueConfig build_config(const Options& o, bool attack_override) {
  tpa::KeyValueConfig kv = o.config_path.empty() ? tpa::KeyValueConfig{} : tpa::KeyValueConfig::load(o.config_path);
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  if (o.threads) kv.set("threads", std::to_string(*o.threads));
  if (o.n_per_class) kv.set("data.n_per_class", std::to_string(*o.n_per_class));
  if (o.lambda) kv.set("attack.tpa.lambda", tpa::format_double(*o.lambda));
  if (o.epsilon) kv.set("attack.epsilon", tpa::format_double(*o.epsilon));
  if (attack_override) kv.set("attack.kinds", o.attack);
  for (const std::string& s : o.set) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw tpa::ConfigError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flatness-based transfer attack lab"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "key=value config file");
  app.add_option("--seed", o.seed, "master seed (overrides config)");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--set", o.set, "extra key=value overrides");

  auto* gen = app.add_subcommand("gen-data", "generate or import the dataset and split");
  gen->add_option("--n-per-class", o.n_per_class, "blob samples per class");
  auto* trn = app.add_subcommand("train", "train proxy and/or target models");
  trn->add_option("--role", o.role, "proxy, target or all")->check(CLI::IsMember({"proxy", "target", "all"}));
  auto* atk = app.add_subcommand("attack", "attack the eval split on the proxy");
  atk->add_option("--attack", o.attack, "bim, mi, ni, vt, rap or tpa");
  atk->add_option("--lambda", o.lambda, "TPA penalty weight");
  atk->add_option("--epsilon", o.epsilon, "L-inf budget in pixel units");
  auto* evl = app.add_subcommand("evaluate", "transfer success on the target model");
  auto* bnd = app.add_subcommand("bound", "empirical transfer bound components");
  bnd->add_option("--attack", o.attack, "attack whose deltas to use");
  auto* sin = app.add_subcommand("demo-sin", "1-D landscape demo for f(x) = sin(x^2)");
  sin->add_option("--x-min", o.x_min);
  sin->add_option("--x-max", o.x_max);
  sin->add_option("--points", o.points);
  auto* hvp = app.add_subcommand("hvp-curve", "finite-difference HVP error against k");
  hvp->add_option("--k", o.ks, "descending step sizes");
  hvp->add_option("--points", o.hvp_points, "eval examples to average over");
  auto* pipe = app.add_subcommand("pipeline", "gen-data, train, attack, evaluate and bound in one go");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    const tpa::Workspace ws{o.out};
    if (sin->parsed()) {
      const tpa::LandscapeDemo demo = tpa::cmd_demo_sin(ws, o.x_min, o.x_max, o.points);
      std::cout << "argmin y1 at x=" << tpa::format_double(demo.x[demo.argmin_y1])
                << "\nargmin y3 at x=" << tpa::format_double(demo.x[demo.argmin_y3]) << '\n';
    } else {
      const bool attack_override = atk->parsed() || bnd->parsed();
      const tpa::ExperimentConfig cfg = tpa::resolve_config(build_config(o, attack_override));
      if (gen->parsed()) {
        tpa::cmd_gen_data(cfg, ws);
      } else if (trn->parsed()) {
        for (const std::string& role : tpa::model_roles())
          if (o.role == "all" || o.role == role) tpa::cmd_train(cfg, ws, role);
      } else if (atk->parsed()) {
        tpa::cmd_attack(cfg, ws, tpa::parse_attack_kind(o.attack));
      } else if (evl->parsed()) {
        for (const auto& e : tpa::cmd_evaluate(cfg, ws)) {
          std::cout << tpa::to_string(e.attack) << ": asr=" << tpa::format_double(e.outcome.asr) << " (" << e.outcome.successes
                    << '/' << e.outcome.eligible << ")\n";
        }
      } else if (bnd->parsed()) {
        const tpa::BoundReport r = tpa::cmd_bound(cfg, ws, tpa::parse_attack_kind(o.attack));
        std::cout << "E D^2=" << tpa::format_double(r.mean_sq_transfer_gap) << " K=" << tpa::format_double(r.rhs_total)
                  << " holds=" << (r.bound_holds ? "true" : "false") << '\n';
      } else if (hvp->parsed()) {
        for (const auto& p : tpa::cmd_hvp_curve(cfg, ws, o.ks, o.hvp_points))
          std::cout << "k=" << tpa::format_double(p.k) << " mean_error=" << tpa::format_double(p.mean_error) << '\n';
      } else if (pipe->parsed()) {
        tpa::cmd_pipeline(cfg, ws);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "tpa: " << e.what() << '\n';
    return tpa::exit_code_for(e);
  }
  // Wall clock goes to stderr only; reports stay byte-stable.
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "tpa: done in " << secs << " s\n";
  return 0;
}
