#ifndef TPA_HARNESS_HPP
#define TPA_HARNESS_HPP

// Pipeline orchestration behind the tpa CLI. Every command resolves the whole
// experiment config first, so unknown keys and bad values fail before any
// file is touched. Files live in one output directory:
//
//   dataset.csv, split.json            gen-data
//   <role>.tpam, <role>.train.json     train
//   adv_<kind>.csv, attack_<kind>.json attack
//   transfer_report.json, asr_matrix.csv evaluate
//   bound_<kind>.json                  bound
//   sin_demo.csv                       demo-sin
//   hvp_curve.csv                      hvp-curve

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tpa/attacks.hpp"
#include "tpa/checkpoint.hpp"
#include "tpa/config.hpp"
#include "tpa/data.hpp"
#include "tpa/error.hpp"
#include "tpa/flatness.hpp"
#include "tpa/model.hpp"
#include "tpa/oracle.hpp"
#include "tpa/report.hpp"
#include "tpa/rng.hpp"
#include "tpa/training.hpp"

namespace tpa {

namespace fs = std::filesystem;

struct DataSpec {
  std::string source = "blobs";  // "blobs" or "idx"
  std::size_t n_classes = 10;
  std::size_t dim = 64;
  std::size_t n_per_class = 200;
  double sigma = 0.3;
  fs::path idx_images;
  fs::path idx_labels;
};

struct RoleSpec {
  std::size_t hidden = 64;
  std::size_t depth = 1;
  std::size_t residual_blocks = 1;
  Activation activation = Activation::relu;
  TrainConfig train;
};

inline const std::vector<std::string>& model_roles() {
  static const std::vector<std::string> roles{"proxy", "target"};
  return roles;
}

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataSpec data;
  SplitSpec split;
  std::map<std::string, RoleSpec> roles;
  std::vector<AttackConfig> attacks;
  BoundConfig bound;
  std::size_t threads = 1;

  const AttackConfig& attack(AttackKind kind) const {
    for (const auto& a : attacks)
      if (a.kind == kind) return a;
    throw ConfigError("attack '" + std::string(to_string(kind)) + "' is not configured");
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

inline AttackConfig resolve_attack(const KeyValueConfig& kv, AttackKind kind, std::uint64_t master) {
  AttackConfig c = default_attack_config(kind);
  c.epsilon = kv.get_double("attack.epsilon", c.epsilon * kPixelScale) / kPixelScale;
  c.step_size = kv.get_double("attack.step_size", c.step_size * kPixelScale) / kPixelScale;
  c.iterations = kv.get_uint("attack.iterations", c.iterations);
  c.targeted = kv.get_bool("attack.targeted", c.targeted);
  if (const auto t = kv.get("attack.target_class"); t && *t != "auto") c.target_class = kv.get_uint("attack.target_class", 0);
  c.lambda = kv.get_double("attack.tpa.lambda", c.lambda);
  c.b = kv.get_double("attack.tpa.b", c.b * kPixelScale) / kPixelScale;
  c.k = kv.get_double("attack.tpa.k", c.k);
  c.n_samples = kv.get_uint("attack.tpa.n_samples", c.n_samples);
  c.resample_neighbors = kv.get_bool("attack.tpa.resample", c.resample_neighbors);
  c.momentum_decay = kv.get_double("attack.mi.decay", c.momentum_decay);
  c.vt_samples = kv.get_uint("attack.vt.samples", c.vt_samples);
  c.vt_beta = kv.get_double("attack.vt.beta", c.vt_beta);
  c.rap_inner_steps = kv.get_uint("attack.rap.inner_steps", c.rap_inner_steps);
  c.rap_radius = kv.get_double("attack.rap.radius", c.rap_radius * kPixelScale) / kPixelScale;
  c.seed = kv.contains("attack.seed") ? kv.get_uint("attack.seed", 0) : derive_seed(master, "attack");
  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("attack.") + std::string(to_string(kind)) + ": " + e.what());
  }
  return c;
}

}  // namespace detail

/// Builds the experiment from key=value settings. Throws ConfigError for a
/// missing seed, a malformed value or a key nobody reads.
inline ExperimentConfig resolve_config(const KeyValueConfig& kv) {
  ExperimentConfig c;
  if (!kv.contains("seed")) throw ConfigError(kv.source() + ": master seed missing (set seed= or pass --seed)");
  c.seed = kv.get_uint("seed", 0);
  c.threads = kv.get_uint("threads", 1);
  if (c.threads == 0) throw ConfigError("threads must be at least 1");

  DataSpec& d = c.data;
  d.source = kv.get_string("data.source", d.source);
  if (d.source != "blobs" && d.source != "idx") throw ConfigError("data.source must be blobs or idx, got '" + d.source + "'");
  d.n_classes = kv.get_uint("data.n_classes", d.n_classes);
  d.dim = kv.get_uint("data.dim", d.dim);
  d.n_per_class = kv.get_uint("data.n_per_class", d.n_per_class);
  d.sigma = kv.get_double("data.sigma", d.sigma);
  d.idx_images = kv.get_string("data.idx.images", "");
  d.idx_labels = kv.get_string("data.idx.labels", "");
  if (d.source == "idx" && (d.idx_images.empty() || d.idx_labels.empty())) {
    throw ConfigError("data.source=idx needs data.idx.images and data.idx.labels");
  }

  c.split.seed = derive_seed(c.seed, "split");
  c.split.proxy_fraction = kv.get_double("split.proxy", c.split.proxy_fraction);
  c.split.target_fraction = kv.get_double("split.target", c.split.target_fraction);
  c.split.eval_fraction = kv.get_double("split.eval", c.split.eval_fraction);
  c.split.disjoint = kv.get_bool("split.disjoint", c.split.disjoint);

  for (const std::string& role : model_roles()) {
    RoleSpec r;
    const std::string m = "model." + role + ".", t = "train." + role + ".";
    r.hidden = kv.get_uint(m + "hidden", r.hidden);
    r.depth = kv.get_uint(m + "depth", r.depth);
    r.residual_blocks = kv.get_uint(m + "residual_blocks", r.residual_blocks);
    try {
      r.activation = parse_activation(kv.get_string(m + "activation", std::string(to_string(r.activation))));
    } catch (const Error& e) {
      throw ConfigError(m + "activation: " + e.what());
    }
    if (r.hidden == 0 || r.depth == 0) throw ConfigError(m + "hidden and " + m + "depth must be positive");
    r.train.epochs = kv.get_uint(t + "epochs", 30);
    r.train.batch_size = kv.get_uint(t + "batch_size", r.train.batch_size);
    r.train.learning_rate = kv.get_double(t + "learning_rate", r.train.learning_rate);
    r.train.momentum = kv.get_double(t + "momentum", r.train.momentum);
    r.train.seed = derive_seed(c.seed, "train." + role);
    try {
      r.train.validate();
    } catch (const Error& e) {
      throw ConfigError(t + ": " + e.what());
    }
    c.roles[role] = r;
  }

  for (const std::string& name : detail::split_list(kv.get_string("attack.kinds", "bim,mi,ni,vt,rap,tpa"))) {
    c.attacks.push_back(detail::resolve_attack(kv, parse_attack_kind(name), c.seed));
  }

  c.bound.C = kv.get_double("bound.C", c.bound.C);
  c.bound.h = kv.get_double("bound.h", c.bound.h);
  c.bound.b_for_norm = kv.get_double("bound.b", c.bound.b_for_norm * kPixelScale) / kPixelScale;
  c.bound.n_samples = kv.get_uint("bound.n_samples", c.bound.n_samples);
  c.bound.seed = derive_seed(c.seed, "bound");
  c.bound.threads = c.threads;
  try {
    c.bound.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("bound: ") + e.what());
  }

  if (const auto unused = kv.unused_keys(); !unused.empty()) throw ConfigError(kv.source() + ": unknown key '" + *unused.begin() + "'");
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  json roles = json::object();
  for (const auto& [name, r] : c.roles) {
    roles[name] = {{"hidden", r.hidden},
                   {"depth", r.depth},
                   {"residual_blocks", r.residual_blocks},
                   {"activation", to_string(r.activation)},
                   {"train",
                    {{"epochs", r.train.epochs},
                     {"batch_size", r.train.batch_size},
                     {"learning_rate", r.train.learning_rate},
                     {"momentum", r.train.momentum},
                     {"seed", r.train.seed}}}};
  }
  json attacks = json::array();
  for (const auto& a : c.attacks) attacks.push_back(to_json(a));
  return {{"seed", c.seed},
          {"data",
           {{"source", c.data.source},
            {"n_classes", c.data.n_classes},
            {"dim", c.data.dim},
            {"n_per_class", c.data.n_per_class},
            {"sigma", c.data.sigma},
            {"idx_images", c.data.idx_images.string()},
            {"idx_labels", c.data.idx_labels.string()}}},
          {"split",
           {{"seed", c.split.seed},
            {"proxy", c.split.proxy_fraction},
            {"target", c.split.target_fraction},
            {"eval", c.split.eval_fraction},
            {"disjoint", c.split.disjoint}}},
          {"models", roles},
          {"attacks", attacks},
          {"bound",
           {{"C", c.bound.C},
            {"h", c.bound.h},
            {"b", c.bound.b_for_norm},
            {"b_pixels", c.bound.b_for_norm * kPixelScale},
            {"n_samples", c.bound.n_samples},
            {"seed", c.bound.seed}}}};
}

// ---------------------------------------------------------------------------
// Artifacts

struct Workspace {
  fs::path dir;

  fs::path dataset() const { return dir / "dataset.csv"; }
  fs::path split() const { return dir / "split.json"; }
  fs::path checkpoint(const std::string& role) const { return dir / (role + ".tpam"); }
  fs::path train_report(const std::string& role) const { return dir / (role + ".train.json"); }
  fs::path adv_csv(AttackKind k) const { return dir / ("adv_" + std::string(to_string(k)) + ".csv"); }
  fs::path attack_report(AttackKind k) const { return dir / ("attack_" + std::string(to_string(k)) + ".json"); }
  fs::path transfer_report() const { return dir / "transfer_report.json"; }
  fs::path asr_matrix() const { return dir / "asr_matrix.csv"; }
  fs::path bound_report(AttackKind k) const { return dir / ("bound_" + std::string(to_string(k)) + ".json"); }
  fs::path sin_demo() const { return dir / "sin_demo.csv"; }
  fs::path hvp_curve() const { return dir / "hvp_curve.csv"; }

  void ensure() const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  }
};

struct LoadedData {
  Dataset data;
  Split split;
};

inline void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

inline LoadedData load_data(const Workspace& ws) {
  require_file(ws.split(), "split manifest");
  require_file(ws.dataset(), "dataset");
  const json manifest = read_json(ws.split());
  LoadedData out;
  try {
    out.data = load_dataset_csv(ws.dataset(), manifest.at("n_classes").get<std::size_t>());
    out.split.proxy_train = manifest.at("proxy_train").get<std::vector<std::size_t>>();
    out.split.target_train = manifest.at("target_train").get<std::vector<std::size_t>>();
    out.split.eval = manifest.at("eval").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw FormatError(ws.split().string() + ": " + e.what());
  }
  for (const auto* part : {&out.split.proxy_train, &out.split.target_train, &out.split.eval})
    for (std::size_t i : *part)
      if (i >= out.data.size()) throw ConsistencyError("split index " + std::to_string(i) + " outside the dataset");
  return out;
}

inline Model load_role(const Workspace& ws, const std::string& role) {
  require_file(ws.checkpoint(role), "checkpoint");
  return load_checkpoint(ws.checkpoint(role));
}

struct LoadedAttack {
  AttackConfig config;
  std::vector<std::size_t> indices;
  std::vector<AttackResult> results;
};

/// Rebuilds attack results from attack_<kind>.json and adv_<kind>.csv.
inline LoadedAttack load_attack(const Workspace& ws, AttackKind kind, const Dataset& data) {
  require_file(ws.attack_report(kind), "attack report");
  require_file(ws.adv_csv(kind), "adversarial set");
  const json report = read_json(ws.attack_report(kind));
  const Dataset adv = load_dataset_csv(ws.adv_csv(kind), data.n_classes);
  LoadedAttack out;
  try {
    out.indices = report.at("indices").get<std::vector<std::size_t>>();
    const json& examples = report.at("examples");
    if (examples.size() != out.indices.size() || adv.size() != out.indices.size()) {
      throw ConsistencyError("attack report and adversarial set disagree on example count");
    }
    for (std::size_t j = 0; j < out.indices.size(); ++j) {
      const json& e = examples.at(j);
      AttackResult r;
      r.label = e.at("label").get<std::size_t>();
      r.attacked_class = e.at("attacked_class").get<std::size_t>();
      r.targeted = e.at("targeted").get<bool>();
      r.success_on_proxy = e.at("success_on_proxy").get<bool>();
      r.delta = Tensor::vector(e.at("delta").get<std::vector<double>>());
      r.adv_input = Tensor::vector(std::vector<double>(adv.input(j).begin(), adv.input(j).end()));
      if (r.delta.size() != data.dim()) throw ConsistencyError("delta length does not match dataset dim");
      out.results.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError(ws.attack_report(kind).string() + ": " + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_gen_data(const ExperimentConfig& cfg, const Workspace& ws) {
  Dataset data;
  try {
    if (cfg.data.source == "idx") {
      data = load_idx(cfg.data.idx_images, cfg.data.idx_labels);
    } else {
      data = gen_blobs(derive_seed(cfg.seed, "data"), cfg.data.n_classes, cfg.data.dim, cfg.data.n_per_class, cfg.data.sigma);
    }
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  Split split;
  try {
    split = make_split(data.size(), cfg.split);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("split: ") + e.what());
  }
  ws.ensure();
  save_dataset_csv(data, ws.dataset());
  write_json({{"config", to_json(cfg)},
              {"n", data.size()},
              {"dim", data.dim()},
              {"n_classes", data.n_classes},
              {"dataset_sha256", sha256_file(ws.dataset())},
              {"proxy_train", split.proxy_train},
              {"target_train", split.target_train},
              {"eval", split.eval}},
             ws.split());
}

inline void cmd_train(const ExperimentConfig& cfg, const Workspace& ws, const std::string& role) {
  const auto it = cfg.roles.find(role);
  if (it == cfg.roles.end()) throw ConfigError("unknown model role '" + role + "'");
  const RoleSpec& r = it->second;
  const LoadedData ld = load_data(ws);
  const auto& idx = role == "proxy" ? ld.split.proxy_train : ld.split.target_train;
  const Dataset train_set = subset(ld.data, idx);
  const Dataset eval_set = subset(ld.data, ld.split.eval);
  const auto spec = mlp_spec(ld.data.dim(), r.hidden, ld.data.n_classes, r.depth, r.residual_blocks, r.activation);
  const TrainResult res = train(spec, derive_seed(cfg.seed, "init." + role), train_set, r.train, &eval_set);
  ws.ensure();
  save_checkpoint(res.model, ws.checkpoint(role));
  write_json({{"config", to_json(cfg)},
              {"role", role},
              {"architecture", architecture_json(res.model)},
              {"dataset_sha256", sha256_file(ws.dataset())},
              {"checkpoint_sha256", sha256_file(ws.checkpoint(role))},
              {"report", to_json(res.report)}},
             ws.train_report(role));
}

inline double mean_final_surrogate(const ExperimentConfig& cfg, const Model& proxy, const Dataset& data,
                                   std::span<const std::size_t> indices, std::span<const AttackResult> results) {
  if (indices.empty()) return 0.0;
  std::vector<double> values(indices.size());
  parallel_for(indices.size(), cfg.threads, [&](std::size_t j) {
    const AttackResult& r = results[j];
    values[j] = surrogate_value(proxy, data.input(indices[j]), r.delta, r.attacked_class, cfg.bound.b_for_norm, cfg.bound.n_samples,
                                derive_seed(cfg.seed, "surrogate", {indices[j]}));
  });
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

inline void cmd_attack(const ExperimentConfig& cfg, const Workspace& ws, AttackKind kind) {
  const AttackConfig& ac = cfg.attack(kind);
  const LoadedData ld = load_data(ws);
  const Model proxy = load_role(ws, "proxy");
  if (proxy.input_dim() != ld.data.dim() || proxy.n_classes() != ld.data.n_classes) {
    throw ConsistencyError("proxy checkpoint does not match the dataset");
  }
  const auto& idx = ld.split.eval;
  const std::vector<AttackResult> results = attack_dataset(proxy, ld.data, idx, ac, cfg.threads);

  Dataset adv;
  adv.n_classes = ld.data.n_classes;
  std::vector<double> values;
  values.reserve(idx.size() * ld.data.dim());
  json examples = json::array();
  std::size_t proxy_success = 0;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    values.insert(values.end(), results[j].adv_input.begin(), results[j].adv_input.end());
    adv.labels.push_back(ld.data.labels[idx[j]]);
    json e = to_json(results[j]);
    e["index"] = idx[j];
    examples.push_back(std::move(e));
    if (results[j].success_on_proxy) ++proxy_success;
  }
  adv.inputs = Tensor({idx.size(), ld.data.dim()}, std::move(values));
  ws.ensure();
  save_dataset_csv(adv, ws.adv_csv(kind));
  const double rate = idx.empty() ? 0.0 : static_cast<double>(proxy_success) / static_cast<double>(idx.size());
  write_json({{"config", to_json(cfg)},
              {"attack", to_json(ac)},
              {"proxy_sha256", sha256_file(ws.checkpoint("proxy"))},
              {"dataset_sha256", sha256_file(ws.dataset())},
              {"summary",
               {{"n", idx.size()},
                {"proxy_successes", proxy_success},
                {"proxy_success_rate", rate},
                {"mean_surrogate", mean_final_surrogate(cfg, proxy, ld.data, idx, results)}}},
              {"indices", idx},
              {"examples", examples}},
             ws.attack_report(kind));
}

struct TransferEntry {
  std::string proxy;
  std::string target;
  AttackKind attack;
  TransferOutcome outcome;
  double mean_surrogate = 0.0;
};

/// Evaluates every configured attack whose artifacts exist on the target.
inline std::vector<TransferEntry> cmd_evaluate(const ExperimentConfig& cfg, const Workspace& ws) {
  const LoadedData ld = load_data(ws);
  const Model proxy = load_role(ws, "proxy");
  const Model target = load_role(ws, "target");
  if (proxy.n_classes() != target.n_classes() || proxy.input_dim() != target.input_dim()) {
    throw ConsistencyError("proxy and target models disagree on input or label space");
  }
  if (target.n_classes() != ld.data.n_classes) throw ConsistencyError("target checkpoint does not match the dataset label space");

  std::vector<TransferEntry> entries;
  json rows = json::array();
  json hashes = {{"proxy_sha256", sha256_file(ws.checkpoint("proxy"))}, {"target_sha256", sha256_file(ws.checkpoint("target"))}};
  for (const AttackConfig& ac : cfg.attacks) {
    if (!fs::exists(ws.attack_report(ac.kind))) continue;
    const LoadedAttack la = load_attack(ws, ac.kind, ld.data);
    TransferEntry e{"proxy", "target", ac.kind, evaluate_transfer(target, ld.data, la.indices, la.results), 0.0};
    e.mean_surrogate = read_json(ws.attack_report(ac.kind)).at("summary").at("mean_surrogate").get<double>();
    hashes["attack_" + std::string(to_string(ac.kind)) + "_sha256"] = sha256_file(ws.attack_report(ac.kind));
    json row = to_json(e.outcome);
    row["proxy"] = e.proxy;
    row["target"] = e.target;
    row["attack"] = to_string(e.attack);
    row["mean_surrogate"] = e.mean_surrogate;
    rows.push_back(std::move(row));
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw IoError("no attack artifacts found in " + ws.dir.string());

  const Dataset eval_set = subset(ld.data, ld.split.eval);
  write_json({{"config", to_json(cfg)},
              {"inputs", hashes},
              {"clean_accuracy", {{"proxy", to_json(evaluate_accuracy(proxy, eval_set))}, {"target", to_json(evaluate_accuracy(target, eval_set))}}},
              {"entries", rows}},
             ws.transfer_report());
  std::ofstream csv(ws.asr_matrix(), std::ios::trunc);
  if (!csv) throw IoError("cannot write " + ws.asr_matrix().string());
  csv << "proxy,target,attack,asr,successes,eligible,undefined\n";
  for (const auto& e : entries) {
    csv << e.proxy << ',' << e.target << ',' << to_string(e.attack) << ',' << format_double(e.outcome.asr) << ','
        << e.outcome.successes << ',' << e.outcome.eligible << ',' << (e.outcome.undefined ? "true" : "false") << '\n';
  }
  if (!csv) throw IoError("write failed for " + ws.asr_matrix().string());
  return entries;
}

inline BoundReport cmd_bound(const ExperimentConfig& cfg, const Workspace& ws, AttackKind kind) {
  const LoadedData ld = load_data(ws);
  const Model proxy = load_role(ws, "proxy");
  const Model target = load_role(ws, "target");
  const LoadedAttack la = load_attack(ws, kind, ld.data);
  std::vector<Tensor> deltas;
  for (const auto& r : la.results) deltas.push_back(r.delta);
  const BoundReport report = bound_components(proxy, target, ld.data, la.indices, deltas, cfg.bound);
  write_json({{"config", to_json(cfg)},
              {"attack", to_string(kind)},
              {"inputs",
               {{"proxy_sha256", sha256_file(ws.checkpoint("proxy"))},
                {"target_sha256", sha256_file(ws.checkpoint("target"))},
                {"attack_sha256", sha256_file(ws.attack_report(kind))}}},
              {"report", to_json(report)}},
             ws.bound_report(kind));
  return report;
}

inline LandscapeDemo cmd_demo_sin(const Workspace& ws, double x_min, double x_max, std::size_t points) {
  LandscapeDemo demo;
  try {
    demo = sin_landscape_demo(x_min, x_max, points);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("demo-sin: ") + e.what());
  }
  ws.ensure();
  std::ofstream out(ws.sin_demo(), std::ios::trunc);
  if (!out) throw IoError("cannot write " + ws.sin_demo().string());
  write_landscape_csv(demo, out);
  if (!out) throw IoError("write failed for " + ws.sin_demo().string());
  return demo;
}

inline std::vector<HvpErrorPoint> cmd_hvp_curve(const ExperimentConfig& cfg, const Workspace& ws, std::span<const double> ks,
                                                std::size_t n_points) {
  const LoadedData ld = load_data(ws);
  const Model proxy = load_role(ws, "proxy");
  std::vector<std::size_t> idx(ld.split.eval.begin(),
                               ld.split.eval.begin() + static_cast<std::ptrdiff_t>(std::min(n_points, ld.split.eval.size())));
  (void)cfg;
  const auto curve = hvp_error_curve(proxy, ld.data, idx, ks);
  std::ofstream out(ws.hvp_curve(), std::ios::trunc);
  if (!out) throw IoError("cannot write " + ws.hvp_curve().string());
  write_hvp_curve_csv(curve, out);
  return curve;
}

/// gen-data, train both roles, attack with every configured kind, evaluate,
/// and bound for each kind.
inline void cmd_pipeline(const ExperimentConfig& cfg, const Workspace& ws) {
  cmd_gen_data(cfg, ws);
  for (const std::string& role : model_roles()) cmd_train(cfg, ws, role);
  for (const AttackConfig& ac : cfg.attacks) cmd_attack(cfg, ws, ac.kind);
  cmd_evaluate(cfg, ws);
  for (const AttackConfig& ac : cfg.attacks) cmd_bound(cfg, ws, ac.kind);
}

/// Process exit code for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e) ||
      dynamic_cast<const ConsistencyError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const IndexError*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return 3;
  return 1;
}

}  // namespace tpa

#endif  // TPA_HARNESS_HPP
