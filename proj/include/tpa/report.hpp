#ifndef TPA_REPORT_HPP
#define TPA_REPORT_HPP

// JSON encodings of configs and results. Field names are the documented
// report schema (see README); doubles are written with round-trip precision.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>
#include <openssl/evp.h>

#include "tpa/attacks.hpp"
#include "tpa/config.hpp"
#include "tpa/error.hpp"
#include "tpa/flatness.hpp"
#include "tpa/training.hpp"

namespace tpa {

using nlohmann::json;

/// Attack settings in input units, plus the pixel-unit values they came from.
inline json to_json(const AttackConfig& c) {
  json j{{"kind", to_string(c.kind)},
         {"epsilon", c.epsilon},
         {"step_size", c.step_size},
         {"iterations", c.iterations},
         {"lambda", c.lambda},
         {"b", c.b},
         {"k", c.k},
         {"n_samples", c.n_samples},
         {"resample_neighbors", c.resample_neighbors},
         {"momentum_decay", c.momentum_decay},
         {"vt_samples", c.vt_samples},
         {"vt_beta", c.vt_beta},
         {"rap_inner_steps", c.rap_inner_steps},
         {"rap_radius", c.rap_radius},
         {"targeted", c.targeted},
         {"seed", c.seed}};
  j["target_class"] = c.target_class ? json(*c.target_class) : json(nullptr);
  j["pixel_units"] = {{"epsilon", c.epsilon * kPixelScale},
                      {"step_size", c.step_size * kPixelScale},
                      {"b", c.b * kPixelScale},
                      {"rap_radius", c.rap_radius * kPixelScale}};
  return j;
}

inline json to_json(const AttackResult& r) {
  json j{{"label", r.label},
         {"attacked_class", r.attacked_class},
         {"targeted", r.targeted},
         {"linf", norm_inf(r.delta)},
         {"l2", norm2(r.delta)},
         {"success_on_proxy", r.success_on_proxy},
         {"proxy_loss_trace", r.proxy_loss_trace},
         {"surrogate_trace", r.surrogate_trace},
         {"delta", r.delta.values()}};
  j["first_success"] = r.first_success ? json(*r.first_success) : json(nullptr);
  return j;
}

inline json to_json(const DiagonalCurvature& c) {
  return {{"sum", c.sum}, {"kink_coordinates", c.kink_coordinates}, {"smooth_sum", c.smooth_sum}};
}

inline json to_json(const BoundReport& r) {
  json examples = json::array();
  for (const ExampleBound& e : r.examples) {
    examples.push_back({{"gap_clean", e.gap_clean},
                        {"gap_adv", e.gap_adv},
                        {"proxy_loss_adv", e.proxy_loss_adv},
                        {"target_loss_adv", e.target_loss_adv},
                        {"delta_sq", e.delta_sq},
                        {"grad_gap_clean_sq", e.grad_gap_clean_sq},
                        {"grad_log_prob_sq", e.grad_log_prob_sq},
                        {"curvature", to_json(e.curvature)},
                        {"flatness", e.flatness},
                        {"rhs", e.rhs},
                        {"assumption3", e.assumption3},
                        {"assumption4", e.assumption4},
                        {"bound_holds", e.gap_adv * e.gap_adv <= e.rhs},
                        {"second_claim", e.second_claim},
                        {"second_claim_own_rhs", e.second_claim_own_rhs}});
  }
  return {{"mean_sq_transfer_gap", r.mean_sq_transfer_gap},
          {"model_diff_component", r.model_diff_component},
          {"first_order_component", r.first_order_component},
          {"second_order_component", r.second_order_component},
          {"rhs_total", r.rhs_total},
          {"lhs_target_loss_sq", r.lhs_target_loss_sq},
          {"mean_flatness", r.mean_flatness},
          {"C_used", r.C_used},
          {"n_examples", r.n_examples},
          {"undefined", r.undefined},
          {"bound_holds", r.bound_holds},
          {"kink_coordinates", r.kink_coordinates},
          {"assumption_violation_counts",
           {{"assumption3", r.assumption_violation_counts.assumption3_violations},
            {"assumption4", r.assumption_violation_counts.assumption4_violations},
            {"assumption5_architecture_satisfied", r.assumption_violation_counts.assumption5_architecture}}},
          {"second_claim", {{"holds", r.second_claim_holds}, {"eligible", r.second_claim_eligible}, {"rate", r.second_claim_rate},
                            {"holds_with_own_rhs", r.second_claim_own_rhs_holds}}},
          {"example_bound", {{"holds", r.example_bound_holds}, {"rate", r.example_bound_rate}}},
          {"examples", examples}};
}

inline json to_json(const TransferOutcome& t) {
  json examples = json::array();
  for (const auto& e : t.examples)
    examples.push_back({{"eligible", e.eligible}, {"success", e.success}, {"prediction", e.target_prediction}});
  return {{"eligible", t.eligible}, {"successes", t.successes}, {"asr", t.asr}, {"undefined", t.undefined}, {"examples", examples}};
}

/// Lowercase hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

inline void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace tpa

#endif  // TPA_REPORT_HPP
