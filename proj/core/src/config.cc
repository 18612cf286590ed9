/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/src/config.cc
 */
#include "splitserve/config.h"

#include <array>
#include <cmath>

#include "json.hpp"
#include "splitserve/errors.h"

namespace splitserve {

using nlohmann::json;

void ModelConfig::Validate() const {
  SPLITSERVE_CHECK(layers >= 1, ErrorCode::kInvalidArgument, "layers must be >= 1");
  SPLITSERVE_CHECK(dim >= 1, ErrorCode::kInvalidArgument, "dim must be >= 1");
  SPLITSERVE_CHECK(vocab >= 2, ErrorCode::kInvalidArgument, "vocab must be >= 2");
}

void CostModel::Validate() const {
  SPLITSERVE_CHECK(alpha >= 0 && beta >= 0 && gamma >= 0 && delta >= 0 && c0 >= 0 && c1 >= 0,
                   ErrorCode::kInvalidArgument, "cost constants must be non-negative");
}

void CacheConfig::Validate() const {
  SPLITSERVE_CHECK(num_pages >= 1, ErrorCode::kInvalidArgument, "num_pages must be >= 1");
  SPLITSERVE_CHECK(page_size >= 1 && (page_size & (page_size - 1)) == 0,
                   ErrorCode::kInvalidArgument, "page_size must be a power of two");
}

void EngineConfig::Validate() const {
  model.Validate();
  cost.Validate();
  cache.Validate();
}

// Measured per-layer anchors used to calibrate the virtual cost model:
// a 500-token prefill on top of growing context, and matching KV transfers.
const std::vector<PrefillAnchor>& DefaultPrefillAnchors() {
  static const std::vector<PrefillAnchor> anchors = {
      {500, 1000, 1.247},
      {500, 3000, 1.391},
      {500, 5000, 1.564},
  };
  return anchors;
}

const std::vector<TransferAnchor>& DefaultTransferAnchors() {
  static const std::vector<TransferAnchor> anchors = {
      {1000, 0.197},
      {3000, 0.533},
      {5000, 0.867},
  };
  return anchors;
}

namespace {
// Solves the 2x2 normal equations for y ~ p*f1 + q*f2.
void LeastSquares2(const std::vector<std::array<double, 3>>& rows,  // {f1, f2, y}
                   double* p, double* q) {
  double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
  for (const auto& r : rows) {
    a11 += r[0] * r[0];
    a12 += r[0] * r[1];
    a22 += r[1] * r[1];
    b1 += r[0] * r[2];
    b2 += r[1] * r[2];
  }
  double det = a11 * a22 - a12 * a12;
  SPLITSERVE_CHECK(std::abs(det) > 1e-30, ErrorCode::kInvalidArgument,
                   "degenerate calibration anchors");
  *p = (b1 * a22 - b2 * a12) / det;
  *q = (a11 * b2 - a12 * b1) / det;
}
}  // namespace

CostFitReport FitCostModel(const std::vector<PrefillAnchor>& prefill,
                           const std::vector<TransferAnchor>& transfer) {
  SPLITSERVE_CHECK(prefill.size() >= 2 && transfer.size() >= 2, ErrorCode::kInvalidArgument,
                   "need at least two anchors per fit");
  CostFitReport report;

  std::vector<std::array<double, 3>> rows;
  for (const auto& a : prefill) {
    double u = static_cast<double>(a.n_new);
    rows.push_back({u, u * static_cast<double>(a.n_total), a.layer_ms});
  }
  LeastSquares2(rows, &report.model.alpha, &report.model.beta);

  rows.clear();
  for (const auto& a : transfer) {
    rows.push_back({static_cast<double>(a.n_tokens), 1.0, a.layer_ms});
  }
  LeastSquares2(rows, &report.model.gamma, &report.model.delta);

  for (const auto& a : prefill) {
    double fit = report.model.PrefillLayerMs(a.n_new, a.n_total);
    double err = std::abs(fit - a.layer_ms) / a.layer_ms;
    report.prefill_rel_err.push_back(err);
    report.max_rel_err = std::max(report.max_rel_err, err);
  }
  for (const auto& a : transfer) {
    double fit = report.model.TransferLayerMs(a.n_tokens);
    double err = std::abs(fit - a.layer_ms) / a.layer_ms;
    report.transfer_rel_err.push_back(err);
    report.max_rel_err = std::max(report.max_rel_err, err);
  }
  return report;
}

CostModel DefaultCostModel() {
  static const CostModel model =
      FitCostModel(DefaultPrefillAnchors(), DefaultTransferAnchors()).model;
  return model;
}

namespace {
json CostToJson(const CostModel& c) {
  return json{{"alpha_ms_per_new_token", c.alpha},
              {"beta_ms_per_new_x_total_token", c.beta},
              {"gamma_ms_per_transferred_token", c.gamma},
              {"delta_ms_per_layer_transfer", c.delta},
              {"c0_ms_per_decode_step", c.c0},
              {"c1_ms_per_cached_token", c.c1}};
}
CostModel CostFromJson(const json& j) {
  CostModel c = DefaultCostModel();
  if (j.contains("alpha_ms_per_new_token")) c.alpha = j.at("alpha_ms_per_new_token");
  if (j.contains("beta_ms_per_new_x_total_token")) c.beta = j.at("beta_ms_per_new_x_total_token");
  if (j.contains("gamma_ms_per_transferred_token"))
    c.gamma = j.at("gamma_ms_per_transferred_token");
  if (j.contains("delta_ms_per_layer_transfer")) c.delta = j.at("delta_ms_per_layer_transfer");
  if (j.contains("c0_ms_per_decode_step")) c.c0 = j.at("c0_ms_per_decode_step");
  if (j.contains("c1_ms_per_cached_token")) c.c1 = j.at("c1_ms_per_cached_token");
  return c;
}
}  // namespace

EngineConfig EngineConfigFromJson(const std::string& json_text) {
  json j = json::parse(json_text);
  EngineConfig cfg;
  cfg.rank = j.value("rank", 0);
  if (j.contains("model")) {
    const json& m = j.at("model");
    cfg.model.layers = m.value("layers", cfg.model.layers);
    cfg.model.dim = m.value("dim", cfg.model.dim);
    cfg.model.vocab = m.value("vocab", cfg.model.vocab);
    cfg.model.hash_seed = m.value("hash_seed", cfg.model.hash_seed);
  }
  if (j.contains("cost")) cfg.cost = CostFromJson(j.at("cost"));
  else cfg.cost = DefaultCostModel();
  if (j.contains("cache")) {
    const json& c = j.at("cache");
    cfg.cache.num_pages = c.value("num_pages", cfg.cache.num_pages);
    cfg.cache.page_size = c.value("page_size", cfg.cache.page_size);
  }
  cfg.api_listen = j.value("api_listen", "");
  cfg.transfer_listen = j.value("transfer_listen", "");
  if (j.contains("peers")) {
    for (auto& [key, value] : j.at("peers").items()) {
      cfg.peers[static_cast<Rank>(std::stol(key))] = value.get<std::string>();
    }
  }
  cfg.Validate();
  return cfg;
}

std::string EngineConfigToJson(const EngineConfig& config) {
  json peers = json::object();
  for (const auto& [rank, addr] : config.peers) peers[std::to_string(rank)] = addr;
  json j{{"rank", config.rank},
         {"model",
          {{"layers", config.model.layers},
           {"dim", config.model.dim},
           {"vocab", config.model.vocab},
           {"hash_seed", config.model.hash_seed}}},
         {"cost", CostToJson(config.cost)},
         {"cache", {{"num_pages", config.cache.num_pages}, {"page_size", config.cache.page_size}}},
         {"api_listen", config.api_listen},
         {"transfer_listen", config.transfer_listen},
         {"peers", peers}};
  return j.dump(2);
}

}  // namespace splitserve
