/*!
 *  Copyright (c) 2025 by Contributors
 * \file core/include/splitserve/config.h
 * \brief Model, cost-model, cache and engine configuration.
 */
#ifndef SPLITSERVE_CONFIG_H_
#define SPLITSERVE_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "splitserve/common.h"

namespace splitserve {

/*!
 * \brief Configuration of the deterministic hash model.
 * Two processes with identical config produce byte-identical outputs.
 */
struct ModelConfig {
  int32_t layers = 4;       // attention layers L
  int32_t dim = 8;          // words per KV entry
  int32_t vocab = 256;      // next-token modulus V
  uint64_t hash_seed = 0x5eed5eed5eed5eedULL;

  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/*!
 * \brief Calibrated virtual-time cost model. All times are milliseconds
 *        per model layer; whole-step costs multiply by ModelConfig::layers.
 *
 * Prefill layer time: T(n_new, n_total) = alpha * n_new + beta * n_new * n_total.
 * Transfer layer time: X(n) = gamma * n + delta.
 * Decode layer time for one batch step: c0 + c1 * sum(kv_lens).
 */
struct CostModel {
  double alpha = 0.0;   // ms per new token
  double beta = 0.0;    // ms per (new token x total token)
  double gamma = 0.0;   // ms per transferred token
  double delta = 0.0;   // ms fixed per-layer transfer overhead
  double c0 = 0.05;     // ms per decode step (uncalibrated default)
  double c1 = 2e-5;     // ms per cached token in decode attention (uncalibrated default)

  double PrefillLayerMs(int64_t n_new, int64_t n_total) const {
    return alpha * static_cast<double>(n_new) +
           beta * static_cast<double>(n_new) * static_cast<double>(n_total);
  }
  double TransferLayerMs(int64_t n_tokens) const {
    if (n_tokens <= 0) return 0.0;
    return gamma * static_cast<double>(n_tokens) + delta;
  }
  /*! \brief One decode step over a batch; empty batch costs nothing. */
  double DecodeLayerMs(const std::vector<int64_t>& batch_kv_lens) const {
    if (batch_kv_lens.empty()) return 0.0;
    double kv = 0;
    for (int64_t n : batch_kv_lens) kv += static_cast<double>(n);
    return c0 + c1 * kv;
  }

  void Validate() const;
  bool operator==(const CostModel&) const = default;
};

/*! \brief One (n_new, n_total) -> per-layer-ms calibration sample. */
struct PrefillAnchor {
  int64_t n_new;
  int64_t n_total;
  double layer_ms;
};
struct TransferAnchor {
  int64_t n_tokens;
  double layer_ms;
};

/*! \brief Measured per-layer prefill/transfer anchors the defaults are fitted from. */
const std::vector<PrefillAnchor>& DefaultPrefillAnchors();
const std::vector<TransferAnchor>& DefaultTransferAnchors();

struct CostFitReport {
  CostModel model;
  std::vector<double> prefill_rel_err;   // one per prefill anchor
  std::vector<double> transfer_rel_err;  // one per transfer anchor
  double max_rel_err = 0.0;
};

/*!
 * \brief Least-squares fit of (alpha, beta) and (gamma, delta) against the
 *        given anchors. Decode constants keep their defaults.
 */
CostFitReport FitCostModel(const std::vector<PrefillAnchor>& prefill,
                           const std::vector<TransferAnchor>& transfer);

/*! \brief Cost model fitted from the default anchors. */
CostModel DefaultCostModel();

/*! \brief Paged KV storage geometry. */
struct CacheConfig {
  int64_t num_pages = 4096;
  int32_t page_size = 16;  // slots per page; power of two

  void Validate() const;
  int64_t TotalSlots() const { return num_pages * page_size; }
  bool operator==(const CacheConfig&) const = default;
};

/*! \brief Full per-engine configuration. */
struct EngineConfig {
  Rank rank = 0;
  ModelConfig model;
  CostModel cost;
  CacheConfig cache;
  std::string api_listen;                  // host:port for the REST API (service mode)
  std::string transfer_listen;             // host:port for the KV transfer plane
  std::map<Rank, std::string> peers;       // rank -> transfer host:port

  void Validate() const;
};

/*! \brief Bytes of KV data per token position (all layers, all words). */
inline int64_t BytesPerToken(const ModelConfig& m) {
  return static_cast<int64_t>(m.layers) * m.dim * 8;
}

EngineConfig EngineConfigFromJson(const std::string& json_text);
std::string EngineConfigToJson(const EngineConfig& config);

}  // namespace splitserve

#endif  // SPLITSERVE_CONFIG_H_
