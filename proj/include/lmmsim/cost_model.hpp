/* Copyright 2026 The lmmsim Authors.
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
#pragma once

#include "lmmsim/encoder_sched.hpp"
#include "lmmsim/errors.hpp"
#include "lmmsim/request.hpp"

namespace lmmsim {

// Analytic cost model, all times in virtual milliseconds. Coefficients are
// calibration knobs supplied by the experiment config, not measurements.
//
//   encode batch:   alpha_enc + beta_enc * tokens
//   transfer:       eps_tx + zeta_tx * tokens       (0/0 = co-located)
//   pipeline stage: (gamma_stage + delta_stage * chunk_tokens
//                     + kappa_attn * chunk_tokens * context_tokens)
//                   / tp_speedup
//
// The fixed encode term models the GPU underutilization of small batches;
// the quadratic attention term defaults to 0 (the linear model is enough
// for every ordering property; the knob exists for sensitivity studies).
// tp_speedup is the abstract tensor-parallel knob: a scalar dividing stage
// times, nothing more.
struct CostModel {
  double alpha_enc_ms = 0;
  double beta_enc_ms_per_token = 0;
  double eps_tx_ms = 0;
  double zeta_tx_ms_per_token = 0;
  double gamma_stage_ms = 0;
  double delta_stage_ms_per_token = 0;
  double kappa_attn_ms = 0;
  double tp_speedup = 1.0;

  void validate() const {
    const auto nonneg = [](double v, const char* field) {
      if (!(v >= 0)) throw ConfigError(std::string("cost_model.") + field +
                                       ": must be >= 0");
    };
    nonneg(alpha_enc_ms, "alpha_enc_ms");
    nonneg(beta_enc_ms_per_token, "beta_enc_ms_per_token");
    nonneg(eps_tx_ms, "eps_tx_ms");
    nonneg(zeta_tx_ms_per_token, "zeta_tx_ms_per_token");
    nonneg(gamma_stage_ms, "gamma_stage_ms");
    nonneg(delta_stage_ms_per_token, "delta_stage_ms_per_token");
    nonneg(kappa_attn_ms, "kappa_attn_ms");
    if (!(tp_speedup >= 1.0))
      throw ConfigError("cost_model.tp_speedup: must be >= 1");
    if (beta_enc_ms_per_token == 0 && delta_stage_ms_per_token == 0)
      throw ConfigError(
          "cost_model: at least one of beta_enc_ms_per_token and "
          "delta_stage_ms_per_token must be > 0");
  }
};

inline double encode_time_ms(const CostModel& cm, const EncodeBatch& batch) {
  return cm.alpha_enc_ms +
         cm.beta_enc_ms_per_token * static_cast<double>(batch.total_tokens);
}

// Time of one chunk at one pipeline stage. context_tokens is the number of
// already-prefilled tokens the chunk attends to (token-weighted mean when a
// chunk mixes requests); it only matters when kappa_attn is nonzero.
inline double stage_time_ms(const CostModel& cm, TokenCount chunk_tokens,
                            double context_tokens) {
  const double ct = static_cast<double>(chunk_tokens);
  return (cm.gamma_stage_ms + cm.delta_stage_ms_per_token * ct +
          cm.kappa_attn_ms * ct * context_tokens) /
         cm.tp_speedup;
}

// Encoder-to-prefill embedding shipment latency. The link is pure latency
// with unlimited parallelism; co-located deployments set both terms to 0.
inline double transfer_time_ms(const CostModel& cm, TokenCount tokens) {
  return cm.eps_tx_ms + cm.zeta_tx_ms_per_token * static_cast<double>(tokens);
}

}  // namespace lmmsim
