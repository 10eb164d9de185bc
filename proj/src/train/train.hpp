// Copyright 2026 The ecss-desk Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ad/params.hpp"
#include "corpus/corpus.hpp"
#include "model/model.hpp"

namespace ecss::train {

struct TrainConfig {
  model::ModelConfig model = model::lite_profile();
  int batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  int warmup_steps = 0;  // linear ramp of the learning rate, off by default
  int max_steps = 2000;
  int context_length = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossBreakdown {
  long step = 0;
  double l_cl_emo = 0.0;
  double l_cl_int = 0.0;
  double l_mse_pro = 0.0;
  double l_fs2 = 0.0;
  double total = 0.0;
  // Components of l_fs2.
  double fs2_mel = 0.0;
  double fs2_pitch = 0.0;
  double fs2_energy = 0.0;
  double fs2_duration = 0.0;
  // Cross-entropy of the detached logits heads; outside `total`.
  double probe_emo = 0.0;
  double probe_int = 0.0;
};

// total = l_cl_emo + l_cl_int + l_mse_pro + l_fs2.
LossBreakdown total_loss(double l_cl_emo, double l_cl_int, double l_mse_pro,
                         double l_fs2);

struct AdamState {
  std::vector<ad::Mat> m;
  std::vector<ad::Mat> v;
  long step = 0;

  static AdamState zeros(const ad::ParamStore& params);
};

// Bias-corrected Adam; empty gradient entries count as zero.
void adam_step(ad::ParamStore& params, const ad::GradSet& grads, AdamState& state,
               const TrainConfig& config);

struct WindowRef {
  int conversation = 0;
  int index = 0;  // current turn, >= 1

  bool operator==(const WindowRef&) const = default;
};

// Every (conversation, turn >= 1) pair.
std::vector<WindowRef> all_windows(const corpus::Corpus& corpus);

// The batch for `step`: distinct conversations while enough exist, a random
// turn within each. A pure function of (seed, step).
std::vector<WindowRef> sample_batch(const corpus::Corpus& corpus, int batch_size,
                                    std::uint64_t seed, long step);

struct BatchResult {
  LossBreakdown losses;
  ad::GradSet grads;
  std::vector<ecg::Counts> graph_counts;
};

// Forward and backward over one batch. Per-sample work runs on up to
// `config.threads` workers; gradients are reduced in batch order.
BatchResult compute_batch(const model::Model& model, const corpus::Corpus& corpus,
                          const std::vector<WindowRef>& batch,
                          const TrainConfig& config, long step);

class Trainer {
 public:
  Trainer(const TrainConfig& config, const corpus::Corpus& corpus);

  const TrainConfig& config() const { return config_; }
  model::Model& model() { return model_; }
  const model::Model& model() const { return model_; }
  AdamState& adam() { return adam_; }
  const AdamState& adam() const { return adam_; }
  long step() const { return adam_.step; }

  // Runs one optimizer step and returns the losses of the batch it used.
  LossBreakdown train_step();
  // Steps until `config.max_steps`, calling `on_step` after each.
  void run(const std::function<void(const LossBreakdown&)>& on_step = {});

 private:
  TrainConfig config_;
  const corpus::Corpus& corpus_;
  model::Model model_;
  AdamState adam_;
};

// Magic "ECSS", u32 version, u32 length + config JSON, u32 tensor count, then
// per tensor u32 name length, name, u32 rank, u32 dims, float64 data; a
// trailing u64 FNV-1a of everything before it. Little-endian throughout.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config,
                     const model::Model& model, const AdamState& adam);

struct Checkpoint {
  std::uint32_t version = 0;
  TrainConfig config;
  std::vector<std::pair<std::string, ad::Mat>> tensors;

  const ad::Mat* find(std::string_view name) const;
};

// Integrity error on truncation or checksum mismatch, nothing is applied.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies parameters (and Adam state when given) into an existing model.
// Refuses checkpoints whose model configuration differs from the model's.
void restore(const Checkpoint& ckpt, model::Model& model, AdamState* adam);

// Fresh trainer continuing from a checkpoint; the run configuration may only
// differ from the stored one in max_steps and threads.
Trainer resume_trainer(const Checkpoint& ckpt, const TrainConfig& config,
                       const corpus::Corpus& corpus);

// CSV header "step,l_cl_emo,l_cl_int,l_mse_pro,l_fs2,total".
std::string metrics_header();
std::string metrics_row(const LossBreakdown& l);

}  // namespace ecss::train
