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
#include <memory>
#include <optional>

#include "corpus/corpus.hpp"
#include "ecg/ecg.hpp"
#include "model/config.hpp"
#include "model/encoders.hpp"
#include "model/hgt.hpp"
#include "model/renderer.hpp"
#include "model/synthesizer.hpp"

namespace ecss::model {

struct ForwardOptions {
  // Dropout on, teacher pitch/energy in the embedding add-back.
  bool training = false;
  std::uint64_t dropout_seed = 0;
  // Length regulation from target durations; required for fs2 losses.
  bool teacher_durations = true;
};

struct SampleOutput {
  ecg::Counts graph_counts;
  RenderedFeatures rendered;
  Var prosody_loss;  // invalid when teacher targets are unavailable
  VarianceOutput variance;
  Var mel;
  std::optional<Fs2Loss> fs2;
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  const ecg::Schema& schema() const { return schema_; }
  ad::ParamStore& params() { return *params_; }
  const ad::ParamStore& params() const { return *params_; }

  const Encoders& encoders() const { return encoders_; }
  const Hgt& hgt() const { return hgt_; }
  const Renderer& renderer() const { return renderer_; }

  // One context window through graph construction, encoding, rendering and
  // synthesis, recorded on `tape`.
  SampleOutput forward(ad::Tape& tape, const corpus::ContextWindow& window,
                       const ForwardOptions& options) const;

 private:
  ModelConfig config_;
  ecg::Schema schema_;
  std::unique_ptr<ad::ParamStore> params_;
  std::unique_ptr<ExternalEmbeddings> external_;
  Encoders encoders_;
  Hgt hgt_;
  Renderer renderer_;
  TextEncoder text_encoder_;
  EmbeddingTable speaker_embedding_;
  Aggregator aggregator_;
  VarianceAdaptor variance_;
  MelDecoder decoder_;
};

}  // namespace ecss::model
