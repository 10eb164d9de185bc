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

#include "model/model.hpp"

#include "util/error.hpp"
#include "util/rng.hpp"

namespace ecss::model {

Model::Model(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      schema_(ecg::make_schema(config.ablation.dropped_kinds())),
      params_(std::make_unique<ad::ParamStore>()) {
  config_.validate();
  Rng rng(derive_seed(seed, {0x1417}));
  ad::ParamStore& ps = *params_;
  encoders_ = Encoders::create(ps, config_, rng);
  if (config_.text_mode == TextMode::kExternal) {
    external_ = std::make_unique<ExternalEmbeddings>(
        ExternalEmbeddings::load(config_.text_embeddings_path, config_.text_dim));
    encoders_.external = external_.get();
  }
  hgt_ = Hgt::create(ps, config_, rng);
  renderer_ = Renderer::create(ps, config_, rng);
  text_encoder_ = TextEncoder::create(ps, config_, rng);
  speaker_embedding_ = EmbeddingTable::create(ps, "syn.speaker", corpus::kNumSpeakers,
                                              config_.model_dim, rng);
  aggregator_ = Aggregator::create(ps, config_, rng);
  variance_ = VarianceAdaptor::create(ps, config_, rng);
  decoder_ = MelDecoder::create(ps, config_, rng);
}

SampleOutput Model::forward(ad::Tape& tape, const corpus::ContextWindow& window,
                            const ForwardOptions& options) const {
  require(window.current != nullptr && window.history_length() >= 1,
          ErrorKind::kValidation, "context window needs at least one history turn");
  Rng dropout_rng(options.dropout_seed);
  nn::Ctx ctx{tape, *params_, options.training ? &dropout_rng : nullptr,
              options.training ? config_.dropout : 0.0};
  const corpus::Utterance& current = *window.current;

  SampleOutput out;
  const ecg::EcgGraph graph = ecg::build_ecg(window, schema_);
  out.graph_counts = {graph.node_count(), graph.edge_count()};
  const std::vector<Var> features = encoders_.init_node_features(ctx, graph, window);
  const EncodedGraph encoded = hgt_.forward(ctx, graph, features);

  const bool detach_heads = !config_.ablation.cross_entropy;
  out.rendered.emotion = renderer_.predict_emotion(ctx, encoded, detach_heads);
  out.rendered.intensity = renderer_.predict_intensity(ctx, encoded, detach_heads);
  const int current_text =
      graph.index_of({ecg::NodeKind::kText, graph.history_length});
  out.rendered.prosody = renderer_.predict_prosody(
      ctx, encoded, features[static_cast<std::size_t>(current_text)]);

  const EncodedText text = text_encoder_(ctx, current.tokens);
  const std::array<Var, kNumStreams> streams = {
      text.pooled,
      speaker_embedding_.lookup(ctx, current.speaker),
      out.rendered.emotion.feature,
      out.rendered.intensity.feature,
      out.rendered.prosody,
  };
  Var mix = aggregator_(ctx, streams);
  Var tokens = ad::add_row(text.tokens, mix);

  const auto& tg = current.targets;
  const bool have_targets = !tg.duration.empty();
  require(!options.teacher_durations || have_targets, ErrorKind::kValidation,
          "teacher-forced synthesis needs target durations");
  const bool teacher_variance = options.training && have_targets;
  out.variance = variance_(ctx, tokens,
                           options.teacher_durations ? &tg.duration : nullptr,
                           teacher_variance ? &tg.pitch : nullptr,
                           teacher_variance ? &tg.energy : nullptr);
  out.mel = decoder_(ctx, out.variance.frames);

  if (have_targets && static_cast<int>(tg.prosody.size()) == config_.prosody_dim) {
    ad::Mat target(1, config_.prosody_dim);
    for (int d = 0; d < config_.prosody_dim; ++d)
      target(0, d) = tg.prosody[static_cast<std::size_t>(d)];
    out.prosody_loss = prosody_mse(out.rendered.prosody, target);
  }
  if (options.teacher_durations)
    out.fs2 = fs2_loss(out.mel, out.variance.pitch, out.variance.energy,
                       out.variance.log_duration, tg);
  return out;
}

}  // namespace ecss::model
