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

#include "model/synthesizer.hpp"

#include <cmath>

#include "util/error.hpp"

namespace ecss::model {

ad::Mat column(std::span<const double> v) {
  ad::Mat m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

TextEncoder TextEncoder::create(ad::ParamStore& ps, const ModelConfig& cfg,
                                Rng& rng) {
  TextEncoder t;
  t.vocab = cfg.vocab_size;
  t.dim = cfg.model_dim;
  t.embedding = ps.add_uniform("syn.text.embed", cfg.vocab_size, cfg.model_dim,
                               cfg.model_dim, rng);
  for (int l = 0; l < cfg.encoder_layers; ++l)
    t.blocks.push_back(nn::FftBlock::create(ps, "syn.text.fft" + std::to_string(l),
                                            cfg.model_dim, cfg.ffn_dim,
                                            cfg.encoder_heads, rng));
  return t;
}

EncodedText TextEncoder::operator()(const Ctx& ctx,
                                    std::span<const int> tokens) const {
  require(!tokens.empty(), ErrorKind::kValidation, "text encoder got no tokens");
  std::vector<int> ids(tokens.begin(), tokens.end());
  for (int id : ids)
    require(id >= 0 && id < vocab, ErrorKind::kLookup,
            "token id " + std::to_string(id) + " outside vocabulary of " +
                std::to_string(vocab));
  const int n = static_cast<int>(ids.size());
  Var x = ad::gather_rows(ctx.p(embedding), std::move(ids));
  x = nn::dropout(ctx, ad::add_const(x, nn::sinusoid_positions(n, dim)));
  for (const auto& b : blocks) x = b(ctx, x);
  return {x, ad::mean_rows(x)};
}

Aggregator Aggregator::create(ad::ParamStore& ps, const ModelConfig& cfg,
                              Rng& rng) {
  Aggregator a;
  a.weights = ps.add_constant("syn.agg.weights", 1, kNumStreams, 0.0);
  const std::array<std::pair<const char*, int>, kNumStreams> in = {{
      {"content", cfg.model_dim},
      {"speaker", cfg.model_dim},
      {"emotion", cfg.feature_dim},
      {"intensity", cfg.feature_dim},
      {"prosody", cfg.prosody_dim},
  }};
  for (std::size_t i = 0; i < in.size(); ++i)
    a.proj[i] = nn::Linear::create(ps, std::string("syn.agg.") + in[i].first,
                                   in[i].second, cfg.model_dim, rng, false);
  return a;
}

Var Aggregator::operator()(const Ctx& ctx,
                           const std::array<Var, kNumStreams>& streams) const {
  Var w = ad::softmax_rows(ctx.p(weights));
  std::vector<Var> terms;
  for (int i = 0; i < kNumStreams; ++i) {
    const auto s = static_cast<std::size_t>(i);
    terms.push_back(ad::mul_scalar(proj[s](ctx, streams[s]), ad::slice_cols(w, i, 1)));
  }
  return ad::add_n(terms);
}

VariancePredictor VariancePredictor::create(ad::ParamStore& ps,
                                            const std::string& name, int dim,
                                            Rng& rng) {
  VariancePredictor p;
  p.conv1 = nn::Conv1d::create(ps, name + ".conv1", dim, dim, 3, rng);
  p.conv2 = nn::Conv1d::create(ps, name + ".conv2", dim, dim, 3, rng);
  p.out = nn::Linear::create(ps, name + ".out", dim, 1, rng);
  return p;
}

Var VariancePredictor::operator()(const Ctx& ctx, Var x) const {
  Var h = nn::dropout(ctx, ad::relu(conv1(ctx, x)));
  h = nn::dropout(ctx, ad::relu(conv2(ctx, h)));
  return out(ctx, h);
}

std::vector<int> expand_durations(std::span<const int> durations) {
  std::vector<int> map;
  for (std::size_t t = 0; t < durations.size(); ++t) {
    require(durations[t] >= 1, ErrorKind::kValidation,
            "durations must be >= 1 frame");
    for (int f = 0; f < durations[t]; ++f) map.push_back(static_cast<int>(t));
  }
  return map;
}

std::vector<int> durations_from_log(const ad::Mat& log_duration) {
  std::vector<int> out(static_cast<std::size_t>(log_duration.rows()));
  for (Eigen::Index i = 0; i < log_duration.rows(); ++i) {
    // Clamp before the integer conversion so wild predictions stay bounded.
    const double d = std::round(std::exp(std::min(log_duration(i, 0), 6.0)));
    out[static_cast<std::size_t>(i)] = std::max(1, static_cast<int>(d));
  }
  return out;
}

VarianceAdaptor VarianceAdaptor::create(ad::ParamStore& ps, const ModelConfig& cfg,
                                        Rng& rng) {
  VarianceAdaptor v;
  v.duration = VariancePredictor::create(ps, "syn.va.duration", cfg.model_dim, rng);
  v.pitch = VariancePredictor::create(ps, "syn.va.pitch", cfg.model_dim, rng);
  v.energy = VariancePredictor::create(ps, "syn.va.energy", cfg.model_dim, rng);
  v.pitch_embed = nn::Linear::create(ps, "syn.va.pitch_embed", 1, cfg.model_dim, rng);
  v.energy_embed = nn::Linear::create(ps, "syn.va.energy_embed", 1, cfg.model_dim, rng);
  return v;
}

VarianceOutput VarianceAdaptor::operator()(
    const Ctx& ctx, Var x, const std::vector<int>* teacher_durations,
    const std::vector<double>* teacher_pitch,
    const std::vector<double>* teacher_energy) const {
  const auto n = static_cast<std::size_t>(x.rows());
  require(n >= 1, ErrorKind::kValidation, "variance adaptor got no tokens");
  VarianceOutput out;
  out.log_duration = duration(ctx, x);
  out.pitch = pitch(ctx, x);
  out.energy = energy(ctx, x);

  auto source = [&](Var pred, const std::vector<double>* teacher) {
    if (teacher == nullptr) return pred;
    require(teacher->size() == n, ErrorKind::kValidation,
            "teacher values must have one entry per token");
    return ctx.constant(column(*teacher));
  };
  Var h = ad::add(x, pitch_embed(ctx, source(out.pitch, teacher_pitch)));
  h = ad::add(h, energy_embed(ctx, source(out.energy, teacher_energy)));

  if (teacher_durations != nullptr) {
    require(teacher_durations->size() == n, ErrorKind::kValidation,
            "teacher durations must have one entry per token");
    out.durations = *teacher_durations;
  } else {
    out.durations = durations_from_log(out.log_duration.value());
  }
  out.frames = ad::gather_rows(h, expand_durations(out.durations));
  return out;
}

MelDecoder MelDecoder::create(ad::ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
  MelDecoder d;
  d.dim = cfg.model_dim;
  for (int l = 0; l < cfg.decoder_layers; ++l)
    d.blocks.push_back(nn::FftBlock::create(ps, "syn.dec.fft" + std::to_string(l),
                                            cfg.model_dim, cfg.ffn_dim,
                                            cfg.decoder_heads, rng));
  d.out = nn::Linear::create(ps, "syn.dec.out", cfg.model_dim, cfg.mel_bins, rng);
  return d;
}

Var MelDecoder::operator()(const Ctx& ctx, Var frames) const {
  require(frames.rows() >= 1, ErrorKind::kValidation, "decoder got no frames");
  Var x = ad::add_const(frames, nn::sinusoid_positions(static_cast<int>(frames.rows()), dim));
  for (const auto& b : blocks) x = b(ctx, x);
  return out(ctx, x);
}

Fs2Loss fs2_loss(Var mel, Var pitch, Var energy, Var log_duration,
                 const corpus::AcousticTargets& targets) {
  require(mel.rows() == targets.mel.rows() && mel.cols() == targets.mel.cols(),
          ErrorKind::kValidation,
          "mel prediction has " + std::to_string(mel.rows()) + "x" +
              std::to_string(mel.cols()) + " frames, target " +
              std::to_string(targets.mel.rows()) + "x" +
              std::to_string(targets.mel.cols()));
  const auto n = static_cast<Eigen::Index>(targets.duration.size());
  require(pitch.rows() == n && energy.rows() == n && log_duration.rows() == n &&
              targets.pitch.size() == targets.duration.size() &&
              targets.energy.size() == targets.duration.size(),
          ErrorKind::kValidation, "per-token predictions and targets differ in length");
  ad::Mat log_d(n, 1);
  for (Eigen::Index i = 0; i < n; ++i)
    log_d(i, 0) = std::log(static_cast<double>(targets.duration[static_cast<std::size_t>(i)]));
  Fs2Loss l;
  l.mel = ad::mean_abs_error(mel, targets.mel);
  l.pitch = ad::mean_squared_error(pitch, column(targets.pitch));
  l.energy = ad::mean_squared_error(energy, column(targets.energy));
  l.duration = ad::mean_squared_error(log_duration, log_d);
  const Var parts[4] = {l.mel, l.pitch, l.energy, l.duration};
  l.total = ad::add_n(parts);
  return l;
}

}  // namespace ecss::model
