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

#include "support.hpp"

#include <algorithm>
#include <cmath>

namespace ecss::testing {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

namespace {

void note(GradReport& r, double err, const std::string& where) {
  ++r.checked;
  if (err > r.max_rel) {
    r.max_rel = err;
    r.worst = where;
  }
}

}  // namespace

GradReport check_grads_against(ad::ParamStore& ps, const ad::GradSet& analytic,
                               const std::function<double()>& eval, std::size_t per_param,
                               double h,
                               const std::function<bool(const std::string&)>& filter) {
  GradReport r;
  for (std::size_t p = 0; p < ps.size(); ++p) {
    if (filter && !filter(ps.name(p))) continue;
    ad::Mat& value = ps.value(p);
    const auto n = static_cast<std::size_t>(value.size());
    const std::size_t count = std::min(n, per_param);
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t e = count == n ? c : c * n / count;
      double& slot = value.data()[e];
      const double saved = slot;
      slot = saved + h;
      const double up = eval();
      slot = saved - h;
      const double down = eval();
      slot = saved;
      const double numeric = (up - down) / (2.0 * h);
      const bool has = p < analytic.size() && analytic[p].size() > 0;
      const double a = has ? analytic[p].data()[e] : 0.0;
      note(r, relative_error(a, numeric), ps.name(p) + "[" + std::to_string(e) + "]");
    }
  }
  return r;
}

GradReport check_param_grads(ad::ParamStore& ps,
                             const std::function<ad::Var(ad::Tape&)>& loss,
                             std::size_t per_param, double h,
                             const std::function<bool(const std::string&)>& filter) {
  ad::GradSet analytic;
  {
    ad::Tape tape(true);
    ad::Var l = loss(tape);
    tape.backward(l);
    analytic = tape.param_grads(ps.size());
  }
  auto eval = [&] {
    ad::Tape tape(true);
    return loss(tape).scalar();
  };
  return check_grads_against(ps, analytic, eval, per_param, h, filter);
}

GradReport check_input_grad(const ad::Mat& x,
                            const std::function<ad::Var(ad::Tape&, ad::Var)>& loss,
                            double h) {
  ad::Mat analytic;
  {
    ad::Tape tape(true);
    ad::Var in = tape.input(x);
    ad::Var l = loss(tape, in);
    tape.backward(l);
    analytic = tape.has_grad(in.id()) ? tape.grad(in.id()) : ad::Mat::Zero(x.rows(), x.cols());
  }
  GradReport r;
  ad::Mat probe = x;
  auto eval = [&] {
    ad::Tape tape(true);
    return loss(tape, tape.input(probe)).scalar();
  };
  for (Eigen::Index e = 0; e < x.size(); ++e) {
    const double saved = probe.data()[e];
    probe.data()[e] = saved + h;
    const double up = eval();
    probe.data()[e] = saved - h;
    const double down = eval();
    probe.data()[e] = saved;
    note(r, relative_error(analytic.data()[e], (up - down) / (2.0 * h)),
         "x[" + std::to_string(e) + "]");
  }
  return r;
}

ad::Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale) {
  ad::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

corpus::Utterance toy_utterance(const model::ModelConfig& cfg, Rng& rng, int speaker,
                                int emotion, int intensity) {
  corpus::Utterance u;
  const int n = static_cast<int>(rng.uniform_int(2, 4));
  for (int t = 0; t < n; ++t)
    u.tokens.push_back(static_cast<int>(rng.uniform_int(0, cfg.vocab_size - 1)));
  u.speaker = speaker;
  u.emotion = static_cast<corpus::Emotion>(emotion);
  u.intensity = static_cast<corpus::Intensity>(intensity);
  for (int d = 0; d < cfg.audio_dim; ++d) u.audio_feat.push_back(rng.normal());
  int frames = 0;
  for (int t = 0; t < n; ++t) {
    const int dur = 1 + u.tokens[static_cast<std::size_t>(t)] % 3;
    u.targets.duration.push_back(dur);
    u.targets.pitch.push_back(0.3 * rng.normal());
    u.targets.energy.push_back(0.3 * rng.normal());
    frames += dur;
  }
  u.targets.mel = random_mat(frames, cfg.mel_bins, rng, 0.5);
  for (int d = 0; d < cfg.prosody_dim; ++d) u.targets.prosody.push_back(rng.normal());
  return u;
}

corpus::Conversation toy_conversation(const model::ModelConfig& cfg, Rng& rng,
                                      const std::string& id, int turns) {
  corpus::Conversation c;
  c.id = id;
  const int first = static_cast<int>(rng.uniform_int(0, 1));
  for (int t = 0; t < turns; ++t)
    c.turns.push_back(toy_utterance(cfg, rng, (first + t) % 2,
                                    static_cast<int>(rng.uniform_int(0, 6)),
                                    static_cast<int>(rng.uniform_int(0, 2))));
  return c;
}

}  // namespace ecss::testing
