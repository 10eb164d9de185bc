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

#include <functional>
#include <string>

#include "ad/ops.hpp"
#include "ad/params.hpp"
#include "corpus/corpus.hpp"
#include "model/config.hpp"
#include "util/rng.hpp"

namespace ecss::testing {

struct GradReport {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
double relative_error(double analytic, double numeric);

// Compares the tape gradient of `loss` with central differences for up to
// `per_param` evenly spaced entries of every parameter whose name passes
// `filter` (all when empty).
GradReport check_param_grads(ad::ParamStore& ps,
                             const std::function<ad::Var(ad::Tape&)>& loss,
                             std::size_t per_param = 24, double h = 1e-5,
                             const std::function<bool(const std::string&)>& filter = {});

// Compares precomputed gradients with central differences of `eval`, which
// must read the current values of `ps`.
GradReport check_grads_against(ad::ParamStore& ps, const ad::GradSet& analytic,
                               const std::function<double()>& eval,
                               std::size_t per_param = 24, double h = 1e-5,
                               const std::function<bool(const std::string&)>& filter = {});

// Same check for a matrix input fed through Tape::input.
GradReport check_input_grad(const ad::Mat& x,
                            const std::function<ad::Var(ad::Tape&, ad::Var)>& loss,
                            double h = 1e-5);

ad::Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0);

// Utterance sized for `cfg` (audio, prosody and mel widths follow the
// config) with smooth random targets.
corpus::Utterance toy_utterance(const model::ModelConfig& cfg, Rng& rng, int speaker,
                                int emotion, int intensity);
corpus::Conversation toy_conversation(const model::ModelConfig& cfg, Rng& rng,
                                      const std::string& id, int turns);

}  // namespace ecss::testing
