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

#include <cstddef>
#include <string>
#include <vector>

#include "ad/ops.hpp"
#include "ad/params.hpp"
#include "util/rng.hpp"

namespace ecss::nn {

using ad::Mat;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

// Everything a forward pass needs besides its inputs.
struct Ctx {
  Tape& tape;
  const ParamStore& params;
  Rng* dropout_rng = nullptr;  // non-null only while training
  double dropout = 0.0;

  Var p(std::size_t index) const { return params.on(tape, index); }
  Var constant(Mat m) const { return tape.constant(std::move(m)); }
  bool training() const { return dropout_rng != nullptr; }
};

Var dropout(const Ctx& ctx, Var x);

struct Linear {
  std::size_t w = 0;
  std::size_t b = 0;
  bool has_bias = true;
  int in = 0;
  int out = 0;

  static Linear create(ParamStore& ps, const std::string& name, int in, int out,
                       Rng& rng, bool bias = true);
  Var operator()(const Ctx& ctx, Var x) const;
};

// Convolution over the row (sequence) axis with zero "same" padding, so a
// length-1 sequence is valid. Weights are stored im2col-style as
// (kernel * in) x out.
struct Conv1d {
  std::size_t w = 0;
  std::size_t b = 0;
  int kernel = 3;
  int in = 0;
  int out = 0;

  static Conv1d create(ParamStore& ps, const std::string& name, int in, int out,
                       int kernel, Rng& rng);
  Var operator()(const Ctx& ctx, Var x) const;
};

struct LayerNorm {
  std::size_t gamma = 0;
  std::size_t beta = 0;

  static LayerNorm create(ParamStore& ps, const std::string& name, int dim);
  Var operator()(const Ctx& ctx, Var x) const;
};

// Single-direction LSTM over the rows of x.
struct Lstm {
  Linear input;  // in -> 4H, carries the bias
  std::size_t recurrent = 0;  // H x 4H
  int hidden = 0;

  static Lstm create(ParamStore& ps, const std::string& name, int in,
                     int hidden, Rng& rng);
  // Hidden states in time order (one 1 x H row per step).
  std::vector<Var> run(const Ctx& ctx, Var x, bool reverse) const;
};

struct MultiHeadSelfAttention {
  Linear q, k, v, o;
  int heads = 2;

  static MultiHeadSelfAttention create(ParamStore& ps, const std::string& name,
                                       int dim, int heads, Rng& rng);
  Var operator()(const Ctx& ctx, Var x) const;
};

// Transformer feed-forward block: attention + residual + norm, position-wise
// FFN + residual + norm, with dropout on both sublayer outputs.
struct FftBlock {
  MultiHeadSelfAttention attn;
  LayerNorm ln1;
  Linear ff1, ff2;
  LayerNorm ln2;

  static FftBlock create(ParamStore& ps, const std::string& name, int dim,
                         int ffn_dim, int heads, Rng& rng);
  Var operator()(const Ctx& ctx, Var x) const;
};

Mat sinusoid_positions(int n, int dim);

}  // namespace ecss::nn
