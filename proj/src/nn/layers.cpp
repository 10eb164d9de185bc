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

#include "nn/layers.hpp"

#include <cmath>

namespace ecss::nn {

Var dropout(const Ctx& ctx, Var x) {
  if (!ctx.training() || ctx.dropout <= 0.0) return x;
  const double keep = 1.0 - ctx.dropout;
  Mat mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = ctx.dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
  return ad::mul_const(x, mask);
}

Linear Linear::create(ParamStore& ps, const std::string& name, int in, int out,
                      Rng& rng, bool bias) {
  Linear l;
  l.in = in;
  l.out = out;
  l.has_bias = bias;
  l.w = ps.add_uniform(name + ".w", in, out, in, rng);
  if (bias) l.b = ps.add_uniform(name + ".b", 1, out, in, rng);
  return l;
}

Var Linear::operator()(const Ctx& ctx, Var x) const {
  Var y = ad::matmul(x, ctx.p(w));
  return has_bias ? ad::add_row(y, ctx.p(b)) : y;
}

Conv1d Conv1d::create(ParamStore& ps, const std::string& name, int in, int out,
                      int kernel, Rng& rng) {
  Conv1d c;
  c.kernel = kernel;
  c.in = in;
  c.out = out;
  c.w = ps.add_uniform(name + ".w", kernel * in, out, kernel * in, rng);
  c.b = ps.add_uniform(name + ".b", 1, out, kernel * in, rng);
  return c;
}

Var Conv1d::operator()(const Ctx& ctx, Var x) const {
  const int n = static_cast<int>(x.rows());
  const int half = (kernel - 1) / 2;
  std::vector<Var> taps;
  taps.reserve(static_cast<std::size_t>(kernel));
  for (int o = -half; o < kernel - half; ++o) {
    if (o == 0) {
      taps.push_back(x);
      continue;
    }
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const int j = i + o;
      idx[static_cast<std::size_t>(i)] = (j >= 0 && j < n) ? j : -1;
    }
    taps.push_back(ad::gather_rows(x, std::move(idx)));
  }
  Var cols = ad::concat_cols(taps);
  return ad::add_row(ad::matmul(cols, ctx.p(w)), ctx.p(b));
}

LayerNorm LayerNorm::create(ParamStore& ps, const std::string& name, int dim) {
  LayerNorm ln;
  ln.gamma = ps.add_constant(name + ".gamma", 1, dim, 1.0);
  ln.beta = ps.add_constant(name + ".beta", 1, dim, 0.0);
  return ln;
}

Var LayerNorm::operator()(const Ctx& ctx, Var x) const {
  return ad::layer_norm_rows(x, ctx.p(gamma), ctx.p(beta));
}

Lstm Lstm::create(ParamStore& ps, const std::string& name, int in, int hidden,
                  Rng& rng) {
  Lstm l;
  l.hidden = hidden;
  l.input = Linear::create(ps, name + ".ih", in, 4 * hidden, rng);
  l.recurrent = ps.add_uniform(name + ".hh", hidden, 4 * hidden, hidden, rng);
  return l;
}

std::vector<Var> Lstm::run(const Ctx& ctx, Var x, bool reverse) const {
  const int n = static_cast<int>(x.rows());
  Var xs = input(ctx, x);
  Var wh = ctx.p(recurrent);
  Var h = ctx.constant(Mat::Zero(1, hidden));
  Var c = ctx.constant(Mat::Zero(1, hidden));
  std::vector<Var> out(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    const int t = reverse ? n - 1 - s : s;
    Var z = ad::add(ad::slice_rows(xs, t, 1), ad::matmul(h, wh));
    Var hc = ad::lstm_cell(z, c);
    h = ad::slice_cols(hc, 0, hidden);
    c = ad::slice_cols(hc, hidden, hidden);
    out[static_cast<std::size_t>(t)] = h;
  }
  return out;
}

MultiHeadSelfAttention MultiHeadSelfAttention::create(ParamStore& ps,
                                                      const std::string& name,
                                                      int dim, int heads,
                                                      Rng& rng) {
  MultiHeadSelfAttention m;
  m.heads = heads;
  m.q = Linear::create(ps, name + ".q", dim, dim, rng);
  m.k = Linear::create(ps, name + ".k", dim, dim, rng);
  m.v = Linear::create(ps, name + ".v", dim, dim, rng);
  m.o = Linear::create(ps, name + ".o", dim, dim, rng);
  return m;
}

Var MultiHeadSelfAttention::operator()(const Ctx& ctx, Var x) const {
  const int dim = q.out;
  const int dh = dim / heads;
  Var qv = q(ctx, x);
  Var kv = k(ctx, x);
  Var vv = v(ctx, x);
  std::vector<Var> per_head;
  per_head.reserve(static_cast<std::size_t>(heads));
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    Var qh = ad::slice_cols(qv, h * dh, dh);
    Var kh = ad::slice_cols(kv, h * dh, dh);
    Var vh = ad::slice_cols(vv, h * dh, dh);
    Var att = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv));
    per_head.push_back(ad::matmul(att, vh));
  }
  return o(ctx, heads == 1 ? per_head[0] : ad::concat_cols(per_head));
}

FftBlock FftBlock::create(ParamStore& ps, const std::string& name, int dim,
                          int ffn_dim, int heads, Rng& rng) {
  FftBlock b;
  b.attn = MultiHeadSelfAttention::create(ps, name + ".attn", dim, heads, rng);
  b.ln1 = LayerNorm::create(ps, name + ".ln1", dim);
  b.ff1 = Linear::create(ps, name + ".ff1", dim, ffn_dim, rng);
  b.ff2 = Linear::create(ps, name + ".ff2", ffn_dim, dim, rng);
  b.ln2 = LayerNorm::create(ps, name + ".ln2", dim);
  return b;
}

Var FftBlock::operator()(const Ctx& ctx, Var x) const {
  Var a = dropout(ctx, attn(ctx, x));
  Var x1 = ln1(ctx, ad::add(x, a));
  Var f = dropout(ctx, ff2(ctx, ad::relu(ff1(ctx, x1))));
  return ln2(ctx, ad::add(x1, f));
}

Mat sinusoid_positions(int n, int dim) {
  Mat pe(n, dim);
  for (int pos = 0; pos < n; ++pos) {
    for (int i = 0; i < dim; ++i) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return pe;
}

}  // namespace ecss::nn
