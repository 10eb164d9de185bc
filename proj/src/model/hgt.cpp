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

#include "model/hgt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "util/error.hpp"

namespace ecss::model {

using ecg::NodeKind;

int CanonicalGraph::row(const ecg::NodeRef& n) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), n,
                             [](const ecg::NodeRef& a, const ecg::NodeRef& b) {
                               return std::tie(a.kind, a.turn) <
                                      std::tie(b.kind, b.turn);
                             });
  require(it != nodes.end() && *it == n, ErrorKind::kLookup,
          "node " + ecg::node_label(n) + " is not in the graph");
  return static_cast<int>(it - nodes.begin());
}

CanonicalGraph canonicalize(const ecg::EcgGraph& graph) {
  CanonicalGraph g;
  g.history_length = graph.history_length;
  const std::size_t n = graph.nodes.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& x = graph.nodes[static_cast<std::size_t>(a)];
    const auto& y = graph.nodes[static_cast<std::size_t>(b)];
    return std::tie(x.kind, x.turn) < std::tie(y.kind, y.turn);
  });
  std::vector<int> rank(n);
  for (std::size_t r = 0; r < n; ++r) {
    rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
    g.nodes.push_back(graph.nodes[static_cast<std::size_t>(order[r])]);
    if (r > 0)
      require(!(g.nodes[r] == g.nodes[r - 1]), ErrorKind::kValidation,
              "duplicate node " + ecg::node_label(g.nodes[r]));
  }
  g.source_index = order;
  for (const auto& nd : g.nodes)
    ++g.kind_offset[static_cast<std::size_t>(nd.kind) + 1];
  for (std::size_t k = 1; k < g.kind_offset.size(); ++k)
    g.kind_offset[k] += g.kind_offset[k - 1];

  g.has_in_edge.assign(n, false);
  for (const auto& e : graph.edges) {
    require(e.src >= 0 && e.dst >= 0 && static_cast<std::size_t>(e.src) < n &&
                static_cast<std::size_t>(e.dst) < n,
            ErrorKind::kValidation, "edge endpoint outside the graph");
    require(e.relation >= 0 && e.relation < ecg::kNumRelations,
            ErrorKind::kValidation, "edge relation out of range");
    ecg::Edge c = e;
    c.src = rank[static_cast<std::size_t>(e.src)];
    c.dst = rank[static_cast<std::size_t>(e.dst)];
    g.has_in_edge[static_cast<std::size_t>(c.dst)] = true;
    g.edges.push_back(c);
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const ecg::Edge& a, const ecg::Edge& b) {
              return std::tie(a.relation, a.dst, a.src, a.direction) <
                     std::tie(b.relation, b.dst, b.src, b.direction);
            });
  return g;
}

HgtLayer HgtLayer::create(ad::ParamStore& ps, const std::string& name,
                          int hidden, int heads, bool layer_norm, Rng& rng) {
  HgtLayer l;
  l.hidden = hidden;
  l.heads = heads;
  l.layer_norm = layer_norm;
  const int dh = hidden / heads;
  for (int k = 0; k < ecg::kNumNodeKinds; ++k) {
    const std::string kind(ecg::node_kind_name(static_cast<NodeKind>(k)));
    const auto i = static_cast<std::size_t>(k);
    l.q[i] = nn::Linear::create(ps, name + ".q." + kind, hidden, hidden, rng);
    l.k[i] = nn::Linear::create(ps, name + ".k." + kind, hidden, hidden, rng);
    l.v[i] = nn::Linear::create(ps, name + ".v." + kind, hidden, hidden, rng);
    l.o[i] = nn::Linear::create(ps, name + ".o." + kind, hidden, hidden, rng);
    if (layer_norm) l.norm[i] = nn::LayerNorm::create(ps, name + ".ln." + kind, hidden);
  }
  for (const auto& r : ecg::default_edge_schema()) {
    const auto i = static_cast<std::size_t>(r.id);
    for (int h = 0; h < heads; ++h) {
      const std::string suffix = "." + r.name + ".h" + std::to_string(h);
      l.w_att[i].push_back(ps.add_uniform(name + ".att" + suffix, dh, dh, dh, rng));
      l.w_msg[i].push_back(ps.add_uniform(name + ".msg" + suffix, dh, dh, dh, rng));
    }
    l.mu[i] = ps.add_constant(name + ".mu." + r.name, 1, 1, 1.0);
  }
  return l;
}

Var HgtLayer::project(const Ctx& ctx, const CanonicalGraph& g, Var h,
                      const std::array<nn::Linear, ecg::kNumNodeKinds>& proj) const {
  std::vector<Var> blocks;
  for (int k = 0; k < ecg::kNumNodeKinds; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const int count = g.kind_offset[i + 1] - g.kind_offset[i];
    if (count == 0) continue;
    blocks.push_back(proj[i](ctx, ad::slice_rows(h, g.kind_offset[i], count)));
  }
  return blocks.size() == 1 ? blocks[0] : ad::concat_rows(blocks);
}

namespace {

// Contiguous edge range per relation in canonical edge order.
struct RelationSpan {
  int relation;
  int begin;
  int count;
  std::vector<int> src;
  std::vector<int> dst;
};

std::vector<RelationSpan> relation_spans(const CanonicalGraph& g) {
  std::vector<RelationSpan> out;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& edge = g.edges[e];
    if (out.empty() || out.back().relation != edge.relation)
      out.push_back({edge.relation, static_cast<int>(e), 0, {}, {}});
    auto& s = out.back();
    ++s.count;
    s.src.push_back(edge.src);
    s.dst.push_back(edge.dst);
  }
  return out;
}

std::vector<int> edge_targets(const CanonicalGraph& g) {
  std::vector<int> dst;
  dst.reserve(g.edges.size());
  for (const auto& e : g.edges) dst.push_back(e.dst);
  return dst;
}

}  // namespace

Var hma_attention(const Ctx& ctx, const HgtLayer& layer, const CanonicalGraph& g,
                  Var h) {
  require(!g.edges.empty(), ErrorKind::kValidation,
          "attention over a graph without edges");
  const int dh = layer.hidden / layer.heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  Var q = layer.project(ctx, g, h, layer.q);
  Var k = layer.project(ctx, g, h, layer.k);
  const auto spans = relation_spans(g);
  std::vector<Var> head_cols;
  for (int hd = 0; hd < layer.heads; ++hd) {
    Var qh = ad::slice_cols(q, hd * dh, dh);
    Var kh = ad::slice_cols(k, hd * dh, dh);
    std::vector<Var> scores;
    for (const auto& s : spans) {
      const auto r = static_cast<std::size_t>(s.relation);
      Var ks = ad::gather_rows(kh, s.src);
      Var qt = ad::gather_rows(qh, s.dst);
      Var kw = ad::matmul(ks, ctx.p(layer.w_att[r][static_cast<std::size_t>(hd)]));
      Var sc = ad::mul_scalar(ad::rowwise_dot(kw, qt), ctx.p(layer.mu[r]));
      scores.push_back(ad::scale(sc, inv));
    }
    Var all = scores.size() == 1 ? scores[0] : ad::concat_rows(scores);
    head_cols.push_back(ad::segment_softmax(all, edge_targets(g),
                                            static_cast<int>(g.nodes.size())));
  }
  return head_cols.size() == 1 ? head_cols[0] : ad::concat_cols(head_cols);
}

Var hmp_messages(const Ctx& ctx, const HgtLayer& layer, const CanonicalGraph& g,
                 Var h) {
  const int dh = layer.hidden / layer.heads;
  Var v = layer.project(ctx, g, h, layer.v);
  const auto spans = relation_spans(g);
  std::vector<Var> per_relation;
  for (const auto& s : spans) {
    const auto r = static_cast<std::size_t>(s.relation);
    Var vs = ad::gather_rows(v, s.src);
    std::vector<Var> heads;
    for (int hd = 0; hd < layer.heads; ++hd) {
      Var part = ad::slice_cols(vs, hd * dh, dh);
      heads.push_back(
          ad::matmul(part, ctx.p(layer.w_msg[r][static_cast<std::size_t>(hd)])));
    }
    per_relation.push_back(heads.size() == 1 ? heads[0] : ad::concat_cols(heads));
  }
  return per_relation.size() == 1 ? per_relation[0]
                                  : ad::concat_rows(per_relation);
}

Var eka_aggregate(const Ctx& ctx, const HgtLayer& layer, const CanonicalGraph& g,
                  Var h, Var attention, Var messages) {
  const int dh = layer.hidden / layer.heads;
  const int n = static_cast<int>(g.nodes.size());
  std::vector<Var> heads;
  for (int hd = 0; hd < layer.heads; ++hd) {
    Var weighted = ad::mul_rows(ad::slice_cols(messages, hd * dh, dh),
                                ad::slice_cols(attention, hd, 1));
    heads.push_back(ad::scatter_add_rows(weighted, edge_targets(g), n));
  }
  Var agg = heads.size() == 1 ? heads[0] : ad::concat_cols(heads);
  Var update = ad::gelu(layer.project(ctx, g, agg, layer.o));
  ad::Mat mask(n, layer.hidden);
  for (int i = 0; i < n; ++i)
    mask.row(i).setConstant(g.has_in_edge[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
  Var out = ad::add(ad::mul_const(update, mask), h);
  if (!layer.layer_norm) return out;
  std::vector<Var> blocks;
  for (int k = 0; k < ecg::kNumNodeKinds; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const int count = g.kind_offset[i + 1] - g.kind_offset[i];
    if (count == 0) continue;
    blocks.push_back(layer.norm[i](ctx, ad::slice_rows(out, g.kind_offset[i], count)));
  }
  return blocks.size() == 1 ? blocks[0] : ad::concat_rows(blocks);
}

bool EncodedGraph::contains(const ecg::NodeRef& n) const {
  return std::find(graph.nodes.begin(), graph.nodes.end(), n) != graph.nodes.end();
}

Var EncodedGraph::node(const ecg::NodeRef& n) const {
  return ad::slice_rows(h, graph.row(n), 1);
}

Var EncodedGraph::kind_rows(NodeKind k) const {
  const int count = graph.kind_count(k);
  if (count == 0) return {};
  return ad::slice_rows(h, graph.kind_offset[static_cast<std::size_t>(k)], count);
}

Var EncodedGraph::history_rows(NodeKind k) const {
  const auto i = static_cast<std::size_t>(k);
  int count = 0;
  for (int r = graph.kind_offset[i]; r < graph.kind_offset[i + 1]; ++r)
    if (graph.nodes[static_cast<std::size_t>(r)].turn < graph.history_length) ++count;
  if (count == 0) return {};
  return ad::slice_rows(h, graph.kind_offset[i], count);
}

Hgt Hgt::create(ad::ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
  Hgt m;
  m.hidden = cfg.hgt_hidden;
  for (int k = 0; k < ecg::kNumNodeKinds; ++k) {
    const auto kind = static_cast<NodeKind>(k);
    const int in = kind == NodeKind::kText ? cfg.text_dim : cfg.node_dim;
    m.input[static_cast<std::size_t>(k)] = nn::Linear::create(
        ps, "hgt.in." + std::string(ecg::node_kind_name(kind)), in,
        cfg.hgt_hidden, rng);
  }
  for (int l = 0; l < cfg.hgt_layers; ++l)
    m.layers.push_back(HgtLayer::create(ps, "hgt.l" + std::to_string(l),
                                        cfg.hgt_hidden, cfg.hgt_heads,
                                        cfg.hgt_layer_norm, rng));
  return m;
}

EncodedGraph Hgt::forward(const Ctx& ctx, const ecg::EcgGraph& graph,
                          const std::vector<Var>& features) const {
  require(features.size() == graph.nodes.size(), ErrorKind::kConfig,
          "one feature per graph node required");
  EncodedGraph out;
  out.graph = canonicalize(graph);
  const CanonicalGraph& g = out.graph;

  std::vector<Var> blocks;
  for (int k = 0; k < ecg::kNumNodeKinds; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const int begin = g.kind_offset[i];
    const int count = g.kind_offset[i + 1] - begin;
    if (count == 0) continue;
    std::vector<Var> rows;
    for (int r = begin; r < begin + count; ++r) {
      Var f = features[static_cast<std::size_t>(g.source_index[static_cast<std::size_t>(r)])];
      require(f.rows() == 1 && f.cols() == input[i].in, ErrorKind::kConfig,
              "feature of " + ecg::node_label(g.nodes[static_cast<std::size_t>(r)]) +
                  " has width " + std::to_string(f.cols()) + ", expected " +
                  std::to_string(input[i].in));
      rows.push_back(f);
    }
    Var x = rows.size() == 1 ? rows[0] : ad::concat_rows(rows);
    blocks.push_back(input[i](ctx, x));
  }
  Var h = blocks.size() == 1 ? blocks[0] : ad::concat_rows(blocks);
  for (const HgtLayer& layer : layers) {
    if (g.edges.empty()) continue;
    Var att = hma_attention(ctx, layer, g, h);
    Var msg = hmp_messages(ctx, layer, g, h);
    h = eka_aggregate(ctx, layer, g, h, att, msg);
  }
  out.h = h;
  return out;
}

}  // namespace ecss::model
