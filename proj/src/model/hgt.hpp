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

#include <array>
#include <vector>

#include "ecg/ecg.hpp"
#include "model/config.hpp"
#include "nn/layers.hpp"

namespace ecss::model {

using ad::Var;
using nn::Ctx;

// Graph in computation order: nodes sorted by (kind, turn) so each kind is a
// contiguous block, edges sorted by (relation, dst, src). Every result is a
// function of this order only, which makes the encoder independent of how the
// input graph was listed.
struct CanonicalGraph {
  int history_length = 0;
  std::vector<ecg::NodeRef> nodes;
  std::vector<int> source_index;  // canonical row -> index in the input graph
  std::vector<ecg::Edge> edges;   // endpoints are canonical rows
  std::array<int, ecg::kNumNodeKinds + 1> kind_offset{};
  std::vector<bool> has_in_edge;

  int kind_count(ecg::NodeKind k) const {
    const auto i = static_cast<std::size_t>(k);
    return kind_offset[i + 1] - kind_offset[i];
  }
  int row(const ecg::NodeRef& n) const;
};

CanonicalGraph canonicalize(const ecg::EcgGraph& graph);

struct HgtLayer {
  std::array<nn::Linear, ecg::kNumNodeKinds> q, k, v, o;
  // [relation][head], each d_h x d_h
  std::array<std::vector<std::size_t>, ecg::kNumRelations> w_att, w_msg;
  std::array<std::size_t, ecg::kNumRelations> mu{};
  std::array<nn::LayerNorm, ecg::kNumNodeKinds> norm;
  int hidden = 0;
  int heads = 0;
  bool layer_norm = false;

  static HgtLayer create(ad::ParamStore& ps, const std::string& name,
                         int hidden, int heads, bool layer_norm, Rng& rng);

  // Per-kind projection of the canonical node matrix h.
  Var project(const Ctx& ctx, const CanonicalGraph& g, Var h,
              const std::array<nn::Linear, ecg::kNumNodeKinds>& proj) const;
};

// Attention weight per (edge, head), E x heads, in canonical edge order.
// Each column sums to 1 over the in-edges of every target.
Var hma_attention(const Ctx& ctx, const HgtLayer& layer, const CanonicalGraph& g,
                  Var h);
// Message per edge, E x hidden (heads concatenated).
Var hmp_messages(const Ctx& ctx, const HgtLayer& layer, const CanonicalGraph& g,
                 Var h);
// Weighted message sum per target, output projection, GELU, plus the
// residual h. Targets without in-edges keep only the residual.
Var eka_aggregate(const Ctx& ctx, const HgtLayer& layer, const CanonicalGraph& g,
                  Var h, Var attention, Var messages);

// Graph-enhanced node representations, one row per canonical node.
struct EncodedGraph {
  CanonicalGraph graph;
  Var h;  // n x hidden

  bool contains(const ecg::NodeRef& n) const;
  Var node(const ecg::NodeRef& n) const;
  // Rows of one kind in turn order; invalid Var when the kind is absent.
  Var kind_rows(ecg::NodeKind k) const;
  // History-only rows of one kind (turn < J).
  Var history_rows(ecg::NodeKind k) const;
};

struct Hgt {
  std::array<nn::Linear, ecg::kNumNodeKinds> input;
  std::vector<HgtLayer> layers;
  int hidden = 0;

  static Hgt create(ad::ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  // `features` is aligned with graph.nodes.
  EncodedGraph forward(const Ctx& ctx, const ecg::EcgGraph& graph,
                       const std::vector<Var>& features) const;
};

}  // namespace ecss::model
