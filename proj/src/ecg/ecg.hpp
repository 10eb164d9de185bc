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
#include <compare>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corpus/corpus.hpp"

namespace ecss::ecg {

enum class NodeKind : int { kText = 0, kAudio, kSpeaker, kEmotion, kIntensity };
inline constexpr int kNumNodeKinds = 5;
inline constexpr int kNumRelations = 14;

std::string_view node_kind_name(NodeKind k);
NodeKind parse_node_kind(std::string_view name);

enum class Direction : int { kIntra = 0, kPastToFuture, kFutureToPast };

std::string_view direction_name(Direction d);

// A relation class. Cross-kind relations connect nodes of one turn; chain
// relations connect the same kind across adjacent turns. Both are
// materialized in both directions and share one parameter set.
struct Relation {
  int id = 0;
  std::string name;
  NodeKind a = NodeKind::kText;
  NodeKind b = NodeKind::kText;
  bool chain = false;
};

// The 14-entry default table in stable order: 10 cross-kind relations, then
// the text, audio, emotion and intensity chains.
const std::vector<Relation>& default_edge_schema();

// The default table with some node kinds removed. Relation ids keep their
// default-table values so parameters stay addressable.
struct Schema {
  std::array<bool, kNumNodeKinds> has_kind{true, true, true, true, true};
  std::vector<Relation> relations;

  bool has(NodeKind k) const { return has_kind[static_cast<std::size_t>(k)]; }
};

Schema make_schema(const std::vector<NodeKind>& dropped = {});

struct NodeRef {
  NodeKind kind = NodeKind::kText;
  int turn = 0;  // 0..J-1 history, J current

  auto operator<=>(const NodeRef&) const = default;
};

std::string node_label(const NodeRef& n);

struct Edge {
  int src = 0;  // node indices
  int dst = 0;
  int relation = 0;
  Direction direction = Direction::kIntra;
};

struct EcgGraph {
  int history_length = 0;
  std::vector<NodeRef> nodes;
  std::vector<Edge> edges;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t edge_count() const { return edges.size(); }
  // Lookup error for nodes not in the graph.
  int index_of(const NodeRef& n) const;
  bool contains(const NodeRef& n) const;
};

// Nodes ordered by (turn, kind), edges by (dst, src, relation).
EcgGraph build_ecg(const corpus::ContextWindow& window,
                   const Schema& schema = make_schema());
EcgGraph build_ecg(int history_length, const Schema& schema = make_schema());

// In-edge sources of `node`, ordered by (turn, kind, relation).
std::vector<std::pair<NodeRef, int>> neighbors(
    const EcgGraph& graph, const NodeRef& node,
    std::optional<int> relation = std::nullopt);

struct Counts {
  std::size_t nodes = 0;
  std::size_t edges = 0;

  bool operator==(const Counts&) const = default;
};

// (5J + 2, 28J - 4) for the default schema.
Counts expected_counts(int history_length, const Schema& schema = make_schema());

// Graphviz text: one line per node ("label" [shape=...]) then one per edge
// ("src" -> "dst" [label="relation:dir"]), in graph order.
std::string to_dot(const EcgGraph& graph);

}  // namespace ecss::ecg
