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

#include "ecg/ecg.hpp"

#include <algorithm>
#include <sstream>

#include "util/error.hpp"

namespace ecss::ecg {
namespace {

constexpr std::array<std::string_view, kNumNodeKinds> kKindNames = {
    "text", "audio", "speaker", "emotion", "intensity"};
constexpr std::array<std::string_view, kNumNodeKinds> kKindShapes = {
    "box", "ellipse", "diamond", "hexagon", "octagon"};

std::vector<Relation> build_default_schema() {
  using K = NodeKind;
  const std::vector<std::pair<K, K>> cross = {
      {K::kText, K::kSpeaker},      {K::kText, K::kAudio},
      {K::kText, K::kEmotion},      {K::kText, K::kIntensity},
      {K::kAudio, K::kSpeaker},     {K::kEmotion, K::kSpeaker},
      {K::kEmotion, K::kIntensity}, {K::kEmotion, K::kAudio},
      {K::kIntensity, K::kSpeaker}, {K::kIntensity, K::kAudio},
  };
  std::vector<Relation> out;
  for (const auto& [a, b] : cross) {
    Relation r;
    r.id = static_cast<int>(out.size());
    r.name = std::string(node_kind_name(a)) + "-" + std::string(node_kind_name(b));
    r.a = a;
    r.b = b;
    out.push_back(r);
  }
  for (K k : {K::kText, K::kAudio, K::kEmotion, K::kIntensity}) {
    Relation r;
    r.id = static_cast<int>(out.size());
    r.name = std::string(node_kind_name(k)) + "-chain";
    r.a = k;
    r.b = k;
    r.chain = true;
    out.push_back(r);
  }
  return out;
}

}  // namespace

std::string_view node_kind_name(NodeKind k) {
  return kKindNames[static_cast<std::size_t>(k)];
}

NodeKind parse_node_kind(std::string_view name) {
  for (int i = 0; i < kNumNodeKinds; ++i)
    if (kKindNames[static_cast<std::size_t>(i)] == name)
      return static_cast<NodeKind>(i);
  fail(ErrorKind::kLookup, "unknown node kind '" + std::string(name) + "'");
}

std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::kIntra:
      return "intra";
    case Direction::kPastToFuture:
      return "p2f";
    case Direction::kFutureToPast:
      return "f2p";
  }
  return "intra";
}

const std::vector<Relation>& default_edge_schema() {
  static const std::vector<Relation> schema = build_default_schema();
  return schema;
}

Schema make_schema(const std::vector<NodeKind>& dropped) {
  Schema s;
  for (NodeKind k : dropped) {
    require(k != NodeKind::kText, ErrorKind::kConfig,
            "text nodes cannot be dropped");
    s.has_kind[static_cast<std::size_t>(k)] = false;
  }
  for (const Relation& r : default_edge_schema())
    if (s.has(r.a) && s.has(r.b)) s.relations.push_back(r);
  return s;
}

std::string node_label(const NodeRef& n) {
  return std::string(node_kind_name(n.kind)) + "@" + std::to_string(n.turn);
}

int EcgGraph::index_of(const NodeRef& n) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i] == n) return static_cast<int>(i);
  fail(ErrorKind::kLookup, "node " + node_label(n) + " is not in the graph");
}

bool EcgGraph::contains(const NodeRef& n) const {
  return std::find(nodes.begin(), nodes.end(), n) != nodes.end();
}

EcgGraph build_ecg(const corpus::ContextWindow& window, const Schema& schema) {
  require(window.current != nullptr, ErrorKind::kValidation,
          "context window has no current utterance");
  return build_ecg(window.history_length(), schema);
}

EcgGraph build_ecg(int history_length, const Schema& schema) {
  require(history_length >= 1, ErrorKind::kValidation,
          "an ECG needs at least one history turn");
  const int j = history_length;
  EcgGraph g;
  g.history_length = j;

  auto present = [&](NodeKind k, int turn) {
    if (!schema.has(k)) return false;
    if (turn < j) return true;
    return k == NodeKind::kText || k == NodeKind::kSpeaker;
  };
  for (int t = 0; t <= j; ++t)
    for (int k = 0; k < kNumNodeKinds; ++k)
      if (present(static_cast<NodeKind>(k), t))
        g.nodes.push_back({static_cast<NodeKind>(k), t});

  auto idx = [&](NodeKind k, int t) {
    // Nodes are laid out turn-major; a linear scan keeps this simple and the
    // graphs are tiny.
    return g.index_of({k, t});
  };
  for (const Relation& r : schema.relations) {
    if (!r.chain) {
      for (int t = 0; t <= j; ++t) {
        if (!present(r.a, t) || !present(r.b, t)) continue;
        const int a = idx(r.a, t);
        const int b = idx(r.b, t);
        g.edges.push_back({a, b, r.id, Direction::kIntra});
        g.edges.push_back({b, a, r.id, Direction::kIntra});
      }
    } else {
      for (int t = 0; t < j; ++t) {
        if (!present(r.a, t) || !present(r.a, t + 1)) continue;
        const int past = idx(r.a, t);
        const int future = idx(r.a, t + 1);
        g.edges.push_back({past, future, r.id, Direction::kPastToFuture});
        g.edges.push_back({future, past, r.id, Direction::kFutureToPast});
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.dst, x.src, x.relation) < std::tie(y.dst, y.src, y.relation);
  });
  return g;
}

std::vector<std::pair<NodeRef, int>> neighbors(const EcgGraph& graph,
                                               const NodeRef& node,
                                               std::optional<int> relation) {
  const int target = graph.index_of(node);
  std::vector<std::pair<NodeRef, int>> out;
  for (const Edge& e : graph.edges) {
    if (e.dst != target) continue;
    if (relation && e.relation != *relation) continue;
    out.emplace_back(graph.nodes[static_cast<std::size_t>(e.src)], e.relation);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return std::tie(x.first.turn, x.first.kind, x.second) <
           std::tie(y.first.turn, y.first.kind, y.second);
  });
  return out;
}

Counts expected_counts(int history_length, const Schema& schema) {
  require(history_length >= 1, ErrorKind::kValidation,
          "history length must be >= 1");
  const auto j = static_cast<std::size_t>(history_length);
  std::size_t kinds = 0;
  for (bool b : schema.has_kind) kinds += b ? 1 : 0;
  Counts c;
  c.nodes = kinds * j + 1 + (schema.has(NodeKind::kSpeaker) ? 1 : 0);
  for (const Relation& r : schema.relations) {
    if (r.chain) {
      // The text chain reaches the current turn.
      c.edges += 2 * (r.a == NodeKind::kText ? j : j - 1);
    } else {
      c.edges += 2 * j;
      if (r.a == NodeKind::kText && r.b == NodeKind::kSpeaker) c.edges += 2;
    }
  }
  return c;
}

std::string to_dot(const EcgGraph& graph) {
  std::ostringstream out;
  out << "digraph ecg {\n";
  for (const NodeRef& n : graph.nodes)
    out << "  \"" << node_label(n) << "\" [shape="
        << kKindShapes[static_cast<std::size_t>(n.kind)] << "];\n";
  const auto& schema = default_edge_schema();
  for (const Edge& e : graph.edges) {
    out << "  \"" << node_label(graph.nodes[static_cast<std::size_t>(e.src)])
        << "\" -> \"" << node_label(graph.nodes[static_cast<std::size_t>(e.dst)])
        << "\" [label=\"" << schema[static_cast<std::size_t>(e.relation)].name
        << ":" << direction_name(e.direction) << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace ecss::ecg
