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

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus/corpus.hpp"
#include "ecg/ecg.hpp"
#include "model/config.hpp"
#include "nn/layers.hpp"

namespace ecss::model {

using ad::Var;
using nn::Ctx;

// Unigram and bigram bins of a token sequence; a bin appears once per
// occurrence, so summing table rows over the result is a count-vector
// product.
std::vector<int> hashed_ngram_bins(std::span<const int> tokens, int bins);

// Precomputed per-utterance text vectors, keyed "<conversation id>#<turn>".
class ExternalEmbeddings {
 public:
  ExternalEmbeddings() = default;
  // JSON Lines of {"utterance_key": str, "vec": [float x dim]}.
  static ExternalEmbeddings load(const std::filesystem::path& path, int dim);

  static std::string key(std::string_view conversation_id, int turn);
  // Ingestion error naming the key when absent.
  const std::vector<double>& at(const std::string& key) const;
  std::size_t size() const { return table_.size(); }
  void insert(std::string key, std::vector<double> vec);

 private:
  std::unordered_map<std::string, std::vector<double>> table_;
};

struct EmbeddingTable {
  std::size_t table = 0;
  int rows = 0;

  static EmbeddingTable create(ad::ParamStore& ps, const std::string& name,
                               int rows, int dim, Rng& rng);
  // 1 x dim row; lookup error for labels outside [0, rows).
  Var lookup(const Ctx& ctx, int label) const;
};

struct Encoders {
  EmbeddingTable speaker, emotion, intensity;
  std::size_t ngram_table = 0;  // hash_bins x text_dim
  std::size_t ngram_bias = 0;
  nn::Linear audio;  // audio_dim -> node_dim
  int text_dim = 0;
  int hash_bins = 0;
  TextMode mode = TextMode::kHashedNgram;
  const ExternalEmbeddings* external = nullptr;

  static Encoders create(ad::ParamStore& ps, const ModelConfig& cfg, Rng& rng);

  // One text_dim row per token list.
  Var text_features(const Ctx& ctx,
                    const std::vector<std::span<const int>>& texts) const;
  Var text_features_external(const Ctx& ctx,
                             const std::vector<std::string>& keys) const;
  Var audio_features(const Ctx& ctx, std::span<const double> audio_feat) const;

  // Feature per graph node, aligned with graph.nodes.
  std::vector<Var> init_node_features(const Ctx& ctx, const ecg::EcgGraph& graph,
                                      const corpus::ContextWindow& window) const;
};

}  // namespace ecss::model
