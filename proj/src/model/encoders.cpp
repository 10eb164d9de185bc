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

#include "model/encoders.hpp"

#include <fstream>

#include <json.hpp>

#include "util/error.hpp"
#include "util/rng.hpp"

namespace ecss::model {

std::vector<int> hashed_ngram_bins(std::span<const int> tokens, int bins) {
  std::vector<int> out;
  out.reserve(tokens.size() * 2);
  const auto b = static_cast<std::uint64_t>(bins);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto t = static_cast<std::uint64_t>(tokens[i]);
    out.push_back(static_cast<int>(splitmix64(t * 2 + 1) % b));
    if (i + 1 < tokens.size()) {
      const auto u = static_cast<std::uint64_t>(tokens[i + 1]);
      out.push_back(static_cast<int>(splitmix64((t << 32) ^ (u * 2)) % b));
    }
  }
  return out;
}

ExternalEmbeddings ExternalEmbeddings::load(const std::filesystem::path& path,
                                            int dim) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kIo,
          "cannot open text embeddings '" + path.string() + "'");
  ExternalEmbeddings e;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(n);
    try {
      const auto j = nlohmann::json::parse(line);
      auto vec = j.at("vec").get<std::vector<double>>();
      require(static_cast<int>(vec.size()) == dim, ErrorKind::kParse,
              where + ": vec must have " + std::to_string(dim) + " entries");
      e.insert(j.at("utterance_key").get<std::string>(), std::move(vec));
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorKind::kParse, where + ": " + ex.what());
    }
  }
  return e;
}

std::string ExternalEmbeddings::key(std::string_view conversation_id,
                                    int turn) {
  return std::string(conversation_id) + "#" + std::to_string(turn);
}

const std::vector<double>& ExternalEmbeddings::at(const std::string& key) const {
  auto it = table_.find(key);
  require(it != table_.end(), ErrorKind::kLookup,
          "text embeddings have no entry for utterance '" + key + "'");
  return it->second;
}

void ExternalEmbeddings::insert(std::string key, std::vector<double> vec) {
  table_[std::move(key)] = std::move(vec);
}

EmbeddingTable EmbeddingTable::create(ad::ParamStore& ps, const std::string& name,
                                      int rows, int dim, Rng& rng) {
  EmbeddingTable t;
  t.rows = rows;
  t.table = ps.add_uniform(name, rows, dim, dim, rng);
  return t;
}

Var EmbeddingTable::lookup(const Ctx& ctx, int label) const {
  require(label >= 0 && label < rows, ErrorKind::kLookup,
          "label " + std::to_string(label) + " outside embedding table of " +
              std::to_string(rows) + " rows");
  return ad::gather_rows(ctx.p(table), {label});
}

Encoders Encoders::create(ad::ParamStore& ps, const ModelConfig& cfg, Rng& rng) {
  Encoders e;
  e.speaker = EmbeddingTable::create(ps, "enc.speaker", corpus::kNumSpeakers,
                                     cfg.node_dim, rng);
  e.emotion = EmbeddingTable::create(ps, "enc.emotion", corpus::kNumEmotions,
                                     cfg.node_dim, rng);
  e.intensity = EmbeddingTable::create(ps, "enc.intensity",
                                       corpus::kNumIntensities, cfg.node_dim, rng);
  e.text_dim = cfg.text_dim;
  e.hash_bins = cfg.hash_bins;
  e.mode = cfg.text_mode;
  if (cfg.text_mode == TextMode::kHashedNgram) {
    e.ngram_table = ps.add_uniform("enc.text.w", cfg.hash_bins, cfg.text_dim,
                                   cfg.hash_bins, rng);
    e.ngram_bias = ps.add_uniform("enc.text.b", 1, cfg.text_dim, cfg.hash_bins,
                                  rng);
  }
  e.audio = nn::Linear::create(ps, "enc.audio", cfg.audio_dim, cfg.node_dim, rng);
  return e;
}

Var Encoders::text_features(
    const Ctx& ctx, const std::vector<std::span<const int>>& texts) const {
  require(mode == TextMode::kHashedNgram, ErrorKind::kConfig,
          "hashed text features requested in external mode");
  std::vector<int> bins;
  std::vector<int> owner;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    require(!texts[i].empty(), ErrorKind::kValidation, "empty token list");
    for (int b : hashed_ngram_bins(texts[i], hash_bins)) {
      bins.push_back(b);
      owner.push_back(static_cast<int>(i));
    }
  }
  Var rows = ad::gather_rows(ctx.p(ngram_table), std::move(bins));
  Var summed = ad::scatter_add_rows(rows, std::move(owner),
                                    static_cast<int>(texts.size()));
  return ad::add_row(summed, ctx.p(ngram_bias));
}

Var Encoders::text_features_external(const Ctx& ctx,
                                     const std::vector<std::string>& keys) const {
  require(external != nullptr, ErrorKind::kConfig,
          "external text mode without loaded embeddings");
  ad::Mat m(static_cast<Eigen::Index>(keys.size()), text_dim);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& v = external->at(keys[i]);
    require(static_cast<int>(v.size()) == text_dim, ErrorKind::kConfig,
            "external embedding width does not match text_dim");
    for (int d = 0; d < text_dim; ++d)
      m(static_cast<Eigen::Index>(i), d) = v[static_cast<std::size_t>(d)];
  }
  return ctx.constant(std::move(m));
}

Var Encoders::audio_features(const Ctx& ctx,
                             std::span<const double> audio_feat) const {
  require(static_cast<int>(audio_feat.size()) == audio.in, ErrorKind::kValidation,
          "audio_feat has " + std::to_string(audio_feat.size()) +
              " entries, expected " + std::to_string(audio.in));
  ad::Mat x(1, audio.in);
  for (int d = 0; d < audio.in; ++d) x(0, d) = audio_feat[static_cast<std::size_t>(d)];
  return audio(ctx, ctx.constant(std::move(x)));
}

std::vector<Var> Encoders::init_node_features(
    const Ctx& ctx, const ecg::EcgGraph& graph,
    const corpus::ContextWindow& window) const {
  const int j = graph.history_length;
  require(window.history_length() == j && window.current != nullptr,
          ErrorKind::kValidation, "graph was not built from this window");
  auto utt = [&](int turn) -> const corpus::Utterance& {
    return turn < j ? *window.history[static_cast<std::size_t>(turn)]
                    : *window.current;
  };

  // All text nodes share one featurizer call.
  std::vector<int> text_turns;
  for (const auto& n : graph.nodes)
    if (n.kind == ecg::NodeKind::kText) text_turns.push_back(n.turn);
  Var text;
  if (!text_turns.empty()) {
    if (mode == TextMode::kHashedNgram) {
      std::vector<std::span<const int>> texts;
      for (int t : text_turns) texts.emplace_back(utt(t).tokens);
      text = text_features(ctx, texts);
    } else {
      std::vector<std::string> keys;
      for (int t : text_turns)
        keys.push_back(ExternalEmbeddings::key(window.conversation_id,
                                               window.current_index - j + t));
      text = text_features_external(ctx, keys);
    }
  }

  std::vector<Var> out(graph.nodes.size());
  int text_row = 0;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    const corpus::Utterance& u = utt(n.turn);
    switch (n.kind) {
      case ecg::NodeKind::kText:
        out[i] = ad::slice_rows(text, text_row++, 1);
        break;
      case ecg::NodeKind::kAudio:
        out[i] = audio_features(ctx, u.audio_feat);
        break;
      case ecg::NodeKind::kSpeaker:
        out[i] = speaker.lookup(ctx, u.speaker);
        break;
      case ecg::NodeKind::kEmotion:
        out[i] = emotion.lookup(ctx, static_cast<int>(u.emotion));
        break;
      case ecg::NodeKind::kIntensity:
        out[i] = intensity.lookup(ctx, static_cast<int>(u.intensity));
        break;
    }
  }
  return out;
}

}  // namespace ecss::model
