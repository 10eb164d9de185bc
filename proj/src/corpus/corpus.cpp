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

#include "corpus/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <thread>

#include "util/error.hpp"
#include "util/rng.hpp"

namespace ecss::corpus {
namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "happy", "sad", "angry", "disgust", "fear", "surprise", "neutral"};
constexpr std::array<std::string_view, kNumIntensities> kIntensityNames = {
    "weak", "medium", "strong"};

// Annotated label counts of the reference dialogue corpus.
constexpr std::array<double, kNumEmotions> kEmotionCounts = {
    3871, 722, 226, 186, 74, 497, 18197};
constexpr std::array<double, kNumIntensities> kIntensityCounts = {19973, 3646,
                                                                  154};

constexpr std::uint64_t kAnchorSeed = 0xEC55A7C40ULL;

// 12 orthonormal directions in R^256: emotions, intensities, speakers.
const std::vector<std::vector<double>>& anchor_directions() {
  static const std::vector<std::vector<double>> dirs = [] {
    Rng rng(kAnchorSeed);
    std::vector<std::vector<double>> out;
    constexpr int kCount = kNumEmotions + kNumIntensities + kNumSpeakers;
    for (int k = 0; k < kCount; ++k) {
      std::vector<double> v(kAudioDim);
      for (double& x : v) x = rng.normal();
      for (const auto& u : out) {
        double dot = 0.0;
        for (int d = 0; d < kAudioDim; ++d) dot += v[d] * u[d];
        for (int d = 0; d < kAudioDim; ++d) v[d] -= dot * u[d];
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
      out.push_back(std::move(v));
    }
    return out;
  }();
  return dirs;
}

double hadamard(int row, int col) {
  return (std::popcount(static_cast<unsigned>(row & col)) % 2 == 0) ? 1.0 : -1.0;
}

Conversation generate_one(const GeneratorConfig& config, std::size_t index) {
  Rng rng(derive_seed(config.seed, {index}));
  const auto emo_p = emotion_marginals(config.label_mode);
  const auto int_p = intensity_marginals(config.label_mode);

  const int turns =
      std::clamp(2 + rng.poisson(config.mean_turns - 2.0), 2, 25);
  Conversation conv;
  char id[32];
  std::snprintf(id, sizeof(id), "conv-%05zu", index);
  conv.id = id;
  conv.turns.reserve(static_cast<std::size_t>(turns));

  int speaker = static_cast<int>(rng.uniform_int(0, 1));
  int emotion = static_cast<int>(rng.categorical(emo_p));
  int intensity = static_cast<int>(rng.categorical(int_p));
  for (int t = 0; t < turns; ++t) {
    if (t > 0) {
      speaker = 1 - speaker;
      if (rng.uniform() >= config.persistence)
        emotion = static_cast<int>(rng.categorical(emo_p));
      if (rng.uniform() >= config.persistence)
        intensity = static_cast<int>(rng.categorical(int_p));
    }
    Utterance u;
    const int n_tokens = static_cast<int>(rng.uniform_int(3, 10));
    u.tokens.resize(static_cast<std::size_t>(n_tokens));
    for (int& tok : u.tokens)
      tok = static_cast<int>(rng.uniform_int(0, config.vocab_size - 1));
    u.speaker = speaker;
    u.emotion = static_cast<Emotion>(emotion);
    u.intensity = static_cast<Intensity>(intensity);
    OracleOutput o = oracle_acoustics(u.tokens, speaker, u.emotion,
                                      u.intensity, rng.next_u64());
    u.audio_feat = std::move(o.audio_feat);
    u.targets = std::move(o.targets);
    conv.turns.push_back(std::move(u));
  }
  return conv;
}

}  // namespace

std::string_view emotion_name(Emotion e) {
  return kEmotionNames[static_cast<std::size_t>(e)];
}

std::string_view intensity_name(Intensity i) {
  return kIntensityNames[static_cast<std::size_t>(i)];
}

Emotion parse_emotion(std::string_view name) {
  for (int i = 0; i < kNumEmotions; ++i)
    if (kEmotionNames[static_cast<std::size_t>(i)] == name)
      return static_cast<Emotion>(i);
  fail(ErrorKind::kLookup, "unknown emotion '" + std::string(name) + "'");
}

Intensity parse_intensity(std::string_view name) {
  for (int i = 0; i < kNumIntensities; ++i)
    if (kIntensityNames[static_cast<std::size_t>(i)] == name)
      return static_cast<Intensity>(i);
  fail(ErrorKind::kLookup, "unknown intensity '" + std::string(name) + "'");
}

Emotion emotion_from_code(int code) {
  require(code >= 0 && code < kNumEmotions, ErrorKind::kLookup,
          "emotion code " + std::to_string(code) + " out of range");
  return static_cast<Emotion>(code);
}

Intensity intensity_from_code(int code) {
  require(code >= 0 && code < kNumIntensities, ErrorKind::kLookup,
          "intensity code " + std::to_string(code) + " out of range");
  return static_cast<Intensity>(code);
}

bool AcousticTargets::operator==(const AcousticTargets& o) const {
  return mel.rows() == o.mel.rows() && mel.cols() == o.mel.cols() &&
         mel == o.mel && pitch == o.pitch && energy == o.energy &&
         duration == o.duration && prosody == o.prosody;
}

std::string_view label_mode_name(LabelMode m) {
  return m == LabelMode::kBalanced ? "balanced" : "paper_skewed";
}

LabelMode parse_label_mode(std::string_view name) {
  if (name == "balanced") return LabelMode::kBalanced;
  if (name == "paper_skewed") return LabelMode::kPaperSkewed;
  fail(ErrorKind::kConfig, "unknown label mode '" + std::string(name) + "'");
}

void GeneratorConfig::validate() const {
  require(n_conversations >= 1, ErrorKind::kConfig,
          "n_conversations must be >= 1");
  require(mean_turns >= 2.0, ErrorKind::kConfig, "mean_turns must be >= 2");
  require(vocab_size >= 1, ErrorKind::kConfig, "vocab_size must be >= 1");
  require(persistence >= 0.0 && persistence <= 1.0, ErrorKind::kConfig,
          "persistence must lie in [0, 1]");
}

std::array<double, kNumEmotions> emotion_marginals(LabelMode mode) {
  std::array<double, kNumEmotions> p{};
  if (mode == LabelMode::kBalanced) {
    p.fill(1.0 / kNumEmotions);
    return p;
  }
  double total = 0.0;
  for (double c : kEmotionCounts) total += c;
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = kEmotionCounts[i] / total;
  return p;
}

std::array<double, kNumIntensities> intensity_marginals(LabelMode mode) {
  std::array<double, kNumIntensities> p{};
  if (mode == LabelMode::kBalanced) {
    p.fill(1.0 / kNumIntensities);
    return p;
  }
  double total = 0.0;
  for (double c : kIntensityCounts) total += c;
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = kIntensityCounts[i] / total;
  return p;
}

Corpus generate_corpus(const GeneratorConfig& config) {
  config.validate();
  Corpus corpus(config.n_conversations);
  const unsigned threads =
      std::max(1u, std::min<unsigned>(config.threads,
                                      static_cast<unsigned>(corpus.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i)
      corpus[i] = generate_one(config, i);
    return corpus;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < corpus.size(); i += threads)
        corpus[i] = generate_one(config, i);
    });
  }
  for (auto& th : pool) th.join();
  return corpus;
}

std::vector<double> audio_anchor(Emotion emotion, Intensity intensity,
                                 int speaker) {
  require(speaker >= 0 && speaker < kNumSpeakers, ErrorKind::kLookup,
          "speaker id out of range");
  const auto& dirs = anchor_directions();
  const auto& ue = dirs[static_cast<std::size_t>(emotion)];
  const auto& vi = dirs[kNumEmotions + static_cast<std::size_t>(intensity)];
  const auto& ws =
      dirs[kNumEmotions + kNumIntensities + static_cast<std::size_t>(speaker)];
  std::vector<double> a(kAudioDim);
  for (int d = 0; d < kAudioDim; ++d) a[d] = 2.0 * ue[d] + vi[d] + 0.5 * ws[d];
  return a;
}

OracleOutput oracle_acoustics(std::span<const int> tokens, int speaker,
                              Emotion emotion, Intensity intensity,
                              std::uint64_t seed) {
  require(!tokens.empty(), ErrorKind::kValidation,
          "oracle_acoustics: empty token list");
  for (int t : tokens)
    require(t >= 0, ErrorKind::kValidation, "oracle_acoustics: negative token");
  const double e = static_cast<double>(emotion);
  const double i = static_cast<double>(intensity);

  OracleOutput out;
  out.audio_feat = audio_anchor(emotion, intensity, speaker);
  Rng rng(seed);
  for (double& x : out.audio_feat) x += kAudioNoiseScale * rng.normal();

  AcousticTargets& tg = out.targets;
  const std::size_t n = tokens.size();
  tg.duration.resize(n);
  tg.pitch.resize(n);
  tg.energy.resize(n);
  int frames = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const double t = tokens[p];
    tg.duration[p] = 1 + tokens[p] % 4;
    frames += tg.duration[p];
    tg.pitch[p] = 0.15 * (e - 3.0) + 0.3 * (i - 1.0) +
                  0.1 * std::sin(0.9 * t + 0.5 * static_cast<double>(p));
    tg.energy[p] = -0.1 * (e - 3.0) + 0.4 * (i - 1.0) +
                   0.1 * std::cos(0.7 * t + 0.3 * static_cast<double>(p));
  }

  const double amp = 0.6 + 0.2 * e;
  const double ramp = 0.4 * (i + 1.0);
  const double offset = speaker == 0 ? -0.25 : 0.25;
  tg.mel.resize(frames, kMelBins);
  int f = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const double phase = 0.7 * tokens[p];
    for (int r = 0; r < tg.duration[p]; ++r, ++f) {
      for (int b = 0; b < kMelBins; ++b) {
        tg.mel(f, b) = amp * std::sin(2.0 * std::numbers::pi * b / kMelBins + phase) +
                       ramp * static_cast<double>(f) / frames + offset;
      }
    }
  }

  tg.prosody.resize(kProsodyDim);
  for (int d = 0; d < kProsodyDim; ++d)
    tg.prosody[d] = (1.0 + i) * hadamard(static_cast<int>(emotion) + 1, d);
  return out;
}

void validate_utterance(const Utterance& u) {
  require(!u.tokens.empty(), ErrorKind::kValidation, "utterance has no tokens");
  for (int t : u.tokens)
    require(t >= 0, ErrorKind::kValidation, "negative token id");
  require(u.speaker >= 0 && u.speaker < kNumSpeakers, ErrorKind::kValidation,
          "speaker id out of range");
  require(static_cast<int>(u.emotion) >= 0 &&
              static_cast<int>(u.emotion) < kNumEmotions,
          ErrorKind::kValidation, "emotion out of range");
  require(static_cast<int>(u.intensity) >= 0 &&
              static_cast<int>(u.intensity) < kNumIntensities,
          ErrorKind::kValidation, "intensity out of range");
  require(u.audio_feat.size() == kAudioDim, ErrorKind::kValidation,
          "audio_feat must have 256 entries");
  for (double x : u.audio_feat)
    require(std::isfinite(x), ErrorKind::kValidation, "audio_feat not finite");

  const AcousticTargets& tg = u.targets;
  const std::size_t n = u.tokens.size();
  require(tg.duration.size() == n && tg.pitch.size() == n &&
              tg.energy.size() == n,
          ErrorKind::kValidation,
          "pitch/energy/duration must have one entry per token");
  long total = 0;
  for (int d : tg.duration) {
    require(d >= 1, ErrorKind::kValidation, "duration entries must be >= 1");
    total += d;
  }
  require(tg.mel.cols() == kMelBins, ErrorKind::kValidation,
          "mel frames must have 80 bins");
  require(total == tg.mel.rows(), ErrorKind::kValidation,
          "sum(duration) = " + std::to_string(total) +
              " does not match mel frame count " +
              std::to_string(tg.mel.rows()));
  require(tg.mel.allFinite(), ErrorKind::kValidation, "mel not finite");
  for (double x : tg.pitch)
    require(std::isfinite(x), ErrorKind::kValidation, "pitch not finite");
  for (double x : tg.energy)
    require(std::isfinite(x), ErrorKind::kValidation, "energy not finite");
  require(tg.prosody.size() == kProsodyDim, ErrorKind::kValidation,
          "prosody must have 256 entries");
  for (double x : tg.prosody)
    require(std::isfinite(x), ErrorKind::kValidation, "prosody not finite");
}

void validate_conversation(const Conversation& c) {
  require(c.turns.size() >= 2, ErrorKind::kValidation,
          "conversation '" + c.id + "' has fewer than 2 turns");
  for (std::size_t t = 0; t < c.turns.size(); ++t) {
    validate_utterance(c.turns[t]);
    if (t > 0)
      require(c.turns[t].speaker != c.turns[t - 1].speaker,
              ErrorKind::kValidation,
              "conversation '" + c.id + "': speakers do not alternate at turn " +
                  std::to_string(t));
  }
}

ContextWindow slice_context(const Conversation& conversation,
                            int current_index, int length) {
  require(length >= 1, ErrorKind::kValidation, "context length must be >= 1");
  require(current_index != 0, ErrorKind::kValidation,
          "current index 0 has no dialogue history");
  require(current_index > 0 &&
              current_index < static_cast<int>(conversation.turns.size()),
          ErrorKind::kValidation, "current index out of range");
  ContextWindow w;
  w.conversation_id = conversation.id;
  w.current_index = current_index;
  const int j = std::min(length, current_index);
  for (int t = current_index - j; t < current_index; ++t)
    w.history.push_back(&conversation.turns[static_cast<std::size_t>(t)]);
  w.current = &conversation.turns[static_cast<std::size_t>(current_index)];
  return w;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  require(!corpus.empty(), ErrorKind::kValidation,
          "corpus_stats of an empty corpus");
  CorpusStats s;
  s.conversations = corpus.size();
  for (const auto& c : corpus) {
    for (const auto& u : c.turns) {
      ++s.emotion[static_cast<std::size_t>(u.emotion)];
      ++s.intensity[static_cast<std::size_t>(u.intensity)];
      ++s.speaker[static_cast<std::size_t>(u.speaker)];
      ++s.utterances;
    }
  }
  s.mean_turns = static_cast<double>(s.utterances) /
                 static_cast<double>(s.conversations);
  return s;
}

Split split_of(std::string_view conversation_id) {
  const std::uint64_t bucket = fnv1a64(conversation_id) % 10;
  if (bucket < 8) return Split::kTrain;
  return bucket == 8 ? Split::kVal : Split::kTest;
}

Corpus select_split(const Corpus& corpus, Split split) {
  Corpus out;
  for (const auto& c : corpus)
    if (split_of(c.id) == split) out.push_back(c);
  return out;
}

std::vector<int> tokenize(std::string_view text, int vocab_size) {
  std::vector<int> ids;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    int id = -1;
    if (word.size() >= 2 && word[0] == 'w') {
      try {
        std::size_t used = 0;
        id = std::stoi(word.substr(1), &used);
        if (used != word.size() - 1) id = -1;
      } catch (const std::exception&) {
        id = -1;
      }
    }
    require(id >= 0 && id < vocab_size, ErrorKind::kLookup,
            "word '" + word + "' is not in the vocabulary");
    ids.push_back(id);
  }
  return ids;
}

std::string detokenize(std::span<const int> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += 'w' + std::to_string(tokens[i]);
  }
  return out;
}

}  // namespace ecss::corpus
