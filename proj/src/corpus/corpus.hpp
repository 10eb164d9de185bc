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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ad/tape.hpp"

namespace ecss::corpus {

using ad::Mat;

inline constexpr int kNumEmotions = 7;
inline constexpr int kNumIntensities = 3;
inline constexpr int kNumSpeakers = 2;
inline constexpr int kAudioDim = 256;
inline constexpr int kMelBins = 80;
inline constexpr int kProsodyDim = 256;

enum class Emotion : int {
  kHappy = 0,
  kSad,
  kAngry,
  kDisgust,
  kFear,
  kSurprise,
  kNeutral,
};

enum class Intensity : int { kWeak = 0, kMedium, kStrong };

std::string_view emotion_name(Emotion e);
std::string_view intensity_name(Intensity i);
// Lookup error for unknown names.
Emotion parse_emotion(std::string_view name);
Intensity parse_intensity(std::string_view name);
Emotion emotion_from_code(int code);
Intensity intensity_from_code(int code);

struct AcousticTargets {
  Mat mel;                     // frames x 80
  std::vector<double> pitch;   // per token
  std::vector<double> energy;  // per token
  std::vector<int> duration;   // per token, frames >= 1
  std::vector<double> prosody;  // 256

  bool operator==(const AcousticTargets& o) const;
};

// One dialogue turn: the <text, speaker, audio, emotion, intensity> record
// plus the acoustic targets the synthesizer is trained against.
struct Utterance {
  std::vector<int> tokens;
  int speaker = 0;
  std::vector<double> audio_feat;
  Emotion emotion = Emotion::kNeutral;
  Intensity intensity = Intensity::kWeak;
  AcousticTargets targets;

  bool operator==(const Utterance& o) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> turns;

  bool operator==(const Conversation& o) const = default;
};

using Corpus = std::vector<Conversation>;

enum class LabelMode { kPaperSkewed, kBalanced };

std::string_view label_mode_name(LabelMode m);
LabelMode parse_label_mode(std::string_view name);

struct GeneratorConfig {
  std::size_t n_conversations = 100;
  double mean_turns = 9.3;
  int vocab_size = 64;
  LabelMode label_mode = LabelMode::kPaperSkewed;
  // Probability that a turn keeps the previous turn's emotion (and,
  // independently, intensity); otherwise the label is redrawn from the
  // marginals, which leaves the marginals stationary.
  double persistence = 0.6;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

std::array<double, kNumEmotions> emotion_marginals(LabelMode mode);
std::array<double, kNumIntensities> intensity_marginals(LabelMode mode);

Corpus generate_corpus(const GeneratorConfig& config);

// Per-coordinate standard deviation of the noise added to audio anchors.
inline constexpr double kAudioNoiseScale = 0.05;

// Closed-form acoustic oracle.
//   duration(t)  = 1 + (t mod 4)
//   mel[f, b]    = A(e) sin(2 pi b / 80 + 0.7 t_f) + B(i) f / F + off(s)
//                  A(e) = 0.6 + 0.2 e, B(i) = 0.4 (i + 1), off(s) = -0.25 / +0.25
//   pitch[p]     = 0.15 (e - 3) + 0.3 (i - 1) + 0.1 sin(0.9 t + 0.5 p)
//   energy[p]    = -0.1 (e - 3) + 0.4 (i - 1) + 0.1 cos(0.7 t + 0.3 p)
//   prosody      = (1 + i) * H[e + 1], H the 256 x 256 Sylvester Hadamard matrix
//   audio_feat   = anchor(e, i, s) + kAudioNoiseScale * N(0, I)
// where t_f is the token frame f belongs to and p the token position.
struct OracleOutput {
  std::vector<double> audio_feat;
  AcousticTargets targets;
};

OracleOutput oracle_acoustics(std::span<const int> tokens, int speaker,
                              Emotion emotion, Intensity intensity,
                              std::uint64_t seed);

// 2 u_e + v_i + 0.5 w_s over 12 orthonormal directions.
std::vector<double> audio_anchor(Emotion emotion, Intensity intensity,
                                 int speaker);

// Throws a validation error naming the broken invariant.
void validate_utterance(const Utterance& u);
void validate_conversation(const Conversation& c);

// J history turns preceding `current`. Pointers refer into the conversation,
// which must outlive the window.
struct ContextWindow {
  std::vector<const Utterance*> history;
  const Utterance* current = nullptr;
  std::string conversation_id;
  int current_index = 0;

  int history_length() const { return static_cast<int>(history.size()); }
};

ContextWindow slice_context(const Conversation& conversation,
                            int current_index, int length);

struct CorpusStats {
  std::array<std::size_t, kNumEmotions> emotion{};
  std::array<std::size_t, kNumIntensities> intensity{};
  std::array<std::size_t, kNumSpeakers> speaker{};
  std::size_t conversations = 0;
  std::size_t utterances = 0;
  double mean_turns = 0.0;
};

CorpusStats corpus_stats(const Corpus& corpus);

enum class Split { kTrain, kVal, kTest };

// 8:1:1 by a stable hash of the conversation id.
Split split_of(std::string_view conversation_id);
Corpus select_split(const Corpus& corpus, Split split);

// Whitespace tokenizer over the fixed synthetic vocabulary ("w0" ... ).
std::vector<int> tokenize(std::string_view text, int vocab_size);
std::string detokenize(std::span<const int> tokens);

// One JSONL record, "id" plus "turns".
std::string conversation_to_json(const Conversation& c);
// Parse and validate one record; `line` prefixes error messages.
Conversation conversation_from_json(const std::string& text, std::size_t line = 1);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace ecss::corpus
