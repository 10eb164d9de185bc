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

#include <fstream>
#include <string>

#include <json.hpp>

#include "corpus/corpus.hpp"
#include "util/error.hpp"

namespace ecss::corpus {
namespace {

using nlohmann::json;

// Field access that reports the offending line and field.
class RecordReader {
 public:
  RecordReader(const json& obj, std::size_t line, std::string where)
      : obj_(obj), line_(line), where_(std::move(where)) {}

  const json& field(const char* name, json::value_t type) const {
    auto it = obj_.find(name);
    if (it == obj_.end()) error(name, "missing field");
    const bool numeric_ok =
        type == json::value_t::number_float && it->is_number();
    const bool int_ok =
        type == json::value_t::number_integer && it->is_number_integer();
    if (!numeric_ok && !int_ok && it->type() != type)
      error(name, "wrong type");
    return *it;
  }

  [[noreturn]] void error(const std::string& name,
                          const std::string& what) const {
    fail(ErrorKind::kParse, "line " + std::to_string(line_) + ": " + where_ +
                                "field '" + name + "': " + what);
  }

  std::vector<double> reals(const char* name) const {
    const json& a = field(name, json::value_t::array);
    std::vector<double> out;
    out.reserve(a.size());
    for (const auto& v : a) {
      if (!v.is_number()) error(name, "expected numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

  std::vector<int> ints(const char* name) const {
    const json& a = field(name, json::value_t::array);
    std::vector<int> out;
    out.reserve(a.size());
    for (const auto& v : a) {
      if (!v.is_number_integer()) error(name, "expected integers");
      out.push_back(v.get<int>());
    }
    return out;
  }

  int integer(const char* name) const {
    return field(name, json::value_t::number_integer).get<int>();
  }

 private:
  const json& obj_;
  std::size_t line_;
  std::string where_;
};

json utterance_to_json(const Utterance& u) {
  json j;
  j["tokens"] = u.tokens;
  j["speaker"] = u.speaker;
  j["audio_feat"] = u.audio_feat;
  j["emotion"] = static_cast<int>(u.emotion);
  j["intensity"] = static_cast<int>(u.intensity);
  json mel = json::array();
  for (Eigen::Index r = 0; r < u.targets.mel.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < u.targets.mel.cols(); ++c)
      row.push_back(u.targets.mel(r, c));
    mel.push_back(std::move(row));
  }
  j["mel"] = std::move(mel);
  j["pitch"] = u.targets.pitch;
  j["energy"] = u.targets.energy;
  j["duration"] = u.targets.duration;
  j["prosody"] = u.targets.prosody;
  return j;
}

Utterance utterance_from_json(const json& j, std::size_t line,
                              std::size_t turn) {
  const std::string where = "turn " + std::to_string(turn) + ", ";
  if (!j.is_object())
    fail(ErrorKind::kParse, "line " + std::to_string(line) + ": " + where +
                                "expected an object");
  RecordReader r(j, line, where);
  Utterance u;
  u.tokens = r.ints("tokens");
  u.speaker = r.integer("speaker");
  u.audio_feat = r.reals("audio_feat");
  const int emo = r.integer("emotion");
  if (emo < 0 || emo >= kNumEmotions) r.error("emotion", "out of range");
  u.emotion = static_cast<Emotion>(emo);
  const int inten = r.integer("intensity");
  if (inten < 0 || inten >= kNumIntensities)
    r.error("intensity", "out of range");
  u.intensity = static_cast<Intensity>(inten);

  const json& mel = r.field("mel", json::value_t::array);
  u.targets.mel.resize(static_cast<Eigen::Index>(mel.size()), kMelBins);
  for (std::size_t f = 0; f < mel.size(); ++f) {
    const json& row = mel[f];
    if (!row.is_array() || row.size() != kMelBins)
      r.error("mel", "frame " + std::to_string(f) + " must hold 80 numbers");
    for (int b = 0; b < kMelBins; ++b) {
      if (!row[static_cast<std::size_t>(b)].is_number())
        r.error("mel", "expected numbers");
      u.targets.mel(static_cast<Eigen::Index>(f), b) =
          row[static_cast<std::size_t>(b)].get<double>();
    }
  }
  u.targets.pitch = r.reals("pitch");
  u.targets.energy = r.reals("energy");
  u.targets.duration = r.ints("duration");
  u.targets.prosody = r.reals("prosody");
  return u;
}

}  // namespace

std::string conversation_to_json(const Conversation& c) {
  json j;
  j["id"] = c.id;
  json turns = json::array();
  for (const auto& u : c.turns) turns.push_back(utterance_to_json(u));
  j["turns"] = std::move(turns);
  return j.dump();
}

Conversation conversation_from_json(const std::string& text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse,
         "line " + std::to_string(line) + ": malformed JSON: " + e.what());
  }
  if (!j.is_object())
    fail(ErrorKind::kParse, "line " + std::to_string(line) + ": expected an object");
  RecordReader r(j, line, "");
  Conversation c;
  c.id = r.field("id", json::value_t::string).get<std::string>();
  const json& turns = r.field("turns", json::value_t::array);
  for (std::size_t t = 0; t < turns.size(); ++t)
    c.turns.push_back(utterance_from_json(turns[t], line, t));
  try {
    validate_conversation(c);
  } catch (const Error& e) {
    fail(ErrorKind::kValidation, "line " + std::to_string(line) + ": " + e.what());
  }
  return c;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::kIo,
          "cannot open '" + path.string() + "' for writing");
  for (const auto& c : corpus) out << conversation_to_json(c) << '\n';
  out.flush();
  require(out.good(), ErrorKind::kIo, "write to '" + path.string() + "' failed");
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo,
          "cannot open corpus '" + path.string() + "'");
  Corpus corpus;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    corpus.push_back(conversation_from_json(text, line));
  }
  return corpus;
}

}  // namespace ecss::corpus
