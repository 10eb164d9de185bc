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
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus/corpus.hpp"
#include "model/model.hpp"
#include "train/train.hpp"

namespace ecss::eval {

struct AcousticPrediction {
  ad::Mat mel;
  std::vector<double> pitch;
  std::vector<double> energy;
  std::vector<double> log_duration;  // before rounding
};

struct MaeValues {
  double mel = 0.0;
  double pitch = 0.0;
  double energy = 0.0;
  double duration = 0.0;  // on log durations
};

// Elementwise MAE of one utterance; mel shapes must agree (teacher-forced).
MaeValues mae_metrics(const AcousticPrediction& pred,
                      const corpus::AcousticTargets& target);
// Mean of the per-utterance values.
MaeValues mae_metrics(const std::vector<AcousticPrediction>& preds,
                      const std::vector<const corpus::AcousticTargets*>& targets);

using Confusion = std::vector<std::vector<long>>;  // [truth][predicted]

// Lowest index among maximal entries.
int argmax(const ad::Mat& row);

Confusion confusion_from_labels(const std::vector<int>& truth,
                                const std::vector<int>& predicted, int classes);
bool strictly_dominant_diagonal(const Confusion& c);
double accuracy(const Confusion& c);

// Mean cosine similarity over same-label pairs minus the mean over
// different-label pairs (rows of `features`).
double cosine_gap(const ad::Mat& features, const std::vector<int>& labels);

struct EvalReport {
  MaeValues mae;
  Confusion emotion;    // 7 x 7
  Confusion intensity;  // 3 x 3
  double emotion_accuracy = 0.0;
  double intensity_accuracy = 0.0;
  double emotion_cosine_gap = 0.0;
  double intensity_cosine_gap = 0.0;
  std::size_t samples = 0;
  // Every evaluated graph matched the counting oracle for its schema.
  bool graph_counts_ok = true;
  nlohmann::json config;
};

// Every window (turn >= 1) of `corpus`, dropout off, teacher durations.
EvalReport evaluate(const model::Model& model, const corpus::Corpus& corpus,
                    int context_length, unsigned threads = 1);

// "metric,name,value" rows.
std::string report_csv(const EvalReport& r);
// Grid with a header row of predicted-class names.
std::string confusion_csv(const Confusion& c, const std::vector<std::string>& names);
// Heatmap with a fixed white-to-blue ramp and counts printed in each cell.
std::string confusion_svg(const Confusion& c, const std::vector<std::string>& names,
                          const std::string& title);
std::vector<std::string> emotion_names();
std::vector<std::string> intensity_names();
nlohmann::json report_json(const EvalReport& r);
Confusion confusion_from_csv(const std::string& text);

using StepHook = std::function<void(const std::string& run, const train::LossBreakdown&)>;

struct SweepRow {
  int context_length = 0;
  EvalReport report;
  train::LossBreakdown final_losses;
};

inline const std::vector<int> kSweepLengths = {2, 3, 6, 9, 10, 13, 14};

// A fresh training run per length with the same seeds, evaluated at that
// length.
std::vector<SweepRow> context_sweep(const corpus::Corpus& train_set,
                                    const corpus::Corpus& test_set,
                                    const train::TrainConfig& base,
                                    const std::vector<int>& lengths,
                                    const StepHook& hook = {});
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct AblationRow {
  std::string name;  // "full", "w/o emotion", ...
  model::Ablation ablation;
  EvalReport report;
  train::LossBreakdown final_losses;
  // Node and edge counts of a J = 10 graph under this row's schema.
  ecg::Counts counts_at_10;
};

// Baseline, then w/o emotion, intensity, speaker, audio, and contrastive loss.
std::vector<model::Ablation> ablation_settings();
std::string ablation_label(const model::Ablation& a);

std::vector<AblationRow> ablation_suite(const corpus::Corpus& train_set,
                                        const corpus::Corpus& test_set,
                                        const train::TrainConfig& base,
                                        const StepHook& hook = {});
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct RenderedPrediction {
  AcousticPrediction acoustics;
  std::vector<int> durations;
  int emotion = 0;
  int intensity = 0;
  std::vector<double> emotion_logits;
  std::vector<double> intensity_logits;
  bool emotion_fallback = false;
  bool intensity_fallback = false;
};

// Free-running synthesis of the window's current utterance.
RenderedPrediction predict(const model::Model& model,
                           const corpus::ContextWindow& window);

// u32 frames, u32 bins, then row-major float32, little-endian.
void write_mel(const std::filesystem::path& path, const ad::Mat& mel);
ad::Mat read_mel(const std::filesystem::path& path);

}  // namespace ecss::eval
