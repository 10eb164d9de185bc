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

#include "eval/eval.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "util/error.hpp"

namespace ecss::eval {

MaeValues mae_metrics(const AcousticPrediction& pred,
                      const corpus::AcousticTargets& target) {
  require(pred.mel.rows() == target.mel.rows() && pred.mel.cols() == target.mel.cols(),
          ErrorKind::kValidation, "mel prediction and target differ in shape");
  const std::size_t n = target.duration.size();
  require(pred.pitch.size() == n && pred.energy.size() == n &&
              pred.log_duration.size() == n && target.pitch.size() == n &&
              target.energy.size() == n && n > 0,
          ErrorKind::kValidation, "per-token predictions and targets differ in length");
  MaeValues m;
  m.mel = (pred.mel - target.mel).cwiseAbs().mean();
  for (std::size_t i = 0; i < n; ++i) {
    m.pitch += std::abs(pred.pitch[i] - target.pitch[i]);
    m.energy += std::abs(pred.energy[i] - target.energy[i]);
    m.duration += std::abs(pred.log_duration[i] - std::log(static_cast<double>(target.duration[i])));
  }
  const double inv = 1.0 / static_cast<double>(n);
  m.pitch *= inv;
  m.energy *= inv;
  m.duration *= inv;
  return m;
}

MaeValues mae_metrics(const std::vector<AcousticPrediction>& preds,
                      const std::vector<const corpus::AcousticTargets*>& targets) {
  require(preds.size() == targets.size() && !preds.empty(), ErrorKind::kValidation,
          "need one target per prediction and at least one pair");
  MaeValues sum;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const MaeValues m = mae_metrics(preds[i], *targets[i]);
    sum.mel += m.mel;
    sum.pitch += m.pitch;
    sum.energy += m.energy;
    sum.duration += m.duration;
  }
  const double inv = 1.0 / static_cast<double>(preds.size());
  return {sum.mel * inv, sum.pitch * inv, sum.energy * inv, sum.duration * inv};
}

int argmax(const ad::Mat& row) {
  require(row.size() > 0, ErrorKind::kValidation, "argmax of an empty row");
  int best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i)
    if (row.data()[i] > row.data()[best]) best = static_cast<int>(i);
  return best;
}

Confusion confusion_from_labels(const std::vector<int>& truth,
                                const std::vector<int>& predicted, int classes) {
  require(truth.size() == predicted.size(), ErrorKind::kValidation,
          "truth and prediction lists differ in length");
  Confusion c(static_cast<std::size_t>(classes),
              std::vector<long>(static_cast<std::size_t>(classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] >= 0 && truth[i] < classes && predicted[i] >= 0 &&
                predicted[i] < classes,
            ErrorKind::kValidation, "class index out of range");
    ++c[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return c;
}

bool strictly_dominant_diagonal(const Confusion& c) {
  for (std::size_t r = 0; r < c.size(); ++r)
    for (std::size_t k = 0; k < c[r].size(); ++k)
      if (k != r && c[r][r] <= c[r][k]) return false;
  return true;
}

double accuracy(const Confusion& c) {
  long total = 0, hit = 0;
  for (std::size_t r = 0; r < c.size(); ++r)
    for (std::size_t k = 0; k < c[r].size(); ++k) {
      total += c[r][k];
      if (r == k) hit += c[r][k];
    }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

double cosine_gap(const ad::Mat& features, const std::vector<int>& labels) {
  require(static_cast<std::size_t>(features.rows()) == labels.size(),
          ErrorKind::kValidation, "one label per feature row required");
  ad::Mat unit = features;
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    const double n = unit.row(i).norm();
    if (n > 0.0) unit.row(i) /= n;
  }
  const ad::Mat sim = unit * unit.transpose();
  double intra = 0.0, inter = 0.0;
  long n_intra = 0, n_inter = 0;
  for (Eigen::Index i = 0; i < sim.rows(); ++i)
    for (Eigen::Index j = i + 1; j < sim.cols(); ++j) {
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        intra += sim(i, j);
        ++n_intra;
      } else {
        inter += sim(i, j);
        ++n_inter;
      }
    }
  require(n_intra > 0 && n_inter > 0, ErrorKind::kValidation,
          "cosine gap needs both same-label and different-label pairs");
  return intra / static_cast<double>(n_intra) - inter / static_cast<double>(n_inter);
}

namespace {

template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<double> column_values(const ad::Mat& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

EvalReport evaluate(const model::Model& model, const corpus::Corpus& corpus,
                    int context_length, unsigned threads) {
  const auto windows = train::all_windows(corpus);
  require(!windows.empty(), ErrorKind::kValidation, "evaluation set has no windows");
  struct Item {
    AcousticPrediction pred;
    ad::Mat emo_feat, int_feat;
    int emo_pred = 0, int_pred = 0;
    bool counts_ok = true;
  };
  std::vector<Item> items(windows.size());
  parallel_for(windows.size(), threads, [&](std::size_t i) {
    const auto& w = windows[i];
    const auto window = corpus::slice_context(
        corpus[static_cast<std::size_t>(w.conversation)], w.index, context_length);
    ad::Tape tape(false);
    const auto out = model.forward(tape, window, model::ForwardOptions{});
    Item& it = items[i];
    it.pred.mel = out.mel.value();
    it.pred.pitch = column_values(out.variance.pitch.value());
    it.pred.energy = column_values(out.variance.energy.value());
    it.pred.log_duration = column_values(out.variance.log_duration.value());
    it.emo_feat = out.rendered.emotion.feature.value();
    it.int_feat = out.rendered.intensity.feature.value();
    it.emo_pred = argmax(out.rendered.emotion.logits.value());
    it.int_pred = argmax(out.rendered.intensity.logits.value());
    it.counts_ok = out.graph_counts ==
                   ecg::expected_counts(window.history_length(), model.schema());
  });

  EvalReport r;
  r.samples = items.size();
  std::vector<AcousticPrediction> preds;
  std::vector<const corpus::AcousticTargets*> targets;
  std::vector<int> emo_truth, emo_pred, int_truth, int_pred;
  ad::Mat emo_feats(static_cast<Eigen::Index>(items.size()), items[0].emo_feat.cols());
  ad::Mat int_feats(static_cast<Eigen::Index>(items.size()), items[0].int_feat.cols());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& w = windows[i];
    const auto& u = corpus[static_cast<std::size_t>(w.conversation)]
                        .turns[static_cast<std::size_t>(w.index)];
    preds.push_back(std::move(items[i].pred));
    targets.push_back(&u.targets);
    emo_truth.push_back(static_cast<int>(u.emotion));
    int_truth.push_back(static_cast<int>(u.intensity));
    emo_pred.push_back(items[i].emo_pred);
    int_pred.push_back(items[i].int_pred);
    emo_feats.row(static_cast<Eigen::Index>(i)) = items[i].emo_feat;
    int_feats.row(static_cast<Eigen::Index>(i)) = items[i].int_feat;
    r.graph_counts_ok = r.graph_counts_ok && items[i].counts_ok;
  }
  r.mae = mae_metrics(preds, targets);
  r.emotion = confusion_from_labels(emo_truth, emo_pred, corpus::kNumEmotions);
  r.intensity = confusion_from_labels(int_truth, int_pred, corpus::kNumIntensities);
  r.emotion_accuracy = accuracy(r.emotion);
  r.intensity_accuracy = accuracy(r.intensity);
  auto gap = [](const ad::Mat& f, const std::vector<int>& labels) {
    try {
      return cosine_gap(f, labels);
    } catch (const Error&) {
      return 0.0;
    }
  };
  r.emotion_cosine_gap = gap(emo_feats, emo_truth);
  r.intensity_cosine_gap = gap(int_feats, int_truth);
  r.config = model::to_json(model.config());
  r.config["context_length"] = context_length;
  return r;
}

std::vector<std::string> emotion_names() {
  std::vector<std::string> out;
  for (int i = 0; i < corpus::kNumEmotions; ++i)
    out.emplace_back(corpus::emotion_name(static_cast<corpus::Emotion>(i)));
  return out;
}

std::vector<std::string> intensity_names() {
  std::vector<std::string> out;
  for (int i = 0; i < corpus::kNumIntensities; ++i)
    out.emplace_back(corpus::intensity_name(static_cast<corpus::Intensity>(i)));
  return out;
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "metric,name,value\n";
  out << "mae,mel," << fmt(r.mae.mel) << "\n";
  out << "mae,pitch," << fmt(r.mae.pitch) << "\n";
  out << "mae,energy," << fmt(r.mae.energy) << "\n";
  out << "mae,duration," << fmt(r.mae.duration) << "\n";
  out << "accuracy,emotion," << fmt(r.emotion_accuracy) << "\n";
  out << "accuracy,intensity," << fmt(r.intensity_accuracy) << "\n";
  out << "cosine_gap,emotion," << fmt(r.emotion_cosine_gap) << "\n";
  out << "cosine_gap,intensity," << fmt(r.intensity_cosine_gap) << "\n";
  out << "count,samples," << r.samples << "\n";
  const auto en = emotion_names();
  for (std::size_t t = 0; t < r.emotion.size(); ++t)
    for (std::size_t p = 0; p < r.emotion[t].size(); ++p)
      out << "confusion_emotion," << en[t] << ">" << en[p] << "," << r.emotion[t][p] << "\n";
  const auto in = intensity_names();
  for (std::size_t t = 0; t < r.intensity.size(); ++t)
    for (std::size_t p = 0; p < r.intensity[t].size(); ++p)
      out << "confusion_intensity," << in[t] << ">" << in[p] << "," << r.intensity[t][p] << "\n";
  return out.str();
}

std::string confusion_csv(const Confusion& c, const std::vector<std::string>& names) {
  require(names.size() == c.size(), ErrorKind::kValidation, "one name per class required");
  std::ostringstream out;
  out << "truth";
  for (const auto& n : names) out << "," << n;
  out << "\n";
  for (std::size_t t = 0; t < c.size(); ++t) {
    out << names[t];
    for (long v : c[t]) out << "," << v;
    out << "\n";
  }
  return out.str();
}

Confusion confusion_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::kParse,
          "confusion CSV is empty");
  Confusion c;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    std::vector<long> values;
    while (std::getline(cells, cell, ',')) {
      try {
        values.push_back(std::stol(cell));
      } catch (const std::exception&) {
        fail(ErrorKind::kParse, "confusion CSV line " + std::to_string(row) +
                                    ": '" + cell + "' is not a count");
      }
    }
    c.push_back(std::move(values));
  }
  for (const auto& r : c)
    require(r.size() == c.size(), ErrorKind::kParse, "confusion CSV is not square");
  return c;
}

std::string confusion_svg(const Confusion& c, const std::vector<std::string>& names,
                          const std::string& title) {
  require(names.size() == c.size(), ErrorKind::kValidation, "one name per class required");
  const int cell = 56;
  const int left = 90;
  const int top = 70;
  const int n = static_cast<int>(c.size());
  const int width = left + n * cell + 20;
  const int height = top + n * cell + 40;
  long peak = 0;
  for (const auto& r : c)
    for (long v : r) peak = std::max(peak, v);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  out << "<text x=\"" << left << "\" y=\"" << top - 28 << "\">predicted</text>\n";
  for (int p = 0; p < n; ++p)
    out << "<text x=\"" << left + p * cell + cell / 2 << "\" y=\"" << top - 8
        << "\" text-anchor=\"middle\">" << names[static_cast<std::size_t>(p)] << "</text>\n";
  for (int t = 0; t < n; ++t) {
    out << "<text x=\"" << left - 6 << "\" y=\"" << top + t * cell + cell / 2 + 4
        << "\" text-anchor=\"end\">" << names[static_cast<std::size_t>(t)] << "</text>\n";
    for (int p = 0; p < n; ++p) {
      const long v = c[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
      const double f = peak == 0 ? 0.0 : static_cast<double>(v) / static_cast<double>(peak);
      const int r = static_cast<int>(std::lround(255 - f * (255 - 8)));
      const int g = static_cast<int>(std::lround(255 - f * (255 - 48)));
      const int b = static_cast<int>(std::lround(255 - f * (255 - 107)));
      char color[16];
      std::snprintf(color, sizeof(color), "#%02x%02x%02x", r, g, b);
      out << "<rect x=\"" << left + p * cell << "\" y=\"" << top + t * cell << "\" width=\""
          << cell << "\" height=\"" << cell << "\" fill=\"" << color
          << "\" stroke=\"#999\"/>\n";
      out << "<text x=\"" << left + p * cell + cell / 2 << "\" y=\""
          << top + t * cell + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
          << (f > 0.5 ? "white" : "black") << "\">" << v << "</text>\n";
    }
  }
  out << "<text x=\"8\" y=\"" << top + n * cell + 24 << "\">rows: truth</text>\n";
  out << "</svg>\n";
  return out.str();
}

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json j;
  j["mae"] = {{"mel", r.mae.mel}, {"pitch", r.mae.pitch}, {"energy", r.mae.energy},
              {"duration", r.mae.duration}};
  j["emotion_confusion"] = r.emotion;
  j["intensity_confusion"] = r.intensity;
  j["emotion_accuracy"] = r.emotion_accuracy;
  j["intensity_accuracy"] = r.intensity_accuracy;
  j["emotion_cosine_gap"] = r.emotion_cosine_gap;
  j["intensity_cosine_gap"] = r.intensity_cosine_gap;
  j["samples"] = r.samples;
  j["graph_counts_ok"] = r.graph_counts_ok;
  j["config"] = r.config;
  return j;
}

std::vector<SweepRow> context_sweep(const corpus::Corpus& train_set,
                                    const corpus::Corpus& test_set,
                                    const train::TrainConfig& base,
                                    const std::vector<int>& lengths,
                                    const StepHook& hook) {
  require(!lengths.empty(), ErrorKind::kConfig, "no context lengths requested");
  std::vector<SweepRow> rows;
  for (int len : lengths) {
    train::TrainConfig cfg = base;
    cfg.context_length = len;
    cfg.validate();
    train::Trainer trainer(cfg, train_set);
    SweepRow row;
    row.context_length = len;
    const std::string run = "length-" + std::to_string(len);
    trainer.run([&](const train::LossBreakdown& l) {
      row.final_losses = l;
      if (hook) hook(run, l);
    });
    row.report = evaluate(trainer.model(), test_set, len, cfg.threads);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "context_length,mae_m,mae_p,mae_e,mae_d,emotion_accuracy,intensity_accuracy,"
         "samples,final_total\n";
  for (const auto& r : rows)
    out << r.context_length << "," << fmt(r.report.mae.mel) << "," << fmt(r.report.mae.pitch)
        << "," << fmt(r.report.mae.energy) << "," << fmt(r.report.mae.duration) << ","
        << fmt(r.report.emotion_accuracy) << "," << fmt(r.report.intensity_accuracy) << ","
        << r.report.samples << "," << fmt(r.final_losses.total) << "\n";
  return out.str();
}

std::vector<model::Ablation> ablation_settings() {
  std::vector<model::Ablation> out(6);
  out[1].drop_emotion = true;
  out[2].drop_intensity = true;
  out[3].drop_speaker = true;
  out[4].drop_audio = true;
  out[5].cross_entropy = true;
  return out;
}

std::string ablation_label(const model::Ablation& a) {
  if (a == model::Ablation{}) return "full";
  if (a.cross_entropy && a.dropped_kinds().empty()) return "w/o contrastive";
  return "w/o " + a.name();
}

std::vector<AblationRow> ablation_suite(const corpus::Corpus& train_set,
                                        const corpus::Corpus& test_set,
                                        const train::TrainConfig& base,
                                        const StepHook& hook) {
  std::vector<AblationRow> rows;
  for (const auto& ab : ablation_settings()) {
    train::TrainConfig cfg = base;
    cfg.model.ablation = ab;
    cfg.validate();
    train::Trainer trainer(cfg, train_set);
    AblationRow row;
    row.ablation = ab;
    row.name = ablation_label(ab);
    trainer.run([&](const train::LossBreakdown& l) {
      row.final_losses = l;
      if (hook) hook(row.name, l);
    });
    row.report = evaluate(trainer.model(), test_set, cfg.context_length, cfg.threads);
    const auto g = ecg::build_ecg(10, trainer.model().schema());
    row.counts_at_10 = {g.node_count(), g.edge_count()};
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "ablation,mae_m,mae_p,mae_e,mae_d,emotion_accuracy,intensity_accuracy,"
         "emotion_cosine_gap,nodes_j10,edges_j10,graph_counts_ok,final_l_cl_emo,"
         "final_l_cl_int,final_total\n";
  for (const auto& r : rows)
    out << r.name << "," << fmt(r.report.mae.mel) << "," << fmt(r.report.mae.pitch) << ","
        << fmt(r.report.mae.energy) << "," << fmt(r.report.mae.duration) << ","
        << fmt(r.report.emotion_accuracy) << "," << fmt(r.report.intensity_accuracy) << ","
        << fmt(r.report.emotion_cosine_gap) << "," << r.counts_at_10.nodes << ","
        << r.counts_at_10.edges << "," << (r.report.graph_counts_ok ? "true" : "false")
        << "," << fmt(r.final_losses.l_cl_emo) << "," << fmt(r.final_losses.l_cl_int) << ","
        << fmt(r.final_losses.total) << "\n";
  return out.str();
}

RenderedPrediction predict(const model::Model& model, const corpus::ContextWindow& window) {
  ad::Tape tape(false);
  model::ForwardOptions opt;
  opt.teacher_durations = false;
  const auto out = model.forward(tape, window, opt);
  RenderedPrediction p;
  p.acoustics.mel = out.mel.value();
  p.acoustics.pitch = column_values(out.variance.pitch.value());
  p.acoustics.energy = column_values(out.variance.energy.value());
  p.acoustics.log_duration = column_values(out.variance.log_duration.value());
  p.durations = out.variance.durations;
  p.emotion = argmax(out.rendered.emotion.logits.value());
  p.intensity = argmax(out.rendered.intensity.logits.value());
  p.emotion_logits = column_values(out.rendered.emotion.logits.value());
  p.intensity_logits = column_values(out.rendered.intensity.logits.value());
  p.emotion_fallback = out.rendered.emotion.fallback;
  p.intensity_fallback = out.rendered.intensity.fallback;
  return p;
}

void write_mel(const std::filesystem::path& path, const ad::Mat& mel) {
  std::string buf;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  u32(static_cast<std::uint32_t>(mel.rows()));
  u32(static_cast<std::uint32_t>(mel.cols()));
  for (Eigen::Index i = 0; i < mel.size(); ++i)
    u32(std::bit_cast<std::uint32_t>(static_cast<float>(mel.data()[i])));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(out.good(), ErrorKind::kIo, "write to '" + path.string() + "' failed");
}

ad::Mat read_mel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open '" + path.string() + "'");
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[at + i])) << (8 * i);
    return v;
  };
  require(data.size() >= 8, ErrorKind::kIntegrity, "mel file is truncated");
  const std::uint32_t rows = u32(0), cols = u32(4);
  require(data.size() == 8 + 4ull * rows * cols, ErrorKind::kIntegrity,
          "mel file size does not match its header");
  ad::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = std::bit_cast<float>(u32(8 + 4 * static_cast<std::size_t>(i)));
  return m;
}

}  // namespace ecss::eval
