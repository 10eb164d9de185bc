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

#include "train/train.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "util/error.hpp"
#include "util/rng.hpp"

namespace ecss::train {

void TrainConfig::validate() const {
  model.validate();
  require(batch_size >= 2, ErrorKind::kConfig,
          "batch_size must be >= 2 (the contrastive loss needs pairs)");
  require(context_length >= 1, ErrorKind::kConfig, "context_length must be >= 1");
  require(max_steps >= 0, ErrorKind::kConfig, "max_steps must be >= 0");
  require(learning_rate > 0.0, ErrorKind::kConfig, "learning_rate must be > 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
          ErrorKind::kConfig, "Adam betas must lie in [0, 1)");
  require(epsilon > 0.0, ErrorKind::kConfig, "epsilon must be > 0");
  require(warmup_steps >= 0, ErrorKind::kConfig, "warmup_steps must be >= 0");
  require(threads >= 1, ErrorKind::kConfig, "threads must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["model"] = model::to_json(c.model);
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["warmup_steps"] = c.warmup_steps;
  j["max_steps"] = c.max_steps;
  j["context_length"] = c.context_length;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.model = model::model_config_from_json(j.at("model"));
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.warmup_steps = j.at("warmup_steps").get<int>();
    c.max_steps = j.at("max_steps").get<int>();
    c.context_length = j.at("context_length").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.threads = j.at("threads").get<unsigned>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

LossBreakdown total_loss(double l_cl_emo, double l_cl_int, double l_mse_pro,
                         double l_fs2) {
  LossBreakdown l;
  l.l_cl_emo = l_cl_emo;
  l.l_cl_int = l_cl_int;
  l.l_mse_pro = l_mse_pro;
  l.l_fs2 = l_fs2;
  l.total = l_cl_emo + l_cl_int + l_mse_pro + l_fs2;
  return l;
}

AdamState AdamState::zeros(const ad::ParamStore& params) {
  AdamState s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ad::Mat& p = params.value(i);
    s.m.push_back(ad::Mat::Zero(p.rows(), p.cols()));
    s.v.push_back(ad::Mat::Zero(p.rows(), p.cols()));
  }
  return s;
}

void adam_step(ad::ParamStore& params, const ad::GradSet& grads, AdamState& state,
               const TrainConfig& config) {
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          ErrorKind::kRuntime, "Adam state does not match the parameter set");
  require(grads.size() <= params.size(), ErrorKind::kRuntime,
          "more gradients than parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  double lr = config.learning_rate;
  if (config.warmup_steps > 0)
    lr *= std::min(1.0, t / static_cast<double>(config.warmup_steps));
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Mat& p = params.value(i);
    ad::Mat& m = state.m[i];
    ad::Mat& v = state.v[i];
    const bool has = i < grads.size() && grads[i].size() > 0;
    if (has)
      require(grads[i].rows() == p.rows() && grads[i].cols() == p.cols(),
              ErrorKind::kRuntime, "gradient shape mismatch for '" + params.name(i) + "'");
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double g = has ? grads[i].data()[k] : 0.0;
      double& mk = m.data()[k];
      double& vk = v.data()[k];
      mk = config.beta1 * mk + (1.0 - config.beta1) * g;
      vk = config.beta2 * vk + (1.0 - config.beta2) * g * g;
      const double mhat = mk / c1;
      const double vhat = vk / c2;
      p.data()[k] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
}

std::vector<WindowRef> all_windows(const corpus::Corpus& corpus) {
  std::vector<WindowRef> out;
  for (std::size_t c = 0; c < corpus.size(); ++c)
    for (std::size_t t = 1; t < corpus[c].turns.size(); ++t)
      out.push_back({static_cast<int>(c), static_cast<int>(t)});
  return out;
}

std::vector<WindowRef> sample_batch(const corpus::Corpus& corpus, int batch_size,
                                    std::uint64_t seed, long step) {
  require(!corpus.empty(), ErrorKind::kValidation, "cannot sample from an empty corpus");
  Rng rng(derive_seed(seed, {0xBA7C4, static_cast<std::uint64_t>(step)}));
  const std::size_t n = corpus.size();
  std::vector<int> order;
  while (order.size() < static_cast<std::size_t>(batch_size)) {
    // Fisher-Yates over all conversations, repeated when the batch is larger.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(perm[i - 1], perm[j]);
    }
    order.insert(order.end(), perm.begin(), perm.end());
  }
  order.resize(static_cast<std::size_t>(batch_size));
  std::vector<WindowRef> out;
  for (int c : order) {
    const auto turns = static_cast<std::int64_t>(corpus[static_cast<std::size_t>(c)].turns.size());
    require(turns >= 2, ErrorKind::kValidation, "conversation with fewer than 2 turns");
    out.push_back({c, static_cast<int>(rng.uniform_int(1, turns - 1))});
  }
  return out;
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
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct SampleState {
  std::unique_ptr<ad::Tape> tape;
  corpus::ContextWindow window;
  model::SampleOutput out;
};

// Gradient of a batch-level loss with respect to each sample's feature row.
double batch_supcon(const std::vector<SampleState>& samples, bool emotion,
                    double tau, ad::Mat& grad) {
  const auto b = static_cast<Eigen::Index>(samples.size());
  const auto& first = emotion ? samples[0].out.rendered.emotion
                              : samples[0].out.rendered.intensity;
  ad::Mat feats(b, first.feature.cols());
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const auto& p = emotion ? s.out.rendered.emotion : s.out.rendered.intensity;
    feats.row(i) = p.feature.value();
    labels.push_back(emotion ? static_cast<int>(s.window.current->emotion)
                             : static_cast<int>(s.window.current->intensity));
  }
  ad::Tape tape(true);
  ad::Var f = tape.input(std::move(feats));
  ad::Var loss = model::supcon_loss(f, labels, tau);
  tape.backward(loss);
  grad = tape.has_grad(f.id()) ? tape.grad(f.id()) : ad::Mat::Zero(b, first.feature.cols());
  return loss.scalar();
}

}  // namespace

BatchResult compute_batch(const model::Model& model, const corpus::Corpus& corpus,
                          const std::vector<WindowRef>& batch,
                          const TrainConfig& config, long step) {
  require(!batch.empty(), ErrorKind::kValidation, "empty batch");
  const auto& ab = model.config().ablation;
  const std::size_t n = batch.size();
  const double inv_b = 1.0 / static_cast<double>(n);
  std::vector<SampleState> samples(n);

  parallel_for(n, config.threads, [&](std::size_t i) {
    SampleState& s = samples[i];
    const WindowRef& w = batch[i];
    s.window = corpus::slice_context(corpus[static_cast<std::size_t>(w.conversation)],
                                     w.index, config.context_length);
    s.tape = std::make_unique<ad::Tape>(true);
    model::ForwardOptions opt;
    opt.training = true;
    opt.dropout_seed = derive_seed(config.seed, {0xD50, static_cast<std::uint64_t>(step), i});
    opt.teacher_durations = true;
    s.out = model.forward(*s.tape, s.window, opt);
  });

  const bool emo_on = !samples[0].out.rendered.emotion.fallback;
  const bool int_on = !samples[0].out.rendered.intensity.fallback;
  ad::Mat g_emo, g_int;
  double l_emo = 0.0, l_int = 0.0;
  if (!ab.cross_entropy) {
    if (emo_on) l_emo = batch_supcon(samples, true, model.config().tau, g_emo);
    if (int_on) l_int = batch_supcon(samples, false, model.config().tau, g_int);
  }

  std::vector<ad::GradSet> grads(n);
  std::vector<std::array<double, 8>> parts(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    SampleState& s = samples[i];
    std::vector<ad::Var> terms;
    const auto& cur = *s.window.current;
    auto& p = parts[i];
    auto classify = [&](const model::PredictorOutput& o, int label, bool on,
                        const ad::Mat& g, double& ce_slot) {
      if (!on) return;
      ad::Var ce = ad::softmax_cross_entropy(o.logits, {label});
      ce_slot = ce.scalar();
      terms.push_back(ad::scale(ce, inv_b));
      if (!ab.cross_entropy)
        terms.push_back(ad::dot_const(o.feature, g.row(static_cast<Eigen::Index>(i))));
    };
    classify(s.out.rendered.emotion, static_cast<int>(cur.emotion), emo_on, g_emo, p[0]);
    classify(s.out.rendered.intensity, static_cast<int>(cur.intensity), int_on, g_int, p[1]);
    p[2] = s.out.prosody_loss.scalar();
    terms.push_back(ad::scale(s.out.prosody_loss, inv_b));
    const auto& fs2 = *s.out.fs2;
    p[3] = fs2.total.scalar();
    p[4] = fs2.mel.scalar();
    p[5] = fs2.pitch.scalar();
    p[6] = fs2.energy.scalar();
    p[7] = fs2.duration.scalar();
    terms.push_back(ad::scale(fs2.total, inv_b));
    ad::Var objective = ad::add_n(terms);
    s.tape->backward(objective);
    grads[i] = s.tape->param_grads(model.params().size());
    s.tape.reset();
  });

  BatchResult r;
  r.grads.assign(model.params().size(), ad::Mat());
  std::array<double, 8> mean{};
  for (std::size_t i = 0; i < n; ++i) {
    ad::accumulate(r.grads, grads[i]);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += parts[i][k] * inv_b;
    r.graph_counts.push_back(samples[i].out.graph_counts);
  }
  if (ab.cross_entropy) {
    l_emo = mean[0];
    l_int = mean[1];
  }
  r.losses = total_loss(l_emo, l_int, mean[2], mean[3]);
  r.losses.step = step;
  r.losses.fs2_mel = mean[4];
  r.losses.fs2_pitch = mean[5];
  r.losses.fs2_energy = mean[6];
  r.losses.fs2_duration = mean[7];
  r.losses.probe_emo = mean[0];
  r.losses.probe_int = mean[1];
  require(std::isfinite(r.losses.total), ErrorKind::kRuntime,
          "non-finite loss at step " + std::to_string(step));
  for (std::size_t i = 0; i < r.grads.size(); ++i)
    require(r.grads[i].size() == 0 || r.grads[i].allFinite(), ErrorKind::kRuntime,
            "non-finite gradient for parameter '" + model.params().name(i) +
                "' at step " + std::to_string(step));
  return r;
}

Trainer::Trainer(const TrainConfig& config, const corpus::Corpus& corpus)
    : config_(config), corpus_(corpus), model_(config.model, config.seed) {
  config_.validate();
  require(!corpus.empty(), ErrorKind::kValidation, "training corpus is empty");
  adam_ = AdamState::zeros(model_.params());
}

LossBreakdown Trainer::train_step() {
  const long step = adam_.step;
  const auto batch = sample_batch(corpus_, config_.batch_size, config_.seed, step);
  BatchResult r = compute_batch(model_, corpus_, batch, config_, step);
  adam_step(model_.params(), r.grads, adam_, config_);
  r.losses.step = adam_.step;
  return r.losses;
}

void Trainer::run(const std::function<void(const LossBreakdown&)>& on_step) {
  while (adam_.step < config_.max_steps) {
    const LossBreakdown l = train_step();
    if (on_step) on_step(l);
  }
}

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double d) { u64(std::bit_cast<std::uint64_t>(d)); }
  void bytes(std::string_view s) { buf_.append(s); }
  void tensor(const std::string& name, const ad::Mat& m) {
    u32(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    u32(2);
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    require(data_.size() - pos_ >= n, ErrorKind::kIntegrity, "checkpoint is truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config,
                     const model::Model& model, const AdamState& adam) {
  const ad::ParamStore& ps = model.params();
  require(adam.m.size() == ps.size() && adam.v.size() == ps.size(), ErrorKind::kRuntime,
          "Adam state does not match the parameter set");
  Writer w;
  w.bytes("ECSS");
  w.u32(kCheckpointVersion);
  TrainConfig echo = config;
  echo.model = model.config();
  const std::string js = to_json(echo).dump();
  w.u32(static_cast<std::uint32_t>(js.size()));
  w.bytes(js);
  w.u32(static_cast<std::uint32_t>(3 * ps.size() + 1));
  for (std::size_t i = 0; i < ps.size(); ++i) w.tensor("param/" + ps.name(i), ps.value(i));
  for (std::size_t i = 0; i < ps.size(); ++i) w.tensor("adam.m/" + ps.name(i), adam.m[i]);
  for (std::size_t i = 0; i < ps.size(); ++i) w.tensor("adam.v/" + ps.name(i), adam.v[i]);
  ad::Mat step(1, 1);
  step(0, 0) = static_cast<double>(adam.step);
  w.tensor("adam.step", step);
  w.u64(fnv1a64(w.buffer()));

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::kIo, "cannot write checkpoint '" + path.string() + "'");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    require(out.good(), ErrorKind::kIo, "write to '" + path.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

const ad::Mat* Checkpoint::find(std::string_view name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return &m;
  return nullptr;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open checkpoint '" + path.string() + "'");
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(data.size() >= 4 && data.compare(0, 4, "ECSS") == 0, ErrorKind::kIntegrity,
          "'" + path.string() + "' is not a checkpoint (bad magic)");
  require(data.size() >= 16, ErrorKind::kIntegrity, "checkpoint is truncated");
  const std::string_view body(data.data(), data.size() - 8);
  Reader tail(std::string_view(data).substr(data.size() - 8));
  require(tail.u64() == fnv1a64(body), ErrorKind::kIntegrity,
          "checkpoint '" + path.string() + "' is truncated or corrupt (checksum mismatch)");

  Reader r(body);
  r.bytes(4);
  Checkpoint c;
  c.version = r.u32();
  require(c.version == kCheckpointVersion, ErrorKind::kIntegrity,
          "checkpoint format version " + std::to_string(c.version) +
              " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  const std::string js = r.bytes(r.u32());
  try {
    c.config = train_config_from_json(nlohmann::json::parse(js));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kIntegrity, std::string("checkpoint config block: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    require(rank == 2, ErrorKind::kIntegrity, "tensor '" + name + "' has rank " + std::to_string(rank));
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    ad::Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    c.tensors.emplace_back(std::move(name), std::move(m));
  }
  require(r.remaining() == 0, ErrorKind::kIntegrity, "trailing bytes in checkpoint");
  return c;
}

void restore(const Checkpoint& ckpt, model::Model& model, AdamState* adam) {
  require(ckpt.config.model == model.config(), ErrorKind::kConfig,
          "checkpoint was written for a different model configuration (ablation '" +
              ckpt.config.model.ablation.name() + "', profile '" +
              ckpt.config.model.profile + "'); refusing to load it into ablation '" +
              model.config().ablation.name() + "', profile '" + model.config().profile + "'");
  ad::ParamStore& ps = model.params();
  // Validate everything before touching the model.
  std::vector<const ad::Mat*> p(ps.size()), m(ps.size()), v(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    p[i] = ckpt.find("param/" + ps.name(i));
    require(p[i] != nullptr, ErrorKind::kIntegrity, "checkpoint lacks parameter '" + ps.name(i) + "'");
    require(p[i]->rows() == ps.value(i).rows() && p[i]->cols() == ps.value(i).cols(),
            ErrorKind::kIntegrity, "shape mismatch for parameter '" + ps.name(i) + "'");
    if (adam != nullptr) {
      m[i] = ckpt.find("adam.m/" + ps.name(i));
      v[i] = ckpt.find("adam.v/" + ps.name(i));
      require(m[i] != nullptr && v[i] != nullptr, ErrorKind::kIntegrity,
              "checkpoint lacks Adam state for '" + ps.name(i) + "'");
    }
  }
  const ad::Mat* step = ckpt.find("adam.step");
  require(adam == nullptr || step != nullptr, ErrorKind::kIntegrity, "checkpoint lacks adam.step");
  for (std::size_t i = 0; i < ps.size(); ++i) ps.value(i) = *p[i];
  if (adam != nullptr) {
    *adam = AdamState::zeros(ps);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      adam->m[i] = *m[i];
      adam->v[i] = *v[i];
    }
    adam->step = static_cast<long>((*step)(0, 0));
  }
}

Trainer resume_trainer(const Checkpoint& ckpt, const TrainConfig& config,
                       const corpus::Corpus& corpus) {
  TrainConfig a = ckpt.config;
  TrainConfig b = config;
  a.max_steps = b.max_steps;
  a.threads = b.threads;
  require(to_json(a) == to_json(b), ErrorKind::kConfig,
          "resume configuration differs from the checkpoint's (only max_steps and "
          "threads may change)");
  Trainer t(config, corpus);
  restore(ckpt, t.model(), &t.adam());
  return t;
}

std::string metrics_header() { return "step,l_cl_emo,l_cl_int,l_mse_pro,l_fs2,total"; }

std::string metrics_row(const LossBreakdown& l) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g", l.step, l.l_cl_emo,
                l.l_cl_int, l.l_mse_pro, l.l_fs2, l.total);
  return buf;
}

}  // namespace ecss::train
