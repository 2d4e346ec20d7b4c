// Copyright 2026 The fmtasr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Training, evaluation and the distillation ablation on the toy task.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmtasr/beam_search.hpp"
#include "fmtasr/kd.hpp"
#include "fmtasr/metrics.hpp"
#include "fmtasr/mvq.hpp"
#include "fmtasr/mvq_io.hpp"
#include "fmtasr/toy_model.hpp"
#include "fmtasr/toy_task.hpp"

namespace fmtasr::harness {

struct TrainConfig {
  bool use_kd = false;
  double alpha = 0.1;
  int steps = 1000;
  double lr = 0.05;
  std::uint64_t seed = 1;
  int batch_size = 8;
  kd::KdOptions kd_options;
  ToyModelConfig model;
};

struct TraceRow {
  int step = 0;
  double rnnt_loss = 0.0;
  double kd_loss = 0.0;
  double fused_loss = 0.0;
};

struct TrainResult {
  ToyModel model;
  std::vector<TraceRow> trace;
  double seconds_per_step = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(int step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// Supplies precomputed codebook indexes; called at most once, and only when
// distillation is on.
using CiLoader = std::function<mvq::CiDataset()>;

// Per-utterance KD targets, checked against the dataset.
inline std::vector<std::vector<int>> KdTargets(const mvq::CiDataset& ci,
                                               const std::vector<ToyUtterance>& data,
                                               int n_codebooks) {
  if (ci.n_codebooks != n_codebooks) {
    throw std::invalid_argument("CI has " + std::to_string(ci.n_codebooks) +
                                " codebooks, model has " + std::to_string(n_codebooks) +
                                " LossNet heads");
  }
  if (ci.utterances.size() != data.size()) {
    throw std::invalid_argument("CI covers " + std::to_string(ci.utterances.size()) +
                                " utterances, dataset has " + std::to_string(data.size()));
  }
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (ci.utterances[i].frames != data[i].frames.rows()) {
      throw std::invalid_argument("CI frame count differs for utterance " +
                                  std::to_string(i));
    }
    out.push_back(kd::TargetsFromCodes(ci.utterances[i].indexes));
  }
  return out;
}

inline mvq::EmbeddingSet TeacherSet(const std::vector<ToyUtterance>& data) {
  mvq::EmbeddingSet set;
  for (const auto& u : data) set.push_back(u.teacher);
  return set;
}

inline Matrix StackRows(const mvq::EmbeddingSet& set) {
  std::size_t rows = 0;
  for (const auto& m : set) rows += m.rows();
  Matrix out(rows, set.empty() ? 0 : set.front().cols());
  std::size_t r = 0;
  for (const auto& m : set) {
    for (std::size_t t = 0; t < m.rows(); ++t, ++r) {
      std::copy(m.row(t).begin(), m.row(t).end(), out.row(r).begin());
    }
  }
  return out;
}

struct PreparedCi {
  mvq::CodebookSet codebooks;
  mvq::CiDataset ci;
};

// Trains codebooks on the teacher embeddings and encodes every utterance.
inline PreparedCi PrepareCi(const std::vector<ToyUtterance>& data, int n_codebooks,
                            int iters, std::uint64_t seed) {
  const auto set = TeacherSet(data);
  auto trained = mvq::TrainCodebooks(StackRows(set), n_codebooks, iters, seed);
  auto ci = mvq::EncodeDataset(trained.codebooks, set);
  return {std::move(trained.codebooks), std::move(ci)};
}

// One gradient-descent step per call on a minibatch drawn with a seeded
// sampler. The KD term is computed only when `targets` is non-null.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const std::vector<ToyUtterance>& data,
          const std::vector<std::vector<int>>* targets)
      : cfg_(cfg),
        data_(data),
        targets_(targets),
        model_(ToyModel::Random(cfg.model, cfg.seed)),
        sampler_(cfg.seed ^ 0x9e3779b97f4a7c15ULL),
        pick_(0, data.size() - 1) {
    if (data.empty()) throw std::invalid_argument("no training data");
    if (cfg.steps < 1 || cfg.batch_size < 1 || !(cfg.lr > 0.0)) {
      throw std::invalid_argument("steps, batch size and learning rate must be positive");
    }
    if (!(cfg.alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
    if (cfg.use_kd != (targets != nullptr)) {
      throw std::invalid_argument("KD targets must be given exactly when KD is on");
    }
  }

  TraceRow Step() {
    ++step_;
    const double weight = 1.0 / cfg_.batch_size;
    ToyModel grad(cfg_.model);
    TraceRow row{step_, 0.0, 0.0, 0.0};
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const std::size_t i = pick_(sampler_);
      const auto terms = AccumulateGradient(
          model_, data_[i].frames, data_[i].target,
          targets_ != nullptr ? &(*targets_)[i] : nullptr, cfg_.alpha, weight, grad,
          cfg_.kd_options);
      row.rnnt_loss += weight * terms.rnnt;
      row.kd_loss += weight * terms.kd;
      row.fused_loss += weight * terms.fused;
    }
    if (!std::isfinite(row.rnnt_loss) || !std::isfinite(row.kd_loss) ||
        !std::isfinite(row.fused_loss)) {
      throw TrainingError(step_, "loss diverged");
    }
    auto params = model_.Tensors();
    const auto grads = grad.Tensors();
    const std::size_t n = cfg_.use_kd ? params.size() : params.size() - kLossNetTensors;
    for (std::size_t k = 0; k < n; ++k) {
      auto p = params[k].data;
      const auto g = grads[k].data;
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= cfg_.lr * g[j];
    }
    return row;
  }

  const ToyModel& model() const { return model_; }
  ToyModel& model() { return model_; }

 private:
  TrainConfig cfg_;
  const std::vector<ToyUtterance>& data_;
  const std::vector<std::vector<int>>* targets_;
  ToyModel model_;
  std::mt19937_64 sampler_;
  std::uniform_int_distribution<std::size_t> pick_;
  int step_ = 0;
};

inline TrainResult Train(const TrainConfig& cfg, const std::vector<ToyUtterance>& data,
                         const CiLoader& load_ci = {}) {
  std::vector<std::vector<int>> targets;
  if (cfg.use_kd) {
    if (!load_ci) throw std::invalid_argument("distillation needs codebook indexes");
    targets = KdTargets(load_ci(), data, cfg.model.n_codebooks);
  }
  Trainer trainer(cfg, data, cfg.use_kd ? &targets : nullptr);
  TrainResult result;
  const auto start = std::chrono::steady_clock::now();
  for (int step = 1; step <= cfg.steps; ++step) result.trace.push_back(trainer.Step());
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  result.seconds_per_step = elapsed.count() / cfg.steps;
  result.model = std::move(trainer.model());
  return result;
}

struct StepTiming {
  double with_kd = 0.0;     // seconds per step
  double without_kd = 0.0;
  double overhead() const { return with_kd / without_kd - 1.0; }
};

// Steps a KD trainer and a plain trainer in lockstep on the same batches and
// reports the median wall-clock time of each, so that load spikes on a
// shared machine hit both modes alike.
inline StepTiming MeasureKdOverhead(const TrainConfig& cfg,
                                    const std::vector<ToyUtterance>& data,
                                    const std::vector<std::vector<int>>& targets,
                                    int pairs = 200) {
  TrainConfig with_cfg = cfg;
  with_cfg.use_kd = true;
  TrainConfig without_cfg = cfg;
  without_cfg.use_kd = false;
  Trainer with_kd(with_cfg, data, &targets);
  Trainer without_kd(without_cfg, data, nullptr);
  std::vector<double> a, b;
  using Clock = std::chrono::steady_clock;
  for (int i = 0; i < pairs; ++i) {
    const auto t0 = Clock::now();
    with_kd.Step();
    const auto t1 = Clock::now();
    without_kd.Step();
    const auto t2 = Clock::now();
    a.push_back(std::chrono::duration<double>(t1 - t0).count());
    b.push_back(std::chrono::duration<double>(t2 - t1).count());
  }
  auto median = [](std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  };
  return {median(a), median(b)};
}

// Mean loss terms over a dataset; `targets` may be empty when KD is off.
inline LossTerms DatasetLoss(const ToyModel& m, const std::vector<ToyUtterance>& data,
                             const std::vector<std::vector<int>>& targets, double alpha,
                             const kd::KdOptions& kd_opts = {}) {
  LossTerms mean;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto t = UtteranceLoss(m, data[i].frames, data[i].target,
                                 targets.empty() ? nullptr : &targets[i], alpha, kd_opts);
    mean.rnnt += t.rnnt / data.size();
    mean.kd += t.kd / data.size();
    mean.fused += t.fused / data.size();
  }
  return mean;
}

inline transducer::BeamSearchOptions EvalBeamOptions() {
  transducer::BeamSearchOptions opts;
  opts.beam = 4;
  opts.lm_weight = 0.0;
  return opts;
}

inline transducer::DecodeHypothesis DecodeFrames(
    const ToyModel& m, const Matrix& frames,
    const transducer::BeamSearchOptions& opts = EvalBeamOptions(),
    const lm::LmScorer* lm = nullptr) {
  const ModelScorer scorer(m, frames);
  return transducer::BeamSearch(scorer, lm, opts);
}

struct EvalResult {
  metrics::MetricsReport report;
  std::vector<std::string> hypotheses;
};

// Beam-search decode, detokenize and score against the references.
inline EvalResult Evaluate(const ToyModel& m, const TokenInventory& inv,
                           const std::vector<ToyUtterance>& data,
                           const transducer::BeamSearchOptions& opts = EvalBeamOptions()) {
  EvalResult out;
  std::vector<std::string> refs;
  for (const auto& u : data) {
    refs.push_back(u.text);
    out.hypotheses.push_back(Detokenize(inv, DecodeFrames(m, u.frames, opts).tokens));
  }
  const auto ref_t = metrics::PreprocessAll(refs);
  const auto hyp_t = metrics::PreprocessAll(out.hypotheses);
  out.report = metrics::ComputeReport(ref_t, hyp_t);
  return out;
}

struct AblationConfig {
  ToyTaskConfig task;
  int train_size = 2048;
  int test_size = 64;
  std::uint64_t data_seed = 1;
  int mvq_iters = 10;
  TrainConfig train;
};

struct AblationRow {
  std::string name;
  metrics::MetricsReport report;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double seconds_per_step = 0.0;
  std::vector<TraceRow> trace;

  double loss_ratio() const { return final_loss / initial_loss; }
};

struct AblationResult {
  std::vector<AblationRow> rows;  // "w/ KD", then "w/o KD"
  StepTiming timing;
};

// Trains the same configuration with and without distillation, scores both
// on a held-out set and times training steps of each.
inline AblationResult RunAblation(const AblationConfig& cfg) {
  const auto train = GenerateDataset(cfg.train_size, cfg.data_seed, cfg.task);
  const auto test = GenerateDataset(cfg.test_size, cfg.data_seed + 0x5151, cfg.task);
  const auto inv = ToyInventory(cfg.task);
  auto model_cfg = cfg.train.model;
  model_cfg.feature_dim = FeatureDim(cfg.task);
  model_cfg.vocab = inv.size();
  const auto prepared = PrepareCi(train, model_cfg.n_codebooks, cfg.mvq_iters, cfg.data_seed);

  AblationResult out;
  for (bool use_kd : {true, false}) {
    TrainConfig tc = cfg.train;
    tc.model = model_cfg;
    tc.use_kd = use_kd;
    const auto targets = use_kd ? KdTargets(prepared.ci, train, model_cfg.n_codebooks)
                                : std::vector<std::vector<int>>{};
    const double alpha = use_kd ? tc.alpha : 0.0;
    AblationRow row;
    row.name = use_kd ? "w/ KD" : "w/o KD";
    row.initial_loss =
        DatasetLoss(ToyModel::Random(model_cfg, tc.seed), train, targets, alpha, tc.kd_options)
            .fused;
    auto result = Train(tc, train, [&] { return prepared.ci; });
    row.final_loss = DatasetLoss(result.model, train, targets, alpha, tc.kd_options).fused;
    row.trace = std::move(result.trace);
    row.report = Evaluate(result.model, inv, test).report;
    out.rows.push_back(std::move(row));
  }
  TrainConfig tc = cfg.train;
  tc.model = model_cfg;
  out.timing = MeasureKdOverhead(tc, train, KdTargets(prepared.ci, train, model_cfg.n_codebooks));
  out.rows[0].seconds_per_step = out.timing.with_kd;
  out.rows[1].seconds_per_step = out.timing.without_kd;
  return out;
}

inline std::string FormatAblation(const std::vector<AblationRow>& rows) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  std::string out = "system\tPER\tWER\tWER PC\tsec/step\n";
  for (const auto& r : rows) {
    char sec[32];
    std::snprintf(sec, sizeof sec, "%.4f", r.seconds_per_step);
    out += r.name + "\t" + pct(r.report.per) + "\t" + pct(r.report.wer) + "\t" +
           pct(r.report.wer_pc) + "\t" + sec + "\n";
  }
  return out;
}

}  // namespace fmtasr::harness
