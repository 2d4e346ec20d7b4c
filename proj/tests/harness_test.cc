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


#include "fmtasr/harness.hpp"

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.hpp"

namespace fmtasr::harness {
namespace {

ToyModelConfig ConfigFor(const ToyTaskConfig& task) {
  ToyModelConfig c;
  c.feature_dim = FeatureDim(task);
  c.vocab = ToyInventory(task).size();
  return c;
}

ToyModelConfig TinyConfig(const ToyTaskConfig& task) {
  ToyModelConfig c = ConfigFor(task);
  c.context = 1;
  c.hidden = 5;
  c.tap_dim = 3;
  c.joiner_dim = 4;
  c.embed_dim = 3;
  c.n_codebooks = 2;
  return c;
}

std::vector<int> RandomTargets(std::size_t frames, int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 255);
  std::vector<int> out(frames * n);
  for (int& v : out) v = pick(rng);
  return out;
}

TEST(ToyTaskTest, InventoryHasCasedPairsAndMarks) {
  const ToyTaskConfig task;
  const auto inv = ToyInventory(task);
  EXPECT_EQ(inv.size(), 20);
  EXPECT_EQ(inv.symbol(0), "<b>");
  for (const auto& w : task.words) {
    EXPECT_NO_THROW(inv.id(w));
    EXPECT_NO_THROW(inv.id(Capitalize(w)));
  }
  for (const char* mark : {".", ",", "?"}) EXPECT_NO_THROW(inv.id(mark));
}

TEST(ToyTaskTest, DetokenizeAttachesMarks) {
  EXPECT_EQ(Detokenize({"Red", "cat", ",", "blue", "dog", "?"}), "Red cat, blue dog?");
  EXPECT_EQ(Detokenize(std::vector<std::string>{}), "");
}

TEST(ToyTaskTest, DeterministicGivenSeed) {
  const auto a = GenerateDataset(30, 7);
  const auto b = GenerateDataset(30, 7);
  const auto c = GenerateDataset(30, 8);
  ASSERT_EQ(a.size(), 30u);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_TRUE(a[i].frames == b[i].frames);
    EXPECT_TRUE(a[i].teacher == b[i].teacher);
    differs = differs || !(a[i].frames == c[i].frames);
  }
  EXPECT_TRUE(differs);
}

TEST(ToyTaskTest, UtterancesAreWellFormed) {
  const ToyTaskConfig task;
  const auto inv = ToyInventory(task);
  for (const auto& u : GenerateDataset(100, 3, task)) {
    ASSERT_FALSE(u.target.empty());
    EXPECT_EQ(u.target, inv.Encode(u.tokens));
    EXPECT_TRUE(AllFinite(u.frames.data()));
    EXPECT_EQ(u.frames.cols(), static_cast<std::size_t>(FeatureDim(task)));
    EXPECT_EQ(u.teacher.rows(), u.frames.rows());
    EXPECT_EQ(u.teacher.cols(), static_cast<std::size_t>(task.teacher_dim));
    EXPECT_TRUE(u.tokens.back() == "." || u.tokens.back() == "?");
    EXPECT_EQ(metrics::PreprocessAll(std::vector<std::string>{u.text})[0].normalized,
              textnorm::Preprocess(u.text).normalized);
  }
}

TEST(ToyTaskTest, QuestionsCarryRisingProsody) {
  const ToyTaskConfig task;
  const int prosody = static_cast<int>(task.words.size()) + kProsodyChannelOffset;
  int questions = 0, statements = 0;
  for (const auto& u : GenerateDataset(200, 11, task)) {
    const std::size_t T = u.clean.rows();
    const double last = u.clean(T - 1, prosody);
    if (u.question) {
      ++questions;
      EXPECT_EQ(last, 1.0);
    } else {
      ++statements;
      EXPECT_EQ(last, -1.0);
    }
    // Only the last word and the final pause carry prosody.
    const std::size_t tail = task.frames_per_word + 1;
    for (std::size_t t = 0; t + tail < T; ++t) EXPECT_EQ(u.clean(t, prosody), 0.0);
    for (std::size_t t = T - tail; t < T; ++t) {
      EXPECT_EQ(u.clean(t, prosody) > 0.0, u.question);
    }
  }
  EXPECT_GT(questions, 40);
  EXPECT_GT(statements, 40);
}

TEST(ToyTaskTest, TeacherDependsOnlyOnCleanSignal) {
  const ToyTaskConfig task;
  const auto inv = ToyInventory(task);
  const auto projection = TeacherProjection(task);
  const std::vector<std::string> tokens{"Blue", "dog", ",", "go", "?"};
  std::mt19937_64 r1(1), r2(2);
  const auto a = RenderUtterance(task, inv, projection, tokens, r1);
  const auto b = RenderUtterance(task, inv, projection, tokens, r2);
  EXPECT_FALSE(a.frames == b.frames);
  EXPECT_TRUE(a.teacher == b.teacher);
  EXPECT_TRUE(TeacherEmbeddings(a.clean, projection) == a.teacher);
}

TEST(ToyTaskTest, TeacherHasEnoughDistinctPointsForCodebooks) {
  std::set<std::vector<double>> distinct;
  for (const auto& u : GenerateDataset(300, 5)) {
    for (std::size_t t = 0; t < u.teacher.rows(); ++t) {
      distinct.emplace(u.teacher.row(t).begin(), u.teacher.row(t).end());
    }
  }
  EXPECT_GT(distinct.size(), 256u);
}

TEST(ToyTaskTest, InvalidArguments) {
  EXPECT_THROW(GenerateDataset(0, 1), std::invalid_argument);
  ToyTaskConfig bad;
  bad.max_words = 0;
  EXPECT_THROW(GenerateDataset(1, 1, bad), std::invalid_argument);
}

TEST(ToyModelTest, JoinerRowsAreNormalized) {
  const ToyTaskConfig task;
  const auto m = ToyModel::Random(ConfigFor(task), 3);
  const auto data = GenerateDataset(3, 4, task);
  for (const auto& u : data) {
    const ModelScorer scorer(m, u.frames);
    for (int t = 0; t < scorer.frames(); ++t) {
      for (const auto& prefix : {LabelSequence{}, LabelSequence{3}, LabelSequence{3, 19}}) {
        const auto lp = scorer.LogProbs(t, prefix);
        ASSERT_EQ(lp.size(), 20u);
        EXPECT_NEAR(LogSumExp(lp), 0.0, 1e-9);
      }
    }
    const auto lat = ModelLattice(m, Encode(m, u.frames), PredictorOutputs(m), u.target);
    EXPECT_TRUE(lat.IsNormalized(1e-9));
  }
}

TEST(ToyModelTest, UtteranceLossMatchesAccumulatedLoss) {
  const ToyTaskConfig task;
  const auto m = ToyModel::Random(ConfigFor(task), 5);
  const auto u = GenerateDataset(1, 6, task)[0];
  std::mt19937_64 rng(1);
  const auto targets = RandomTargets(u.frames.rows(), m.config.n_codebooks, rng);
  ToyModel grad(m.config);
  const auto acc = AccumulateGradient(m, u.frames, u.target, &targets, 0.1, 1.0, grad);
  const auto direct = UtteranceLoss(m, u.frames, u.target, &targets, 0.1);
  EXPECT_DOUBLE_EQ(acc.rnnt, direct.rnnt);
  EXPECT_DOUBLE_EQ(acc.kd, direct.kd);
  EXPECT_DOUBLE_EQ(acc.fused, acc.rnnt + 0.1 * acc.kd);
}

// Central differences over every parameter of a tiny model, with and
// without the distillation term.
TEST(ToyModelTest, EndToEndGradientMatchesFiniteDifferences) {
  const ToyTaskConfig task;
  const auto data = GenerateDataset(2, 9, task);
  std::mt19937_64 rng(12);
  for (bool use_kd : {false, true}) {
    for (const auto& u : data) {
      auto m = ToyModel::Random(TinyConfig(task), 21);
      // A nonzero LossNet so every KD path carries gradient.
      std::normal_distribution<double> g(0.0, 0.3);
      for (double& w : m.lossnet.weights.data()) w = g(rng);
      for (double& b : m.lossnet.biases) b = g(rng);
      const auto targets = RandomTargets(u.frames.rows(), m.config.n_codebooks, rng);
      const std::vector<int>* kd_targets = use_kd ? &targets : nullptr;
      const double alpha = 0.1;
      ToyModel grad(m.config);
      AccumulateGradient(m, u.frames, u.target, kd_targets, alpha, 1.0, grad);
      auto loss = [&] { return UtteranceLoss(m, u.frames, u.target, kd_targets, alpha).fused; };
      auto params = m.Tensors();
      const auto grads = grad.Tensors();
      double worst = 0.0;
      for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params[k].data.size(); ++i) {
          const double numeric = testing::FivePointDifference(loss, params[k].data[i], 1e-4);
          const double err = testing::RelativeError(grads[k].data[i], numeric, 1e-6);
          worst = std::max(worst, err);
          EXPECT_LT(err, 1e-4) << params[k].name << "[" << i << "] analytic "
                               << grads[k].data[i] << " numeric " << numeric;
        }
      }
      RecordProperty(use_kd ? "worst_rel_err_kd" : "worst_rel_err", std::to_string(worst));
    }
  }
}

TEST(ToyModelTest, WithoutKdLossNetGetsNoGradient) {
  const ToyTaskConfig task;
  const auto m = ToyModel::Random(TinyConfig(task), 2);
  const auto u = GenerateDataset(1, 2, task)[0];
  ToyModel grad(m.config);
  AccumulateGradient(m, u.frames, u.target, nullptr, 0.1, 1.0, grad);
  for (double v : grad.lossnet.weights.data()) EXPECT_EQ(v, 0.0);
  for (double v : grad.lossnet.biases) EXPECT_EQ(v, 0.0);
}

TEST(ToyModelTest, FileRoundTripIsBitExact) {
  const ToyTaskConfig task;
  auto m = ToyModel::Random(TinyConfig(task), 4);
  m.lossnet.biases[7] = -0.0;
  m.bo.data()[0] = 1e-308;
  const auto bytes = SerializeModel(m);
  const auto back = ParseModel(bytes);
  EXPECT_TRUE(BitwiseEqual(m, back));
  EXPECT_EQ(SerializeModel(back), bytes);

  std::size_t expected = 4 + 4 + 8 * 4 + 4;
  for (const auto& t : m.Tensors()) expected += 8 + 8 * t.data.size();
  EXPECT_EQ(bytes.size(), expected);
}

TEST(ToyModelTest, FileErrors) {
  using mvq::IoErrc;
  const ToyTaskConfig task;
  const auto bytes = SerializeModel(ToyModel::Random(TinyConfig(task), 4));
  auto code_of = [](std::vector<std::uint8_t> b) {
    try {
      ParseModel(b);
    } catch (const mvq::IoError& e) {
      return e.code();
    }
    return IoErrc::kIo;
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of(bad_magic), IoErrc::kBadMagic);
  auto version = bytes;
  version[4] = 9;
  EXPECT_EQ(code_of(version), IoErrc::kVersionMismatch);
  EXPECT_EQ(code_of({bytes.begin(), bytes.begin() + 20}), IoErrc::kTruncatedHeader);
  EXPECT_EQ(code_of({bytes.begin(), bytes.end() - 3}), IoErrc::kTruncatedPayload);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(code_of(trailing), IoErrc::kTrailingData);
  auto shape = bytes;
  shape[4 + 4 + 8 * 4 + 4 + 8 + 8 * 5 * 30] ^= 1;  // rows of the second tensor
  EXPECT_EQ(code_of(shape), IoErrc::kShapeMismatch);
}

TrainConfig SmallTrainConfig(const ToyTaskConfig& task) {
  TrainConfig tc;
  tc.model = ConfigFor(task);
  tc.model.hidden = 32;
  tc.model.joiner_dim = 16;
  tc.steps = 15;
  tc.batch_size = 4;
  return tc;
}

TEST(TrainTest, BitwiseDeterministic) {
  const ToyTaskConfig task;
  const auto data = GenerateDataset(64, 1, task);
  const auto prepared = PrepareCi(data, 2, 4, 1);
  auto tc = SmallTrainConfig(task);
  tc.use_kd = true;
  const auto a = Train(tc, data, [&] { return prepared.ci; });
  const auto b = Train(tc, data, [&] { return prepared.ci; });
  EXPECT_TRUE(BitwiseEqual(a.model, b.model));
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].fused_loss, b.trace[i].fused_loss);
  }
}

TEST(TrainTest, ZeroAlphaMatchesNoKdTrajectory) {
  const ToyTaskConfig task;
  const auto data = GenerateDataset(64, 2, task);
  const auto prepared = PrepareCi(data, 2, 4, 1);
  auto tc = SmallTrainConfig(task);
  tc.alpha = 0.0;
  tc.use_kd = true;
  const auto with = Train(tc, data, [&] { return prepared.ci; });
  tc.use_kd = false;
  const auto without = Train(tc, data);
  EXPECT_TRUE(BitwiseEqual(with.model, without.model));
  for (std::size_t i = 0; i < with.trace.size(); ++i) {
    EXPECT_EQ(with.trace[i].rnnt_loss, without.trace[i].rnnt_loss);
    EXPECT_EQ(with.trace[i].fused_loss, without.trace[i].fused_loss);
    EXPECT_GT(with.trace[i].kd_loss, 0.0);
    EXPECT_EQ(without.trace[i].kd_loss, 0.0);
  }
}

TEST(TrainTest, KdOffNeverReadsCodebookIndexes) {
  const ToyTaskConfig task;
  const auto data = GenerateDataset(16, 3, task);
  auto tc = SmallTrainConfig(task);
  int calls = 0;
  const auto r = Train(tc, data, [&]() -> mvq::CiDataset {
    ++calls;
    throw std::runtime_error("CI read with KD off");
  });
  EXPECT_EQ(calls, 0);
  EXPECT_EQ(r.trace.size(), static_cast<std::size_t>(tc.steps));
}

TEST(TrainTest, KdOnNeedsMatchingIndexes) {
  const ToyTaskConfig task;
  const auto data = GenerateDataset(64, 3, task);
  auto tc = SmallTrainConfig(task);
  tc.use_kd = true;
  EXPECT_THROW(Train(tc, data), std::invalid_argument);
  auto ci = PrepareCi(GenerateDataset(64, 4, task), 2, 2, 1).ci;
  EXPECT_THROW(Train(tc, data, [&] { return ci; }), std::invalid_argument);
  tc.model.n_codebooks = 3;
  const auto own = PrepareCi(data, 2, 2, 1).ci;
  EXPECT_THROW(Train(tc, data, [&] { return own; }), std::invalid_argument);
}

TEST(TrainTest, DivergenceReportsStep) {
  const ToyTaskConfig task;
  auto data = GenerateDataset(4, 3, task);
  for (auto& u : data) u.frames(0, 0) = std::nan("");
  auto tc = SmallTrainConfig(task);
  try {
    Train(tc, data);
    FAIL() << "expected a training error";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.step(), 1);
  }
}

TEST(TrainTest, TraceIsFiniteAndLossFalls) {
  const ToyTaskConfig task;
  const auto data = GenerateDataset(256, 5, task);
  const auto prepared = PrepareCi(data, 2, 4, 1);
  auto tc = SmallTrainConfig(task);
  tc.steps = 150;
  tc.use_kd = true;
  const auto r = Train(tc, data, [&] { return prepared.ci; });
  for (const auto& row : r.trace) {
    EXPECT_TRUE(std::isfinite(row.rnnt_loss));
    EXPECT_TRUE(std::isfinite(row.kd_loss));
    EXPECT_DOUBLE_EQ(row.fused_loss, row.rnnt_loss + tc.alpha * row.kd_loss);
  }
  const auto targets = KdTargets(prepared.ci, data, tc.model.n_codebooks);
  const double before =
      DatasetLoss(ToyModel::Random(tc.model, tc.seed), data, targets, tc.alpha).fused;
  const double after = DatasetLoss(r.model, data, targets, tc.alpha).fused;
  EXPECT_LT(after, before);
}

TEST(EvaluateTest, UntrainedModelIsNearChance) {
  const ToyTaskConfig task;
  const auto inv = ToyInventory(task);
  const auto data = GenerateDataset(30, 8, task);
  const auto m = ToyModel::Random(ConfigFor(task), 1);
  const auto r = Evaluate(m, inv, data).report;
  EXPECT_GE(r.wer_pc, 90.0);
}

TEST(EvaluateTest, TwoTokenNoiselessTaskIsSolved) {
  ToyTaskConfig task;
  task.words = {"yes", "no"};
  task.min_words = 1;
  task.max_words = 1;
  task.noise = 0.0;
  task.question_prob = 0.5;
  const auto inv = ToyInventory(task);
  const auto data = GenerateDataset(64, 2, task);
  for (const auto& u : data) ASSERT_EQ(u.target.size(), 2u);
  TrainConfig tc;
  tc.model = ConfigFor(task);
  tc.model.hidden = 32;
  tc.model.joiner_dim = 16;
  tc.steps = 300;
  const auto r = Train(tc, data);
  const auto eval = Evaluate(r.model, inv, data);
  EXPECT_EQ(eval.report.wer_pc, 0.0);
  EXPECT_EQ(eval.report.per, 0.0);
  ASSERT_TRUE(eval.report.f1.punct.has_value());
  EXPECT_EQ(eval.report.f1.punct->f1, 1.0);
}

TEST(EvaluateTest, ReportSatisfiesMetricInvariants) {
  const ToyTaskConfig task;
  const auto inv = ToyInventory(task);
  const auto data = GenerateDataset(128, 4, task);
  auto tc = SmallTrainConfig(task);
  tc.steps = 100;
  const auto m = Train(tc, data).model;
  const auto r = Evaluate(m, inv, GenerateDataset(30, 40, task)).report;
  EXPECT_GE(r.wer_c, r.wer);
  EXPECT_GE(r.wer, 0.0);
  EXPECT_GE(r.per, 0.0);
  EXPECT_GE(r.zero_wer_fraction(), 0.0);
  EXPECT_LE(r.zero_wer_fraction(), 1.0);
  for (const auto& prf : {r.f1.punct, r.f1.capit}) {
    if (!prf) continue;
    for (double v : {prf->precision, prf->recall, prf->f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(AblationTest, TableHasTwoRowsWithMetricColumns) {
  AblationRow a, b;
  a.name = "w/ KD";
  b.name = "w/o KD";
  a.report.per = 1.5;
  const auto text = FormatAblation({a, b});
  EXPECT_EQ(text.rfind("system\tPER\tWER\tWER PC\tsec/step\n", 0), 0u);
  EXPECT_NE(text.find("w/ KD\t1.50\t"), std::string::npos);
  EXPECT_NE(text.find("w/o KD\t0.00\t"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

}  // namespace
}  // namespace fmtasr::harness
