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


// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
// when any criterion fails. Every check uses an oracle written here rather
// than the library's own helpers.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fmtasr/beam_search.hpp"
#include "fmtasr/harness.hpp"
#include "fmtasr/kd.hpp"
#include "fmtasr/lm.hpp"
#include "fmtasr/metrics.hpp"
#include "fmtasr/mvq.hpp"
#include "fmtasr/mvq_io.hpp"
#include "fmtasr/transducer.hpp"
#include "test_util.hpp"

namespace {

using namespace fmtasr;
using transducer::kBlank;
using transducer::LabelSequence;
using transducer::Lattice;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- 1

// Every alignment as a bit string of T + U moves (1 = label, 0 = blank)
// whose final move is a blank.
double EnumeratedPosterior(const Lattice& lat, const LabelSequence& y) {
  const int T = lat.frames();
  const int U = static_cast<int>(y.size());
  const int moves = T + U;
  std::vector<double> paths;
  for (std::uint32_t mask = 0; mask < (1u << moves); ++mask) {
    if (std::popcount(mask) != U || (mask >> (moves - 1)) & 1u) continue;
    int t = 0, u = 0;
    double lp = 0.0;
    for (int m = 0; m < moves; ++m) {
      if ((mask >> m) & 1u) {
        lp += lat.at(t, u, y[u]);
        ++u;
      } else {
        lp += lat.at(t, u, kBlank);
        ++t;
      }
    }
    paths.push_back(lp);
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double p : paths) mx = std::max(mx, p);
  double s = 0.0;
  for (double p : paths) s += std::exp(p - mx);
  return mx + std::log(s);
}

Outcome RnntOracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> tdist(1, 4), udist(0, 3), vdist(2, 5);
  double worst = 0.0;
  int cases = 0;
  for (; cases < 300; ++cases) {
    const int T = tdist(rng), U = udist(rng), V = vdist(rng);
    const auto lat = testing::RandomLattice(T, U, V, rng);
    const auto y = testing::RandomLabels(U, V, rng);
    const double fast = transducer::LogPosterior(lat, y);
    worst = std::max(worst, std::abs(fast - EnumeratedPosterior(lat, y)));
  }
  const double secs = Seconds(start);
  return {worst < 1e-9 && secs < 10.0,
          std::to_string(cases) + " lattices, max |diff| " + Fmt("%.2e", worst) + ", " +
              Fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 2

Outcome RnntGradient() {
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> tdist(1, 4), udist(0, 3), vdist(2, 5);
  double worst = 0.0;
  int cases = 0;
  for (; cases < 60; ++cases) {
    auto lat = testing::RandomLattice(tdist(rng), udist(rng), vdist(rng), rng);
    const auto y = testing::RandomLabels(lat.labels(), lat.vocab(), rng);
    const auto analytic = transducer::LossAndGradient(lat, y).grad;
    auto loss = [&] { return -transducer::LogPosterior(lat, y); };
    for (std::size_t i = 0; i < lat.values().size(); ++i) {
      const double numeric = testing::CentralDifference(loss, lat.values()[i], 1e-6);
      worst = std::max(worst, testing::RelativeError(analytic.values()[i], numeric));
    }
  }
  const double secs = Seconds(start);
  return {worst < 1e-5 && secs < 30.0,
          std::to_string(cases) + " cases, max rel err " + Fmt("%.2e", worst) + ", " +
              Fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 3

kd::KdBatch RandomKdBatch(std::size_t T, std::size_t N, std::size_t D, std::mt19937_64& rng) {
  kd::KdBatch b;
  b.student = Matrix(T, D);
  b.n_codebooks = N;
  std::normal_distribution<double> g;
  for (double& v : b.student.data()) v = g(rng);
  std::uniform_int_distribution<int> idx(0, 255);
  b.targets.resize(T * N);
  for (int& t : b.targets) t = idx(rng);
  return b;
}

Outcome KdIdentity() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> tdist(1, 10), ndist(1, 16);
  double worst = 0.0;
  bool certain_zero = true;
  for (int c = 0; c < 100; ++c) {
    const std::size_t T = tdist(rng), N = ndist(rng), D = 3;
    const auto batch = RandomKdBatch(T, N, D, rng);
    const kd::LossNetParams uniform(N, D);
    const double expect = static_cast<double>(T * N) * std::log(256.0);
    worst = std::max(worst, std::abs(kd::KdLoss(uniform, batch) - expect));

    // Same target for every frame, all other logits pushed to -1e4.
    auto fixed = batch;
    for (std::size_t t = 1; t < T; ++t) {
      for (std::size_t n = 0; n < N; ++n) fixed.targets[t * N + n] = fixed.targets[n];
    }
    kd::LossNetParams certain(N, D);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t v = 0; v < 256; ++v) certain.biases[n * 256 + v] = -1e4;
      certain.biases[n * 256 + fixed.targets[n]] = 0.0;
    }
    certain_zero = certain_zero && kd::KdLoss(certain, fixed) == 0.0;
  }
  return {worst < 1e-9 && certain_zero,
          "uniform max |diff| " + Fmt("%.2e", worst) +
              (certain_zero ? ", certain heads exactly 0" : ", certain heads not 0")};
}

// ---------------------------------------------------------------- 4

Outcome KdGradient() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    auto p = kd::LossNetParams::Random(3, 4, 0.3, rng);
    std::normal_distribution<double> g(0.0, 0.3);
    for (double& b : p.biases) b = g(rng);
    auto batch = RandomKdBatch(2, 3, 4, rng);
    const auto grad = kd::KdLossAndGradient(p, batch);
    auto loss = [&] { return kd::KdLoss(p, batch); };
    auto check = [&](double& x, double analytic) {
      const double numeric = testing::FivePointDifference(loss, x);
      worst = std::max(worst, testing::RelativeError(analytic, numeric));
    };
    for (std::size_t i = 0; i < p.weights.size(); i += 11) {
      check(p.weights.data()[i], grad.grad_weights.data()[i]);
    }
    for (std::size_t i = 0; i < p.biases.size(); i += 7) check(p.biases[i], grad.grad_biases[i]);
    for (std::size_t i = 0; i < batch.student.size(); ++i) {
      check(batch.student.data()[i], grad.grad_student.data()[i]);
    }
  }
  return {worst < 1e-5, "100 cases, max rel err " + Fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 5

// Stage by stage: scan all 256 entries, keep the first strictly smaller
// distance, subtract.
mvq::CodeTuple ExhaustiveEncode(const mvq::CodebookSet& cb, std::vector<double> r) {
  mvq::CodeTuple out;
  for (std::size_t n = 0; n < cb.n_codebooks(); ++n) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < 256; ++v) {
      const auto e = cb.entry(n, v);
      double d = 0.0;
      for (std::size_t j = 0; j < r.size(); ++j) d += (r[j] - e[j]) * (r[j] - e[j]);
      if (d < best_d) {
        best_d = d;
        best = v;
      }
    }
    const auto e = cb.entry(n, best);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= e[j];
    out.push_back(static_cast<std::uint8_t>(best));
  }
  return out;
}

Outcome MvqOracle() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> ndist(1, 4), ddist(1, 6), coin(0, 3);
  std::normal_distribution<double> g;
  int mismatches = 0, tie_cases = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t N = ndist(rng), D = ddist(rng);
    mvq::CodebookSet cb(N, D);
    // Small integer grids make exact distance ties common.
    const bool grid = coin(rng) == 0;
    std::uniform_int_distribution<int> cell(-2, 2);
    for (double& v : cb.values()) v = grid ? cell(rng) : g(rng);
    if (grid) {
      const std::size_t n = 0;
      for (std::size_t v = 200; v < 256; ++v) {
        const auto src = cb.entry(n, v - 200);
        std::copy(src.begin(), src.end(), cb.entry(n, v).begin());
      }
    }
    std::vector<double> e(D);
    for (double& v : e) v = grid ? cell(rng) : g(rng);
    tie_cases += grid;
    if (mvq::Encode(cb, e) != ExhaustiveEncode(cb, e)) ++mismatches;
  }
  return {mismatches == 0, "1000 cases (" + std::to_string(tie_cases) +
                               " with duplicated entries), " + std::to_string(mismatches) +
                               " mismatches"};
}

// ---------------------------------------------------------------- 6

Outcome Compression() {
  const double r = mvq::CompressionRate(512, 4, 16);
  return {r == 128.0, "compression_rate(512, 4, 16) = " + Fmt("%.17g", r)};
}

// ---------------------------------------------------------------- 7

Outcome LloydMonotone() {
  int violations = 0;
  double worst_step = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(700 + seed);
    std::normal_distribution<double> g;
    Matrix data(700, 5);
    for (double& v : data.data()) v = g(rng);
    const auto result = mvq::TrainCodebooks(data, 3, 10, seed);
    for (const auto& stage : result.stages) {
      for (std::size_t i = 1; i < stage.mse.size(); ++i) {
        const double step = stage.mse[i] - stage.mse[i - 1];
        worst_step = std::max(worst_step, step);
        if (step > 1e-12) ++violations;
      }
    }
  }
  return {violations == 0, "10 seeds x 3 stages x 10 iterations, largest MSE change " +
                               Fmt("%.3e", worst_step)};
}

// ---------------------------------------------------------------- 8

Outcome CiFiles() {
  using mvq::IoErrc;
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> byte(0, 255), frames(0, 12), count(0, 6), ndist(1, 16);
  std::ostringstream detail;
  bool ok = true;
  auto code_of = [](std::span<const std::uint8_t> b) -> int {
    try {
      mvq::ParseCi(b);
    } catch (const mvq::IoError& e) {
      return static_cast<int>(e.code());
    }
    return 0;
  };
  for (int c = 0; c < 50; ++c) {
    mvq::CiDataset ds;
    ds.n_codebooks = static_cast<std::uint8_t>(ndist(rng));
    std::size_t expected = 4 + 1 + 4;
    const int utts = count(rng);
    for (int i = 0; i < utts; ++i) {
      mvq::UtteranceCodes u;
      u.frames = static_cast<std::uint32_t>(frames(rng));
      for (std::size_t k = 0; k < u.frames * ds.n_codebooks; ++k) {
        u.indexes.push_back(static_cast<std::uint8_t>(byte(rng)));
      }
      expected += 4 + u.indexes.size();
      ds.utterances.push_back(std::move(u));
    }
    const auto bytes = mvq::SerializeCi(ds);
    ok = ok && bytes.size() == expected && mvq::ParseCi(bytes) == ds &&
         mvq::SerializeCi(mvq::ParseCi(bytes)) == bytes;
    // Every proper prefix fails with a truncation code.
    for (std::size_t len = 0; len < bytes.size(); ++len) {
      const int code = code_of(std::span(bytes).first(len));
      const bool header = len < 9;
      ok = ok && code == static_cast<int>(header ? IoErrc::kTruncatedHeader
                                                 : IoErrc::kTruncatedPayload);
    }
    auto magic = bytes;
    magic[1] = 'X';
    auto version = bytes;
    version[3] = '2';
    auto extra = bytes;
    extra.push_back(0);
    auto zero_n = bytes;
    zero_n[4] = 0;
    ok = ok && code_of(magic) == static_cast<int>(IoErrc::kBadMagic) &&
         code_of(version) == static_cast<int>(IoErrc::kVersionMismatch) &&
         code_of(extra) == static_cast<int>(IoErrc::kFrameCountMismatch) &&
         code_of(zero_n) == static_cast<int>(IoErrc::kCodebookCountMismatch);
  }
  // Codebook file: header 4 + 1 + 4 bytes, then N x 256 x D f64.
  mvq::CodebookSet cb(3, 5);
  std::normal_distribution<double> g;
  for (double& v : cb.values()) v = g(rng);
  const auto cb_bytes = mvq::SerializeCodebooks(cb);
  const auto back = mvq::ParseCodebooks(cb_bytes);
  const bool cb_ok = cb_bytes.size() == 9 + 3 * 256 * 5 * 8 &&
                     std::memcmp(back.values().data(), cb.values().data(),
                                 cb.values().size() * sizeof(double)) == 0;
  ok = ok && cb_ok;
  detail << "50 CI datasets: sizes, round trips, every truncation and 4 corruption codes; "
         << "codebook file " << (cb_ok ? "bit-exact" : "differs");
  return {ok, detail.str()};
}

// ---------------------------------------------------------------- 9

Outcome MetricFixtures() {
  using metrics::View;
  const auto refs = metrics::PreprocessAll(
      std::vector<std::string>{"Who is Humpty Dumpty? asked the Mice."});
  const auto hyps = metrics::PreprocessAll(
      std::vector<std::string>{"Who is Uncy Dumpty? asked the Mice."});
  const auto r = metrics::ComputeReport(refs, hyps);
  // Hand alignment: one substitution (Humpty/Uncy) over 7 words, 9 tokens
  // with marks, identical punctuation.
  const bool table5 = r.wer == 100.0 / 7.0 && r.wer_pc == 100.0 / 9.0 && r.per == 0.0;

  const std::vector<std::string> corpus{"Who is Humpty Dumpty? asked the Mice.",
                                        "Yes, no.", "Red cat, blue dog?"};
  const auto same = metrics::PreprocessAll(corpus);
  const auto id = metrics::ComputeReport(same, same);
  const bool identical = id.wer == 0.0 && id.wer_c == 0.0 && id.wer_pc == 0.0 &&
                         id.per == 0.0 && id.f1.punct && id.f1.punct->f1 == 1.0 &&
                         id.f1.capit && id.f1.capit->f1 == 1.0;

  // Pair 2 has a plain-WER error and wrong marks; it must not move the F1.
  const auto fr = metrics::PreprocessAll(std::vector<std::string>{"Yes, no.", "Red cat."});
  const auto fh = metrics::PreprocessAll(std::vector<std::string>{"Yes. no.", "red dog?"});
  const auto f1 = metrics::ComputeF1Suite(fr, fh);
  const auto f1_first = metrics::ComputeF1Suite(std::span(fr).first(1), std::span(fh).first(1));
  const bool filtered = f1.zero_wer_count == 1 && f1.total_count == 2 &&
                        f1.punct_counts.tp == f1_first.punct_counts.tp &&
                        f1.punct_counts.fp == f1_first.punct_counts.fp &&
                        f1.punct_counts.fn == f1_first.punct_counts.fn &&
                        f1.capit_counts.tp == f1_first.capit_counts.tp &&
                        f1.capit_counts.fn == f1_first.capit_counts.fn;
  return {table5 && identical && filtered,
          "Humpty Dumpty pair WER " + Fmt("%.4f", r.wer) + " WER PC " + Fmt("%.4f", r.wer_pc) +
              " PER " + Fmt("%.2f", r.per) + (identical ? "; identical corpus all zero, F1 1" : "; identical corpus FAILED") +
              (filtered ? "; non-zero-WER pair excluded" : "; filtering FAILED")};
}

// ---------------------------------------------------------------- 10

Outcome FusedObjective() {
  const harness::ToyTaskConfig task;
  const auto data = harness::GenerateDataset(96, 10, task);
  const auto prepared = harness::PrepareCi(data, 2, 4, 10);
  harness::TrainConfig tc;
  tc.model.feature_dim = harness::FeatureDim(task);
  tc.model.vocab = harness::ToyInventory(task).size();
  tc.model.hidden = 48;
  tc.model.joiner_dim = 24;
  tc.steps = 40;
  tc.alpha = 0.0;
  tc.use_kd = true;
  const auto with = harness::Train(tc, data, [&] { return prepared.ci; });
  tc.use_kd = false;
  const auto without = harness::Train(tc, data);
  bool same_trace = with.trace.size() == without.trace.size();
  for (std::size_t i = 0; same_trace && i < with.trace.size(); ++i) {
    same_trace = std::memcmp(&with.trace[i].fused_loss, &without.trace[i].fused_loss,
                             sizeof(double)) == 0;
  }
  const bool bitwise = harness::BitwiseEqual(with.model, without.model) && same_trace;

  bool linear = kd::FusedLoss(2.0, 5.0, 0.1) == 2.5 && kd::FusedLoss(3.25, 7.5, 0.0) == 3.25;
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int c = 0; c < 1000; ++c) {
    const double kdl = u(rng);
    linear = linear && kd::FusedLoss(0.0, kdl, 0.2) == 2.0 * kd::FusedLoss(0.0, kdl, 0.1);
    // d fused / d kd = alpha, exactly, on dyadic values.
    const double r = std::ldexp(std::floor(u(rng)), -3);
    const double k = std::ldexp(std::floor(u(rng)), -3);
    linear = linear && kd::FusedLoss(r, k + 1.0, 0.125) - kd::FusedLoss(r, k, 0.125) == 0.125;
  }
  return {bitwise && linear, std::string(bitwise ? "alpha = 0 trajectory bitwise equal to no-KD"
                                                 : "alpha = 0 trajectory DIFFERS") +
                                 (linear ? "; fused loss linear in alpha and kd" : "; linearity FAILED")};
}

// ---------------------------------------------------------------- 11

// Ratios of final to initial fused training loss realized by the default
// seed-pinned configuration; regressions beyond these fail.
constexpr double kPinnedRatioWithKd = 0.2126;
constexpr double kPinnedRatioWithoutKd = 0.0088;
constexpr double kRatioSlack = 0.005;

Outcome Ablation() {
  const auto start = Clock::now();
  const auto result = harness::RunAblation({});
  const double secs = Seconds(start);
  std::printf("%s", harness::FormatAblation(result.rows).c_str());
  const auto& kd_row = result.rows.at(0);
  const auto& plain_row = result.rows.at(1);
  const double overhead = result.timing.overhead();
  const bool converge = kd_row.loss_ratio() < 0.5 && plain_row.loss_ratio() < 0.5;
  const bool pinned = kd_row.loss_ratio() <= kPinnedRatioWithKd + kRatioSlack &&
                      plain_row.loss_ratio() <= kPinnedRatioWithoutKd + kRatioSlack;
  const bool shape = result.rows.size() == 2 && kd_row.name == "w/ KD" &&
                     plain_row.name == "w/o KD";
  return {converge && pinned && shape && overhead < 0.25 && secs < 300.0,
          "loss ratio w/ KD " + Fmt("%.4f", kd_row.loss_ratio()) + ", w/o KD " +
              Fmt("%.4f", plain_row.loss_ratio()) + ", KD overhead " +
              Fmt("%.1f", 100.0 * overhead) + "% per step, " + Fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------- 12

struct Exhaustive {
  LabelSequence tokens;
  double score = -std::numeric_limits<double>::infinity();
};

Exhaustive ExhaustiveDecode(const transducer::AcousticScorer& s, int max_len) {
  Exhaustive best;
  std::vector<LabelSequence> level{{}};
  for (int len = 0; len <= max_len; ++len) {
    std::vector<LabelSequence> next;
    for (const auto& y : level) {
      const double lp = transducer::LogPosterior(transducer::LatticeFromScorer(s, y), y);
      if (lp > best.score || (lp == best.score && y < best.tokens)) {
        best.score = lp;
        best.tokens = y;
      }
      for (int k = 1; k < s.vocab(); ++k) {
        next.push_back(y);
        next.back().push_back(k);
      }
    }
    level = std::move(next);
  }
  return best;
}

bool SameBits(const transducer::DecodeHypothesis& a, const transducer::DecodeHypothesis& b) {
  return a.tokens == b.tokens && std::memcmp(&a.score, &b.score, sizeof(double)) == 0 &&
         std::memcmp(&a.acoustic, &b.acoustic, sizeof(double)) == 0;
}

Outcome BeamSearch() {
  using transducer::BeamSearchOptions;
  int greedy_cases = 0, greedy_bad = 0;
  BeamSearchOptions one;
  one.beam = 1;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const testing::HashedScorer s(6, 6, seed, 1.5, 0.4);
    ++greedy_cases;
    const auto b = transducer::BeamSearch(s, nullptr, one);
    const auto g = transducer::GreedySearch(s, nullptr, one);
    greedy_bad += b.tokens != g.tokens || std::abs(b.score - g.score) > 1e-12;
  }
  const harness::ToyTaskConfig task;
  const auto utts = harness::GenerateDataset(20, 12, task);
  harness::ToyModelConfig mc;
  mc.feature_dim = harness::FeatureDim(task);
  mc.vocab = harness::ToyInventory(task).size();
  mc.hidden = 32;
  mc.joiner_dim = 16;
  lm::NgramLm lm(2, mc.vocab - 1, 0.5);
  for (const auto& u : utts) lm.Observe(u.target);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto model = harness::ToyModel::Random(mc, seed);
    for (const auto& u : utts) {
      const harness::ModelScorer s(model, u.frames);
      for (double lambda : {0.0, 0.5}) {
        auto opts = one;
        opts.lm_weight = lambda;
        ++greedy_cases;
        const auto b = transducer::BeamSearch(s, &lm, opts);
        const auto g = transducer::GreedySearch(s, &lm, opts);
        greedy_bad += b.tokens != g.tokens || std::abs(b.score - g.score) > 1e-12;
      }
    }
  }

  int exhaustive_bad = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const testing::HashedScorer s(4, 4, 900 + seed, 1.0, 0.8);
    const auto oracle = ExhaustiveDecode(s, 4);
    BeamSearchOptions opts;
    opts.beam = 1 << 20;
    opts.max_symbols_per_frame = 4;
    opts.max_output_length = 4;
    const auto hyp = transducer::BeamSearch(s, nullptr, opts);
    exhaustive_bad += hyp.tokens != oracle.tokens || std::abs(hyp.score - oracle.score) > 1e-9;
  }

  int lm_bad = 0;
  lm::NgramLm other(3, 5, 0.1);
  other.Observe(std::vector<int>{5, 5, 5, 1});
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const testing::HashedScorer s(5, 6, 1200 + seed, 1.2, 0.3);
    lm::NgramLm a(2, 5, 0.5);
    a.Observe(std::vector<int>{1, 2, 3, 4, 5, 1, 2});
    BeamSearchOptions opts;
    opts.beam = 4;
    opts.lm_weight = 0.0;
    const auto none = transducer::BeamSearch(s, nullptr, opts);
    lm_bad += !SameBits(none, transducer::BeamSearch(s, &a, opts)) ||
              !SameBits(none, transducer::BeamSearch(s, &other, opts));
  }
  return {greedy_bad == 0 && exhaustive_bad == 0 && lm_bad == 0,
          "beam 1 vs greedy " + std::to_string(greedy_cases - greedy_bad) + "/" +
              std::to_string(greedy_cases) + ", exhaustive " +
              std::to_string(40 - exhaustive_bad) + "/40, lambda 0 LM-independent " +
              std::to_string(100 - lm_bad) + "/100"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"RNN-T oracle equivalence", RnntOracle},
      {"RNN-T loss gradient check", RnntGradient},
      {"KD exact identities", KdIdentity},
      {"KD gradient check", KdGradient},
      {"MVQ encode oracle equivalence", MvqOracle},
      {"Compression arithmetic", Compression},
      {"Lloyd monotonicity", LloydMonotone},
      {"CI and codebook file round trip", CiFiles},
      {"Metrics fixtures", MetricFixtures},
      {"Fused objective", FusedObjective},
      {"Ablation shape", Ablation},
      {"Beam search", BeamSearch},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
