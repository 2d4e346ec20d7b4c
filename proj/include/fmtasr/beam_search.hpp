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

#pragma once

// Transducer beam search with optional shallow fusion.
//
// The search is frame-synchronous. Within a frame, hypotheses expand in
// rounds: every active hypothesis either emits blank (and waits for the
// next frame) or emits one label (and stays active). Hypotheses with the
// same label prefix and state are merged by adding their probabilities, so
// with unlimited beam the final score of a prefix is exactly its transducer
// log posterior. After each round the union of waiting and active
// hypotheses is pruned to the `beam` best by
//
//   acoustic log-prob + lm_weight * LM log-prob
//
// with ties going to the lexicographically smaller label sequence.

#include <algorithm>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fmtasr/common.hpp"
#include "fmtasr/lm.hpp"
#include "fmtasr/transducer.hpp"

namespace fmtasr::transducer {

// Output distribution over the blank-augmented vocabulary at frame t given
// the previously emitted labels.
class AcousticScorer {
 public:
  virtual ~AcousticScorer() = default;
  virtual int frames() const = 0;
  virtual int vocab() const = 0;
  virtual std::vector<double> LogProbs(int t, std::span<const int> prefix) const = 0;
};

struct DecodeHypothesis {
  LabelSequence tokens;
  double score = 0.0;      // acoustic + lm_weight * lm_score
  double acoustic = 0.0;
  double lm_score = 0.0;   // unweighted LM log-prob; 0 without fusion
};

struct BeamSearchOptions {
  int beam = 4;
  double lm_weight = 0.3;
  int max_symbols_per_frame = 3;
  int max_output_length = -1;  // negative: unbounded
};

// Lattice of `scorer` along a fixed label sequence.
inline Lattice LatticeFromScorer(const AcousticScorer& scorer,
                                 std::span<const int> y) {
  const int U = static_cast<int>(y.size());
  Lattice lat(scorer.frames(), U, scorer.vocab());
  for (int t = 0; t < scorer.frames(); ++t) {
    for (int u = 0; u <= U; ++u) {
      const auto lp = scorer.LogProbs(t, y.first(u));
      std::copy(lp.begin(), lp.end(), lat.cell(t, u).begin());
    }
  }
  return lat;
}

namespace detail {

struct Partial {
  double acoustic = kNegInf;
  double lm = 0.0;
};

using HypMap = std::map<LabelSequence, Partial>;

inline bool Better(double score_a, const LabelSequence& a, double score_b,
                   const LabelSequence& b) {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

inline void Merge(HypMap& into, const LabelSequence& y, double acoustic,
                  double lm) {
  auto [it, inserted] = into.try_emplace(y);
  it->second.acoustic = LogAddExp(it->second.acoustic, acoustic);
  it->second.lm = lm;
}

inline void CheckOptions(const AcousticScorer& scorer, const lm::LmScorer* lm,
                         const BeamSearchOptions& opts) {
  if (opts.beam < 1) throw TransducerError("beam must be >= 1");
  if (opts.lm_weight < 0.0) throw TransducerError("LM weight must be >= 0");
  if (opts.max_symbols_per_frame < 0) {
    throw TransducerError("max_symbols_per_frame must be >= 0");
  }
  if (scorer.frames() < 1) throw TransducerError("no frames to decode");
  if (lm != nullptr && lm->num_labels() != scorer.vocab() - 1) {
    throw TransducerError("LM label count does not match the acoustic vocabulary");
  }
}

}  // namespace detail

// The LM is consulted only when it is present and lm_weight > 0.
inline DecodeHypothesis BeamSearch(const AcousticScorer& scorer,
                                   const lm::LmScorer* lm,
                                   const BeamSearchOptions& opts) {
  detail::CheckOptions(scorer, lm, opts);
  const bool fuse = lm != nullptr && opts.lm_weight > 0.0;
  const int V = scorer.vocab();
  auto total = [&](const detail::Partial& p) {
    return fuse ? p.acoustic + opts.lm_weight * p.lm : p.acoustic;
  };

  // Keeps the `beam` best across both maps, dropping the rest in place.
  auto prune = [&](detail::HypMap& waiting, detail::HypMap& active) {
    struct Ref {
      double score;
      const LabelSequence* tokens;
      bool is_active;
    };
    std::vector<Ref> pool;
    for (const auto& [y, p] : waiting) pool.push_back({total(p), &y, false});
    for (const auto& [y, p] : active) pool.push_back({total(p), &y, true});
    if (static_cast<int>(pool.size()) <= opts.beam) return;
    std::sort(pool.begin(), pool.end(), [](const Ref& a, const Ref& b) {
      if (a.score != b.score) return a.score > b.score;
      if (*a.tokens != *b.tokens) return *a.tokens < *b.tokens;
      return !a.is_active && b.is_active;
    });
    detail::HypMap kept_waiting;
    detail::HypMap kept_active;
    for (int i = 0; i < opts.beam; ++i) {
      auto& src = pool[i].is_active ? active : waiting;
      auto& dst = pool[i].is_active ? kept_active : kept_waiting;
      dst.emplace(*pool[i].tokens, src.at(*pool[i].tokens));
    }
    waiting = std::move(kept_waiting);
    active = std::move(kept_active);
  };

  detail::HypMap frame_start;
  frame_start[{}] = {0.0, 0.0};
  for (int t = 0; t < scorer.frames(); ++t) {
    detail::HypMap waiting;
    detail::HypMap active = std::move(frame_start);
    for (int round = 0; !active.empty(); ++round) {
      const bool may_emit = round < opts.max_symbols_per_frame;
      detail::HypMap emitted;
      for (const auto& [y, p] : active) {
        const auto lp = scorer.LogProbs(t, y);
        detail::Merge(waiting, y, p.acoustic + lp[kBlank], p.lm);
        if (!may_emit) continue;
        if (opts.max_output_length >= 0 &&
            static_cast<int>(y.size()) >= opts.max_output_length) {
          continue;
        }
        std::vector<double> lm_lp;
        if (fuse && lm != nullptr) lm_lp = lm->LogProbs(y);
        LabelSequence next = y;
        next.push_back(0);
        for (int k = 1; k < V; ++k) {
          next.back() = k;
          detail::Merge(emitted, next, p.acoustic + lp[k],
                        fuse ? p.lm + lm_lp[k - 1] : 0.0);
        }
      }
      active = std::move(emitted);
      prune(waiting, active);
    }
    frame_start = std::move(waiting);
  }

  const LabelSequence* best = nullptr;
  double best_score = kNegInf;
  for (const auto& [y, p] : frame_start) {
    const double s = total(p);
    if (best == nullptr || detail::Better(s, y, best_score, *best)) {
      best = &y;
      best_score = s;
    }
  }
  const auto& p = frame_start.at(*best);
  return {*best, best_score, p.acoustic, fuse ? p.lm : 0.0};
}

// Argmax decoding: at every step take the single most likely symbol, lowest
// id on ties, with the same per-frame and length limits as BeamSearch.
inline DecodeHypothesis GreedySearch(const AcousticScorer& scorer,
                                     const lm::LmScorer* lm,
                                     const BeamSearchOptions& opts) {
  detail::CheckOptions(scorer, lm, opts);
  const bool fuse = lm != nullptr && opts.lm_weight > 0.0;
  DecodeHypothesis hyp;
  for (int t = 0; t < scorer.frames(); ++t) {
    for (int emitted = 0;; ++emitted) {
      const auto lp = scorer.LogProbs(t, hyp.tokens);
      const bool may_emit =
          emitted < opts.max_symbols_per_frame &&
          (opts.max_output_length < 0 ||
           static_cast<int>(hyp.tokens.size()) < opts.max_output_length);
      int best = kBlank;
      double best_score = lp[kBlank];
      std::vector<double> lm_lp;
      if (may_emit) {
        if (fuse) lm_lp = lm->LogProbs(hyp.tokens);
        for (int k = 1; k < scorer.vocab(); ++k) {
          const double s = fuse ? lp[k] + opts.lm_weight * lm_lp[k - 1] : lp[k];
          if (s > best_score) {
            best = k;
            best_score = s;
          }
        }
      }
      hyp.acoustic += lp[best];
      if (best == kBlank) break;
      if (fuse) hyp.lm_score += lm_lp[best - 1];
      hyp.tokens.push_back(best);
    }
  }
  hyp.score = fuse ? hyp.acoustic + opts.lm_weight * hyp.lm_score : hyp.acoustic;
  return hyp;
}

}  // namespace fmtasr::transducer
