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

// Word-error-rate family and punctuation/capitalization F1 over corpora of
// (reference, hypothesis) transcripts.
//
// All rates are corpus-level: the summed edit cost divided by the summed
// reference token count, as a percentage.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmtasr/textnorm.hpp"

namespace fmtasr::metrics {

using textnorm::TokenSequence;
using textnorm::Transcript;
using textnorm::View;

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EditOp { kMatch, kSub, kIns, kDel };

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

struct EditStep {
  EditOp op;
  std::size_t ref_index;  // kNoIndex for insertions
  std::size_t hyp_index;  // kNoIndex for deletions
};

struct EditAlignment {
  std::vector<EditStep> steps;
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;

  std::size_t cost() const { return substitutions + insertions + deletions; }
};

// Levenshtein alignment. The backtrace starts at the end of both sequences
// and prefers MATCH, then SUB, then DEL, then INS among optimal moves.
template <typename T>
EditAlignment Align(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t w = m + 1;
  std::vector<std::size_t> d((n + 1) * w);
  for (std::size_t i = 0; i <= n; ++i) d[i * w] = i;
  for (std::size_t j = 0; j <= m; ++j) d[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = d[(i - 1) * w + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const std::size_t del = d[(i - 1) * w + j] + 1;
      const std::size_t ins = d[i * w + j - 1] + 1;
      d[i * w + j] = std::min({diag, del, ins});
    }
  }

  EditAlignment out;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const std::size_t here = d[i * w + j];
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] &&
        d[(i - 1) * w + j - 1] == here) {
      out.steps.push_back({EditOp::kMatch, i - 1, j - 1});
      --i;
      --j;
    } else if (i > 0 && j > 0 && !(ref[i - 1] == hyp[j - 1]) &&
               d[(i - 1) * w + j - 1] + 1 == here) {
      out.steps.push_back({EditOp::kSub, i - 1, j - 1});
      ++out.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[(i - 1) * w + j] + 1 == here) {
      out.steps.push_back({EditOp::kDel, i - 1, kNoIndex});
      ++out.deletions;
      --i;
    } else {
      out.steps.push_back({EditOp::kIns, kNoIndex, j - 1});
      ++out.insertions;
      --j;
    }
  }
  std::reverse(out.steps.begin(), out.steps.end());
  return out;
}

inline EditAlignment Align(const TokenSequence& ref, const TokenSequence& hyp) {
  if (ref.view != hyp.view) {
    throw MetricsError("cannot align token sequences of different views");
  }
  return Align<std::string>(ref.tokens, hyp.tokens);
}

// Edit errors and reference length accumulated over a corpus.
struct ErrorCounts {
  std::size_t errors = 0;
  std::size_t ref_tokens = 0;

  // Percentage. A corpus with no reference tokens has rate 0 when there are
  // no errors and +inf otherwise.
  double rate() const {
    if (ref_tokens == 0) {
      return errors == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return 100.0 * static_cast<double>(errors) /
           static_cast<double>(ref_tokens);
  }
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// True/false positive counts. A ratio with an empty denominator is 1 when
// the opposite error count is also zero (nothing to find and nothing
// spuriously found) and 0 otherwise.
struct PrfCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const {
    if (tp + fp == 0) return fn == 0 ? 1.0 : 0.0;
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  double recall() const {
    if (tp + fn == 0) return fp == 0 ? 1.0 : 0.0;
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  Prf prf() const {
    Prf out{precision(), recall(), 0.0};
    if (out.precision + out.recall > 0.0) {
      out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    }
    return out;
  }
};

struct F1Suite {
  std::size_t zero_wer_count = 0;
  std::size_t total_count = 0;
  PrfCounts punct_counts;
  PrfCounts capit_counts;
  std::optional<Prf> punct;  // absent when no sample has zero plain WER
  std::optional<Prf> capit;
};

struct MetricsReport {
  double wer = 0.0;
  double wer_c = 0.0;
  double wer_pc = 0.0;
  double per = 0.0;
  ErrorCounts plain_counts;
  ErrorCounts cased_counts;
  ErrorCounts cased_punct_counts;
  ErrorCounts punct_counts;
  F1Suite f1;

  double zero_wer_fraction() const {
    return f1.total_count == 0 ? 0.0
                               : static_cast<double>(f1.zero_wer_count) /
                                     static_cast<double>(f1.total_count);
  }
};

namespace detail {

inline void CheckCorpus(std::span<const Transcript> refs,
                        std::span<const Transcript> hyps) {
  if (refs.empty()) throw MetricsError("empty corpus");
  if (refs.size() != hyps.size()) {
    throw MetricsError("reference and hypothesis counts differ: " +
                       std::to_string(refs.size()) + " vs " +
                       std::to_string(hyps.size()));
  }
}

inline std::vector<std::string> PunctuationOnly(const Transcript& t) {
  std::vector<std::string> out;
  for (auto& tok : textnorm::Tokenize(t, View::kCasedPunct).tokens) {
    if (textnorm::IsPunctuationToken(tok)) out.push_back(std::move(tok));
  }
  return out;
}

// Marks between words: slot 0 precedes the first word and slot k follows
// word k-1. Several marks in one slot are kept together as one label.
inline std::vector<std::string> PunctuationSlots(const TokenSequence& seq) {
  std::vector<std::string> slots(1);
  for (const auto& tok : seq.tokens) {
    if (textnorm::IsPunctuationToken(tok)) {
      if (!slots.back().empty()) slots.back().push_back(' ');
      slots.back() += tok;
    } else {
      slots.emplace_back();
    }
  }
  return slots;
}

inline bool IsCapitalized(const std::string& word) {
  return textnorm::Lowercase(word) != word;
}

}  // namespace detail

inline ErrorCounts CountErrors(std::span<const Transcript> refs,
                               std::span<const Transcript> hyps, View view) {
  detail::CheckCorpus(refs, hyps);
  ErrorCounts c;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto r = textnorm::Tokenize(refs[i], view);
    const auto h = textnorm::Tokenize(hyps[i], view);
    c.errors += Align(r, h).cost();
    c.ref_tokens += r.tokens.size();
  }
  return c;
}

// WER for `view`: kPlain gives WER, kCased WER C, kCasedPunct WER PC.
inline double Wer(std::span<const Transcript> refs,
                  std::span<const Transcript> hyps, View view) {
  return CountErrors(refs, hyps, view).rate();
}

inline ErrorCounts CountPunctuationErrors(std::span<const Transcript> refs,
                                          std::span<const Transcript> hyps) {
  detail::CheckCorpus(refs, hyps);
  ErrorCounts c;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto r = detail::PunctuationOnly(refs[i]);
    const auto h = detail::PunctuationOnly(hyps[i]);
    c.errors += Align<std::string>(r, h).cost();
    c.ref_tokens += r.size();
  }
  return c;
}

// Punctuation error rate: edit distance over the mark-only subsequences.
inline double Per(std::span<const Transcript> refs,
                  std::span<const Transcript> hyps) {
  const auto c = CountPunctuationErrors(refs, hyps);
  if (c.ref_tokens == 0) {
    throw MetricsError("PER is undefined: references contain no punctuation");
  }
  return c.rate();
}

// Punctuation and capitalization F1 restricted to pairs whose plain-view
// word sequences are identical.
inline F1Suite ComputeF1Suite(std::span<const Transcript> refs,
                              std::span<const Transcript> hyps) {
  detail::CheckCorpus(refs, hyps);
  F1Suite out;
  out.total_count = refs.size();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (textnorm::Tokenize(refs[i], View::kPlain) !=
        textnorm::Tokenize(hyps[i], View::kPlain)) {
      continue;
    }
    ++out.zero_wer_count;

    const auto ref_pc = textnorm::Tokenize(refs[i], View::kCasedPunct);
    const auto hyp_pc = textnorm::Tokenize(hyps[i], View::kCasedPunct);
    const auto ref_slots = detail::PunctuationSlots(ref_pc);
    const auto hyp_slots = detail::PunctuationSlots(hyp_pc);
    for (std::size_t s = 0; s < ref_slots.size(); ++s) {
      const auto& r = ref_slots[s];
      const auto& h = hyp_slots[s];
      if (!h.empty() && h == r) {
        ++out.punct_counts.tp;
        continue;
      }
      if (!h.empty()) ++out.punct_counts.fp;
      if (!r.empty()) ++out.punct_counts.fn;
    }

    const auto ref_c = textnorm::Tokenize(refs[i], View::kCased).tokens;
    const auto hyp_c = textnorm::Tokenize(hyps[i], View::kCased).tokens;
    for (std::size_t k = 0; k < ref_c.size(); ++k) {
      const bool ref_pos = detail::IsCapitalized(ref_c[k]);
      const bool hyp_pos = detail::IsCapitalized(hyp_c[k]);
      if (ref_pos && hyp_c[k] == ref_c[k]) {
        ++out.capit_counts.tp;
        continue;
      }
      if (hyp_pos) ++out.capit_counts.fp;
      if (ref_pos) ++out.capit_counts.fn;
    }
  }
  if (out.zero_wer_count > 0) {
    out.punct = out.punct_counts.prf();
    out.capit = out.capit_counts.prf();
  }
  return out;
}

inline MetricsReport ComputeReport(std::span<const Transcript> refs,
                                   std::span<const Transcript> hyps) {
  MetricsReport r;
  r.plain_counts = CountErrors(refs, hyps, View::kPlain);
  r.cased_counts = CountErrors(refs, hyps, View::kCased);
  r.cased_punct_counts = CountErrors(refs, hyps, View::kCasedPunct);
  r.punct_counts = CountPunctuationErrors(refs, hyps);
  if (r.punct_counts.ref_tokens == 0) {
    throw MetricsError("PER is undefined: references contain no punctuation");
  }
  r.wer = r.plain_counts.rate();
  r.wer_c = r.cased_counts.rate();
  r.wer_pc = r.cased_punct_counts.rate();
  r.per = r.punct_counts.rate();
  r.f1 = ComputeF1Suite(refs, hyps);
  return r;
}

// Convenience for raw strings; each side is normalized first.
inline std::vector<Transcript> PreprocessAll(std::span<const std::string> raw) {
  std::vector<Transcript> out;
  out.reserve(raw.size());
  for (const auto& s : raw) out.push_back(textnorm::Preprocess(s));
  return out;
}

}  // namespace fmtasr::metrics
