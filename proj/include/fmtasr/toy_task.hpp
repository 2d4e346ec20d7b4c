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


// Synthetic formatted-speech task. An utterance is one sentence of lowercase
// words with the first word capitalized, optional commas between words and a
// final period or question mark. Frames carry a noisy one-hot word signal,
// a pause channel and a prosody channel that rises over the last word of a
// question and falls over the last word of a statement. Teacher embeddings
// are a fixed smooth function of the clean signal only.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmtasr/common.hpp"
#include "fmtasr/transducer.hpp"

namespace fmtasr::harness {

using transducer::LabelSequence;
using transducer::TokenInventory;

struct ToyTaskConfig {
  std::vector<std::string> words = {"yes", "no", "red", "blue",
                                    "cat", "dog", "go", "stop"};
  int min_words = 2;
  int max_words = 4;
  double comma_prob = 0.3;
  double question_prob = 0.4;
  double noise = 0.2;
  int frames_per_word = 2;
  int teacher_dim = 12;
};

struct ToyUtterance {
  std::vector<std::string> tokens;  // formatted tokens, marks separate
  std::string text;                 // detokenized reference
  LabelSequence target;
  Matrix clean;                     // T x F before noise
  Matrix frames;                    // T x F
  Matrix teacher;                   // T x teacher_dim
  bool question = false;
};

inline constexpr int kPauseChannelOffset = 0;
inline constexpr int kProsodyChannelOffset = 1;
inline constexpr std::uint64_t kTeacherProjectionSeed = 0x7eac4e5u;

inline int FeatureDim(const ToyTaskConfig& cfg) {
  return static_cast<int>(cfg.words.size()) + 2;
}

inline std::string Capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

// Lowercase and capitalized form of every word, then ". , ?".
inline TokenInventory ToyInventory(const ToyTaskConfig& cfg) {
  std::vector<std::string> labels;
  for (const auto& w : cfg.words) {
    labels.push_back(w);
    labels.push_back(Capitalize(w));
  }
  labels.insert(labels.end(), {".", ",", "?"});
  return TokenInventory(labels);
}

inline bool IsMark(const std::string& s) { return s == "." || s == "," || s == "?"; }

// Marks attach to the preceding word.
inline std::string Detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& tok : tokens) {
    if (!out.empty() && !IsMark(tok)) out.push_back(' ');
    out += tok;
  }
  return out;
}

inline std::string Detokenize(const TokenInventory& inv, std::span<const int> labels) {
  std::vector<std::string> tokens;
  for (int id : labels) tokens.push_back(inv.symbol(id));
  return Detokenize(tokens);
}

// D_t x 3F projection shared by every dataset.
inline Matrix TeacherProjection(const ToyTaskConfig& cfg) {
  const int f = FeatureDim(cfg);
  Matrix p(cfg.teacher_dim, 3 * f);
  std::mt19937_64 rng(kTeacherProjectionSeed);
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(f)));
  for (double& v : p.data()) v = g(rng);
  return p;
}

// tanh(P [c_t; forward EMA; backward EMA]) of the clean signal.
inline Matrix TeacherEmbeddings(const Matrix& clean, const Matrix& projection) {
  const std::size_t T = clean.rows();
  const std::size_t F = clean.cols();
  constexpr double kDecay = 0.6;
  Matrix fwd(T, F), bwd(T, F);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < F; ++j) {
      const double prev = t > 0 ? fwd(t - 1, j) : 0.0;
      fwd(t, j) = kDecay * prev + (1.0 - kDecay) * clean(t, j);
    }
  }
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t j = 0; j < F; ++j) {
      const double next = t + 1 < T ? bwd(t + 1, j) : 0.0;
      bwd(t, j) = kDecay * next + (1.0 - kDecay) * clean(t, j);
    }
  }
  Matrix out(T, projection.rows());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < projection.rows(); ++d) {
      const auto p = projection.row(d);
      double acc = 0.0;
      for (std::size_t j = 0; j < F; ++j) {
        acc += p[j] * clean(t, j) + p[F + j] * fwd(t, j) + p[2 * F + j] * bwd(t, j);
      }
      out(t, d) = std::tanh(acc);
    }
  }
  return out;
}

// Renders `tokens` (one sentence in the format above) with noise from `rng`.
inline ToyUtterance RenderUtterance(const ToyTaskConfig& cfg, const TokenInventory& inv,
                                    const Matrix& projection,
                                    const std::vector<std::string>& tokens,
                                    std::mt19937_64& rng) {
  const int W = static_cast<int>(cfg.words.size());
  const int F = FeatureDim(cfg);
  ToyUtterance u;
  u.tokens = tokens;
  u.text = Detokenize(tokens);
  u.target = inv.Encode(tokens);
  u.question = !tokens.empty() && tokens.back() == "?";
  const double slope = u.question ? 1.0 : -1.0;

  std::size_t last_word = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!IsMark(tokens[i])) last_word = i;
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    if (IsMark(tok)) {
      std::vector<double> row(F, 0.0);
      row[W + kPauseChannelOffset] = 1.0;
      if (i + 1 == tokens.size()) row[W + kProsodyChannelOffset] = slope;
      rows.push_back(std::move(row));
      continue;
    }
    std::string lower = tok;
    if (!lower.empty() && lower[0] >= 'A' && lower[0] <= 'Z') {
      lower[0] = static_cast<char>(lower[0] - 'A' + 'a');
    }
    const auto it = std::find(cfg.words.begin(), cfg.words.end(), lower);
    if (it == cfg.words.end()) throw std::invalid_argument("unknown toy word '" + tok + "'");
    const int w = static_cast<int>(it - cfg.words.begin());
    for (int k = 0; k < cfg.frames_per_word; ++k) {
      std::vector<double> row(F, 0.0);
      row[w] = 1.0;
      if (i == last_word) {
        row[W + kProsodyChannelOffset] =
            slope * static_cast<double>(k + 1) / cfg.frames_per_word;
      }
      rows.push_back(std::move(row));
    }
  }
  u.clean = Matrix(rows.size(), F);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    std::copy(rows[t].begin(), rows[t].end(), u.clean.row(t).begin());
  }
  u.frames = u.clean;
  if (cfg.noise > 0.0) {
    std::normal_distribution<double> g(0.0, cfg.noise);
    for (double& v : u.frames.data()) v += g(rng);
  }
  u.teacher = TeacherEmbeddings(u.clean, projection);
  return u;
}

// Draws a random sentence: no word repeats its predecessor.
inline std::vector<std::string> SampleSentence(const ToyTaskConfig& cfg,
                                               std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(cfg.min_words, cfg.max_words);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(cfg.words.size()) - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const int n = len(rng);
  std::vector<std::string> tokens;
  int prev = -1;
  for (int i = 0; i < n; ++i) {
    int w = pick(rng);
    if (cfg.words.size() > 1) {
      while (w == prev) w = pick(rng);
    }
    prev = w;
    tokens.push_back(i == 0 ? Capitalize(cfg.words[w]) : cfg.words[w]);
    if (i + 1 < n && coin(rng) < cfg.comma_prob) tokens.push_back(",");
  }
  tokens.push_back(coin(rng) < cfg.question_prob ? "?" : ".");
  return tokens;
}

inline std::vector<ToyUtterance> GenerateDataset(int n, std::uint64_t seed,
                                                 const ToyTaskConfig& cfg = {}) {
  if (n < 1) throw std::invalid_argument("dataset size must be >= 1");
  if (cfg.words.empty() || cfg.min_words < 1 || cfg.max_words < cfg.min_words ||
      cfg.frames_per_word < 1 || cfg.teacher_dim < 1 || !(cfg.noise >= 0.0)) {
    throw std::invalid_argument("invalid toy task configuration");
  }
  const auto inv = ToyInventory(cfg);
  const auto projection = TeacherProjection(cfg);
  std::mt19937_64 rng(seed);
  std::vector<ToyUtterance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto tokens = SampleSentence(cfg, rng);
    out.push_back(RenderUtterance(cfg, inv, projection, tokens, rng));
  }
  return out;
}

}  // namespace fmtasr::harness
