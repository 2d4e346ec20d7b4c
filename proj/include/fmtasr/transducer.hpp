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

// Transducer (RNN-T) posterior and loss over a precomputed lattice of
// log-probabilities.
//
// The lattice holds, for every frame t and every label-prefix length u, a
// distribution over the blank-augmented vocabulary. Index 0 is blank. An
// alignment walks from (0, 0): blank moves to (t + 1, u), emitting label
// y[u] moves to (t, u + 1), and every alignment ends with a blank emitted
// from (T - 1, U).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fmtasr/common.hpp"

namespace fmtasr::transducer {

inline constexpr int kBlank = 0;

class TransducerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Label ids index the blank-augmented vocabulary, so valid labels are
// 1 .. vocab_size - 1.
using LabelSequence = std::vector<int>;

// Symbols of the blank-augmented vocabulary; id 0 is always blank.
class TokenInventory {
 public:
  static constexpr const char* kBlankSymbol = "<b>";

  TokenInventory() : symbols_{kBlankSymbol} { ids_[kBlankSymbol] = kBlank; }

  explicit TokenInventory(const std::vector<std::string>& labels)
      : TokenInventory() {
    for (const auto& s : labels) {
      if (s == kBlankSymbol) {
        throw TransducerError("the blank symbol cannot be a label");
      }
      if (!ids_.emplace(s, static_cast<int>(symbols_.size())).second) {
        throw TransducerError("duplicate label symbol '" + s + "'");
      }
      symbols_.push_back(s);
    }
  }

  int size() const { return static_cast<int>(symbols_.size()); }
  int num_labels() const { return size() - 1; }
  const std::string& symbol(int id) const { return symbols_.at(id); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  int id(const std::string& symbol) const {
    const auto it = ids_.find(symbol);
    if (it == ids_.end() || it->second == kBlank) {
      throw TransducerError("unknown label symbol '" + symbol + "'");
    }
    return it->second;
  }

  LabelSequence Encode(const std::vector<std::string>& tokens) const {
    LabelSequence out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  // Space-joined symbols.
  std::string Decode(std::span<const int> labels) const {
    std::string out;
    for (int id : labels) {
      if (!out.empty()) out.push_back(' ');
      out += symbol(id);
    }
    return out;
  }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> ids_;
};

// T x (U + 1) x V log-probabilities.
class Lattice {
 public:
  Lattice() = default;
  Lattice(int frames, int labels, int vocab, double fill = 0.0)
      : frames_(frames), labels_(labels), vocab_(vocab) {
    if (frames < 1 || labels < 0 || vocab < 2) {
      throw TransducerError("invalid lattice shape");
    }
    data_.assign(static_cast<std::size_t>(frames) * (labels + 1) * vocab, fill);
  }

  int frames() const { return frames_; }
  int labels() const { return labels_; }
  int vocab() const { return vocab_; }

  double& at(int t, int u, int k) { return data_[Offset(t, u) + k]; }
  double at(int t, int u, int k) const { return data_[Offset(t, u) + k]; }

  std::span<double> cell(int t, int u) { return {data_.data() + Offset(t, u), static_cast<std::size_t>(vocab_)}; }
  std::span<const double> cell(int t, int u) const {
    return {data_.data() + Offset(t, u), static_cast<std::size_t>(vocab_)};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  // True when every cell is a distribution within `tol` in log space.
  bool IsNormalized(double tol = 1e-9) const {
    for (int t = 0; t < frames_; ++t) {
      for (int u = 0; u <= labels_; ++u) {
        if (std::abs(LogSumExp(cell(t, u))) > tol) return false;
      }
    }
    return true;
  }

 private:
  std::size_t Offset(int t, int u) const {
    return (static_cast<std::size_t>(t) * (labels_ + 1) + u) * vocab_;
  }

  int frames_ = 0;
  int labels_ = 0;
  int vocab_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline void Validate(const Lattice& lat, std::span<const int> y) {
  if (lat.frames() < 1) throw TransducerError("lattice has no frames");
  if (static_cast<int>(y.size()) != lat.labels()) {
    throw TransducerError("label sequence length " + std::to_string(y.size()) +
                          " does not match lattice U = " +
                          std::to_string(lat.labels()));
  }
  for (int id : y) {
    if (id <= kBlank || id >= lat.vocab()) {
      throw TransducerError("label id " + std::to_string(id) +
                            " outside [1, " + std::to_string(lat.vocab() - 1) +
                            "]");
    }
  }
  for (double v : lat.values()) {
    if (std::isnan(v)) throw TransducerError("lattice contains NaN");
  }
}

// alpha(t, u): log-probability of reaching (t, u) before its output.
inline std::vector<double> Forward(const Lattice& lat, std::span<const int> y) {
  const int T = lat.frames();
  const int U = lat.labels();
  std::vector<double> alpha(static_cast<std::size_t>(T) * (U + 1), kNegInf);
  auto a = [&](int t, int u) -> double& { return alpha[t * (U + 1) + u]; };
  a(0, 0) = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      if (t == 0 && u == 0) continue;
      double v = kNegInf;
      if (t > 0) v = a(t - 1, u) + lat.at(t - 1, u, kBlank);
      if (u > 0) v = LogAddExp(v, a(t, u - 1) + lat.at(t, u - 1, y[u - 1]));
      a(t, u) = v;
    }
  }
  return alpha;
}

// beta(t, u): log-probability of finishing from (t, u), final blank included.
inline std::vector<double> Backward(const Lattice& lat, std::span<const int> y) {
  const int T = lat.frames();
  const int U = lat.labels();
  std::vector<double> beta(static_cast<std::size_t>(T) * (U + 1), kNegInf);
  auto b = [&](int t, int u) -> double& { return beta[t * (U + 1) + u]; };
  b(T - 1, U) = lat.at(T - 1, U, kBlank);
  for (int t = T - 1; t >= 0; --t) {
    for (int u = U; u >= 0; --u) {
      if (t == T - 1 && u == U) continue;
      double v = kNegInf;
      if (t < T - 1) v = b(t + 1, u) + lat.at(t, u, kBlank);
      if (u < U) v = LogAddExp(v, b(t, u + 1) + lat.at(t, u, y[u]));
      b(t, u) = v;
    }
  }
  return beta;
}

}  // namespace detail

// log P(y | x): log of the summed probability of every alignment of y.
inline double LogPosterior(const Lattice& lat, std::span<const int> y) {
  detail::Validate(lat, y);
  const auto alpha = detail::Forward(lat, y);
  const int U = lat.labels();
  return alpha[(lat.frames() - 1) * (U + 1) + U] +
         lat.at(lat.frames() - 1, U, kBlank);
}

struct BruteForceResult {
  double log_prob = kNegInf;
  std::uint64_t paths = 0;
};

inline constexpr int kBruteForceMaxFrames = 6;
inline constexpr int kBruteForceMaxLabels = 4;

// Literal sum over every alignment. Exponential; for checking only.
inline BruteForceResult BruteForcePosterior(const Lattice& lat,
                                            std::span<const int> y) {
  if (lat.frames() > kBruteForceMaxFrames || lat.labels() > kBruteForceMaxLabels) {
    throw TransducerError("brute-force enumeration limited to T <= 6, U <= 4");
  }
  detail::Validate(lat, y);
  const int T = lat.frames();
  const int U = lat.labels();
  std::vector<double> path_log_probs;
  // Depth-first over alignments; `acc` is the product so far in log space.
  auto walk = [&](auto&& self, int t, int u, double acc) -> void {
    if (t == T - 1 && u == U) {
      path_log_probs.push_back(acc + lat.at(t, u, kBlank));
      return;
    }
    if (t < T - 1) self(self, t + 1, u, acc + lat.at(t, u, kBlank));
    if (u < U) self(self, t, u + 1, acc + lat.at(t, u, y[u]));
  };
  walk(walk, 0, 0, 0.0);
  return {LogSumExp(path_log_probs), path_log_probs.size()};
}

struct LossAndGrad {
  double loss = 0.0;
  // d loss / d lattice log-probability, same shape as the lattice.
  Lattice grad;
};

// Negative log posterior and its gradient with respect to every lattice
// entry, each entry treated as an independent input.
inline LossAndGrad LossAndGradient(const Lattice& lat, std::span<const int> y) {
  detail::Validate(lat, y);
  const int T = lat.frames();
  const int U = lat.labels();
  const auto alpha = detail::Forward(lat, y);
  const auto beta = detail::Backward(lat, y);
  auto a = [&](int t, int u) { return alpha[t * (U + 1) + u]; };
  auto b = [&](int t, int u) { return beta[t * (U + 1) + u]; };
  const double log_p = a(T - 1, U) + lat.at(T - 1, U, kBlank);

  LossAndGrad out{-log_p, Lattice(T, U, lat.vocab(), 0.0)};
  if (log_p == kNegInf) return out;
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      const double reach = a(t, u);
      if (reach == kNegInf) continue;
      if (t < T - 1) {
        out.grad.at(t, u, kBlank) =
            -std::exp(reach + lat.at(t, u, kBlank) + b(t + 1, u) - log_p);
      } else if (u == U) {
        out.grad.at(t, u, kBlank) =
            -std::exp(reach + lat.at(t, u, kBlank) - log_p);
      }
      if (u < U) {
        out.grad.at(t, u, y[u]) =
            -std::exp(reach + lat.at(t, u, y[u]) + b(t, u + 1) - log_p);
      }
    }
  }
  return out;
}

// Chains a gradient with respect to log-probabilities through a per-cell
// log-softmax, giving the gradient with respect to the unnormalized logits
// that produced a normalized lattice: g_logit = g - p * sum(g).
inline Lattice LogitGradient(const Lattice& lat, const Lattice& grad) {
  Lattice out(lat.frames(), lat.labels(), lat.vocab());
  for (int t = 0; t < lat.frames(); ++t) {
    for (int u = 0; u <= lat.labels(); ++u) {
      const auto lp = lat.cell(t, u);
      const auto g = grad.cell(t, u);
      double sum = 0.0;
      for (double x : g) sum += x;
      auto dst = out.cell(t, u);
      for (int k = 0; k < lat.vocab(); ++k) dst[k] = g[k] - std::exp(lp[k]) * sum;
    }
  }
  return out;
}

}  // namespace fmtasr::transducer
