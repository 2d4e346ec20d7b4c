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

// Codebook-index distillation loss.
//
// A LossNet head per codebook maps a student embedding to a 256-way
// distribution; the loss is the cross-entropy of every head against the
// teacher's index, summed over frames and codebooks. The fused training
// objective adds it to the transducer loss with weight alpha.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmtasr/common.hpp"
#include "fmtasr/mvq.hpp"

namespace fmtasr::kd {

using mvq::kCodebookSize;

// N linear heads, 256 outputs each. Row n * 256 + v of `weights` produces
// logit v of head n.
struct LossNetParams {
  std::size_t n_heads = 0;
  std::size_t dim = 0;
  Matrix weights;
  std::vector<double> biases;

  LossNetParams() = default;
  LossNetParams(std::size_t heads, std::size_t d)
      : n_heads(heads),
        dim(d),
        weights(heads * kCodebookSize, d, 0.0),
        biases(heads * kCodebookSize, 0.0) {}

  static LossNetParams Random(std::size_t heads, std::size_t d, double scale,
                              std::mt19937_64& rng) {
    LossNetParams p(heads, d);
    std::normal_distribution<double> g(0.0, scale);
    for (double& w : p.weights.data()) w = g(rng);
    return p;
  }
};

// Student embeddings with one index tuple per frame.
struct KdBatch {
  Matrix student;            // T x dim
  std::vector<int> targets;  // T x N, row-major by frame
  std::size_t n_codebooks = 0;
};

struct KdLossAndGrad {
  double loss = 0.0;
  Matrix grad_weights;
  std::vector<double> grad_biases;
  Matrix grad_student;
};

struct KdOptions {
  // Divide the summed loss (and gradients) by the frame count.
  bool normalize_per_frame = false;
};

inline void CheckParams(const LossNetParams& p) {
  if (p.weights.rows() != p.n_heads * kCodebookSize || p.weights.cols() != p.dim ||
      p.biases.size() != p.n_heads * kCodebookSize) {
    throw std::invalid_argument("LossNet parameter shapes are inconsistent");
  }
}

// logits[n * 256 + v] for one embedding.
inline std::vector<double> LossNetLogits(const LossNetParams& p,
                                         std::span<const double> s) {
  std::vector<double> logits(p.biases);
  for (std::size_t r = 0; r < logits.size(); ++r) {
    const auto w = p.weights.row(r);
    double acc = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) acc += w[j] * s[j];
    logits[r] += acc;
  }
  return logits;
}

// N x 256 probabilities, row n = softmax(W_n s + b_n).
inline Matrix LossNetForward(const LossNetParams& p, std::span<const double> s) {
  CheckParams(p);
  if (s.size() != p.dim) {
    throw std::invalid_argument("student embedding has dimension " +
                                std::to_string(s.size()) + ", LossNet expects " +
                                std::to_string(p.dim));
  }
  const auto logits = LossNetLogits(p, s);
  Matrix probs(p.n_heads, kCodebookSize);
  std::copy(logits.begin(), logits.end(), probs.data().begin());
  for (std::size_t n = 0; n < p.n_heads; ++n) SoftmaxInPlace(probs.row(n));
  return probs;
}

inline KdLossAndGrad KdLossAndGradient(const LossNetParams& p,
                                       const KdBatch& batch,
                                       const KdOptions& opts = {}) {
  CheckParams(p);
  const std::size_t T = batch.student.rows();
  const std::size_t N = p.n_heads;
  if (batch.student.cols() != p.dim) {
    throw std::invalid_argument("student dimension does not match LossNet");
  }
  if (batch.n_codebooks != N) {
    throw std::invalid_argument("batch has " + std::to_string(batch.n_codebooks) +
                                " codebooks, LossNet has " + std::to_string(N) +
                                " heads");
  }
  if (batch.targets.size() != T * N) {
    throw std::invalid_argument("target count does not match frames x codebooks");
  }
  for (int target : batch.targets) {
    if (target < 0 || target >= static_cast<int>(kCodebookSize)) {
      throw std::out_of_range("target index " + std::to_string(target) +
                              " outside [0, 255]");
    }
  }

  KdLossAndGrad out;
  out.grad_weights = Matrix(p.weights.rows(), p.dim, 0.0);
  out.grad_biases.assign(p.biases.size(), 0.0);
  out.grad_student = Matrix(T, p.dim, 0.0);
  const double scale =
      opts.normalize_per_frame && T > 0 ? 1.0 / static_cast<double>(T) : 1.0;

  std::vector<double> probs(kCodebookSize);
  for (std::size_t t = 0; t < T; ++t) {
    const auto s = batch.student.row(t);
    const auto logits = LossNetLogits(p, s);
    auto ds = out.grad_student.row(t);
    for (std::size_t n = 0; n < N; ++n) {
      const double* z = logits.data() + n * kCodebookSize;
      const double zmax = *std::max_element(z, z + kCodebookSize);
      double sum = 0.0;
      for (std::size_t v = 0; v < kCodebookSize; ++v) {
        probs[v] = std::exp(z[v] - zmax);
        sum += probs[v];
      }
      const auto target = static_cast<std::size_t>(batch.targets[t * N + n]);
      out.loss += scale * (zmax + std::log(sum) - z[target]);
      for (std::size_t v = 0; v < kCodebookSize; ++v) {
        double g = probs[v] / sum;
        if (v == target) g -= 1.0;
        g *= scale;
        const std::size_t r = n * kCodebookSize + v;
        out.grad_biases[r] += g;
        auto gw = out.grad_weights.row(r);
        const auto w = p.weights.row(r);
        for (std::size_t j = 0; j < p.dim; ++j) {
          gw[j] += g * s[j];
          ds[j] += g * w[j];
        }
      }
    }
  }
  return out;
}

inline double KdLoss(const LossNetParams& p, const KdBatch& batch,
                     const KdOptions& opts = {}) {
  return KdLossAndGradient(p, batch, opts).loss;
}

// rnnt + alpha * kd.
inline double FusedLoss(double rnnt_loss, double kd_loss, double alpha) {
  if (!(alpha >= 0.0)) {
    throw std::invalid_argument("distillation weight must be non-negative");
  }
  return rnnt_loss + alpha * kd_loss;
}

// Targets of one utterance from a CI dataset record.
inline std::vector<int> TargetsFromCodes(std::span<const std::uint8_t> codes) {
  return {codes.begin(), codes.end()};
}

}  // namespace fmtasr::kd
