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

// Multi-codebook vector quantization.
//
// N codebooks of 256 entries each are trained one after another on the
// residual left by the previous stages (residual k-means). An embedding is
// encoded greedily: each stage picks the entry nearest to the current
// residual, so every frame becomes N one-byte indexes.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmtasr/common.hpp"

namespace fmtasr::mvq {

inline constexpr std::size_t kCodebookSize = 256;

class CodebookSet {
 public:
  CodebookSet() = default;
  CodebookSet(std::size_t n_codebooks, std::size_t dim)
      : n_codebooks_(n_codebooks),
        dim_(dim),
        entries_(n_codebooks * kCodebookSize * dim, 0.0) {}

  std::size_t n_codebooks() const { return n_codebooks_; }
  std::size_t dim() const { return dim_; }

  std::span<double> entry(std::size_t n, std::size_t v) {
    return {entries_.data() + (n * kCodebookSize + v) * dim_, dim_};
  }
  std::span<const double> entry(std::size_t n, std::size_t v) const {
    return {entries_.data() + (n * kCodebookSize + v) * dim_, dim_};
  }

  std::span<double> values() { return entries_; }
  std::span<const double> values() const { return entries_; }

  friend bool operator==(const CodebookSet&, const CodebookSet&) = default;

 private:
  std::size_t n_codebooks_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> entries_;
};

// One frame's indexes, one byte per codebook.
using CodeTuple = std::vector<std::uint8_t>;

enum class TrainStatus {
  kOk,
  // Some stage had fewer than 256 distinct residuals; the spare entries of
  // that codebook are zero vectors.
  kPaddedCodebook,
};

struct StageTrace {
  std::size_t distinct_points = 0;
  bool padded = false;
  // Mean squared quantization error after initialization and after each
  // Lloyd iteration.
  std::vector<double> mse;
};

struct TrainResult {
  CodebookSet codebooks;
  TrainStatus status = TrainStatus::kOk;
  std::vector<StageTrace> stages;
};

// Called after seeding (iteration 0) and after every Lloyd iteration with the
// stage index and the current 256 x D centroids.
using LloydObserver =
    std::function<void(std::size_t stage, int iteration,
                       std::span<const double> centroids)>;

namespace detail {

// Nearest row of `centroids` (k x D, flat) to `x`; lowest index wins ties.
inline std::size_t Nearest(std::span<const double> centroids, std::size_t k,
                           std::span<const double> x, double* dist = nullptr) {
  const std::size_t d = x.size();
  std::size_t best = 0;
  double best_dist = SquaredDistance(centroids.subspan(0, d), x);
  for (std::size_t c = 1; c < k; ++c) {
    const double dd = SquaredDistance(centroids.subspan(c * d, d), x);
    if (dd < best_dist) {
      best_dist = dd;
      best = c;
    }
  }
  if (dist != nullptr) *dist = best_dist;
  return best;
}

inline std::vector<std::size_t> DistinctRows(const Matrix& points) {
  std::vector<std::size_t> order(points.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto less = [&](std::size_t a, std::size_t b) {
    const auto ra = points.row(a);
    const auto rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(),
                                        rb.end());
  };
  std::stable_sort(order.begin(), order.end(), less);
  std::vector<std::size_t> distinct;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || less(order[i - 1], order[i])) distinct.push_back(order[i]);
  }
  std::sort(distinct.begin(), distinct.end());
  return distinct;
}

inline double AssignAll(const Matrix& points, std::span<const double> centroids,
                        std::size_t k, std::vector<std::size_t>& labels,
                        std::vector<double>& errors) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    labels[i] = Nearest(centroids, k, points.row(i), &errors[i]);
    total += errors[i];
  }
  return total / static_cast<double>(points.rows());
}

// k-means++ seeding followed by `iters` Lloyd iterations. Requires at least
// k distinct points. Returns the centroids (k x D, flat) and appends the MSE
// after seeding and after every iteration to `mse`.
inline std::vector<double> Lloyd(const Matrix& points, std::size_t k,
                                 int iters, std::mt19937_64& rng,
                                 std::vector<double>& mse,
                                 const std::function<void(int, std::span<const double>)>& observe) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  std::vector<double> centroids(k * d);

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t first = pick(rng);
  std::copy_n(points.row(first).begin(), d, centroids.begin());
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = SquaredDistance(points.row(i), points.row(first));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : dist) total += v;
    const double target = unit(rng) * total;
    std::size_t chosen = n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (dist[i] <= 0.0) continue;
      acc += dist[i];
      chosen = i;
      if (acc > target) break;
    }
    auto dst = std::span<double>(centroids).subspan(c * d, d);
    std::copy_n(points.row(chosen).begin(), d, dst.begin());
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], SquaredDistance(points.row(i), dst));
    }
  }

  std::vector<std::size_t> labels(n);
  std::vector<double> errors(n);
  mse.push_back(AssignAll(points, centroids, k, labels, errors));
  if (observe) observe(0, centroids);
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);
  for (int it = 0; it < iters; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = points.row(i);
      double* s = sums.data() + labels[i] * d;
      for (std::size_t j = 0; j < d; ++j) s[j] += row[j];
      ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (std::size_t j = 0; j < d; ++j) {
        centroids[c * d + j] = sums[c * d + j] * inv;
      }
    }
    // Empty clusters take over the worst-quantized points.
    for (std::size_t i = 0; i < n; ++i) {
      errors[i] = SquaredDistance(
          points.row(i), std::span<const double>(centroids).subspan(labels[i] * d, d));
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      const auto worst = static_cast<std::size_t>(
          std::max_element(errors.begin(), errors.end()) - errors.begin());
      std::copy_n(points.row(worst).begin(), d, centroids.begin() + c * d);
      errors[worst] = 0.0;
    }
    mse.push_back(AssignAll(points, centroids, k, labels, errors));
    if (observe) observe(it + 1, centroids);
  }
  return centroids;
}

}  // namespace detail

inline void CheckEmbeddings(const Matrix& data) {
  if (!AllFinite(data.data())) {
    throw std::invalid_argument("embeddings contain NaN or infinite values");
  }
}

// Residual k-means training of `n_codebooks` codebooks. Deterministic given
// the inputs.
inline TrainResult TrainCodebooks(const Matrix& data, std::size_t n_codebooks,
                                  int iters, std::uint64_t seed,
                                  const LloydObserver& observer = {}) {
  if (n_codebooks < 1 || n_codebooks > 255) {
    throw std::invalid_argument("codebook count must be in [1, 255]");
  }
  if (iters < 1) throw std::invalid_argument("iters must be >= 1");
  if (data.rows() < kCodebookSize) {
    throw std::invalid_argument("need at least 256 embeddings, got " +
                                std::to_string(data.rows()));
  }
  if (data.cols() == 0) throw std::invalid_argument("zero-dimensional data");
  CheckEmbeddings(data);

  const std::size_t d = data.cols();
  TrainResult result;
  result.codebooks = CodebookSet(n_codebooks, d);
  std::mt19937_64 rng(seed);
  Matrix residual = data;
  for (std::size_t n = 0; n < n_codebooks; ++n) {
    StageTrace trace;
    const auto distinct = detail::DistinctRows(residual);
    trace.distinct_points = distinct.size();
    std::vector<double> centroids(kCodebookSize * d, 0.0);
    if (distinct.size() < kCodebookSize) {
      // Every distinct residual becomes an entry; the rest stay zero.
      for (std::size_t c = 0; c < distinct.size(); ++c) {
        std::copy_n(residual.row(distinct[c]).begin(), d,
                    centroids.begin() + c * d);
      }
      trace.padded = true;
      result.status = TrainStatus::kPaddedCodebook;
      std::vector<std::size_t> labels(residual.rows());
      std::vector<double> errors(residual.rows());
      trace.mse.push_back(detail::AssignAll(residual, centroids, kCodebookSize,
                                            labels, errors));
    } else {
      std::function<void(int, std::span<const double>)> observe;
      if (observer) {
        observe = [&](int it, std::span<const double> c) { observer(n, it, c); };
      }
      centroids = detail::Lloyd(residual, kCodebookSize, iters, rng, trace.mse,
                                observe);
    }
    for (std::size_t v = 0; v < kCodebookSize; ++v) {
      auto dst = result.codebooks.entry(n, v);
      std::copy_n(centroids.begin() + v * d, d, dst.begin());
    }
    for (std::size_t i = 0; i < residual.rows(); ++i) {
      auto row = residual.row(i);
      const std::size_t c = detail::Nearest(centroids, kCodebookSize, row);
      for (std::size_t j = 0; j < d; ++j) row[j] -= centroids[c * d + j];
    }
    result.stages.push_back(std::move(trace));
  }
  return result;
}

inline CodeTuple Encode(const CodebookSet& cb, std::span<const double> e) {
  if (e.size() != cb.dim()) {
    throw std::invalid_argument("embedding dimension " +
                                std::to_string(e.size()) +
                                " does not match codebook dimension " +
                                std::to_string(cb.dim()));
  }
  CodeTuple out(cb.n_codebooks());
  std::vector<double> residual(e.begin(), e.end());
  for (std::size_t n = 0; n < cb.n_codebooks(); ++n) {
    const auto table = cb.values().subspan(n * kCodebookSize * cb.dim(),
                                           kCodebookSize * cb.dim());
    const std::size_t idx = detail::Nearest(table, kCodebookSize, residual);
    out[n] = static_cast<std::uint8_t>(idx);
    const auto entry = cb.entry(n, idx);
    for (std::size_t j = 0; j < residual.size(); ++j) residual[j] -= entry[j];
  }
  return out;
}

// Encodes every row; the result is row-major, rows() x n_codebooks bytes.
inline std::vector<std::uint8_t> EncodeAll(const CodebookSet& cb,
                                           const Matrix& data) {
  std::vector<std::uint8_t> out;
  out.reserve(data.rows() * cb.n_codebooks());
  for (std::size_t t = 0; t < data.rows(); ++t) {
    const auto codes = Encode(cb, data.row(t));
    out.insert(out.end(), codes.begin(), codes.end());
  }
  return out;
}

// Sum of the selected entries. Indexes are given as ints so that
// out-of-range values can be reported rather than silently wrapped.
inline std::vector<double> Reconstruct(const CodebookSet& cb,
                                       std::span<const int> codes) {
  if (codes.size() != cb.n_codebooks()) {
    throw std::invalid_argument("code tuple has " +
                                std::to_string(codes.size()) +
                                " entries, expected " +
                                std::to_string(cb.n_codebooks()));
  }
  std::vector<double> out(cb.dim(), 0.0);
  for (std::size_t n = 0; n < codes.size(); ++n) {
    if (codes[n] < 0 || codes[n] >= static_cast<int>(kCodebookSize)) {
      throw std::out_of_range("codebook index " + std::to_string(codes[n]) +
                              " outside [0, 255]");
    }
    const auto entry = cb.entry(n, static_cast<std::size_t>(codes[n]));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += entry[j];
  }
  return out;
}

inline std::vector<double> Reconstruct(const CodebookSet& cb,
                                       std::span<const std::uint8_t> codes) {
  std::vector<int> wide(codes.begin(), codes.end());
  return Reconstruct(cb, std::span<const int>(wide));
}

// Bytes of the source embedding divided by bytes of its code tuple.
inline double CompressionRate(std::size_t dim, std::size_t bytes_per_scalar,
                              std::size_t n_codebooks) {
  return static_cast<double>(dim * bytes_per_scalar) /
         static_cast<double>(n_codebooks);
}

}  // namespace fmtasr::mvq
