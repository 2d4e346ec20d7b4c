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


// A small transducer with hand-written backpropagation.
//
//   encoder    x_t = frames[t - c .. t + c] (zero padded)
//              h1 = tanh(W1 x + b1)
//              s  = tanh(Wt h1 + bt)          tap layer, read by the LossNet
//              h2 = tanh(W2 s + b2)
//              e  = We h2 + be
//   predictor  q  = Wp emb[last label] + bp   (emb row 0 starts a sentence)
//   joiner     log_softmax(Wo tanh(e_t + q_u) + bo)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fmtasr/beam_search.hpp"
#include "fmtasr/common.hpp"
#include "fmtasr/kd.hpp"
#include "fmtasr/mvq_io.hpp"
#include "fmtasr/transducer.hpp"

namespace fmtasr::harness {

struct ToyModelConfig {
  int feature_dim = 10;
  int context = 2;
  int hidden = 256;
  int tap_dim = 8;
  int joiner_dim = 64;
  int embed_dim = 16;
  int vocab = 20;
  int n_codebooks = 2;

  int input_dim() const { return (2 * context + 1) * feature_dim; }
  friend bool operator==(const ToyModelConfig&, const ToyModelConfig&) = default;
};

struct TensorRef {
  const char* name;
  std::size_t rows;
  std::size_t cols;
  std::span<double> data;
};

// The LossNet weight and bias tensors come last in ToyModel::Tensors().
inline constexpr std::size_t kLossNetTensors = 2;

struct ToyModel {
  ToyModelConfig config;
  Matrix w1, b1, wt, bt, w2, b2, we, be;
  Matrix emb, wp, bp;
  Matrix wo, bo;
  kd::LossNetParams lossnet;

  ToyModel() = default;

  // Every tensor zero.
  explicit ToyModel(const ToyModelConfig& c)
      : config(c),
        w1(c.hidden, c.input_dim()), b1(1, c.hidden),
        wt(c.tap_dim, c.hidden), bt(1, c.tap_dim),
        w2(c.hidden, c.tap_dim), b2(1, c.hidden),
        we(c.joiner_dim, c.hidden), be(1, c.joiner_dim),
        emb(c.vocab, c.embed_dim), wp(c.joiner_dim, c.embed_dim), bp(1, c.joiner_dim),
        wo(c.vocab, c.joiner_dim), bo(1, c.vocab),
        lossnet(c.n_codebooks, c.tap_dim) {
    if (c.feature_dim < 1 || c.context < 0 || c.hidden < 1 || c.tap_dim < 1 ||
        c.joiner_dim < 1 || c.embed_dim < 1 || c.vocab < 2 || c.n_codebooks < 0 ||
        c.n_codebooks > 255) {
      throw std::invalid_argument("invalid toy model configuration");
    }
  }

  // Gaussian weights scaled by 1/sqrt(fan_in); zero biases and LossNet.
  static ToyModel Random(const ToyModelConfig& c, std::uint64_t seed) {
    ToyModel m(c);
    std::mt19937_64 rng(seed);
    auto fill = [&](Matrix& w, double scale) {
      std::normal_distribution<double> g(0.0, scale);
      for (double& v : w.data()) v = g(rng);
    };
    auto fan_in = [](const Matrix& w) { return 1.0 / std::sqrt(static_cast<double>(w.cols())); };
    fill(m.w1, fan_in(m.w1));
    fill(m.wt, fan_in(m.wt));
    fill(m.w2, fan_in(m.w2));
    fill(m.we, fan_in(m.we));
    fill(m.emb, 1.0);
    fill(m.wp, fan_in(m.wp));
    fill(m.wo, fan_in(m.wo));
    return m;
  }

  std::vector<TensorRef> Tensors() {
    auto ref = [](const char* name, Matrix& m) {
      return TensorRef{name, m.rows(), m.cols(), m.data()};
    };
    return {ref("w1", w1), ref("b1", b1), ref("wt", wt), ref("bt", bt),
            ref("w2", w2), ref("b2", b2), ref("we", we), ref("be", be),
            ref("emb", emb), ref("wp", wp), ref("bp", bp),
            ref("wo", wo), ref("bo", bo),
            ref("lossnet.w", lossnet.weights),
            TensorRef{"lossnet.b", 1, lossnet.biases.size(), lossnet.biases}};
  }
  std::vector<TensorRef> Tensors() const { return const_cast<ToyModel*>(this)->Tensors(); }

  std::size_t ParameterCount() const {
    std::size_t n = 0;
    for (const auto& t : Tensors()) n += t.data.size();
    return n;
  }

  friend bool operator==(const ToyModel& a, const ToyModel& b) {
    if (!(a.config == b.config)) return false;
    const auto ta = a.Tensors();
    const auto tb = b.Tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) {
      if (!std::equal(ta[i].data.begin(), ta[i].data.end(), tb[i].data.begin())) {
        return false;
      }
    }
    return true;
  }
};

// Bitwise comparison of every parameter.
inline bool BitwiseEqual(const ToyModel& a, const ToyModel& b) {
  if (!(a.config == b.config)) return false;
  const auto ta = a.Tensors();
  const auto tb = b.Tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (std::memcmp(ta[i].data.data(), tb[i].data.data(),
                    ta[i].data.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

struct EncoderStates {
  Matrix x, h1, s, h2, e;
};

namespace detail {

// y += W v
inline void MatVecAdd(const Matrix& w, std::span<const double> v, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* row = w.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) acc += row[c] * v[c];
    y[r] += acc;
  }
}

// y += W^T v
inline void MatTVecAdd(const Matrix& w, std::span<const double> v, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double vr = v[r];
    if (vr == 0.0) continue;
    const double* row = w.row(r).data();
    for (std::size_t c = 0; c < w.cols(); ++c) y[c] += row[c] * vr;
  }
}

// G += a b^T
inline void OuterAdd(std::span<const double> a, std::span<const double> b, Matrix& g) {
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* row = g.row(r).data();
    for (std::size_t c = 0; c < b.size(); ++c) row[c] += ar * b[c];
  }
}

inline void AddTo(std::span<const double> v, std::span<double> y) {
  for (std::size_t i = 0; i < v.size(); ++i) y[i] += v[i];
}

inline void Affine(const Matrix& w, const Matrix& b, std::span<const double> v,
                   std::span<double> y) {
  std::copy(b.data().begin(), b.data().end(), y.begin());
  MatVecAdd(w, v, y);
}

inline void TanhInPlace(std::span<double> v) {
  for (double& x : v) x = std::tanh(x);
}

// d pre-activation from d output of tanh, in place.
inline void TanhBackward(std::span<const double> out, std::span<double> grad) {
  for (std::size_t i = 0; i < out.size(); ++i) grad[i] *= 1.0 - out[i] * out[i];
}

}  // namespace detail

inline EncoderStates Encode(const ToyModel& m, const Matrix& frames) {
  const auto& c = m.config;
  if (frames.cols() != static_cast<std::size_t>(c.feature_dim)) {
    throw std::invalid_argument("frames have " + std::to_string(frames.cols()) +
                                " features, model expects " +
                                std::to_string(c.feature_dim));
  }
  const std::size_t T = frames.rows();
  EncoderStates st{Matrix(T, c.input_dim()), Matrix(T, c.hidden), Matrix(T, c.tap_dim),
                   Matrix(T, c.hidden), Matrix(T, c.joiner_dim)};
  const auto F = static_cast<std::size_t>(c.feature_dim);
  for (std::size_t t = 0; t < T; ++t) {
    auto x = st.x.row(t);
    for (int k = -c.context; k <= c.context; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(t) + k;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      const auto row = frames.row(static_cast<std::size_t>(src));
      std::copy(row.begin(), row.end(), x.begin() + (k + c.context) * F);
    }
    detail::Affine(m.w1, m.b1, x, st.h1.row(t));
    detail::TanhInPlace(st.h1.row(t));
    detail::Affine(m.wt, m.bt, st.h1.row(t), st.s.row(t));
    detail::TanhInPlace(st.s.row(t));
    detail::Affine(m.w2, m.b2, st.s.row(t), st.h2.row(t));
    detail::TanhInPlace(st.h2.row(t));
    detail::Affine(m.we, m.be, st.h2.row(t), st.e.row(t));
  }
  return st;
}

// Row v is the predictor output after label v (v = 0: sentence start).
inline Matrix PredictorOutputs(const ToyModel& m) {
  Matrix q(m.config.vocab, m.config.joiner_dim);
  for (int v = 0; v < m.config.vocab; ++v) {
    detail::Affine(m.wp, m.bp, m.emb.row(v), q.row(v));
  }
  return q;
}

// Writes tanh(e + q) to z and the log-distribution to out.
inline void JoinerForward(const ToyModel& m, std::span<const double> e,
                          std::span<const double> q, std::span<double> z,
                          std::span<double> out) {
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = std::tanh(e[j] + q[j]);
  detail::Affine(m.wo, m.bo, z, out);
  LogSoftmaxInPlace(out);
}

// Full lattice of the model along label sequence y.
inline transducer::Lattice ModelLattice(const ToyModel& m, const EncoderStates& st,
                                        const Matrix& q, std::span<const int> y,
                                        Matrix* z_cache = nullptr) {
  const int T = static_cast<int>(st.e.rows());
  const int U = static_cast<int>(y.size());
  transducer::Lattice lat(T, U, m.config.vocab);
  if (z_cache != nullptr) *z_cache = Matrix(static_cast<std::size_t>(T) * (U + 1), m.config.joiner_dim);
  std::vector<double> z(m.config.joiner_dim);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      const int last = u == 0 ? 0 : y[u - 1];
      if (last < 0 || last >= m.config.vocab) {
        throw transducer::TransducerError("label " + std::to_string(last) +
                                          " outside the model vocabulary");
      }
      auto zs = z_cache != nullptr ? z_cache->row(static_cast<std::size_t>(t) * (U + 1) + u)
                                   : std::span<double>(z);
      JoinerForward(m, st.e.row(t), q.row(last), zs, lat.cell(t, u));
    }
  }
  return lat;
}

struct LossTerms {
  double rnnt = 0.0;
  double kd = 0.0;
  double fused = 0.0;
};

// Adds weight * d(rnnt + alpha * kd)/d(params) for one utterance to `grad`.
// The KD term is skipped entirely when `kd_targets` is null. A non-finite
// lattice yields NaN losses and leaves `grad` untouched.
inline LossTerms AccumulateGradient(const ToyModel& m, const Matrix& frames,
                                    std::span<const int> y,
                                    const std::vector<int>* kd_targets, double alpha,
                                    double weight, ToyModel& grad,
                                    const kd::KdOptions& kd_opts = {}) {
  using detail::AddTo;
  using detail::MatTVecAdd;
  using detail::OuterAdd;
  using detail::TanhBackward;
  const auto& c = m.config;
  const auto st = Encode(m, frames);
  const auto q = PredictorOutputs(m);
  Matrix zc;
  const auto lat = ModelLattice(m, st, q, y, &zc);
  LossTerms terms;
  if (!AllFinite(lat.values())) {
    terms.rnnt = terms.fused = std::numeric_limits<double>::quiet_NaN();
    return terms;
  }
  const auto lg = transducer::LossAndGradient(lat, y);
  const auto dl = transducer::LogitGradient(lat, lg.grad);
  terms.rnnt = lg.loss;
  const int T = lat.frames();
  const int U = lat.labels();
  Matrix de(T, c.joiner_dim);
  Matrix dq(c.vocab, c.joiner_dim);
  std::vector<double> g(c.vocab), dz(c.joiner_dim);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      const auto cell = dl.cell(t, u);
      for (int k = 0; k < c.vocab; ++k) g[k] = weight * cell[k];
      const auto z = zc.row(static_cast<std::size_t>(t) * (U + 1) + u);
      AddTo(g, grad.bo.data());
      OuterAdd(g, z, grad.wo);
      std::fill(dz.begin(), dz.end(), 0.0);
      MatTVecAdd(m.wo, g, dz);
      TanhBackward(z, dz);
      AddTo(dz, de.row(t));
      AddTo(dz, dq.row(u == 0 ? 0 : y[u - 1]));
    }
  }
  for (int v = 0; v < c.vocab; ++v) {
    const auto d = dq.row(v);
    AddTo(d, grad.bp.data());
    OuterAdd(d, m.emb.row(v), grad.wp);
    MatTVecAdd(m.wp, d, grad.emb.row(v));
  }

  Matrix ds(T, c.tap_dim);
  std::vector<double> dh(c.hidden);
  for (int t = 0; t < T; ++t) {
    AddTo(de.row(t), grad.be.data());
    OuterAdd(de.row(t), st.h2.row(t), grad.we);
    std::fill(dh.begin(), dh.end(), 0.0);
    MatTVecAdd(m.we, de.row(t), dh);
    TanhBackward(st.h2.row(t), dh);
    AddTo(dh, grad.b2.data());
    OuterAdd(dh, st.s.row(t), grad.w2);
    MatTVecAdd(m.w2, dh, ds.row(t));
  }

  if (kd_targets != nullptr) {
    const kd::KdBatch batch{st.s, *kd_targets, static_cast<std::size_t>(c.n_codebooks)};
    const auto kg = kd::KdLossAndGradient(m.lossnet, batch, kd_opts);
    terms.kd = kg.loss;
    const double scale = alpha * weight;
    for (std::size_t i = 0; i < ds.size(); ++i) ds.data()[i] += scale * kg.grad_student.data()[i];
    for (std::size_t i = 0; i < kg.grad_weights.size(); ++i) {
      grad.lossnet.weights.data()[i] += scale * kg.grad_weights.data()[i];
    }
    for (std::size_t i = 0; i < kg.grad_biases.size(); ++i) {
      grad.lossnet.biases[i] += scale * kg.grad_biases[i];
    }
  }
  terms.fused = kd::FusedLoss(terms.rnnt, terms.kd, alpha);

  std::vector<double> dtap(c.tap_dim);
  for (int t = 0; t < T; ++t) {
    std::copy(ds.row(t).begin(), ds.row(t).end(), dtap.begin());
    TanhBackward(st.s.row(t), dtap);
    AddTo(dtap, grad.bt.data());
    OuterAdd(dtap, st.h1.row(t), grad.wt);
    std::fill(dh.begin(), dh.end(), 0.0);
    MatTVecAdd(m.wt, dtap, dh);
    TanhBackward(st.h1.row(t), dh);
    AddTo(dh, grad.b1.data());
    OuterAdd(dh, st.x.row(t), grad.w1);
  }
  return terms;
}

// Loss terms only, for one utterance.
inline LossTerms UtteranceLoss(const ToyModel& m, const Matrix& frames,
                               std::span<const int> y,
                               const std::vector<int>* kd_targets, double alpha,
                               const kd::KdOptions& kd_opts = {}) {
  const auto st = Encode(m, frames);
  const auto lat = ModelLattice(m, st, PredictorOutputs(m), y);
  LossTerms terms;
  if (!AllFinite(lat.values())) {
    terms.rnnt = terms.fused = std::numeric_limits<double>::quiet_NaN();
    return terms;
  }
  terms.rnnt = -transducer::LogPosterior(lat, y);
  if (kd_targets != nullptr) {
    const kd::KdBatch batch{st.s, *kd_targets,
                            static_cast<std::size_t>(m.config.n_codebooks)};
    terms.kd = kd::KdLoss(m.lossnet, batch, kd_opts);
  }
  terms.fused = kd::FusedLoss(terms.rnnt, terms.kd, alpha);
  return terms;
}

// Step-wise distributions of a model over one utterance.
class ModelScorer : public transducer::AcousticScorer {
 public:
  ModelScorer(const ToyModel& m, const Matrix& frames)
      : model_(m), states_(Encode(m, frames)), q_(PredictorOutputs(m)) {}

  int frames() const override { return static_cast<int>(states_.e.rows()); }
  int vocab() const override { return model_.config.vocab; }
  std::vector<double> LogProbs(int t, std::span<const int> prefix) const override {
    const int last = prefix.empty() ? 0 : prefix.back();
    std::vector<double> z(model_.config.joiner_dim), out(model_.config.vocab);
    JoinerForward(model_, states_.e.row(t), q_.row(last), z, out);
    return out;
  }

 private:
  const ToyModel& model_;
  EncoderStates states_;
  Matrix q_;
};

// Model file: "FMTM", u32 version, eight u32 configuration fields, u32
// tensor count, then per tensor u32 rows, u32 cols and rows x cols f64,
// all little-endian.
inline constexpr std::uint32_t kModelVersion = 1;

inline std::vector<std::uint8_t> SerializeModel(const ToyModel& m) {
  mvq::detail::ByteWriter w;
  w.Bytes("FMTM");
  w.U32(kModelVersion);
  const auto& c = m.config;
  for (int v : {c.feature_dim, c.context, c.hidden, c.tap_dim, c.joiner_dim,
                c.embed_dim, c.vocab, c.n_codebooks}) {
    w.U32(static_cast<std::uint32_t>(v));
  }
  const auto tensors = m.Tensors();
  w.U32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.U32(static_cast<std::uint32_t>(t.rows));
    w.U32(static_cast<std::uint32_t>(t.cols));
    for (double v : t.data) w.F64(v);
  }
  return w.buffer();
}

inline ToyModel ParseModel(std::span<const std::uint8_t> bytes) {
  using mvq::IoErrc;
  using mvq::IoError;
  mvq::detail::ByteReader r(bytes);
  mvq::detail::CheckMagic(r, "FMTM");
  if (!r.Has(4 + 8 * 4 + 4)) throw IoError(IoErrc::kTruncatedHeader, "short model header");
  const std::uint32_t version = r.U32();
  if (version != kModelVersion) {
    throw IoError(IoErrc::kVersionMismatch,
                  "model version " + std::to_string(version) + " is not supported");
  }
  ToyModelConfig c;
  for (int* f : {&c.feature_dim, &c.context, &c.hidden, &c.tap_dim, &c.joiner_dim,
                 &c.embed_dim, &c.vocab, &c.n_codebooks}) {
    *f = static_cast<int>(r.U32());
  }
  ToyModel m(c);
  auto tensors = m.Tensors();
  if (r.U32() != tensors.size()) throw IoError(IoErrc::kShapeMismatch, "tensor count");
  for (auto& t : tensors) {
    if (!r.Has(8)) throw IoError(IoErrc::kTruncatedPayload, "missing tensor shape");
    const std::uint32_t rows = r.U32();
    const std::uint32_t cols = r.U32();
    if (rows != t.rows || cols != t.cols) {
      throw IoError(IoErrc::kShapeMismatch, std::string("tensor ") + t.name);
    }
    if (!r.Has(t.data.size() * 8)) {
      throw IoError(IoErrc::kTruncatedPayload, std::string("tensor ") + t.name);
    }
    for (double& v : t.data) v = r.F64();
  }
  if (r.remaining() != 0) throw IoError(IoErrc::kTrailingData, "bytes after the last tensor");
  return m;
}

inline void SaveModel(const std::string& path, const ToyModel& m) {
  mvq::detail::WriteFile(path, SerializeModel(m));
}

inline ToyModel LoadModel(const std::string& path) {
  return ParseModel(mvq::detail::ReadFile(path));
}

}  // namespace fmtasr::harness
