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

// Little-endian binary files for codebook indexes, codebooks and embedding
// sequences.
//
//   CI file        "MVQ1" u8 N, u32 utterances,
//                  per utterance: u32 T, T*N index bytes (row-major by frame)
//   codebook file  "MVQC" u8 N, u32 D, N*256*D float64
//   embedding file "MVQE" u32 D, u32 utterances,
//                  per utterance: u32 T, T*D float64

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fmtasr/common.hpp"
#include "fmtasr/mvq.hpp"

namespace fmtasr::mvq {

enum class IoErrc {
  kIo = 1,
  kBadMagic,
  kVersionMismatch,
  kTruncatedHeader,
  kTruncatedPayload,
  kCodebookCountMismatch,
  kFrameCountMismatch,
  kTrailingData,
  kShapeMismatch,
};

inline const char* IoErrcName(IoErrc c) {
  switch (c) {
    case IoErrc::kIo: return "io";
    case IoErrc::kBadMagic: return "bad magic";
    case IoErrc::kVersionMismatch: return "version mismatch";
    case IoErrc::kTruncatedHeader: return "truncated header";
    case IoErrc::kTruncatedPayload: return "truncated payload";
    case IoErrc::kCodebookCountMismatch: return "codebook count mismatch";
    case IoErrc::kFrameCountMismatch: return "frame count mismatch";
    case IoErrc::kTrailingData: return "trailing data";
    case IoErrc::kShapeMismatch: return "shape mismatch";
  }
  return "unknown";
}

class IoError : public std::runtime_error {
 public:
  IoError(IoErrc code, const std::string& what)
      : std::runtime_error(std::string(IoErrcName(code)) + ": " + what),
        code_(code) {}
  IoErrc code() const { return code_; }

 private:
  IoErrc code_;
};

// Indexes of one utterance: frames() x n_codebooks bytes, row-major.
struct UtteranceCodes {
  std::uint32_t frames = 0;
  std::vector<std::uint8_t> indexes;

  std::span<const std::uint8_t> frame(std::size_t t, std::size_t n_codebooks) const {
    return std::span<const std::uint8_t>(indexes).subspan(t * n_codebooks,
                                                          n_codebooks);
  }

  friend bool operator==(const UtteranceCodes&, const UtteranceCodes&) = default;
};

struct CiDataset {
  std::uint8_t n_codebooks = 0;
  std::vector<UtteranceCodes> utterances;

  std::size_t total_frames() const {
    std::size_t t = 0;
    for (const auto& u : utterances) t += u.frames;
    return t;
  }

  friend bool operator==(const CiDataset&, const CiDataset&) = default;
};

inline constexpr std::size_t kCiHeaderBytes = 4 + 1 + 4;

inline std::size_t CiFileSize(const CiDataset& ds) {
  return kCiHeaderBytes + 4 * ds.utterances.size() +
         ds.total_frames() * ds.n_codebooks;
}

namespace detail {

class ByteWriter {
 public:
  void Bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void U8(std::uint8_t v) { buf_.push_back(v); }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void Raw(std::span<const std::uint8_t> bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  }
  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  bool Has(std::size_t n) const { return remaining() >= n; }

  std::uint8_t U8() { return data_[pos_++]; }
  std::uint32_t U32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t U64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{data_[pos_++]} << (8 * i);
    return v;
  }
  double F64() { return std::bit_cast<double>(U64()); }
  std::span<const std::uint8_t> Take(std::size_t n) {
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline void WriteFile(const std::string& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrc::kIo, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoErrc::kIo, "write failed: " + path);
}

inline std::vector<std::uint8_t> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrc::kIo, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A CI file whose magic differs only in the trailing version digit is
// reported as a version mismatch rather than as a foreign file.
inline void CheckMagic(ByteReader& r, std::string_view magic_expected) {
  if (!r.Has(4)) throw IoError(IoErrc::kTruncatedHeader, "missing magic");
  const auto magic = r.Take(4);
  if (std::memcmp(magic.data(), magic_expected.data(), 4) == 0) return;
  const bool versioned = magic_expected[3] >= '0' && magic_expected[3] <= '9';
  if (versioned && std::memcmp(magic.data(), magic_expected.data(), 3) == 0 &&
      magic[3] >= '0' && magic[3] <= '9') {
    throw IoError(IoErrc::kVersionMismatch,
                  std::string("unsupported version '") +
                      static_cast<char>(magic[3]) + "'");
  }
  throw IoError(IoErrc::kBadMagic, "unrecognized file type");
}

}  // namespace detail

inline std::vector<std::uint8_t> SerializeCi(const CiDataset& ds) {
  if (ds.n_codebooks == 0) {
    throw IoError(IoErrc::kCodebookCountMismatch, "codebook count is zero");
  }
  detail::ByteWriter w;
  w.Bytes("MVQ1");
  w.U8(ds.n_codebooks);
  w.U32(static_cast<std::uint32_t>(ds.utterances.size()));
  for (std::size_t i = 0; i < ds.utterances.size(); ++i) {
    const auto& u = ds.utterances[i];
    if (u.indexes.size() != std::size_t{u.frames} * ds.n_codebooks) {
      throw IoError(IoErrc::kCodebookCountMismatch,
                    "utterance " + std::to_string(i) + " has " +
                        std::to_string(u.indexes.size()) + " indexes for " +
                        std::to_string(u.frames) + " frames of " +
                        std::to_string(ds.n_codebooks) + " codebooks");
    }
    w.U32(u.frames);
    w.Raw(u.indexes);
  }
  return w.buffer();
}

inline CiDataset ParseCi(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  detail::CheckMagic(r, "MVQ1");
  if (!r.Has(5)) throw IoError(IoErrc::kTruncatedHeader, "short CI header");
  CiDataset ds;
  ds.n_codebooks = r.U8();
  if (ds.n_codebooks == 0) {
    throw IoError(IoErrc::kCodebookCountMismatch, "header declares zero codebooks");
  }
  const std::uint32_t count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!r.Has(4)) {
      throw IoError(IoErrc::kTruncatedPayload,
                    "missing frame count of utterance " + std::to_string(i));
    }
    UtteranceCodes u;
    u.frames = r.U32();
    const std::size_t n = std::size_t{u.frames} * ds.n_codebooks;
    if (!r.Has(n)) {
      throw IoError(IoErrc::kTruncatedPayload,
                    "utterance " + std::to_string(i) + " needs " +
                        std::to_string(n) + " bytes, " +
                        std::to_string(r.remaining()) + " left");
    }
    const auto payload = r.Take(n);
    u.indexes.assign(payload.begin(), payload.end());
    ds.utterances.push_back(std::move(u));
  }
  if (r.remaining() != 0) {
    throw IoError(IoErrc::kFrameCountMismatch,
                  std::to_string(r.remaining()) +
                      " bytes beyond the frames declared in the header");
  }
  return ds;
}

inline void WriteCi(const std::string& path, const CiDataset& ds) {
  detail::WriteFile(path, SerializeCi(ds));
}

inline CiDataset ReadCi(const std::string& path) {
  return ParseCi(detail::ReadFile(path));
}

inline std::vector<std::uint8_t> SerializeCodebooks(const CodebookSet& cb) {
  detail::ByteWriter w;
  w.Bytes("MVQC");
  w.U8(static_cast<std::uint8_t>(cb.n_codebooks()));
  w.U32(static_cast<std::uint32_t>(cb.dim()));
  for (double v : cb.values()) w.F64(v);
  return w.buffer();
}

inline CodebookSet ParseCodebooks(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  detail::CheckMagic(r, "MVQC");
  if (!r.Has(5)) throw IoError(IoErrc::kTruncatedHeader, "short codebook header");
  const std::size_t n = r.U8();
  const std::size_t d = r.U32();
  if (n == 0) throw IoError(IoErrc::kCodebookCountMismatch, "zero codebooks");
  CodebookSet cb(n, d);
  const std::size_t need = n * kCodebookSize * d * 8;
  if (!r.Has(need)) {
    throw IoError(IoErrc::kTruncatedPayload,
                  "codebook payload needs " + std::to_string(need) + " bytes");
  }
  for (double& v : cb.values()) v = r.F64();
  if (r.remaining() != 0) {
    throw IoError(IoErrc::kTrailingData, "bytes after codebook payload");
  }
  return cb;
}

inline void WriteCodebooks(const std::string& path, const CodebookSet& cb) {
  detail::WriteFile(path, SerializeCodebooks(cb));
}

inline CodebookSet ReadCodebooks(const std::string& path) {
  return ParseCodebooks(detail::ReadFile(path));
}

// One T x D matrix per utterance.
using EmbeddingSet = std::vector<Matrix>;

inline std::vector<std::uint8_t> SerializeEmbeddings(const EmbeddingSet& set,
                                                     std::size_t dim) {
  detail::ByteWriter w;
  w.Bytes("MVQE");
  w.U32(static_cast<std::uint32_t>(dim));
  w.U32(static_cast<std::uint32_t>(set.size()));
  for (const auto& m : set) {
    if (m.cols() != dim && m.rows() != 0) {
      throw IoError(IoErrc::kFrameCountMismatch, "embedding dimension differs");
    }
    w.U32(static_cast<std::uint32_t>(m.rows()));
    for (double v : m.data()) w.F64(v);
  }
  return w.buffer();
}

inline EmbeddingSet ParseEmbeddings(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  detail::CheckMagic(r, "MVQE");
  if (!r.Has(8)) throw IoError(IoErrc::kTruncatedHeader, "short embedding header");
  const std::size_t d = r.U32();
  const std::uint32_t count = r.U32();
  EmbeddingSet set;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!r.Has(4)) throw IoError(IoErrc::kTruncatedPayload, "missing frame count");
    const std::size_t t = r.U32();
    if (!r.Has(t * d * 8)) {
      throw IoError(IoErrc::kTruncatedPayload,
                    "utterance " + std::to_string(i) + " is cut short");
    }
    Matrix m(t, d);
    for (double& v : m.data()) v = r.F64();
    set.push_back(std::move(m));
  }
  if (r.remaining() != 0) {
    throw IoError(IoErrc::kTrailingData, "bytes after the last utterance");
  }
  return set;
}

inline void WriteEmbeddings(const std::string& path, const EmbeddingSet& set,
                            std::size_t dim) {
  detail::WriteFile(path, SerializeEmbeddings(set, dim));
}

inline EmbeddingSet ReadEmbeddings(const std::string& path) {
  return ParseEmbeddings(detail::ReadFile(path));
}

// Encodes every frame of every utterance.
inline CiDataset EncodeDataset(const CodebookSet& cb, const EmbeddingSet& set) {
  CiDataset ds;
  ds.n_codebooks = static_cast<std::uint8_t>(cb.n_codebooks());
  for (const auto& m : set) {
    UtteranceCodes u;
    u.frames = static_cast<std::uint32_t>(m.rows());
    u.indexes = EncodeAll(cb, m);
    ds.utterances.push_back(std::move(u));
  }
  return ds;
}

}  // namespace fmtasr::mvq
