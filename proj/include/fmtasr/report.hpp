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

// Rendering of MetricsReport as a text table, JSON or CSV. Rates are
// percentages rounded to two decimals; F1 fields are fractions.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

#include "fmtasr/metrics.hpp"
#include "json.hpp"

namespace fmtasr::metrics {

enum class ReportFormat { kTable, kJson, kCsv };

namespace detail {

inline double Round(double v, double scale) {
  return std::round(v * scale) / scale;
}

inline nlohmann::json RateJson(double v) {
  if (!std::isfinite(v)) return nullptr;
  return Round(v, 100.0);
}

inline nlohmann::json PrfJson(const std::optional<Prf>& prf) {
  if (!prf) return nullptr;
  return {{"p", Round(prf->precision, 1e4)},
          {"r", Round(prf->recall, 1e4)},
          {"f1", Round(prf->f1, 1e4)}};
}

inline std::string Fixed(double v, int digits) {
  if (!std::isfinite(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string PrfCell(const std::optional<Prf>& prf, double Prf::*field) {
  return prf ? Fixed((*prf).*field, 4) : "";
}

}  // namespace detail

inline nlohmann::json ReportToJson(const MetricsReport& r) {
  return {{"wer", detail::RateJson(r.wer)},
          {"wer_c", detail::RateJson(r.wer_c)},
          {"wer_pc", detail::RateJson(r.wer_pc)},
          {"per", detail::RateJson(r.per)},
          {"zero_wer_fraction", detail::Round(r.zero_wer_fraction(), 1e4)},
          {"punct", detail::PrfJson(r.f1.punct)},
          {"capit", detail::PrfJson(r.f1.capit)}};
}

inline std::string FormatReport(const MetricsReport& r, ReportFormat format) {
  using detail::Fixed;
  using detail::PrfCell;
  switch (format) {
    case ReportFormat::kJson:
      return ReportToJson(r).dump() + "\n";
    case ReportFormat::kCsv:
      return "wer,wer_c,wer_pc,per,zero_wer_fraction,punct_p,punct_r,"
             "punct_f1,capit_p,capit_r,capit_f1\n" +
             Fixed(r.wer, 2) + "," + Fixed(r.wer_c, 2) + "," +
             Fixed(r.wer_pc, 2) + "," + Fixed(r.per, 2) + "," +
             Fixed(r.zero_wer_fraction(), 4) + "," +
             PrfCell(r.f1.punct, &Prf::precision) + "," +
             PrfCell(r.f1.punct, &Prf::recall) + "," +
             PrfCell(r.f1.punct, &Prf::f1) + "," +
             PrfCell(r.f1.capit, &Prf::precision) + "," +
             PrfCell(r.f1.capit, &Prf::recall) + "," +
             PrfCell(r.f1.capit, &Prf::f1) + "\n";
    case ReportFormat::kTable:
      break;
  }
  std::string out;
  out += "WER     " + Fixed(r.wer, 2) + " %\n";
  out += "WER C   " + Fixed(r.wer_c, 2) + " %\n";
  out += "WER PC  " + Fixed(r.wer_pc, 2) + " %\n";
  out += "PER     " + Fixed(r.per, 2) + " %\n";
  out += "WER=0   " + std::to_string(r.f1.zero_wer_count) + " / " +
         std::to_string(r.f1.total_count) + "\n";
  auto prf_line = [&](const char* name, const std::optional<Prf>& prf) {
    if (!prf) return std::string(name) + "  n/a (no zero-WER samples)\n";
    return std::string(name) + "  P " + Fixed(prf->precision, 4) + "  R " +
           Fixed(prf->recall, 4) + "  F1 " + Fixed(prf->f1, 4) + "\n";
  };
  out += prf_line("Punct ", r.f1.punct);
  out += prf_line("Capit ", r.f1.capit);
  return out;
}

}  // namespace fmtasr::metrics
