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

// Utterance files: plain text (one utterance per line) or JSONL with
// {"id": ..., "text": ...} objects.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace fmtasr::textnorm {

enum class FileFormat { kText, kJsonl };

struct Utterance {
  std::string id;
  std::string text;
};

inline std::vector<Utterance> ParseUtterances(std::istream& in,
                                              FileFormat format) {
  std::vector<Utterance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (format == FileFormat::kText) {
      out.push_back({std::to_string(line_no), line});
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": invalid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("text") ||
        !obj["text"].is_string()) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": expected an object with a string \"text\"");
    }
    Utterance u;
    u.text = obj["text"].get<std::string>();
    if (obj.contains("id")) {
      u.id = obj["id"].is_string() ? obj["id"].get<std::string>()
                                   : obj["id"].dump();
    } else {
      u.id = std::to_string(line_no);
    }
    out.push_back(std::move(u));
  }
  return out;
}

inline std::vector<Utterance> ReadUtterances(const std::string& path,
                                             FileFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return ParseUtterances(in, format);
}

}  // namespace fmtasr::textnorm
