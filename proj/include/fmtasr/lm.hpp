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

// External label language models for shallow fusion.

#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace fmtasr::lm {

// Next-label log-probabilities given the previous labels. Labels use the
// transducer ids 1 .. num_labels(); the returned vector has num_labels()
// entries, entry k - 1 scoring label k.
class LmScorer {
 public:
  virtual ~LmScorer() = default;
  virtual int num_labels() const = 0;
  virtual std::vector<double> LogProbs(std::span<const int> prefix) const = 0;
};

// Add-k smoothed n-gram model. Contexts shorter than order - 1 are padded on
// the left with 0 (sentence start).
class NgramLm : public LmScorer {
 public:
  NgramLm(int order, int num_labels, double add_k = 0.5)
      : order_(order), num_labels_(num_labels), add_k_(add_k) {
    if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
    if (num_labels < 1) throw std::invalid_argument("empty label set");
    if (!(add_k > 0.0)) throw std::invalid_argument("add_k must be positive");
  }

  int order() const { return order_; }
  int num_labels() const override { return num_labels_; }
  double add_k() const { return add_k_; }

  void Observe(std::span<const int> sentence) {
    std::vector<int> prefix;
    for (int label : sentence) {
      if (label < 1 || label > num_labels_) {
        throw std::out_of_range("label " + std::to_string(label) +
                                " outside the model's label set");
      }
      auto& row = Row(Context(prefix));
      row[label - 1] += 1.0;
      prefix.push_back(label);
    }
  }

  std::vector<double> LogProbs(std::span<const int> prefix) const override {
    std::vector<double> out(num_labels_);
    const auto it = counts_.find(Context(prefix));
    double total = 0.0;
    if (it != counts_.end()) {
      for (double c : it->second) total += c;
    }
    const double denom = std::log(total + add_k_ * num_labels_);
    for (int k = 0; k < num_labels_; ++k) {
      const double c = it == counts_.end() ? 0.0 : it->second[k];
      out[k] = std::log(c + add_k_) - denom;
    }
    return out;
  }

  nlohmann::json ToJson() const {
    nlohmann::json contexts = nlohmann::json::array();
    for (const auto& [ctx, row] : counts_) {
      contexts.push_back({{"context", ctx}, {"counts", row}});
    }
    return {{"type", "ngram"},
            {"order", order_},
            {"num_labels", num_labels_},
            {"add_k", add_k_},
            {"contexts", contexts}};
  }

  static NgramLm FromJson(const nlohmann::json& j) {
    if (j.value("type", "") != "ngram") {
      throw std::runtime_error("not an n-gram LM description");
    }
    NgramLm lm(j.at("order").get<int>(), j.at("num_labels").get<int>(),
               j.at("add_k").get<double>());
    for (const auto& c : j.at("contexts")) {
      auto ctx = c.at("context").get<std::vector<int>>();
      auto row = c.at("counts").get<std::vector<double>>();
      if (static_cast<int>(ctx.size()) != lm.order_ - 1 ||
          static_cast<int>(row.size()) != lm.num_labels_) {
        throw std::runtime_error("malformed n-gram context entry");
      }
      lm.counts_[std::move(ctx)] = std::move(row);
    }
    return lm;
  }

  void Save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << ToJson().dump() << "\n";
  }

  static NgramLm Load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return FromJson(nlohmann::json::parse(in));
  }

 private:
  std::vector<int> Context(std::span<const int> prefix) const {
    std::vector<int> ctx(order_ - 1, 0);
    const int n = std::min<int>(order_ - 1, static_cast<int>(prefix.size()));
    for (int i = 0; i < n; ++i) {
      ctx[order_ - 1 - n + i] = prefix[prefix.size() - n + i];
    }
    return ctx;
  }

  std::vector<double>& Row(const std::vector<int>& ctx) {
    auto [it, inserted] = counts_.try_emplace(ctx);
    if (inserted) it->second.assign(num_labels_, 0.0);
    return it->second;
  }

  int order_;
  int num_labels_;
  double add_k_;
  std::map<std::vector<int>, std::vector<double>> counts_;
};

}  // namespace fmtasr::lm
