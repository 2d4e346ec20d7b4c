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


#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fmtasr/harness.hpp"
#include "fmtasr/lm.hpp"
#include "fmtasr/metrics.hpp"
#include "fmtasr/mvq.hpp"
#include "fmtasr/mvq_io.hpp"
#include "fmtasr/report.hpp"
#include "fmtasr/toy_model.hpp"
#include "fmtasr/toy_task.hpp"
#include "fmtasr/transcript_io.hpp"
#include "json.hpp"

namespace {

using namespace fmtasr;

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

int RunEval(const std::string& ref_path, const std::string& hyp_path,
            textnorm::FileFormat format, metrics::ReportFormat report) {
  const auto refs = textnorm::ReadUtterances(ref_path, format);
  const auto hyps = textnorm::ReadUtterances(hyp_path, format);
  if (refs.size() != hyps.size()) {
    throw metrics::MetricsError("reference file has " + std::to_string(refs.size()) +
                                " utterances, hypothesis file has " +
                                std::to_string(hyps.size()));
  }
  std::vector<std::string> ref_text, hyp_text;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (format == textnorm::FileFormat::kJsonl && refs[i].id != hyps[i].id) {
      throw metrics::MetricsError("utterance " + std::to_string(i + 1) + ": id \"" +
                                  refs[i].id + "\" does not match \"" + hyps[i].id + "\"");
    }
    ref_text.push_back(refs[i].text);
    hyp_text.push_back(hyps[i].text);
  }
  const auto r = metrics::ComputeReport(metrics::PreprocessAll(ref_text),
                                        metrics::PreprocessAll(hyp_text));
  std::cout << metrics::FormatReport(r, report);
  return 0;
}

int RunMvqTrain(const std::string& input, int n, int iters, std::uint64_t seed,
                const std::string& out) {
  const auto set = mvq::ReadEmbeddings(input);
  const auto trained = mvq::TrainCodebooks(harness::StackRows(set), n, iters, seed);
  mvq::WriteCodebooks(out, trained.codebooks);
  for (std::size_t s = 0; s < trained.stages.size(); ++s) {
    const auto& mse = trained.stages[s].mse;
    std::fprintf(stderr, "codebook %zu: mse %.6g -> %.6g\n", s, mse.front(), mse.back());
  }
  return 0;
}

int RunMvqEncode(const std::string& codebooks, const std::string& input,
                 const std::string& out) {
  const auto cb = mvq::ReadCodebooks(codebooks);
  mvq::WriteCi(out, mvq::EncodeDataset(cb, mvq::ReadEmbeddings(input)));
  return 0;
}

int RunDecode(const std::string& model_path, const std::string& input, int beam,
              const std::string& lm_path, double lm_weight) {
  const auto model = harness::LoadModel(model_path);
  const harness::ToyTaskConfig task;
  const auto inv = harness::ToyInventory(task);
  if (model.config.vocab != inv.size()) {
    throw std::runtime_error("model vocabulary does not match the toy inventory");
  }
  std::unique_ptr<lm::NgramLm> lm;
  if (!lm_path.empty()) lm = std::make_unique<lm::NgramLm>(lm::NgramLm::Load(lm_path));
  auto opts = harness::EvalBeamOptions();
  opts.beam = beam;
  opts.lm_weight = lm ? lm_weight : 0.0;
  const auto features = mvq::ReadEmbeddings(input);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto hyp = harness::DecodeFrames(model, features[i], opts, lm.get());
    const nlohmann::json line{{"id", std::to_string(i + 1)},
                              {"text", harness::Detokenize(inv, hyp.tokens)},
                              {"score", hyp.score}};
    std::cout << line.dump() << "\n";
  }
  return 0;
}

struct TrainToyArgs {
  std::string kd = "on";
  double alpha = 0.1;
  int steps = 1000;
  std::uint64_t seed = 1;
  int train_size = 2048;
  std::string out;
  std::string trace;
  std::string ci;
};

int RunTrainToy(const TrainToyArgs& a) {
  harness::AblationConfig defaults;
  const auto data = harness::GenerateDataset(a.train_size, a.seed, defaults.task);
  harness::TrainConfig tc = defaults.train;
  tc.use_kd = a.kd == "on";
  tc.alpha = a.alpha;
  tc.steps = a.steps;
  tc.seed = a.seed;
  tc.model.feature_dim = harness::FeatureDim(defaults.task);
  tc.model.vocab = harness::ToyInventory(defaults.task).size();
  const std::string ci_path = a.ci.empty() ? a.out + ".ci" : a.ci;
  auto loader = [&] {
    const auto prepared =
        harness::PrepareCi(data, tc.model.n_codebooks, defaults.mvq_iters, a.seed);
    mvq::WriteCi(ci_path, prepared.ci);
    return mvq::ReadCi(ci_path);
  };
  const auto result = harness::Train(tc, data, loader);
  harness::SaveModel(a.out, result.model);
  if (!a.trace.empty()) {
    auto out = OpenOut(a.trace);
    out << "step,rnnt_loss,kd_loss,fused_loss\n";
    char buf[128];
    for (const auto& row : result.trace) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", row.step, row.rnnt_loss,
                    row.kd_loss, row.fused_loss);
      out << buf;
    }
  }
  const auto& last = result.trace.back();
  std::fprintf(stderr, "step %d: rnnt %.4f kd %.4f fused %.4f\n", last.step, last.rnnt_loss,
               last.kd_loss, last.fused_loss);
  return 0;
}

int RunToyData(int n, std::uint64_t seed, const std::string& features,
               const std::string& refs, const std::string& teacher,
               const std::string& lm_out) {
  const harness::ToyTaskConfig task;
  const auto data = harness::GenerateDataset(n, seed, task);
  mvq::EmbeddingSet feats;
  for (const auto& u : data) feats.push_back(u.frames);
  mvq::WriteEmbeddings(features, feats, harness::FeatureDim(task));
  if (!teacher.empty()) {
    mvq::WriteEmbeddings(teacher, harness::TeacherSet(data), task.teacher_dim);
  }
  if (!refs.empty()) {
    auto out = OpenOut(refs);
    for (std::size_t i = 0; i < data.size(); ++i) {
      out << nlohmann::json{{"id", std::to_string(i + 1)}, {"text", data[i].text}}.dump()
          << "\n";
    }
  }
  if (!lm_out.empty()) {
    lm::NgramLm lm(2, static_cast<int>(harness::ToyInventory(task).size()) - 1);
    for (const auto& u : data) lm.Observe(u.target);
    lm.Save(lm_out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fmtasr: punctuation- and case-aware ASR evaluation and distillation kit"};
  app.require_subcommand(1);

  auto* eval = app.add_subcommand("eval", "Score hypotheses against references");
  std::string ref, hyp, format = "text", report = "table";
  eval->add_option("--ref", ref, "Reference transcripts")->required()->check(CLI::ExistingFile);
  eval->add_option("--hyp", hyp, "Hypothesis transcripts")->required()->check(CLI::ExistingFile);
  eval->add_option("--format", format, "Input format")
      ->check(CLI::IsMember({"text", "jsonl"}));
  eval->add_option("--report", report, "Report format")
      ->check(CLI::IsMember({"table", "json", "csv"}));

  auto* train = app.add_subcommand("mvq-train", "Train residual codebooks on embeddings");
  std::string input, out, codebooks;
  int n = 16, iters = 20;
  std::uint64_t seed = 1;
  train->add_option("--input", input, "Embedding file")->required();
  train->add_option("--n", n, "Number of codebooks")->check(CLI::Range(1, 255));
  train->add_option("--iters", iters, "Lloyd iterations per codebook")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--seed", seed, "Random seed");
  train->add_option("--out", out, "Codebook file")->required();

  auto* encode = app.add_subcommand("mvq-encode", "Encode embeddings to codebook indexes");
  encode->add_option("--codebooks", codebooks, "Codebook file")->required();
  encode->add_option("--input", input, "Embedding file")->required();
  encode->add_option("--out", out, "CI file")->required();

  auto* decode = app.add_subcommand("decode", "Beam-search decode toy features");
  std::string model, lm_path;
  int beam = 4;
  double lm_weight = 0.3;
  decode->add_option("--model", model, "Model file")->required();
  decode->add_option("--input", input, "Feature file")->required();
  decode->add_option("--beam", beam, "Beam width")->check(CLI::PositiveNumber);
  decode->add_option("--lm", lm_path, "N-gram LM (JSON)");
  decode->add_option("--lm-weight", lm_weight, "Shallow-fusion weight")
      ->check(CLI::NonNegativeNumber);

  auto* toy = app.add_subcommand("train-toy", "Train the toy transducer");
  TrainToyArgs ta;
  toy->add_option("--kd", ta.kd, "Codebook-index distillation")
      ->check(CLI::IsMember({"on", "off"}));
  toy->add_option("--alpha", ta.alpha, "Distillation weight")->check(CLI::NonNegativeNumber);
  toy->add_option("--steps", ta.steps, "Training steps")->check(CLI::PositiveNumber);
  toy->add_option("--seed", ta.seed, "Random seed");
  toy->add_option("--train-size", ta.train_size, "Training utterances")
      ->check(CLI::PositiveNumber);
  toy->add_option("--out", ta.out, "Model file")->required();
  toy->add_option("--trace", ta.trace, "Loss trace CSV");
  toy->add_option("--ci", ta.ci, "CI file written and read when distilling");

  auto* data = app.add_subcommand("toy-data", "Generate a toy dataset");
  std::string refs, teacher, lm_out;
  int count = 16;
  data->add_option("--n", count, "Utterances")->check(CLI::PositiveNumber);
  data->add_option("--seed", seed, "Random seed");
  data->add_option("--features", out, "Feature file")->required();
  data->add_option("--refs", refs, "Reference JSONL");
  data->add_option("--teacher", teacher, "Teacher embedding file");
  data->add_option("--lm-out", lm_out, "Bigram LM fitted on the token sequences");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval) {
      return RunEval(ref, hyp,
                     format == "jsonl" ? textnorm::FileFormat::kJsonl
                                       : textnorm::FileFormat::kText,
                     report == "json"  ? metrics::ReportFormat::kJson
                     : report == "csv" ? metrics::ReportFormat::kCsv
                                       : metrics::ReportFormat::kTable);
    }
    if (*train) return RunMvqTrain(input, n, iters, seed, out);
    if (*encode) return RunMvqEncode(codebooks, input, out);
    if (*decode) return RunDecode(model, input, beam, lm_path, lm_weight);
    if (*toy) return RunTrainToy(ta);
    if (*data) return RunToyData(count, seed, out, refs, teacher, lm_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
