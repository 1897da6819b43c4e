// Copyright 2026 The BiasProbe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "biasprobe/pipeline.h"

#include <algorithm>
#include <memory>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "biasprobe/classify.h"
#include "biasprobe/corpus.h"
#include "biasprobe/io.h"
#include "biasprobe/sandbox.h"

namespace biasprobe {
namespace {

namespace fs = std::filesystem;

#define BP_RETURN_IF_ERROR(expr)                 \
  do {                                           \
    absl::Status bp_status_ = (expr);            \
    if (!bp_status_.ok()) return bp_status_;     \
  } while (0)

bool AnyCodeExperiment(const RunConfig& config) {
  return std::any_of(config.experiments.begin(), config.experiments.end(),
                     [](Experiment e) {
                       return e == Experiment::kFraming ||
                              e == Experiment::kAnchoring;
                     });
}

absl::StatusOr<std::vector<CodeProblem>> LoadCorpus(const RunConfig& config,
                                                    std::ostream& log) {
  if (config.corpus.empty()) {
    return absl::InvalidArgumentError(
        "--corpus is required for framing and anchoring");
  }
  if (!fs::exists(config.corpus)) {
    return absl::NotFoundError(
        absl::StrCat("corpus not found: ", config.corpus.string()));
  }
  absl::StatusOr<CorpusLoad> load = LoadProblems(config.corpus);
  if (!load.ok()) return load.status();
  for (const LoadError& e : load->errors) {
    log << "corpus: skipped line " << e.line_number << ": " << e.message << "\n";
  }
  return std::move(load->problems);
}

absl::StatusOr<std::vector<TransformedPrompt>> ReadExperimentManifest(
    const OutputLayout& layout, Experiment e) {
  const fs::path path = layout.Manifest(e);
  if (!fs::exists(path)) {
    return absl::NotFoundError(absl::StrCat("missing manifest ", path.string(),
                                            "; run generate first"));
  }
  return ReadManifest(path);
}

absl::StatusOr<std::map<std::string, CompletionRecord>> ReadExistingStore(
    const OutputLayout& layout) {
  if (!fs::exists(layout.Store())) {
    return absl::NotFoundError(absl::StrCat(
        "missing run store ", layout.Store().string(), "; run the run stage first"));
  }
  return ReadRunStore(layout.Store());
}

std::string JoinKeys(const std::vector<std::string>& keys) {
  return absl::StrJoin(keys, "/");
}

}  // namespace

bool NeedsSeed(Experiment experiment) {
  return experiment == Experiment::kFraming ||
         experiment == Experiment::kDeletion;
}

absl::Status ValidateConfig(const RunConfig& config) {
  if (config.experiments.empty()) {
    return absl::InvalidArgumentError("no experiments selected");
  }
  if (config.out.empty()) {
    return absl::InvalidArgumentError("--out is required");
  }
  if (config.parallelism < 1) {
    return absl::InvalidArgumentError("--parallelism must be at least 1");
  }
  if (config.max_failure_fraction < 0 || config.max_failure_fraction > 1) {
    return absl::InvalidArgumentError(
        "failure budget must be a fraction in [0, 1]");
  }
  const ExperimentParams& p = config.params;
  for (Experiment e : config.experiments) {
    if (NeedsSeed(e) && !config.seed.has_value()) {
      return absl::InvalidArgumentError(
          absl::StrCat("--seed is required for ", Name(e)));
    }
    switch (e) {
      case Experiment::kFraming:
        if (p.framing_lines.empty()) {
          return absl::InvalidArgumentError("framing needs at least one line");
        }
        break;
      case Experiment::kAnchoring:
        if (p.min_lines > p.max_lines || p.max_lines > kMaxAnchorLines) {
          return absl::InvalidArgumentError(absl::StrFormat(
              "anchoring n_lines range %d..%d must lie within 0..%d",
              p.min_lines, p.max_lines, kMaxAnchorLines));
        }
        if (p.anchor_kinds.empty()) {
          return absl::InvalidArgumentError("anchoring needs an anchor kind");
        }
        if (std::count(p.anchor_kinds.begin(), p.anchor_kinds.end(),
                       AnchorKind::kNone) > 0) {
          return absl::InvalidArgumentError(
              "the baseline is not an anchor kind; it is always emitted");
        }
        break;
      case Experiment::kMathEq:
        if (p.orders.empty() || p.matheq_styles.empty()) {
          return absl::InvalidArgumentError(
              "matheq needs at least one order and one style");
        }
        break;
      case Experiment::kAttribute:
        if (p.placements.empty()) {
          return absl::InvalidArgumentError("attribute needs a placement");
        }
        break;
      case Experiment::kDeletion:
        if (p.deletion_styles.empty()) {
          return absl::InvalidArgumentError("deletion needs a style");
        }
        break;
      case Experiment::kGpt3Anchoring:
        if (p.gpt3_percents.empty()) {
          return absl::InvalidArgumentError("gpt3_anchoring needs a percent");
        }
        for (int percent : p.gpt3_percents) {
          if (percent < 0 || percent > 100) {
            return absl::InvalidArgumentError(
                absl::StrCat("anchor percent ", percent, " outside 0..100"));
          }
          if (percent != 20 && percent != 50 && !p.allow_custom_percent) {
            return absl::InvalidArgumentError(absl::StrCat(
                "anchor percent ", percent,
                " needs allow_custom_percent; the studied values are 20 and 50"));
          }
        }
        break;
      case Experiment::kGpt3Framing:
        break;
    }
  }
  return absl::OkStatus();
}

fs::path OutputLayout::Manifest(Experiment e) const {
  return root / "manifests" / absl::StrCat(Name(e), ".jsonl");
}

fs::path OutputLayout::Classifications(Experiment e) const {
  return root / "classifications" / absl::StrCat(Name(e), ".jsonl");
}

fs::path OutputLayout::Reports(Experiment e) const {
  return root / "reports" / std::string(Name(e));
}

std::vector<size_t> FilterCounts(std::span<const CodeProblem> problems) {
  std::vector<size_t> counts;
  for (size_t n = 0; n <= kMaxAnchorLines; ++n) {
    counts.push_back(FilterBySolutionLength(problems, n).size());
  }
  return counts;
}

absl::StatusOr<std::vector<TransformedPrompt>> GenerateExperiment(
    Experiment experiment, std::span<const CodeProblem> problems,
    const RunConfig& config) {
  const ExperimentParams& p = config.params;
  std::vector<TransformedPrompt> out;
  auto extend = [&out](std::vector<TransformedPrompt> more) {
    out.insert(out.end(), std::make_move_iterator(more.begin()),
               std::make_move_iterator(more.end()));
  };
  switch (experiment) {
    case Experiment::kFraming: {
      FramingOptions options;
      options.seed = config.seed.value_or(0);
      options.lines = p.framing_lines;
      absl::StatusOr<std::vector<TransformedPrompt>> probes =
          FramingPrompts(problems, options);
      if (!probes.ok()) return probes.status();
      extend(std::move(*probes));
      break;
    }
    case Experiment::kAnchoring: {
      AnchoringOptions options;
      options.kinds = p.anchor_kinds;
      options.min_lines = p.min_lines;
      options.max_lines = p.max_lines;
      absl::StatusOr<std::vector<TransformedPrompt>> probes =
          AnchoringPrompts(problems, options);
      if (!probes.ok()) return probes.status();
      extend(std::move(*probes));
      if (p.anchoring_renamed_control) {
        options.renamed = true;
        options.include_baseline = false;
        probes = AnchoringPrompts(problems, options);
        if (!probes.ok()) return probes.status();
        extend(std::move(*probes));
      }
      break;
    }
    case Experiment::kMathEq:
      for (PromptStyle style : p.matheq_styles) {
        for (OperationOrder order : p.orders) {
          extend(MathEqPrompts(order, style));
        }
      }
      break;
    case Experiment::kAttribute:
      for (NamePlacement placement : p.placements) {
        extend(AttributePrompts(placement));
      }
      break;
    case Experiment::kDeletion:
      for (DeletionStyle style : p.deletion_styles) {
        extend(DeletionPrompts(style, config.seed.value_or(0)));
      }
      break;
    case Experiment::kGpt3Anchoring:
      for (int percent : p.gpt3_percents) {
        absl::StatusOr<std::vector<TransformedPrompt>> probes =
            Gpt3AnchoringPrompts(percent, p.allow_custom_percent);
        if (!probes.ok()) return probes.status();
        extend(std::move(*probes));
      }
      break;
    case Experiment::kGpt3Framing:
      extend(Gpt3FramingPrompts());
      break;
  }
  BP_RETURN_IF_ERROR(ValidateManifest(out));
  return out;
}

absl::Status GenerateStage(const RunConfig& config, std::ostream& log) {
  BP_RETURN_IF_ERROR(ValidateConfig(config));
  std::vector<CodeProblem> problems;
  if (AnyCodeExperiment(config)) {
    absl::StatusOr<std::vector<CodeProblem>> loaded = LoadCorpus(config, log);
    if (!loaded.ok()) return loaded.status();
    problems = std::move(*loaded);
  }
  const OutputLayout layout{config.out};
  for (Experiment e : config.experiments) {
    absl::StatusOr<std::vector<TransformedPrompt>> probes =
        GenerateExperiment(e, problems, config);
    if (!probes.ok()) {
      return absl::Status(probes.status().code(),
                          absl::StrCat(Name(e), ": ", probes.status().message()));
    }
    BP_RETURN_IF_ERROR(WriteManifest(layout.Manifest(e), *probes));
    log << Name(e) << ": " << probes->size() << " probes -> "
        << layout.Manifest(e).string() << "\n";
    if (e == Experiment::kAnchoring) {
      const std::vector<size_t> counts = FilterCounts(problems);
      log << "  n_lines  problems\n";
      for (size_t n = 0; n < counts.size(); ++n) {
        log << absl::StrFormat("  %7d  %8d\n", n, counts[n]);
      }
    }
  }
  return absl::OkStatus();
}

absl::Status RunStage(const RunConfig& config, std::ostream& log) {
  BP_RETURN_IF_ERROR(ValidateConfig(config));
  const OutputLayout layout{config.out};
  std::vector<TransformedPrompt> probes;
  for (Experiment e : config.experiments) {
    absl::StatusOr<std::vector<TransformedPrompt>> manifest =
        ReadExperimentManifest(layout, e);
    if (!manifest.ok()) return manifest.status();
    probes.insert(probes.end(), manifest->begin(), manifest->end());
  }
  if (fs::exists(layout.Store()) && !config.resume) {
    return absl::AlreadyExistsError(
        absl::StrCat("run store ", layout.Store().string(),
                     " exists; pass --resume or choose a fresh --out"));
  }
  if (config.backend_spec.empty()) {
    return absl::InvalidArgumentError("--backend is required");
  }
  absl::StatusOr<BackendConfig> backend_config =
      ParseBackendSpec(config.backend_spec);
  if (!backend_config.ok()) {
    return absl::InvalidArgumentError(backend_config.status().message());
  }
  backend_config->seed = config.seed.value_or(0);
  backend_config->parallelism = config.parallelism;
  backend_config->requests_per_minute = config.requests_per_minute;
  backend_config->request_timeout = config.request_timeout;

  std::vector<CodeProblem> problems;
  if (AnyCodeExperiment(config) &&
      backend_config->kind == BackendKind::kSynthetic) {
    absl::StatusOr<std::vector<CodeProblem>> loaded = LoadCorpus(config, log);
    if (!loaded.ok()) return loaded.status();
    problems = std::move(*loaded);
  }
  absl::StatusOr<std::unique_ptr<Backend>> backend =
      MakeBackend(*backend_config, problems);
  if (!backend.ok()) {
    // A missing key or unreadable replay file is a configuration problem.
    return absl::Status(backend.status().code() == absl::StatusCode::kNotFound
                            ? absl::StatusCode::kNotFound
                            : absl::StatusCode::kInvalidArgument,
                        backend.status().message());
  }
  BatchOptions options;
  options.parallelism = config.parallelism;
  options.requests_per_minute = config.requests_per_minute;
  options.resume = config.resume;
  absl::StatusOr<BatchSummary> summary =
      RunBatch(probes, **backend, layout.Store(), options);
  if (!summary.ok()) return summary.status();
  log << (*backend)->id() << ": " << summary->total << " probes, "
      << summary->skipped << " skipped, " << summary->issued << " issued, "
      << summary->failed << " failed -> " << layout.Store().string() << "\n";
  if (summary->issued > 0 &&
      static_cast<double>(summary->failed) >
          config.max_failure_fraction * static_cast<double>(summary->issued)) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "%d of %d requests failed, above the %.2f failure budget; rerun with "
        "--resume to retry them",
        summary->failed, summary->issued, config.max_failure_fraction));
  }
  return absl::OkStatus();
}

absl::Status ClassifyStage(const RunConfig& config, std::ostream& log) {
  BP_RETURN_IF_ERROR(ValidateConfig(config));
  const OutputLayout layout{config.out};
  absl::StatusOr<std::map<std::string, CompletionRecord>> store =
      ReadExistingStore(layout);
  if (!store.ok()) return store.status();
  std::vector<CodeProblem> problems;
  if (AnyCodeExperiment(config)) {
    absl::StatusOr<std::vector<CodeProblem>> loaded = LoadCorpus(config, log);
    if (!loaded.ok()) return loaded.status();
    problems = std::move(*loaded);
  }
  std::unique_ptr<SandboxPool> sandbox;
  if (!config.sandbox_command.empty()) {
    sandbox = std::make_unique<SandboxPool>(config.sandbox_command,
                                            config.parallelism);
  }
  ClassifyOptions options;
  options.parallelism = config.parallelism;
  for (Experiment e : config.experiments) {
    absl::StatusOr<std::vector<TransformedPrompt>> probes =
        ReadExperimentManifest(layout, e);
    if (!probes.ok()) return probes.status();
    absl::StatusOr<std::vector<Classification>> classified =
        ClassifyRun(*probes, *store, problems, sandbox.get(), options);
    if (!classified.ok()) {
      return absl::Status(
          classified.status().code(),
          absl::StrCat(Name(e), ": ", classified.status().message()));
    }
    BP_RETURN_IF_ERROR(
        WriteClassifications(layout.Classifications(e), *classified));
    log << Name(e) << ": " << classified->size() << " classifications -> "
        << layout.Classifications(e).string() << "\n";
  }
  return absl::OkStatus();
}

absl::Status ReportStage(const RunConfig& config, std::ostream& log) {
  BP_RETURN_IF_ERROR(ValidateConfig(config));
  const OutputLayout layout{config.out};
  RunSummary summary;
  summary.seed = config.seed.value_or(0);
  if (!config.corpus.empty() && fs::exists(config.corpus)) {
    absl::StatusOr<std::string> raw = ReadFileToString(config.corpus);
    if (!raw.ok()) return raw.status();
    summary.corpus_sha256 = Sha256Hex(*raw);
  }
  std::string label = config.model_label;
  if (fs::exists(layout.Store())) {
    absl::StatusOr<std::map<std::string, CompletionRecord>> store =
        ReadRunStore(layout.Store());
    if (!store.ok()) return store.status();
    if (!store->empty()) summary.backend_id = store->begin()->second.backend_id;
  }
  if (summary.backend_id.empty()) summary.backend_id = config.backend_spec;
  if (label.empty()) label = summary.backend_id;

  for (Experiment e : config.experiments) {
    absl::StatusOr<std::vector<TransformedPrompt>> probes =
        ReadExperimentManifest(layout, e);
    if (!probes.ok()) return probes.status();
    const fs::path cpath = layout.Classifications(e);
    if (!fs::exists(cpath)) {
      return absl::NotFoundError(absl::StrCat(
          "missing classifications ", cpath.string(), "; run classify first"));
    }
    absl::StatusOr<std::vector<Classification>> classifications =
        ReadClassifications(cpath);
    if (!classifications.ok()) return classifications.status();
    absl::StatusOr<std::vector<ReportTable>> tables =
        Aggregate(*probes, *classifications, e, label);
    if (!tables.ok()) {
      return absl::Status(tables.status().code(),
                          absl::StrCat(Name(e), ": ", tables.status().message()));
    }
    RunSummary s = summary;
    s.cardinalities[std::string(Name(e))] = probes->size();
    for (const ReportTable& t : *tables) {
      for (const ReportRow& row : t.rows) {
        s.cardinalities[absl::StrCat(t.name, "/", JoinKeys(row.keys))] =
            row.count;
      }
    }
    if (e == Experiment::kAnchoring) {
      absl::StatusOr<std::vector<CodeProblem>> problems = LoadCorpus(config, log);
      if (!problems.ok()) return problems.status();
      const std::vector<size_t> counts = FilterCounts(*problems);
      for (size_t n = 0; n < counts.size(); ++n) {
        s.filter_counts[absl::StrCat("n", n)] = counts[n];
      }
    }
    BP_RETURN_IF_ERROR(EmitReports(layout.Reports(e), *tables, s));
    log << Name(e) << ": " << tables->size() << " tables -> "
        << layout.Reports(e).string() << "\n";
    for (const ReportTable& t : *tables) log << ToCsv(t);
  }
  return absl::OkStatus();
}

absl::Status AllStages(const RunConfig& config, std::ostream& log) {
  BP_RETURN_IF_ERROR(GenerateStage(config, log));
  BP_RETURN_IF_ERROR(RunStage(config, log));
  BP_RETURN_IF_ERROR(ClassifyStage(config, log));
  return ReportStage(config, log);
}

int ExitCodeFor(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kOk:
      return 0;
    case absl::StatusCode::kNotFound:
    case absl::StatusCode::kFailedPrecondition:
      return 2;
    case absl::StatusCode::kResourceExhausted:
    case absl::StatusCode::kUnavailable:
      return 3;
    default:
      return 1;
  }
}

}  // namespace biasprobe
