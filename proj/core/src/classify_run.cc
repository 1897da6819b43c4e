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

#include <algorithm>
#include <atomic>
#include <thread>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "biasprobe/classify.h"

namespace biasprobe {
namespace {

constexpr char kFramingTargetPrefix[] = "framing_line.";

absl::StatusOr<Formula> Reference(const TransformedPrompt& probe,
                                  absl::string_view key) {
  std::optional<std::string> text = probe.Reference(key);
  if (!text.has_value()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "probe ", probe.probe_id, " lacks reference '", key, "'"));
  }
  return ParseFormula(*text);
}

bool Distinguishable(const TransformedPrompt& probe) {
  return probe.Reference(refkey::kDistinguishable) != "false";
}

void AddLineFlags(const TransformedPrompt& probe, absl::string_view completion,
                  Classification& c) {
  if (probe.experiment == Experiment::kFraming) {
    for (const DetectionTarget& t : probe.detection_targets) {
      const std::string name = t.name == "framing_line"
                                   ? std::string(flag::kFramingLine)
                                   : t.name;
      c.flags.emplace_back(name, DetectLine(completion, t.text));
    }
    return;
  }
  const auto& cond = std::get<AnchoringCondition>(probe.condition);
  if (cond.kind == AnchorKind::kNone) return;
  const AnchorFragments f = DetectAnchorFragments(completion);
  if (cond.kind == AnchorKind::kPrintVar) {
    c.flags.emplace_back(flag::kForVar, f.for_var);
    c.flags.emplace_back(flag::kPrintVar, f.print_var);
  } else {
    c.flags.emplace_back(flag::kReturnsTmp, f.returns_tmp);
  }
  const DetectionTarget* continuation = probe.FindTarget("anchor_continuation");
  c.flags.emplace_back(flag::kExactCopy,
                       continuation != nullptr &&
                           DetectExactCopy(completion, continuation->text));
}

absl::Status ClassifyFunctional(const TransformedPrompt& probe,
                                 absl::string_view completion,
                                 const CodeProblem* problem,
                                 SandboxClient* sandbox, Classification& c) {
  AddLineFlags(probe, completion, c);
  if (sandbox == nullptr) {
    c.category = category::kUnevaluated;
    return absl::OkStatus();
  }
  if (problem == nullptr) {
    return absl::NotFoundError(
        absl::StrCat("probe ", probe.probe_id, " has no corpus problem"));
  }
  SandboxJob job;
  job.job_id = probe.probe_id;
  job.timeout_seconds = kFunctionalTimeoutSeconds;
  job.payload = FunctionalPayload{
      ExecutablePrompt(probe), std::string(completion), problem->test,
      probe.Reference(refkey::kEntryPoint).value_or(problem->entry_point)};
  absl::StatusOr<SandboxResult> result = sandbox->Run(job);
  if (!result.ok()) return result.status();
  c.functional_pass = result->status == JobStatus::kPassed;
  c.category = *c.functional_pass ? category::kPassed : category::kFailed;
  if (!*c.functional_pass) {
    c.notes = absl::StrCat(Name(result->status), " ", result->error_class);
  }
  return absl::OkStatus();
}

// Runs the candidate on the plan for (a, b); nullopt outputs mean the
// candidate could not be evaluated, with the reason in *why.
absl::StatusOr<std::optional<std::vector<ProbeOutcome>>> EvaluateCandidate(
    const TransformedPrompt& probe, absl::string_view completion,
    std::span<const ProbeInput> inputs, SandboxClient* sandbox,
    std::string* why) {
  if (sandbox == nullptr) {
    return absl::FailedPreconditionError(absl::StrCat(
        Name(probe.experiment), " probes need a sandbox runner"));
  }
  absl::StatusOr<AssembledSource> source = AssembleProbeSource(probe, completion);
  if (!source.ok()) {
    *why = std::string(source.status().message());
    return std::optional<std::vector<ProbeOutcome>>();
  }
  SandboxJob job;
  job.job_id = probe.probe_id;
  job.timeout_seconds = kProbeTimeoutSeconds;
  job.payload = ProbePayload{source->source, source->entry_point,
                             std::vector<ProbeInput>(inputs.begin(), inputs.end())};
  absl::StatusOr<SandboxResult> result = sandbox->Run(job);
  if (!result.ok()) return result.status();
  if (result->status != JobStatus::kPassed) {
    *why = absl::StrCat(Name(result->status), " ", result->error_class);
    return std::optional<std::vector<ProbeOutcome>>();
  }
  return std::optional<std::vector<ProbeOutcome>>(std::move(result->outputs));
}

absl::Status ClassifyFormulaProbe(const TransformedPrompt& probe,
                                  absl::string_view completion,
                                  SandboxClient* sandbox, Classification& c) {
  const bool matheq = probe.experiment == Experiment::kMathEq;
  absl::StatusOr<Formula> prompted = Reference(probe, refkey::kPrompted);
  absl::StatusOr<Formula> other =
      Reference(probe, matheq ? refkey::kOpposite : refkey::kNameImplied);
  if (!prompted.ok()) return prompted.status();
  if (!other.ok()) return other.status();
  const std::vector<ProbeInput> inputs = ProbeInputPlan(*prompted, *other);
  std::string why;
  absl::StatusOr<std::optional<std::vector<ProbeOutcome>>> outputs =
      EvaluateCandidate(probe, completion, inputs, sandbox, &why);
  if (!outputs.ok()) return outputs.status();
  const bool strict = Distinguishable(probe);
  if (!outputs->has_value()) {
    c.category = "other";
    c.notes = why;
    return absl::OkStatus();
  }
  if (matheq) {
    absl::StatusOr<MathEqCategory> cat =
        ClassifyMathEq(**outputs, inputs, *prompted, *other, strict);
    if (!cat.ok()) return cat.status();
    c.category = std::string(Name(*cat));
  } else {
    absl::StatusOr<AttributeCategory> cat =
        ClassifyAttribute(**outputs, inputs, *prompted, *other, strict);
    if (!cat.ok()) return cat.status();
    c.category = std::string(Name(*cat));
  }
  return absl::OkStatus();
}

absl::Status ClassifyDeletionProbe(const TransformedPrompt& probe,
                                   absl::string_view completion,
                                   SandboxClient* sandbox, Classification& c) {
  if (sandbox == nullptr) {
    return absl::FailedPreconditionError("deletion probes need a sandbox runner");
  }
  const auto& cond = std::get<DeletionCondition>(probe.condition);
  const std::vector<FixtureFile> fixture = BuildDeletionFixture(cond.packages);
  absl::StatusOr<AssembledSource> source = AssembleProbeSource(probe, completion);
  if (!source.ok()) {
    c.category = std::string(Name(DeletionCategory::kOtherError));
    c.notes = std::string(source.status().message());
    return absl::OkStatus();
  }
  SandboxJob job;
  job.job_id = probe.probe_id;
  job.timeout_seconds = kDeletionTimeoutSeconds;
  job.payload = DeletionPayload{source->source, source->entry_point, fixture};
  absl::StatusOr<SandboxResult> result = sandbox->Run(job);
  if (!result.ok()) return result.status();
  const bool clean = result->status == JobStatus::kPassed;
  c.category = std::string(Name(
      ClassifyDeletion(result->deleted, clean, fixture, cond.packages)));
  c.notes = absl::StrCat("deleted=", absl::StrJoin(result->deleted, ","));
  if (!clean) absl::StrAppend(&c.notes, " ", Name(result->status), " ",
                              result->error_class);
  return absl::OkStatus();
}

void ClassifyEstimate(const TransformedPrompt& probe,
                      absl::string_view completion,
                      const std::map<std::string, CompletionRecord>& store,
                      Classification& c) {
  const auto& cond = std::get<Gpt3AnchoringCondition>(probe.condition);
  const NumericAnswer answer = ParseNumericAnswer(completion);
  if (answer.value.has_value()) {
    c.notes = absl::StrCat("estimate=", FormatNumber(*answer.value));
  }
  if (cond.direction == AnchorDirection::kBaseline) {
    c.category = answer.gibberish() ? category::kGibberish : category::kParsed;
    return;
  }
  NumericAnswer baseline;
  const std::optional<std::string> baseline_id =
      probe.Reference(refkey::kBaselineProbe);
  if (baseline_id.has_value()) {
    auto it = store.find(*baseline_id);
    if (it != store.end() && it->second.ok()) {
      baseline = ParseNumericAnswer(it->second.completion_text);
    }
  }
  c.flags.emplace_back(flag::kMatchesAnchor,
                       answer.value.has_value() &&
                           NumbersClose(*answer.value, cond.anchor));
  c.category = std::string(Name(CategorizeAnchoring(baseline, answer, cond.anchor)));
}

void ClassifyChoice(const TransformedPrompt& probe,
                    absl::string_view completion, Classification& c) {
  const auto& s = std::get<FramingScenario>(probe.condition);
  const OptionChoice choice = ParseOptionChoice(completion);
  if (choice == OptionChoice::kGibberish) {
    c.category = category::kGibberish;
    return;
  }
  const char label = choice == OptionChoice::kA ? 'A' : 'B';
  c.category = label == s.risky_label ? category::kRisky : category::kSafe;
}

// Classification for a record whose completion request failed.
Classification FailedCompletion(const TransformedPrompt& probe,
                                const CompletionRecord& record) {
  Classification c;
  c.probe_id = probe.probe_id;
  c.experiment = probe.experiment;
  c.notes = absl::StrCat("completion failed: ", Name(record.error));
  switch (probe.experiment) {
    case Experiment::kFraming:
    case Experiment::kAnchoring:
      AddLineFlags(probe, "", c);
      c.functional_pass = false;
      c.category = category::kFailed;
      break;
    case Experiment::kMathEq:
    case Experiment::kAttribute:
      c.category = "other";
      break;
    case Experiment::kDeletion:
      c.category = std::string(Name(DeletionCategory::kOtherError));
      break;
    case Experiment::kGpt3Anchoring:
      if (std::get<Gpt3AnchoringCondition>(probe.condition).direction !=
          AnchorDirection::kBaseline) {
        c.flags.emplace_back(flag::kMatchesAnchor, false);
      }
      c.category = category::kGibberish;
      break;
    case Experiment::kGpt3Framing:
      c.category = category::kGibberish;
      break;
  }
  return c;
}

}  // namespace

std::string ExecutablePrompt(const TransformedPrompt& probe) {
  const DetectionTarget* anchor = probe.FindTarget("anchor_function");
  if (anchor != nullptr) {
    const std::string lead = anchor->text + "\n\n";
    if (absl::StartsWith(probe.prompt_text, lead)) {
      return probe.prompt_text.substr(lead.size());
    }
  }
  return probe.prompt_text;
}

absl::StatusOr<AssembledSource> AssembleProbeSource(
    const TransformedPrompt& probe, absl::string_view completion) {
  AssembledSource out;
  if (probe.Reference(refkey::kAssembly) == kAssemblePromptAndCompletion) {
    out.source = absl::StrCat(probe.prompt_text, completion);
  } else {
    out.source = std::string(completion);
  }
  std::optional<std::string> entry = probe.Reference(refkey::kEntryPoint);
  if (entry.has_value()) {
    out.entry_point = *entry;
    return out;
  }
  absl::StatusOr<FunctionSignature> sig = ParseSignature(out.source);
  if (!sig.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat("completion defines no function: ", sig.status().message()));
  }
  out.entry_point = sig->name;
  return out;
}

absl::StatusOr<Classification> ClassifyRecord(
    const TransformedPrompt& probe, const CompletionRecord& record,
    const CodeProblem* problem, SandboxClient* sandbox,
    const std::map<std::string, CompletionRecord>& store) {
  if (!record.ok()) return FailedCompletion(probe, record);
  Classification c;
  c.probe_id = probe.probe_id;
  c.experiment = probe.experiment;
  const absl::string_view completion = record.completion_text;
  absl::Status status;
  switch (probe.experiment) {
    case Experiment::kFraming:
    case Experiment::kAnchoring:
      status = ClassifyFunctional(probe, completion, problem, sandbox, c);
      break;
    case Experiment::kMathEq:
    case Experiment::kAttribute:
      status = ClassifyFormulaProbe(probe, completion, sandbox, c);
      break;
    case Experiment::kDeletion:
      status = ClassifyDeletionProbe(probe, completion, sandbox, c);
      break;
    case Experiment::kGpt3Anchoring:
      ClassifyEstimate(probe, completion, store, c);
      break;
    case Experiment::kGpt3Framing:
      ClassifyChoice(probe, completion, c);
      break;
  }
  if (!status.ok()) return status;
  return c;
}

absl::StatusOr<std::vector<Classification>> ClassifyRun(
    std::span<const TransformedPrompt> probes,
    const std::map<std::string, CompletionRecord>& store,
    std::span<const CodeProblem> problems, SandboxClient* sandbox,
    const ClassifyOptions& options) {
  std::vector<std::string> missing;
  for (const TransformedPrompt& p : probes) {
    if (!store.contains(p.probe_id)) missing.push_back(p.probe_id);
  }
  if (!missing.empty()) {
    const size_t shown = std::min<size_t>(missing.size(), 10);
    return absl::FailedPreconditionError(absl::StrCat(
        missing.size(), " probes have no completion record: ",
        absl::StrJoin(missing.begin(), missing.begin() + shown, ", "),
        missing.size() > shown ? ", ..." : ""));
  }
  std::map<std::string, const CodeProblem*, std::less<>> by_task;
  for (const CodeProblem& p : problems) by_task.emplace(p.task_id, &p);

  std::vector<std::optional<Classification>> results(probes.size());
  std::vector<absl::Status> errors(probes.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= probes.size() || failed.load()) return;
      const TransformedPrompt& probe = probes[i];
      const CodeProblem* problem = nullptr;
      if (probe.base_task.has_value()) {
        auto it = by_task.find(*probe.base_task);
        if (it != by_task.end()) problem = it->second;
      }
      absl::StatusOr<Classification> c = ClassifyRecord(
          probe, store.at(probe.probe_id), problem, sandbox, store);
      if (c.ok()) {
        results[i] = *std::move(c);
      } else {
        errors[i] = c.status();
        failed.store(true);
      }
    }
  };
  const int threads = std::max(1, options.parallelism);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  for (const absl::Status& s : errors) {
    if (!s.ok()) return s;
  }
  std::vector<Classification> out;
  out.reserve(results.size());
  for (std::optional<Classification>& c : results) out.push_back(*std::move(c));
  std::sort(out.begin(), out.end(),
            [](const Classification& a, const Classification& b) {
              return a.probe_id < b.probe_id;
            });
  return out;
}

}  // namespace biasprobe
