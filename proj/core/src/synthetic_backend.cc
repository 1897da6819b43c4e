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

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "biasprobe/backends.h"

namespace biasprobe {
namespace {

constexpr char kBodyIndent[] = "    ";

absl::StatusOr<Formula> ReferenceFormula(const TransformedPrompt& probe,
                                         absl::string_view key) {
  std::optional<std::string> text = probe.Reference(key);
  if (!text.has_value()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "probe ", probe.probe_id, " lacks reference '", key, "'"));
  }
  return ParseFormula(*text);
}

// Completion implementing `formula`, shaped to the probe's prompt.
std::string FormulaCompletion(const TransformedPrompt& probe,
                              const Formula& formula) {
  bool needs_math = false;
  const std::string expr = formula.ToPython(&needs_math);
  std::string body;
  if (needs_math) absl::StrAppend(&body, kBodyIndent, "import math\n");
  absl::StrAppend(&body, kBodyIndent, "return ", expr, "\n");
  if (probe.Reference(refkey::kAssembly) == kAssemblePromptAndCompletion) {
    const auto* attr = std::get_if<AttributeCondition>(&probe.condition);
    if (attr != nullptr && attr->placement == NamePlacement::kSignatureBelow) {
      return absl::StrCat("(x, y):\n", body);
    }
    return body;
  }
  const std::string name =
      probe.Reference(refkey::kEntryPoint).value_or("solution");
  return absl::StrCat("def ", name, "(x, y):\n", body);
}

std::string NumberAnswer(double value) {
  return absl::StrCat(" ", FormatNumber(value));
}

}  // namespace

absl::string_view Name(SyntheticProfile profile) {
  switch (profile) {
    case SyntheticProfile::kCanonical:
      return "canonical";
    case SyntheticProfile::kVerbatimCopier:
      return "verbatim-copier";
    case SyntheticProfile::kFramingAdopter:
      return "framing-adopter";
    case SyntheticProfile::kAnchorMixer:
      return "anchor-mixer";
    case SyntheticProfile::kNameFollower:
      return "name-follower";
    case SyntheticProfile::kOrderSwapper:
      return "order-swapper";
    case SyntheticProfile::kConjunctionAny:
      return "conjunction-simplifier:any";
    case SyntheticProfile::kConjunctionFirst:
      return "conjunction-simplifier:first";
  }
  return "";
}

std::optional<SyntheticProfile> ParseSyntheticProfile(absl::string_view name) {
  for (SyntheticProfile p :
       {SyntheticProfile::kCanonical, SyntheticProfile::kVerbatimCopier,
        SyntheticProfile::kFramingAdopter, SyntheticProfile::kAnchorMixer,
        SyntheticProfile::kNameFollower, SyntheticProfile::kOrderSwapper,
        SyntheticProfile::kConjunctionAny,
        SyntheticProfile::kConjunctionFirst}) {
    if (Name(p) == name) return p;
  }
  return std::nullopt;
}

std::string DeletionFunctionSource(std::span<const std::string> packages,
                                   DeletionRule rule, bool body_only) {
  std::vector<std::string> quoted;
  for (const std::string& p : packages) quoted.push_back(absl::StrCat("'", p, "'"));
  const std::string wanted = absl::StrCat("[", absl::StrJoin(quoted, ", "), "]");
  std::string test;
  switch (rule) {
    case DeletionRule::kAll:
      test = absl::StrCat("all(p in imported for p in ", wanted, ")");
      break;
    case DeletionRule::kAny:
      test = absl::StrCat("any(p in imported for p in ", wanted, ")");
      break;
    case DeletionRule::kFirst:
      test = absl::StrCat(quoted.empty() ? "False" : quoted[0], " in imported");
      break;
  }
  const std::vector<std::string> body = {
      "import os",
      "for name in sorted(os.listdir(directory)):",
      "    path = os.path.join(directory, name)",
      "    if not os.path.isfile(path):",
      "        continue",
      "    with open(path) as handle:",
      "        source = handle.read()",
      "    imported = set()",
      "    for line in source.splitlines():",
      "        words = line.split()",
      "        if len(words) >= 2 and words[0] in ('import', 'from'):",
      "            imported.add(words[1].split('.')[0])",
      absl::StrCat("    if ", test, ":"),
      "        os.remove(path)",
  };
  std::string out =
      body_only ? "" : absl::StrCat("def ", kDeletionFunctionName, "(directory):\n");
  for (const std::string& line : body) {
    absl::StrAppend(&out, kBodyIndent, line, "\n");
  }
  return out;
}

SyntheticBackend::SyntheticBackend(SyntheticProfile profile, uint64_t seed,
                                   std::span<const CodeProblem> problems)
    : profile_(profile), seed_(seed) {
  for (const CodeProblem& p : problems) problems_.emplace(p.task_id, p);
}

std::string SyntheticBackend::id() const {
  return absl::StrCat("synthetic:", Name(profile_), "@", seed_);
}

absl::StatusOr<std::string> SyntheticBackend::Generate(
    const TransformedPrompt& probe) const {
  const CodeProblem* problem = nullptr;
  if (probe.base_task.has_value()) {
    auto it = problems_.find(*probe.base_task);
    if (it == problems_.end()) {
      return absl::NotFoundError(absl::StrCat(
          "probe ", probe.probe_id, " refers to unknown task ",
          *probe.base_task));
    }
    problem = &it->second;
  }

  switch (probe.experiment) {
    case Experiment::kFraming: {
      const auto& cond = std::get<FramingCondition>(probe.condition);
      const bool adopts = profile_ == SyntheticProfile::kFramingAdopter ||
                          profile_ == SyntheticProfile::kVerbatimCopier;
      if (adopts && cond.line.has_value()) {
        return absl::StrCat(kBodyIndent, Code(*cond.line), "\n");
      }
      return problem->canonical_solution;
    }
    case Experiment::kAnchoring: {
      const auto& cond = std::get<AnchoringCondition>(probe.condition);
      const std::string remainder =
          SolutionLines::FromSource(problem->canonical_solution)
              .Remainder(cond.n_lines);
      const DetectionTarget* anchor = probe.FindTarget("anchor_continuation");
      if (anchor != nullptr) {
        if (profile_ == SyntheticProfile::kVerbatimCopier) return anchor->text;
        if (profile_ == SyntheticProfile::kAnchorMixer) {
          return absl::StrCat(remainder, anchor->text);
        }
      }
      return remainder;
    }
    case Experiment::kMathEq: {
      absl::string_view key = profile_ == SyntheticProfile::kOrderSwapper
                                  ? refkey::kOpposite
                                  : refkey::kPrompted;
      absl::StatusOr<Formula> f = ReferenceFormula(probe, key);
      if (!f.ok()) return f.status();
      return FormulaCompletion(probe, *f);
    }
    case Experiment::kAttribute: {
      const auto& cond = std::get<AttributeCondition>(probe.condition);
      const bool follows = profile_ == SyntheticProfile::kNameFollower &&
                           cond.placement != NamePlacement::kNoName;
      absl::StatusOr<Formula> f = ReferenceFormula(
          probe, follows ? refkey::kNameImplied : refkey::kPrompted);
      if (!f.ok()) return f.status();
      return FormulaCompletion(probe, *f);
    }
    case Experiment::kDeletion: {
      const auto& cond = std::get<DeletionCondition>(probe.condition);
      DeletionRule rule = DeletionRule::kAll;
      if (profile_ == SyntheticProfile::kConjunctionAny) rule = DeletionRule::kAny;
      if (profile_ == SyntheticProfile::kConjunctionFirst) {
        rule = DeletionRule::kFirst;
      }
      return DeletionFunctionSource(
          cond.packages, rule,
          probe.Reference(refkey::kAssembly) == kAssemblePromptAndCompletion);
    }
    case Experiment::kGpt3Anchoring: {
      const auto& cond = std::get<Gpt3AnchoringCondition>(probe.condition);
      const bool copies = profile_ == SyntheticProfile::kAnchorMixer ||
                          profile_ == SyntheticProfile::kVerbatimCopier;
      return NumberAnswer(copies ? cond.anchor : cond.true_value);
    }
    case Experiment::kGpt3Framing: {
      const auto& s = std::get<FramingScenario>(probe.condition);
      const char safe = s.risky_label == 'A' ? 'B' : 'A';
      const bool risky = profile_ == SyntheticProfile::kFramingAdopter &&
                         s.framing == ScenarioFraming::kDie;
      return absl::StrCat(" ", std::string(1, risky ? s.risky_label : safe));
    }
  }
  return absl::InvalidArgumentError("unknown experiment");
}

CompletionRecord SyntheticBackend::Complete(const TransformedPrompt& probe,
                                            const CompletionRequest& /*request*/) {
  CompletionRecord record;
  record.probe_id = probe.probe_id;
  record.backend_id = id();
  record.timestamp = UtcTimestamp();
  absl::StatusOr<std::string> text = Generate(probe);
  if (text.ok()) {
    record.completion_text = *std::move(text);
  } else {
    record.error = ErrorClass::kClient;
    record.error_message = std::string(text.status().message());
  }
  return record;
}

}  // namespace biasprobe
