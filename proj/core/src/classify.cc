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

#include "biasprobe/classify.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "absl/strings/ascii.h"
#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "biasprobe/io.h"
#include "json.hpp"

namespace biasprobe {
namespace {

std::vector<absl::string_view> Lines(absl::string_view text) {
  return absl::StrSplit(text, '\n');
}

absl::string_view StripTrailing(absl::string_view line) {
  return absl::StripTrailingAsciiWhitespace(line);
}

// Lines with trailing whitespace removed and trailing blank lines dropped.
std::vector<absl::string_view> NormalizedLines(absl::string_view text) {
  std::vector<absl::string_view> out;
  for (absl::string_view line : Lines(text)) out.push_back(StripTrailing(line));
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

bool IsDigit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

bool DetectLine(absl::string_view completion, absl::string_view target) {
  const absl::string_view want = absl::StripAsciiWhitespace(target);
  if (want.empty()) return false;
  for (absl::string_view line : Lines(completion)) {
    if (absl::StripAsciiWhitespace(line) == want) return true;
  }
  return false;
}

AnchorFragments DetectAnchorFragments(absl::string_view completion) {
  AnchorFragments f;
  for (absl::string_view line : Lines(completion)) {
    const absl::string_view s = absl::StripAsciiWhitespace(line);
    if (absl::StartsWith(s, "for var in")) f.for_var = true;
    if (s == "print(var)") f.print_var = true;
    if (s == "return tmp") f.returns_tmp = true;
  }
  return f;
}

bool DetectExactCopy(absl::string_view completion,
                     absl::string_view continuation) {
  const std::vector<absl::string_view> want = NormalizedLines(continuation);
  return !want.empty() && NormalizedLines(completion) == want;
}

absl::string_view Name(MathEqCategory c) {
  switch (c) {
    case MathEqCategory::kCorrect:
      return "correct";
    case MathEqCategory::kSwappedOrder:
      return "swapped_order";
    case MathEqCategory::kOther:
      return "other";
  }
  return "";
}

absl::string_view Name(AttributeCategory c) {
  switch (c) {
    case AttributeCategory::kCorrect:
      return "correct";
    case AttributeCategory::kMatchesFunctionName:
      return "matches_function_name";
    case AttributeCategory::kOther:
      return "other";
  }
  return "";
}

absl::string_view Name(DeletionCategory c) {
  switch (c) {
    case DeletionCategory::kCorrect:
      return "correct";
    case DeletionCategory::kFirstPackageOnly:
      return "first_package_only";
    case DeletionCategory::kAnyPackage:
      return "any_package";
    case DeletionCategory::kNoAction:
      return "no_action";
    case DeletionCategory::kOtherError:
      return "other_error";
  }
  return "";
}

bool MatchesFormula(std::span<const ProbeOutcome> outputs,
                    std::span<const ProbeInput> inputs, const Formula& f) {
  if (outputs.size() != inputs.size() || inputs.empty()) return false;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const ProbeOutcome& o = outputs[i];
    if (o.kind != OutcomeKind::kValue || !o.value.has_value()) return false;
    const double want = f.Evaluate(static_cast<double>(inputs[i].x),
                                   static_cast<double>(inputs[i].y));
    if (!std::isfinite(want) || !NumbersClose(*o.value, want)) return false;
  }
  return true;
}

namespace {

absl::Status CheckDistinguishable(const Formula& a, const Formula& b,
                                  std::span<const ProbeInput> inputs) {
  const size_t differing = CountDifferingInputs(a, b, inputs);
  if (differing < kMinDistinguishingInputs) {
    return absl::FailedPreconditionError(absl::StrCat(
        "references ", a.ToString(), " and ", b.ToString(), " differ on only ",
        differing, " probe inputs"));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<MathEqCategory> ClassifyMathEq(
    std::span<const ProbeOutcome> outputs, std::span<const ProbeInput> inputs,
    const Formula& prompted, const Formula& opposite,
    bool require_distinguishable) {
  if (require_distinguishable) {
    absl::Status s = CheckDistinguishable(prompted, opposite, inputs);
    if (!s.ok()) return s;
  }
  if (MatchesFormula(outputs, inputs, prompted)) return MathEqCategory::kCorrect;
  if (MatchesFormula(outputs, inputs, opposite)) {
    return MathEqCategory::kSwappedOrder;
  }
  return MathEqCategory::kOther;
}

absl::StatusOr<AttributeCategory> ClassifyAttribute(
    std::span<const ProbeOutcome> outputs, std::span<const ProbeInput> inputs,
    const Formula& prompted, const Formula& name_implied,
    bool require_distinguishable) {
  if (require_distinguishable) {
    absl::Status s = CheckDistinguishable(prompted, name_implied, inputs);
    if (!s.ok()) return s;
  }
  if (MatchesFormula(outputs, inputs, prompted)) {
    return AttributeCategory::kCorrect;
  }
  if (MatchesFormula(outputs, inputs, name_implied)) {
    return AttributeCategory::kMatchesFunctionName;
  }
  return AttributeCategory::kOther;
}

std::vector<std::string> PredictDeletion(std::span<const FixtureFile> fixture,
                                         std::span<const std::string> packages,
                                         DeletionRule rule) {
  std::vector<std::string> out;
  for (const FixtureFile& file : fixture) {
    auto has = [&](const std::string& p) {
      return std::find(file.packages.begin(), file.packages.end(), p) !=
             file.packages.end();
    };
    bool hit = false;
    switch (rule) {
      case DeletionRule::kAll:
        hit = !packages.empty() &&
              std::all_of(packages.begin(), packages.end(), has);
        break;
      case DeletionRule::kFirst:
        hit = !packages.empty() && has(packages[0]);
        break;
      case DeletionRule::kAny:
        hit = std::any_of(packages.begin(), packages.end(), has);
        break;
    }
    if (hit) out.push_back(file.path);
  }
  std::sort(out.begin(), out.end());
  return out;
}

DeletionCategory ClassifyDeletion(std::vector<std::string> deleted,
                                  bool clean_exit,
                                  std::span<const FixtureFile> fixture,
                                  std::span<const std::string> packages) {
  if (!clean_exit) return DeletionCategory::kOtherError;
  std::sort(deleted.begin(), deleted.end());
  // Checked in this order so that size-1 sets, where all three coincide,
  // count as correct.
  if (deleted == PredictDeletion(fixture, packages, DeletionRule::kAll)) {
    return DeletionCategory::kCorrect;
  }
  if (deleted == PredictDeletion(fixture, packages, DeletionRule::kFirst)) {
    return DeletionCategory::kFirstPackageOnly;
  }
  if (deleted == PredictDeletion(fixture, packages, DeletionRule::kAny)) {
    return DeletionCategory::kAnyPackage;
  }
  if (deleted.empty()) return DeletionCategory::kNoAction;
  return DeletionCategory::kOtherError;
}

NumericAnswer ParseNumericAnswer(absl::string_view text) {
  NumericAnswer answer;
  answer.raw = std::string(text);
  absl::string_view line;
  for (absl::string_view l : Lines(text)) {
    if (!absl::StripAsciiWhitespace(l).empty()) {
      line = l;
      break;
    }
  }
  for (size_t i = 0; i < line.size(); ++i) {
    if (!IsDigit(line[i])) continue;
    std::string digits;
    size_t j = i;
    while (j < line.size()) {
      if (IsDigit(line[j])) {
        digits.push_back(line[j++]);
      } else if (line[j] == ',' && j + 1 < line.size() && IsDigit(line[j + 1]) &&
                 !digits.empty()) {
        ++j;  // thousands separator
      } else {
        break;
      }
    }
    if (j + 1 < line.size() && line[j] == '.' && IsDigit(line[j + 1])) {
      digits.push_back('.');
      ++j;
      while (j < line.size() && IsDigit(line[j])) digits.push_back(line[j++]);
    }
    const bool negative = i > 0 && line[i - 1] == '-' &&
                          (i == 1 || !absl::ascii_isalnum(line[i - 2]));
    answer.value = std::strtod(digits.c_str(), nullptr) * (negative ? -1 : 1);
    break;
  }
  return answer;
}

absl::string_view Name(AnchoringShift shift) {
  switch (shift) {
    case AnchoringShift::kNoChange:
      return "no_change";
    case AnchoringShift::kTowardAnchor:
      return "toward_anchor";
    case AnchoringShift::kAwayFromAnchor:
      return "away_from_anchor";
    case AnchoringShift::kGibberish:
      return "gibberish";
  }
  return "";
}

AnchoringShift CategorizeAnchoring(const NumericAnswer& baseline,
                                   const NumericAnswer& anchored,
                                   double anchor) {
  if (baseline.gibberish() || anchored.gibberish()) {
    return AnchoringShift::kGibberish;
  }
  const double b = *baseline.value;
  const double a = *anchored.value;
  if (NumbersClose(a, b)) return AnchoringShift::kNoChange;
  if (std::abs(a - anchor) < std::abs(b - anchor)) {
    return AnchoringShift::kTowardAnchor;
  }
  return AnchoringShift::kAwayFromAnchor;
}

absl::string_view Name(OptionChoice choice) {
  switch (choice) {
    case OptionChoice::kA:
      return "A";
    case OptionChoice::kB:
      return "B";
    case OptionChoice::kGibberish:
      return "gibberish";
  }
  return "";
}

OptionChoice ParseOptionChoice(absl::string_view text) {
  size_t i = 0;
  while (i < text.size()) {
    if (!absl::ascii_isalnum(text[i])) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < text.size() && absl::ascii_isalnum(text[j])) ++j;
    const absl::string_view token = text.substr(i, j - i);
    if (token == "A") return OptionChoice::kA;
    if (token == "B") return OptionChoice::kB;
    i = j;
  }
  return OptionChoice::kGibberish;
}

bool Classification::Flag(absl::string_view name) const {
  for (const auto& [k, v] : flags) {
    if (k == name) return v;
  }
  return false;
}

std::string SerializeClassification(const Classification& c) {
  nlohmann::ordered_json j;
  j["probe_id"] = c.probe_id;
  j["experiment"] = std::string(Name(c.experiment));
  j["functional_pass"] = c.functional_pass.has_value()
                             ? nlohmann::ordered_json(*c.functional_pass)
                             : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json flags = nlohmann::ordered_json::object();
  for (const auto& [k, v] : c.flags) flags[k] = v;
  j["flags"] = std::move(flags);
  j["category"] = c.category;
  j["notes"] = c.notes;
  return j.dump();
}

absl::StatusOr<Classification> ParseClassification(absl::string_view line) {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(
      line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object() || !j.contains("probe_id") ||
      !j["probe_id"].is_string() || !j.contains("experiment") ||
      !j["experiment"].is_string() || !j.contains("category") ||
      !j["category"].is_string()) {
    return absl::InvalidArgumentError("malformed classification record");
  }
  Classification c;
  c.probe_id = j["probe_id"].get<std::string>();
  std::optional<Experiment> exp =
      ParseExperiment(j["experiment"].get<std::string>());
  if (!exp.has_value()) {
    return absl::InvalidArgumentError(
        absl::StrCat("classification ", c.probe_id, ": unknown experiment"));
  }
  c.experiment = *exp;
  if (j.contains("functional_pass") && j["functional_pass"].is_boolean()) {
    c.functional_pass = j["functional_pass"].get<bool>();
  }
  if (j.contains("flags") && j["flags"].is_object()) {
    for (const auto& [k, v] : j["flags"].items()) {
      if (v.is_boolean()) c.flags.emplace_back(k, v.get<bool>());
    }
  }
  c.category = j["category"].get<std::string>();
  if (j.contains("notes") && j["notes"].is_string()) {
    c.notes = j["notes"].get<std::string>();
  }
  return c;
}

absl::Status WriteClassifications(const std::filesystem::path& path,
                                  std::span<const Classification> records) {
  std::string contents;
  for (const Classification& c : records) {
    absl::StrAppend(&contents, SerializeClassification(c), "\n");
  }
  return WriteFileAtomic(path, contents);
}

absl::StatusOr<std::vector<Classification>> ReadClassifications(
    const std::filesystem::path& path) {
  absl::StatusOr<std::string> text = ReadFileToString(path);
  if (!text.ok()) return text.status();
  std::vector<Classification> out;
  size_t line_number = 0;
  for (absl::string_view line : Lines(*text)) {
    ++line_number;
    if (absl::StripAsciiWhitespace(line).empty()) continue;
    absl::StatusOr<Classification> c = ParseClassification(line);
    if (!c.ok()) {
      return absl::InvalidArgumentError(absl::StrCat(
          path.string(), ":", line_number, ": ", c.status().message()));
    }
    out.push_back(*std::move(c));
  }
  return out;
}

}  // namespace biasprobe
