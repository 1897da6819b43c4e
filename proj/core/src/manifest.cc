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

#include <charconv>
#include <cstdlib>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "biasprobe/io.h"
#include "biasprobe/transforms.h"
#include "json.hpp"

namespace biasprobe {
namespace {

using ordered_json = nlohmann::ordered_json;

absl::Status Missing(absl::string_view key) {
  return absl::InvalidArgumentError(
      absl::StrCat("condition field '", key, "' missing or invalid"));
}

absl::StatusOr<std::string> Get(const Fields& fields, absl::string_view key) {
  std::optional<std::string> v = FindField(fields, key);
  if (!v.has_value()) return Missing(key);
  return *v;
}

template <typename T>
absl::StatusOr<T> GetInt(const Fields& fields, absl::string_view key) {
  std::optional<std::string> v = FindField(fields, key);
  T out{};
  if (!v.has_value()) return Missing(key);
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) return Missing(key);
  return out;
}

absl::StatusOr<double> GetDouble(const Fields& fields, absl::string_view key) {
  std::optional<std::string> v = FindField(fields, key);
  double out = 0;
  if (!v.has_value() || !absl::SimpleAtod(*v, &out)) return Missing(key);
  return out;
}

absl::StatusOr<bool> GetBool(const Fields& fields, absl::string_view key) {
  std::optional<std::string> v = FindField(fields, key);
  if (v == "true") return true;
  if (v == "false") return false;
  return Missing(key);
}

template <typename T, typename ParseFn>
absl::StatusOr<T> GetEnum(const Fields& fields, absl::string_view key,
                          ParseFn parse) {
  std::optional<std::string> v = FindField(fields, key);
  if (!v.has_value()) return Missing(key);
  std::optional<T> parsed = parse(*v);
  if (!parsed.has_value()) return Missing(key);
  return *parsed;
}

#define BP_ASSIGN_OR_RETURN(lhs, expr)   \
  auto lhs##_or = (expr);                \
  if (!lhs##_or.ok()) return lhs##_or.status(); \
  auto lhs = *std::move(lhs##_or)

struct Flattener {
  Fields operator()(const FramingCondition& c) const {
    return {{"framing_line", c.line ? std::string(Key(*c.line)) : "original"},
            {"distractor_task", c.distractor_task},
            {"seed", absl::StrCat(c.seed)}};
  }
  Fields operator()(const AnchoringCondition& c) const {
    return {{"n_lines", absl::StrCat(c.n_lines)},
            {"anchor_kind", std::string(Name(c.kind))},
            {"renamed", c.renamed ? "true" : "false"}};
  }
  Fields operator()(const MathEqCondition& c) const {
    return {{"binary_op", std::string(Name(c.binary))},
            {"unary_op", std::string(Name(c.unary))},
            {"order", std::string(Name(c.order))},
            {"style", std::string(Name(c.style))}};
  }
  Fields operator()(const AttributeCondition& c) const {
    return {{"prompt_op", std::string(Name(c.prompt_op))},
            {"name_op", std::string(Name(c.name_op))},
            {"number", absl::StrCat(c.number)},
            {"placement", std::string(Name(c.placement))}};
  }
  Fields operator()(const DeletionCondition& c) const {
    return {{"packages", absl::StrJoin(c.packages, ",")},
            {"style", std::string(Name(c.style))},
            {"sample_index", absl::StrCat(c.sample_index)},
            {"seed", absl::StrCat(c.seed)}};
  }
  Fields operator()(const Gpt3AnchoringCondition& c) const {
    return {{"question_index", absl::StrCat(c.question_index)},
            {"percent", absl::StrCat(c.percent)},
            {"direction", std::string(Name(c.direction))},
            {"true_value", FormatNumber(c.true_value)},
            {"anchor", FormatNumber(c.anchor)}};
  }
  Fields operator()(const FramingScenario& c) const {
    return {{"population", absl::StrCat(c.population)},
            {"save_fraction", c.save_fraction.ToString()},
            {"framing", std::string(Name(c.framing))},
            {"risky_label", std::string(1, c.risky_label)},
            {"risky_position", c.risky_first ? "first" : "second"}};
  }
};

absl::StatusOr<Condition> ParseFramingCondition(const Fields& f) {
  BP_ASSIGN_OR_RETURN(key, Get(f, "framing_line"));
  FramingCondition c;
  if (key != "original") {
    c.line = ParseFramingLine(key);
    if (!c.line.has_value()) return Missing("framing_line");
  }
  BP_ASSIGN_OR_RETURN(distractor, Get(f, "distractor_task"));
  BP_ASSIGN_OR_RETURN(seed, GetInt<uint64_t>(f, "seed"));
  c.distractor_task = distractor;
  c.seed = seed;
  return c;
}

absl::StatusOr<Condition> ParseAnchoringCondition(const Fields& f) {
  BP_ASSIGN_OR_RETURN(n, GetInt<size_t>(f, "n_lines"));
  BP_ASSIGN_OR_RETURN(kind, GetEnum<AnchorKind>(f, "anchor_kind", ParseAnchorKind));
  BP_ASSIGN_OR_RETURN(renamed, GetBool(f, "renamed"));
  if (n > kMaxAnchorLines) return Missing("n_lines");
  return AnchoringCondition{n, kind, renamed};
}

absl::StatusOr<Condition> ParseMathEqCondition(const Fields& f) {
  BP_ASSIGN_OR_RETURN(binary, GetEnum<BinaryOp>(f, "binary_op", ParseBinaryOp));
  BP_ASSIGN_OR_RETURN(unary, GetEnum<UnaryOp>(f, "unary_op", ParseUnaryOp));
  BP_ASSIGN_OR_RETURN(order,
                      GetEnum<OperationOrder>(f, "order", ParseOperationOrder));
  BP_ASSIGN_OR_RETURN(style, GetEnum<PromptStyle>(f, "style", ParsePromptStyle));
  return MathEqCondition{binary, unary, order, style};
}

absl::StatusOr<Condition> ParseAttributeCondition(const Fields& f) {
  BP_ASSIGN_OR_RETURN(prompt_op,
                      GetEnum<BinaryOp>(f, "prompt_op", ParseBinaryOp));
  BP_ASSIGN_OR_RETURN(name_op, GetEnum<BinaryOp>(f, "name_op", ParseBinaryOp));
  BP_ASSIGN_OR_RETURN(number, GetInt<int>(f, "number"));
  BP_ASSIGN_OR_RETURN(placement, GetEnum<NamePlacement>(f, "placement",
                                                        ParseNamePlacement));
  return AttributeCondition{prompt_op, name_op, number, placement};
}

absl::StatusOr<Condition> ParseDeletionCondition(const Fields& f) {
  BP_ASSIGN_OR_RETURN(packages, Get(f, "packages"));
  BP_ASSIGN_OR_RETURN(style,
                      GetEnum<DeletionStyle>(f, "style", ParseDeletionStyle));
  BP_ASSIGN_OR_RETURN(sample, GetInt<size_t>(f, "sample_index"));
  BP_ASSIGN_OR_RETURN(seed, GetInt<uint64_t>(f, "seed"));
  DeletionCondition c;
  c.packages = absl::StrSplit(packages, ',', absl::SkipEmpty());
  if (c.packages.empty()) return Missing("packages");
  c.style = style;
  c.sample_index = sample;
  c.seed = seed;
  return c;
}

absl::StatusOr<Condition> ParseGpt3AnchoringCondition(const Fields& f) {
  BP_ASSIGN_OR_RETURN(q, GetInt<size_t>(f, "question_index"));
  BP_ASSIGN_OR_RETURN(percent, GetInt<int>(f, "percent"));
  BP_ASSIGN_OR_RETURN(direction, GetEnum<AnchorDirection>(
                                     f, "direction", ParseAnchorDirection));
  BP_ASSIGN_OR_RETURN(true_value, GetDouble(f, "true_value"));
  BP_ASSIGN_OR_RETURN(anchor, GetDouble(f, "anchor"));
  return Gpt3AnchoringCondition{q, percent, direction, true_value, anchor};
}

absl::StatusOr<Condition> ParseFramingScenario(const Fields& f) {
  BP_ASSIGN_OR_RETURN(population, GetInt<int>(f, "population"));
  BP_ASSIGN_OR_RETURN(fraction, Get(f, "save_fraction"));
  BP_ASSIGN_OR_RETURN(framing, Get(f, "framing"));
  BP_ASSIGN_OR_RETURN(label, Get(f, "risky_label"));
  BP_ASSIGN_OR_RETURN(position, Get(f, "risky_position"));
  FramingScenario s;
  s.population = population;
  std::vector<std::string> parts = absl::StrSplit(fraction, '/');
  if (parts.size() != 2 || !absl::SimpleAtoi(parts[0], &s.save_fraction.numerator) ||
      !absl::SimpleAtoi(parts[1], &s.save_fraction.denominator) ||
      s.save_fraction.denominator <= 0) {
    return Missing("save_fraction");
  }
  if (framing == "save") {
    s.framing = ScenarioFraming::kSave;
  } else if (framing == "die") {
    s.framing = ScenarioFraming::kDie;
  } else {
    return Missing("framing");
  }
  if (label != "A" && label != "B") return Missing("risky_label");
  s.risky_label = label[0];
  if (position != "first" && position != "second") {
    return Missing("risky_position");
  }
  s.risky_first = position == "first";
  return s;
}

ordered_json FieldsToJson(const Fields& fields) {
  ordered_json out = ordered_json::object();
  for (const auto& [k, v] : fields) out[k] = v;
  return out;
}

absl::StatusOr<Fields> JsonToFields(const ordered_json& j,
                                    absl::string_view what) {
  if (!j.is_object()) {
    return absl::InvalidArgumentError(absl::StrCat(what, " is not an object"));
  }
  Fields out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) {
      return absl::InvalidArgumentError(
          absl::StrCat(what, " field '", k, "' is not a string"));
    }
    out.emplace_back(k, v.get<std::string>());
  }
  return out;
}

}  // namespace

Fields FlattenCondition(const Condition& condition) {
  return std::visit(Flattener{}, condition);
}

absl::StatusOr<Condition> ParseCondition(Experiment experiment,
                                         const Fields& fields) {
  switch (experiment) {
    case Experiment::kFraming:
      return ParseFramingCondition(fields);
    case Experiment::kAnchoring:
      return ParseAnchoringCondition(fields);
    case Experiment::kMathEq:
      return ParseMathEqCondition(fields);
    case Experiment::kAttribute:
      return ParseAttributeCondition(fields);
    case Experiment::kDeletion:
      return ParseDeletionCondition(fields);
    case Experiment::kGpt3Anchoring:
      return ParseGpt3AnchoringCondition(fields);
    case Experiment::kGpt3Framing:
      return ParseFramingScenario(fields);
  }
  return absl::InvalidArgumentError("unknown experiment");
}

std::string SerializeProbe(const TransformedPrompt& probe) {
  ordered_json j;
  j["probe_id"] = probe.probe_id;
  j["experiment"] = std::string(Name(probe.experiment));
  j["base_task"] = probe.base_task.has_value() ? ordered_json(*probe.base_task)
                                               : ordered_json(nullptr);
  j["condition"] = FieldsToJson(FlattenCondition(probe.condition));
  j["prompt_text"] = probe.prompt_text;
  ordered_json targets = ordered_json::array();
  for (const DetectionTarget& t : probe.detection_targets) {
    targets.push_back(ordered_json{{"name", t.name}, {"text", t.text}});
  }
  j["detection_targets"] = std::move(targets);
  j["reference_spec"] = FieldsToJson(probe.reference_spec);
  return j.dump();
}

absl::StatusOr<TransformedPrompt> ParseProbe(absl::string_view line) {
  ordered_json j = ordered_json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("manifest line is not a JSON object");
  }
  TransformedPrompt p;
  if (!j.contains("probe_id") || !j["probe_id"].is_string()) {
    return absl::InvalidArgumentError("manifest record lacks probe_id");
  }
  p.probe_id = j["probe_id"].get<std::string>();
  auto fail = [&](absl::string_view msg) {
    return absl::InvalidArgumentError(absl::StrCat("probe ", p.probe_id, ": ", msg));
  };
  if (!j.contains("experiment") || !j["experiment"].is_string()) {
    return fail("missing experiment");
  }
  std::optional<Experiment> exp =
      ParseExperiment(j["experiment"].get<std::string>());
  if (!exp.has_value()) return fail("unknown experiment");
  p.experiment = *exp;
  if (j.contains("base_task") && j["base_task"].is_string()) {
    p.base_task = j["base_task"].get<std::string>();
  }
  if (!j.contains("prompt_text") || !j["prompt_text"].is_string()) {
    return fail("missing prompt_text");
  }
  p.prompt_text = j["prompt_text"].get<std::string>();
  absl::StatusOr<Fields> cond = JsonToFields(j.value("condition", ordered_json()), "condition");
  if (!cond.ok()) return fail(cond.status().message());
  absl::StatusOr<Condition> parsed = ParseCondition(p.experiment, *cond);
  if (!parsed.ok()) return fail(parsed.status().message());
  p.condition = *std::move(parsed);
  if (j.contains("detection_targets")) {
    const ordered_json& targets = j["detection_targets"];
    if (!targets.is_array()) return fail("detection_targets is not an array");
    for (const ordered_json& t : targets) {
      if (!t.is_object() || !t.contains("name") || !t.contains("text") ||
          !t["name"].is_string() || !t["text"].is_string()) {
        return fail("malformed detection target");
      }
      p.detection_targets.push_back(
          {t["name"].get<std::string>(), t["text"].get<std::string>()});
    }
  }
  absl::StatusOr<Fields> ref = JsonToFields(
      j.value("reference_spec", ordered_json::object()), "reference_spec");
  if (!ref.ok()) return fail(ref.status().message());
  p.reference_spec = *std::move(ref);
  return p;
}

absl::Status WriteManifest(const std::filesystem::path& path,
                           std::span<const TransformedPrompt> probes) {
  std::string contents;
  for (const TransformedPrompt& p : probes) {
    contents += SerializeProbe(p);
    contents.push_back('\n');
  }
  return WriteFileAtomic(path, contents);
}

absl::StatusOr<std::vector<TransformedPrompt>> ReadManifest(
    const std::filesystem::path& path) {
  absl::StatusOr<std::string> text = ReadFileToString(path);
  if (!text.ok()) return text.status();
  std::vector<TransformedPrompt> out;
  size_t line_number = 0;
  for (absl::string_view line : absl::StrSplit(*text, '\n')) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == absl::string_view::npos) continue;
    absl::StatusOr<TransformedPrompt> probe = ParseProbe(line);
    if (!probe.ok()) {
      return absl::InvalidArgumentError(absl::StrCat(
          path.string(), ":", line_number, ": ", probe.status().message()));
    }
    out.push_back(*std::move(probe));
  }
  return out;
}

}  // namespace biasprobe
