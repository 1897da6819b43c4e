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

#include "biasprobe/transforms.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "absl/strings/ascii.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"

namespace biasprobe {
namespace {

uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable across platforms, unlike std::hash.
uint64_t DeriveSeed(uint64_t seed, absl::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return SplitMix64(seed ^ SplitMix64(h));
}

// std::uniform_int_distribution is implementation-defined; manifests must be
// byte-identical across standard libraries.
size_t UniformBelow(std::mt19937_64& rng, size_t n) {
  const uint64_t bound = static_cast<uint64_t>(n);
  const uint64_t limit = std::mt19937_64::max() -
                         (std::mt19937_64::max() % bound + 1) % bound;
  uint64_t v;
  do {
    v = rng();
  } while (v > limit);
  return static_cast<size_t>(v % bound);
}

std::string EnsureTrailingNewline(absl::string_view text) {
  std::string out(text);
  if (out.empty() || out.back() != '\n') out.push_back('\n');
  return out;
}

std::string Bool(bool b) { return b ? "true" : "false"; }

constexpr absl::string_view kIndent = "    ";
constexpr absl::string_view kFunctionSeparator = "\n\n";

std::string InstructionDocstring(absl::string_view instruction) {
  return absl::StrCat("\"\"\"\n", instruction, "\n\"\"\"\n");
}

// "sums the squares of its inputs" / "squares the sum of its inputs".
absl::string_view BinaryVerb(BinaryOp op) {
  switch (op) {
    case BinaryOp::kSum:
      return "sums";
    case BinaryOp::kDifference:
      return "takes the difference of";
    case BinaryOp::kProduct:
      return "multiplies";
  }
  return "";
}

absl::string_view UnaryVerb(UnaryOp op) {
  switch (op) {
    case UnaryOp::kSquare:
      return "squares";
    case UnaryOp::kCube:
      return "cubes";
    case UnaryOp::kQuadruple:
      return "quadruples";
    case UnaryOp::kSquareRoot:
      return "takes the square root of";
  }
  return "";
}

absl::string_view UnaryPlural(UnaryOp op) {
  switch (op) {
    case UnaryOp::kSquare:
      return "squares";
    case UnaryOp::kCube:
      return "cubes";
    case UnaryOp::kQuadruple:
      return "quadruples";
    case UnaryOp::kSquareRoot:
      return "square roots";
  }
  return "";
}

std::string MathEqDescription(const MathEqCondition& c) {
  if (c.order == OperationOrder::kUnaryFirst) {
    return absl::StrCat(BinaryVerb(c.binary), " the ", UnaryPlural(c.unary),
                        " of its inputs");
  }
  return absl::StrCat(UnaryVerb(c.unary), " the ", Name(c.binary),
                      " of its inputs");
}

std::string MathEqFunctionName(const MathEqCondition& c) {
  if (c.order == OperationOrder::kBinaryFirst) {
    return absl::StrCat(Name(c.unary), "_", Name(c.binary));
  }
  return absl::StrCat(Name(c.binary), "_of_", Name(c.unary), "s");
}

Formula MathEqFormula(const MathEqCondition& c, OperationOrder order) {
  Formula f;
  f.binary = c.binary;
  f.unary = c.unary;
  f.order = order;
  return f;
}

OperationOrder Opposite(OperationOrder order) {
  return order == OperationOrder::kUnaryFirst ? OperationOrder::kBinaryFirst
                                              : OperationOrder::kUnaryFirst;
}

bool Distinguishable(const Formula& a, const Formula& b) {
  const std::vector<ProbeInput> plan = ProbeInputPlan(a, b);
  return CountDifferingInputs(a, b, plan) >= kMinDistinguishingInputs;
}

std::string AnchorLines(AnchorKind kind,
                        const std::vector<std::string>& params) {
  if (kind == AnchorKind::kPrintVar) {
    return absl::StrCat(kIndent, "for var in [", absl::StrJoin(params, ", "),
                        "]:\n", kIndent, kIndent, "print(var)\n");
  }
  std::vector<std::string> terms;
  for (const std::string& p : params) terms.push_back(absl::StrCat("str(", p, ")"));
  return absl::StrCat(kIndent, "tmp = ", absl::StrJoin(terms, " + "), "\n",
                      kIndent, "return tmp\n");
}

struct AnchorParts {
  FunctionSignature signature;
  std::vector<std::string> params;
  std::string prefix;
  std::string anchor_lines;
  std::string anchor_function;
};

absl::StatusOr<AnchorParts> BuildAnchorParts(const CodeProblem& problem,
                                             const AnchoringCondition& cond) {
  if (cond.n_lines > kMaxAnchorLines) {
    return absl::InvalidArgumentError(
        absl::StrCat("n_lines ", cond.n_lines, " outside [0, ",
                     kMaxAnchorLines, "]"));
  }
  absl::StatusOr<FunctionSignature> sig =
      ParseSignature(problem.prompt, problem.entry_point);
  if (!sig.ok()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "task ", problem.task_id, ": ", sig.status().message()));
  }
  const SolutionLines solution =
      SolutionLines::FromSource(problem.canonical_solution);
  if (solution.CodeLineCount() <= cond.n_lines) {
    return absl::FailedPreconditionError(absl::StrCat(
        "task ", problem.task_id, ": canonical solution has ",
        solution.CodeLineCount(), " lines, not more than ", cond.n_lines));
  }
  AnchorParts parts;
  parts.signature = *std::move(sig);
  parts.params = parts.signature.ParameterNames();
  parts.prefix = solution.Prefix(cond.n_lines);
  if (cond.kind == AnchorKind::kNone) return parts;
  if (parts.params.empty()) {
    return absl::FailedPreconditionError(
        absl::StrCat("task ", problem.task_id,
                     ": cannot build an anchor for a function without "
                     "parameters"));
  }
  FunctionSignature header = parts.signature;
  if (cond.renamed) absl::StrAppend(&header.name, "1");
  parts.anchor_lines = AnchorLines(cond.kind, parts.params);
  parts.anchor_function = absl::StrCat(StripAnnotations(header), "\n",
                                       parts.prefix, parts.anchor_lines);
  return parts;
}

// Applies the "2" suffix inside the target's header and docstring only.
absl::StatusOr<std::string> RenameTarget(const CodeProblem& problem,
                                         const FunctionSignature& sig) {
  absl::StatusOr<std::optional<Docstring>> doc =
      ExtractDocstring(problem.prompt, sig);
  if (!doc.ok()) return doc.status();
  const std::string renamed = absl::StrCat(sig.name, "2");
  absl::string_view prompt = problem.prompt;
  std::string out(prompt.substr(0, sig.begin));
  out += ReplaceIdentifier(prompt.substr(sig.begin, sig.end - sig.begin),
                           sig.name, renamed);
  size_t cursor = sig.end;
  if (doc->has_value()) {
    const Docstring& d = **doc;
    absl::StrAppend(&out, prompt.substr(cursor, d.begin - cursor));
    out += ReplaceIdentifier(prompt.substr(d.begin, d.end - d.begin),
                             sig.name, renamed);
    cursor = d.end;
  }
  absl::StrAppend(&out, prompt.substr(cursor));
  return out;
}

constexpr AnchorQuestion kAnchorQuestions[] = {
    {"the length of the Mississippi River (in miles)", 2350},
    {"the height of Mount Everest (in feet)", 29032},
    {"the amount of meat eaten per year by the average American (in pounds)",
     144},
    {"the distance from San Francisco to New York City (in miles)", 2569},
    {"the height of the tallest redwood (in feet)", 380},
    {"the number of United Nation members", 193},
    {"the number of female professors at the University of California, "
     "Berkeley",
     256},
    {"the population of Chicago (in millions)", 2.7},
    {"the year the telephone was invented", 1876},
    {"the average number of babies born per day in the United States", 10267},
    {"the maximum speed of a house cat (in miles per hour)", 30},
    {"the amount of gas used per month by the average American (in gallons)",
     656},
    {"the number of state colleges and universities in California", 23},
    {"the number of Lincoln's presidency", 16},
};

std::string Capitalize(absl::string_view text) {
  std::string out(text);
  if (!out.empty()) out[0] = absl::ascii_toupper(out[0]);
  return out;
}

}  // namespace

absl::string_view Name(Experiment experiment) {
  switch (experiment) {
    case Experiment::kFraming:
      return "framing";
    case Experiment::kAnchoring:
      return "anchoring";
    case Experiment::kMathEq:
      return "matheq";
    case Experiment::kAttribute:
      return "attribute";
    case Experiment::kDeletion:
      return "deletion";
    case Experiment::kGpt3Anchoring:
      return "gpt3_anchoring";
    case Experiment::kGpt3Framing:
      return "gpt3_framing";
  }
  return "";
}

std::optional<Experiment> ParseExperiment(absl::string_view name) {
  for (Experiment e : kAllExperiments) {
    if (Name(e) == name) return e;
  }
  return std::nullopt;
}

bool IsCodeExperiment(Experiment experiment) {
  return experiment != Experiment::kGpt3Anchoring &&
         experiment != Experiment::kGpt3Framing;
}

std::optional<std::string> FindField(const Fields& fields,
                                     absl::string_view key) {
  for (const auto& [k, v] : fields) {
    if (k == key) return v;
  }
  return std::nullopt;
}

absl::string_view Key(FramingLine line) {
  switch (line) {
    case FramingLine::kRaiseNotImplemented:
      return "raise_not_implemented";
    case FramingLine::kPass:
      return "pass";
    case FramingLine::kAssertFalse:
      return "assert_false";
    case FramingLine::kReturnFalse:
      return "return_false";
    case FramingLine::kPrintHello:
      return "print_hello_world";
  }
  return "";
}

absl::string_view Code(FramingLine line) {
  switch (line) {
    case FramingLine::kRaiseNotImplemented:
      return "raise NotImplementedError";
    case FramingLine::kPass:
      return "pass";
    case FramingLine::kAssertFalse:
      return "assert False";
    case FramingLine::kReturnFalse:
      return "return False";
    case FramingLine::kPrintHello:
      return "print(\"Hello world!\")";
  }
  return "";
}

std::optional<FramingLine> ParseFramingLine(absl::string_view key) {
  for (FramingLine line : kAllFramingLines) {
    if (Key(line) == key) return line;
  }
  return std::nullopt;
}

absl::string_view Name(AnchorKind kind) {
  switch (kind) {
    case AnchorKind::kNone:
      return "none";
    case AnchorKind::kPrintVar:
      return "print_var";
    case AnchorKind::kAddVar:
      return "add_var";
  }
  return "";
}

std::optional<AnchorKind> ParseAnchorKind(absl::string_view name) {
  for (AnchorKind k :
       {AnchorKind::kNone, AnchorKind::kPrintVar, AnchorKind::kAddVar}) {
    if (Name(k) == name) return k;
  }
  return std::nullopt;
}

absl::string_view Name(PromptStyle style) {
  return style == PromptStyle::kInstructional ? "instructional"
                                              : "non_instructional";
}

std::optional<PromptStyle> ParsePromptStyle(absl::string_view name) {
  if (name == "instructional") return PromptStyle::kInstructional;
  if (name == "non_instructional") return PromptStyle::kNonInstructional;
  return std::nullopt;
}

absl::string_view Name(NamePlacement placement) {
  switch (placement) {
    case NamePlacement::kDocstring:
      return "docstring";
    case NamePlacement::kSignatureBelow:
      return "signature_below";
    case NamePlacement::kNameFirst:
      return "name_first";
    case NamePlacement::kNoName:
      return "no_name";
    case NamePlacement::kNonInstructional:
      return "non_instructional";
  }
  return "";
}

std::optional<NamePlacement> ParseNamePlacement(absl::string_view name) {
  for (NamePlacement p : kAllPlacements) {
    if (Name(p) == name) return p;
  }
  return std::nullopt;
}

std::string AttributeCondition::FunctionName() const {
  return absl::StrCat(Name(name_op), "_plus_", number);
}

absl::string_view Name(DeletionStyle style) {
  return style == DeletionStyle::kInstructional ? "instructional" : "docstring";
}

std::optional<DeletionStyle> ParseDeletionStyle(absl::string_view name) {
  if (name == "instructional") return DeletionStyle::kInstructional;
  if (name == "docstring") return DeletionStyle::kDocstring;
  return std::nullopt;
}

absl::string_view Name(AnchorDirection direction) {
  switch (direction) {
    case AnchorDirection::kBaseline:
      return "baseline";
    case AnchorDirection::kLower:
      return "lower";
    case AnchorDirection::kUpper:
      return "upper";
  }
  return "";
}

std::optional<AnchorDirection> ParseAnchorDirection(absl::string_view name) {
  for (AnchorDirection d : {AnchorDirection::kBaseline, AnchorDirection::kLower,
                            AnchorDirection::kUpper}) {
    if (Name(d) == name) return d;
  }
  return std::nullopt;
}

absl::string_view Name(ScenarioFraming framing) {
  return framing == ScenarioFraming::kSave ? "save" : "die";
}

std::string Fraction::ToString() const {
  return absl::StrCat(numerator, "/", denominator);
}

const DetectionTarget* TransformedPrompt::FindTarget(
    absl::string_view name) const {
  for (const DetectionTarget& t : detection_targets) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string FormatNumber(double value) {
  if (std::isfinite(value) && value == std::floor(value) &&
      std::abs(value) < 1e15) {
    return absl::StrCat(static_cast<int64_t>(value));
  }
  return absl::StrFormat("%.15g", value);
}

// ---------------------------------------------------------------------------
// Framing

TransformedPrompt FramingTransform(const CodeProblem& problem,
                                   const CodeProblem& distractor,
                                   FramingLine line, uint64_t seed) {
  TransformedPrompt probe;
  probe.probe_id = absl::StrCat("framing/", Key(line), "/", problem.task_id);
  probe.experiment = Experiment::kFraming;
  probe.base_task = problem.task_id;
  probe.condition = FramingCondition{line, distractor.task_id, seed};
  probe.prompt_text =
      absl::StrCat(EnsureTrailingNewline(distractor.prompt), kIndent,
                   Code(line), "\n", kFunctionSeparator, problem.prompt);
  probe.detection_targets.push_back({"framing_line", std::string(Code(line))});
  probe.reference_spec = {{std::string(refkey::kEntryPoint), problem.entry_point}};
  return probe;
}

TransformedPrompt FramingOriginal(const CodeProblem& problem) {
  TransformedPrompt probe;
  probe.probe_id = absl::StrCat("framing/original/", problem.task_id);
  probe.experiment = Experiment::kFraming;
  probe.base_task = problem.task_id;
  probe.condition = FramingCondition{std::nullopt, "", 0};
  probe.prompt_text = problem.prompt;
  for (FramingLine line : kAllFramingLines) {
    probe.detection_targets.push_back(
        {absl::StrCat("framing_line.", Key(line)), std::string(Code(line))});
  }
  probe.reference_spec = {{std::string(refkey::kEntryPoint), problem.entry_point}};
  return probe;
}

size_t DrawDistractor(std::span<const CodeProblem> problems, size_t index,
                      FramingLine line, uint64_t seed) {
  std::mt19937_64 rng(DeriveSeed(
      seed, absl::StrCat("framing/", problems[index].task_id, "/", Key(line))));
  size_t pick;
  do {
    pick = UniformBelow(rng, problems.size());
  } while (pick == index);
  return pick;
}

absl::StatusOr<std::vector<TransformedPrompt>> FramingPrompts(
    std::span<const CodeProblem> problems, const FramingOptions& options) {
  if (problems.size() < 2) {
    return absl::InvalidArgumentError(
        "framing needs at least two problems to draw distractors from");
  }
  std::vector<TransformedPrompt> out;
  for (size_t i = 0; i < problems.size(); ++i) {
    if (options.include_original) out.push_back(FramingOriginal(problems[i]));
    for (FramingLine line : options.lines) {
      const size_t d = DrawDistractor(problems, i, line, options.seed);
      out.push_back(
          FramingTransform(problems[i], problems[d], line, options.seed));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Anchoring

absl::StatusOr<std::string> BuildAnchorFunction(const CodeProblem& problem,
                                                const AnchoringCondition& cond) {
  if (cond.kind == AnchorKind::kNone) {
    return absl::InvalidArgumentError("baseline condition has no anchor");
  }
  absl::StatusOr<AnchorParts> parts = BuildAnchorParts(problem, cond);
  if (!parts.ok()) return parts.status();
  return std::move(parts->anchor_function);
}

absl::StatusOr<TransformedPrompt> AnchoringTransform(
    const CodeProblem& problem, const AnchoringCondition& cond) {
  absl::StatusOr<AnchorParts> parts = BuildAnchorParts(problem, cond);
  if (!parts.ok()) return parts.status();

  TransformedPrompt probe;
  probe.experiment = Experiment::kAnchoring;
  probe.base_task = problem.task_id;
  probe.condition = cond;
  const std::string n_tag = absl::StrCat("n", cond.n_lines);
  if (cond.kind == AnchorKind::kNone) {
    probe.condition = AnchoringCondition{cond.n_lines, AnchorKind::kNone, false};
    probe.probe_id =
        absl::StrCat("anchoring/baseline/", n_tag, "/", problem.task_id);
    probe.prompt_text =
        absl::StrCat(EnsureTrailingNewline(problem.prompt), parts->prefix);
    probe.reference_spec = {
        {std::string(refkey::kEntryPoint), problem.entry_point}};
    return probe;
  }

  std::string target = problem.prompt;
  std::string entry_point = problem.entry_point;
  if (cond.renamed) {
    absl::StatusOr<std::string> renamed = RenameTarget(problem, parts->signature);
    if (!renamed.ok()) return renamed.status();
    target = *std::move(renamed);
    absl::StrAppend(&entry_point, "2");
  }
  probe.probe_id = absl::StrCat("anchoring/", Name(cond.kind),
                                cond.renamed ? "_renamed/" : "/", n_tag, "/",
                                problem.task_id);
  probe.prompt_text =
      absl::StrCat(parts->anchor_function, kFunctionSeparator,
                   EnsureTrailingNewline(target), parts->prefix);
  if (cond.kind == AnchorKind::kPrintVar) {
    probe.detection_targets.push_back(
        {"for_var", absl::StrCat("for var in [",
                                 absl::StrJoin(parts->params, ", "), "]:")});
    probe.detection_targets.push_back({"print_var", "print(var)"});
  } else {
    probe.detection_targets.push_back({"returns_tmp", "return tmp"});
  }
  probe.detection_targets.push_back({"anchor_function", parts->anchor_function});
  probe.detection_targets.push_back(
      {"anchor_continuation", parts->anchor_lines});
  probe.reference_spec = {{std::string(refkey::kEntryPoint), entry_point}};
  return probe;
}

absl::StatusOr<std::vector<TransformedPrompt>> AnchoringPrompts(
    std::span<const CodeProblem> problems, const AnchoringOptions& options) {
  if (options.min_lines > options.max_lines ||
      options.max_lines > kMaxAnchorLines) {
    return absl::InvalidArgumentError(absl::StrCat(
        "anchoring line range [", options.min_lines, ", ", options.max_lines,
        "] must lie within [0, ", kMaxAnchorLines, "]"));
  }
  std::vector<TransformedPrompt> out;
  for (size_t n = options.min_lines; n <= options.max_lines; ++n) {
    for (const CodeProblem& problem : FilterBySolutionLength(problems, n)) {
      if (options.include_baseline) {
        absl::StatusOr<TransformedPrompt> base =
            AnchoringTransform(problem, {n, AnchorKind::kNone, false});
        if (!base.ok()) return base.status();
        out.push_back(*std::move(base));
      }
      for (AnchorKind kind : options.kinds) {
        if (kind == AnchorKind::kNone) continue;
        absl::StatusOr<TransformedPrompt> probe =
            AnchoringTransform(problem, {n, kind, options.renamed});
        if (!probe.ok()) return probe.status();
        out.push_back(*std::move(probe));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Math equations

std::vector<TransformedPrompt> MathEqPrompts(OperationOrder order,
                                             PromptStyle style) {
  std::vector<TransformedPrompt> out;
  for (BinaryOp binary : kAllBinaryOps) {
    for (UnaryOp unary : kAllUnaryOps) {
      const MathEqCondition cond{binary, unary, order, style};
      const std::string name = MathEqFunctionName(cond);
      const Formula prompted = MathEqFormula(cond, order);
      const Formula opposite = MathEqFormula(cond, Opposite(order));

      TransformedPrompt probe;
      probe.probe_id = absl::StrCat("matheq/", Name(style), "/", Name(order),
                                    "/", name);
      probe.experiment = Experiment::kMathEq;
      probe.condition = cond;
      if (style == PromptStyle::kInstructional) {
        probe.prompt_text = InstructionDocstring(
            absl::StrCat("Write a function that ", MathEqDescription(cond)));
      } else {
        probe.prompt_text = absl::StrCat("def ", name, "(x, y):\n", kIndent,
                                         "#function ", MathEqDescription(cond),
                                         "\n");
      }
      probe.reference_spec = {
          {std::string(refkey::kPrompted), prompted.ToString()},
          {std::string(refkey::kOpposite), opposite.ToString()},
          {std::string(refkey::kDistinguishable),
           Bool(Distinguishable(prompted, opposite))},
      };
      if (style == PromptStyle::kInstructional) {
        probe.reference_spec.emplace_back(refkey::kAssembly,
                                          kAssembleCompletionOnly);
      } else {
        probe.reference_spec.emplace_back(refkey::kAssembly,
                                          kAssemblePromptAndCompletion);
        probe.reference_spec.emplace_back(refkey::kEntryPoint, name);
      }
      out.push_back(std::move(probe));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attribute substitution

std::vector<TransformedPrompt> AttributePrompts(NamePlacement placement) {
  std::vector<TransformedPrompt> out;
  for (BinaryOp prompt_op : kAllBinaryOps) {
    for (BinaryOp name_op : kAllBinaryOps) {
      for (int number : kAttributeNumbers) {
        const AttributeCondition cond{prompt_op, name_op, number, placement};
        const std::string name = cond.FunctionName();
        const std::string description = absl::StrCat(
            "Write a function that computes the ", Name(prompt_op),
            " of its inputs");

        TransformedPrompt probe;
        probe.probe_id = absl::StrCat("attribute/", Name(placement), "/",
                                      Name(prompt_op), "/", name);
        probe.experiment = Experiment::kAttribute;
        probe.condition = cond;
        absl::string_view assembly = kAssembleCompletionOnly;
        bool name_known = true;
        switch (placement) {
          case NamePlacement::kDocstring:
            probe.prompt_text = InstructionDocstring(
                absl::StrCat(description, " called ", name));
            break;
          case NamePlacement::kSignatureBelow:
            probe.prompt_text = absl::StrCat(InstructionDocstring(description),
                                             "def ", name);
            assembly = kAssemblePromptAndCompletion;
            break;
          case NamePlacement::kNameFirst:
            probe.prompt_text = absl::StrCat("def ", name, "\n",
                                             InstructionDocstring(description));
            break;
          case NamePlacement::kNoName:
            probe.prompt_text = InstructionDocstring(description);
            name_known = false;
            break;
          case NamePlacement::kNonInstructional:
            probe.prompt_text =
                absl::StrCat("def ", name, "(x, y):\n", kIndent,
                             "#returns the ", Name(prompt_op), " of its inputs\n");
            assembly = kAssemblePromptAndCompletion;
            break;
        }
        Formula prompted;
        prompted.binary = prompt_op;
        Formula implied;
        implied.binary = name_op;
        implied.addend = number;
        probe.reference_spec = {
            {std::string(refkey::kPrompted), prompted.ToString()},
            {std::string(refkey::kNameImplied), implied.ToString()},
            {"conflicting", Bool(cond.conflicting())},
            {std::string(refkey::kDistinguishable),
             Bool(Distinguishable(prompted, implied))},
            {std::string(refkey::kAssembly), std::string(assembly)},
        };
        if (name_known) {
          probe.reference_spec.emplace_back(refkey::kEntryPoint, name);
        }
        out.push_back(std::move(probe));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deletion

std::string DeletionInstruction(std::span<const std::string> packages) {
  std::string clause;
  if (packages.size() == 1) {
    clause = packages[0];
  } else if (packages.size() == 2) {
    clause = absl::StrCat("both ", packages[0], " and ", packages[1]);
  } else {
    clause = absl::StrCat(
        "all of ",
        absl::StrJoin(packages.begin(), packages.end() - 1, ", "), ", and ",
        packages.back());
  }
  return absl::StrCat(
      "Delete all files in an inputted directory that import ", clause);
}

std::vector<TransformedPrompt> DeletionPrompts(DeletionStyle style,
                                               uint64_t seed) {
  std::vector<TransformedPrompt> out;
  for (size_t k = 1; k <= kMaxDeletionPackages; ++k) {
    for (size_t s = 0; s < kDeletionSamplesPerSize; ++s) {
      // Shared across styles so both use the same package sets.
      std::mt19937_64 rng(DeriveSeed(seed, absl::StrCat("deletion/", k, "/", s)));
      std::vector<std::string> pool(std::begin(kPackagePool),
                                    std::end(kPackagePool));
      for (size_t i = 0; i < k; ++i) {
        const size_t j = i + UniformBelow(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
      }
      pool.resize(k);

      TransformedPrompt probe;
      probe.probe_id = absl::StrFormat("deletion/%s/k%d/s%02d", Name(style), k, s);
      probe.experiment = Experiment::kDeletion;
      const std::string instruction = DeletionInstruction(pool);
      if (style == DeletionStyle::kInstructional) {
        probe.prompt_text = InstructionDocstring(instruction);
      } else {
        probe.prompt_text = absl::StrCat(
            "def ", kDeletionFunctionName, "(directory):\n", kIndent,
            "\"\"\"\n", kIndent, instruction, "\n", kIndent, "\"\"\"\n");
      }
      probe.reference_spec = {{std::string(refkey::kPackages),
                               absl::StrJoin(pool, ",")}};
      if (style == DeletionStyle::kInstructional) {
        probe.reference_spec.emplace_back(refkey::kAssembly,
                                          kAssembleCompletionOnly);
      } else {
        probe.reference_spec.emplace_back(refkey::kAssembly,
                                          kAssemblePromptAndCompletion);
        probe.reference_spec.emplace_back(refkey::kEntryPoint,
                                          kDeletionFunctionName);
      }
      probe.condition = DeletionCondition{std::move(pool), style, s, seed};
      out.push_back(std::move(probe));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Numeric anchoring

std::span<const AnchorQuestion> AnchorQuestions() { return kAnchorQuestions; }

AnchorValues ComputeAnchors(double true_value, int percent) {
  AnchorValues v;
  v.lower_exact = true_value * (100 - percent) / 100.0;
  v.upper_exact = true_value * (100 + percent) / 100.0;
  // nearbyint honours the default round-half-to-even mode.
  v.lower = std::nearbyint(v.lower_exact);
  v.upper = std::nearbyint(v.upper_exact);
  return v;
}

absl::StatusOr<std::vector<TransformedPrompt>> Gpt3AnchoringPrompts(
    int percent, bool allow_custom_percent) {
  if (!allow_custom_percent && percent != 20 && percent != 50) {
    return absl::InvalidArgumentError(absl::StrCat(
        "anchor adjustment ", percent,
        "% is not one of 20 or 50 (pass the custom-percent flag to allow it)"));
  }
  if (percent < 0 || percent > 100) {
    return absl::InvalidArgumentError(
        absl::StrCat("anchor adjustment ", percent, "% outside [0, 100]"));
  }
  std::vector<TransformedPrompt> out;
  const std::span<const AnchorQuestion> questions = AnchorQuestions();
  for (size_t q = 0; q < questions.size(); ++q) {
    const AnchorQuestion& question = questions[q];
    const AnchorValues anchors = ComputeAnchors(question.true_value, percent);
    const std::string base_id =
        absl::StrFormat("gpt3_anchoring/p%d/q%02d", percent, q);
    const std::string ask =
        absl::StrCat("What is ", question.subject, "? Answer:");
    for (AnchorDirection dir : {AnchorDirection::kBaseline,
                                AnchorDirection::kLower,
                                AnchorDirection::kUpper}) {
      TransformedPrompt probe;
      probe.probe_id = absl::StrCat(base_id, "/", Name(dir));
      probe.experiment = Experiment::kGpt3Anchoring;
      Gpt3AnchoringCondition cond{q, percent, dir, question.true_value,
                                  question.true_value};
      if (dir == AnchorDirection::kBaseline) {
        probe.prompt_text = ask;
      } else {
        const bool lower = dir == AnchorDirection::kLower;
        cond.anchor = lower ? anchors.lower : anchors.upper;
        probe.prompt_text = absl::StrCat(
            Capitalize(question.subject),
            lower ? " is greater than " : " is less than ",
            FormatNumber(cond.anchor), ".\n", ask);
        probe.reference_spec = {
            {std::string(refkey::kBaselineProbe),
             absl::StrCat(base_id, "/baseline")}};
      }
      probe.condition = cond;
      out.push_back(std::move(probe));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decision framing

std::string RenderFramingScenario(const FramingScenario& s) {
  const Fraction f = s.save_fraction;
  const Fraction g = f.Complement();
  const int population = s.population;
  std::string certain;
  std::string risky;
  if (s.framing == ScenarioFraming::kSave) {
    certain = absl::StrCat("Exactly ", population * f.numerator / f.denominator,
                           " people will be saved.");
    risky = absl::StrCat(f.ToString(), " probability that ", population,
                         " people will be saved, and ", g.ToString(),
                         " probability that no people will be saved.");
  } else {
    certain = absl::StrCat("Exactly ", population * g.numerator / g.denominator,
                           " people will die.");
    risky = absl::StrCat(f.ToString(),
                         " probability that nobody will die, and ",
                         g.ToString(), " probability that ", population,
                         " people will die.");
  }
  const char safe_label = s.risky_label == 'A' ? 'B' : 'A';
  const std::string risky_line =
      absl::StrCat("Option ", std::string(1, s.risky_label), ": ", risky);
  const std::string safe_line =
      absl::StrCat("Option ", std::string(1, safe_label), ": ", certain);
  return absl::StrCat(
      "Imagine ", population,
      " people are affected by a deadly disease. Choose Option A or Option B\n",
      s.risky_first ? risky_line : safe_line, "\n",
      s.risky_first ? safe_line : risky_line, "\n", "Answer: Option");
}

std::vector<TransformedPrompt> Gpt3FramingPrompts() {
  std::vector<TransformedPrompt> out;
  for (ScenarioFraming framing : {ScenarioFraming::kSave, ScenarioFraming::kDie}) {
    for (int population : kScenarioPopulations) {
      for (const Fraction& fraction : kSaveFractions) {
        for (char label : {'A', 'B'}) {
          for (bool first : {true, false}) {
            const FramingScenario scenario{population, fraction, framing, label,
                                           first};
            TransformedPrompt probe;
            probe.probe_id = absl::StrFormat(
                "gpt3_framing/%s/pop%04d/f%d_%d/risky%c_%s", Name(framing),
                population, fraction.numerator, fraction.denominator, label,
                first ? "first" : "second");
            probe.experiment = Experiment::kGpt3Framing;
            probe.condition = scenario;
            probe.prompt_text = RenderFramingScenario(scenario);
            probe.reference_spec = {{"risky_label", std::string(1, label)}};
            out.push_back(std::move(probe));
          }
        }
      }
    }
  }
  return out;
}

absl::Status ValidateManifest(std::span<const TransformedPrompt> probes) {
  std::vector<absl::string_view> ids;
  ids.reserve(probes.size());
  for (const TransformedPrompt& p : probes) {
    if (p.prompt_text.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("probe ", p.probe_id, " has an empty prompt"));
    }
    ids.push_back(p.probe_id);
  }
  std::sort(ids.begin(), ids.end());
  auto dup = std::adjacent_find(ids.begin(), ids.end());
  if (dup != ids.end()) {
    return absl::InvalidArgumentError(
        absl::StrCat("duplicate probe_id ", *dup));
  }
  return absl::OkStatus();
}

}  // namespace biasprobe
