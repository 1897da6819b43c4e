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

// Deterministic generators for every transformed prompt set: framing,
// anchoring, math-equation order, attribute substitution, file deletion, and
// the two estimation/choice probes for general text models. Each probe
// carries its condition and the targets the classifier looks for.

#ifndef BIASPROBE_TRANSFORMS_H_
#define BIASPROBE_TRANSFORMS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include "absl/strings/string_view.h"
#include <utility>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "biasprobe/corpus.h"
#include "biasprobe/formula.h"

namespace biasprobe {

enum class Experiment {
  kFraming,
  kAnchoring,
  kMathEq,
  kAttribute,
  kDeletion,
  kGpt3Anchoring,
  kGpt3Framing,
};

inline constexpr Experiment kAllExperiments[] = {
    Experiment::kFraming,  Experiment::kAnchoring,     Experiment::kMathEq,
    Experiment::kAttribute, Experiment::kDeletion,     Experiment::kGpt3Anchoring,
    Experiment::kGpt3Framing};

absl::string_view Name(Experiment experiment);
std::optional<Experiment> ParseExperiment(absl::string_view name);

// True for the experiments whose completions are code.
bool IsCodeExperiment(Experiment experiment);

// Ordered key/value pairs; order is part of the on-disk format.
using Fields = std::vector<std::pair<std::string, std::string>>;

std::optional<std::string> FindField(const Fields& fields, absl::string_view key);

// ---------------------------------------------------------------------------
// Conditions

enum class FramingLine {
  kRaiseNotImplemented,
  kPass,
  kAssertFalse,
  kReturnFalse,
  kPrintHello,
};

inline constexpr FramingLine kAllFramingLines[] = {
    FramingLine::kRaiseNotImplemented, FramingLine::kPass,
    FramingLine::kAssertFalse, FramingLine::kReturnFalse,
    FramingLine::kPrintHello};

// Short identifier, e.g. "assert_false".
absl::string_view Key(FramingLine line);
// The statement itself, e.g. `assert False`.
absl::string_view Code(FramingLine line);
std::optional<FramingLine> ParseFramingLine(absl::string_view key);

struct FramingCondition {
  // nullopt marks the untransformed original prompt.
  std::optional<FramingLine> line;
  std::string distractor_task;
  uint64_t seed = 0;
};

enum class AnchorKind { kNone, kPrintVar, kAddVar };
absl::string_view Name(AnchorKind kind);
std::optional<AnchorKind> ParseAnchorKind(absl::string_view name);

inline constexpr size_t kMaxAnchorLines = 8;

struct AnchoringCondition {
  size_t n_lines = 0;
  AnchorKind kind = AnchorKind::kPrintVar;  // kNone is the no-anchor baseline
  bool renamed = false;
};

enum class PromptStyle { kInstructional, kNonInstructional };
absl::string_view Name(PromptStyle style);
std::optional<PromptStyle> ParsePromptStyle(absl::string_view name);

struct MathEqCondition {
  BinaryOp binary = BinaryOp::kSum;
  UnaryOp unary = UnaryOp::kSquare;
  OperationOrder order = OperationOrder::kUnaryFirst;
  PromptStyle style = PromptStyle::kInstructional;
};

enum class NamePlacement {
  kDocstring,
  kSignatureBelow,
  kNameFirst,
  kNoName,
  kNonInstructional,
};

inline constexpr NamePlacement kAllPlacements[] = {
    NamePlacement::kDocstring, NamePlacement::kSignatureBelow,
    NamePlacement::kNameFirst, NamePlacement::kNoName,
    NamePlacement::kNonInstructional};

absl::string_view Name(NamePlacement placement);
std::optional<NamePlacement> ParseNamePlacement(absl::string_view name);

inline constexpr int kAttributeNumbers[] = {0, 1, 2, 3, 4, 5,
                                            10, 100, 1000, 10000};

struct AttributeCondition {
  BinaryOp prompt_op = BinaryOp::kSum;
  BinaryOp name_op = BinaryOp::kSum;
  int number = 0;
  NamePlacement placement = NamePlacement::kDocstring;

  bool conflicting() const { return prompt_op != name_op; }
  // "<name_op>_plus_<number>", e.g. "product_plus_2".
  std::string FunctionName() const;
};

enum class DeletionStyle { kInstructional, kDocstring };
absl::string_view Name(DeletionStyle style);
std::optional<DeletionStyle> ParseDeletionStyle(absl::string_view name);

inline constexpr absl::string_view kPackagePool[] = {
    "pandas", "numpy",       "sklearn", "gradio", "tensorflow",
    "keras",  "scipy",       "statsmodels", "plotly", "seaborn"};
inline constexpr size_t kMaxDeletionPackages = 6;
inline constexpr size_t kDeletionSamplesPerSize = 10;
inline constexpr absl::string_view kDeletionFunctionName =
    "delete_all_with_libraries";

struct DeletionCondition {
  std::vector<std::string> packages;
  DeletionStyle style = DeletionStyle::kInstructional;
  size_t sample_index = 0;
  uint64_t seed = 0;
};

enum class AnchorDirection { kBaseline, kLower, kUpper };
absl::string_view Name(AnchorDirection direction);
std::optional<AnchorDirection> ParseAnchorDirection(absl::string_view name);

struct Gpt3AnchoringCondition {
  size_t question_index = 0;
  int percent = 50;
  AnchorDirection direction = AnchorDirection::kBaseline;
  double true_value = 0;
  double anchor = 0;  // equals true_value for the baseline
};

enum class ScenarioFraming { kSave, kDie };
absl::string_view Name(ScenarioFraming framing);

struct Fraction {
  int numerator = 1;
  int denominator = 2;
  double value() const {
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
  Fraction Complement() const { return {denominator - numerator, denominator}; }
  std::string ToString() const;
  friend bool operator==(const Fraction&, const Fraction&) = default;
};

inline constexpr int kScenarioPopulations[] = {60,   300,  600,  900,
                                               1200, 1500, 3000, 6000};
// Reduced fractions with denominator below seven.
inline constexpr Fraction kSaveFractions[] = {{1, 2}, {1, 3}, {2, 3}, {1, 4},
                                              {3, 4}, {1, 5}, {2, 5}, {3, 5},
                                              {4, 5}, {1, 6}, {5, 6}};

struct FramingScenario {
  int population = 600;
  Fraction save_fraction;
  ScenarioFraming framing = ScenarioFraming::kSave;
  char risky_label = 'B';
  bool risky_first = false;
};

using Condition =
    std::variant<FramingCondition, AnchoringCondition, MathEqCondition,
                 AttributeCondition, DeletionCondition, Gpt3AnchoringCondition,
                 FramingScenario>;

Fields FlattenCondition(const Condition& condition);
absl::StatusOr<Condition> ParseCondition(Experiment experiment,
                                         const Fields& fields);

// ---------------------------------------------------------------------------
// Probes

struct DetectionTarget {
  std::string name;
  std::string text;
  friend bool operator==(const DetectionTarget&,
                         const DetectionTarget&) = default;
};

// Keys of TransformedPrompt::reference_spec read by the classifier.
namespace refkey {
inline constexpr absl::string_view kEntryPoint = "entry_point";
// "prompt+completion" or "completion": how executable source is assembled.
inline constexpr absl::string_view kAssembly = "assembly";
inline constexpr absl::string_view kPrompted = "prompted";
inline constexpr absl::string_view kOpposite = "opposite";
inline constexpr absl::string_view kNameImplied = "name_implied";
inline constexpr absl::string_view kDistinguishable = "distinguishable";
inline constexpr absl::string_view kPackages = "packages";
inline constexpr absl::string_view kBaselineProbe = "baseline_probe";
}  // namespace refkey

inline constexpr absl::string_view kAssemblePromptAndCompletion =
    "prompt+completion";
inline constexpr absl::string_view kAssembleCompletionOnly = "completion";

struct TransformedPrompt {
  std::string probe_id;
  Experiment experiment = Experiment::kFraming;
  std::optional<std::string> base_task;
  Condition condition;
  std::string prompt_text;
  std::vector<DetectionTarget> detection_targets;
  Fields reference_spec;

  const DetectionTarget* FindTarget(absl::string_view name) const;
  std::optional<std::string> Reference(absl::string_view key) const {
    return FindField(reference_spec, key);
  }
};

// ---------------------------------------------------------------------------
// Framing: an irrelevant preceding function (a random other prompt whose body
// is a single framing line) in front of the target prompt.

TransformedPrompt FramingTransform(const CodeProblem& problem,
                                   const CodeProblem& distractor,
                                   FramingLine line, uint64_t seed);

// The untransformed prompt, targeting all five framing lines.
TransformedPrompt FramingOriginal(const CodeProblem& problem);

// Index of the distractor for problems[index]: uniform over the others,
// drawn independently per (problem, line) from `seed`.
size_t DrawDistractor(std::span<const CodeProblem> problems, size_t index,
                      FramingLine line, uint64_t seed);

struct FramingOptions {
  uint64_t seed = 0;
  std::vector<FramingLine> lines{std::begin(kAllFramingLines),
                                 std::end(kAllFramingLines)};
  bool include_original = true;
};

absl::StatusOr<std::vector<TransformedPrompt>> FramingPrompts(
    std::span<const CodeProblem> problems, const FramingOptions& options);

// ---------------------------------------------------------------------------
// Anchoring

// The anchor function: annotation-free signature, first n solution lines,
// then the anchor lines, at one body indentation level.
absl::StatusOr<std::string> BuildAnchorFunction(const CodeProblem& problem,
                                                const AnchoringCondition& cond);

// Anchored probe, or the no-anchor baseline when cond.kind == kNone.
absl::StatusOr<TransformedPrompt> AnchoringTransform(
    const CodeProblem& problem, const AnchoringCondition& cond);

struct AnchoringOptions {
  std::vector<AnchorKind> kinds{AnchorKind::kPrintVar, AnchorKind::kAddVar};
  size_t min_lines = 0;
  size_t max_lines = kMaxAnchorLines;
  bool renamed = false;
  bool include_baseline = true;
};

// For every n in range, every problem passing FilterBySolutionLength(n):
// one probe per anchor kind plus one shared baseline.
absl::StatusOr<std::vector<TransformedPrompt>> AnchoringPrompts(
    std::span<const CodeProblem> problems, const AnchoringOptions& options);

// ---------------------------------------------------------------------------
// Math equations (operation order) and attribute substitution

std::vector<TransformedPrompt> MathEqPrompts(OperationOrder order,
                                             PromptStyle style);

std::vector<TransformedPrompt> AttributePrompts(NamePlacement placement);

// ---------------------------------------------------------------------------
// High-impact deletion

std::string DeletionInstruction(std::span<const std::string> packages);

std::vector<TransformedPrompt> DeletionPrompts(DeletionStyle style,
                                               uint64_t seed);

// ---------------------------------------------------------------------------
// Numeric anchoring and decision framing for text models

struct AnchorQuestion {
  absl::string_view subject;  // "the length of the Mississippi River (in miles)"
  double true_value;
};

std::span<const AnchorQuestion> AnchorQuestions();

struct AnchorValues {
  double lower_exact = 0;
  double upper_exact = 0;
  double lower = 0;  // rounded to the nearest integer, ties to even
  double upper = 0;
};

AnchorValues ComputeAnchors(double true_value, int percent);

// Baseline plus lower/upper anchored prompts for each question. Percentages
// other than 20 and 50 require allow_custom_percent.
absl::StatusOr<std::vector<TransformedPrompt>> Gpt3AnchoringPrompts(
    int percent, bool allow_custom_percent = false);

std::string RenderFramingScenario(const FramingScenario& scenario);

std::vector<TransformedPrompt> Gpt3FramingPrompts();

// Formats a number without a trailing ".0" for integral values.
std::string FormatNumber(double value);

// ---------------------------------------------------------------------------
// Manifests: one probe per line, stable field order.

std::string SerializeProbe(const TransformedPrompt& probe);
absl::StatusOr<TransformedPrompt> ParseProbe(absl::string_view line);

absl::Status WriteManifest(const std::filesystem::path& path,
                           std::span<const TransformedPrompt> probes);
absl::StatusOr<std::vector<TransformedPrompt>> ReadManifest(
    const std::filesystem::path& path);

// Fails on the first duplicate probe_id or empty prompt.
absl::Status ValidateManifest(std::span<const TransformedPrompt> probes);

}  // namespace biasprobe

#endif  // BIASPROBE_TRANSFORMS_H_
