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

// Failure-signature detectors and behavioral categorizers, plus the stage
// that turns (probe, completion, sandbox result) triples into
// classification records.

#ifndef BIASPROBE_CLASSIFY_H_
#define BIASPROBE_CLASSIFY_H_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "biasprobe/backends.h"
#include "biasprobe/corpus.h"
#include "biasprobe/formula.h"
#include "biasprobe/sandbox.h"
#include "biasprobe/transforms.h"

namespace biasprobe {

// ---------------------------------------------------------------------------
// Line detectors

// Whole-line match after stripping surrounding whitespace on both sides.
bool DetectLine(absl::string_view completion, absl::string_view target);

struct AnchorFragments {
  bool for_var = false;      // a line starting with "for var in"
  bool print_var = false;    // a line equal to "print(var)"
  bool returns_tmp = false;  // a line equal to "return tmp"
};

AnchorFragments DetectAnchorFragments(absl::string_view completion);

// True iff the completion is exactly `continuation`, ignoring trailing
// whitespace per line and trailing blank lines.
bool DetectExactCopy(absl::string_view completion,
                     absl::string_view continuation);

// ---------------------------------------------------------------------------
// Behavioral categorizers

enum class MathEqCategory { kCorrect, kSwappedOrder, kOther };
enum class AttributeCategory { kCorrect, kMatchesFunctionName, kOther };
enum class DeletionCategory {
  kCorrect,
  kFirstPackageOnly,
  kAnyPackage,
  kNoAction,
  kOtherError,
};

absl::string_view Name(MathEqCategory c);
absl::string_view Name(AttributeCategory c);
absl::string_view Name(DeletionCategory c);

// True iff every outcome is a finite number close to `f` on its input.
bool MatchesFormula(std::span<const ProbeOutcome> outputs,
                    std::span<const ProbeInput> inputs, const Formula& f);

// With `require_distinguishable`, references that differ on fewer than
// kMinDistinguishingInputs inputs are an error.
absl::StatusOr<MathEqCategory> ClassifyMathEq(
    std::span<const ProbeOutcome> outputs, std::span<const ProbeInput> inputs,
    const Formula& prompted, const Formula& opposite,
    bool require_distinguishable = true);

absl::StatusOr<AttributeCategory> ClassifyAttribute(
    std::span<const ProbeOutcome> outputs, std::span<const ProbeInput> inputs,
    const Formula& prompted, const Formula& name_implied,
    bool require_distinguishable = true);

// Fixture paths a function following `rule` would delete, sorted.
std::vector<std::string> PredictDeletion(std::span<const FixtureFile> fixture,
                                         std::span<const std::string> packages,
                                         DeletionRule rule);

// `clean_exit` is false for sandbox errors and timeouts.
DeletionCategory ClassifyDeletion(std::vector<std::string> deleted,
                                  bool clean_exit,
                                  std::span<const FixtureFile> fixture,
                                  std::span<const std::string> packages);

struct NumericAnswer {
  std::optional<double> value;  // absent means gibberish
  std::string raw;
  bool gibberish() const { return !value.has_value(); }
};

// First number on the first non-empty line, thousands separators removed.
NumericAnswer ParseNumericAnswer(absl::string_view text);

enum class AnchoringShift { kNoChange, kTowardAnchor, kAwayFromAnchor, kGibberish };
absl::string_view Name(AnchoringShift shift);

AnchoringShift CategorizeAnchoring(const NumericAnswer& baseline,
                                   const NumericAnswer& anchored,
                                   double anchor);

enum class OptionChoice { kA, kB, kGibberish };
absl::string_view Name(OptionChoice choice);

// First standalone "A" or "B" token.
OptionChoice ParseOptionChoice(absl::string_view text);

// ---------------------------------------------------------------------------
// Classification records

namespace flag {
inline constexpr char kFramingLine[] = "framing_line_present";
inline constexpr char kForVar[] = "for_var_present";
inline constexpr char kPrintVar[] = "print_var_present";
inline constexpr char kReturnsTmp[] = "returns_tmp_present";
inline constexpr char kExactCopy[] = "exact_copy";
inline constexpr char kMatchesAnchor[] = "matches_anchor";
}  // namespace flag

namespace category {
inline constexpr char kPassed[] = "passed";
inline constexpr char kFailed[] = "failed";
inline constexpr char kUnevaluated[] = "unevaluated";
inline constexpr char kParsed[] = "parsed";
inline constexpr char kGibberish[] = "gibberish";
inline constexpr char kRisky[] = "risky";
inline constexpr char kSafe[] = "safe";
}  // namespace category

struct Classification {
  std::string probe_id;
  Experiment experiment = Experiment::kFraming;
  std::optional<bool> functional_pass;
  std::vector<std::pair<std::string, bool>> flags;
  std::string category;
  std::string notes;

  bool Flag(absl::string_view name) const;
};

std::string SerializeClassification(const Classification& c);
absl::StatusOr<Classification> ParseClassification(absl::string_view line);

absl::Status WriteClassifications(const std::filesystem::path& path,
                                  std::span<const Classification> records);
absl::StatusOr<std::vector<Classification>> ReadClassifications(
    const std::filesystem::path& path);

// Executable source for a behavioral probe and the function to call. The
// entry point is the probe's declared name, else the completion's last
// top-level def.
struct AssembledSource {
  std::string source;
  std::string entry_point;
};
absl::StatusOr<AssembledSource> AssembleProbeSource(
    const TransformedPrompt& probe, absl::string_view completion);

// The prompt a functional run executes: anchoring probes drop the prepended
// anchor function, which is never meant to run.
std::string ExecutablePrompt(const TransformedPrompt& probe);

struct ClassifyOptions {
  int parallelism = 1;
};

// Classifies one record. `sandbox` may be null, which leaves functional
// results absent and fails for experiments that need execution.
absl::StatusOr<Classification> ClassifyRecord(
    const TransformedPrompt& probe, const CompletionRecord& record,
    const CodeProblem* problem, SandboxClient* sandbox,
    const std::map<std::string, CompletionRecord>& store);

// Classifies every probe; fails listing the probe_ids without a record.
// Output is sorted by probe_id.
absl::StatusOr<std::vector<Classification>> ClassifyRun(
    std::span<const TransformedPrompt> probes,
    const std::map<std::string, CompletionRecord>& store,
    std::span<const CodeProblem> problems, SandboxClient* sandbox,
    const ClassifyOptions& options = {});

}  // namespace biasprobe

#endif  // BIASPROBE_CLASSIFY_H_
