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

#include "detector_cases.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace biasprobe {
namespace {

using ::testing::ElementsAre;

TEST(DetectorCasesTest, LineDetector) {
  for (const testing::LineCase& c : testing::LineCases()) {
    EXPECT_EQ(DetectLine(c.completion, c.target), c.present)
        << c.target << " in <" << c.completion << ">";
  }
}

TEST(DetectorCasesTest, AnchorFragments) {
  for (const testing::FragmentCase& c : testing::FragmentCases()) {
    AnchorFragments f = DetectAnchorFragments(c.completion);
    EXPECT_EQ(f.for_var, c.for_var) << c.completion;
    EXPECT_EQ(f.print_var, c.print_var) << c.completion;
    EXPECT_EQ(f.returns_tmp, c.returns_tmp) << c.completion;
  }
}

TEST(DetectorCasesTest, ExactCopy) {
  for (const testing::CopyCase& c : testing::CopyCases()) {
    EXPECT_EQ(DetectExactCopy(c.completion, c.continuation), c.copy)
        << c.completion;
  }
}

TEST(DetectorCasesTest, NumericAnswers) {
  for (const testing::NumericCase& c : testing::NumericCases()) {
    NumericAnswer a = ParseNumericAnswer(c.text);
    EXPECT_EQ(a.value, c.value) << c.text;
  }
}

TEST(DetectorCasesTest, OptionChoices) {
  for (const testing::OptionCase& c : testing::OptionCases()) {
    EXPECT_EQ(ParseOptionChoice(c.text), c.choice) << c.text;
  }
}

TEST(DetectorCasesTest, AtLeastThirtyCases) {
  EXPECT_GE(testing::DetectorCaseCount(), 30u);
}

// HumanEval/105 legitimately loops `for var in sorted_arr:`; no other
// canonical solution contains an anchor fragment.
TEST(DetectorTest, CanonicalSolutionsCarryNoAnchorFragmentsOrCopies) {
  for (const CodeProblem& p : testing::Corpus()) {
    AnchorFragments f = DetectAnchorFragments(p.canonical_solution);
    EXPECT_EQ(f.for_var, p.task_id == "HumanEval/105") << p.task_id;
    EXPECT_FALSE(f.print_var || f.returns_tmp) << p.task_id;
    EXPECT_FALSE(DetectExactCopy(p.canonical_solution,
                                 "    for var in [x]:\n        print(var)\n"));
  }
}

std::vector<ProbeOutcome> Outcomes(const Formula& f,
                                   std::span<const ProbeInput> inputs) {
  std::vector<ProbeOutcome> out;
  for (const ProbeInput& in : inputs) {
    out.push_back({OutcomeKind::kValue, f.Evaluate(in.x, in.y), ""});
  }
  return out;
}

TEST(ClassifyMathEqTest, CorrectSwappedAndOther) {
  const Formula prompted{BinaryOp::kSum, UnaryOp::kSquare,
                         OperationOrder::kBinaryFirst, 0};
  const Formula opposite{BinaryOp::kSum, UnaryOp::kSquare,
                         OperationOrder::kUnaryFirst, 0};
  const std::vector<ProbeInput> inputs = ProbeInputPlan(prompted, opposite);
  EXPECT_EQ(*ClassifyMathEq(Outcomes(prompted, inputs), inputs, prompted, opposite),
            MathEqCategory::kCorrect);
  EXPECT_EQ(*ClassifyMathEq(Outcomes(opposite, inputs), inputs, prompted, opposite),
            MathEqCategory::kSwappedOrder);
  std::vector<ProbeOutcome> raising = Outcomes(prompted, inputs);
  raising[0] = {OutcomeKind::kException, std::nullopt, "ZeroDivisionError"};
  EXPECT_EQ(*ClassifyMathEq(raising, inputs, prompted, opposite),
            MathEqCategory::kOther);
  std::vector<ProbeOutcome> non_numeric = Outcomes(prompted, inputs);
  non_numeric.back().value.reset();
  EXPECT_EQ(*ClassifyMathEq(non_numeric, inputs, prompted, opposite),
            MathEqCategory::kOther);
}

TEST(ClassifyMathEqTest, IndistinguishableReferencesAreAnError) {
  const Formula a{BinaryOp::kProduct, UnaryOp::kSquare,
                  OperationOrder::kBinaryFirst, 0};
  const Formula b{BinaryOp::kProduct, UnaryOp::kSquare,
                  OperationOrder::kUnaryFirst, 0};
  const std::vector<ProbeInput> inputs = ProbeInputPlan(a, b);
  EXPECT_FALSE(ClassifyMathEq(Outcomes(a, inputs), inputs, a, b).ok());
  absl::StatusOr<MathEqCategory> lenient =
      ClassifyMathEq(Outcomes(a, inputs), inputs, a, b, false);
  ASSERT_TRUE(lenient.ok());
  EXPECT_EQ(*lenient, MathEqCategory::kCorrect);
}

TEST(ClassifyAttributeTest, PromptVersusName) {
  const Formula sum{BinaryOp::kSum, std::nullopt, OperationOrder::kUnaryFirst, 0};
  const Formula product_plus_2{BinaryOp::kProduct, std::nullopt,
                               OperationOrder::kUnaryFirst, 2};
  const Formula product{BinaryOp::kProduct, std::nullopt,
                        OperationOrder::kUnaryFirst, 0};
  const std::vector<ProbeInput> inputs = ProbeInputPlan(sum, product_plus_2);
  EXPECT_EQ(*ClassifyAttribute(Outcomes(sum, inputs), inputs, sum, product_plus_2),
            AttributeCategory::kCorrect);
  EXPECT_EQ(*ClassifyAttribute(Outcomes(product_plus_2, inputs), inputs, sum,
                               product_plus_2),
            AttributeCategory::kMatchesFunctionName);
  EXPECT_EQ(*ClassifyAttribute(Outcomes(product, inputs), inputs, sum,
                               product_plus_2),
            AttributeCategory::kOther);
}

TEST(DeletionTest, PredictionsOverTheFourFileFixture) {
  const std::vector<FixtureFile> fixture = {
      {"fA.py", {"A"}}, {"fB.py", {"B"}}, {"fAB.py", {"A", "B"}}, {"f0.py", {}}};
  const std::vector<std::string> s = {"A", "B"};
  EXPECT_THAT(PredictDeletion(fixture, s, DeletionRule::kAll),
              ElementsAre("fAB.py"));
  EXPECT_THAT(PredictDeletion(fixture, s, DeletionRule::kAny),
              ElementsAre("fA.py", "fAB.py", "fB.py"));
  EXPECT_THAT(PredictDeletion(fixture, s, DeletionRule::kFirst),
              ElementsAre("fA.py", "fAB.py"));
}

TEST(DeletionTest, Categories) {
  const std::vector<std::string> s = {"statsmodels", "numpy", "pandas"};
  const std::vector<FixtureFile> fixture = BuildDeletionFixture(s);
  auto category = [&](DeletionRule rule) {
    return ClassifyDeletion(PredictDeletion(fixture, s, rule), true, fixture, s);
  };
  EXPECT_EQ(category(DeletionRule::kAll), DeletionCategory::kCorrect);
  EXPECT_EQ(category(DeletionRule::kFirst), DeletionCategory::kFirstPackageOnly);
  EXPECT_EQ(category(DeletionRule::kAny), DeletionCategory::kAnyPackage);
  EXPECT_EQ(ClassifyDeletion({}, true, fixture, s), DeletionCategory::kNoAction);
  EXPECT_EQ(ClassifyDeletion({"no_imports.py"}, true, fixture, s),
            DeletionCategory::kOtherError);
  EXPECT_EQ(ClassifyDeletion(PredictDeletion(fixture, s, DeletionRule::kAll),
                             false, fixture, s),
            DeletionCategory::kOtherError);
}

TEST(DeletionTest, SingletonSetsCountAsCorrect) {
  const std::vector<std::string> s = {"numpy"};
  const std::vector<FixtureFile> fixture = BuildDeletionFixture(s);
  for (DeletionRule rule : {DeletionRule::kAll, DeletionRule::kFirst, DeletionRule::kAny}) {
    EXPECT_EQ(ClassifyDeletion(PredictDeletion(fixture, s, rule), true, fixture, s),
              DeletionCategory::kCorrect);
  }
}

TEST(AnchoringShiftTest, DistanceRule) {
  auto num = [](double v) { return NumericAnswer{v, ""}; };
  EXPECT_EQ(CategorizeAnchoring(num(2300), num(1500), 1175),
            AnchoringShift::kTowardAnchor);
  EXPECT_EQ(CategorizeAnchoring(num(2300), num(2300), 1175),
            AnchoringShift::kNoChange);
  EXPECT_EQ(CategorizeAnchoring(num(2300), num(1175), 1175),
            AnchoringShift::kTowardAnchor);
  EXPECT_EQ(CategorizeAnchoring(num(2300), num(2600), 1175),
            AnchoringShift::kAwayFromAnchor);
  EXPECT_EQ(CategorizeAnchoring(NumericAnswer{}, num(2600), 1175),
            AnchoringShift::kGibberish);
}

TEST(ClassificationTest, SerializationRoundTrip) {
  Classification c;
  c.probe_id = "anchoring/print_var/n1/HumanEval/3";
  c.experiment = Experiment::kAnchoring;
  c.functional_pass = false;
  c.flags = {{flag::kForVar, true}, {flag::kPrintVar, false}};
  c.category = category::kFailed;
  c.notes = "x";
  const std::string line = SerializeClassification(c);
  absl::StatusOr<Classification> back = ParseClassification(line);
  ASSERT_TRUE(back.ok()) << back.status();
  EXPECT_EQ(SerializeClassification(*back), line);
  EXPECT_TRUE(back->Flag(flag::kForVar));
  EXPECT_FALSE(back->Flag(flag::kPrintVar));
  EXPECT_FALSE(back->Flag("unknown"));
}

// Returns a fixed status for functional jobs and evaluates probe jobs with
// the supplied formula.
class FakeSandbox : public SandboxClient {
 public:
  JobStatus functional = JobStatus::kPassed;
  std::optional<Formula> behaves_like;
  std::vector<SandboxJob> jobs;

  absl::StatusOr<SandboxResult> Run(const SandboxJob& job) override {
    jobs.push_back(job);
    SandboxResult r;
    r.job_id = job.job_id;
    r.status = functional;
    if (const auto* probe = std::get_if<ProbePayload>(&job.payload)) {
      r.status = JobStatus::kPassed;
      for (const ProbeInput& in : probe->inputs) {
        r.outputs.push_back(
            {OutcomeKind::kValue, behaves_like->Evaluate(in.x, in.y), ""});
      }
    }
    return r;
  }
};

CompletionRecord Record(const std::string& id, const std::string& text) {
  CompletionRecord r;
  r.probe_id = id;
  r.backend_id = "test";
  r.completion_text = text;
  return r;
}

TEST(ClassifyRecordTest, AnchoringFlagsAndFunctionalResult) {
  const CodeProblem& problem = testing::Corpus()[0];
  absl::StatusOr<TransformedPrompt> probe =
      AnchoringTransform(problem, {1, AnchorKind::kPrintVar, false});
  ASSERT_TRUE(probe.ok());
  const std::string copy = probe->FindTarget("anchor_continuation")->text;
  FakeSandbox sandbox;
  sandbox.functional = JobStatus::kFailed;
  absl::StatusOr<Classification> c = ClassifyRecord(
      *probe, Record(probe->probe_id, copy), &problem, &sandbox, {});
  ASSERT_TRUE(c.ok()) << c.status();
  EXPECT_TRUE(c->Flag(flag::kForVar));
  EXPECT_TRUE(c->Flag(flag::kPrintVar));
  EXPECT_TRUE(c->Flag(flag::kExactCopy));
  EXPECT_EQ(c->functional_pass, false);
  ASSERT_EQ(sandbox.jobs.size(), 1u);
  const auto& payload = std::get<FunctionalPayload>(sandbox.jobs[0].payload);
  // The anchor function is not part of the executed program.
  EXPECT_EQ(payload.prompt.find(probe->FindTarget("anchor_function")->text),
            std::string::npos);
  EXPECT_EQ(payload.entry_point, problem.entry_point);
}

TEST(ClassifyRecordTest, FailedCompletionCountsAsNonPass) {
  const CodeProblem& problem = testing::Corpus()[0];
  TransformedPrompt probe = FramingOriginal(problem);
  CompletionRecord failed = Record(probe.probe_id, "");
  failed.error = ErrorClass::kTimeout;
  FakeSandbox sandbox;
  absl::StatusOr<Classification> c =
      ClassifyRecord(probe, failed, &problem, &sandbox, {});
  ASSERT_TRUE(c.ok());
  EXPECT_EQ(c->functional_pass, false);
  EXPECT_TRUE(sandbox.jobs.empty());
}

TEST(ClassifyRecordTest, AttributeUsesTheProbeInputPlan) {
  std::vector<TransformedPrompt> probes = AttributePrompts(NamePlacement::kDocstring);
  auto it = std::find_if(probes.begin(), probes.end(), [](const auto& p) {
    return p.probe_id == "attribute/docstring/sum/product_plus_2";
  });
  ASSERT_NE(it, probes.end());
  FakeSandbox sandbox;
  sandbox.behaves_like = Formula{BinaryOp::kProduct, std::nullopt,
                                 OperationOrder::kUnaryFirst, 2};
  absl::StatusOr<Classification> c = ClassifyRecord(
      *it, Record(it->probe_id, "def product_plus_2(x, y):\n    return x*y+2\n"),
      nullptr, &sandbox, {});
  ASSERT_TRUE(c.ok()) << c.status();
  EXPECT_EQ(c->category, Name(AttributeCategory::kMatchesFunctionName));
}

TEST(ClassifyRecordTest, TextExperiments) {
  absl::StatusOr<std::vector<TransformedPrompt>> anchoring = Gpt3AnchoringPrompts(50);
  ASSERT_TRUE(anchoring.ok());
  const TransformedPrompt& base = (*anchoring)[0];
  const TransformedPrompt& lower = (*anchoring)[1];
  std::map<std::string, CompletionRecord> store = {
      {base.probe_id, Record(base.probe_id, " 2,300 miles")},
      {lower.probe_id, Record(lower.probe_id, " 1175")}};
  absl::StatusOr<Classification> c =
      ClassifyRecord(lower, store[lower.probe_id], nullptr, nullptr, store);
  ASSERT_TRUE(c.ok()) << c.status();
  EXPECT_EQ(c->category, Name(AnchoringShift::kTowardAnchor));
  EXPECT_TRUE(c->Flag(flag::kMatchesAnchor));

  std::vector<TransformedPrompt> framing = Gpt3FramingPrompts();
  const TransformedPrompt& scenario = framing[0];
  const std::string risky(1, std::get<FramingScenario>(scenario.condition).risky_label);
  const std::string safe = risky == "A" ? "B" : "A";
  EXPECT_EQ(ClassifyRecord(scenario, Record(scenario.probe_id, " " + risky),
                           nullptr, nullptr, {})
                ->category,
            category::kRisky);
  EXPECT_EQ(ClassifyRecord(scenario, Record(scenario.probe_id, " " + safe),
                           nullptr, nullptr, {})
                ->category,
            category::kSafe);
  EXPECT_EQ(ClassifyRecord(scenario, Record(scenario.probe_id, " neither"),
                           nullptr, nullptr, {})
                ->category,
            category::kGibberish);
}

TEST(ClassifyRunTest, MissingRecordsAreListed) {
  std::vector<TransformedPrompt> probes = Gpt3FramingPrompts();
  std::map<std::string, CompletionRecord> store;
  for (size_t i = 1; i < probes.size(); ++i) {
    store[probes[i].probe_id] = Record(probes[i].probe_id, " A");
  }
  absl::StatusOr<std::vector<Classification>> c =
      ClassifyRun(probes, store, {}, nullptr);
  ASSERT_FALSE(c.ok());
  EXPECT_EQ(c.status().code(), absl::StatusCode::kFailedPrecondition);
  EXPECT_THAT(std::string(c.status().message()),
              ::testing::HasSubstr(probes[0].probe_id));
}

}  // namespace
}  // namespace biasprobe
