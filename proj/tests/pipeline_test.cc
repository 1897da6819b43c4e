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

#include <sstream>

#include "absl/strings/match.h"
#include "biasprobe/io.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace biasprobe {
namespace {

namespace fs = std::filesystem;

RunConfig BaseConfig(const fs::path& out) {
  RunConfig c;
  c.corpus = testing::CorpusPath();
  c.out = out;
  c.seed = 11;
  c.backend_spec = "synthetic:canonical";
  c.parallelism = 8;
  return c;
}

std::string Slurp(const fs::path& p) {
  absl::StatusOr<std::string> s = ReadFileToString(p);
  EXPECT_TRUE(s.ok()) << p << ": " << s.status();
  return s.ok() ? *s : "";
}

TEST(ValidateConfigTest, RequiresExperiments) {
  testing::ScratchDir dir;
  RunConfig c = BaseConfig(dir.path());
  EXPECT_EQ(ValidateConfig(c).code(), absl::StatusCode::kInvalidArgument);
}

TEST(ValidateConfigTest, SeededExperimentsNeedASeed) {
  testing::ScratchDir dir;
  RunConfig c = BaseConfig(dir.path());
  c.seed.reset();
  c.experiments = {Experiment::kMathEq};
  EXPECT_TRUE(ValidateConfig(c).ok());
  c.experiments = {Experiment::kFraming};
  EXPECT_FALSE(ValidateConfig(c).ok());
  c.experiments = {Experiment::kDeletion};
  EXPECT_FALSE(ValidateConfig(c).ok());
}

TEST(ValidateConfigTest, CustomPercentNeedsOptIn) {
  testing::ScratchDir dir;
  RunConfig c = BaseConfig(dir.path());
  c.experiments = {Experiment::kGpt3Anchoring};
  c.params.gpt3_percents = {30};
  EXPECT_FALSE(ValidateConfig(c).ok());
  c.params.allow_custom_percent = true;
  EXPECT_TRUE(ValidateConfig(c).ok());
}

TEST(ValidateConfigTest, RejectsInvertedLineRange) {
  testing::ScratchDir dir;
  RunConfig c = BaseConfig(dir.path());
  c.experiments = {Experiment::kAnchoring};
  c.params.min_lines = 5;
  c.params.max_lines = 2;
  EXPECT_FALSE(ValidateConfig(c).ok());
}

TEST(ExitCodeTest, Mapping) {
  EXPECT_EQ(ExitCodeFor(absl::OkStatus()), 0);
  EXPECT_EQ(ExitCodeFor(absl::InvalidArgumentError("x")), 1);
  EXPECT_EQ(ExitCodeFor(absl::AlreadyExistsError("x")), 1);
  EXPECT_EQ(ExitCodeFor(absl::NotFoundError("x")), 2);
  EXPECT_EQ(ExitCodeFor(absl::FailedPreconditionError("x")), 2);
  EXPECT_EQ(ExitCodeFor(absl::ResourceExhaustedError("x")), 3);
  EXPECT_EQ(ExitCodeFor(absl::UnavailableError("x")), 3);
}

TEST(PipelineTest, ClassifyWithoutStoreIsNotFound) {
  testing::ScratchDir dir;
  RunConfig c = BaseConfig(dir.path());
  c.experiments = {Experiment::kMathEq};
  std::ostringstream log;
  ASSERT_TRUE(GenerateStage(c, log).ok());
  absl::Status s = ClassifyStage(c, log);
  EXPECT_EQ(s.code(), absl::StatusCode::kNotFound) << s;
  EXPECT_EQ(ExitCodeFor(s), 2);
}

TEST(PipelineTest, RunRefusesExistingStoreWithoutResume) {
  testing::ScratchDir dir;
  RunConfig c = BaseConfig(dir.path());
  c.experiments = {Experiment::kGpt3Anchoring};
  std::ostringstream log;
  ASSERT_TRUE(GenerateStage(c, log).ok());
  ASSERT_TRUE(RunStage(c, log).ok());
  EXPECT_EQ(RunStage(c, log).code(), absl::StatusCode::kAlreadyExists);
  c.resume = true;
  EXPECT_TRUE(RunStage(c, log).ok());
}

TEST(PipelineTest, GenerateReportsProbeCounts) {
  testing::ScratchDir dir;
  RunConfig c = BaseConfig(dir.path());
  c.experiments = {Experiment::kGpt3Framing};
  std::ostringstream log;
  ASSERT_TRUE(GenerateStage(c, log).ok());
  EXPECT_TRUE(absl::StrContains(log.str(), "gpt3_framing: 704 probes"))
      << log.str();
  OutputLayout layout{dir.path()};
  absl::StatusOr<std::vector<TransformedPrompt>> m =
      ReadManifest(layout.Manifest(Experiment::kGpt3Framing));
  ASSERT_TRUE(m.ok());
  EXPECT_EQ(m->size(), 704u);
}

TEST(PipelineTest, ReportIsIdempotent) {
  testing::ScratchDir dir;
  RunConfig c = BaseConfig(dir.path());
  c.experiments = {Experiment::kMathEq, Experiment::kGpt3Anchoring};
  c.sandbox_command = testing::RunnerCommand();
  std::ostringstream log;
  ASSERT_TRUE(AllStages(c, log).ok()) << log.str();
  OutputLayout layout{dir.path()};
  const fs::path csv = layout.Reports(Experiment::kMathEq) / "matheq.csv";
  const fs::path json = layout.Reports(Experiment::kMathEq) / "report.json";
  const std::string csv1 = Slurp(csv), json1 = Slurp(json);
  ASSERT_FALSE(csv1.empty());
  ASSERT_TRUE(ReportStage(c, log).ok());
  EXPECT_EQ(Slurp(csv), csv1);
  EXPECT_EQ(Slurp(json), json1);
}

TEST(PipelineTest, CanonicalModelSolvesEveryOriginalPrompt) {
  testing::ScratchDir dir;
  RunConfig c = BaseConfig(dir.path());
  c.experiments = {Experiment::kFraming};
  c.params.framing_lines = {FramingLine::kAssertFalse};
  c.sandbox_command = testing::RunnerCommand();
  c.model_label = "canonical";
  std::ostringstream log;
  absl::Status s = AllStages(c, log);
  ASSERT_TRUE(s.ok()) << s << "\n" << log.str();
  const std::string csv =
      Slurp(OutputLayout{dir.path()}.Reports(Experiment::kFraming) /
            "framing.csv");
  // Header, then one row per framing line.
  EXPECT_TRUE(absl::StrContains(csv, "canonical,assert_false,164,100.0,100.0,"))
      << csv;
}

}  // namespace
}  // namespace biasprobe
