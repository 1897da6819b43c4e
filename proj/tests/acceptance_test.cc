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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Every expected value is a published count or a property
// of the reference models, never a value read back from this implementation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "biasprobe/backends.h"
#include "biasprobe/classify.h"
#include "biasprobe/corpus.h"
#include "biasprobe/io.h"
#include "biasprobe/pipeline.h"
#include "biasprobe/report.h"
#include "biasprobe/transforms.h"
#include "detector_cases.h"
#include "test_util.h"

namespace biasprobe {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::vector<std::string> problems;
  std::string summary;

  void Require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (problems.size() < 12) problems.push_back(what);
    }
  }
  void Check(const absl::Status& s, const std::string& what) {
    Require(s.ok(), absl::StrCat(what, ": ", s.ToString()));
  }
};

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

RunConfig SandboxedConfig(const fs::path& out, const std::string& backend) {
  RunConfig c;
  c.corpus = testing::CorpusPath();
  c.out = out;
  c.seed = 20230213;
  c.backend_spec = backend;
  c.parallelism = 8;
  c.sandbox_command = testing::RunnerCommand();
  return c;
}

// Runs every stage, then aggregates `experiment` from the files on disk.
absl::StatusOr<std::vector<ReportTable>> RunAndAggregate(
    const RunConfig& config, Experiment experiment) {
  std::ostringstream log;
  absl::Status s = AllStages(config, log);
  if (!s.ok()) return s;
  OutputLayout layout{config.out};
  absl::StatusOr<std::vector<TransformedPrompt>> probes =
      ReadManifest(layout.Manifest(experiment));
  if (!probes.ok()) return probes.status();
  absl::StatusOr<std::vector<Classification>> cls =
      ReadClassifications(layout.Classifications(experiment));
  if (!cls.ok()) return cls.status();
  return Aggregate(*probes, *cls, experiment, "model");
}

const ReportTable* FindTable(const std::vector<ReportTable>& tables,
                             absl::string_view name) {
  for (const ReportTable& t : tables) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::optional<Metric> RowMetric(const ReportTable& table, const ReportRow& row,
                                absl::string_view metric) {
  return table.Get(row.keys, std::string(metric));
}

std::string Describe(const Metric& m) {
  return absl::StrCat(m.numerator, "/", m.denominator);
}

// ---------------------------------------------------------------------------

Verdict FilterCountsCriterion() {
  Verdict v;
  const auto start = Clock::now();
  absl::StatusOr<CorpusLoad> load = LoadProblems(testing::CorpusPath());
  if (!load.ok()) {
    v.Check(load.status(), "load corpus");
    return v;
  }
  const std::vector<size_t> counts = FilterCounts(load->problems);
  const double secs = Seconds(start);
  const std::vector<size_t> expected = {164, 127, 117, 107, 99, 82, 65, 55, 47};
  v.Require(counts == expected,
            absl::StrCat("counts ", absl::StrJoin(counts, "/")));
  v.Require(secs < 1.0, absl::StrFormat("took %.3f s", secs));
  v.summary = absl::StrFormat("%s in %.3f s", absl::StrJoin(counts, "/"), secs);
  return v;
}

Verdict CardinalityCriterion() {
  Verdict v;
  const auto start = Clock::now();
  const auto& corpus = testing::Corpus();

  FramingOptions fo;
  fo.seed = 7;
  fo.include_original = false;
  absl::StatusOr<std::vector<TransformedPrompt>> framing =
      FramingPrompts(corpus, fo);
  v.Require(framing.ok() && framing->size() == 5 * 164, "framing != 5x164");

  for (OperationOrder order :
       {OperationOrder::kUnaryFirst, OperationOrder::kBinaryFirst}) {
    for (PromptStyle style :
         {PromptStyle::kInstructional, PromptStyle::kNonInstructional}) {
      const size_t n = MathEqPrompts(order, style).size();
      v.Require(n == 12, absl::StrCat("matheq ", Name(style), " has ", n));
    }
  }
  for (NamePlacement p : kAllPlacements) {
    const size_t n = AttributePrompts(p).size();
    v.Require(n == 90, absl::StrCat("attribute ", Name(p), " has ", n));
  }
  for (DeletionStyle s : {DeletionStyle::kInstructional, DeletionStyle::kDocstring}) {
    const size_t n = DeletionPrompts(s, 7).size();
    v.Require(n == 60, absl::StrCat("deletion ", Name(s), " has ", n));
  }
  const size_t scenarios = Gpt3FramingPrompts().size();
  v.Require(scenarios == 704, absl::StrCat("gpt3_framing has ", scenarios));
  for (int percent : {20, 50}) {
    absl::StatusOr<std::vector<TransformedPrompt>> a =
        Gpt3AnchoringPrompts(percent);
    if (!a.ok()) {
      v.Check(a.status(), "gpt3_anchoring");
      continue;
    }
    size_t baseline = 0, anchored = 0;
    for (const TransformedPrompt& p : *a) {
      const auto& c = std::get<Gpt3AnchoringCondition>(p.condition);
      (c.direction == AnchorDirection::kBaseline ? baseline : anchored)++;
    }
    v.Require(baseline == 14 && anchored == 28,
              absl::StrCat("gpt3_anchoring p=", percent, " has ", baseline,
                           "+", anchored));
  }
  const double secs = Seconds(start);
  v.Require(secs < 1.0, absl::StrFormat("took %.3f s", secs));
  v.summary = absl::StrFormat("all counts exact in %.3f s", secs);
  return v;
}

Verdict AnchorArithmeticCriterion() {
  Verdict v;
  struct Row {
    double truth, lower, upper;
  };
  // Lower/upper anchors printed for p = 50.
  const Row rows[] = {
      {2350, 1175, 3525},   {29032, 14516, 43548}, {144, 72, 216},
      {2569, 1284, 3854},   {380, 190, 570},       {193, 96, 290},
      {256, 128, 384},      {2.7, 1, 4},           {1876, 938, 2814},
      {10267, 5134, 15400}, {30, 15, 45},          {656, 328, 984},
      {23, 12, 34},         {16, 8, 24},
  };
  std::multiset<double> published, built;
  for (const Row& r : rows) {
    published.insert(r.truth);
    const AnchorValues a = ComputeAnchors(r.truth, 50);
    v.Require(a.lower == r.lower && a.upper == r.upper,
              absl::StrCat(FormatNumber(r.truth), " -> ", FormatNumber(a.lower),
                           "/", FormatNumber(a.upper)));
  }
  for (const AnchorQuestion& q : AnchorQuestions()) {
    built.insert(q.true_value);
    for (int percent : {20, 50}) {
      const AnchorValues a = ComputeAnchors(q.true_value, percent);
      v.Require(std::abs((a.lower_exact + a.upper_exact) / 2 - q.true_value) <=
                    1e-9 * std::max(1.0, q.true_value),
                absl::StrCat("asymmetric anchors for ", q.subject));
    }
  }
  v.Require(published == built, "question set differs from the published 14");
  v.summary = "14/14 rows exact, symmetric at p=20 and p=50";
  return v;
}

Verdict DetectorCriterion() {
  Verdict v;
  size_t total = 0, agree = 0;
  auto tally = [&](bool ok, const std::string& what) {
    ++total;
    if (ok) ++agree;
    v.Require(ok, what);
  };
  for (const testing::LineCase& c : testing::LineCases()) {
    tally(DetectLine(c.completion, c.target) == c.present,
          absl::StrCat("line ", c.target));
  }
  for (const testing::FragmentCase& c : testing::FragmentCases()) {
    const AnchorFragments f = DetectAnchorFragments(c.completion);
    tally(f.for_var == c.for_var && f.print_var == c.print_var &&
              f.returns_tmp == c.returns_tmp,
          absl::StrCat("fragments <", c.completion, ">"));
  }
  for (const testing::CopyCase& c : testing::CopyCases()) {
    tally(DetectExactCopy(c.completion, c.continuation) == c.copy,
          absl::StrCat("copy <", c.completion, ">"));
  }
  for (const testing::NumericCase& c : testing::NumericCases()) {
    tally(ParseNumericAnswer(c.text).value == c.value,
          absl::StrCat("numeric <", c.text, ">"));
  }
  for (const testing::OptionCase& c : testing::OptionCases()) {
    tally(ParseOptionChoice(c.text) == c.choice,
          absl::StrCat("option <", c.text, ">"));
  }
  v.Require(total >= 30, absl::StrCat("only ", total, " cases"));
  v.summary = absl::StrCat(agree, "/", total, " agree with hand labels");
  return v;
}

Verdict SyntheticEndToEndCriterion() {
  Verdict v;
  const auto start = Clock::now();

  {  // verbatim-copier over every anchoring probe
    testing::ScratchDir dir;
    RunConfig c = SandboxedConfig(dir.path(), "synthetic:verbatim-copier");
    c.experiments = {Experiment::kAnchoring};
    absl::StatusOr<std::vector<ReportTable>> tables =
        RunAndAggregate(c, Experiment::kAnchoring);
    v.Check(tables.status(), "verbatim-copier");
    size_t copies = 0, probes = 0;
    if (tables.ok()) {
      for (const ReportTable& t : *tables) {
        for (const ReportRow& row : t.rows) {
          std::optional<Metric> m = RowMetric(t, row, "copy");
          if (!m) continue;
          copies += m->numerator;
          probes += m->denominator;
          v.Require(m->numerator == m->denominator,
                    absl::StrCat(t.name, " n=", row.keys[0], " copy ",
                                 Describe(*m)));
        }
      }
    }
    v.Require(probes > 0, "no anchoring probes aggregated");
    absl::StrAppend(&v.summary, "copier ", copies, "/", probes, "; ");
  }

  {  // framing-adopter
    testing::ScratchDir dir;
    RunConfig c = SandboxedConfig(dir.path(), "synthetic:framing-adopter");
    c.experiments = {Experiment::kFraming};
    absl::StatusOr<std::vector<ReportTable>> tables =
        RunAndAggregate(c, Experiment::kFraming);
    v.Check(tables.status(), "framing-adopter");
    const ReportTable* t = tables.ok() ? FindTable(*tables, "framing") : nullptr;
    v.Require(t != nullptr, "framing table missing");
    if (t != nullptr) {
      size_t with_line = 0, framed = 0;
      for (const ReportRow& row : t->rows) {
        std::optional<Metric> rate = RowMetric(*t, row, "framed_line_rate");
        v.Require(rate && rate->denominator == 164 &&
                      rate->numerator == rate->denominator,
                  absl::StrCat(row.keys[1], " line rate ",
                               rate ? Describe(*rate) : "absent"));
        if (rate) {
          with_line += rate->numerator;
          framed += rate->denominator;
        }
        if (row.keys[1] == "assert_false") {
          std::optional<Metric> acc = RowMetric(*t, row, "framed_accuracy");
          v.Require(acc && acc->denominator == 164 && acc->numerator == 0,
                    absl::StrCat("assert_false accuracy ",
                                 acc ? Describe(*acc) : "absent"));
          if (acc) {
            absl::StrAppend(&v.summary, "adopter assert_false accuracy ",
                            Describe(*acc), ", ");
          }
        }
      }
      absl::StrAppend(&v.summary, "line rate ", with_line, "/", framed, "; ");
    }
  }

  {  // name-follower
    testing::ScratchDir dir;
    RunConfig c = SandboxedConfig(dir.path(), "synthetic:name-follower");
    c.experiments = {Experiment::kAttribute};
    absl::StatusOr<std::vector<ReportTable>> tables =
        RunAndAggregate(c, Experiment::kAttribute);
    v.Check(tables.status(), "name-follower");
    const ReportTable* t =
        tables.ok() ? FindTable(*tables, "attribute_conflicting") : nullptr;
    v.Require(t != nullptr, "attribute_conflicting table missing");
    if (t != nullptr) {
      size_t follows = 0, total = 0;
      for (const ReportRow& row : t->rows) {
        // Without a visible name there is nothing to follow.
        if (row.keys[0] == Name(NamePlacement::kNoName)) continue;
        std::optional<Metric> m = RowMetric(*t, row, "matches_function_name");
        v.Require(m && m->denominator > 0 && m->numerator == m->denominator,
                  absl::StrCat(row.keys[0], " matches_function_name ",
                               m ? Describe(*m) : "absent"));
        if (m) {
          follows += m->numerator;
          total += m->denominator;
        }
      }
      absl::StrAppend(&v.summary, "name-follower ", follows, "/", total, "; ");
    }
  }

  {  // conjunction-simplifier:any
    testing::ScratchDir dir;
    RunConfig c =
        SandboxedConfig(dir.path(), "synthetic:conjunction-simplifier:any");
    c.experiments = {Experiment::kDeletion};
    absl::StatusOr<std::vector<ReportTable>> tables =
        RunAndAggregate(c, Experiment::kDeletion);
    v.Check(tables.status(), "conjunction-simplifier");
    const ReportTable* t = tables.ok() ? FindTable(*tables, "deletion") : nullptr;
    v.Require(t != nullptr, "deletion table missing");
    if (t != nullptr) {
      std::set<std::string> sizes;
      for (const ReportRow& row : t->rows) {
        sizes.insert(row.keys[1]);
        const char* metric = row.keys[1] == "1" ? "correct" : "any_package";
        std::optional<Metric> m = RowMetric(*t, row, metric);
        v.Require(m && m->denominator == 10 && m->numerator == 10,
                  absl::StrCat(row.keys[0], " k=", row.keys[1], " ", metric,
                               " ", m ? Describe(*m) : "absent"));
      }
      v.Require(sizes.size() == 6, "package counts 1-6 not all present");
      absl::StrAppend(&v.summary, "simplifier rows ", t->rows.size(), "; ");
    }
  }

  const double secs = Seconds(start);
  v.Require(secs < 300, absl::StrFormat("took %.1f s", secs));
  absl::StrAppend(&v.summary, absl::StrFormat("%.1f s", secs));
  return v;
}

// Store reproducing the published n = 1 proportions over the 127 problems.
absl::StatusOr<std::map<std::string, CompletionRecord>> ReplayFixture(
    std::span<const TransformedPrompt> probes) {
  std::map<std::string, const CodeProblem*> by_task;
  for (const CodeProblem& p : testing::Corpus()) by_task[p.task_id] = &p;

  const std::string kPrintLoop = "    for var in [0]:\n        print(var)\n";
  const std::string kPassLoop = "    for var in [0]:\n        pass\n";
  const std::string kFail = "    assert False\n";
  struct Bucket {
    size_t size;
    std::function<std::string(const std::string& remainder,
                              const std::string& continuation)>
        make;
  };
  // Sizes sum to 127: 38 passing, 57 printing, 50 copying, 77 looping.
  const std::vector<Bucket> anchored = {
      {50, [](auto&, auto& cont) { return cont; }},
      {1, [&](auto& rem, auto&) { return rem + kPrintLoop; }},
      {6, [&](auto& rem, auto&) { return rem + kPassLoop; }},
      {31, [](auto& rem, auto&) { return rem; }},
      {6, [&](auto&, auto&) { return kPrintLoop + kFail; }},
      {14, [&](auto&, auto&) { return kPassLoop + kFail; }},
      {19, [&](auto&, auto&) { return kFail; }},
  };
  // 60 of 127 baselines pass.
  const std::vector<Bucket> baseline = {
      {60, [](auto& rem, auto&) { return rem; }},
      {67, [&](auto&, auto&) { return kFail; }},
  };

  // HumanEval/105's own solution loops `for var in ...`, so it goes to the
  // first slot whose completion carries a for-var loop without printing.
  constexpr size_t kLoopPassSlot = 51;
  std::vector<const TransformedPrompt*> order;
  for (const TransformedPrompt& probe : probes) order.push_back(&probe);
  auto loops = std::find_if(order.begin(), order.end(), [](auto* p) {
    return p->base_task == "HumanEval/105" &&
           std::get<AnchoringCondition>(p->condition).kind != AnchorKind::kNone;
  });
  if (loops != order.end()) {
    const TransformedPrompt* moved = *loops;
    order.erase(loops);
    size_t anchored_seen = 0;
    auto at = order.begin();
    for (; at != order.end() && anchored_seen < kLoopPassSlot; ++at) {
      if (std::get<AnchoringCondition>((*at)->condition).kind !=
          AnchorKind::kNone) {
        ++anchored_seen;
      }
    }
    order.insert(at, moved);
  }

  std::map<std::string, CompletionRecord> store;
  size_t anchored_index = 0, baseline_index = 0;
  for (const TransformedPrompt* p : order) {
    const TransformedPrompt& probe = *p;
    const auto& cond = std::get<AnchoringCondition>(probe.condition);
    const bool is_baseline = cond.kind == AnchorKind::kNone;
    const std::vector<Bucket>& buckets = is_baseline ? baseline : anchored;
    size_t& index = is_baseline ? baseline_index : anchored_index;
    size_t offset = index++;
    const Bucket* bucket = nullptr;
    for (const Bucket& b : buckets) {
      if (offset < b.size) {
        bucket = &b;
        break;
      }
      offset -= b.size;
    }
    if (bucket == nullptr) {
      return absl::InternalError("more probes than fixture slots");
    }
    const CodeProblem* problem = by_task.at(*probe.base_task);
    const std::string remainder =
        SolutionLines::FromSource(problem->canonical_solution).Remainder(1);
    const DetectionTarget* cont = probe.FindTarget("anchor_continuation");
    CompletionRecord r;
    r.probe_id = probe.probe_id;
    r.backend_id = "replay";
    r.completion_text =
        bucket->make(remainder, cont != nullptr ? cont->text : std::string());
    store[r.probe_id] = std::move(r);
  }
  if (anchored_index != 127 || baseline_index != 127) {
    return absl::InternalError(absl::StrCat("expected 127+127 probes, got ",
                                            anchored_index, "+",
                                            baseline_index));
  }
  return store;
}

Verdict ReplayCriterion() {
  Verdict v;
  testing::ScratchDir dir;
  RunConfig c = SandboxedConfig(dir.path(), "");
  c.experiments = {Experiment::kAnchoring};
  c.params.min_lines = 1;
  c.params.max_lines = 1;
  c.params.anchor_kinds = {AnchorKind::kPrintVar};
  c.params.anchoring_renamed_control = false;

  AnchoringOptions options;
  options.kinds = c.params.anchor_kinds;
  options.min_lines = 1;
  options.max_lines = 1;
  absl::StatusOr<std::vector<TransformedPrompt>> probes =
      AnchoringPrompts(testing::Corpus(), options);
  if (!probes.ok()) {
    v.Check(probes.status(), "anchoring prompts");
    return v;
  }
  absl::StatusOr<std::map<std::string, CompletionRecord>> store =
      ReplayFixture(*probes);
  if (!store.ok()) {
    v.Check(store.status(), "replay fixture");
    return v;
  }
  const fs::path fixture = dir.path() / "replay_n1.jsonl";
  v.Check(WriteRunStore(fixture, *store, true), "write fixture");
  c.backend_spec = absl::StrCat("replay:", fixture.string());
  c.out = dir.path() / "out";

  absl::StatusOr<std::vector<ReportTable>> tables =
      RunAndAggregate(c, Experiment::kAnchoring);
  if (!tables.ok()) {
    v.Check(tables.status(), "pipeline");
    return v;
  }
  const ReportTable* t = FindTable(*tables, "anchoring_print_var");
  if (t == nullptr) {
    v.Require(false, "anchoring_print_var table missing");
    return v;
  }
  const std::vector<std::string> n1 = {"1"};
  struct Expect {
    const char* metric;
    double published;
  };
  for (const Expect& e : {Expect{"anc_acc", 29.9}, Expect{"prints", 44.9},
                          Expect{"copy", 39.4}, Expect{"for_var", 60.6},
                          Expect{"prints_and_pass", 0.8},
                          Expect{"for_var_and_pass", 5.5},
                          Expect{"no_anc_acc", 47.2}}) {
    std::optional<Metric> m = t->Get(n1, e.metric);
    if (!m || !m->percent()) {
      v.Require(false, absl::StrCat(e.metric, " absent"));
      continue;
    }
    const std::string shown = FormatPercent(m->numerator, m->denominator);
    v.Require(std::abs(*m->percent() - e.published) <= 0.05 &&
                  shown == absl::StrFormat("%.1f", e.published),
              absl::StrCat(e.metric, " ", Describe(*m), " -> ", shown));
    absl::StrAppend(&v.summary, e.metric, "=", shown, " ");
  }
  return v;
}

// Relative path -> bytes for every file below `root` except the run store,
// whose records carry wall-clock latency and timestamps.
std::map<std::string, std::string> Snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), root).string();
    if (rel == "completions.jsonl") continue;
    absl::StatusOr<std::string> bytes = ReadFileToString(entry.path());
    files[rel] = bytes.ok() ? *bytes : "<unreadable>";
  }
  return files;
}

Verdict DeterminismCriterion() {
  Verdict v;
  testing::ScratchDir a, b;
  std::vector<std::map<std::string, std::string>> snapshots;
  for (const fs::path& out : {a.path(), b.path()}) {
    RunConfig c = SandboxedConfig(out, "synthetic:anchor-mixer");
    c.experiments.assign(std::begin(kAllExperiments), std::end(kAllExperiments));
    std::ostringstream log;
    v.Check(AllStages(c, log), absl::StrCat("run into ", out.string()));
    snapshots.push_back(Snapshot(out));
  }
  size_t manifests = 0, classifications = 0, reports = 0;
  for (const auto& [rel, bytes] : snapshots[0]) {
    auto it = snapshots[1].find(rel);
    v.Require(it != snapshots[1].end() && it->second == bytes,
              absl::StrCat(rel, " differs"));
    if (absl::StartsWith(rel, "manifests/")) ++manifests;
    if (absl::StartsWith(rel, "classifications/")) ++classifications;
    if (absl::StartsWith(rel, "reports/")) ++reports;
  }
  v.Require(snapshots[0].size() == snapshots[1].size(), "file sets differ");
  v.Require(manifests == 7 && classifications == 7 && reports > 0,
            "missing outputs");
  v.summary = absl::StrCat(manifests, " manifests, ", classifications,
                           " classification files, ", reports,
                           " report files identical");
  return v;
}

}  // namespace
}  // namespace biasprobe

int main() {
  using biasprobe::Verdict;
  struct Criterion {
    const char* name;
    Verdict (*run)();
  };
  const Criterion criteria[] = {
      {"anchoring filter counts", biasprobe::FilterCountsCriterion},
      {"generator cardinalities", biasprobe::CardinalityCriterion},
      {"anchor arithmetic", biasprobe::AnchorArithmeticCriterion},
      {"detector precision suite", biasprobe::DetectorCriterion},
      {"synthetic backend end-to-end", biasprobe::SyntheticEndToEndCriterion},
      {"replay reproduction", biasprobe::ReplayCriterion},
      {"determinism", biasprobe::DeterminismCriterion},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const Verdict v = c.run();
    std::printf("%s  %s: %s\n", v.pass ? "PASS" : "FAIL", c.name,
                v.summary.c_str());
    for (const std::string& p : v.problems) std::printf("      %s\n", p.c_str());
    std::fflush(stdout);
    if (!v.pass) ++failures;
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(std::size(criteria)) - failures,
              std::size(criteria));
  return failures == 0 ? 0 : 1;
}
