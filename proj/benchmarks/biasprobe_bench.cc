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

// Throughput of the hot paths: corpus load, length filtering, probe
// generation, manifest serialization and the completion detectors.

#include <cstdlib>
#include <iostream>
#include <vector>

#include "benchmark/benchmark.h"
#include "biasprobe/classify.h"
#include "biasprobe/corpus.h"
#include "biasprobe/transforms.h"

namespace biasprobe {
namespace {

const std::vector<CodeProblem>& Problems() {
  static const std::vector<CodeProblem>* problems = [] {
    absl::StatusOr<CorpusLoad> load = LoadProblems(BIASPROBE_CORPUS);
    if (!load.ok()) {
      std::cerr << load.status() << "\n";
      std::abort();
    }
    return new std::vector<CodeProblem>(std::move(load->problems));
  }();
  return *problems;
}

void BM_LoadCorpus(benchmark::State& state) {
  for (auto _ : state) {
    absl::StatusOr<CorpusLoad> load = LoadProblems(BIASPROBE_CORPUS);
    benchmark::DoNotOptimize(load);
  }
}
BENCHMARK(BM_LoadCorpus);

void BM_FilterBySolutionLength(benchmark::State& state) {
  const auto& problems = Problems();
  for (auto _ : state) {
    for (size_t n = 0; n <= kMaxAnchorLines; ++n) {
      benchmark::DoNotOptimize(FilterBySolutionLength(problems, n));
    }
  }
}
BENCHMARK(BM_FilterBySolutionLength);

void BM_FramingPrompts(benchmark::State& state) {
  const auto& problems = Problems();
  FramingOptions options;
  options.seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(FramingPrompts(problems, options));
  }
}
BENCHMARK(BM_FramingPrompts);

void BM_AnchoringPrompts(benchmark::State& state) {
  const auto& problems = Problems();
  for (auto _ : state) {
    benchmark::DoNotOptimize(AnchoringPrompts(problems, AnchoringOptions{}));
  }
}
BENCHMARK(BM_AnchoringPrompts);

void BM_SerializeManifest(benchmark::State& state) {
  absl::StatusOr<std::vector<TransformedPrompt>> probes =
      AnchoringPrompts(Problems(), AnchoringOptions{});
  if (!probes.ok()) {
    state.SkipWithError("anchoring generation failed");
    return;
  }
  for (auto _ : state) {
    size_t bytes = 0;
    for (const TransformedPrompt& p : *probes) bytes += SerializeProbe(p).size();
    benchmark::DoNotOptimize(bytes);
  }
  state.SetItemsProcessed(state.iterations() * probes->size());
}
BENCHMARK(BM_SerializeManifest);

void BM_DetectAnchorFragments(benchmark::State& state) {
  const auto& problems = Problems();
  for (auto _ : state) {
    for (const CodeProblem& p : problems) {
      benchmark::DoNotOptimize(DetectAnchorFragments(p.canonical_solution));
    }
  }
  state.SetItemsProcessed(state.iterations() * problems.size());
}
BENCHMARK(BM_DetectAnchorFragments);

void BM_DetectLine(benchmark::State& state) {
  const auto& problems = Problems();
  for (auto _ : state) {
    for (const CodeProblem& p : problems) {
      benchmark::DoNotOptimize(DetectLine(p.canonical_solution, "assert False"));
    }
  }
  state.SetItemsProcessed(state.iterations() * problems.size());
}
BENCHMARK(BM_DetectLine);

void BM_ParseNumericAnswer(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ParseNumericAnswer("\n\n The answer is about 29,029 feet tall."));
  }
}
BENCHMARK(BM_ParseNumericAnswer);

}  // namespace
}  // namespace biasprobe

BENCHMARK_MAIN();
