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

// Client side of the sandbox job protocol. Jobs and results are single-line
// JSON records exchanged with an external runner process over stdin/stdout.

#ifndef BIASPROBE_SANDBOX_H_
#define BIASPROBE_SANDBOX_H_

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "biasprobe/formula.h"

namespace biasprobe {

enum class JobKind { kFunctional, kProbe, kDeletion };
absl::string_view Name(JobKind kind);

enum class JobStatus { kPassed, kFailed, kError, kTimeout };
absl::string_view Name(JobStatus status);

struct FunctionalPayload {
  std::string prompt;
  std::string completion;
  std::string test;
  std::string entry_point;
};

struct ProbePayload {
  std::string function_source;
  std::string entry_point;
  std::vector<ProbeInput> inputs;
};

struct FixtureFile {
  std::string path;  // relative
  std::vector<std::string> packages;
  friend bool operator==(const FixtureFile&, const FixtureFile&) = default;
};

struct DeletionPayload {
  std::string function_source;
  std::string entry_point;
  std::vector<FixtureFile> fixture;
};

using JobPayload = std::variant<FunctionalPayload, ProbePayload, DeletionPayload>;

inline constexpr double kFunctionalTimeoutSeconds = 10;
inline constexpr double kProbeTimeoutSeconds = 5;
inline constexpr double kDeletionTimeoutSeconds = 10;

struct SandboxJob {
  std::string job_id;
  double timeout_seconds = kFunctionalTimeoutSeconds;  // > 0
  JobPayload payload;

  JobKind kind() const { return static_cast<JobKind>(payload.index()); }
};

enum class OutcomeKind { kValue, kException, kTimeout };

struct ProbeOutcome {
  OutcomeKind kind = OutcomeKind::kValue;
  std::optional<double> value;  // absent for non-numeric return values
  std::string detail;
};

struct SandboxResult {
  std::string job_id;
  JobStatus status = JobStatus::kError;
  std::vector<ProbeOutcome> outputs;  // probe jobs, one per input
  std::vector<std::string> deleted;   // deletion jobs, sorted
  std::string error_class;
  std::string message;
};

std::string SerializeJob(const SandboxJob& job);
absl::StatusOr<SandboxJob> ParseJob(absl::string_view line);
std::string SerializeResult(const SandboxResult& result);
absl::StatusOr<SandboxResult> ParseResult(absl::string_view line);

// For |S| = k: one file per package, one importing all of S, k all-but-one
// files when k >= 2, one importing only a pool package outside S, and one
// with no imports.
std::vector<FixtureFile> BuildDeletionFixture(
    std::span<const std::string> packages);

class SandboxClient {
 public:
  virtual ~SandboxClient() = default;
  // Exactly one result per job. A runner crash or hang yields an error or
  // timeout result, not a failed status.
  virtual absl::StatusOr<SandboxResult> Run(const SandboxJob& job) = 0;
};

// Talks to a long-lived runner started with `/bin/sh -c command`. A job that
// exceeds timeout + grace kills the runner; the next job restarts it.
class ProcessSandboxClient : public SandboxClient {
 public:
  explicit ProcessSandboxClient(std::string command,
                                std::chrono::milliseconds grace =
                                    std::chrono::seconds(2));
  ~ProcessSandboxClient() override;

  ProcessSandboxClient(const ProcessSandboxClient&) = delete;
  ProcessSandboxClient& operator=(const ProcessSandboxClient&) = delete;

  absl::StatusOr<SandboxResult> Run(const SandboxJob& job) override;

  int restarts() const { return restarts_; }

 private:
  absl::Status EnsureStarted();
  void Stop();
  // Reads one line before `deadline`; nullopt on timeout or EOF.
  std::optional<std::string> ReadLine(
      std::chrono::steady_clock::time_point deadline, bool* eof);

  std::string command_;
  std::chrono::milliseconds grace_;
  std::mutex mu_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  int restarts_ = 0;
  int starts_ = 0;
};

// N runner processes; Run blocks until one is free.
class SandboxPool : public SandboxClient {
 public:
  SandboxPool(std::string command, int size);
  absl::StatusOr<SandboxResult> Run(const SandboxJob& job) override;

 private:
  std::vector<std::unique_ptr<ProcessSandboxClient>> clients_;
  std::vector<bool> busy_;
  std::mutex mu_;
  std::condition_variable free_;
};

}  // namespace biasprobe

#endif  // BIASPROBE_SANDBOX_H_
