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

// Completion backends behind one interface: a remote HTTP completions API, a
// replay store keyed by probe_id, and synthetic reference models that each
// exhibit one failure class. Also the run-store format and batch dispatch.

#ifndef BIASPROBE_BACKENDS_H_
#define BIASPROBE_BACKENDS_H_

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "biasprobe/corpus.h"
#include "biasprobe/transforms.h"

namespace biasprobe {

struct CompletionRequest {
  std::string probe_id;
  std::string prompt_text;
  int max_tokens = 300;
  double temperature = 0.0;  // 0 is greedy
  std::vector<std::string> stop_sequences;
};

inline constexpr int kCodeMaxTokens = 300;
inline constexpr int kTextMaxTokens = 24;

// Column-0 stops for code probes.
std::vector<std::string> DefaultCodeStops();

// Request with the experiment's default limits and stops.
CompletionRequest DefaultRequest(const TransformedPrompt& probe);

// Cuts `text` at the earliest occurrence of any stop sequence.
std::string TruncateAtStop(absl::string_view text,
                           std::span<const std::string> stops);

enum class ErrorClass {
  kNone,
  kTimeout,
  kRateLimited,
  kServer,
  kAuth,
  kClient,
  kMissingFixture,
};

absl::string_view Name(ErrorClass error);
std::optional<ErrorClass> ParseErrorClass(absl::string_view name);

// Only transient classes are retried.
bool IsRetryable(ErrorClass error);

struct CompletionRecord {
  std::string probe_id;
  std::string backend_id;
  std::string completion_text;
  int64_t latency_ms = 0;
  int retries = 0;
  std::string timestamp;  // RFC 3339 UTC
  ErrorClass error = ErrorClass::kNone;
  std::string error_message;

  bool ok() const { return error == ErrorClass::kNone; }
};

// One JSON object per line. Canonical form omits latency and timestamp so
// that repeated runs compare equal.
std::string SerializeRecord(const CompletionRecord& record,
                            bool canonical = false);
absl::StatusOr<CompletionRecord> ParseRecord(absl::string_view line);

// A missing file is an empty store. Later lines win for repeated probe_ids.
absl::StatusOr<std::map<std::string, CompletionRecord>> ReadRunStore(
    const std::filesystem::path& path);
absl::Status WriteRunStore(const std::filesystem::path& path,
                           const std::map<std::string, CompletionRecord>& store,
                           bool canonical = false);

std::string UtcTimestamp();

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  // Never throws; failures are reported through the record's error class.
  // Must be safe to call concurrently.
  virtual CompletionRecord Complete(const TransformedPrompt& probe,
                                    const CompletionRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Replay

class ReplayBackend : public Backend {
 public:
  static absl::StatusOr<std::unique_ptr<ReplayBackend>> Open(
      const std::filesystem::path& path);
  explicit ReplayBackend(std::map<std::string, std::string> completions,
                         std::string id = "replay");

  std::string id() const override { return id_; }
  CompletionRecord Complete(const TransformedPrompt& probe,
                            const CompletionRequest& request) override;

 private:
  std::map<std::string, std::string> completions_;
  std::string id_;
};

// ---------------------------------------------------------------------------
// Synthetic reference models

enum class SyntheticProfile {
  kCanonical,
  kVerbatimCopier,
  kFramingAdopter,
  kAnchorMixer,
  kNameFollower,
  kOrderSwapper,
  kConjunctionAny,
  kConjunctionFirst,
};

// "canonical", "verbatim-copier", "framing-adopter", "anchor-mixer",
// "name-follower", "order-swapper", "conjunction-simplifier:any",
// "conjunction-simplifier:first".
absl::string_view Name(SyntheticProfile profile);
std::optional<SyntheticProfile> ParseSyntheticProfile(absl::string_view name);

class SyntheticBackend : public Backend {
 public:
  SyntheticBackend(SyntheticProfile profile, uint64_t seed,
                   std::span<const CodeProblem> problems);

  std::string id() const override;
  CompletionRecord Complete(const TransformedPrompt& probe,
                            const CompletionRequest& request) override;

  // The completion text alone; pure in (probe, profile, seed).
  absl::StatusOr<std::string> Generate(const TransformedPrompt& probe) const;

 private:
  SyntheticProfile profile_;
  uint64_t seed_;
  std::map<std::string, CodeProblem, std::less<>> problems_;
};

// Python source of a deletion function. `body_only` omits the def line.
enum class DeletionRule { kAll, kFirst, kAny };
std::string DeletionFunctionSource(std::span<const std::string> packages,
                                   DeletionRule rule, bool body_only);

// ---------------------------------------------------------------------------
// HTTP

struct HttpResponse {
  int status = 0;  // 0 when no response was received
  std::string body;
  std::string transport_error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse PostJson(const std::string& body,
                                const std::string& bearer_token) = 0;
};

// cpp-httplib transport for "http[s]://host[:port]/path".
absl::StatusOr<std::unique_ptr<HttpTransport>> MakeHttpTransport(
    const std::string& url, std::chrono::milliseconds timeout);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

ErrorClass ClassifyHttpStatus(int status);

class HttpBackend : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  // The API key is read from BIAS_PROBE_API_KEY by the factory, never from
  // configuration.
  HttpBackend(std::unique_ptr<HttpTransport> transport, std::string model,
              std::string api_key, RetryPolicy retry = {},
              Sleeper sleeper = nullptr);

  std::string id() const override { return "http:" + model_; }
  CompletionRecord Complete(const TransformedPrompt& probe,
                            const CompletionRequest& request) override;

  std::string RequestBody(const CompletionRequest& request) const;

 private:
  std::unique_ptr<HttpTransport> transport_;
  std::string model_;
  std::string api_key_;
  RetryPolicy retry_;
  Sleeper sleeper_;
};

inline constexpr char kApiKeyEnv[] = "BIAS_PROBE_API_KEY";

// ---------------------------------------------------------------------------
// Configuration

enum class BackendKind { kHttp, kReplay, kSynthetic };

struct BackendConfig {
  BackendKind kind = BackendKind::kSynthetic;
  std::string endpoint;
  std::string model;
  std::filesystem::path replay_path;
  SyntheticProfile profile = SyntheticProfile::kCanonical;
  uint64_t seed = 0;
  int parallelism = 1;
  int requests_per_minute = 0;  // 0 disables the cap
  std::chrono::milliseconds request_timeout{60000};
  RetryPolicy retry;
};

// "http:<model>@<url>", "replay:<path>", "synthetic:<profile>".
absl::StatusOr<BackendConfig> ParseBackendSpec(absl::string_view spec);

absl::StatusOr<std::unique_ptr<Backend>> MakeBackend(
    const BackendConfig& config, std::span<const CodeProblem> problems);

// ---------------------------------------------------------------------------
// Dispatch

// Caps acquisitions within any rolling 60 s window.
class RateLimiter {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;
  using Sleeper = std::function<void(std::chrono::steady_clock::duration)>;

  explicit RateLimiter(int per_minute, Clock clock = nullptr,
                       Sleeper sleeper = nullptr);

  // Blocks until a slot is free; returns immediately when uncapped.
  void Acquire();

 private:
  int per_minute_;
  Clock clock_;
  Sleeper sleeper_;
  std::mutex mu_;
  std::deque<std::chrono::steady_clock::time_point> issued_;
};

struct BatchOptions {
  int parallelism = 1;
  int requests_per_minute = 0;
  bool resume = true;  // skip probes with an ok record already in the store
  std::function<CompletionRequest(const TransformedPrompt&)> make_request;
  RateLimiter::Clock clock;
  RateLimiter::Sleeper sleeper;
};

struct BatchSummary {
  size_t total = 0;
  size_t skipped = 0;
  size_t issued = 0;
  size_t failed = 0;
};

// Appends records to `store_path` as they complete, then rewrites the store
// sorted by probe_id. Fails only when the store cannot be written.
absl::StatusOr<BatchSummary> RunBatch(std::span<const TransformedPrompt> probes,
                                      Backend& backend,
                                      const std::filesystem::path& store_path,
                                      const BatchOptions& options);

}  // namespace biasprobe

#endif  // BIASPROBE_BACKENDS_H_
