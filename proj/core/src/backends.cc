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

#include "biasprobe/backends.h"

#include <ctime>

#include <cstdlib>

#include "absl/strings/ascii.h"
#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "biasprobe/io.h"
#include "json.hpp"

namespace biasprobe {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> DefaultCodeStops() {
  return {"\ndef ", "\nclass ", "\nif __name__", "\nprint("};
}

CompletionRequest DefaultRequest(const TransformedPrompt& probe) {
  CompletionRequest request;
  request.probe_id = probe.probe_id;
  request.prompt_text = probe.prompt_text;
  if (IsCodeExperiment(probe.experiment)) {
    request.max_tokens = kCodeMaxTokens;
    request.stop_sequences = DefaultCodeStops();
  } else {
    request.max_tokens = kTextMaxTokens;
  }
  return request;
}

std::string TruncateAtStop(absl::string_view text,
                           std::span<const std::string> stops) {
  size_t cut = text.size();
  for (const std::string& stop : stops) {
    if (stop.empty()) continue;
    const size_t at = text.find(stop);
    if (at != absl::string_view::npos && at < cut) cut = at;
  }
  return std::string(text.substr(0, cut));
}

absl::string_view Name(ErrorClass error) {
  switch (error) {
    case ErrorClass::kNone:
      return "none";
    case ErrorClass::kTimeout:
      return "timeout";
    case ErrorClass::kRateLimited:
      return "rate_limited";
    case ErrorClass::kServer:
      return "server";
    case ErrorClass::kAuth:
      return "auth";
    case ErrorClass::kClient:
      return "client";
    case ErrorClass::kMissingFixture:
      return "missing_fixture";
  }
  return "";
}

std::optional<ErrorClass> ParseErrorClass(absl::string_view name) {
  for (ErrorClass e :
       {ErrorClass::kNone, ErrorClass::kTimeout, ErrorClass::kRateLimited,
        ErrorClass::kServer, ErrorClass::kAuth, ErrorClass::kClient,
        ErrorClass::kMissingFixture}) {
    if (Name(e) == name) return e;
  }
  return std::nullopt;
}

bool IsRetryable(ErrorClass error) {
  return error == ErrorClass::kTimeout || error == ErrorClass::kRateLimited ||
         error == ErrorClass::kServer;
}

std::string SerializeRecord(const CompletionRecord& record, bool canonical) {
  ordered_json j;
  j["probe_id"] = record.probe_id;
  j["backend_id"] = record.backend_id;
  j["completion_text"] = record.completion_text;
  if (!canonical) {
    j["latency_ms"] = record.latency_ms;
    j["timestamp"] = record.timestamp;
  }
  j["retries"] = record.retries;
  j["status"] = record.ok() ? "ok" : "failed";
  j["error_class"] = std::string(Name(record.error));
  j["error_message"] = record.error_message;
  return j.dump();
}

absl::StatusOr<CompletionRecord> ParseRecord(absl::string_view line) {
  ordered_json j = ordered_json::parse(line.begin(), line.end(), nullptr,
                                       /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("completion record is not a JSON object");
  }
  auto str = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || !j[key].is_string()) return std::nullopt;
    return j[key].get<std::string>();
  };
  CompletionRecord r;
  std::optional<std::string> id = str("probe_id");
  std::optional<std::string> text = str("completion_text");
  if (!id.has_value() || !text.has_value()) {
    return absl::InvalidArgumentError(
        "completion record lacks probe_id or completion_text");
  }
  r.probe_id = *id;
  r.completion_text = *text;
  r.backend_id = str("backend_id").value_or("");
  r.timestamp = str("timestamp").value_or("");
  r.error_message = str("error_message").value_or("");
  if (j.contains("latency_ms") && j["latency_ms"].is_number_integer()) {
    r.latency_ms = j["latency_ms"].get<int64_t>();
  }
  if (j.contains("retries") && j["retries"].is_number_integer()) {
    r.retries = j["retries"].get<int>();
  }
  std::optional<ErrorClass> error =
      ParseErrorClass(str("error_class").value_or("none"));
  if (!error.has_value()) {
    return absl::InvalidArgumentError(
        absl::StrCat("record ", r.probe_id, ": unknown error_class"));
  }
  r.error = *error;
  return r;
}

absl::StatusOr<std::map<std::string, CompletionRecord>> ReadRunStore(
    const std::filesystem::path& path) {
  std::map<std::string, CompletionRecord> store;
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return store;
  absl::StatusOr<std::string> text = ReadFileToString(path);
  if (!text.ok()) return text.status();
  size_t line_number = 0;
  for (absl::string_view line : absl::StrSplit(*text, '\n')) {
    ++line_number;
    if (absl::StripAsciiWhitespace(line).empty()) continue;
    absl::StatusOr<CompletionRecord> record = ParseRecord(line);
    if (!record.ok()) {
      return absl::InvalidArgumentError(absl::StrCat(
          path.string(), ":", line_number, ": ", record.status().message()));
    }
    store[record->probe_id] = *std::move(record);
  }
  return store;
}

absl::Status WriteRunStore(const std::filesystem::path& path,
                           const std::map<std::string, CompletionRecord>& store,
                           bool canonical) {
  std::string contents;
  for (const auto& [id, record] : store) {
    absl::StrAppend(&contents, SerializeRecord(record, canonical), "\n");
  }
  return WriteFileAtomic(path, contents);
}

std::string UtcTimestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------

absl::StatusOr<std::unique_ptr<ReplayBackend>> ReplayBackend::Open(
    const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    return absl::NotFoundError(
        absl::StrCat("replay store ", path.string(), " does not exist"));
  }
  absl::StatusOr<std::map<std::string, CompletionRecord>> store =
      ReadRunStore(path);
  if (!store.ok()) return store.status();
  std::map<std::string, std::string> completions;
  for (auto& [id, record] : *store) {
    if (record.ok()) completions.emplace(id, std::move(record.completion_text));
  }
  return std::make_unique<ReplayBackend>(
      std::move(completions), absl::StrCat("replay:", path.filename().string()));
}

ReplayBackend::ReplayBackend(std::map<std::string, std::string> completions,
                             std::string id)
    : completions_(std::move(completions)), id_(std::move(id)) {}

CompletionRecord ReplayBackend::Complete(const TransformedPrompt& probe,
                                         const CompletionRequest& /*request*/) {
  CompletionRecord record;
  record.probe_id = probe.probe_id;
  record.backend_id = id_;
  record.timestamp = UtcTimestamp();
  auto it = completions_.find(probe.probe_id);
  if (it == completions_.end()) {
    record.error = ErrorClass::kMissingFixture;
    record.error_message =
        absl::StrCat("no replay fixture for probe ", probe.probe_id);
  } else {
    record.completion_text = it->second;
  }
  return record;
}

// ---------------------------------------------------------------------------

absl::StatusOr<BackendConfig> ParseBackendSpec(absl::string_view spec) {
  BackendConfig config;
  std::pair<absl::string_view, absl::string_view> parts =
      absl::StrSplit(spec, absl::MaxSplits(':', 1));
  const absl::string_view kind = parts.first;
  const absl::string_view rest = parts.second;
  if (kind == "synthetic") {
    std::optional<SyntheticProfile> profile = ParseSyntheticProfile(rest);
    if (!profile.has_value()) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown synthetic profile '", rest, "'"));
    }
    config.kind = BackendKind::kSynthetic;
    config.profile = *profile;
    return config;
  }
  if (kind == "replay") {
    if (rest.empty()) {
      return absl::InvalidArgumentError("replay backend needs a store path");
    }
    config.kind = BackendKind::kReplay;
    config.replay_path = std::string(rest);
    return config;
  }
  if (kind == "http") {
    std::pair<absl::string_view, absl::string_view> model_url =
        absl::StrSplit(rest, absl::MaxSplits('@', 1));
    if (model_url.first.empty() || model_url.second.empty()) {
      return absl::InvalidArgumentError(
          "http backend spec must be http:<model>@<url>");
    }
    config.kind = BackendKind::kHttp;
    config.model = std::string(model_url.first);
    config.endpoint = std::string(model_url.second);
    return config;
  }
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown backend '", spec,
      "' (expected synthetic:<profile>, replay:<path> or http:<model>@<url>)"));
}

absl::StatusOr<std::unique_ptr<Backend>> MakeBackend(
    const BackendConfig& config, std::span<const CodeProblem> problems) {
  switch (config.kind) {
    case BackendKind::kSynthetic:
      return std::make_unique<SyntheticBackend>(config.profile, config.seed,
                                                problems);
    case BackendKind::kReplay: {
      absl::StatusOr<std::unique_ptr<ReplayBackend>> replay =
          ReplayBackend::Open(config.replay_path);
      if (!replay.ok()) return replay.status();
      return std::unique_ptr<Backend>(std::move(*replay));
    }
    case BackendKind::kHttp: {
      const char* key = std::getenv(kApiKeyEnv);
      if (key == nullptr || *key == '\0') {
        return absl::FailedPreconditionError(
            absl::StrCat("http backend requires the ", kApiKeyEnv,
                         " environment variable"));
      }
      absl::StatusOr<std::unique_ptr<HttpTransport>> transport =
          MakeHttpTransport(config.endpoint, config.request_timeout);
      if (!transport.ok()) return transport.status();
      return std::make_unique<HttpBackend>(std::move(*transport), config.model,
                                           key, config.retry);
    }
  }
  return absl::InvalidArgumentError("unknown backend kind");
}

}  // namespace biasprobe
