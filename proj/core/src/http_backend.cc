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

#include <thread>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "biasprobe/backends.h"
#include "httplib.h"
#include "json.hpp"

namespace biasprobe {
namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(std::string origin, std::string path,
                   std::chrono::milliseconds timeout)
      : origin_(std::move(origin)), path_(std::move(path)), timeout_(timeout) {}

  HttpResponse PostJson(const std::string& body,
                        const std::string& bearer_token) override {
    // One client per call keeps concurrent requests independent.
    httplib::Client client(origin_);
    const auto seconds =
        std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
        timeout_ - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    client.set_bearer_token_auth(bearer_token);
    HttpResponse response;
    httplib::Result result = client.Post(path_, body, "application/json");
    if (!result) {
      response.transport_error = httplib::to_string(result.error());
      return response;
    }
    response.status = result->status;
    response.body = result->body;
    return response;
  }

 private:
  std::string origin_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

}  // namespace

absl::StatusOr<std::unique_ptr<HttpTransport>> MakeHttpTransport(
    const std::string& url, std::chrono::milliseconds timeout) {
  const size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    return absl::InvalidArgumentError(
        absl::StrCat("endpoint '", url, "' lacks a scheme"));
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    return absl::InvalidArgumentError(
        absl::StrCat("unsupported endpoint scheme '", scheme, "'"));
  }
  const size_t path_begin = url.find('/', scheme_end + 3);
  std::string origin = url.substr(0, path_begin);
  std::string path =
      path_begin == std::string::npos ? "/" : url.substr(path_begin);
  if (origin.size() <= scheme_end + 3) {
    return absl::InvalidArgumentError(
        absl::StrCat("endpoint '", url, "' lacks a host"));
  }
  return std::make_unique<HttplibTransport>(std::move(origin), std::move(path),
                                            timeout);
}

ErrorClass ClassifyHttpStatus(int status) {
  if (status >= 200 && status < 300) return ErrorClass::kNone;
  if (status == 0) return ErrorClass::kTimeout;
  if (status == 401 || status == 403) return ErrorClass::kAuth;
  if (status == 408) return ErrorClass::kTimeout;
  if (status == 429) return ErrorClass::kRateLimited;
  if (status >= 500) return ErrorClass::kServer;
  return ErrorClass::kClient;
}

HttpBackend::HttpBackend(std::unique_ptr<HttpTransport> transport,
                         std::string model, std::string api_key,
                         RetryPolicy retry, Sleeper sleeper)
    : transport_(std::move(transport)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      retry_(retry),
      sleeper_(sleeper ? std::move(sleeper) : [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
      }) {}

std::string HttpBackend::RequestBody(const CompletionRequest& request) const {
  nlohmann::ordered_json j;
  j["model"] = model_;
  j["prompt"] = request.prompt_text;
  j["max_tokens"] = request.max_tokens;
  j["temperature"] = request.temperature;
  if (!request.stop_sequences.empty()) {
    // The common completions API accepts at most four stop sequences;
    // DefaultCodeStops stays within that limit.
    j["stop"] = request.stop_sequences;
  }
  return j.dump();
}

CompletionRecord HttpBackend::Complete(const TransformedPrompt& probe,
                                       const CompletionRequest& request) {
  CompletionRecord record;
  record.probe_id = probe.probe_id;
  record.backend_id = id();
  const std::string body = RequestBody(request);
  const auto start = std::chrono::steady_clock::now();
  std::chrono::milliseconds backoff = retry_.initial_backoff;
  const int attempts = std::max(1, retry_.max_attempts);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      sleeper_(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<int64_t>(backoff.count() * retry_.multiplier));
    }
    record.retries = attempt;
    HttpResponse response = transport_->PostJson(body, api_key_);
    record.error = ClassifyHttpStatus(response.status);
    if (record.error == ErrorClass::kNone) {
      nlohmann::json j = nlohmann::json::parse(response.body, nullptr,
                                               /*allow_exceptions=*/false);
      if (j.is_discarded() || !j.contains("choices") ||
          !j["choices"].is_array() || j["choices"].empty() ||
          !j["choices"][0].contains("text") ||
          !j["choices"][0]["text"].is_string()) {
        record.error = ErrorClass::kServer;
        record.error_message = "response lacks choices[0].text";
      } else {
        record.error_message.clear();
        record.completion_text = TruncateAtStop(
            j["choices"][0]["text"].get<std::string>(), request.stop_sequences);
        break;
      }
    } else if (response.status == 0) {
      record.error_message = response.transport_error;
    } else {
      record.error_message = absl::StrCat("HTTP ", response.status);
    }
    if (!IsRetryable(record.error)) break;
  }
  record.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  record.timestamp = UtcTimestamp();
  return record;
}

}  // namespace biasprobe
