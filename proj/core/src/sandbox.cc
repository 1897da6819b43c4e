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

#include "biasprobe/sandbox.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "biasprobe/transforms.h"
#include "json.hpp"

namespace biasprobe {
namespace {

using ordered_json = nlohmann::ordered_json;

absl::string_view Name(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::kValue:
      return "value";
    case OutcomeKind::kException:
      return "exception";
    case OutcomeKind::kTimeout:
      return "timeout";
  }
  return "";
}

template <typename E, size_t N>
std::optional<E> ParseName(absl::string_view name, const E (&values)[N]) {
  for (E v : values) {
    if (Name(v) == name) return v;
  }
  return std::nullopt;
}

constexpr JobKind kJobKinds[] = {JobKind::kFunctional, JobKind::kProbe,
                                 JobKind::kDeletion};
constexpr JobStatus kJobStatuses[] = {JobStatus::kPassed, JobStatus::kFailed,
                                      JobStatus::kError, JobStatus::kTimeout};

constexpr OutcomeKind kOutcomeKinds[] = {
    OutcomeKind::kValue, OutcomeKind::kException, OutcomeKind::kTimeout};

std::string GetString(const ordered_json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string()) return "";
  return j[key].get<std::string>();
}

struct PayloadWriter {
  ordered_json operator()(const FunctionalPayload& p) const {
    return {{"prompt", p.prompt},
            {"completion", p.completion},
            {"test", p.test},
            {"entry_point", p.entry_point}};
  }
  ordered_json operator()(const ProbePayload& p) const {
    ordered_json inputs = ordered_json::array();
    for (const ProbeInput& in : p.inputs) inputs.push_back({in.x, in.y});
    return {{"function_source", p.function_source},
            {"entry_point", p.entry_point},
            {"inputs", std::move(inputs)}};
  }
  ordered_json operator()(const DeletionPayload& p) const {
    ordered_json fixture = ordered_json::array();
    for (const FixtureFile& f : p.fixture) {
      fixture.push_back({{"path", f.path}, {"packages", f.packages}});
    }
    return {{"function_source", p.function_source},
            {"entry_point", p.entry_point},
            {"fixture", std::move(fixture)}};
  }
};

}  // namespace

absl::string_view Name(JobKind kind) {
  switch (kind) {
    case JobKind::kFunctional:
      return "functional";
    case JobKind::kProbe:
      return "probe";
    case JobKind::kDeletion:
      return "deletion";
  }
  return "";
}

absl::string_view Name(JobStatus status) {
  switch (status) {
    case JobStatus::kPassed:
      return "passed";
    case JobStatus::kFailed:
      return "failed";
    case JobStatus::kError:
      return "error";
    case JobStatus::kTimeout:
      return "timeout";
  }
  return "";
}

std::string SerializeJob(const SandboxJob& job) {
  ordered_json j;
  j["job_id"] = job.job_id;
  j["kind"] = std::string(Name(job.kind()));
  j["timeout"] = job.timeout_seconds;
  j["payload"] = std::visit(PayloadWriter{}, job.payload);
  return j.dump();
}

absl::StatusOr<SandboxJob> ParseJob(absl::string_view line) {
  ordered_json j = ordered_json::parse(line.begin(), line.end(), nullptr,
                                       /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("job is not a JSON object");
  }
  SandboxJob job;
  job.job_id = GetString(j, "job_id");
  std::optional<JobKind> kind = ParseName(GetString(j, "kind"), kJobKinds);
  if (job.job_id.empty() || !kind.has_value()) {
    return absl::InvalidArgumentError("job lacks job_id or a valid kind");
  }
  if (!j.contains("timeout") || !j["timeout"].is_number() ||
      j["timeout"].get<double>() <= 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("job ", job.job_id, ": timeout must be positive"));
  }
  job.timeout_seconds = j["timeout"].get<double>();
  const ordered_json& p = j.contains("payload") ? j["payload"] : ordered_json();
  if (!p.is_object()) {
    return absl::InvalidArgumentError(
        absl::StrCat("job ", job.job_id, ": payload is not an object"));
  }
  switch (*kind) {
    case JobKind::kFunctional:
      job.payload = FunctionalPayload{GetString(p, "prompt"),
                                      GetString(p, "completion"),
                                      GetString(p, "test"),
                                      GetString(p, "entry_point")};
      break;
    case JobKind::kProbe: {
      ProbePayload payload{GetString(p, "function_source"),
                           GetString(p, "entry_point"),
                           {}};
      if (!p.contains("inputs") || !p["inputs"].is_array() ||
          p["inputs"].empty()) {
        return absl::InvalidArgumentError(
            absl::StrCat("job ", job.job_id, ": probe inputs missing"));
      }
      for (const ordered_json& in : p["inputs"]) {
        if (!in.is_array() || in.size() != 2 || !in[0].is_number_integer() ||
            !in[1].is_number_integer()) {
          return absl::InvalidArgumentError(
              absl::StrCat("job ", job.job_id, ": malformed probe input"));
        }
        payload.inputs.push_back({in[0].get<int64_t>(), in[1].get<int64_t>()});
      }
      job.payload = std::move(payload);
      break;
    }
    case JobKind::kDeletion: {
      DeletionPayload payload{GetString(p, "function_source"),
                              GetString(p, "entry_point"),
                              {}};
      if (!p.contains("fixture") || !p["fixture"].is_array()) {
        return absl::InvalidArgumentError(
            absl::StrCat("job ", job.job_id, ": fixture missing"));
      }
      for (const ordered_json& f : p["fixture"]) {
        FixtureFile file;
        file.path = GetString(f, "path");
        if (file.path.empty() || file.path.front() == '/' ||
            file.path.find("..") != std::string::npos) {
          return absl::InvalidArgumentError(absl::StrCat(
              "job ", job.job_id, ": fixture paths must be relative"));
        }
        if (f.contains("packages") && f["packages"].is_array()) {
          for (const ordered_json& pkg : f["packages"]) {
            if (pkg.is_string()) file.packages.push_back(pkg.get<std::string>());
          }
        }
        payload.fixture.push_back(std::move(file));
      }
      job.payload = std::move(payload);
      break;
    }
  }
  return job;
}

std::string SerializeResult(const SandboxResult& result) {
  ordered_json detail = ordered_json::object();
  if (!result.outputs.empty()) {
    ordered_json outputs = ordered_json::array();
    for (const ProbeOutcome& o : result.outputs) {
      ordered_json entry;
      entry["kind"] = std::string(Name(o.kind));
      entry["value"] = o.value.has_value() ? ordered_json(*o.value)
                                           : ordered_json(nullptr);
      entry["detail"] = o.detail;
      outputs.push_back(std::move(entry));
    }
    detail["outputs"] = std::move(outputs);
  }
  detail["deleted"] = result.deleted;
  detail["error_class"] = result.error_class;
  detail["message"] = result.message;
  ordered_json j;
  j["job_id"] = result.job_id;
  j["status"] = std::string(Name(result.status));
  j["detail"] = std::move(detail);
  return j.dump();
}

absl::StatusOr<SandboxResult> ParseResult(absl::string_view line) {
  ordered_json j = ordered_json::parse(line.begin(), line.end(), nullptr,
                                       /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("sandbox result is not a JSON object");
  }
  SandboxResult r;
  r.job_id = GetString(j, "job_id");
  std::optional<JobStatus> status =
      ParseName(GetString(j, "status"), kJobStatuses);
  if (r.job_id.empty() || !status.has_value()) {
    return absl::InvalidArgumentError(
        "sandbox result lacks job_id or a valid status");
  }
  r.status = *status;
  const ordered_json detail =
      j.contains("detail") ? j["detail"] : ordered_json::object();
  r.error_class = GetString(detail, "error_class");
  r.message = GetString(detail, "message");
  if (detail.is_object() && detail.contains("outputs") &&
      detail["outputs"].is_array()) {
    for (const ordered_json& o : detail["outputs"]) {
      ProbeOutcome outcome;
      std::optional<OutcomeKind> kind =
          ParseName(GetString(o, "kind"), kOutcomeKinds);
      if (!kind.has_value()) {
        return absl::InvalidArgumentError(
            absl::StrCat("result ", r.job_id, ": unknown outcome kind"));
      }
      outcome.kind = *kind;
      if (o.contains("value") && o["value"].is_number()) {
        outcome.value = o["value"].get<double>();
      }
      outcome.detail = GetString(o, "detail");
      r.outputs.push_back(std::move(outcome));
    }
  }
  if (detail.is_object() && detail.contains("deleted") &&
      detail["deleted"].is_array()) {
    for (const ordered_json& d : detail["deleted"]) {
      if (d.is_string()) r.deleted.push_back(d.get<std::string>());
    }
    std::sort(r.deleted.begin(), r.deleted.end());
  }
  return r;
}

std::vector<FixtureFile> BuildDeletionFixture(
    std::span<const std::string> packages) {
  std::vector<FixtureFile> files;
  const std::vector<std::string> all(packages.begin(), packages.end());
  for (const std::string& p : all) {
    files.push_back({absl::StrCat("only_", p, ".py"), {p}});
  }
  files.push_back({"all_packages.py", all});
  if (all.size() >= 2) {
    for (size_t skip = 0; skip < all.size(); ++skip) {
      std::vector<std::string> rest;
      for (size_t i = 0; i < all.size(); ++i) {
        if (i != skip) rest.push_back(all[i]);
      }
      files.push_back({absl::StrCat("without_", all[skip], ".py"), rest});
    }
  }
  for (absl::string_view candidate : kPackagePool) {
    if (std::find(all.begin(), all.end(), candidate) == all.end()) {
      files.push_back({absl::StrCat("distractor_", candidate, ".py"),
                       {std::string(candidate)}});
      break;
    }
  }
  files.push_back({"no_imports.py", {}});
  return files;
}

// ---------------------------------------------------------------------------

ProcessSandboxClient::ProcessSandboxClient(std::string command,
                                           std::chrono::milliseconds grace)
    : command_(std::move(command)), grace_(grace) {
  // A dead runner must surface as a write error, not a signal.
  signal(SIGPIPE, SIG_IGN);
}

ProcessSandboxClient::~ProcessSandboxClient() { Stop(); }

absl::Status ProcessSandboxClient::EnsureStarted() {
  if (pid_ > 0) return absl::OkStatus();
  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) {
    return absl::InternalError("pipe2 failed");
  }
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    return absl::InternalError("pipe2 failed");
  }
  const pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    return absl::InternalError("fork failed");
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
  if (starts_++ > 0) ++restarts_;
  return absl::OkStatus();
}

void ProcessSandboxClient::Stop() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
  buffer_.clear();
}

std::optional<std::string> ProcessSandboxClient::ReadLine(
    std::chrono::steady_clock::time_point deadline, bool* eof) {
  *eof = false;
  for (;;) {
    const size_t nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) return std::nullopt;
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) return std::nullopt;
    char chunk[65536];
    const ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      *eof = true;
      return std::nullopt;
    }
    buffer_.append(chunk, static_cast<size_t>(n));
  }
}

absl::StatusOr<SandboxResult> ProcessSandboxClient::Run(const SandboxJob& job) {
  std::lock_guard<std::mutex> lock(mu_);
  const std::string line = SerializeJob(job) + "\n";
  bool written = false;
  for (int attempt = 0; attempt < 2 && !written; ++attempt) {
    absl::Status started = EnsureStarted();
    if (!started.ok()) return started;
    size_t off = 0;
    while (off < line.size()) {
      const ssize_t n = write(to_child_, line.data() + off, line.size() - off);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      off += static_cast<size_t>(n);
    }
    written = off == line.size();
    if (!written) Stop();
  }
  if (!written) {
    return absl::UnavailableError(
        absl::StrCat("sandbox runner '", command_, "' does not accept jobs"));
  }

  SandboxResult result;
  result.job_id = job.job_id;
  const auto deadline =
      std::chrono::steady_clock::now() +
      std::chrono::milliseconds(static_cast<int64_t>(job.timeout_seconds * 1000)) +
      grace_;
  bool eof = false;
  std::optional<std::string> reply = ReadLine(deadline, &eof);
  if (!reply.has_value()) {
    Stop();
    if (eof) {
      result.status = JobStatus::kError;
      result.error_class = "runner_crashed";
      result.message = "sandbox runner exited before answering";
    } else {
      result.status = JobStatus::kTimeout;
      result.error_class = "watchdog";
      result.message = "sandbox runner exceeded timeout plus grace";
    }
    return result;
  }
  absl::StatusOr<SandboxResult> parsed = ParseResult(*reply);
  if (!parsed.ok() || parsed->job_id != job.job_id) {
    Stop();
    result.status = JobStatus::kError;
    result.error_class = "protocol";
    result.message = parsed.ok() ? "result for a different job"
                                 : std::string(parsed.status().message());
    return result;
  }
  return parsed;
}

SandboxPool::SandboxPool(std::string command, int size) {
  const int n = std::max(1, size);
  for (int i = 0; i < n; ++i) {
    clients_.push_back(std::make_unique<ProcessSandboxClient>(command));
  }
  busy_.assign(clients_.size(), false);
}

absl::StatusOr<SandboxResult> SandboxPool::Run(const SandboxJob& job) {
  size_t slot = 0;
  {
    std::unique_lock<std::mutex> lock(mu_);
    free_.wait(lock, [&] {
      return std::find(busy_.begin(), busy_.end(), false) != busy_.end();
    });
    slot = std::find(busy_.begin(), busy_.end(), false) - busy_.begin();
    busy_[slot] = true;
  }
  absl::StatusOr<SandboxResult> result = clients_[slot]->Run(job);
  {
    std::lock_guard<std::mutex> lock(mu_);
    busy_[slot] = false;
  }
  free_.notify_one();
  return result;
}

}  // namespace biasprobe
