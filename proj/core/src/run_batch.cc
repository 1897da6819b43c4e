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

#include <atomic>
#include <condition_variable>
#include <thread>

#include "absl/strings/str_cat.h"
#include "biasprobe/backends.h"
#include "biasprobe/io.h"

namespace biasprobe {

RateLimiter::RateLimiter(int per_minute, Clock clock, Sleeper sleeper)
    : per_minute_(per_minute),
      clock_(clock ? std::move(clock) : [] { return std::chrono::steady_clock::now(); }),
      sleeper_(sleeper ? std::move(sleeper)
                       : [](std::chrono::steady_clock::duration d) {
                           std::this_thread::sleep_for(d);
                         }) {}

void RateLimiter::Acquire() {
  if (per_minute_ <= 0) return;
  constexpr auto kWindow = std::chrono::minutes(1);
  for (;;) {
    std::chrono::steady_clock::duration wait{};
    {
      std::lock_guard<std::mutex> lock(mu_);
      const auto now = clock_();
      while (!issued_.empty() && now - issued_.front() >= kWindow) {
        issued_.pop_front();
      }
      if (static_cast<int>(issued_.size()) < per_minute_) {
        issued_.push_back(now);
        return;
      }
      wait = issued_.front() + kWindow - now;
    }
    sleeper_(wait);
  }
}

absl::StatusOr<BatchSummary> RunBatch(std::span<const TransformedPrompt> probes,
                                      Backend& backend,
                                      const std::filesystem::path& store_path,
                                      const BatchOptions& options) {
  absl::StatusOr<std::map<std::string, CompletionRecord>> existing =
      ReadRunStore(store_path);
  if (!existing.ok()) return existing.status();
  std::map<std::string, CompletionRecord> store = *std::move(existing);

  BatchSummary summary;
  summary.total = probes.size();
  std::vector<const TransformedPrompt*> pending;
  for (const TransformedPrompt& p : probes) {
    auto it = store.find(p.probe_id);
    if (options.resume && it != store.end() && it->second.ok()) {
      ++summary.skipped;
      continue;
    }
    pending.push_back(&p);
  }

  RateLimiter limiter(options.requests_per_minute, options.clock,
                      options.sleeper);
  std::mutex mu;
  std::condition_variable ready;
  std::deque<CompletionRecord> finished;
  std::atomic<size_t> next{0};
  std::atomic<bool> abort{false};

  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= pending.size() || abort.load()) return;
      const TransformedPrompt& probe = *pending[i];
      CompletionRequest request = options.make_request
                                      ? options.make_request(probe)
                                      : DefaultRequest(probe);
      limiter.Acquire();
      CompletionRecord record = backend.Complete(probe, request);
      {
        std::lock_guard<std::mutex> lock(mu);
        finished.push_back(std::move(record));
      }
      ready.notify_one();
    }
  };

  const int threads = std::max(1, options.parallelism);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);

  // This thread is the only writer of the store.
  absl::Status write_status;
  for (size_t written = 0; written < pending.size() && write_status.ok();) {
    std::unique_lock<std::mutex> lock(mu);
    ready.wait(lock, [&] { return !finished.empty(); });
    std::deque<CompletionRecord> batch;
    batch.swap(finished);
    lock.unlock();
    for (CompletionRecord& record : batch) {
      ++written;
      ++summary.issued;
      if (!record.ok()) ++summary.failed;
      write_status = AppendLine(store_path, SerializeRecord(record));
      if (!write_status.ok()) {
        abort.store(true);
        break;
      }
      std::string id = record.probe_id;
      store[id] = std::move(record);
    }
  }
  for (std::thread& t : pool) t.join();
  if (!write_status.ok()) {
    return absl::UnavailableError(absl::StrCat(
        "run store ", store_path.string(), " is not writable: ",
        write_status.message()));
  }
  absl::Status compact = WriteRunStore(store_path, store);
  if (!compact.ok()) return compact;
  return summary;
}

}  // namespace biasprobe
