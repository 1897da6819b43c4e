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

#ifndef BIASPROBE_IO_H_
#define BIASPROBE_IO_H_

#include <filesystem>
#include <string>
#include "absl/strings/string_view.h"
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace biasprobe {

// Reads a whole file. Gzip-compressed input is inflated transparently.
absl::StatusOr<std::string> ReadFileToString(const std::filesystem::path& path);

// Splits `text` on '\n', dropping empty and whitespace-only lines.
std::vector<absl::string_view> NonEmptyLines(absl::string_view text);

// Writes `contents` to a sibling temporary file and renames it over `path`,
// creating parent directories as needed.
absl::Status WriteFileAtomic(const std::filesystem::path& path,
                             absl::string_view contents);

// Appends one line (a trailing '\n' is added) and flushes.
absl::Status AppendLine(const std::filesystem::path& path,
                        absl::string_view line);

std::string Sha256Hex(absl::string_view data);

}  // namespace biasprobe

#endif  // BIASPROBE_IO_H_
