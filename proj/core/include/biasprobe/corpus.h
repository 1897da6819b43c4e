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

// HumanEval-style problem corpus: loading and the structural parsing every
// prompt transformation consumes (function header, docstring, solution lines).

#ifndef BIASPROBE_CORPUS_H_
#define BIASPROBE_CORPUS_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include "absl/strings/string_view.h"
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace biasprobe {

struct CodeProblem {
  std::string task_id;
  std::string prompt;
  std::string entry_point;
  std::string canonical_solution;
  std::string test;
};

enum class ParameterKind {
  kRegular,
  kVarArgs,           // *args
  kKwArgs,            // **kwargs
  kKeywordOnlyMarker, // bare *
  kPositionalMarker,  // /
};

struct Parameter {
  std::string name;  // empty for the two marker kinds
  ParameterKind kind = ParameterKind::kRegular;
  std::optional<std::string> annotation;
  std::optional<std::string> default_value;

  bool is_marker() const {
    return kind == ParameterKind::kKeywordOnlyMarker ||
           kind == ParameterKind::kPositionalMarker;
  }
};

struct FunctionSignature {
  std::string name;
  std::vector<Parameter> params;
  std::optional<std::string> return_annotation;
  // The `def ...:` header exactly as written, possibly spanning lines.
  std::string raw_text;
  // Byte range of raw_text inside the parsed source.
  size_t begin = 0;
  size_t end = 0;

  // Names of the non-marker parameters, in source order.
  std::vector<std::string> ParameterNames() const;
};

// Physical lines of a canonical solution with trailing blank lines removed.
// A "code line" is a line holding anything besides whitespace; solution
// lengths and prefixes are measured in code lines.
class SolutionLines {
 public:
  static SolutionLines FromSource(absl::string_view source);

  const std::vector<std::string>& lines() const { return lines_; }
  size_t CodeLineCount() const;

  // Lines joined with '\n' (no trailing newline).
  std::string Join() const;

  // Physical lines up to and including the n-th code line, each terminated by
  // '\n'. Empty for n == 0.
  std::string Prefix(size_t n_code_lines) const;

  // Everything after Prefix(n), each line terminated by '\n'.
  std::string Remainder(size_t n_code_lines) const;

 private:
  size_t PhysicalEnd(size_t n_code_lines) const;
  std::vector<std::string> lines_;
};

struct Docstring {
  // [begin, end) covers prefix and delimiters.
  size_t begin = 0;
  size_t end = 0;
  std::string body;
};

struct LoadError {
  size_t line_number = 0;  // 1-based
  std::string task_id;     // empty when the record has none
  std::string message;
};

struct CorpusLoad {
  std::vector<CodeProblem> problems;
  std::vector<LoadError> errors;
};

// Loads line-delimited problem records (optionally gzip-compressed). Malformed
// records are reported per line in `errors`; an unreadable file is an error.
absl::StatusOr<CorpusLoad> LoadProblems(const std::filesystem::path& path);

// Parses one record. The error message names the missing or mistyped field.
absl::StatusOr<CodeProblem> ParseProblemRecord(absl::string_view line);

// All top-level (column 0) function headers in source order. Text inside
// string literals and comments is never mistaken for a header.
absl::StatusOr<std::vector<FunctionSignature>> ParseTopLevelFunctions(
    absl::string_view source);

// The last top-level function header, which is the function to complete in
// every HumanEval prompt (earlier ones are helpers).
absl::StatusOr<FunctionSignature> ParseSignature(absl::string_view source);

// The top-level header named `name`.
absl::StatusOr<FunctionSignature> ParseSignature(absl::string_view source,
                                                 absl::string_view name);

// Single-line `def name(a, b=1):` with every annotation removed.
std::string StripAnnotations(const FunctionSignature& signature);

// Docstring of the last top-level function, or nullopt if it has none.
absl::StatusOr<std::optional<Docstring>> ExtractDocstring(
    absl::string_view source);
absl::StatusOr<std::optional<Docstring>> ExtractDocstring(
    absl::string_view source, const FunctionSignature& signature);

// Problems whose canonical solution has strictly more than n code lines.
std::vector<CodeProblem> FilterBySolutionLength(
    std::span<const CodeProblem> problems, size_t n);

// Replaces whole-identifier occurrences of `from` with `to`.
std::string ReplaceIdentifier(absl::string_view text, absl::string_view from,
                              absl::string_view to);

bool IsIdentifier(absl::string_view text);

}  // namespace biasprobe

#endif  // BIASPROBE_CORPUS_H_
