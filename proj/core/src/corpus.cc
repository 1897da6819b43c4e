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

#include "biasprobe/corpus.h"

#include <algorithm>
#include <cctype>
#include <set>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "biasprobe/io.h"
#include "json.hpp"

namespace biasprobe {
namespace {

constexpr size_t kNpos = absl::string_view::npos;

bool IsIdentStart(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool IsIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool IsQuote(char c) { return c == '"' || c == '\''; }

// Length of a string-literal prefix (r, b, f, u, rb, ...) at `pos` that is
// immediately followed by a quote, or 0.
size_t StringPrefixLength(absl::string_view s, size_t pos) {
  if (pos > 0 && IsIdentChar(s[pos - 1])) return 0;
  static constexpr absl::string_view kPrefixChars = "rRbBuUfF";
  size_t n = 0;
  while (n < 2 && pos + n < s.size() &&
         kPrefixChars.find(s[pos + n]) != kNpos) {
    ++n;
  }
  while (n > 0) {
    if (pos + n < s.size() && IsQuote(s[pos + n])) return n;
    --n;
  }
  return 0;
}

// `pos` is at an opening quote. Returns the offset just past the closing
// quote, or npos if the literal is unterminated.
size_t SkipStringLiteral(absl::string_view s, size_t pos) {
  const char quote = s[pos];
  const std::string triple(3, quote);
  if (s.substr(pos, 3) == triple) {
    for (size_t i = pos + 3; i < s.size();) {
      if (s[i] == '\\') {
        i += 2;
      } else if (s.substr(i, 3) == triple) {
        return i + 3;
      } else {
        ++i;
      }
    }
    return kNpos;
  }
  for (size_t i = pos + 1; i < s.size();) {
    if (s[i] == '\\') {
      i += 2;
    } else if (s[i] == quote) {
      return i + 1;
    } else if (s[i] == '\n') {
      return kNpos;
    } else {
      ++i;
    }
  }
  return kNpos;
}

absl::string_view Trim(absl::string_view s) {
  const size_t first = s.find_first_not_of(" \t\r\n");
  if (first == kNpos) return {};
  const size_t last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Collapses whitespace runs that cross a line break into one space.
std::string JoinContinuationLines(absl::string_view s) {
  std::string out;
  for (size_t i = 0; i < s.size();) {
    if (std::isspace(static_cast<unsigned char>(s[i]))) {
      size_t j = i;
      bool newline = false;
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) {
        newline |= s[j] == '\n';
        ++j;
      }
      if (newline) {
        if (!out.empty() && out.back() != '(' && out.back() != '[' &&
            out.back() != '{') {
          out.push_back(' ');
        }
      } else {
        absl::StrAppend(&out, s.substr(i, j - i));
      }
      i = j;
    } else {
      out.push_back(s[i++]);
    }
  }
  return std::string(Trim(out));
}

// Recursive-descent parser for the `def` header subset: name, parameter list
// with annotations and defaults, optional return annotation.
class HeaderParser {
 public:
  HeaderParser(absl::string_view source, size_t pos) : s_(source), i_(pos) {}

  absl::StatusOr<FunctionSignature> Parse() {
    FunctionSignature sig;
    sig.begin = i_;
    if (s_.substr(i_, 6) == "async ") {
      i_ += 6;
      SkipInlineSpace();
    }
    if (s_.substr(i_, 3) != "def") return Error("expected 'def'");
    i_ += 3;
    SkipInlineSpace();
    const size_t name_start = i_;
    if (i_ >= s_.size() || !IsIdentStart(s_[i_])) {
      return Error("expected function name");
    }
    while (i_ < s_.size() && IsIdentChar(s_[i_])) ++i_;
    sig.name = std::string(s_.substr(name_start, i_ - name_start));
    SkipInlineSpace();
    if (i_ >= s_.size() || s_[i_] != '(') return Error("expected '('");
    ++i_;
    if (absl::Status st = ParseParameters(sig.params); !st.ok()) return st;
    SkipInlineSpace();
    if (s_.substr(i_, 2) == "->") {
      i_ += 2;
      absl::StatusOr<std::string> ret = ScanExpression(":");
      if (!ret.ok()) return ret.status();
      if (ret->empty()) return Error("empty return annotation");
      sig.return_annotation = *std::move(ret);
    }
    SkipInlineSpace();
    if (i_ >= s_.size() || s_[i_] != ':') return Error("expected ':'");
    ++i_;
    sig.end = i_;
    sig.raw_text = std::string(s_.substr(sig.begin, sig.end - sig.begin));

    std::set<std::string> seen;
    for (const Parameter& p : sig.params) {
      if (p.is_marker()) continue;
      if (!seen.insert(p.name).second) {
        return absl::InvalidArgumentError(
            absl::StrCat("duplicate parameter '", p.name, "' in ", sig.name));
      }
    }
    return sig;
  }

 private:
  absl::Status Error(absl::string_view message) const {
    return absl::InvalidArgumentError(
        absl::StrCat("signature parse error at offset ", i_, ": ", message));
  }

  void SkipInlineSpace() {
    while (i_ < s_.size()) {
      if (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\r') {
        ++i_;
      } else if (s_[i_] == '\\' && i_ + 1 < s_.size() && s_[i_ + 1] == '\n') {
        i_ += 2;
      } else {
        break;
      }
    }
  }

  // Inside brackets newlines and comments are insignificant.
  void SkipBracketedSpace() {
    while (i_ < s_.size()) {
      if (std::isspace(static_cast<unsigned char>(s_[i_]))) {
        ++i_;
      } else if (s_[i_] == '#') {
        while (i_ < s_.size() && s_[i_] != '\n') ++i_;
      } else if (s_[i_] == '\\' && i_ + 1 < s_.size() && s_[i_ + 1] == '\n') {
        i_ += 2;
      } else {
        break;
      }
    }
  }

  absl::Status ParseParameters(std::vector<Parameter>& params) {
    while (true) {
      SkipBracketedSpace();
      if (i_ >= s_.size()) return Error("unbalanced parentheses");
      if (s_[i_] == ')') {
        ++i_;
        return absl::OkStatus();
      }
      absl::StatusOr<Parameter> param = ParseParameter();
      if (!param.ok()) return param.status();
      params.push_back(*std::move(param));
      SkipBracketedSpace();
      if (i_ >= s_.size()) return Error("unbalanced parentheses");
      if (s_[i_] == ',') {
        ++i_;
      } else if (s_[i_] != ')') {
        return Error("expected ',' or ')'");
      }
    }
  }

  absl::StatusOr<Parameter> ParseParameter() {
    Parameter p;
    if (s_.substr(i_, 2) == "**") {
      p.kind = ParameterKind::kKwArgs;
      i_ += 2;
    } else if (s_[i_] == '*') {
      ++i_;
      SkipBracketedSpace();
      if (i_ < s_.size() && (s_[i_] == ',' || s_[i_] == ')')) {
        p.kind = ParameterKind::kKeywordOnlyMarker;
        return p;
      }
      p.kind = ParameterKind::kVarArgs;
    } else if (s_[i_] == '/') {
      ++i_;
      p.kind = ParameterKind::kPositionalMarker;
      return p;
    }
    SkipBracketedSpace();
    const size_t start = i_;
    if (i_ >= s_.size() || !IsIdentStart(s_[i_])) {
      return Error("expected parameter name");
    }
    while (i_ < s_.size() && IsIdentChar(s_[i_])) ++i_;
    p.name = std::string(s_.substr(start, i_ - start));
    SkipBracketedSpace();
    if (i_ < s_.size() && s_[i_] == ':') {
      ++i_;
      absl::StatusOr<std::string> annotation = ScanExpression(",)=");
      if (!annotation.ok()) return annotation.status();
      if (annotation->empty()) return Error("empty annotation");
      p.annotation = *std::move(annotation);
    }
    SkipBracketedSpace();
    if (i_ < s_.size() && s_[i_] == '=') {
      ++i_;
      absl::StatusOr<std::string> value = ScanExpression(",)");
      if (!value.ok()) return value.status();
      if (value->empty()) return Error("empty default value");
      p.default_value = *std::move(value);
    }
    return p;
  }

  // Scans an expression up to a depth-0 character in `stops`, skipping nested
  // brackets, string literals and comments. The stop character is not
  // consumed.
  absl::StatusOr<std::string> ScanExpression(absl::string_view stops) {
    std::string text;
    int depth = 0;
    while (i_ < s_.size()) {
      const char c = s_[i_];
      if (depth == 0 && stops.find(c) != kNpos) {
        return JoinContinuationLines(text);
      }
      if (c == '#') {
        while (i_ < s_.size() && s_[i_] != '\n') ++i_;
        continue;
      }
      if (c == '\\' && i_ + 1 < s_.size() && s_[i_ + 1] == '\n') {
        i_ += 2;
        text.push_back(' ');
        continue;
      }
      const size_t prefix = StringPrefixLength(s_, i_);
      if (prefix > 0 || IsQuote(c)) {
        const size_t end = SkipStringLiteral(s_, i_ + prefix);
        if (end == kNpos) return Error("unterminated string literal");
        absl::StrAppend(&text, s_.substr(i_, end - i_));
        i_ = end;
        continue;
      }
      if (c == '(' || c == '[' || c == '{') {
        ++depth;
      } else if (c == ')' || c == ']' || c == '}') {
        if (--depth < 0) return Error("unbalanced parentheses");
      }
      text.push_back(c);
      ++i_;
    }
    return Error("unbalanced parentheses");
  }

  absl::string_view s_;
  size_t i_;
};

bool StartsHeader(absl::string_view s, size_t pos) {
  auto keyword_at = [&](size_t at, absl::string_view kw) {
    return s.substr(at, kw.size()) == kw && at + kw.size() < s.size() &&
           (s[at + kw.size()] == ' ' || s[at + kw.size()] == '\t');
  };
  if (keyword_at(pos, "def")) return true;
  if (keyword_at(pos, "async")) {
    size_t j = pos + 5;
    while (j < s.size() && (s[j] == ' ' || s[j] == '\t')) ++j;
    return keyword_at(j, "def");
  }
  return false;
}

absl::StatusOr<std::string> RequireString(const nlohmann::json& record,
                                          const char* field,
                                          absl::string_view task_id) {
  auto it = record.find(field);
  const std::string who =
      task_id.empty() ? std::string("record") : absl::StrCat("task ", task_id);
  if (it == record.end()) {
    return absl::InvalidArgumentError(
        absl::StrCat(who, ": missing field '", field, "'"));
  }
  if (!it->is_string()) {
    return absl::InvalidArgumentError(
        absl::StrCat(who, ": field '", field, "' is not a string"));
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<std::string> FunctionSignature::ParameterNames() const {
  std::vector<std::string> names;
  for (const Parameter& p : params) {
    if (!p.is_marker()) names.push_back(p.name);
  }
  return names;
}

SolutionLines SolutionLines::FromSource(absl::string_view source) {
  SolutionLines out;
  size_t start = 0;
  while (start <= source.size()) {
    size_t end = source.find('\n', start);
    if (end == kNpos) end = source.size();
    absl::string_view line = source.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.lines_.emplace_back(line);
    start = end + 1;
  }
  while (!out.lines_.empty() && Trim(out.lines_.back()).empty()) {
    out.lines_.pop_back();
  }
  return out;
}

size_t SolutionLines::CodeLineCount() const {
  return static_cast<size_t>(
      std::count_if(lines_.begin(), lines_.end(),
                    [](const std::string& l) { return !Trim(l).empty(); }));
}

std::string SolutionLines::Join() const { return absl::StrJoin(lines_, "\n"); }

size_t SolutionLines::PhysicalEnd(size_t n_code_lines) const {
  if (n_code_lines == 0) return 0;
  size_t seen = 0;
  for (size_t i = 0; i < lines_.size(); ++i) {
    if (!Trim(lines_[i]).empty() && ++seen == n_code_lines) return i + 1;
  }
  return lines_.size();
}

std::string SolutionLines::Prefix(size_t n_code_lines) const {
  std::string out;
  const size_t end = PhysicalEnd(n_code_lines);
  for (size_t i = 0; i < end; ++i) absl::StrAppend(&out, lines_[i], "\n");
  return out;
}

std::string SolutionLines::Remainder(size_t n_code_lines) const {
  std::string out;
  for (size_t i = PhysicalEnd(n_code_lines); i < lines_.size(); ++i) {
    absl::StrAppend(&out, lines_[i], "\n");
  }
  return out;
}

absl::StatusOr<CodeProblem> ParseProblemRecord(absl::string_view line) {
  nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
  if (record.is_discarded() || !record.is_object()) {
    return absl::InvalidArgumentError("record is not a JSON object");
  }
  CodeProblem problem;
  absl::StatusOr<std::string> task_id = RequireString(record, "task_id", "");
  if (!task_id.ok()) return task_id.status();
  problem.task_id = *task_id;
  struct Field {
    const char* name;
    std::string* target;
  };
  for (const Field& f : {Field{"prompt", &problem.prompt},
                         Field{"entry_point", &problem.entry_point},
                         Field{"canonical_solution", &problem.canonical_solution},
                         Field{"test", &problem.test}}) {
    absl::StatusOr<std::string> value =
        RequireString(record, f.name, problem.task_id);
    if (!value.ok()) return value.status();
    *f.target = *std::move(value);
  }
  if (Trim(problem.canonical_solution).empty()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "task ", problem.task_id, ": field 'canonical_solution' is empty"));
  }
  return problem;
}

absl::StatusOr<CorpusLoad> LoadProblems(const std::filesystem::path& path) {
  absl::StatusOr<std::string> text = ReadFileToString(path);
  if (!text.ok()) return text.status();
  CorpusLoad load;
  size_t line_number = 0;
  size_t start = 0;
  while (start < text->size()) {
    size_t end = text->find('\n', start);
    if (end == kNpos) end = text->size();
    ++line_number;
    absl::string_view line = absl::string_view(*text).substr(start, end - start);
    start = end + 1;
    if (Trim(line).empty()) continue;
    absl::StatusOr<CodeProblem> problem = ParseProblemRecord(line);
    if (problem.ok()) {
      load.problems.push_back(*std::move(problem));
      continue;
    }
    LoadError error{line_number, "", std::string(problem.status().message())};
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_object() && record.contains("task_id") &&
        record["task_id"].is_string()) {
      error.task_id = record["task_id"].get<std::string>();
    }
    load.errors.push_back(std::move(error));
  }
  return load;
}

absl::StatusOr<std::vector<FunctionSignature>> ParseTopLevelFunctions(
    absl::string_view source) {
  std::vector<FunctionSignature> out;
  size_t i = 0;
  bool line_start = true;
  while (i < source.size()) {
    const char c = source[i];
    if (line_start && StartsHeader(source, i)) {
      absl::StatusOr<FunctionSignature> sig = HeaderParser(source, i).Parse();
      if (!sig.ok()) return sig.status();
      i = sig->end;
      out.push_back(*std::move(sig));
      line_start = false;
      continue;
    }
    line_start = false;
    if (c == '\n') {
      line_start = true;
      ++i;
    } else if (c == '#') {
      while (i < source.size() && source[i] != '\n') ++i;
    } else if (const size_t prefix = StringPrefixLength(source, i);
               prefix > 0 || IsQuote(c)) {
      const size_t end = SkipStringLiteral(source, i + prefix);
      if (end == kNpos) {
        return absl::InvalidArgumentError(
            absl::StrCat("unterminated string literal at offset ", i));
      }
      i = end;
    } else {
      ++i;
    }
  }
  return out;
}

absl::StatusOr<FunctionSignature> ParseSignature(absl::string_view source) {
  absl::StatusOr<std::vector<FunctionSignature>> all =
      ParseTopLevelFunctions(source);
  if (!all.ok()) return all.status();
  if (all->empty()) {
    return absl::InvalidArgumentError("no top-level 'def' found");
  }
  return std::move(all->back());
}

absl::StatusOr<FunctionSignature> ParseSignature(absl::string_view source,
                                                 absl::string_view name) {
  absl::StatusOr<std::vector<FunctionSignature>> all =
      ParseTopLevelFunctions(source);
  if (!all.ok()) return all.status();
  for (FunctionSignature& sig : *all) {
    if (sig.name == name) return std::move(sig);
  }
  return absl::NotFoundError(
      absl::StrCat("no top-level function named '", name, "'"));
}

std::string StripAnnotations(const FunctionSignature& signature) {
  std::vector<std::string> parts;
  for (const Parameter& p : signature.params) {
    switch (p.kind) {
      case ParameterKind::kKeywordOnlyMarker:
        parts.emplace_back("*");
        continue;
      case ParameterKind::kPositionalMarker:
        parts.emplace_back("/");
        continue;
      case ParameterKind::kVarArgs:
        parts.push_back(absl::StrCat("*", p.name));
        continue;
      case ParameterKind::kKwArgs:
        parts.push_back(absl::StrCat("**", p.name));
        continue;
      case ParameterKind::kRegular:
        break;
    }
    parts.push_back(p.default_value ? absl::StrCat(p.name, "=", *p.default_value)
                                    : p.name);
  }
  return absl::StrCat("def ", signature.name, "(", absl::StrJoin(parts, ", "),
                      "):");
}

absl::StatusOr<std::optional<Docstring>> ExtractDocstring(
    absl::string_view source, const FunctionSignature& signature) {
  size_t i = signature.end;
  while (i < source.size()) {
    if (std::isspace(static_cast<unsigned char>(source[i]))) {
      ++i;
    } else if (source[i] == '#') {
      while (i < source.size() && source[i] != '\n') ++i;
    } else {
      break;
    }
  }
  if (i >= source.size()) return std::nullopt;
  const size_t begin = i;
  size_t prefix = StringPrefixLength(source, i);
  if (prefix > 0) {
    for (size_t k = 0; k < prefix; ++k) {
      const char c = static_cast<char>(std::tolower(source[i + k]));
      if (c != 'r' && c != 'u') return std::nullopt;
    }
  }
  const size_t quote = i + prefix;
  if (quote >= source.size() || !IsQuote(source[quote])) return std::nullopt;
  const std::string triple(3, source[quote]);
  if (source.substr(quote, 3) != triple) return std::nullopt;
  const size_t end = SkipStringLiteral(source, quote);
  if (end == kNpos) {
    return absl::InvalidArgumentError(absl::StrCat(
        "unterminated triple-quoted docstring at offset ", quote));
  }
  Docstring doc;
  doc.begin = begin;
  doc.end = end;
  doc.body = std::string(source.substr(quote + 3, end - 3 - (quote + 3)));
  return doc;
}

absl::StatusOr<std::optional<Docstring>> ExtractDocstring(
    absl::string_view source) {
  absl::StatusOr<FunctionSignature> sig = ParseSignature(source);
  if (!sig.ok()) return sig.status();
  return ExtractDocstring(source, *sig);
}

std::vector<CodeProblem> FilterBySolutionLength(
    std::span<const CodeProblem> problems, size_t n) {
  std::vector<CodeProblem> out;
  for (const CodeProblem& p : problems) {
    if (SolutionLines::FromSource(p.canonical_solution).CodeLineCount() > n) {
      out.push_back(p);
    }
  }
  return out;
}

bool IsIdentifier(absl::string_view text) {
  if (text.empty() || !IsIdentStart(text.front())) return false;
  return std::all_of(text.begin(), text.end(), IsIdentChar);
}

std::string ReplaceIdentifier(absl::string_view text, absl::string_view from,
                              absl::string_view to) {
  std::string out;
  size_t i = 0;
  while (i < text.size()) {
    const size_t hit = text.find(from, i);
    if (hit == kNpos) break;
    const bool left_ok = hit == 0 || !IsIdentChar(text[hit - 1]);
    const size_t after = hit + from.size();
    const bool right_ok = after >= text.size() || !IsIdentChar(text[after]);
    absl::StrAppend(&out, text.substr(i, hit - i));
    if (left_ok && right_ok) {
      absl::StrAppend(&out, to);
    } else {
      absl::StrAppend(&out, from);
    }
    i = after;
  }
  absl::StrAppend(&out, text.substr(i));
  return out;
}

}  // namespace biasprobe
