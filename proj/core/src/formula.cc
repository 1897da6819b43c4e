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

#include "biasprobe/formula.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/strip.h"

namespace biasprobe {
namespace {

double ApplyBinary(BinaryOp op, double x, double y) {
  switch (op) {
    case BinaryOp::kSum:
      return x + y;
    case BinaryOp::kDifference:
      return x - y;
    case BinaryOp::kProduct:
      return x * y;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double ApplyUnary(UnaryOp op, double v) {
  switch (op) {
    case UnaryOp::kSquare:
      return v * v;
    case UnaryOp::kCube:
      return v * v * v;
    case UnaryOp::kQuadruple:
      return v * v * v * v;
    case UnaryOp::kSquareRoot:
      return v < 0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(v);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::string PythonBinary(BinaryOp op, absl::string_view a, absl::string_view b) {
  switch (op) {
    case BinaryOp::kSum:
      return absl::StrCat(a, " + ", b);
    case BinaryOp::kDifference:
      return absl::StrCat(a, " - ", b);
    case BinaryOp::kProduct:
      return absl::StrCat(a, " * ", b);
  }
  return "";
}

// `operand` must already be atomic or parenthesized.
std::string PythonUnary(UnaryOp op, absl::string_view operand,
                        bool* needs_math) {
  switch (op) {
    case UnaryOp::kSquare:
      return absl::StrCat(operand, " ** 2");
    case UnaryOp::kCube:
      return absl::StrCat(operand, " ** 3");
    case UnaryOp::kQuadruple:
      return absl::StrCat(operand, " ** 4");
    case UnaryOp::kSquareRoot: {
      if (needs_math != nullptr) *needs_math = true;
      absl::string_view inner = operand;
      if (inner.size() >= 2 && inner.front() == '(' && inner.back() == ')') {
        inner = inner.substr(1, inner.size() - 2);
      }
      return absl::StrCat("math.sqrt(", inner, ")");
    }
  }
  return "";
}

constexpr ProbeInput kBaseInputs[] = {{2, 3}, {3, 5}, {1, 4}, {0, 0}, {7, 2}};
constexpr ProbeInput kSquareRootInputs[] = {{4, 9}, {16, 25}, {9, 4}, {25, 16}};

bool UsesSquareRoot(const Formula& f) {
  return f.unary == UnaryOp::kSquareRoot;
}

}  // namespace

absl::string_view Name(BinaryOp op) {
  switch (op) {
    case BinaryOp::kSum:
      return "sum";
    case BinaryOp::kDifference:
      return "difference";
    case BinaryOp::kProduct:
      return "product";
  }
  return "";
}

absl::string_view Name(UnaryOp op) {
  switch (op) {
    case UnaryOp::kSquare:
      return "square";
    case UnaryOp::kCube:
      return "cube";
    case UnaryOp::kQuadruple:
      return "quadruple";
    case UnaryOp::kSquareRoot:
      return "square_root";
  }
  return "";
}

absl::string_view Name(OperationOrder order) {
  return order == OperationOrder::kUnaryFirst ? "unary_first" : "binary_first";
}

std::optional<BinaryOp> ParseBinaryOp(absl::string_view name) {
  for (BinaryOp op : kAllBinaryOps) {
    if (Name(op) == name) return op;
  }
  return std::nullopt;
}

std::optional<UnaryOp> ParseUnaryOp(absl::string_view name) {
  for (UnaryOp op : kAllUnaryOps) {
    if (Name(op) == name) return op;
  }
  return std::nullopt;
}

std::optional<OperationOrder> ParseOperationOrder(absl::string_view name) {
  if (name == "unary_first") return OperationOrder::kUnaryFirst;
  if (name == "binary_first") return OperationOrder::kBinaryFirst;
  return std::nullopt;
}

double Formula::Evaluate(double x, double y) const {
  double value;
  if (!unary) {
    value = ApplyBinary(binary, x, y);
  } else if (order == OperationOrder::kUnaryFirst) {
    value = ApplyBinary(binary, ApplyUnary(*unary, x), ApplyUnary(*unary, y));
  } else {
    value = ApplyUnary(*unary, ApplyBinary(binary, x, y));
  }
  return value + static_cast<double>(addend);
}

std::string Formula::ToString() const {
  std::string core;
  if (!unary) {
    core = absl::StrCat(Name(binary), "(x,y)");
  } else if (order == OperationOrder::kUnaryFirst) {
    core = absl::StrCat(Name(binary), "(", Name(*unary), "(x),", Name(*unary),
                        "(y))");
  } else {
    core = absl::StrCat(Name(*unary), "(", Name(binary), "(x,y))");
  }
  if (addend != 0) absl::StrAppend(&core, addend > 0 ? "+" : "", addend);
  return core;
}

std::string Formula::ToPython(bool* needs_math) const {
  std::string expr;
  if (!unary) {
    expr = PythonBinary(binary, "x", "y");
  } else if (order == OperationOrder::kUnaryFirst) {
    const std::string ux = PythonUnary(*unary, "x", needs_math);
    const std::string uy = PythonUnary(*unary, "y", needs_math);
    // ** binds tighter than + - *, so no parentheses are needed.
    expr = PythonBinary(binary, ux, uy);
  } else {
    expr = PythonUnary(
        *unary, absl::StrCat("(", PythonBinary(binary, "x", "y"), ")"),
        needs_math);
  }
  if (addend != 0) {
    absl::StrAppend(&expr, addend > 0 ? " + " : " - ", std::abs(addend));
  }
  return expr;
}

absl::StatusOr<Formula> ParseFormula(absl::string_view text) {
  const std::string original(text);
  auto error = [&] {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed formula '", original, "'"));
  };
  Formula f;
  // Optional trailing "+N" / "-N" after the last ')'.
  const size_t close = text.rfind(')');
  if (close == absl::string_view::npos) return error();
  absl::string_view suffix = text.substr(close + 1);
  text = text.substr(0, close + 1);
  if (!suffix.empty()) {
    if (absl::ConsumePrefix(&suffix, "+")) {
      if (!absl::SimpleAtoi(suffix, &f.addend)) return error();
    } else if (!absl::SimpleAtoi(suffix, &f.addend) || f.addend >= 0) {
      return error();
    }
  }
  const size_t open = text.find('(');
  if (open == absl::string_view::npos) return error();
  const absl::string_view head = text.substr(0, open);
  absl::string_view inner = text.substr(open + 1, text.size() - open - 2);
  if (std::optional<UnaryOp> u = ParseUnaryOp(head)) {
    // unary(binary(x,y))
    const size_t p = inner.find('(');
    if (p == absl::string_view::npos) return error();
    std::optional<BinaryOp> b = ParseBinaryOp(inner.substr(0, p));
    if (!b || inner.substr(p) != "(x,y)") return error();
    f.binary = *b;
    f.unary = u;
    f.order = OperationOrder::kBinaryFirst;
    return f;
  }
  std::optional<BinaryOp> b = ParseBinaryOp(head);
  if (!b) return error();
  f.binary = *b;
  if (inner == "x,y") return f;
  // binary(unary(x),unary(y))
  const size_t p = inner.find('(');
  if (p == absl::string_view::npos) return error();
  std::optional<UnaryOp> u = ParseUnaryOp(inner.substr(0, p));
  if (!u) return error();
  const std::string name(Name(*u));
  if (inner != absl::StrCat(name, "(x),", name, "(y)")) return error();
  f.unary = u;
  f.order = OperationOrder::kUnaryFirst;
  return f;
}

std::vector<ProbeInput> ProbeInputPlan(const Formula& a, const Formula& b) {
  std::vector<ProbeInput> candidates(std::begin(kBaseInputs),
                                     std::end(kBaseInputs));
  if (UsesSquareRoot(a) || UsesSquareRoot(b)) {
    candidates.insert(candidates.end(), std::begin(kSquareRootInputs),
                      std::end(kSquareRootInputs));
  }
  std::vector<ProbeInput> plan;
  for (const ProbeInput& in : candidates) {
    const double va = a.Evaluate(static_cast<double>(in.x),
                                 static_cast<double>(in.y));
    const double vb = b.Evaluate(static_cast<double>(in.x),
                                 static_cast<double>(in.y));
    if (std::isfinite(va) && std::isfinite(vb)) plan.push_back(in);
  }
  return plan;
}

size_t CountDifferingInputs(const Formula& a, const Formula& b,
                            std::span<const ProbeInput> inputs) {
  return static_cast<size_t>(std::count_if(
      inputs.begin(), inputs.end(), [&](const ProbeInput& in) {
        const double x = static_cast<double>(in.x);
        const double y = static_cast<double>(in.y);
        return !NumbersClose(a.Evaluate(x, y), b.Evaluate(x, y));
      }));
}

bool NumbersClose(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return false;
  const double tolerance =
      std::max(1e-6, 1e-9 * std::max(std::abs(a), std::abs(b)));
  return std::abs(a - b) <= tolerance;
}

}  // namespace biasprobe
