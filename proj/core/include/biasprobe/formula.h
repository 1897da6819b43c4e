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

// Two-argument arithmetic reference formulas used by the math-equation and
// attribute-substitution probes, and the input plan used to tell two
// formulas apart by execution.

#ifndef BIASPROBE_FORMULA_H_
#define BIASPROBE_FORMULA_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include "absl/strings/string_view.h"
#include <vector>

#include "absl/status/statusor.h"

namespace biasprobe {

enum class BinaryOp { kSum, kDifference, kProduct };
enum class UnaryOp { kSquare, kCube, kQuadruple, kSquareRoot };
enum class OperationOrder { kUnaryFirst, kBinaryFirst };

inline constexpr BinaryOp kAllBinaryOps[] = {
    BinaryOp::kSum, BinaryOp::kDifference, BinaryOp::kProduct};
inline constexpr UnaryOp kAllUnaryOps[] = {
    UnaryOp::kSquare, UnaryOp::kCube, UnaryOp::kQuadruple,
    UnaryOp::kSquareRoot};

absl::string_view Name(BinaryOp op);
absl::string_view Name(UnaryOp op);
absl::string_view Name(OperationOrder order);
std::optional<BinaryOp> ParseBinaryOp(absl::string_view name);
std::optional<UnaryOp> ParseUnaryOp(absl::string_view name);
std::optional<OperationOrder> ParseOperationOrder(absl::string_view name);

struct Formula {
  BinaryOp binary = BinaryOp::kSum;
  std::optional<UnaryOp> unary;
  // Ignored when there is no unary op.
  OperationOrder order = OperationOrder::kUnaryFirst;
  int64_t addend = 0;

  // NaN where the formula is undefined (square root of a negative).
  double Evaluate(double x, double y) const;

  // Canonical text, e.g. "sum(square(x),square(y))", "square(sum(x,y))",
  // "product(x,y)+2". ParseFormula inverts it.
  std::string ToString() const;

  // Python expression over x and y; sets *needs_math when math.sqrt is used.
  std::string ToPython(bool* needs_math = nullptr) const;

  friend bool operator==(const Formula&, const Formula&) = default;
};

absl::StatusOr<Formula> ParseFormula(absl::string_view text);

struct ProbeInput {
  int64_t x = 0;
  int64_t y = 0;
  friend bool operator==(const ProbeInput&, const ProbeInput&) = default;
};

inline constexpr size_t kMinDistinguishingInputs = 3;

// Integer pairs on which candidates are evaluated: a fixed base set, plus
// perfect squares when either formula takes a square root, minus any pair on
// which either formula is undefined.
std::vector<ProbeInput> ProbeInputPlan(const Formula& a, const Formula& b);

size_t CountDifferingInputs(const Formula& a, const Formula& b,
                            std::span<const ProbeInput> inputs);

// Absolute 1e-6 or relative 1e-9, whichever is looser.
bool NumbersClose(double a, double b);

}  // namespace biasprobe

#endif  // BIASPROBE_FORMULA_H_
