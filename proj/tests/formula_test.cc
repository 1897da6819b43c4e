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

#include <cmath>

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace biasprobe {
namespace {

Formula F(BinaryOp b, std::optional<UnaryOp> u, OperationOrder o,
          int64_t addend = 0) {
  return Formula{b, u, o, addend};
}

TEST(FormulaTest, SquareOfSumVersusSumOfSquares) {
  EXPECT_EQ(F(BinaryOp::kSum, UnaryOp::kSquare, OperationOrder::kUnaryFirst)
                .Evaluate(2, 3),
            13);
  EXPECT_EQ(F(BinaryOp::kSum, UnaryOp::kSquare, OperationOrder::kBinaryFirst)
                .Evaluate(2, 3),
            25);
}

TEST(FormulaTest, SumOfSquareRoots) {
  EXPECT_DOUBLE_EQ(
      F(BinaryOp::kSum, UnaryOp::kSquareRoot, OperationOrder::kUnaryFirst)
          .Evaluate(4, 9),
      5);
}

TEST(FormulaTest, ProductPlusTwo) {
  EXPECT_EQ(F(BinaryOp::kProduct, std::nullopt, OperationOrder::kUnaryFirst, 2)
                .Evaluate(2, 3),
            8);
}

TEST(FormulaTest, SquareRootOfNegativeIsUndefined) {
  EXPECT_TRUE(std::isnan(
      F(BinaryOp::kDifference, UnaryOp::kSquareRoot, OperationOrder::kBinaryFirst)
          .Evaluate(2, 3)));
}

TEST(FormulaTest, TextRoundTrip) {
  for (BinaryOp b : kAllBinaryOps) {
    for (UnaryOp u : kAllUnaryOps) {
      for (OperationOrder o :
           {OperationOrder::kUnaryFirst, OperationOrder::kBinaryFirst}) {
        const Formula f = F(b, u, o);
        absl::StatusOr<Formula> parsed = ParseFormula(f.ToString());
        ASSERT_TRUE(parsed.ok()) << f.ToString();
        EXPECT_EQ(*parsed, f);
      }
    }
    const Formula plain = F(b, std::nullopt, OperationOrder::kUnaryFirst, 100);
    absl::StatusOr<Formula> parsed = ParseFormula(plain.ToString());
    ASSERT_TRUE(parsed.ok()) << plain.ToString();
    EXPECT_EQ(*parsed, plain);
  }
  EXPECT_EQ(F(BinaryOp::kProduct, std::nullopt, OperationOrder::kUnaryFirst, 2)
                .ToString(),
            "product(x,y)+2");
  EXPECT_FALSE(ParseFormula("cube(").ok());
}

TEST(FormulaTest, PythonExpressionFlagsMath) {
  bool needs_math = false;
  F(BinaryOp::kSum, UnaryOp::kSquare, OperationOrder::kBinaryFirst)
      .ToPython(&needs_math);
  EXPECT_FALSE(needs_math);
  F(BinaryOp::kSum, UnaryOp::kSquareRoot, OperationOrder::kBinaryFirst)
      .ToPython(&needs_math);
  EXPECT_TRUE(needs_math);
}

TEST(ProbeInputPlanTest, DropsUndefinedInputs) {
  const Formula a =
      F(BinaryOp::kDifference, UnaryOp::kSquareRoot, OperationOrder::kBinaryFirst);
  const Formula b =
      F(BinaryOp::kDifference, UnaryOp::kSquareRoot, OperationOrder::kUnaryFirst);
  std::vector<ProbeInput> plan = ProbeInputPlan(a, b);
  for (const ProbeInput& in : plan) {
    EXPECT_FALSE(std::isnan(a.Evaluate(in.x, in.y)));
    EXPECT_FALSE(std::isnan(b.Evaluate(in.x, in.y)));
  }
  EXPECT_GE(CountDifferingInputs(a, b, plan), kMinDistinguishingInputs);
}

TEST(ProbeInputPlanTest, OrderSwapsAreDistinguishableExceptForProducts) {
  for (BinaryOp b : {BinaryOp::kSum, BinaryOp::kDifference}) {
    for (UnaryOp u : kAllUnaryOps) {
      const Formula x = F(b, u, OperationOrder::kUnaryFirst);
      const Formula y = F(b, u, OperationOrder::kBinaryFirst);
      EXPECT_GE(CountDifferingInputs(x, y, ProbeInputPlan(x, y)),
                kMinDistinguishingInputs)
          << x.ToString();
    }
  }
  // (xy)^2 = x^2 y^2, so product probes cannot separate the two orders.
  const Formula x = F(BinaryOp::kProduct, UnaryOp::kSquare, OperationOrder::kUnaryFirst);
  const Formula y = F(BinaryOp::kProduct, UnaryOp::kSquare, OperationOrder::kBinaryFirst);
  EXPECT_EQ(CountDifferingInputs(x, y, ProbeInputPlan(x, y)), 0u);
}

TEST(NumbersCloseTest, Tolerances) {
  EXPECT_TRUE(NumbersClose(5.0, 5.0 + 1e-9));
  EXPECT_TRUE(NumbersClose(1e12, 1e12 + 1));
  EXPECT_FALSE(NumbersClose(5.0, 5.01));
}

}  // namespace
}  // namespace biasprobe
