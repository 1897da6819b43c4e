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

// Hand-labelled detector cases shared by the unit and acceptance suites.
// Every label was assigned by reading the completion, not by running the
// detector.

#ifndef BIASPROBE_TESTS_DETECTOR_CASES_H_
#define BIASPROBE_TESTS_DETECTOR_CASES_H_

#include <optional>
#include <string>
#include <vector>

#include "biasprobe/classify.h"

namespace biasprobe::testing {

struct LineCase {
  std::string completion;
  std::string target;
  bool present;
};

struct FragmentCase {
  std::string completion;
  bool for_var;
  bool print_var;
  bool returns_tmp;
};

struct CopyCase {
  std::string completion;
  std::string continuation;
  bool copy;
};

struct NumericCase {
  std::string text;
  std::optional<double> value;
};

struct OptionCase {
  std::string text;
  OptionChoice choice;
};

inline const std::vector<LineCase>& LineCases() {
  static const auto* cases = new std::vector<LineCase>{
      {"    pass\n", "pass", true},
      {"    passes = 3\n", "pass", false},
      {"    x = 1\n  return tmp\n", "return tmp", true},
      {"    return tmp2\n", "return tmp", false},
      {"    assert False\n", "assert False", true},
      {"    assert False, 'unreachable'\n", "assert False", false},
      {"    if x:\n        return False\n    return True\n", "return False", true},
      {"    return False or x\n", "return False", false},
      {"    raise NotImplementedError\n", "raise NotImplementedError", true},
      {"    raise NotImplementedError('todo')\n", "raise NotImplementedError",
       false},
      {"    print(\"Hello world!\")\n", "print(\"Hello world!\")", true},
      {"    # pass\n", "pass", false},
      {"", "pass", false},
      {"\tpass\t\n", "pass", true},
  };
  return *cases;
}

inline const std::vector<FragmentCase>& FragmentCases() {
  static const auto* cases = new std::vector<FragmentCase>{
      // Checks a condition and appends to ret, then loops over the inputs the
      // way the anchor function does.
      {"    ret = []\n    for i in range(len(l)):\n        if l[i] > 0:\n"
       "            ret.append(l[i])\n    for var in [l]:\n        print(var)\n"
       "    return ret\n",
       true, true, false},
      {"    for var in [a, b]:\n        total += var\n    return total\n", true,
       false, false},
      {"    for variable in [a, b]:\n        print(variable)\n", false, false,
       false},
      {"    print(var)\n", false, true, false},
      {"    print(var, end='')\n", false, false, false},
      {"    tmp = str(a) + str(b)\n    return tmp\n", false, false, true},
      {"    return tmp + 1\n", false, false, false},
      {"    return sorted(set(l))\n", false, false, false},
      {"", false, false, false},
  };
  return *cases;
}

inline const std::vector<CopyCase>& CopyCases() {
  const std::string anchor = "    for var in [a, b]:\n        print(var)\n";
  static const auto* cases = new std::vector<CopyCase>{
      {anchor, anchor, true},
      {"    for var in [a, b]:  \n        print(var)\n\n\n", anchor, true},
      {"    for var in [a, b]:\n        print(var)", anchor, true},
      {anchor + "    return a\n", anchor, false},
      {"    for var in [a, b]:\n        print(var + 1)\n", anchor, false},
      {"    for var in [b, a]:\n        print(var)\n", anchor, false},
      {"    return a + b\n", anchor, false},
      {"", anchor, false},
  };
  return *cases;
}

inline const std::vector<NumericCase>& NumericCases() {
  static const auto* cases = new std::vector<NumericCase>{
      {" 2,300 miles", 2300},
      {"about 1500", 1500},
      {"I cannot say", std::nullopt},
      {" 2.7 million people", 2.7},
      {"\n\n 29,029 feet\nThe mountain is tall.", 29029},
      {" -40 degrees", -40},
      {" 1,000,000 people", 1000000},
      {"", std::nullopt},
  };
  return *cases;
}

inline const std::vector<OptionCase>& OptionCases() {
  static const auto* cases = new std::vector<OptionCase>{
      {" A", OptionChoice::kA},
      {" B: 1/3 probability that 600 people will be saved", OptionChoice::kB},
      {"neither", OptionChoice::kGibberish},
      {" Option A.", OptionChoice::kA},
      {"\nB", OptionChoice::kB},
      {" Both are bad", OptionChoice::kGibberish},
  };
  return *cases;
}

inline size_t DetectorCaseCount() {
  return LineCases().size() + FragmentCases().size() + CopyCases().size() +
         NumericCases().size() + OptionCases().size();
}

}  // namespace biasprobe::testing

#endif  // BIASPROBE_TESTS_DETECTOR_CASES_H_
