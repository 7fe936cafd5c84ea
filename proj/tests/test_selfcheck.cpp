// SPDX-License-Identifier: Apache-2.0
//
// cesim: constant-envelope multi-user MIMO downlink precoding simulator
// Copyright (C) 2026 The cesim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <cesim/selfcheck.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace cesim;

TEST(Selfcheck, FreshBuildPasses) {
    std::ostringstream out;
    const auto report = check::run_selfcheck({}, out);
    EXPECT_TRUE(report.passed()) << out.str();
    EXPECT_EQ(report.suites.size(), 5u);
    for (const auto &s : report.suites)
        EXPECT_GT(s.checks, 0u) << s.name;
    EXPECT_NE(out.str().find("all suites passed"), std::string::npos);
}

TEST(Selfcheck, FlippedBranchBreaksMonotonicity) {
    check::SelfcheckOptions opt;
    opt.rule = detail::UpdateRule::flipped_branch;
    const auto r = check::monotonicity_suite(opt);
    EXPECT_FALSE(r.passed());
    EXPECT_GT(r.failures, 0u);
}
