#include "popcheck/report.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace popcheck;

namespace {

RunReport sample()
{
    RunReport r;
    r.formula = "P>0.5 [ true U[0,1] N > 2 ]";
    r.bindings = {{"t", "1"}};
    r.verdict = Ternary::Unknown;
    r.interval = ProbInterval{0.3, 0.9};
    r.states = 12;
    r.frontier = 3;
    r.depth = 4;
    r.epsilon = 1e-6;
    r.strategy = "advanced";
    r.time_explore = 1.5;
    r.warnings = {"something odd"};
    return r;
}

} // namespace

TEST(Report, IntervalFormatting)
{
    EXPECT_EQ(format_interval({0.3, 0.9}), "[0.300000, 0.900000]");
    EXPECT_EQ(format_interval({0.0, 1.0}), "[0.000000, 1.000000]");
}

TEST(Report, ExitCodes)
{
    EXPECT_EQ(exit_code(Ternary::True), 0);
    EXPECT_EQ(exit_code(Ternary::False), 1);
    EXPECT_EQ(exit_code(Ternary::Unknown), 2);
    RunReport t, f;
    t.verdict = Ternary::True;
    f.verdict = Ternary::False;
    EXPECT_EQ(combined_exit_code({t, t}), 0);
    EXPECT_EQ(combined_exit_code({t, f}), 1);
    EXPECT_EQ(combined_exit_code({f, sample(), t}), 2);
}

TEST(Report, JsonRecord)
{
    const auto j = to_json(sample(), false);
    EXPECT_EQ(j["verdict"], "unknown");
    EXPECT_EQ(j["interval"][0], 0.3);
    EXPECT_EQ(j["states"], 12);
    EXPECT_EQ(j["depth"], 4);
    EXPECT_EQ(j["bindings"]["t"], "1");
    EXPECT_TRUE(j["drift_c"].is_null());
    EXPECT_FALSE(j.contains("timings"));
    EXPECT_EQ(to_json(sample(), true)["timings"]["explore"], 1.5);
}

TEST(Report, TextTable)
{
    std::ostringstream os;
    emit_report(os, {sample(), sample()}, ReportFormat::Text);
    const std::string out = os.str();
    EXPECT_EQ(out.find("# P>0.5"), 0u);
    EXPECT_EQ(out.find("# P>0.5", 1), std::string::npos); // one header per formula
    EXPECT_NE(out.find("[0.300000, 0.900000]   unknown"), std::string::npos);
    EXPECT_NE(out.find("warning: something odd"), std::string::npos);
}

TEST(Report, TablesGroupByProperty)
{
    RunReport a = sample(), b = sample(), c = sample();
    a.source = c.source = "P>0.5 [ F[0,t] N>2 ]";
    b.source = "other";
    b.formula = "N > 1";
    std::ostringstream os;
    emit_report(os, {a, b, c}, ReportFormat::Text);
    const std::string out = os.str();
    EXPECT_EQ(out.find("# P>0.5 [ F[0,t] N>2 ]"), 0u);
    const auto second = out.find("# other");
    ASSERT_NE(second, std::string::npos);
    // Both rows of the first table come before the second header.
    int rows = 0;
    for (auto pos = out.find("t=1 "); pos < second; pos = out.find("t=1 ", pos + 1))
        ++rows;
    EXPECT_EQ(rows, 2);
}
