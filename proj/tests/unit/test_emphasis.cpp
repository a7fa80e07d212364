#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace imageteller;

namespace {

class ThrowingAnnotator final : public EmphasisAnnotator {
public:
    std::vector<EmphasisSpan> propose(std::string_view) override { throw std::runtime_error("offline"); }
};

class FixedAnnotator final : public EmphasisAnnotator {
public:
    explicit FixedAnnotator(std::vector<EmphasisSpan> spans) : spans_(std::move(spans)) {}
    std::vector<EmphasisSpan> propose(std::string_view) override { return spans_; }

private:
    std::vector<EmphasisSpan> spans_;
};

std::optional<ErrorCode> code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

} // namespace

TEST(Emphasis, AttireExample)
{
    const std::string text = "a flowing red dress";
    const EmphasisPlan plan{{{10, 19, 3}}};
    EXPECT_EQ(apply_emphasis(text, plan), "a flowing (((red dress)))");
    EXPECT_EQ(strip_emphasis(apply_emphasis(text, plan)), text);
}

TEST(Emphasis, Levels)
{
    EXPECT_EQ(apply_emphasis("in Camelot", {{{3, 10, 2}}}), "in ((Camelot))");
    EXPECT_EQ(strip_emphasis("((Camelot))"), "Camelot");
    EXPECT_EQ(apply_emphasis("plain", {}), "plain");
}

TEST(Emphasis, MultipleSpansInAnyOrder)
{
    const std::string text = "red dress in Camelot";
    const EmphasisPlan a{{{0, 9, 3}, {13, 20, 2}}};
    const EmphasisPlan b{{{13, 20, 2}, {0, 9, 3}}};
    EXPECT_EQ(apply_emphasis(text, a), "(((red dress))) in ((Camelot))");
    EXPECT_EQ(apply_emphasis(text, b), apply_emphasis(text, a));
    EXPECT_EQ(apply_emphasis(text, a), itest::oracle_apply(text, a));
}

TEST(Emphasis, InvalidSpans)
{
    const std::string text = "red dress in Camelot";
    EXPECT_TRUE(span_problem(text, {0, 9, 3}) == std::nullopt);
    EXPECT_TRUE(span_problem(text, {0, 25, 2}).has_value());  // out of bounds
    EXPECT_TRUE(span_problem(text, {4, 4, 2}).has_value());   // empty
    EXPECT_TRUE(span_problem(text, {0, 3, 1}).has_value());   // level
    EXPECT_TRUE(span_problem(text, {0, 3, 4}).has_value());
    EXPECT_TRUE(span_problem(text, {0, 4, 2}).has_value());   // trailing space
    EXPECT_TRUE(span_problem(text, {1, 3, 2}).has_value());   // splits "red"
    EXPECT_EQ(code_of([&] { validate_plan(text, {{{0, 9, 3}, {4, 12, 2}}}); }), ErrorCode::InvalidSpan);
    EXPECT_EQ(code_of([&] { validate_plan(text, {{{0, 3, 2}, {0, 3, 2}}}); }), ErrorCode::InvalidSpan);
    EXPECT_EQ(code_of([&] { apply_emphasis(text, {{{0, 2, 2}}}); }), ErrorCode::InvalidSpan);
}

TEST(Emphasis, SanitizeKeepsLeftmostLongest)
{
    const std::string text = "red dress in Camelot";
    const auto plan = sanitize_proposals(text, {{4, 9, 2}, {0, 9, 3}, {13, 20, 2}, {1, 2, 2}, {13, 20, 3}});
    EXPECT_EQ(plan.spans, (std::vector<EmphasisSpan>{{0, 9, 3}, {13, 20, 2}}));
    EXPECT_NO_THROW(validate_plan(text, plan));
}

TEST(Heuristic, AttireAndProperNoun)
{
    HeuristicAnnotator h;
    const auto plan = plan_emphasis("red dress in Camelot", h);
    EXPECT_EQ(plan.spans, (std::vector<EmphasisSpan>{{0, 9, 3}, {13, 20, 2}}));
}

TEST(Heuristic, NothingToEmphasize)
{
    HeuristicAnnotator h;
    EXPECT_TRUE(plan_emphasis("a b c", h).spans.empty());
    EXPECT_EQ(code_of([&] { plan_emphasis("", h); }), ErrorCode::PreconditionViolation);
    EXPECT_EQ(code_of([&] { plan_emphasis("   ", h); }), ErrorCode::PreconditionViolation);
}

TEST(Heuristic, ReproducesSampleIllustrationPrompt)
{
    HeuristicAnnotator h;
    const auto description = itest::fixture_text("golden/tryst_event.txt");
    const auto spec = build_illustration_spec(description, plan_emphasis(description, h));
    EXPECT_EQ(spec.positive, itest::fixture_text("golden/illustration_positive.txt"));
}

TEST(Heuristic, HonorificsAreNotEmphasized)
{
    HeuristicAnnotator h;
    const std::string text = "Sir Lancelot waits";
    const auto out = apply_emphasis(text, plan_emphasis(text, h));
    EXPECT_EQ(out.rfind("Sir ((Lancelot))", 0), 0u);
}

TEST(Heuristic, AlwaysValid)
{
    std::mt19937_64 rng(11);
    HeuristicAnnotator h;
    for (int i = 0; i < 300; ++i) {
        const auto c = itest::random_emphasis_case(rng);
        if (c.text.find_first_not_of(" \t\n") == std::string::npos)
            continue;
        const auto plan = plan_emphasis(c.text, h);
        EXPECT_NO_THROW(validate_plan(c.text, plan)) << c.text;
    }
}

TEST(Annotator, FailureFallsBackToHeuristic)
{
    ThrowingAnnotator broken;
    HeuristicAnnotator h;
    const std::string text = "red dress in Camelot";
    EXPECT_EQ(plan_emphasis(text, broken), plan_emphasis(text, h));
}

TEST(Annotator, BadProposalsAreFiltered)
{
    FixedAnnotator a({{0, 100, 2}, {13, 20, 2}, {14, 18, 3}});
    EXPECT_EQ(plan_emphasis("red dress in Camelot", a).spans, (std::vector<EmphasisSpan>{{13, 20, 2}}));
}

TEST(EmphasisProperties, Sampled)
{
    const auto r = itest::emphasis_properties(1000, 5);
    EXPECT_TRUE(r.ok()) << r.summary();
}
