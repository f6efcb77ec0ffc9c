#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace ssmvpr;

namespace {

CandidateList list_of(const std::vector<FrameId>& frames) {
    CandidateList out;
    double votes = static_cast<double>(frames.size());
    for (auto f : frames) out.entries.push_back({f, votes--, 0.0});
    return out;
}

// Trapezoid over (recall, precision) points, extended flat to recall zero.
double trapezoid(const PrCurve& curve) {
    double area = 0.0, r0 = 0.0, p0 = curve.points.front().precision;
    for (const auto& pt : curve.points) {
        area += (pt.recall - r0) * (pt.precision + p0) / 2.0;
        r0 = pt.recall;
        p0 = pt.precision;
    }
    return area;
}

} // namespace

TEST(Tolerance, RuleIsSymmetricAbsoluteDifference) {
    const ToleranceRule rule{2};
    EXPECT_TRUE(rule.accepts(10, 12));
    EXPECT_TRUE(rule.accepts(12, 10));
    EXPECT_FALSE(rule.accepts(9, 12));
    EXPECT_FALSE(rule.accepts(0, 3));
    EXPECT_TRUE(ToleranceRule{0}.accepts(7, 7));
}

TEST(RecallAtN, PerfectFirstEntries) {
    GroundTruth gt;
    std::vector<QueryCandidates> lists;
    for (FrameId q = 0; q < 20; ++q) {
        gt.pairs.push_back({q, q * 10});
        lists.push_back({q, list_of({q * 10, q * 10 + 50, q * 10 + 90})});
    }
    for (std::size_t n = 1; n <= 3; ++n) EXPECT_EQ(recall_at_n(lists, gt, ToleranceRule{0}, n), 1.0);
}

TEST(RecallAtN, NothingWithinTolerance) {
    GroundTruth gt{{{1, 100}, {2, 200}}};
    std::vector<QueryCandidates> lists{{1, list_of({50, 103, 97})}, {2, list_of({150, 250})}};
    EXPECT_EQ(recall_at_n(lists, gt, ToleranceRule{2}, 5), 0.0);
}

TEST(RecallAtN, PlantedFixtureGivesNinetyFivePercent) {
    std::mt19937_64 rng(3);
    GroundTruth gt;
    std::vector<QueryCandidates> lists;
    std::size_t planted = 0;
    for (FrameId q = 0; q < 100; ++q) {
        const FrameId truth = 1000 + q * 100;
        gt.pairs.push_back({q, truth});
        std::vector<FrameId> frames;
        for (FrameId k = 0; k < 30; ++k) frames.push_back(truth + 10 + k); // all outside tolerance 2
        if (q % 20 != 7) {
            frames[rng() % 25] = truth + static_cast<FrameId>(rng() % 3);
            ++planted;
        }
        lists.push_back({q, list_of(frames)});
    }
    ASSERT_EQ(planted, 95u);
    EXPECT_EQ(recall_at_n(lists, gt, ToleranceRule{2}, 25), 0.95);
    EXPECT_LE(recall_at_n(lists, gt, ToleranceRule{2}, 10), 0.95);
}

TEST(RecallAtN, NondecreasingInN) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        GroundTruth gt;
        std::vector<QueryCandidates> lists;
        for (FrameId q = 0; q < 30; ++q) {
            gt.pairs.push_back({q, static_cast<FrameId>(rng() % 60)});
            std::vector<FrameId> frames;
            const auto len = 1 + rng() % 40;
            for (std::size_t k = 0; k < len; ++k) frames.push_back(static_cast<FrameId>(rng() % 60));
            lists.push_back({q, list_of(frames)});
        }
        double previous = 0.0;
        for (std::size_t n = 1; n <= 50; ++n) {
            const double r = recall_at_n(lists, gt, ToleranceRule{1}, n);
            ASSERT_GE(r, previous);
            previous = r;
        }
    }
}

TEST(RecallAtN, MissingGroundTruthIsAnError) {
    GroundTruth gt{{{1, 1}}};
    std::vector<QueryCandidates> lists{{1, list_of({1})}, {2, list_of({2})}};
    try {
        recall_at_n(lists, gt, ToleranceRule{0}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingGroundTruth);
    }
}

TEST(PrCurve, AllCorrectHasUnitArea) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<ScoredOutcome> results;
        const auto n = 1 + rng() % 300;
        for (std::size_t i = 0; i < n; ++i) results.push_back({true, static_cast<double>(rng() % 17) / 16.0});
        const auto curve = pr_curve(results);
        ASSERT_EQ(curve.auc, 1.0);
        for (const auto& pt : curve.points) ASSERT_EQ(pt.precision, 1.0);
        ASSERT_EQ(curve.points.back().recall, 1.0);
    }
}

TEST(PrCurve, AllIncorrectHasZeroArea) {
    std::vector<ScoredOutcome> results{{false, 0.9}, {false, 0.4}, {false, 0.4}};
    const auto curve = pr_curve(results);
    EXPECT_EQ(curve.auc, 0.0);
    for (const auto& pt : curve.points) EXPECT_EQ(pt.precision, 0.0);
}

TEST(PrCurve, TwoResultSweep) {
    const std::vector<ScoredOutcome> results{{true, 0.9}, {false, 0.5}};
    const auto curve = pr_curve(results);
    ASSERT_EQ(curve.points.size(), 2u);
    EXPECT_EQ(curve.points[0].recall, 0.5);
    EXPECT_EQ(curve.points[0].precision, 1.0);
    EXPECT_EQ(curve.points[1].recall, 0.5); // recall counts correct results over all results
    EXPECT_EQ(curve.points[1].precision, 0.5);
    EXPECT_DOUBLE_EQ(curve.auc, 0.5);
}

TEST(PrCurve, FourResultHandExample) {
    // thresholds 0.9 0.8 0.7 0.6 -> (r,p) = (1/4,1) (1/2,1) (1/2,2/3) (3/4,3/4)
    // area = 1/4 + 1/4 + 0 + 1/4 * (2/3 + 3/4) / 2 = 65/96
    const std::vector<ScoredOutcome> results{{false, 0.7}, {true, 0.6}, {true, 0.9}, {true, 0.8}};
    const auto curve = pr_curve(results);
    ASSERT_EQ(curve.points.size(), 4u);
    EXPECT_DOUBLE_EQ(curve.points[2].precision, 2.0 / 3.0);
    EXPECT_NEAR(curve.auc, 65.0 / 96.0, 1e-12);
}

TEST(PrCurve, TiedConfidencesFormOnePoint) {
    const std::vector<ScoredOutcome> results{{true, 0.5}, {false, 0.5}, {true, 0.2}};
    const auto curve = pr_curve(results);
    ASSERT_EQ(curve.points.size(), 2u);
    EXPECT_DOUBLE_EQ(curve.points[0].recall, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(curve.points[0].precision, 0.5);
}

TEST(PrCurve, RandomCurvesAreWellFormed) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<ScoredOutcome> results;
        const auto n = 1 + rng() % 80;
        for (std::size_t i = 0; i < n; ++i) results.push_back({rng() % 3 != 0, static_cast<double>(rng() % 23) / 22.0});
        const auto curve = pr_curve(results);
        ASSERT_GE(curve.auc, 0.0);
        ASSERT_LE(curve.auc, 1.0);
        for (std::size_t i = 1; i < curve.points.size(); ++i) {
            ASSERT_GE(curve.points[i].recall, curve.points[i - 1].recall);
            ASSERT_LT(curve.points[i].threshold, curve.points[i - 1].threshold);
        }
        ASSERT_NEAR(curve.auc, trapezoid(curve), 1e-12);
    }
}

TEST(PrCurve, Errors) {
    EXPECT_THROW(pr_curve(std::vector<ScoredOutcome>{}), Error);
    const std::vector<ScoredOutcome> nan{{true, std::numeric_limits<double>::quiet_NaN()}};
    EXPECT_THROW(pr_curve(nan), Error);
}

TEST(ToleranceSweep, ExactGuesses) {
    GroundTruth gt;
    std::vector<GuessRecord> guesses;
    for (FrameId q = 0; q < 10; ++q) {
        gt.pairs.push_back({q, 5 * q});
        guesses.push_back({q, 5 * q});
    }
    const std::vector<unsigned> ts{0, 1, 2, 5};
    for (const auto& r : tolerance_sweep(guesses, gt, ts)) EXPECT_EQ(r.accuracy, 1.0);
}

TEST(ToleranceSweep, UniformOffsetIsAStep) {
    GroundTruth gt;
    std::vector<GuessRecord> guesses;
    for (FrameId q = 0; q < 10; ++q) {
        gt.pairs.push_back({q, 10 + 5 * q});
        guesses.push_back({q, q % 2 ? 13 + 5 * q : 7 + 5 * q});
    }
    const std::vector<unsigned> ts{0, 1, 2, 3, 4, 10};
    const auto sweep = tolerance_sweep(guesses, gt, ts);
    const std::vector<double> expected{0, 0, 0, 1, 1, 1};
    for (std::size_t i = 0; i < ts.size(); ++i) {
        EXPECT_EQ(sweep[i].tolerance, ts[i]);
        EXPECT_EQ(sweep[i].accuracy, expected[i]);
    }
}

TEST(ToleranceSweep, MatchesRecountAndIsMonotone) {
    std::mt19937_64 rng(7);
    const std::vector<unsigned> ts{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    for (int trial = 0; trial < 50; ++trial) {
        GroundTruth gt;
        std::vector<GuessRecord> guesses;
        for (FrameId q = 0; q < 40; ++q) {
            const auto truth = static_cast<FrameId>(20 + rng() % 100);
            gt.pairs.push_back({q, truth});
            guesses.push_back({q, static_cast<FrameId>(truth + rng() % 25 - 12)});
        }
        const auto sweep = tolerance_sweep(guesses, gt, ts);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            int hits = 0;
            for (std::size_t q = 0; q < guesses.size(); ++q) {
                const long diff = static_cast<long>(guesses[q].guessed_frame) - static_cast<long>(gt.pairs[q].reference_frame);
                if (std::labs(diff) <= static_cast<long>(ts[i])) ++hits;
            }
            ASSERT_EQ(sweep[i].accuracy, hits / 40.0);
            if (i > 0) {
                ASSERT_GE(sweep[i].accuracy, sweep[i - 1].accuracy);
            }
        }
    }
}

TEST(ToleranceSweep, RejectsUnsortedTolerances) {
    GroundTruth gt{{{1, 1}}};
    const std::vector<GuessRecord> guesses{{1, 1}};
    const std::vector<unsigned> ts{2, 1};
    EXPECT_THROW(tolerance_sweep(guesses, gt, ts), Error);
}

TEST(Report, NumbersRoundTripThroughText) {
    for (double v : {0.0, 1.0, 0.1, 1.0 / 3.0, 4394.0, 1e-17}) {
        EXPECT_EQ(std::stod(format_number(v)), v);
    }
}
