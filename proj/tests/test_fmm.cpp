#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <fmmpc/fmm.hpp>

using namespace fmmpc;

namespace
{

std::vector<SourcePoint> random_sources(std::size_t n, unsigned seed, double lo = -1, double hi = 1)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> pos(lo, hi), str(0, 1);
    std::vector<SourcePoint> s(n);
    for (auto &p : s) {
        p.position = {pos(rng), pos(rng)};
        p.strength = str(rng);
    }
    return s;
}

std::vector<Point2> positions(const std::vector<SourcePoint> &s)
{
    std::vector<Point2> p;
    for (const auto &x : s) {
        p.push_back(x.position);
    }
    return p;
}

double rel_l2(const std::vector<double> &a, const std::vector<double> &b)
{
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

// Marks every (target, source) point pair reached through M2L or P2P.
struct CoverageVisitor {
    const QuadTree &tt;
    const QuadTree &st;
    std::vector<int> &hits; // row-major [target original index][source original index]
    std::size_t m2l_count = 0, p2p_count = 0;

    void mark(std::size_t t, std::size_t s)
    {
        const Cell &ct = tt.cell(t);
        const Cell &cs = st.cell(s);
        for (std::size_t i = ct.begin; i < ct.end; ++i) {
            for (std::size_t j = cs.begin; j < cs.end; ++j) {
                ++hits[tt.permutation()[i] * st.num_points() + st.permutation()[j]];
            }
        }
    }
    void m2l(std::size_t t, std::size_t s)
    {
        ++m2l_count;
        mark(t, s);
    }
    void p2p(std::size_t t, std::size_t s)
    {
        ++p2p_count;
        mark(t, s);
    }
};

void audit(const QuadTree &tt, const QuadTree &st, double theta)
{
    std::vector<int> hits(tt.num_points() * st.num_points(), 0);
    CoverageVisitor v{tt, st, hits};
    dual_tree_traverse(tt, st, theta, v);
    std::size_t wrong = 0;
    for (int h : hits) {
        wrong += (h != 1);
    }
    EXPECT_EQ(wrong, 0u);
}

} // namespace

TEST(Traversal, PairCoverageRandomSeeds)
{
    for (unsigned seed = 0; seed < 10; ++seed) {
        const auto src = random_sources(512, seed);
        const auto tgt = random_sources(384, seed + 100);
        const auto st = QuadTree::build(positions(src), 8);
        const auto tt = QuadTree::build(positions(tgt), 8);
        audit(tt, st, 0.4);
        audit(st, st, 0.4); // self traversal over one tree
    }
}

TEST(Traversal, PairCoverageUniformGrid)
{
    std::vector<Point2> pts;
    for (int j = 0; j < 64; ++j) {
        for (int i = 0; i < 64; ++i) {
            pts.push_back({-1 + (i + 0.5) / 32.0, -1 + (j + 0.5) / 32.0});
        }
    }
    const auto tree = QuadTree::build(pts, 64);
    audit(tree, tree, 0.4);
}

TEST(Traversal, SingleLeavesGivePureP2P)
{
    const auto src = random_sources(10, 1);
    const auto tgt = random_sources(10, 2);
    const auto st = QuadTree::build(positions(src), 64);
    const auto tt = QuadTree::build(positions(tgt), 64);
    std::vector<int> hits(100, 0);
    CoverageVisitor v{tt, st, hits};
    dual_tree_traverse(tt, st, 0.4, v);
    EXPECT_EQ(v.m2l_count, 0u);
    EXPECT_EQ(v.p2p_count, 1u);
}

TEST(Traversal, SeparatedClustersUseOneRootM2L)
{
    // Clusters of radius <= 0.1 whose clearance satisfies the criterion.
    auto src = random_sources(200, 3, -0.07, 0.07);
    auto tgt = random_sources(200, 4, -0.07, 0.07);
    for (auto &p : tgt) {
        p.position = p.position + Point2{1.0, 0.5};
    }
    const auto st = QuadTree::build(positions(src), 8);
    const auto tt = QuadTree::build(positions(tgt), 8);
    ASSERT_TRUE(multipole_acceptance(tt.cell(0), st.cell(0), 0.4));
    std::vector<int> hits(200 * 200, 0);
    CoverageVisitor v{tt, st, hits};
    dual_tree_traverse(tt, st, 0.4, v);
    EXPECT_EQ(v.m2l_count, 1u);
    EXPECT_EQ(v.p2p_count, 0u);
}

TEST(Traversal, AcceptanceCriterion)
{
    Cell a, b;
    a.center = {0, 0};
    b.center = {1, 0};
    a.radius = b.radius = 0.1;
    // 0.2 <= 0.4 * (1 - 0.2)
    EXPECT_TRUE(multipole_acceptance(a, b, 0.4));
    b.center = {0.69, 0};
    EXPECT_FALSE(multipole_acceptance(a, b, 0.4));
    b.center = a.center;
    a.radius = b.radius = 0;
    EXPECT_FALSE(multipole_acceptance(a, b, 0.4));
}

TEST(UpwardPass, SingleLeafRootEqualsP2M)
{
    const auto src = random_sources(30, 5);
    const auto tree = QuadTree::build(positions(src), 64);
    std::vector<double> f(src.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        f[k] = src[tree.permutation()[k]].strength;
    }
    const auto m = upward_pass(tree, f, 8);
    const auto ref = p2m(src, tree.cell(0).center, 8);
    for (std::size_t n = 0; n < 8; ++n) {
        EXPECT_NEAR(std::abs(m[0][n] - ref[n]), 0.0, 1e-13);
    }
}

TEST(UpwardPass, RootChargeAndFarField)
{
    const auto src = random_sources(2000, 6);
    const auto tree = QuadTree::build(positions(src), 16);
    std::vector<double> f(src.size());
    double total = 0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        f[k] = src[tree.permutation()[k]].strength;
        total += f[k];
    }
    const auto m = upward_pass(tree, f, 16);
    EXPECT_NEAR(m[0][0].real(), total, 1e-10 * total);
    EXPECT_NEAR(m[0][0].imag(), 0.0, 1e-12);

    const Point2 far{15, -20};
    const double ref = p2p(std::vector<Point2>{far}, src, 0.0)[0];
    const double approx = potential_scale * evaluate_multipole(m[0], to_complex(far) - tree.cell(0).center);
    EXPECT_NEAR(approx, ref, 1e-12 * std::abs(ref));
}

TEST(FmmEvaluate, SingleSourceSingleTargetIsExact)
{
    const std::vector<SourcePoint> s{{{0.1, 0.2}, 1.5}};
    const std::vector<Point2> t{{3, 4}};
    EXPECT_EQ(fmm_evaluate(s, t, FmmConfig{}), direct_evaluate(s, t, 0.0));
}

TEST(FmmEvaluate, OracleAcrossOrders)
{
    const auto src = random_sources(4000, 7);
    const auto tgt = positions(random_sources(3000, 8));
    const auto ref = direct_evaluate(src, tgt, 0.0);
    for (int p = 2; p <= 10; ++p) {
        FmmConfig c;
        c.order = p;
        const double err = rel_l2(fmm_evaluate(src, tgt, c), ref);
        EXPECT_LE(err, std::pow(10.0, -p + 1)) << "p=" << p;
    }
}

TEST(FmmEvaluate, ErrorDecreasesWithOrder)
{
    const auto src = random_sources(3000, 9);
    const auto tgt = positions(random_sources(1000, 10));
    const auto ref = direct_evaluate(src, tgt, 0.0);
    double prev = 1;
    for (int p = 1; p <= 12; ++p) {
        FmmConfig c;
        c.order = p;
        const double err = rel_l2(fmm_evaluate(src, tgt, c), ref);
        EXPECT_LE(err, 2 * prev) << "p=" << p;
        prev = err;
    }
}

TEST(FmmEvaluate, SixDigitsOnTenThousandPoints)
{
    const auto src = random_sources(10000, 11);
    const auto tgt = positions(random_sources(10000, 12));
    FmmConfig c;
    c.order = 6;
    c.theta = 0.4;
    EXPECT_LE(rel_l2(fmm_evaluate(src, tgt, c), direct_evaluate(src, tgt, 0.0)), 1e-6);
    c.order = 2;
    EXPECT_LE(rel_l2(fmm_evaluate(src, tgt, c), direct_evaluate(src, tgt, 0.0)), 1e-2);
}

// With smoothing the series stay unsmoothed, so against a fully smoothed
// direct sum the error is set by epsilon^2 / (cell separation)^2 rather than
// by the expansion order.
TEST(FmmEvaluate, SmoothedSelfEvaluationErrorScalesWithEpsilonSquared)
{
    const auto src = random_sources(10000, 13);
    const auto pts = positions(src);
    FmmConfig c;
    auto err = [&](double eps) {
        c.epsilon = eps;
        return rel_l2(fmm_evaluate(src, c), direct_evaluate(src, pts, eps));
    };
    const double e1 = err(0.004), e2 = err(0.002);
    EXPECT_NEAR(e1 / e2, 4.0, 1.0);
    EXPECT_LE(e2, 1e-4);
    EXPECT_LE(err(1e-6), 1e-6);
}

TEST(FmmEvaluate, SelfEvaluationWithoutSmoothingIsSingular)
{
    const auto src = random_sources(100, 14);
    EXPECT_THROW(fmm_evaluate(src, FmmConfig{}), std::domain_error);
}

TEST(FmmEvaluate, DeterministicBitwise)
{
    const auto src = random_sources(20000, 15);
    FmmConfig c;
    c.epsilon = 1e-3;
    const auto a = fmm_evaluate(src, c);
    const auto b = fmm_evaluate(src, c);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST(FmmEvaluate, LinearInStrengths)
{
    const auto src = random_sources(3000, 16);
    const auto pts = positions(src);
    FmmConfig c;
    c.epsilon = 1e-3;
    const FmmEvaluator ev(pts, c);
    std::mt19937 rng(1);
    std::normal_distribution<double> g;
    std::vector<double> x(pts.size()), y(pts.size()), z(pts.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = g(rng);
        y[i] = g(rng);
        z[i] = 2.5 * x[i] - 0.5 * y[i];
    }
    const auto ux = ev.evaluate(x);
    const auto uy = ev.evaluate(y);
    const auto uz = ev.evaluate(z);
    double scale = 0;
    for (double v : uz) {
        scale = std::max(scale, std::abs(v));
    }
    for (std::size_t i = 0; i < uz.size(); ++i) {
        EXPECT_NEAR(uz[i], 2.5 * ux[i] - 0.5 * uy[i], 1e-12 * scale);
    }
}

TEST(FmmEvaluate, EvaluatorReuseMatchesFreshEvaluation)
{
    const auto src = random_sources(2500, 17);
    const auto tgt = positions(random_sources(1200, 18));
    FmmConfig c;
    const FmmEvaluator ev(positions(src), tgt, c);
    std::vector<double> f(src.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] = src[i].strength;
    }
    ev.evaluate(std::vector<double>(f.size(), 1.0));
    EXPECT_EQ(ev.evaluate(f), fmm_evaluate(src, tgt, c));
    EXPECT_GT(ev.stats().m2l_pairs, 0u);
    EXPECT_GT(ev.stats().p2p_pairs, 0u);
    EXPECT_THROW(ev.evaluate(std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST(FmmEvaluate, AppliedTraversalMatchesEvaluator)
{
    const auto src = random_sources(1500, 19);
    const auto tgt = positions(random_sources(900, 20));
    FmmConfig c;
    const auto st = QuadTree::build(positions(src), c.ncrit);
    const auto tt = QuadTree::build(tgt, c.ncrit);
    std::vector<double> f(src.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        f[k] = src[st.permutation()[k]].strength;
    }
    const auto m = upward_pass(st, f, c.order);
    ExpansionArray locals(tt.num_cells(), c.order);
    std::vector<double> u(tt.num_points(), 0.0);
    const auto stats = dual_tree_traverse(tt, st, c, m, f, locals, u);
    downward_pass(tt, locals, u);
    std::vector<double> out(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        out[tt.permutation()[k]] = u[k];
    }
    EXPECT_LE(rel_l2(out, direct_evaluate(src, tgt, 0.0)), 1e-5);
    EXPECT_GT(stats.m2l_pairs + stats.p2p_pairs, 0u);
    EXPECT_GE(stats.p2p_interactions, stats.p2p_pairs);
}

TEST(DirectEvaluate, Examples)
{
    const std::vector<SourcePoint> s{{{0, 0}, 1.0}};
    EXPECT_DOUBLE_EQ(direct_evaluate(s, std::vector<Point2>{{1, 0}}, 0.0)[0], 0.0);
    EXPECT_NEAR(direct_evaluate(s, std::vector<Point2>{{std::exp(1.0), 0}}, 0.0)[0], -1.0 / (2 * pi), 1e-15);
    EXPECT_DOUBLE_EQ(direct_evaluate(s, std::vector<Point2>{{0, 0}}, 1.0)[0], 0.0);
}
