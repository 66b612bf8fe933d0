#ifndef FMMPC_FMM_HPP
#define FMMPC_FMM_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <fmmpc/geometry.hpp>
#include <fmmpc/kernels.hpp>
#include <fmmpc/quadtree.hpp>

namespace fmmpc
{

struct InteractionStats {
    std::size_t p2p_pairs = 0;        // leaf-leaf cell pairs evaluated directly
    std::size_t m2l_pairs = 0;        // accepted cell pairs
    std::size_t p2p_interactions = 0; // point-point kernel evaluations
    std::int32_t max_depth = 0;       // deepest cell level touched by the traversal
};

// Per-cell coefficient storage: order() complex numbers per cell, contiguous.
class ExpansionArray
{
public:
    ExpansionArray() = default;
    ExpansionArray(std::size_t num_cells, int order)
        : m_order(static_cast<std::size_t>(order)), m_data(num_cells * m_order, complex{0, 0})
    {
    }

    std::span<complex> operator[](std::size_t cell) { return {m_data.data() + cell * m_order, m_order}; }
    std::span<const complex> operator[](std::size_t cell) const { return {m_data.data() + cell * m_order, m_order}; }
    std::size_t order() const { return m_order; }
    void clear() { std::fill(m_data.begin(), m_data.end(), complex{0, 0}); }

private:
    std::size_t m_order = 0;
    std::vector<complex> m_data;
};

// True when the pair may interact through M2L. theta bounds the combined
// radius against the clearance between the two bounding circles:
//     r_a + r_b <= theta * (|c_a - c_b| - r_a - r_b).
inline bool multipole_acceptance(const Cell &a, const Cell &b, double theta)
{
    const double d = std::abs(a.center - b.center);
    const double r = a.radius + b.radius;
    return d > 0 && r <= theta * (d - r);
}

// Simultaneous traversal of a target and a source tree. The visitor receives
// m2l(target_cell, source_cell) for accepted pairs and p2p(target_cell,
// source_cell) for leaf pairs that fail the acceptance test. A pair that fails
// and is not a leaf pair is refined by splitting the cell with the larger
// radius (or the one that can still be split).
template <class Visitor>
std::int32_t dual_tree_traverse(const QuadTree &target_tree, const QuadTree &source_tree, double theta,
                                Visitor &&visit)
{
    std::int32_t max_depth = 0;
    std::vector<std::pair<std::int32_t, std::int32_t>> stack;
    stack.emplace_back(static_cast<std::int32_t>(target_tree.root()), static_cast<std::int32_t>(source_tree.root()));
    while (!stack.empty()) {
        const auto [ti, si] = stack.back();
        stack.pop_back();
        const Cell &t = target_tree.cell(static_cast<std::size_t>(ti));
        const Cell &s = source_tree.cell(static_cast<std::size_t>(si));
        max_depth = std::max({max_depth, t.depth, s.depth});

        if (multipole_acceptance(t, s, theta)) {
            visit.m2l(static_cast<std::size_t>(ti), static_cast<std::size_t>(si));
            continue;
        }
        if (t.is_leaf() && s.is_leaf()) {
            visit.p2p(static_cast<std::size_t>(ti), static_cast<std::size_t>(si));
            continue;
        }
        const bool split_source = t.is_leaf() || (!s.is_leaf() && s.radius > t.radius);
        if (split_source) {
            for (std::int32_t c = s.num_children; c-- > 0;) {
                stack.emplace_back(ti, s.children[static_cast<std::size_t>(c)]);
            }
        } else {
            for (std::int32_t c = t.num_children; c-- > 0;) {
                stack.emplace_back(t.children[static_cast<std::size_t>(c)], si);
            }
        }
    }
    return max_depth;
}

// P2M at the leaves followed by M2M towards the root. Strengths are given in
// tree order.
inline ExpansionArray upward_pass(const QuadTree &tree, std::span<const double> strengths, int order)
{
    ExpansionArray multipoles(tree.num_cells(), order);
    const auto &pos = tree.positions();
    for (std::size_t ci = tree.num_cells(); ci-- > 0;) {
        const Cell &c = tree.cell(ci);
        if (c.is_leaf()) {
            p2m_accumulate(std::span(pos).subspan(c.begin, c.size()), strengths.subspan(c.begin, c.size()), c.center,
                           multipoles[ci]);
        } else {
            for (std::int32_t k = 0; k < c.num_children; ++k) {
                const auto child = static_cast<std::size_t>(c.children[static_cast<std::size_t>(k)]);
                m2m_accumulate(multipoles[child], c.center - tree.cell(child).center, multipoles[ci]);
            }
        }
    }
    return multipoles;
}

// L2L from the root downwards, then L2P at the leaves. Potentials are in tree
// order and are accumulated into (scaled by the Laplace factor).
inline void downward_pass(const QuadTree &tree, ExpansionArray &locals, std::span<double> potentials)
{
    const auto &pos = tree.positions();
    for (std::size_t ci = 0; ci < tree.num_cells(); ++ci) {
        const Cell &c = tree.cell(ci);
        if (c.is_leaf()) {
            for (std::size_t i = c.begin; i < c.end; ++i) {
                potentials[i] += potential_scale * l2p(locals[ci], pos[i] - c.center);
            }
        } else {
            for (std::int32_t k = 0; k < c.num_children; ++k) {
                const auto child = static_cast<std::size_t>(c.children[static_cast<std::size_t>(k)]);
                l2l_accumulate(locals[ci], tree.cell(child).center - c.center, locals[child]);
            }
        }
    }
}

namespace detail
{

struct ApplyingVisitor {
    const QuadTree &targets;
    const QuadTree &sources;
    const ExpansionArray &multipoles;
    std::span<const double> strengths;
    ExpansionArray &locals;
    std::span<double> potentials;
    double epsilon;
    InteractionStats &stats;

    void m2l(std::size_t t, std::size_t s)
    {
        m2l_accumulate(multipoles[s], targets.cell(t).center - sources.cell(s).center, locals[t]);
        ++stats.m2l_pairs;
    }
    void p2p(std::size_t t, std::size_t s)
    {
        const Cell &ct = targets.cell(t);
        const Cell &cs = sources.cell(s);
        p2p_accumulate(std::span(targets.positions()).subspan(ct.begin, ct.size()),
                       potentials.subspan(ct.begin, ct.size()),
                       std::span(sources.positions()).subspan(cs.begin, cs.size()),
                       strengths.subspan(cs.begin, cs.size()), epsilon);
        ++stats.p2p_pairs;
        stats.p2p_interactions += ct.size() * cs.size();
    }
};

struct RecordingVisitor {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> &m2l_list;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> &p2p_list;
    void m2l(std::size_t t, std::size_t s)
    {
        m2l_list.emplace_back(static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(s));
    }
    void p2p(std::size_t t, std::size_t s)
    {
        p2p_list.emplace_back(static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(s));
    }
};

} // namespace detail

// Traversal with its M2L and P2P effects applied: M2L results go into the
// target locals, P2P results straight into the target potentials (tree order).
inline InteractionStats dual_tree_traverse(const QuadTree &target_tree, const QuadTree &source_tree,
                                           const FmmConfig &config, const ExpansionArray &multipoles,
                                           std::span<const double> source_strengths, ExpansionArray &locals,
                                           std::span<double> potentials)
{
    InteractionStats stats;
    detail::ApplyingVisitor visitor{target_tree, source_tree, multipoles, source_strengths,
                                    locals,      potentials,  config.epsilon, stats};
    stats.max_depth = dual_tree_traverse(target_tree, source_tree, config.theta, visitor);
    return stats;
}

// Reusable evaluator for fixed source and target geometry. Builds the trees
// and the traversal once; evaluate() can then be called with any strengths.
// When constructed without targets the sources double as targets and a single
// tree serves both roles.
class FmmEvaluator
{
public:
    FmmEvaluator(std::span<const Point2> sources, std::span<const Point2> targets, const FmmConfig &config)
        : m_config(config)
    {
        m_config.validate();
        m_source_tree = std::make_shared<const QuadTree>(QuadTree::build(sources, config.ncrit));
        m_target_tree = std::make_shared<const QuadTree>(QuadTree::build(targets, config.ncrit));
        record();
    }

    FmmEvaluator(std::span<const Point2> points, const FmmConfig &config) : m_config(config)
    {
        m_config.validate();
        m_source_tree = std::make_shared<const QuadTree>(QuadTree::build(points, config.ncrit));
        m_target_tree = m_source_tree;
        record();
    }

    std::size_t num_sources() const { return m_source_tree->num_points(); }
    std::size_t num_targets() const { return m_target_tree->num_points(); }
    const FmmConfig &config() const { return m_config; }
    const QuadTree &source_tree() const { return *m_source_tree; }
    const QuadTree &target_tree() const { return *m_target_tree; }
    const InteractionStats &stats() const { return m_stats; }

    // Potentials at the targets, in the caller's original target order.
    std::vector<double> evaluate(std::span<const double> strengths) const
    {
        if (strengths.size() != num_sources()) {
            throw std::invalid_argument("strength count does not match source count");
        }
        const QuadTree &st = *m_source_tree;
        const QuadTree &tt = *m_target_tree;
        std::vector<double> f(strengths.size());
        const auto &sperm = st.permutation();
        for (std::size_t k = 0; k < f.size(); ++k) {
            f[k] = strengths[sperm[k]];
        }

        const ExpansionArray multipoles = upward_pass(st, f, m_config.order);
        ExpansionArray locals(tt.num_cells(), m_config.order);
        std::vector<double> u(tt.num_points(), 0.0);
        const auto &spos = st.positions();
        const auto &tpos = tt.positions();
        for (const auto &[t, s] : m_m2l) {
            m2l_accumulate(multipoles[s], tt.cell(t).center - st.cell(s).center, locals[t]);
        }
        for (const auto &[t, s] : m_p2p) {
            const Cell &ct = tt.cell(t);
            const Cell &cs = st.cell(s);
            p2p_accumulate(std::span(tpos).subspan(ct.begin, ct.size()), std::span(u).subspan(ct.begin, ct.size()),
                           std::span(spos).subspan(cs.begin, cs.size()), std::span(f).subspan(cs.begin, cs.size()),
                           m_config.epsilon);
        }
        downward_pass(tt, locals, u);

        std::vector<double> out(u.size());
        const auto &tperm = tt.permutation();
        for (std::size_t k = 0; k < u.size(); ++k) {
            out[tperm[k]] = u[k];
        }
        return out;
    }

private:
    void record()
    {
        detail::RecordingVisitor rec{m_m2l, m_p2p};
        m_stats.max_depth = dual_tree_traverse(*m_target_tree, *m_source_tree, m_config.theta, rec);
        m_stats.m2l_pairs = m_m2l.size();
        m_stats.p2p_pairs = m_p2p.size();
        for (const auto &[t, s] : m_p2p) {
            m_stats.p2p_interactions += m_target_tree->cell(t).size() * m_source_tree->cell(s).size();
        }
        // Grouping by target cell keeps each target's accumulation contiguous;
        // stable sorting preserves the traversal order within a target.
        auto by_target = [](const auto &a, const auto &b) { return a.first < b.first; };
        std::stable_sort(m_m2l.begin(), m_m2l.end(), by_target);
        std::stable_sort(m_p2p.begin(), m_p2p.end(), by_target);
    }

    FmmConfig m_config;
    std::shared_ptr<const QuadTree> m_source_tree;
    std::shared_ptr<const QuadTree> m_target_tree;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> m_m2l;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> m_p2p;
    InteractionStats m_stats;
};

namespace detail
{

inline void split_sources(std::span<const SourcePoint> sources, std::vector<Point2> &pos, std::vector<double> &f)
{
    pos.resize(sources.size());
    f.resize(sources.size());
    for (std::size_t j = 0; j < sources.size(); ++j) {
        pos[j] = sources[j].position;
        f[j] = sources[j].strength;
    }
}

} // namespace detail

inline std::vector<double> fmm_evaluate(std::span<const SourcePoint> sources, std::span<const Point2> targets,
                                        const FmmConfig &config)
{
    std::vector<Point2> pos;
    std::vector<double> f;
    detail::split_sources(sources, pos, f);
    return FmmEvaluator(pos, targets, config).evaluate(f);
}

// Self evaluation: every source is also a target.
inline std::vector<double> fmm_evaluate(std::span<const SourcePoint> sources, const FmmConfig &config)
{
    std::vector<Point2> pos;
    std::vector<double> f;
    detail::split_sources(sources, pos, f);
    return FmmEvaluator(pos, config).evaluate(f);
}

// O(N M) reference sum with the smoothed kernel applied to every pair.
inline std::vector<double> direct_evaluate(std::span<const SourcePoint> sources, std::span<const Point2> targets,
                                           double epsilon)
{
    return p2p(targets, sources, epsilon);
}

} // namespace fmmpc

#endif
