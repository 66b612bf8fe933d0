#ifndef FMMPC_QUADTREE_HPP
#define FMMPC_QUADTREE_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <fmmpc/geometry.hpp>

namespace fmmpc
{

inline constexpr std::size_t default_ncrit = 16;

// One node of the quadtree. Points of the cell occupy [begin, end) in tree order.
// The expansion center is the centroid of the contained points and the radius is
// the largest distance from that center to any of them.
struct Cell {
    complex center;
    double radius = 0;
    double box_half = 0; // half side of the bounding square used for splitting
    Point2 box_center;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::int32_t parent = -1;
    std::int32_t depth = 0;
    std::array<std::int32_t, 4> children{-1, -1, -1, -1};
    std::int32_t num_children = 0;

    bool is_leaf() const { return num_children == 0; }
    std::size_t size() const { return end - begin; }
};

// Adaptive quadtree over a 2-D point set. Immutable once built.
//
// Cells are stored so that every parent precedes its children; iterating the
// cell array backwards therefore visits children before parents.
class QuadTree
{
public:
    static QuadTree build(std::span<const Point2> points, std::size_t ncrit = default_ncrit);

    const std::vector<Cell> &cells() const { return m_cells; }
    const Cell &cell(std::size_t i) const { return m_cells[i]; }
    std::size_t root() const { return 0; }
    std::size_t num_cells() const { return m_cells.size(); }
    std::size_t num_points() const { return m_permutation.size(); }
    std::size_t ncrit() const { return m_ncrit; }

    // permutation()[k] is the original index of the k-th point in tree order.
    const std::vector<std::size_t> &permutation() const { return m_permutation; }
    // Positions in tree order, as complex numbers.
    const std::vector<complex> &positions() const { return m_positions; }

    std::vector<std::size_t> leaves() const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < m_cells.size(); ++i) {
            if (m_cells[i].is_leaf()) {
                out.push_back(i);
            }
        }
        return out;
    }

    std::int32_t max_depth() const
    {
        std::int32_t d = 0;
        for (const auto &c : m_cells) {
            d = std::max(d, c.depth);
        }
        return d;
    }

private:
    std::vector<Cell> m_cells;
    std::vector<std::size_t> m_permutation;
    std::vector<complex> m_positions;
    std::size_t m_ncrit = default_ncrit;
};

namespace detail
{

// Deepest subdivision allowed; past this a cell of coincident points stays a leaf.
inline constexpr std::int32_t max_tree_depth = 48;

inline void finalize_cell(Cell &cell, std::span<const complex> pos)
{
    complex c{0, 0};
    for (std::size_t i = cell.begin; i < cell.end; ++i) {
        c += pos[i];
    }
    c /= static_cast<double>(cell.size());
    double r = 0;
    for (std::size_t i = cell.begin; i < cell.end; ++i) {
        r = std::max(r, std::abs(pos[i] - c));
    }
    cell.center = c;
    cell.radius = r;
}

} // namespace detail

inline QuadTree QuadTree::build(std::span<const Point2> points, std::size_t ncrit)
{
    if (points.empty()) {
        throw std::invalid_argument("empty point set");
    }
    if (ncrit == 0) {
        throw std::invalid_argument("ncrit must be positive");
    }
    for (const auto &p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw std::invalid_argument("non-finite point coordinate");
        }
    }

    QuadTree tree;
    tree.m_ncrit = ncrit;
    const std::size_t n = points.size();
    tree.m_permutation.resize(n);
    std::iota(tree.m_permutation.begin(), tree.m_permutation.end(), std::size_t{0});

    double xmin = points[0].x, xmax = points[0].x, ymin = points[0].y, ymax = points[0].y;
    for (const auto &p : points) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }

    Cell root;
    root.begin = 0;
    root.end = n;
    root.box_center = {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)};
    root.box_half = 0.5 * std::max(xmax - xmin, ymax - ymin);
    tree.m_cells.push_back(root);

    auto &perm = tree.m_permutation;
    std::vector<std::size_t> scratch(n);

    // Breadth-first splitting keeps parents ahead of children in the cell array.
    for (std::size_t ci = 0; ci < tree.m_cells.size(); ++ci) {
        const Cell cell = tree.m_cells[ci];
        if (cell.size() <= ncrit || cell.box_half <= 0 || cell.depth >= detail::max_tree_depth) {
            continue;
        }
        // Stable counting sort of the cell's points by quadrant.
        auto quadrant = [&](std::size_t idx) {
            const Point2 &p = points[idx];
            return (p.x >= cell.box_center.x ? 1 : 0) + (p.y >= cell.box_center.y ? 2 : 0);
        };
        std::array<std::size_t, 4> count{};
        for (std::size_t k = cell.begin; k < cell.end; ++k) {
            ++count[quadrant(perm[k])];
        }
        std::array<std::size_t, 5> offset{};
        for (int q = 0; q < 4; ++q) {
            offset[q + 1] = offset[q] + count[q];
        }
        std::array<std::size_t, 4> fill{offset[0], offset[1], offset[2], offset[3]};
        for (std::size_t k = cell.begin; k < cell.end; ++k) {
            scratch[fill[quadrant(perm[k])]++] = perm[k];
        }
        std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(cell.size()),
                  perm.begin() + static_cast<std::ptrdiff_t>(cell.begin));

        const double half = 0.5 * cell.box_half;
        std::int32_t nchild = 0;
        std::array<std::int32_t, 4> kids{-1, -1, -1, -1};
        for (int q = 0; q < 4; ++q) {
            if (count[q] == 0) {
                continue;
            }
            Cell child;
            child.begin = cell.begin + offset[q];
            child.end = cell.begin + offset[q + 1];
            child.parent = static_cast<std::int32_t>(ci);
            child.depth = cell.depth + 1;
            child.box_half = half;
            child.box_center = {cell.box_center.x + ((q & 1) ? half : -half),
                                cell.box_center.y + ((q & 2) ? half : -half)};
            kids[nchild++] = static_cast<std::int32_t>(tree.m_cells.size());
            tree.m_cells.push_back(child);
        }
        tree.m_cells[ci].children = kids;
        tree.m_cells[ci].num_children = nchild;
    }

    tree.m_positions.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        tree.m_positions[k] = to_complex(points[perm[k]]);
    }
    for (auto &cell : tree.m_cells) {
        detail::finalize_cell(cell, tree.m_positions);
    }
    return tree;
}

inline QuadTree build_quadtree(std::span<const SourcePoint> sources, std::size_t ncrit = default_ncrit)
{
    std::vector<Point2> pts(sources.size());
    std::transform(sources.begin(), sources.end(), pts.begin(), [](const SourcePoint &s) { return s.position; });
    return QuadTree::build(pts, ncrit);
}

} // namespace fmmpc

#endif
