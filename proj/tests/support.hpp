#pragma once

// Generators and brute-force oracles shared by the unit and acceptance tests.
// The oracles deliberately avoid the library's cached counts and queues: they
// locate points by scanning leaf boxes and recount everything from scratch.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <random>
#include <set>
#include <vector>

#include "srphist.hpp"

namespace srphist::testkit {

using Rng = std::mt19937_64;

/// Ten points on the unit square: 2 in [0,.5)x[0,.5), 3 in [0,.5)x[.5,1]
/// and 5 in [.5,1]x[0,1].
inline PointSet ten_points() {
    return PointSet(2, {{0.1, 0.2}, {0.3, 0.4},
                        {0.2, 0.6}, {0.4, 0.9}, {0.25, 0.75},
                        {0.6, 0.1}, {0.7, 0.5}, {0.9, 0.9}, {0.55, 0.3}, {0.8, 0.7}});
}

inline RPTree three_leaf_tree() {
    RPTree t(Box::cube(2, 0, 1));
    t.split(NodeLabel(1));
    t.split(NodeLabel(2));
    return t;
}

inline PointSet uniform_points(Rng& rng, std::size_t n, const Box& box) {
    PointSet out(box.dim());
    std::vector<double> row(box.dim());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < box.dim(); ++j)
            row[j] = std::uniform_real_distribution<double>(box[j].lo, box[j].hi)(rng);
        out.push_back(row);
    }
    return out;
}

/// Mixture of a few Gaussian blobs truncated to the unit cube: uneven
/// densities give uneven counts, which keeps priorities from tying.
inline PointSet clustered_points(Rng& rng, std::size_t n, std::size_t d) {
    const std::size_t k = 1 + rng() % 4;
    std::vector<std::vector<double>> centers(k, std::vector<double>(d));
    std::vector<double> scales(k);
    for (std::size_t c = 0; c < k; ++c) {
        for (auto& x : centers[c]) x = std::uniform_real_distribution<double>(0.2, 0.8)(rng);
        scales[c] = std::uniform_real_distribution<double>(0.03, 0.2)(rng);
    }
    PointSet out(d);
    std::vector<double> row(d);
    std::normal_distribution<double> z;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng() % k;
        for (std::size_t j = 0; j < d; ++j) {
            do {
                row[j] = centers[c][j] + scales[c] * z(rng);
            } while (row[j] < 0.0 || row[j] > 1.0);
        }
        out.push_back(row);
    }
    return out;
}

/// Random full binary tree built by splitting random leaves.
inline RPTree random_tree(Rng& rng, const Box& root, std::size_t splits, std::size_t max_depth = 40) {
    RPTree t(root);
    for (std::size_t s = 0; s < splits; ++s) {
        std::vector<NodeLabel> cand;
        for (const auto& l : t.leaves())
            if (l.depth() < max_depth) cand.push_back(l);
        if (cand.empty()) break;
        t.split(cand[rng() % cand.size()]);
    }
    return t;
}

/// Leaf containing p found by testing every leaf box.
inline NodeLabel scan_leaf(const RPTree& t, std::span<const double> p) {
    std::optional<NodeLabel> hit;
    for (const auto& l : t.leaves()) {
        if (t.cell_box(l).contains(p)) {
            if (hit) throw std::logic_error("point in two leaves");
            hit = l;
        }
    }
    if (!hit) throw std::logic_error("point in no leaf");
    return *hit;
}

/// Leaf counts by direct scan.
inline std::map<NodeLabel, std::size_t> scan_counts(const RPTree& t, const PointSet& pts) {
    std::map<NodeLabel, std::size_t> out;
    for (const auto& l : t.leaves()) out[l] = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) ++out[scan_leaf(t, pts[i])];
    return out;
}

/// Leave-one-out CV by literally deleting each point, recounting its leaf,
/// and evaluating the held-out density there; the integral of f^2 is summed
/// leaf by leaf.
inline double brute_force_cv(const RPTree& t, const PointSet& pts) {
    const std::size_t n = pts.size();
    const double nd = static_cast<double>(n);
    double integral = 0.0;
    std::map<NodeLabel, double> vol;
    for (const auto& l : t.leaves()) vol[l] = t.cell_box(l).volume();
    std::vector<NodeLabel> where;
    for (std::size_t i = 0; i < n; ++i) where.push_back(scan_leaf(t, pts[i]));
    for (const auto& l : t.leaves()) {
        std::size_t c = 0;
        for (const auto& w : where) c += (w == l);
        const double h = static_cast<double>(c) / (nd * vol[l]);
        integral += h * h * vol[l];
    }
    double held_out = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t others = 0;
        for (std::size_t k = 0; k < n; ++k)
            if (k != i && where[k] == where[i]) ++others;
        held_out += static_cast<double>(others) / ((nd - 1.0) * vol[where[i]]);
    }
    return integral - 2.0 / nd * held_out;
}

/// Sum of log density over the sample.
inline double per_point_log_likelihood(const Histogram& h, const PointSet& pts) {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) s += std::log(h.density_at(pts[i]));
    return s;
}

inline double priority_value(PriorityKind kind, std::size_t c, double v, std::size_t n) {
    return kind == PriorityKind::seb ? static_cast<double>(c) : (1.0 - static_cast<double>(c) / static_cast<double>(n)) * v;
}

inline bool oracle_splittable(const RPTree& t, const NodeLabel& l, std::size_t c, std::size_t max_depth) {
    return c > 0 && l.depth() < max_depth && t.cell_box(l).is_bisectable();
}

/// Hand-simulated chain: every step recounts all leaves by scan, evaluates
/// every priority and splits the largest (lowest label among equals).
/// Returns the split labels in order.
inline std::vector<NodeLabel> oracle_chain(RPTree t, const PointSet& pts, PriorityKind kind, double max_psi,
                                           std::size_t max_leaves, std::size_t max_depth, bool stop_on_psi = true) {
    std::vector<NodeLabel> splits;
    while (t.leaves().size() < max_leaves) {
        const auto counts = scan_counts(t, pts);
        std::optional<NodeLabel> best;
        double best_psi = 0.0;
        for (const auto& [l, c] : counts) {
            if (!oracle_splittable(t, l, c, max_depth)) continue;
            const double psi = priority_value(kind, c, t.cell_box(l).volume(), pts.size());
            if (!best || psi > best_psi) {
                best = l;
                best_psi = psi;
            }
        }
        if (!best || (stop_on_psi && !(best_psi > max_psi))) break;
        t.split(*best);
        splits.push_back(*best);
    }
    return splits;
}

/// Splits eligible leaves (count above threshold, splittable) in a random
/// order, one at a time or in random batches, until none is eligible. Each
/// leaf keeps its own list of point indices, partitioned by child-box
/// membership on every split.
inline RPTree random_order_threshold_tree(RPTree t, const PointSet& pts, double threshold, std::size_t max_depth,
                                          Rng& rng) {
    std::map<NodeLabel, std::vector<std::size_t>> members;
    for (const auto& l : t.leaves()) members[l];
    for (std::size_t i = 0; i < pts.size(); ++i) members[scan_leaf(t, pts[i])].push_back(i);
    while (true) {
        std::vector<NodeLabel> eligible;
        for (const auto& [l, idx] : members)
            if (static_cast<double>(idx.size()) > threshold && oracle_splittable(t, l, idx.size(), max_depth))
                eligible.push_back(l);
        if (eligible.empty()) return t;
        std::shuffle(eligible.begin(), eligible.end(), rng);
        const std::size_t batch = 1 + rng() % eligible.size();
        for (std::size_t k = 0; k < batch; ++k) {
            const NodeLabel v = eligible[k];
            const auto [lbox, rbox] = t.cell_box(v).bisect();
            t.split(v);
            auto& left = members[v.left()];
            auto& right = members[v.right()];
            for (std::size_t i : members[v]) {
                const bool in_left = lbox.contains(pts[i]);
                if (in_left == rbox.contains(pts[i])) throw std::logic_error("children do not partition the cell");
                (in_left ? left : right).push_back(i);
            }
            members.erase(v);
        }
    }
}

/// True when every internal node (other than those of `initial`) of the
/// SEB threshold tree has a count no other such node shares, so the chain
/// never faces a tie when choosing its next split.
inline bool strict_priorities(const Srp& fin, const RPTree& initial) {
    std::set<Count> seen;
    for (const auto& v : fin.tree().internal_nodes()) {
        if (initial.contains(v) && !initial.is_leaf(v)) continue;
        if (!seen.insert(fin.count(v)).second) return false;
    }
    return true;
}

}  // namespace srphist::testkit
