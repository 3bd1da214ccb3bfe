#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "node_label.hpp"
#include "paving_tree.hpp"
#include "random.hpp"
#include "srp_histogram.hpp"

namespace srphist {

enum class PriorityKind { seb, spc };

/// Node priority as a function of (count, volume) and the total sample size.
/// SEB ranks by count; SPC by (1 - count/n) * volume, favouring large,
/// sparsely populated cells.
struct Priority {
    PriorityKind kind = PriorityKind::seb;

    static constexpr Priority seb() noexcept { return {PriorityKind::seb}; }
    static constexpr Priority spc() noexcept { return {PriorityKind::spc}; }

    double operator()(Count count, double volume, Count n) const noexcept {
        if (kind == PriorityKind::seb) return static_cast<double>(count);
        return (1.0 - static_cast<double>(count) / static_cast<double>(n)) * volume;
    }

    friend bool operator==(const Priority&, const Priority&) = default;
};

enum class TieBreak { random, lowest_label };

struct PqmcConfig {
    /// Stop once every splittable leaf has priority <= max_psi.
    double max_psi = 0.0;
    std::size_t max_leaves = std::numeric_limits<std::size_t>::max();
    std::size_t max_depth = kDefaultMaxDepth;
    std::uint64_t rng_seed = 0;
    TieBreak tie_break = TieBreak::random;
    /// When false the priority threshold never stops the chain (support
    /// carving with a zero threshold).
    bool stop_on_psi = true;
};

enum class StopReason { no_splittable, max_leaves, threshold };

/// A leaf may be split when it holds data, sits above the depth limit and its
/// cell has a representable midpoint.
inline bool is_splittable(Count count, std::size_t depth, const Box& cell, std::size_t max_depth) {
    return count > 0 && depth < max_depth && cell.is_bisectable();
}

inline std::set<NodeLabel> splittable_leaves(const Srp& s, const PqmcConfig& cfg) {
    std::set<NodeLabel> out;
    for (const auto& leaf : s.leaves())
        if (is_splittable(s.count(leaf), leaf.depth(), s.tree().cell_box(leaf), cfg.max_depth)) out.insert(leaf);
    return out;
}

/// True when no splittable leaf has priority above max_psi and the leaf
/// budget is respected.
inline bool is_successful(const Srp& s, Priority priority, const PqmcConfig& cfg) {
    if (s.leaf_count() > cfg.max_leaves) return false;
    for (const auto& leaf : splittable_leaves(s, cfg))
        if (priority(s.count(leaf), s.volume(leaf), s.n()) > cfg.max_psi) return false;
    return true;
}

/// Sample path s(0), ..., s(T) of a priority-queued chain. Stored as the
/// initial state plus the ordered split labels; `final_state` carries counts
/// for every node created along the way, so any state can be rebuilt
/// without the data.
class PqmcPath {
public:
    PqmcPath() = default;
    PqmcPath(Srp initial, std::vector<NodeLabel> splits, Srp final_state, StopReason reason, bool success)
        : initial_(std::move(initial)),
          splits_(std::move(splits)),
          final_(std::move(final_state)),
          reason_(reason),
          success_(success) {}

    std::size_t size() const noexcept { return splits_.size() + 1; }
    std::size_t stopping_time() const noexcept { return splits_.size(); }
    const Srp& initial() const noexcept { return initial_; }
    const Srp& final_state() const noexcept { return final_; }
    const std::vector<NodeLabel>& splits() const noexcept { return splits_; }
    StopReason stop_reason() const noexcept { return reason_; }
    bool success() const noexcept { return success_; }

    Srp state(std::size_t t) const {
        if (t >= size()) throw Error(Errc::invalid_argument, "state index out of range");
        if (t == stopping_time()) return final_;
        Srp s = initial_;
        for (std::size_t k = 0; k < t; ++k) {
            const NodeLabel& v = splits_[k];
            s.split_leaf(v, final_.count(v.left()), final_.count(v.right()));
        }
        return s;
    }

    std::vector<Srp> states() const {
        std::vector<Srp> out;
        out.reserve(size());
        Srp s = initial_;
        out.push_back(s);
        for (const auto& v : splits_) {
            s.split_leaf(v, final_.count(v.left()), final_.count(v.right()));
            out.push_back(s);
        }
        return out;
    }

    /// Longest prefix whose last state has at most `max_leaves` leaves (the
    /// initial state is always kept).
    PqmcPath truncated(std::size_t max_leaves) const {
        const std::size_t base = initial_.leaf_count();
        const std::size_t keep = max_leaves > base ? std::min(max_leaves - base, splits_.size()) : 0;
        if (keep == splits_.size()) return *this;
        std::vector<NodeLabel> prefix(splits_.begin(), splits_.begin() + static_cast<std::ptrdiff_t>(keep));
        return PqmcPath(initial_, std::move(prefix), state(keep), StopReason::max_leaves, success_);
    }

    void set_success(bool ok) noexcept { success_ = ok; }

    friend bool operator==(const PqmcPath& a, const PqmcPath& b) {
        return a.initial_ == b.initial_ && a.splits_ == b.splits_ && a.final_ == b.final_;
    }

private:
    Srp initial_;
    std::vector<NodeLabel> splits_;
    Srp final_;
    StopReason reason_ = StopReason::no_splittable;
    bool success_ = true;
};

namespace detail {

struct QueueKey {
    double psi;
    NodeLabel label;

    friend bool operator<(const QueueKey& a, const QueueKey& b) {
        if (a.psi != b.psi) return a.psi < b.psi;
        return a.label < b.label;
    }
};

}  // namespace detail

/// Runs the priority-queued chain from `s0` over `points`, splitting one
/// argmax-priority splittable leaf per step until none is splittable, the
/// leaf budget is reached or the top priority is <= max_psi.
inline PqmcPath run_pqmc(const Srp& s0, const PointSet& points, Priority priority, const PqmcConfig& cfg) {
    if (cfg.max_leaves < 1) throw Error(Errc::invalid_argument, "max_leaves must be >= 1");
    const RPTree& tree0 = s0.tree();
    if (!points.empty() && points.dim() != tree0.dim())
        throw Error(Errc::dimension_mismatch, "points do not match the SRP dimension");
    const Count n = s0.n();

    std::unordered_map<NodeLabel, std::vector<std::size_t>, NodeLabelHash> members;
    {
        const detail::DescentTable table(tree0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto p = points[i];
            if (!tree0.root_box().contains(p))
                throw Error(Errc::point_outside_root_box, "point " + std::to_string(i) + " lies outside the root box");
            const std::size_t k = table.descend(p, [](std::size_t) {});
            members[table.nodes[k].label].push_back(i);
        }
    }
    for (const auto& leaf : s0.leaves()) {
        const auto it = members.find(leaf);
        const Count have = it == members.end() ? 0 : it->second.size();
        if (have != s0.count(leaf))
            throw Error(Errc::invalid_argument, "initial SRP counts are inconsistent with the points at " + leaf.to_string());
    }

    std::unordered_map<NodeLabel, Box, NodeLabelHash> boxes;
    std::set<detail::QueueKey> queue;
    Srp state = s0;

    auto enqueue = [&](const NodeLabel& leaf, Box box) {
        const Count c = state.count(leaf);
        if (is_splittable(c, leaf.depth(), box, cfg.max_depth)) queue.insert({priority(c, box.volume(), n), leaf});
        boxes.emplace(leaf, std::move(box));
    };
    for (const auto& leaf : s0.leaves()) enqueue(leaf, tree0.cell_box(leaf));

    CounterRng rng(cfg.rng_seed);
    std::vector<NodeLabel> splits;
    StopReason reason = StopReason::no_splittable;
    while (true) {
        if (queue.empty()) {
            reason = StopReason::no_splittable;
            break;
        }
        if (state.leaf_count() >= cfg.max_leaves) {
            reason = StopReason::max_leaves;
            break;
        }
        const double top = std::prev(queue.end())->psi;
        if (cfg.stop_on_psi && !(top > cfg.max_psi)) {
            reason = StopReason::threshold;
            break;
        }
        // The tie group is the run of keys with psi == top, ordered by label.
        auto first = std::prev(queue.end());
        std::size_t group = 1;
        while (first != queue.begin() && std::prev(first)->psi == top) {
            --first;
            ++group;
        }
        auto pick = first;
        if (cfg.tie_break == TieBreak::random && group > 1)
            std::advance(pick, static_cast<std::ptrdiff_t>(rng.below(group)));
        const NodeLabel v = pick->label;
        queue.erase(pick);

        auto node = boxes.extract(v);
        const Box& box = node.mapped();
        const SplitPlane plane = split_plane(box);
        auto [lbox, rbox] = box.bisect();
        std::vector<std::size_t> left_idx;
        std::vector<std::size_t> right_idx;
        auto mit = members.find(v);
        if (mit != members.end()) {
            for (std::size_t i : mit->second) (plane.goes_right(points[i]) ? right_idx : left_idx).push_back(i);
            members.erase(mit);
        }
        state.split_leaf(v, left_idx.size(), right_idx.size());
        splits.push_back(v);
        const NodeLabel l = v.left();
        const NodeLabel r = v.right();
        if (!left_idx.empty()) members.emplace(l, std::move(left_idx));
        if (!right_idx.empty()) members.emplace(r, std::move(right_idx));
        enqueue(l, std::move(lbox));
        enqueue(r, std::move(rbox));
    }

    bool success = state.leaf_count() <= cfg.max_leaves;
    if (!queue.empty() && std::prev(queue.end())->psi > cfg.max_psi) success = false;
    return PqmcPath(s0, std::move(splits), std::move(state), reason, success);
}

/// Support-carving path from the root: SPC priority with a zero threshold,
/// so it stops only at cfg.max_leaves leaves or when nothing is splittable.
inline PqmcPath carve_path(const PointSet& points, const Box& root_box, PqmcConfig cfg) {
    if (cfg.max_psi != 0.0) throw Error(Errc::invalid_argument, "carving runs with a zero priority threshold");
    cfg.stop_on_psi = false;
    const Srp root = ingest(RPTree(root_box), points);
    return run_pqmc(root, points, Priority::spc(), cfg);
}

/// Indices floor(i * T / (c - 1)), i = 0..c-1, into a path with T splits;
/// always includes 0. Returns every index when c >= T + 1.
inline std::vector<std::size_t> launch_indices(std::size_t stopping_time, std::size_t c) {
    if (c < 1) throw Error(Errc::invalid_argument, "need at least one launch state");
    std::vector<std::size_t> out;
    if (c >= stopping_time + 1) {
        for (std::size_t t = 0; t <= stopping_time; ++t) out.push_back(t);
        return out;
    }
    if (c == 1) return {0};
    for (std::size_t i = 0; i < c; ++i) out.push_back(i * stopping_time / (c - 1));
    return out;
}

inline std::vector<Srp> launch_states(const PqmcPath& carve, std::size_t c) {
    std::vector<Srp> out;
    for (std::size_t t : launch_indices(carve.stopping_time(), c)) out.push_back(carve.state(t));
    return out;
}

struct JointExploration {
    PqmcPath carve;
    std::vector<std::size_t> launch_indices;
    /// One SEB path per launch state; tributary 0 starts at the root.
    std::vector<PqmcPath> tributaries;
};

/// Carves, then launches one SEB chain from each of c states spread along
/// the carved path. Tributary i uses seed derive_seed(seb_cfg.rng_seed, i),
/// so tributary 0 replays a plain root-launched SEB run.
inline JointExploration joint_exploration(const PointSet& points, const Box& root_box, const PqmcConfig& carve_cfg,
                                          const PqmcConfig& seb_cfg, std::size_t c) {
    JointExploration out;
    out.carve = carve_path(points, root_box, carve_cfg);
    out.launch_indices = launch_indices(out.carve.stopping_time(), c);
    std::vector<std::future<PqmcPath>> jobs;
    for (std::size_t i = 0; i < out.launch_indices.size(); ++i) {
        PqmcConfig cfg = seb_cfg;
        cfg.rng_seed = derive_seed(seb_cfg.rng_seed, i);
        jobs.push_back(std::async(std::launch::async, [&points, &out, i, cfg] {
            return run_pqmc(out.carve.state(out.launch_indices[i]), points, Priority::seb(), cfg);
        }));
    }
    for (auto& job : jobs) out.tributaries.push_back(job.get());
    return out;
}

}  // namespace srphist
