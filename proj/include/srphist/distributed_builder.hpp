#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "node_label.hpp"
#include "paving_tree.hpp"
#include "pqmc.hpp"
#include "srp_histogram.hpp"

// Data-parallel construction of threshold trees. The sample is held as
// (cell label, point) pairs split over S static shards. Each iteration is a
// map over shards (retag or drop pairs) followed by a reduce (count per
// cell); the merged count table is the only state shared between shards.

namespace srphist {

struct TaggedPoint {
    NodeLabel cell;
    std::size_t index = 0;  // row in the backing PointSet
};

/// Sharded tagged sample. Holds a non-owning view of the points, which must
/// outlive the dataset.
class TaggedDataset {
public:
    using Shard = std::vector<TaggedPoint>;

    /// Tags every point with the leaf of `initial` containing it and deals
    /// contiguous blocks of rows to `shard_count` shards.
    TaggedDataset(const PointSet& points, const RPTree& initial, std::size_t shard_count)
        : points_(&points), root_box_(initial.root_box()), shards_(std::max<std::size_t>(shard_count, 1)) {
        if (!points.empty() && points.dim() != initial.dim())
            throw Error(Errc::dimension_mismatch, "points do not match the root box dimension");
        const detail::DescentTable table(initial);
        const std::size_t n = points.size();
        const std::size_t s_count = shards_.size();
        for (std::size_t s = 0; s < s_count; ++s) {
            const std::size_t begin = s * n / s_count;
            const std::size_t end = (s + 1) * n / s_count;
            shards_[s].reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                const auto p = points[i];
                if (!root_box_.contains(p))
                    throw Error(Errc::point_outside_root_box, "point " + std::to_string(i) + " lies outside the root box");
                shards_[s].push_back({table.nodes[table.descend(p, [](std::size_t) {})].label, i});
            }
        }
    }

    TaggedDataset(const PointSet& points, const Box& root_box, std::size_t shard_count)
        : TaggedDataset(points, RPTree(root_box), shard_count) {}

    const PointSet& points() const noexcept { return *points_; }
    const Box& root_box() const noexcept { return root_box_; }
    std::size_t shard_count() const noexcept { return shards_.size(); }
    std::vector<Shard>& shards() noexcept { return shards_; }
    const std::vector<Shard>& shards() const noexcept { return shards_; }

    std::size_t size() const noexcept {
        std::size_t total = 0;
        for (const auto& s : shards_) total += s.size();
        return total;
    }

private:
    const PointSet* points_;
    Box root_box_;
    std::vector<Shard> shards_;
};

/// Cell label -> number of points. Only non-empty cells appear.
using CountTable = std::map<NodeLabel, Count>;

/// Runs fn(shard_index) for every shard on up to `workers` threads.
inline void for_each_shard(std::size_t shard_count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::clamp<std::size_t>(workers, 1, shard_count);
    if (workers == 1) {
        for (std::size_t s = 0; s < shard_count; ++s) fn(s);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&fn, w, workers, shard_count] {
            for (std::size_t s = w; s < shard_count; s += workers) fn(s);
        });
    for (auto& t : pool) t.join();
}

/// Per-shard partial counts merged by addition.
inline CountTable count_by_cell(const TaggedDataset& ds, std::size_t workers = 1) {
    std::vector<std::unordered_map<NodeLabel, Count, NodeLabelHash>> partial(ds.shard_count());
    for_each_shard(ds.shard_count(), workers, [&](std::size_t s) {
        auto& table = partial[s];
        for (const auto& tp : ds.shards()[s]) ++table[tp.cell];
    });
    CountTable merged;
    for (const auto& table : partial)
        for (const auto& [cell, c] : table) merged[cell] += c;
    return merged;
}

enum class UnsplittablePolicy {
    /// Throw DepthExhausted when an over-threshold cell cannot be split.
    error,
    /// Retire such cells as leaves, matching the sequential chain, which
    /// simply never considers them splittable.
    retire,
};

struct BuilderConfig {
    std::size_t shards = 1;
    /// Worker threads; 0 means one per shard.
    std::size_t workers = 0;
    std::size_t max_depth = kDefaultMaxDepth;
    bool prune = true;
    UnsplittablePolicy on_unsplittable = UnsplittablePolicy::error;

    std::size_t worker_count() const noexcept { return workers == 0 ? shards : workers; }
};

/// Everything needed to decide whether a cell splits.
struct ThresholdRule {
    Box root_box;
    Priority priority;
    double threshold = 0.0;
    Count n_total = 0;
    std::size_t max_depth = kDefaultMaxDepth;
    UnsplittablePolicy on_unsplittable = UnsplittablePolicy::error;
};

/// Cells whose priority strictly exceeds the threshold and that can be split.
inline std::set<NodeLabel> cells_to_split(const CountTable& table, const ThresholdRule& rule) {
    std::set<NodeLabel> out;
    const RPTree geometry(rule.root_box);
    for (const auto& [cell, c] : table) {
        const Box box = geometry.cell_box(cell);
        if (!(rule.priority(c, box.volume(), rule.n_total) > rule.threshold)) continue;
        if (is_splittable(c, cell.depth(), box, rule.max_depth)) {
            out.insert(cell);
        } else if (rule.on_unsplittable == UnsplittablePolicy::error) {
            throw Error(Errc::depth_exhausted, "cell " + cell.to_string() + " exceeds the threshold but cannot be split");
        }
    }
    return out;
}

inline std::set<NodeLabel> cells_to_split(const CountTable& table, const Box& root_box, Priority priority,
                                          double threshold, Count n_total, const BuilderConfig& cfg) {
    return cells_to_split(table, ThresholdRule{root_box, priority, threshold, n_total, cfg.max_depth, cfg.on_unsplittable});
}

/// Retags every pair whose cell is in `split_set` with the child cell on its
/// side of the splitting hyperplane. Shard-local; no cross-shard traffic.
inline TaggedDataset apply_splits(TaggedDataset ds, const std::set<NodeLabel>& split_set, std::size_t workers = 1) {
    if (split_set.empty()) return ds;
    const RPTree geometry(ds.root_box());
    std::unordered_map<NodeLabel, SplitPlane, NodeLabelHash> planes;
    for (const auto& cell : split_set) planes.emplace(cell, split_plane(geometry.cell_box(cell)));
    const PointSet& points = ds.points();
    for_each_shard(ds.shard_count(), workers, [&](std::size_t s) {
        for (auto& tp : ds.shards()[s]) {
            const auto it = planes.find(tp.cell);
            if (it != planes.end()) tp.cell.push_bit(it->second.goes_right(points[tp.index]));
        }
    });
    return ds;
}

/// Drops pairs whose cell will not split again and moves that cell's count
/// into `passed`. The working set plus `passed` always accounts for every
/// point.
inline TaggedDataset prune(TaggedDataset ds, const CountTable& table, const ThresholdRule& rule, CountTable& passed,
                           std::size_t workers = 1) {
    ThresholdRule lenient = rule;
    lenient.on_unsplittable = UnsplittablePolicy::retire;
    const std::set<NodeLabel> keep = cells_to_split(table, lenient);
    if (keep.size() == table.size()) return ds;
    for (const auto& [cell, c] : table)
        if (!keep.contains(cell)) passed[cell] += c;
    for_each_shard(ds.shard_count(), workers, [&](std::size_t s) {
        auto& shard = ds.shards()[s];
        std::erase_if(shard, [&](const TaggedPoint& tp) { return !keep.contains(tp.cell); });
    });
    return ds;
}

struct IterationStats {
    std::size_t working_points = 0;
    Count passed_points = 0;
    std::size_t table_keys = 0;
    std::size_t split_cells = 0;
};

struct BuildResult {
    Srp final_srp;
    /// Cells retired by pruning, with their final counts.
    CountTable passed_counts;
    std::size_t iterations = 0;
    std::vector<IterationStats> trace;
    RPTree initial_tree;
    Priority priority;
    double threshold = 0.0;
    std::size_t max_depth = kDefaultMaxDepth;

    friend bool operator==(const BuildResult& a, const BuildResult& b) {
        return a.final_srp == b.final_srp && a.passed_counts == b.passed_counts && a.iterations == b.iterations &&
               a.initial_tree == b.initial_tree;
    }
};

namespace detail {

/// Closes a set of leaf cells (plus an initial tree) into a full binary tree;
/// missing siblings become empty leaves and internal counts are summed.
inline Srp assemble_srp(const RPTree& initial, const CountTable& leaf_counts) {
    std::set<NodeLabel> nodes = initial.nodes();
    for (const auto& [cell, c] : leaf_counts) {
        NodeLabel cur = cell;
        while (nodes.insert(cur).second && !cur.is_root()) cur.pop_bit();
    }
    std::vector<NodeLabel> siblings;
    for (const auto& v : nodes)
        if (!v.is_root() && !nodes.contains(v.sibling())) siblings.push_back(v.sibling());
    nodes.insert(siblings.begin(), siblings.end());
    CountMap counts;
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        const NodeLabel& v = *it;
        if (nodes.contains(v.left())) {
            counts.emplace(v, counts.at(v.left()) + counts.at(v.right()));
        } else {
            const auto found = leaf_counts.find(v);
            counts.emplace(v, found == leaf_counts.end() ? 0 : found->second);
        }
    }
    return Srp(RPTree::from_nodes(initial.root_box(), nodes), std::move(counts));
}

}  // namespace detail

/// Splits every cell above the threshold each iteration until none remains,
/// starting from the leaves of `initial` (root-only by default).
inline BuildResult build_threshold_tree(const PointSet& points, const RPTree& initial, Priority priority,
                                        double threshold, const BuilderConfig& cfg) {
    const std::size_t workers = cfg.worker_count();
    TaggedDataset ds(points, initial, cfg.shards);
    const ThresholdRule rule{initial.root_box(), priority, threshold, static_cast<Count>(points.size()),
                             cfg.max_depth, cfg.on_unsplittable};
    BuildResult result;
    result.initial_tree = initial;
    result.priority = priority;
    result.threshold = threshold;
    result.max_depth = cfg.max_depth;

    CountTable table = count_by_cell(ds, workers);
    Count passed_total = 0;
    while (true) {
        const std::set<NodeLabel> split = cells_to_split(table, rule);
        result.trace.push_back({ds.size(), passed_total, table.size(), split.size()});
        if (cfg.prune) {
            ds = prune(std::move(ds), table, rule, result.passed_counts, workers);
            passed_total = 0;
            for (const auto& [cell, c] : result.passed_counts) passed_total += c;
            result.trace.back().working_points = ds.size();
            result.trace.back().passed_points = passed_total;
        }
        if (split.empty()) break;
        ds = apply_splits(std::move(ds), split, workers);
        table = count_by_cell(ds, workers);
        ++result.iterations;
    }
    CountTable leaves = result.passed_counts;
    if (!cfg.prune) leaves = table;
    result.final_srp = detail::assemble_srp(initial, leaves);
    return result;
}

inline BuildResult build_threshold_tree(const PointSet& points, const Box& root_box, Priority priority,
                                        double threshold, const BuilderConfig& cfg) {
    return build_threshold_tree(points, RPTree(root_box), priority, threshold, cfg);
}

/// Merge order that coarsens `final_srp` back to `stop_at`: repeatedly the
/// cherry whose parent has least priority (parent count from its children,
/// volume from its label). Equal priorities merge the higher label first,
/// which makes the reversed order coincide with a lowest-label-first
/// forward chain for priorities that never increase from parent to child.
inline std::vector<NodeLabel> backtrack_merges(const Srp& final_srp, const RPTree& stop_at, Priority priority) {
    struct Key {
        double psi;
        NodeLabel label;
        bool operator<(const Key& o) const {
            if (psi != o.psi) return psi < o.psi;
            return o.label < label;
        }
    };
    const Count n = final_srp.n();
    Srp cur = final_srp;
    auto mergeable = [&](const NodeLabel& v) {
        return cur.tree().is_cherry(v) && !(stop_at.contains(v) && !stop_at.is_leaf(v));
    };
    auto key_of = [&](const NodeLabel& v) {
        const Count c = cur.count(v.left()) + cur.count(v.right());
        return Key{priority(c, cur.volume(v), n), v};
    };
    std::set<Key> queue;
    for (const auto& v : cur.tree().internal_nodes())
        if (mergeable(v)) queue.insert(key_of(v));
    std::vector<NodeLabel> merges;
    while (!queue.empty()) {
        const Key k = *queue.begin();
        queue.erase(queue.begin());
        cur.merge_cherry(k.label);
        merges.push_back(k.label);
        if (!k.label.is_root()) {
            const NodeLabel p = k.label.parent();
            if (mergeable(p)) queue.insert(key_of(p));
        }
    }
    return merges;
}

/// Coarsening sequence from the built tree down to the initial tree.
inline std::vector<Srp> backtrack(const BuildResult& result) {
    std::vector<Srp> out{result.final_srp};
    Srp cur = result.final_srp;
    for (const auto& v : backtrack_merges(result.final_srp, result.initial_tree, result.priority)) {
        cur.merge_cherry(v);
        out.push_back(cur);
    }
    return out;
}

/// Forward path equivalent to the sequential chain: the reversed merge order
/// replayed as splits from the initial tree.
inline PqmcPath reconstruct_path(const BuildResult& result) {
    std::vector<NodeLabel> merges = backtrack_merges(result.final_srp, result.initial_tree, result.priority);
    Srp initial = result.final_srp;
    for (const auto& v : merges) initial.merge_cherry(v);
    std::reverse(merges.begin(), merges.end());
    PqmcConfig cfg;
    cfg.max_psi = result.threshold;
    cfg.max_depth = result.max_depth;
    const bool ok = is_successful(result.final_srp, result.priority, cfg);
    return PqmcPath(std::move(initial), std::move(merges), result.final_srp,
                    ok ? StopReason::threshold : StopReason::no_splittable, ok);
}

}  // namespace srphist
