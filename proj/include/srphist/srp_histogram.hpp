#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "error.hpp"
#include "geometry.hpp"
#include "node_label.hpp"
#include "paving_tree.hpp"

namespace srphist {

using Count = std::uint64_t;
using CountMap = std::map<NodeLabel, Count>;

/// Statistical regular paving: a paving plus the number of sample points
/// falling in every node (leaves and internal nodes alike).
class Srp {
public:
    Srp() = default;

    /// Takes ownership of a tree and a full per-node count map. Throws
    /// invalid_argument if a node is missing or a parent count is not the
    /// sum of its children.
    Srp(RPTree tree, CountMap counts) : tree_(std::move(tree)), counts_(std::move(counts)) {
        if (counts_.size() != tree_.node_count())
            throw Error(Errc::invalid_argument, "count map must cover exactly the tree's nodes");
        for (const auto& [label, c] : counts_) {
            if (!tree_.contains(label))
                throw Error(Errc::invalid_argument, "count for node " + label.to_string() + " outside the tree");
            if (!tree_.is_leaf(label) && c != counts_.at(label.left()) + counts_.at(label.right()))
                throw Error(Errc::invalid_argument, "parent-sum invariant violated at " + label.to_string());
        }
    }

    /// Root-only SRP holding n points.
    static Srp root_only(Box root_box, Count n) {
        CountMap counts;
        counts.emplace(NodeLabel::root(), n);
        return Srp(RPTree(std::move(root_box)), std::move(counts));
    }

    const RPTree& tree() const noexcept { return tree_; }
    const Box& root_box() const noexcept { return tree_.root_box(); }
    const CountMap& counts() const noexcept { return counts_; }
    Count n() const { return counts_.at(NodeLabel::root()); }
    Count count(const NodeLabel& label) const {
        const auto it = counts_.find(label);
        if (it == counts_.end()) throw Error(Errc::invalid_argument, "node " + label.to_string() + " not in tree");
        return it->second;
    }
    std::size_t leaf_count() const noexcept { return tree_.leaf_count(); }
    const std::set<NodeLabel>& leaves() const noexcept { return tree_.leaves(); }
    double volume(const NodeLabel& label) const { return tree_.cell_volume(label); }

    /// Splits a leaf whose children's counts are already known.
    void split_leaf(const NodeLabel& label, Count left_count, Count right_count) {
        if (count(label) != left_count + right_count)
            throw Error(Errc::invalid_argument, "child counts do not sum to the parent count");
        tree_.split(label);
        counts_[label.left()] = left_count;
        counts_[label.right()] = right_count;
    }

    void merge_cherry(const NodeLabel& label) {
        tree_.merge(label);
        counts_.erase(label.left());
        counts_.erase(label.right());
    }

    friend bool operator==(const Srp&, const Srp&) = default;

private:
    RPTree tree_;
    CountMap counts_;
};

enum class OutOfBoxPolicy { strict, drop };

namespace detail {

/// Flattened tree for fast point descent: index 0 is the root.
struct DescentTable {
    struct Node {
        NodeLabel label;
        SplitPlane plane;
        std::size_t left = 0;  // 0 marks a leaf
        std::size_t right = 0;
    };
    std::vector<Node> nodes;

    explicit DescentTable(const RPTree& tree) {
        struct Pending {
            std::size_t index;
            Box box;
        };
        nodes.push_back({NodeLabel::root(), {}, 0, 0});
        std::vector<Pending> stack{{0, tree.root_box()}};
        while (!stack.empty()) {
            Pending cur = std::move(stack.back());
            stack.pop_back();
            const NodeLabel label = nodes[cur.index].label;
            if (tree.is_leaf(label)) continue;
            nodes[cur.index].plane = split_plane(cur.box);
            auto [lb, rb] = cur.box.bisect();
            const std::size_t li = nodes.size();
            nodes.push_back({label.left(), {}, 0, 0});
            const std::size_t ri = nodes.size();
            nodes.push_back({label.right(), {}, 0, 0});
            nodes[cur.index].left = li;
            nodes[cur.index].right = ri;
            stack.push_back({li, std::move(lb)});
            stack.push_back({ri, std::move(rb)});
        }
    }

    template <typename Visit>
    std::size_t descend(std::span<const double> p, Visit&& visit) const {
        std::size_t i = 0;
        visit(i);
        while (nodes[i].left != 0) {
            i = nodes[i].plane.goes_right(p) ? nodes[i].right : nodes[i].left;
            visit(i);
        }
        return i;
    }
};

}  // namespace detail

/// Counts points into every node of `tree`. Under the strict policy a point
/// outside the root box throws; under drop it is skipped and tallied in
/// `*dropped` when given.
inline Srp ingest(const RPTree& tree, const PointSet& points, OutOfBoxPolicy policy = OutOfBoxPolicy::strict,
                  std::size_t* dropped = nullptr) {
    if (!points.empty() && points.dim() != tree.dim())
        throw Error(Errc::dimension_mismatch, "points have dimension " + std::to_string(points.dim()) +
                                                  ", tree has " + std::to_string(tree.dim()));
    const detail::DescentTable table(tree);
    std::vector<Count> tally(table.nodes.size(), 0);
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto p = points[i];
        if (!tree.root_box().contains(p)) {
            if (policy == OutOfBoxPolicy::strict)
                throw Error(Errc::point_outside_root_box, "point " + std::to_string(i) + " lies outside the root box");
            ++skipped;
            continue;
        }
        table.descend(p, [&](std::size_t k) { ++tally[k]; });
    }
    if (dropped != nullptr) *dropped = skipped;
    CountMap counts;
    for (std::size_t k = 0; k < table.nodes.size(); ++k) counts.emplace(table.nodes[k].label, tally[k]);
    return Srp(tree, std::move(counts));
}

struct LeafRecord {
    NodeLabel label;
    Box box;
    Count count = 0;
    double volume = 0.0;
    double height = 0.0;
};

/// Piecewise-constant density: count / (n * volume) on each leaf cell.
class Histogram {
public:
    Histogram() = default;

    explicit Histogram(const Srp& s) : tree_(s.tree()), n_(s.n()) {
        if (n_ == 0) throw Error(Errc::empty_sample, "histogram needs at least one point");
        for (const auto& label : tree_.leaves()) {
            LeafRecord rec{label, tree_.cell_box(label), s.count(label), 0.0, 0.0};
            rec.volume = rec.box.volume();
            rec.height = static_cast<double>(rec.count) / (static_cast<double>(n_) * rec.volume);
            index_.emplace(label, leaves_.size());
            leaves_.push_back(std::move(rec));
        }
    }

    const Box& root_box() const noexcept { return tree_.root_box(); }
    const RPTree& tree() const noexcept { return tree_; }
    Count n() const noexcept { return n_; }
    std::size_t dim() const noexcept { return tree_.dim(); }
    /// Leaves in ascending label order.
    const std::vector<LeafRecord>& leaves() const noexcept { return leaves_; }

    const LeafRecord* leaf_at(std::span<const double> p) const {
        const auto label = tree_.leaf_containing(p);
        if (!label) return nullptr;
        return &leaves_[index_.at(*label)];
    }

    double density_at(std::span<const double> p) const {
        if (p.size() != dim()) throw Error(Errc::dimension_mismatch, "point dimension does not match histogram");
        const LeafRecord* rec = leaf_at(p);
        return rec == nullptr ? 0.0 : rec->height;
    }

    /// Sum of height * volume over leaves.
    double total_mass() const noexcept {
        double m = 0.0;
        for (const auto& rec : leaves_) m += rec.height * rec.volume;
        return m;
    }

    nlohmann::json to_json() const {
        nlohmann::json box = nlohmann::json::array();
        for (const auto& iv : root_box().intervals()) box.push_back({iv.lo, iv.hi});
        nlohmann::json leaves = nlohmann::json::array();
        for (const auto& rec : leaves_)
            leaves.push_back({{"label", rec.label.to_string()},
                              {"count", rec.count},
                              {"volume", rec.volume},
                              {"height", rec.height}});
        return {{"schema", "srphist.histogram"},
                {"version", kSchemaVersion},
                {"dim", dim()},
                {"root_box", std::move(box)},
                {"n", n_},
                {"leaves", std::move(leaves)}};
    }

    /// Rebuilds from `to_json` output. Cell boxes and volumes are re-derived
    /// from the labels; a stored volume that disagrees is a parse error.
    static Histogram from_json(const nlohmann::json& j) {
        try {
            if (j.at("schema").get<std::string>() != "srphist.histogram")
                throw Error(Errc::parse_error, "not a histogram document");
            if (j.at("version").get<int>() != kSchemaVersion)
                throw Error(Errc::parse_error, "unsupported histogram schema version");
            std::vector<Interval> sides;
            for (const auto& side : j.at("root_box")) sides.emplace_back(side.at(0).get<double>(), side.at(1).get<double>());
            Box root(std::move(sides));
            CountMap leaf_counts;
            for (const auto& leaf : j.at("leaves"))
                leaf_counts.emplace(NodeLabel::from_string(leaf.at("label").get<std::string>()),
                                    leaf.at("count").get<Count>());
            std::vector<NodeLabel> labels;
            for (const auto& [label, c] : leaf_counts) labels.push_back(label);
            RPTree tree = RPTree::from_leaves(root, labels);
            CountMap counts = leaf_counts;
            const auto& nodes = tree.nodes();
            for (auto it = nodes.rbegin(); it != nodes.rend(); ++it)
                if (!tree.is_leaf(*it)) counts[*it] = counts.at(it->left()) + counts.at(it->right());
            Histogram h(Srp(std::move(tree), std::move(counts)));
            if (h.n() != j.at("n").get<Count>()) throw Error(Errc::parse_error, "leaf counts do not sum to n");
            for (const auto& leaf : j.at("leaves")) {
                const auto label = NodeLabel::from_string(leaf.at("label").get<std::string>());
                const double stored = leaf.at("volume").get<double>();
                const double derived = h.leaves_[h.index_.at(label)].volume;
                if (std::abs(stored - derived) > 1e-9 * std::abs(derived))
                    throw Error(Errc::parse_error, "stored volume disagrees with label geometry at " + label.to_string());
            }
            return h;
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse_error, e.what());
        }
    }

    static constexpr int kSchemaVersion = 1;

private:
    RPTree tree_;
    Count n_ = 0;
    std::vector<LeafRecord> leaves_;
    std::unordered_map<NodeLabel, std::size_t, NodeLabelHash> index_;
};

inline Histogram histogram(const Srp& s) { return Histogram(s); }

inline double density_at(const Histogram& h, std::span<const double> p) { return h.density_at(p); }

/// Log-likelihood of the sample under the SRP histogram; empty leaves add 0.
inline double log_likelihood(const Srp& s) {
    const Count n = s.n();
    if (n == 0) throw Error(Errc::empty_sample, "log-likelihood needs at least one point");
    double ll = 0.0;
    for (const auto& leaf : s.leaves()) {
        const Count c = s.count(leaf);
        if (c == 0) continue;
        const double cd = static_cast<double>(c);
        ll += cd * std::log(cd / (static_cast<double>(n) * s.volume(leaf)));
    }
    return ll;
}

}  // namespace srphist
