#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "node_label.hpp"

namespace srphist {

inline constexpr std::size_t kDefaultMaxDepth = 1000;

/// Regular paving of a root box: a prefix-closed set of node labels in which
/// every node has zero or two children. Cell boxes are derived from labels on
/// demand; nothing geometric is stored per node.
class RPTree {
public:
    RPTree() : RPTree(Box::cube(1, 0.0, 1.0)) {}

    explicit RPTree(Box root_box) : root_box_(std::move(root_box)) {
        nodes_.insert(NodeLabel::root());
        leaves_.insert(NodeLabel::root());
    }

    /// Rebuilds a tree from its leaf labels. Throws invalid_argument unless
    /// the labels are exactly the leaves of a full binary tree.
    template <typename Range>
    static RPTree from_leaves(Box root_box, const Range& leaf_labels) {
        RPTree t(std::move(root_box));
        t.nodes_.clear();
        t.leaves_.clear();
        for (const NodeLabel& leaf : leaf_labels) {
            if (!t.leaves_.insert(leaf).second)
                throw Error(Errc::invalid_argument, "duplicate leaf label " + leaf.to_string());
            NodeLabel cur = leaf;
            while (t.nodes_.insert(cur).second && !cur.is_root()) cur.pop_bit();
        }
        if (t.leaves_.empty()) throw Error(Errc::invalid_argument, "a tree needs at least one leaf");
        t.check_full_binary();
        return t;
    }

    /// Rebuilds a tree from its full node set.
    template <typename Range>
    static RPTree from_nodes(Box root_box, const Range& node_labels) {
        RPTree t(std::move(root_box));
        t.nodes_ = std::set<NodeLabel>(std::begin(node_labels), std::end(node_labels));
        t.leaves_.clear();
        if (!t.nodes_.contains(NodeLabel::root())) throw Error(Errc::invalid_argument, "node set lacks the root");
        for (const auto& n : t.nodes_) {
            if (!n.is_root() && !t.nodes_.contains(n.parent()))
                throw Error(Errc::invalid_argument, "node set is not prefix-closed at " + n.to_string());
            if (!t.nodes_.contains(n.left())) t.leaves_.insert(n);
        }
        t.check_full_binary();
        return t;
    }

    const Box& root_box() const noexcept { return root_box_; }
    std::size_t dim() const noexcept { return root_box_.dim(); }

    const std::set<NodeLabel>& nodes() const noexcept { return nodes_; }
    /// Leaves in ascending label order.
    const std::set<NodeLabel>& leaves() const noexcept { return leaves_; }
    std::size_t leaf_count() const noexcept { return leaves_.size(); }
    std::size_t node_count() const noexcept { return nodes_.size(); }

    std::vector<NodeLabel> internal_nodes() const {
        std::vector<NodeLabel> out;
        for (const auto& n : nodes_)
            if (!leaves_.contains(n)) out.push_back(n);
        return out;
    }

    bool contains(const NodeLabel& n) const { return nodes_.contains(n); }
    bool is_leaf(const NodeLabel& n) const { return leaves_.contains(n); }

    /// Internal node whose two children are both leaves.
    bool is_cherry(const NodeLabel& n) const {
        return nodes_.contains(n) && !leaves_.contains(n) && leaves_.contains(n.left()) &&
               leaves_.contains(n.right());
    }

    void split(const NodeLabel& n) {
        if (!leaves_.contains(n)) throw Error(Errc::not_a_leaf, n.to_string() + " is not a leaf");
        leaves_.erase(n);
        auto l = n.left();
        auto r = n.right();
        nodes_.insert(l);
        nodes_.insert(r);
        leaves_.insert(std::move(l));
        leaves_.insert(std::move(r));
    }

    void merge(const NodeLabel& n) {
        if (!is_cherry(n)) throw Error(Errc::not_a_cherry, n.to_string() + " is not a cherry");
        const auto l = n.left();
        const auto r = n.right();
        nodes_.erase(l);
        nodes_.erase(r);
        leaves_.erase(l);
        leaves_.erase(r);
        leaves_.insert(n);
    }

    /// Box of any label (need not be in the tree), by bisecting along its path.
    Box cell_box(const NodeLabel& n) const {
        Box b = root_box_;
        const std::size_t steps = n.depth();
        for (std::size_t s = 0; s < steps; ++s) {
            auto [l, r] = b.bisect();
            b = n.path_bit(s) ? std::move(r) : std::move(l);
        }
        return b;
    }

    double cell_volume(const NodeLabel& n) const { return cell_box(n).volume(); }

    /// Leaf whose cell contains p, or nullopt if p lies outside the root box.
    std::optional<NodeLabel> leaf_containing(std::span<const double> p) const {
        if (!root_box_.contains(p)) return std::nullopt;
        NodeLabel cur = NodeLabel::root();
        Box b = root_box_;
        while (!leaves_.contains(cur)) {
            const SplitPlane plane = split_plane(b);
            auto [l, r] = b.bisect();
            const bool right = plane.goes_right(p);
            b = right ? std::move(r) : std::move(l);
            cur.push_bit(right);
        }
        return cur;
    }

    friend bool operator==(const RPTree& a, const RPTree& b) {
        return a.root_box_ == b.root_box_ && a.nodes_ == b.nodes_;
    }

private:
    void check_full_binary() const {
        for (const auto& n : nodes_) {
            const bool has_l = nodes_.contains(n.left());
            const bool has_r = nodes_.contains(n.right());
            if (has_l != has_r)
                throw Error(Errc::invalid_argument, "node " + n.to_string() + " has exactly one child");
            if (has_l == leaves_.contains(n))
                throw Error(Errc::invalid_argument, "leaf set inconsistent at node " + n.to_string());
        }
    }

    Box root_box_;
    std::set<NodeLabel> nodes_;
    std::set<NodeLabel> leaves_;
};

inline RPTree split(RPTree t, const NodeLabel& n) {
    t.split(n);
    return t;
}

inline RPTree merge(RPTree t, const NodeLabel& n) {
    t.merge(n);
    return t;
}

inline const std::set<NodeLabel>& leaves(const RPTree& t) noexcept { return t.leaves(); }

inline Box cell_box(const RPTree& t, const NodeLabel& n) { return t.cell_box(n); }

/// Text form: a header line, one `box lo hi` line per coordinate, then one
/// decimal leaf label per line in ascending order.
inline void write_tree_text(std::ostream& os, const RPTree& t) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "rptree " << t.dim() << '\n';
    for (const auto& iv : t.root_box().intervals()) buf << "box " << iv.lo << ' ' << iv.hi << '\n';
    for (const auto& leaf : t.leaves()) buf << leaf.to_string() << '\n';
    os << buf.str();
}

inline RPTree read_tree_text(std::istream& is) {
    std::string tag;
    std::size_t dim = 0;
    if (!(is >> tag >> dim) || tag != "rptree" || dim == 0)
        throw Error(Errc::parse_error, "missing 'rptree <dim>' header");
    std::vector<Interval> sides;
    for (std::size_t j = 0; j < dim; ++j) {
        double lo = 0.0;
        double hi = 0.0;
        if (!(is >> tag >> lo >> hi) || tag != "box") throw Error(Errc::parse_error, "malformed box line");
        sides.emplace_back(lo, hi);
    }
    std::vector<NodeLabel> labels;
    std::string token;
    while (is >> token) labels.push_back(NodeLabel::from_string(token));
    return RPTree::from_leaves(Box(std::move(sides)), labels);
}

}  // namespace srphist
