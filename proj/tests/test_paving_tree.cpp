#include <gtest/gtest.h>

#include <set>
#include <sstream>
#include <vector>

#include "support.hpp"

using namespace srphist;

namespace {

std::set<NodeLabel> labels(std::initializer_list<unsigned> xs) {
    std::set<NodeLabel> out;
    for (unsigned x : xs) out.insert(NodeLabel(x));
    return out;
}

}  // namespace

TEST(RPTree, CellBoxes) {
    const RPTree t(Box::cube(2, 0, 1));
    EXPECT_EQ(cell_box(t, NodeLabel(3)), (Box{{0.5, 1}, {0, 1}}));
    EXPECT_EQ(cell_box(t, NodeLabel(5)), (Box{{0, 0.5, false, true}, {0.5, 1}}));
    EXPECT_EQ(cell_box(t, NodeLabel(1)), Box::cube(2, 0, 1));
}

TEST(RPTree, SplitAndMerge) {
    RPTree t(Box::cube(2, 0, 1));
    t = split(t, NodeLabel(1));
    EXPECT_EQ(t.nodes(), labels({1, 2, 3}));
    const RPTree three_leaves = split(t, NodeLabel(2));
    EXPECT_EQ(three_leaves.nodes(), labels({1, 2, 3, 4, 5}));
    EXPECT_EQ(leaves(three_leaves), labels({3, 4, 5}));
    try {
        (void)split(t, NodeLabel(4));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::not_a_leaf);
    }
    EXPECT_EQ(merge(t, NodeLabel(1)).nodes(), labels({1}));
    EXPECT_EQ(merge(three_leaves, NodeLabel(2)), t);
    try {
        (void)merge(three_leaves, NodeLabel(1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::not_a_cherry);
    }
    EXPECT_EQ(leaves(RPTree(Box::cube(2, 0, 1))), labels({1}));
    EXPECT_EQ(leaves(t), labels({2, 3}));
}

TEST(RPTree, FromLeavesValidatesShape) {
    const Box unit = Box::cube(2, 0, 1);
    EXPECT_EQ(RPTree::from_leaves(unit, labels({3, 4, 5})).nodes(), labels({1, 2, 3, 4, 5}));
    EXPECT_THROW(RPTree::from_leaves(unit, labels({3, 4})), Error);
    EXPECT_THROW(RPTree::from_nodes(unit, labels({1, 2})), Error);
}

TEST(RPTree, SplitMergeRandomEditsRoundTrip) {
    testkit::Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        RPTree t = testkit::random_tree(rng, Box::cube(3, -1, 1), rng() % 40);
        for (int step = 0; step < 50; ++step) {
            const std::vector<NodeLabel> ls(t.leaves().begin(), t.leaves().end());
            const NodeLabel v = ls[rng() % ls.size()];
            EXPECT_EQ(merge(split(t, v), v), t);
            const auto internal = t.internal_nodes();
            std::vector<NodeLabel> cherries;
            for (const auto& u : internal)
                if (t.is_cherry(u)) cherries.push_back(u);
            if (!cherries.empty()) {
                const NodeLabel u = cherries[rng() % cherries.size()];
                EXPECT_EQ(split(merge(t, u), u), t);
            }
            t = rng() % 2 ? split(t, v) : (cherries.empty() ? t : merge(t, cherries[rng() % cherries.size()]));
        }
    }
}

TEST(RPTree, LeavesPartitionRootBox) {
    testkit::Rng rng(22);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t d = 1 + rng() % 4;
        const Box root = Box::cube(d, -2.0, 5.0);
        const RPTree t = testkit::random_tree(rng, root, rng() % 60);
        double vol = 0.0;
        for (const auto& l : t.leaves()) vol += t.cell_volume(l);
        EXPECT_NEAR(vol, root.volume(), 1e-9 * root.volume());
        const PointSet pts = testkit::uniform_points(rng, 200, root);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const NodeLabel expect = testkit::scan_leaf(t, pts[i]);
            EXPECT_EQ(t.leaf_containing(pts[i]), expect);
        }
    }
}

TEST(RPTree, DeepPathsBeyondWordSize) {
    RPTree t(Box::cube(1, 0, 1));
    NodeLabel v = NodeLabel::root();
    for (int k = 0; k < 100; ++k) {
        t.split(v);
        v = v.left();
    }
    EXPECT_EQ(v.depth(), 100u);
    EXPECT_TRUE(t.is_leaf(v));
    EXPECT_DOUBLE_EQ(t.cell_volume(v), std::ldexp(1.0, -100));
}

TEST(RPTree, TextRoundTrip) {
    testkit::Rng rng(23);
    const RPTree t = testkit::random_tree(rng, Box{{-1.25, 3.5}, {0.1, 0.7}}, 30);
    std::stringstream ss;
    write_tree_text(ss, t);
    EXPECT_EQ(read_tree_text(ss), t);
    std::stringstream bad("rptree 2\nbox 0 1\n");
    EXPECT_THROW(read_tree_text(bad), Error);
}
