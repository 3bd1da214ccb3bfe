#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "support.hpp"

using namespace srphist;

namespace {

PqmcConfig cfg_with(double max_psi, std::size_t max_leaves = SIZE_MAX, TieBreak tb = TieBreak::lowest_label) {
    PqmcConfig c;
    c.max_psi = max_psi;
    c.max_leaves = max_leaves;
    c.tie_break = tb;
    return c;
}

/// Termination disjunction and per-step structure for any path.
void check_path(const PqmcPath& path, const PqmcConfig& cfg, Priority pr) {
    const auto states = path.states();
    ASSERT_EQ(states.size(), path.size());
    for (std::size_t t = 0; t < states.size(); ++t) {
        EXPECT_EQ(states[t].leaf_count(), states[0].leaf_count() + t);
        EXPECT_EQ(states[t], path.state(t));
    }
    const Srp& fin = path.final_state();
    const auto split_set = splittable_leaves(fin, cfg);
    double top = -1.0;
    for (const auto& l : split_set) top = std::max(top, pr(fin.count(l), fin.volume(l), fin.n()));
    const bool none = split_set.empty();
    const bool below = cfg.stop_on_psi && top <= cfg.max_psi;
    const bool full = fin.leaf_count() >= cfg.max_leaves;
    EXPECT_TRUE(none || below || full);
}

}  // namespace

TEST(Priority, Values) {
    EXPECT_EQ(Priority::seb()(7, 0.25, 10), 7.0);
    EXPECT_DOUBLE_EQ(Priority::spc()(2, 0.5, 10), 0.4);
    EXPECT_EQ(Priority::spc()(10, 1.0, 10), 0.0);
}

TEST(Splittable, Rules) {
    const Srp s = ingest(testkit::three_leaf_tree(), testkit::ten_points());
    EXPECT_EQ(splittable_leaves(s, PqmcConfig{}), (std::set<NodeLabel>{NodeLabel(3), NodeLabel(4), NodeLabel(5)}));
    const Srp sparse = ingest(testkit::three_leaf_tree(), PointSet(2, {{0.9, 0.9}, {0.2, 0.9}}));
    EXPECT_EQ(splittable_leaves(sparse, PqmcConfig{}), (std::set<NodeLabel>{NodeLabel(3), NodeLabel(5)}));
    PqmcConfig shallow;
    shallow.max_depth = 2;
    EXPECT_EQ(splittable_leaves(s, shallow), (std::set<NodeLabel>{NodeLabel(3)}));
}

TEST(RunPqmc, StopsImmediatelyWhenBelowThreshold) {
    const PointSet pts = testkit::ten_points();
    const Srp s = ingest(testkit::three_leaf_tree(), pts);
    const PqmcPath p = run_pqmc(s, pts, Priority::seb(), cfg_with(5));
    EXPECT_EQ(p.size(), 1u);
    EXPECT_EQ(p.stop_reason(), StopReason::threshold);
    EXPECT_TRUE(p.success());
}

TEST(RunPqmc, LeafBudgetOfOne) {
    testkit::Rng rng(41);
    const PointSet pts = testkit::uniform_points(rng, 10, Box::cube(2, 0, 1));
    const PqmcPath p = run_pqmc(ingest(RPTree(Box::cube(2, 0, 1)), pts), pts, Priority::seb(), cfg_with(0, 1));
    EXPECT_EQ(p.size(), 1u);
    EXPECT_EQ(p.stop_reason(), StopReason::max_leaves);
}

TEST(RunPqmc, EightPointsInOneOrthantMatchHandSimulation) {
    const PointSet pts(2, {{0.05, 0.1}, {0.1, 0.3}, {0.2, 0.05}, {0.3, 0.35},
                           {0.35, 0.2}, {0.4, 0.45}, {0.45, 0.1}, {0.15, 0.4}});
    const Box unit = Box::cube(2, 0, 1);
    const PqmcPath p = run_pqmc(ingest(RPTree(unit), pts), pts, Priority::seb(), cfg_with(2));
    const auto oracle = testkit::oracle_chain(RPTree(unit), pts, PriorityKind::seb, 2, SIZE_MAX, kDefaultMaxDepth);
    EXPECT_EQ(p.splits(), oracle);
    // root (8), left half (8), lower-left quadrant (8), then its children
    ASSERT_GE(p.splits().size(), 3u);
    EXPECT_EQ(p.splits()[0], NodeLabel(1));
    EXPECT_EQ(p.splits()[1], NodeLabel(2));
    EXPECT_EQ(p.splits()[2], NodeLabel(4));
    for (const auto& l : p.final_state().leaves()) EXPECT_LE(p.final_state().count(l), 2u);
    check_path(p, cfg_with(2), Priority::seb());
}

TEST(RunPqmc, MatchesOracleOnRandomData) {
    testkit::Rng rng(42);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t d = 1 + rng() % 3;
        const PointSet pts = testkit::clustered_points(rng, 20 + rng() % 200, d);
        const Box root = bounding_box(pts);
        const bool seb = rng() % 2;
        const PriorityKind kind = seb ? PriorityKind::seb : PriorityKind::spc;
        const double max_psi = seb ? static_cast<double>(1 + rng() % 20) : 0.0;
        const std::size_t max_leaves = 2 + rng() % 40;
        PqmcConfig cfg = cfg_with(max_psi, max_leaves);
        cfg.stop_on_psi = seb;
        const Priority pr = seb ? Priority::seb() : Priority::spc();
        const PqmcPath p = run_pqmc(ingest(RPTree(root), pts), pts, pr, cfg);
        EXPECT_EQ(p.splits(), testkit::oracle_chain(RPTree(root), pts, kind, max_psi, max_leaves, kDefaultMaxDepth, seb));
        check_path(p, cfg, pr);
        EXPECT_EQ(p.final_state(), ingest(p.final_state().tree(), pts));
    }
}

TEST(RunPqmc, DeterministicAndSeeded) {
    testkit::Rng rng(43);
    const PointSet pts = testkit::uniform_points(rng, 300, Box::cube(2, 0, 1));
    const Srp root = ingest(RPTree(Box::cube(2, 0, 1)), pts);
    PqmcConfig cfg = cfg_with(10, SIZE_MAX, TieBreak::random);
    cfg.rng_seed = 99;
    const PqmcPath a = run_pqmc(root, pts, Priority::seb(), cfg);
    const PqmcPath b = run_pqmc(root, pts, Priority::seb(), cfg);
    EXPECT_EQ(a, b);
    check_path(a, cfg, Priority::seb());
    // the threshold tree does not depend on the tie-break realisation
    cfg.rng_seed = 7;
    EXPECT_EQ(run_pqmc(root, pts, Priority::seb(), cfg).final_state(), a.final_state());
}

TEST(RunPqmc, SuccessFlag) {
    testkit::Rng rng(44);
    const PointSet pts = testkit::uniform_points(rng, 500, Box::cube(2, 0, 1));
    const Srp root = ingest(RPTree(Box::cube(2, 0, 1)), pts);
    const PqmcPath ok = run_pqmc(root, pts, Priority::seb(), cfg_with(50));
    EXPECT_TRUE(ok.success());
    EXPECT_TRUE(is_successful(ok.final_state(), Priority::seb(), cfg_with(50)));
    const PqmcPath capped = run_pqmc(root, pts, Priority::seb(), cfg_with(50, 4));
    EXPECT_FALSE(capped.success());
    EXPECT_EQ(capped.final_state().leaf_count(), 4u);
}

TEST(RunPqmc, RejectsInconsistentStart) {
    const PointSet pts = testkit::ten_points();
    const Srp s = Srp::root_only(Box::cube(2, 0, 1), 3);
    EXPECT_THROW(run_pqmc(s, pts, Priority::seb(), cfg_with(1)), Error);
}

TEST(CarvePath, UniformDataSplitsRootFirst) {
    testkit::Rng rng(45);
    const PointSet pts = testkit::uniform_points(rng, 1000, Box::cube(2, 0, 1));
    const PqmcPath p = carve_path(pts, Box::cube(2, 0, 1), cfg_with(0, 2));
    EXPECT_EQ(p.splits(), std::vector<NodeLabel>{NodeLabel(1)});
    EXPECT_THROW(carve_path(pts, Box::cube(2, 0, 1), cfg_with(1, 2)), Error);
}

TEST(CarvePath, PrefixProperty) {
    testkit::Rng rng(46);
    const PointSet pts = testkit::clustered_points(rng, 2000, 2);
    const Box root = bounding_box(pts);
    const PqmcPath p20 = carve_path(pts, root, cfg_with(0, 20));
    const PqmcPath p40 = carve_path(pts, root, cfg_with(0, 40));
    EXPECT_EQ(p40.state(19), p20.final_state());
    EXPECT_EQ(p20.final_state().leaf_count(), 20u);
}

TEST(CarvePath, CarvesMoreEmptySpaceThanSeb) {
    testkit::Rng rng(47);
    // strongly correlated data along the diagonal
    PointSet pts(2);
    std::normal_distribution<double> z;
    for (int i = 0; i < 3000; ++i) {
        const double t = z(rng);
        pts.push_back(std::vector<double>{t, t + 0.1 * z(rng)});
    }
    const Box root = bounding_box(pts);
    const Srp carved = carve_path(pts, root, cfg_with(0, 20)).final_state();
    const Srp seb = run_pqmc(ingest(RPTree(root), pts), pts, Priority::seb(), cfg_with(0, 20)).final_state();
    auto empty_fraction = [](const Srp& s) {
        std::size_t e = 0;
        for (const auto& l : s.leaves()) e += s.count(l) == 0;
        return static_cast<double>(e) / static_cast<double>(s.leaf_count());
    };
    EXPECT_GT(empty_fraction(carved), empty_fraction(seb));
}

TEST(LaunchStates, EvenSpacing) {
    EXPECT_EQ(launch_indices(40, 5), (std::vector<std::size_t>{0, 10, 20, 30, 40}));
    EXPECT_EQ(launch_indices(40, 1), (std::vector<std::size_t>{0}));
    EXPECT_EQ(launch_indices(3, 10), (std::vector<std::size_t>{0, 1, 2, 3}));
    EXPECT_EQ(launch_indices(7, 3), (std::vector<std::size_t>{0, 3, 7}));
    EXPECT_THROW(launch_indices(3, 0), Error);
}

TEST(JointExploration, RootTributaryIsPlainSeb) {
    testkit::Rng rng(48);
    const PointSet pts = testkit::clustered_points(rng, 1500, 2);
    const Box root = bounding_box(pts);
    PqmcConfig carve = cfg_with(0, 30, TieBreak::random);
    carve.rng_seed = 5;
    PqmcConfig seb = cfg_with(40, SIZE_MAX, TieBreak::random);
    seb.rng_seed = 17;
    for (std::size_t c : {1u, 4u}) {
        const JointExploration j = joint_exploration(pts, root, carve, seb, c);
        ASSERT_EQ(j.tributaries.size(), c);
        EXPECT_EQ(j.launch_indices.front(), 0u);
        const PqmcPath plain = run_pqmc(ingest(RPTree(root), pts), pts, Priority::seb(), seb);
        EXPECT_EQ(j.tributaries.front(), plain);
        for (std::size_t i = 0; i < c; ++i) EXPECT_EQ(j.tributaries[i].initial(), j.carve.state(j.launch_indices[i]));
    }
}

TEST(PqmcPath, Truncation) {
    testkit::Rng rng(49);
    const PointSet pts = testkit::uniform_points(rng, 400, Box::cube(2, 0, 1));
    const PqmcPath p = run_pqmc(ingest(RPTree(Box::cube(2, 0, 1)), pts), pts, Priority::seb(), cfg_with(20));
    const PqmcPath t = p.truncated(7);
    EXPECT_EQ(t.final_state().leaf_count(), 7u);
    EXPECT_EQ(t.final_state(), p.state(6));
    EXPECT_EQ(p.truncated(100000), p);
    EXPECT_EQ(p.truncated(1).size(), 1u);
}
