#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "error.hpp"
#include "pqmc.hpp"
#include "srp_histogram.hpp"

namespace srphist {

struct SmoothingConfig {
    /// Strictly increasing, positive.
    std::vector<double> tau_grid;

    static SmoothingConfig geometric(double lo, double hi, std::size_t steps) {
        if (!(lo > 0.0) || !(hi >= lo) || steps == 0)
            throw Error(Errc::invalid_tau, "tau grid needs 0 < lo <= hi and at least one step");
        SmoothingConfig cfg;
        if (steps == 1 || lo == hi) {
            cfg.tau_grid = {lo};
            return cfg;
        }
        const double ratio = std::log(hi / lo) / static_cast<double>(steps - 1);
        for (std::size_t i = 0; i < steps; ++i)
            cfg.tau_grid.push_back(i + 1 == steps ? hi : lo * std::exp(ratio * static_cast<double>(i)));
        return cfg;
    }

    static SmoothingConfig defaults() { return geometric(0.1, 1e5, 30); }

    void validate() const {
        if (tau_grid.empty()) throw Error(Errc::invalid_tau, "tau grid is empty");
        for (std::size_t i = 0; i < tau_grid.size(); ++i) {
            if (!(tau_grid[i] > 0.0) || !std::isfinite(tau_grid[i]))
                throw Error(Errc::invalid_tau, "tau values must be positive and finite");
            if (i > 0 && !(tau_grid[i] > tau_grid[i - 1]))
                throw Error(Errc::invalid_tau, "tau grid must be strictly increasing");
        }
    }
};

struct ScoredEstimate {
    Srp srp;
    double tau = 0.0;
    /// log-likelihood - leaves / tau
    double penalized_score = 0.0;
    double cv_score = 0.0;
    std::size_t path_index = 0;
    std::size_t state_index = 0;
};

inline double penalized_score(const Srp& s, double tau) {
    if (!(tau > 0.0) || std::isnan(tau)) throw Error(Errc::invalid_tau, "tau must be > 0");
    return log_likelihood(s) - static_cast<double>(s.leaf_count()) / tau;
}

/// Leave-one-out cross-validation estimate of the L2 risk with the partition
/// held fixed:  sum c^2 / (n^2 v)  -  2 / (n (n - 1)) * sum c (c - 1) / v.
inline double cv_score(const Srp& s) {
    const Count n = s.n();
    if (n < 2) throw Error(Errc::insufficient_data, "cross-validation needs at least two points");
    const double nd = static_cast<double>(n);
    double squares = 0.0;
    double pairs = 0.0;
    for (const auto& leaf : s.leaves()) {
        const double c = static_cast<double>(s.count(leaf));
        if (c == 0.0) continue;
        const double v = s.volume(leaf);
        squares += c * c / v;
        pairs += c * (c - 1.0) / v;
    }
    return squares / (nd * nd) - 2.0 * pairs / (nd * (nd - 1.0));
}

namespace detail {

/// Log-likelihood, leaf count and CV score of every state of a path,
/// accumulated split by split.
struct PathProfile {
    std::vector<double> log_lik;
    std::vector<std::size_t> leaves;
    std::vector<double> cv;
};

inline PathProfile profile(const PqmcPath& path) {
    const Srp& init = path.initial();
    const Srp& fin = path.final_state();
    const double n = static_cast<double>(init.n());
    if (init.n() == 0) throw Error(Errc::empty_sample, "path over an empty sample");
    auto ll_term = [n](double c, double v) { return c > 0.0 ? c * std::log(c / (n * v)) : 0.0; };
    auto sq_term = [](double c, double v) { return c > 0.0 ? c * c / v : 0.0; };
    auto pair_term = [](double c, double v) { return c > 1.0 ? c * (c - 1.0) / v : 0.0; };

    double ll = 0.0;
    double squares = 0.0;
    double pairs = 0.0;
    for (const auto& leaf : init.leaves()) {
        const double c = static_cast<double>(init.count(leaf));
        const double v = init.volume(leaf);
        ll += ll_term(c, v);
        squares += sq_term(c, v);
        pairs += pair_term(c, v);
    }
    const double pair_scale = n > 1.0 ? 2.0 / (n * (n - 1.0)) : std::numeric_limits<double>::quiet_NaN();
    PathProfile out;
    const std::size_t m0 = init.leaf_count();
    auto record = [&](std::size_t t) {
        out.log_lik.push_back(ll);
        out.leaves.push_back(m0 + t);
        out.cv.push_back(squares / (n * n) - pair_scale * pairs);
    };
    record(0);
    const RPTree& tree = fin.tree();
    for (std::size_t t = 0; t < path.splits().size(); ++t) {
        const NodeLabel& v = path.splits()[t];
        const Box pbox = tree.cell_box(v);
        auto [lbox, rbox] = pbox.bisect();
        const double vp = pbox.volume();
        const double cp = static_cast<double>(fin.count(v));
        const double cl = static_cast<double>(fin.count(v.left()));
        const double cr = static_cast<double>(fin.count(v.right()));
        ll += ll_term(cl, lbox.volume()) + ll_term(cr, rbox.volume()) - ll_term(cp, vp);
        squares += sq_term(cl, lbox.volume()) + sq_term(cr, rbox.volume()) - sq_term(cp, vp);
        pairs += pair_term(cl, lbox.volume()) + pair_term(cr, rbox.volume()) - pair_term(cp, vp);
        record(t + 1);
    }
    return out;
}

/// Lexicographic comparison of ascending leaf-label lists.
inline bool leaf_labels_less(const Srp& a, const Srp& b) {
    return std::lexicographical_compare(a.leaves().begin(), a.leaves().end(), b.leaves().begin(), b.leaves().end());
}

struct Candidate {
    std::size_t path = 0;
    std::size_t state = 0;
};

/// argmax of penalized score over all states; ties go to fewer leaves, then
/// the lexicographically smaller leaf-label list.
inline Candidate argmax_penalized(std::span<const PqmcPath> paths, std::span<const PathProfile> profiles,
                                  double tau) {
    Candidate best;
    bool have = false;
    double best_score = 0.0;
    std::size_t best_leaves = 0;
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto& prof = profiles[p];
        for (std::size_t t = 0; t < prof.log_lik.size(); ++t) {
            const double score = prof.log_lik[t] - static_cast<double>(prof.leaves[t]) / tau;
            bool better = !have || score > best_score;
            if (have && score == best_score) {
                if (prof.leaves[t] != best_leaves)
                    better = prof.leaves[t] < best_leaves;
                else
                    better = leaf_labels_less(paths[p].state(t), paths[best.path].state(best.state));
            }
            if (better) {
                have = true;
                best = {p, t};
                best_score = score;
                best_leaves = prof.leaves[t];
            }
        }
    }
    return best;
}

inline ScoredEstimate make_estimate(std::span<const PqmcPath> paths, Candidate c, double tau) {
    ScoredEstimate out;
    out.srp = paths[c.path].state(c.state);
    out.tau = tau;
    out.penalized_score = penalized_score(out.srp, tau);
    out.cv_score = out.srp.n() >= 2 ? cv_score(out.srp) : std::numeric_limits<double>::quiet_NaN();
    out.path_index = c.path;
    out.state_index = c.state;
    return out;
}

}  // namespace detail

/// MAP state at a fixed tau across every state of every path.
inline ScoredEstimate map_estimate(std::span<const PqmcPath> paths, double tau) {
    if (!(tau > 0.0) || std::isnan(tau)) throw Error(Errc::invalid_tau, "tau must be > 0");
    if (paths.empty()) throw Error(Errc::empty_candidate_set, "no candidate paths");
    std::vector<detail::PathProfile> profiles;
    for (const auto& p : paths) profiles.push_back(detail::profile(p));
    return detail::make_estimate(paths, detail::argmax_penalized(paths, profiles, tau), tau);
}

/// For each tau: MAP state, then its CV score; returns the minimum-CV
/// estimate (ties resolved toward the smaller tau).
inline ScoredEstimate select(std::span<const PqmcPath> paths, const SmoothingConfig& cfg) {
    cfg.validate();
    if (paths.empty()) throw Error(Errc::empty_candidate_set, "no candidate paths");
    std::vector<detail::PathProfile> profiles;
    for (const auto& p : paths) profiles.push_back(detail::profile(p));
    if (paths.front().initial().n() < 2) throw Error(Errc::insufficient_data, "cross-validation needs two points");
    detail::Candidate best;
    double best_tau = 0.0;
    double best_cv = std::numeric_limits<double>::infinity();
    for (double tau : cfg.tau_grid) {
        const auto c = detail::argmax_penalized(paths, profiles, tau);
        const double cv = profiles[c.path].cv[c.state];
        if (cv < best_cv) {
            best_cv = cv;
            best = c;
            best_tau = tau;
        }
    }
    return detail::make_estimate(paths, best, best_tau);
}

}  // namespace srphist
