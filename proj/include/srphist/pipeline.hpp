#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <future>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "distributed_builder.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "pqmc.hpp"
#include "random.hpp"
#include "smoothing.hpp"
#include "srp_histogram.hpp"

namespace srphist {

// ---------------------------------------------------------------- CSV input

struct CsvData {
    PointSet points;
    std::size_t skipped_rows = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::optional<double> parse_real(std::string_view field) {
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

}  // namespace detail

/// Parses comma-separated rows of `dim` finite reals (dim = 0 infers it from
/// the first row). Lines starting with '#' and blank lines are ignored; a
/// first row with no numeric field is taken as a header. Malformed rows throw
/// in strict mode and are counted and skipped otherwise.
inline CsvData parse_csv(std::istream& in, std::size_t dim, bool strict) {
    CsvData out;
    std::string line;
    std::size_t line_no = 0;
    bool first_data_line = true;
    std::vector<double> row;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto fields = detail::split_fields(text);
        row.clear();
        bool malformed = false;
        bool any_numeric = false;
        for (const auto f : fields) {
            const auto v = detail::parse_real(f);
            if (v) {
                any_numeric = true;
                row.push_back(*v);
            } else {
                malformed = true;
            }
        }
        if (first_data_line) {
            first_data_line = false;
            if (!any_numeric) continue;  // header
        }
        if (malformed) {
            if (strict) throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": non-numeric field");
            ++out.skipped_rows;
            continue;
        }
        if (dim == 0) dim = row.size();
        if (out.points.dim() == 0) out.points = PointSet(dim);
        if (row.size() != dim) {
            if (strict)
                throw Error(Errc::dimension_mismatch, "line " + std::to_string(line_no) + ": expected " +
                                                          std::to_string(dim) + " fields, got " +
                                                          std::to_string(row.size()));
            ++out.skipped_rows;
            continue;
        }
        out.points.push_back(row);
    }
    if (out.points.empty()) throw Error(Errc::empty_input, "no data rows");
    return out;
}

inline CsvData ingest_csv(const std::string& path, std::size_t dim, bool strict) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    return parse_csv(in, dim, strict);
}

// ---------------------------------------------------------------- pipeline

struct RunConfig {
    std::string input;
    std::size_t dim = 0;
    std::size_t shards = 1;
    /// 0 means one worker thread per shard.
    std::size_t workers = 0;
    double pad = kDefaultPad;
    /// Fixed root box; derived from the data when absent.
    std::optional<Box> root_box;
    /// Leaves of the carved path; 0 means max(1, maxlvs / 10).
    std::size_t carve_leaves = 0;
    std::size_t tributaries = 1;
    /// SEB thresholds; empty means a single threshold ceil(sqrt(n)).
    std::vector<double> maxpts;
    std::size_t maxlvs = 10000;
    double tau_min = 0.1;
    double tau_max = 1e5;
    std::size_t tau_steps = 30;
    std::uint64_t seed = 0;
    std::string output;
    std::size_t max_depth = kDefaultMaxDepth;
    bool strict = false;
    bool sequential = false;
    /// Lowest-label tie breaking; random (seeded) ties otherwise.
    bool deterministic_ties = true;

    std::size_t effective_carve_leaves() const noexcept {
        return carve_leaves != 0 ? carve_leaves : std::max<std::size_t>(1, maxlvs / 10);
    }

    void validate() const {
        if (shards < 1 || tributaries < 1 || maxlvs < 1 || tau_steps < 1)
            throw Error(Errc::invalid_argument, "shards, tributaries, maxlvs and tau steps must be >= 1");
        for (double p : maxpts)
            if (!(p >= 0.0)) throw Error(Errc::invalid_argument, "maxpts values must be >= 0");
        SmoothingConfig::geometric(tau_min, tau_max, tau_steps).validate();
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"input", input},
                         {"dim", dim},
                         {"shards", shards},
                         {"workers", workers},
                         {"pad", pad},
                         {"carve_leaves", effective_carve_leaves()},
                         {"tributaries", tributaries},
                         {"maxpts", maxpts},
                         {"maxlvs", maxlvs},
                         {"tau_min", tau_min},
                         {"tau_max", tau_max},
                         {"tau_steps", tau_steps},
                         {"seed", seed},
                         {"max_depth", max_depth},
                         {"strict", strict},
                         {"sequential", sequential},
                         {"deterministic_ties", deterministic_ties}};
        if (root_box) {
            nlohmann::json box = nlohmann::json::array();
            for (const auto& iv : root_box->intervals()) box.push_back({iv.lo, iv.hi});
            j["root_box"] = std::move(box);
        }
        return j;
    }
};

struct TributaryInfo {
    std::size_t launch_index = 0;  // split count of the carved state it starts from
    double maxpts = 0.0;
    std::size_t states = 0;
    std::size_t final_leaves = 0;
    bool success = true;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineResult {
    Histogram histogram;
    ScoredEstimate estimate;
    Box root_box;
    std::size_t dropped_points = 0;
    std::size_t skipped_rows = 0;
    PqmcPath carve;
    std::vector<std::size_t> launch_indices;
    std::vector<double> maxpts;
    /// paths[g * launch_indices.size() + i]: threshold maxpts[g], launch i.
    std::vector<PqmcPath> paths;
    std::vector<TributaryInfo> tributaries;
    /// Per-iteration builder statistics, one entry per path (parallel mode).
    std::vector<std::vector<IterationStats>> build_traces;
    std::vector<StageTiming> timings;

    nlohmann::json manifest(const RunConfig& cfg) const {
        nlohmann::json tribs = nlohmann::json::array();
        for (const auto& t : tributaries)
            tribs.push_back({{"launch_index", t.launch_index},
                             {"maxpts", t.maxpts},
                             {"states", t.states},
                             {"final_leaves", t.final_leaves},
                             {"success", t.success}});
        nlohmann::json times = nlohmann::json::object();
        for (const auto& t : timings) times[t.stage] = t.seconds;
        return {{"schema", "srphist.manifest"},
                {"version", 1},
                {"config", cfg.to_json()},
                {"seed", cfg.seed},
                {"n", histogram.n()},
                {"skipped_rows", skipped_rows},
                {"dropped_points", dropped_points},
                {"carve_states", carve.size()},
                {"launch_indices", launch_indices},
                {"tributaries", std::move(tribs)},
                {"selected",
                 {{"tau", estimate.tau},
                  {"cv_score", estimate.cv_score},
                  {"penalized_score", estimate.penalized_score},
                  {"leaves", estimate.srp.leaf_count()},
                  {"path_index", estimate.path_index},
                  {"state_index", estimate.state_index}}},
                {"timings_seconds", std::move(times)}};
    }
};

namespace detail {

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}

    void lap(std::string stage) {
        const auto now = std::chrono::steady_clock::now();
        sink_.push_back({std::move(stage), std::chrono::duration<double>(now - start_).count()});
        start_ = now;
    }

private:
    std::vector<StageTiming>& sink_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Carve, launch SEB tributaries (parallel threshold builder + backtracking,
/// or the sequential chain), select by cross-validation, histogram.
inline PipelineResult run_pipeline(const PointSet& sample, const RunConfig& cfg) {
    cfg.validate();
    if (sample.empty()) throw Error(Errc::empty_input, "no points");
    PipelineResult out;
    detail::StageClock clock(out.timings);

    PointSet kept_storage;
    const PointSet* points = &sample;
    if (cfg.root_box) {
        out.root_box = *cfg.root_box;
        if (out.root_box.dim() != sample.dim())
            throw Error(Errc::dimension_mismatch, "root box dimension does not match the data");
        kept_storage = PointSet(sample.dim());
        for (std::size_t i = 0; i < sample.size(); ++i) {
            if (out.root_box.contains(sample[i])) {
                kept_storage.push_back(sample[i]);
            } else if (cfg.strict) {
                throw Error(Errc::point_outside_root_box, "point " + std::to_string(i) + " lies outside the root box");
            } else {
                ++out.dropped_points;
            }
        }
        if (kept_storage.empty()) throw Error(Errc::empty_input, "every point lies outside the root box");
        points = &kept_storage;
    } else {
        out.root_box = bounding_box(sample, cfg.pad);
    }
    const std::size_t n = points->size();
    clock.lap("bounding_box");

    const TieBreak ties = cfg.deterministic_ties ? TieBreak::lowest_label : TieBreak::random;
    PqmcConfig carve_cfg;
    carve_cfg.max_psi = 0.0;
    carve_cfg.max_leaves = cfg.effective_carve_leaves();
    carve_cfg.max_depth = cfg.max_depth;
    carve_cfg.rng_seed = cfg.seed;
    carve_cfg.tie_break = ties;
    out.carve = carve_path(*points, out.root_box, carve_cfg);
    out.launch_indices = launch_indices(out.carve.stopping_time(), cfg.tributaries);
    clock.lap("carve");

    out.maxpts = cfg.maxpts;
    if (out.maxpts.empty()) out.maxpts = {std::ceil(std::sqrt(static_cast<double>(n)))};
    const std::size_t c = out.launch_indices.size();
    out.paths.resize(out.maxpts.size() * c);

    auto sequential_job = [&](std::size_t g, std::size_t i) {
        PqmcConfig seb;
        seb.max_psi = out.maxpts[g];
        seb.max_leaves = cfg.maxlvs;
        seb.max_depth = cfg.max_depth;
        seb.tie_break = ties;
        seb.rng_seed = derive_seed(cfg.seed, 1 + g * c + i);
        return run_pqmc(out.carve.state(out.launch_indices[i]), *points, Priority::seb(), seb);
    };
    if (cfg.sequential) {
        std::vector<std::future<PqmcPath>> jobs;
        for (std::size_t g = 0; g < out.maxpts.size(); ++g)
            for (std::size_t i = 0; i < c; ++i) jobs.push_back(std::async(std::launch::async, sequential_job, g, i));
        for (std::size_t k = 0; k < jobs.size(); ++k) out.paths[k] = jobs[k].get();
    } else {
        BuilderConfig bcfg;
        bcfg.shards = cfg.shards;
        bcfg.workers = cfg.workers;
        bcfg.max_depth = cfg.max_depth;
        bcfg.prune = true;
        bcfg.on_unsplittable = UnsplittablePolicy::retire;
        for (std::size_t g = 0; g < out.maxpts.size(); ++g) {
            for (std::size_t i = 0; i < c; ++i) {
                const RPTree launch = out.carve.state(out.launch_indices[i]).tree();
                BuildResult built = build_threshold_tree(*points, launch, Priority::seb(), out.maxpts[g], bcfg);
                PqmcPath path = reconstruct_path(built).truncated(cfg.maxlvs);
                PqmcConfig check;
                check.max_psi = out.maxpts[g];
                check.max_leaves = cfg.maxlvs;
                check.max_depth = cfg.max_depth;
                path.set_success(is_successful(path.final_state(), Priority::seb(), check));
                out.paths[g * c + i] = std::move(path);
                out.build_traces.push_back(std::move(built.trace));
            }
        }
    }
    for (std::size_t g = 0; g < out.maxpts.size(); ++g)
        for (std::size_t i = 0; i < c; ++i) {
            const auto& p = out.paths[g * c + i];
            out.tributaries.push_back(
                {out.launch_indices[i], out.maxpts[g], p.size(), p.final_state().leaf_count(), p.success()});
        }
    clock.lap("tributaries");

    out.estimate = select(out.paths, SmoothingConfig::geometric(cfg.tau_min, cfg.tau_max, cfg.tau_steps));
    clock.lap("smoothing");
    out.histogram = Histogram(out.estimate.srp);
    clock.lap("histogram");
    return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(Errc::io_error, "cannot write " + path);
    os << text;
    if (!os) throw Error(Errc::io_error, "write failed for " + path);
}

inline std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

/// Reads cfg.input, runs, and writes the histogram JSON to cfg.output plus a
/// manifest next to it.
inline PipelineResult run_pipeline(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    CsvData data = ingest_csv(cfg.input, cfg.dim, cfg.strict);
    const double ingest_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    PipelineResult out = run_pipeline(data.points, cfg);
    out.skipped_rows = data.skipped_rows;
    out.timings.insert(out.timings.begin(), {"ingest", ingest_seconds});
    if (!cfg.output.empty()) {
        write_text_file(cfg.output, out.histogram.to_json().dump(2) + "\n");
        write_text_file(manifest_path(cfg.output), out.manifest(cfg).dump(2) + "\n");
    }
    return out;
}

inline Histogram load_histogram(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, path + ": " + e.what());
    }
    return Histogram::from_json(j);
}

// ---------------------------------------------------------------- evaluation

/// Known density used as ground truth for L1 evaluation.
class ReferenceDensity {
public:
    enum class Kind { gaussian, uniform };

    static ReferenceDensity standard_gaussian(std::size_t dim) { return ReferenceDensity(Kind::gaussian, Box::cube(dim, 0, 1)); }
    static ReferenceDensity uniform(Box support) { return ReferenceDensity(Kind::uniform, std::move(support)); }

    /// "gaussian" or "uniform" (on [lo, hi]^dim).
    static ReferenceDensity parse(std::string_view name, std::size_t dim, double lo = 0.0, double hi = 1.0) {
        if (name == "gaussian") return standard_gaussian(dim);
        if (name == "uniform") return uniform(Box::cube(dim, lo, hi));
        throw Error(Errc::unknown_reference, "unknown reference density '" + std::string(name) + "'");
    }

    Kind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return support_.dim(); }

    double pdf(std::span<const double> x) const {
        if (kind_ == Kind::gaussian) {
            double sq = 0.0;
            for (double v : x) sq += v * v;
            return std::exp(-0.5 * sq - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi));
        }
        return support_.contains(x) ? 1.0 / support_.volume() : 0.0;
    }

    /// Probability mass of a box.
    double box_probability(const Box& b) const {
        double p = 1.0;
        for (std::size_t j = 0; j < b.dim(); ++j) {
            if (kind_ == Kind::gaussian) {
                p *= normal_cdf(b[j].hi) - normal_cdf(b[j].lo);
            } else {
                const double lo = std::max(b[j].lo, support_[j].lo);
                const double hi = std::min(b[j].hi, support_[j].hi);
                p *= hi > lo ? (hi - lo) / width(support_[j]) : 0.0;
            }
        }
        return p;
    }

private:
    ReferenceDensity(Kind kind, Box support) : kind_(kind), support_(std::move(support)) {}

    static double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

    Kind kind_;
    Box support_;
};

struct EvalReport {
    double l1_estimate = 0.0;
    double l1_std_error = 0.0;
    std::size_t samples_per_leaf = 0;
    /// Reference mass outside the histogram's root box.
    double outside_mass = 0.0;
};

/// Monte Carlo estimate of the L1 distance between a histogram and a
/// reference density. The histogram is constant on each leaf, so each leaf
/// integral of |height - f| is estimated from `mc_per_leaf` uniform draws in
/// that leaf; the reference mass outside the root box is added exactly.
inline EvalReport l1_error(const Histogram& h, const ReferenceDensity& ref, std::size_t mc_per_leaf, std::uint64_t seed) {
    if (ref.dim() != h.dim()) throw Error(Errc::dimension_mismatch, "reference dimension does not match histogram");
    if (mc_per_leaf < 1) throw Error(Errc::invalid_argument, "need at least one Monte Carlo draw per leaf");
    EvalReport rep;
    rep.samples_per_leaf = mc_per_leaf;
    rep.outside_mass = std::max(0.0, 1.0 - ref.box_probability(h.root_box()));
    double total = 0.0;
    double variance = 0.0;
    std::vector<double> x(h.dim());
    for (std::size_t k = 0; k < h.leaves().size(); ++k) {
        const LeafRecord& leaf = h.leaves()[k];
        if (leaf.volume <= 0.0) continue;
        CounterRng rng(derive_seed(seed, k + 1));
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t s = 0; s < mc_per_leaf; ++s) {
            for (std::size_t j = 0; j < x.size(); ++j) x[j] = leaf.box[j].lo + rng.uniform() * width(leaf.box[j]);
            const double diff = std::abs(leaf.height - ref.pdf(x));
            sum += diff;
            sum_sq += diff * diff;
        }
        const double m = static_cast<double>(mc_per_leaf);
        const double mean = sum / m;
        total += leaf.volume * mean;
        if (mc_per_leaf > 1) {
            const double var = std::max(0.0, (sum_sq - m * mean * mean) / (m - 1.0));
            variance += leaf.volume * leaf.volume * var / m;
        }
    }
    rep.l1_estimate = std::clamp(total + rep.outside_mass, 0.0, 2.0);
    rep.l1_std_error = std::sqrt(variance);
    return rep;
}

// ---------------------------------------------------------------- plotting

enum class PlotFormat { rectangles, leaf_table };

/// d = 2: one `x0,y0,x1,y1,height` row per leaf. Otherwise a generic leaf
/// table with per-coordinate bounds.
inline PlotFormat write_plot_data(const Histogram& h, std::ostream& os) {
    std::ostringstream buf;
    buf.precision(17);
    if (h.dim() == 2) {
        buf << "x0,y0,x1,y1,height\n";
        for (const auto& leaf : h.leaves())
            buf << leaf.box[0].lo << ',' << leaf.box[1].lo << ',' << leaf.box[0].hi << ',' << leaf.box[1].hi << ','
                << leaf.height << '\n';
        os << buf.str();
        return PlotFormat::rectangles;
    }
    buf << "label,count,volume,height";
    for (std::size_t j = 0; j < h.dim(); ++j) buf << ",lo" << j << ",hi" << j;
    buf << '\n';
    for (const auto& leaf : h.leaves()) {
        buf << leaf.label.to_string() << ',' << leaf.count << ',' << leaf.volume << ',' << leaf.height;
        for (const auto& iv : leaf.box.intervals()) buf << ',' << iv.lo << ',' << iv.hi;
        buf << '\n';
    }
    os << buf.str();
    return PlotFormat::leaf_table;
}

inline PlotFormat export_plot_data(const Histogram& h, const std::string& path) {
    std::ostringstream os;
    const PlotFormat fmt = write_plot_data(h, os);
    write_text_file(path, os.str());
    return fmt;
}

}  // namespace srphist
