// srphist command-line front end: build, eval, plot, sample.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "srphist.hpp"

namespace {

using namespace srphist;

struct EvalArgs {
    std::string hist;
    std::string reference = "gaussian";
    std::size_t mc = 256;
    std::uint64_t seed = 0;
    double uniform_lo = 0.0;
    double uniform_hi = 1.0;
};

struct PlotArgs {
    std::string hist;
    std::string out;
};

struct SampleArgs {
    std::string distribution = "gaussian";
    std::size_t n = 1000;
    std::size_t dim = 2;
    std::uint64_t seed = 0;
    std::string out;
};

int do_build(RunConfig cfg, const std::vector<double>& root_box, bool random_ties) {
    cfg.deterministic_ties = !random_ties;
    if (!root_box.empty()) {
        if (root_box.size() % 2 != 0) throw Error(Errc::invalid_argument, "--root-box takes lo hi pairs");
        std::vector<Interval> ivs;
        for (std::size_t j = 0; j < root_box.size(); j += 2) ivs.push_back(Interval(root_box[j], root_box[j + 1]));
        cfg.root_box = Box(std::move(ivs));
    }
    const PipelineResult res = run_pipeline(cfg);
    std::cout << "n=" << res.histogram.n() << " leaves=" << res.histogram.leaves().size()
              << " tau=" << res.estimate.tau << " cv=" << res.estimate.cv_score;
    if (res.skipped_rows) std::cout << " skipped_rows=" << res.skipped_rows;
    if (res.dropped_points) std::cout << " dropped_points=" << res.dropped_points;
    std::cout << '\n';
    if (!cfg.output.empty()) std::cout << "wrote " << cfg.output << " and " << manifest_path(cfg.output) << '\n';
    return 0;
}

int do_eval(const EvalArgs& a) {
    const Histogram h = load_histogram(a.hist);
    const auto ref = ReferenceDensity::parse(a.reference, h.dim(), a.uniform_lo, a.uniform_hi);
    const EvalReport r = l1_error(h, ref, a.mc, a.seed);
    const nlohmann::json j{{"l1_estimate", r.l1_estimate},
                           {"l1_std_error", r.l1_std_error},
                           {"samples_per_leaf", r.samples_per_leaf},
                           {"outside_mass", r.outside_mass}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

int do_plot(const PlotArgs& a) {
    const Histogram h = load_histogram(a.hist);
    if (export_plot_data(h, a.out) == PlotFormat::leaf_table)
        std::cerr << "note: dimension " << h.dim() << " is not 2, wrote a leaf table instead of rectangles\n";
    return 0;
}

int do_sample(const SampleArgs& a) {
    PointSet pts = a.distribution == "gaussian" ? gaussian_sample(a.n, a.dim, a.seed)
                 : a.distribution == "uniform"
                     ? uniform_sample(a.n, Box::cube(a.dim, 0.0, 1.0), a.seed)
                     : throw Error(Errc::unknown_reference, "unknown distribution '" + a.distribution + "'");
    std::ofstream os(a.out);
    if (!os) throw Error(Errc::io_error, "cannot write " + a.out);
    char buf[32];
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto row = pts[i];
        for (std::size_t j = 0; j < row.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", row[j]);
            os << (j ? "," : "") << buf;
        }
        os << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regular paving histograms: build, evaluate and plot"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::vector<double> root_box;
    bool random_ties = false;
    auto* build = app.add_subcommand("build", "estimate a histogram from a CSV sample");
    build->add_option("--input", cfg.input, "input CSV")->required()->check(CLI::ExistingFile);
    build->add_option("--dim", cfg.dim, "dimension (0 infers from the first row)");
    build->add_option("--shards", cfg.shards, "data shards")->check(CLI::PositiveNumber);
    build->add_option("--workers", cfg.workers, "worker threads (0 = one per shard)");
    build->add_option("--pad", cfg.pad, "relative bounding box padding");
    build->add_option("--root-box", root_box, "explicit root box as lo hi pairs")->expected(2, 1 << 20);
    build->add_option("--carve-leaves", cfg.carve_leaves, "leaves of the support carving path (0 = maxlvs/10)");
    build->add_option("--tributaries", cfg.tributaries, "SEB chains launched from the carving path")
        ->check(CLI::PositiveNumber);
    build->add_option("--maxpts", cfg.maxpts, "SEB count thresholds (default ceil(sqrt(n)))");
    build->add_option("--maxlvs", cfg.maxlvs, "maximum leaves per chain")->check(CLI::PositiveNumber);
    build->add_option("--tau-min", cfg.tau_min, "smallest smoothing parameter");
    build->add_option("--tau-max", cfg.tau_max, "largest smoothing parameter");
    build->add_option("--tau-steps", cfg.tau_steps, "geometric grid size")->check(CLI::PositiveNumber);
    build->add_option("--seed", cfg.seed, "random seed");
    build->add_option("--max-depth", cfg.max_depth, "maximum cell depth");
    build->add_option("--out", cfg.output, "histogram JSON output")->required();
    build->add_flag("--sequential", cfg.sequential, "run the sequential chain instead of the threshold builder");
    build->add_flag("--strict", cfg.strict, "reject malformed rows and points outside the root box");
    build->add_flag("--random-ties", random_ties, "break priority ties at random instead of by lowest label");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Monte Carlo L1 error against a reference density");
    eval->add_option("--hist", ev.hist, "histogram JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--reference", ev.reference, "gaussian or uniform");
    eval->add_option("--mc", ev.mc, "draws per leaf")->check(CLI::PositiveNumber);
    eval->add_option("--seed", ev.seed, "random seed");
    eval->add_option("--uniform-lo", ev.uniform_lo, "lower corner of the uniform reference cube");
    eval->add_option("--uniform-hi", ev.uniform_hi, "upper corner of the uniform reference cube");

    PlotArgs pl;
    auto* plot = app.add_subcommand("plot", "export leaf rectangles (d = 2) or a leaf table as CSV");
    plot->add_option("--hist", pl.hist, "histogram JSON")->required()->check(CLI::ExistingFile);
    plot->add_option("--out", pl.out, "CSV output")->required();

    SampleArgs sa;
    auto* sample = app.add_subcommand("sample", "write a synthetic sample as CSV");
    sample->add_option("--distribution", sa.distribution, "gaussian or uniform (unit cube)");
    sample->add_option("--n", sa.n, "number of points");
    sample->add_option("--dim", sa.dim, "dimension")->check(CLI::PositiveNumber);
    sample->add_option("--seed", sa.seed, "random seed");
    sample->add_option("--out", sa.out, "CSV output")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) return do_build(cfg, root_box, random_ties);
        if (*eval) return do_eval(ev);
        if (*plot) return do_plot(pl);
        if (*sample) return do_sample(sa);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
