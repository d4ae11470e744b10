// cli.hpp
// Command implementations for the qfid command-line tool.
//
//   report          fidelity report for two state files
//   mcfit           Monte-Carlo dataset, power-mean fit and scatter data
//   simulate        click-level first-order overlap estimate
//   simulate2       click-level second-order overlap estimate
//   kernel-selftest kernel, H-operator and O' cross-checks
//
// Exit codes: 0 success, 2 invalid input, 3 inconclusive simulation,
// 1 anything else.

#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qfid/qfid.hpp"

namespace qfid::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kInvalidInput = 2, kInconclusive = 3 };

struct RunConfig {
    std::string command;
    std::vector<std::string> inputs;
    std::uint64_t seed = 0;
    std::size_t pairs = 1000000;
    std::uint64_t rounds = 100000;
    std::size_t dim = 4;
    std::string measure = "hilbert-schmidt";
    std::string strategy;  // per-command default when empty
    double eta = 1.0;
    std::string normalization = "reference";
    std::string inner = "split";
    double mean_m = kPublishedMeanParams.m;
    double mean_w = kPublishedMeanParams.w;
    std::string out;
    std::string format = "json";
    unsigned workers = 1;
    std::string scatter;
    std::string dataset;
    std::size_t scatter_limit = 10000;
};

inline json config_json(const RunConfig& c) {
    json j{{"command", c.command}, {"seed", c.seed}, {"workers", c.workers}, {"format", c.format}};
    if (!c.inputs.empty()) j["inputs"] = c.inputs;
    if (c.command == "report") j["mean_params"] = {{"m", c.mean_m}, {"w", c.mean_w}};
    if (c.command == "mcfit") {
        j["pairs"] = c.pairs;
        j["dim"] = c.dim;
        j["measure"] = c.measure;
        j["scatter_limit"] = c.scatter_limit;
    }
    if (c.command == "simulate" || c.command == "simulate2") {
        j["rounds"] = c.rounds;
        j["eta"] = c.eta;
        j["strategy"] = c.strategy;
        j["normalization"] = c.normalization;
        if (c.command == "simulate2") j["inner"] = c.inner;
    }
    if (c.command == "kernel-selftest") j["pairs"] = c.pairs;
    return j;
}

namespace detail {

inline void emit(const json& j, const RunConfig& c, std::ostream& out) {
    if (c.format != "json" && c.format != "csv") throw ValidationError("--format must be json or csv");
    std::ofstream file;
    std::ostream* dst = &out;
    if (!c.out.empty()) {
        file.open(c.out);
        if (!file) throw ValidationError("cannot write '" + c.out + "'");
        dst = &file;
    }
    if (c.format == "json") {
        *dst << j.dump(2) << '\n';
    } else {
        write_flat_csv(j, *dst);
    }
}

inline void require_inputs(const RunConfig& c) {
    if (c.inputs.size() != 2) throw ValidationError(c.command + " needs two state files");
}

}  // namespace detail

inline json cmd_report(const RunConfig& c) {
    detail::require_inputs(c);
    const auto rho1 = load_state(c.inputs[0]);
    const auto rho2 = load_state(c.inputs[1]);
    if (!(c.mean_w >= 0.0 && c.mean_w <= 1.0)) throw ValidationError("--w must lie in [0, 1]");
    const auto report = make_report(rho1, rho2, MeanParams{c.mean_m, c.mean_w, 0.0});
    return {{"config", config_json(c)}, {"report", to_json(report)}};
}

inline json cmd_mcfit(const RunConfig& c) {
    if (c.pairs < 1000) throw ValidationError("mcfit needs --pairs >= 1000");
    if (c.dim < 2 || !is_power_of_two(c.dim)) throw ValidationError("--dim must be a power of two >= 2");
    const PairSpec spec{c.dim, parse_measure(c.measure), parse_measure(c.measure), c.seed};
    const auto ds = sample_triples(c.pairs, spec, c.workers);
    const PreparedTriples prepared(ds);
    const auto fit = fit_mean(prepared);

    json panels = json::array();
    for (const auto& p : figure_panels(fit.best)) {
        panels.push_back({{"name", p.name}, {"params", to_json(MeanParams{p.m, p.w, prepared.delta(p.m, p.w)})}});
    }
    if (!c.dataset.empty()) {
        std::ofstream f(c.dataset);
        if (!f) throw ValidationError("cannot write '" + c.dataset + "'");
        write_dataset_csv(ds, f);
    }
    if (!c.scatter.empty()) {
        std::ofstream f(c.scatter);
        if (!f) throw ValidationError("cannot write '" + c.scatter + "'");
        f << "panel,index,F,Fbar,E,G\n";
        const std::size_t rows = std::min(c.scatter_limit, ds.size());
        for (const auto& p : figure_panels(fit.best))
            for (std::size_t i = 0; i < rows; ++i) {
                const auto& t = ds.records[i];
                f << p.name << ',' << i << ',' << format_double(t.f) << ','
                  << format_double(generalized_mean(t.e, t.g, p.m, p.w)) << ',' << format_double(t.e) << ','
                  << format_double(t.g) << '\n';
            }
    }
    return {{"config", config_json(c)},
            {"arithmetic", to_json(MeanParams{1.0, 0.5, fit.arithmetic_delta})},
            {"optimum", to_json(fit.best)},
            {"grid_best", to_json(fit.grid_best)},
            {"refinement_iterations", fit.refinement_iterations},
            {"published", to_json(kPublishedMeanParams)},
            {"panels", panels}};
}

inline json tally_json(const RunConfig& c, const ProtocolTally& t, double exact) {
    json j = to_json(t);
    j["exact"] = exact;
    return {{"config", config_json(c)}, {"tally", j}};
}

// The tally is returned even for an inconclusive run; `inconclusive` is set.
inline json cmd_simulate(const RunConfig& c, bool& inconclusive) {
    detail::require_inputs(c);
    const auto rho1 = load_state(c.inputs[0]);
    const auto rho2 = load_state(c.inputs[1]);
    StrategyConfig cfg;
    cfg.kind = parse_strategy(c.strategy.empty() ? "base" : c.strategy);
    cfg.eta = c.eta;
    cfg.rounds = c.rounds;
    cfg.seed = c.seed;
    cfg.normalization = parse_normalization(c.normalization);
    cfg.workers = c.workers;
    const double exact = overlap1(rho1, rho2);
    inconclusive = false;
    try {
        return tally_json(c, estimate_overlap(rho1, rho2, cfg), exact);
    } catch (const InconclusiveRun& e) {
        inconclusive = true;
        return tally_json(c, e.tally(), exact);
    }
}

inline json cmd_simulate2(const RunConfig& c, bool& inconclusive) {
    detail::require_inputs(c);
    const auto rho1 = load_state(c.inputs[0]);
    const auto rho2 = load_state(c.inputs[1]);
    SecondOrderConfig cfg;
    cfg.kind = parse_strategy(c.strategy.empty() ? "removable-bs" : c.strategy);
    cfg.eta = c.eta;
    cfg.rounds = c.rounds;
    cfg.seed = c.seed;
    cfg.normalization = parse_normalization(c.normalization);
    cfg.inner = parse_inner_stage(c.inner);
    cfg.workers = c.workers;
    const double exact = overlap2(rho1, rho2);
    inconclusive = false;
    try {
        return tally_json(c, estimate_overlap2(rho1, rho2, cfg), exact);
    } catch (const InconclusiveRun& e) {
        inconclusive = true;
        return tally_json(c, e.tally(), exact);
    }
}

inline json cmd_kernel_selftest(const RunConfig& c, bool& passed) {
    int kernel_mismatches = 0;
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n)
            for (int k = 0; k < 4; ++k)
                for (int l = 0; l < 4; ++l)
                    if (kernel(m, n, k, l) != kernel_direct(m, n, k, l)) ++kernel_mismatches;
    const bool h_perm = is_permutation_matrix(h_operator());
    const double decomposition = max_abs_diff(h_swap_conjugated(), h_swap_decomposition());

    double path_diff = 0.0, order_diff = 0.0;
    const std::size_t pairs = std::min<std::size_t>(c.pairs, 100000);
    RandomStream rng(c.seed, 0);
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto rho1 = random_mixed(4, rng);
        const auto rho2 = random_mixed(4, rng);
        const double direct = overlap2(rho1, rho2);
        const auto t = overlap2_orderings(rho1, rho2);
        path_diff = std::max({path_diff, std::abs(overlap2_via_kernel(rho1, rho2) - direct),
                              std::abs(t.first - direct), std::abs(overlap2_via_h(rho1, rho2) - direct)});
        order_diff = std::max(order_diff, std::abs(t.first - t.second));
    }
    passed = kernel_mismatches == 0 && h_perm && decomposition <= 1e-14 && path_diff <= 1e-10 && order_diff <= 1e-12;
    return {{"config", config_json(c)},
            {"kernel_mismatches", kernel_mismatches},
            {"h_is_permutation", h_perm},
            {"decomposition_max_diff", decomposition},
            {"overlap2_paths_max_diff", path_diff},
            {"orderings_max_diff", order_diff},
            {"passed", passed}};
}

// Parses argv and runs one command; never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Fidelity bounds, overlap estimators and click-level protocol simulation for qubit states"};
    app.require_subcommand(1);
    RunConfig c;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", c.seed, "RNG seed");
        sub->add_option("--out", c.out, "output file (default stdout)");
        sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    };
    auto add_simulation = [&](CLI::App* sub) {
        sub->add_option("state1", c.inputs, "two state files")->expected(2)->required();
        sub->add_option("--rounds", c.rounds, "measurement rounds K")->check(CLI::PositiveNumber);
        sub->add_option("--eta", c.eta, "detector efficiency in (0, 1]");
        sub->add_option("--strategy", c.strategy,
                        "base, removable-bs, mach-zehnder, shifted-bs or hom-overlap");
        sub->add_option("--normalization", c.normalization, "reference or per-bucket");
        add_common(sub);
    };

    auto* report = app.add_subcommand("report", "fidelity report for two states");
    report->add_option("state1", c.inputs, "two state files")->expected(2)->required();
    report->add_option("--m", c.mean_m, "power-mean exponent");
    report->add_option("--w", c.mean_w, "power-mean weight");
    add_common(report);

    auto* mcfit = app.add_subcommand("mcfit", "fit the power-mean estimator on random pairs");
    mcfit->add_option("--pairs", c.pairs, "number of random pairs");
    mcfit->add_option("--measure", c.measure, "hilbert-schmidt or haar-pure");
    mcfit->add_option("--dim", c.dim, "state dimension");
    mcfit->add_option("--scatter", c.scatter, "write per-panel (F, Fbar) scatter CSV");
    mcfit->add_option("--scatter-limit", c.scatter_limit, "pairs per scatter panel");
    mcfit->add_option("--dataset", c.dataset, "write the E,G,F dataset CSV");
    add_common(mcfit);

    auto* sim = app.add_subcommand("simulate", "estimate Tr(rho1 rho2) from simulated clicks");
    add_simulation(sim);

    auto* sim2 = app.add_subcommand("simulate2", "estimate Tr(rho1 rho2 rho1 rho2) from simulated clicks");
    add_simulation(sim2);
    sim2->add_option("--inner", c.inner, "split or sequential");

    auto* selftest = app.add_subcommand("kernel-selftest", "check the Pauli kernel and O' paths");
    selftest->add_option("--pairs", c.pairs, "random pairs for the O' cross-check")->default_val(1000);
    add_common(selftest);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalidInput;
    }

    try {
        c.command = app.get_subcommands().front()->get_name();
        bool flag = false;
        if (report->parsed()) {
            detail::emit(cmd_report(c), c, out);
        } else if (mcfit->parsed()) {
            detail::emit(cmd_mcfit(c), c, out);
        } else if (sim->parsed() || sim2->parsed()) {
            const json j = sim->parsed() ? cmd_simulate(c, flag) : cmd_simulate2(c, flag);
            detail::emit(j, c, out);
            if (flag) {
                err << "error: inconclusive run: no conclusive rounds in the reference configuration\n";
                return kInconclusive;
            }
        } else if (selftest->parsed()) {
            detail::emit(cmd_kernel_selftest(c, flag), c, out);
            if (!flag) {
                err << "error: kernel self-test failed\n";
                return kInternal;
            }
        }
        return kOk;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}

}  // namespace qfid::cli
