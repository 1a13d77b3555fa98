#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "accep/caseio.hpp"
#include "accep/reinforce.hpp"
#include "accep/report.hpp"
#include "accep/results.hpp"
#include "accep/scp.hpp"

namespace fs = std::filesystem;
using namespace accep;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

int cmd_validate(const std::string& case_path) {
    const auto lc = load_case(case_path);
    std::printf("%s: %zu buses, %zu ac branches, %zu dc branches, %zu sources, %zu snapshots\n",
                lc.network.name.c_str(), lc.network.buses.size(), lc.network.ac_branches.size(),
                lc.network.dc_branches.size(), lc.network.sources.size(), lc.series.size());
    for (const auto& f : check_angle_blocking(lc.network))
        if (f.blocked)
            std::printf("warning: expansion of %s is blocked by its angle limit (u_min >= %.4g)\n", f.id.c_str(),
                        f.threshold);
    return 0;
}

int cmd_solve(const std::string& case_path, const std::string& approx, const std::string& out, int tangents,
              double scp_tol, int max_iters, bool verbose) {
    const auto lc = load_case(case_path);
    const auto kind = parse_formulation_kind(approx);
    if (!kind) throw CLI::ValidationError("--approx", "unknown approximation " + approx);
    ScpOptions opts;
    opts.tangents = tangents > 0 ? tangents : lc.solver.tangents;
    opts.tol = scp_tol >= 0 ? scp_tol : lc.solver.scp_tol;
    opts.max_iters = max_iters > 0 ? max_iters : lc.solver.scp_max_iters;
    opts.solver.tol = lc.solver.tol;
    opts.solver.max_iter = lc.solver.max_iter;
    opts.solver.verbose = verbose;
    opts.observer = [](const ScpState& s) { std::printf("%s\n", format_scp_state(s).c_str()); };
    for (const auto& f : check_angle_blocking(lc.network))
        if (f.blocked)
            std::fprintf(stderr, "warning: expansion of %s is blocked by its angle limit\n", f.id.c_str());

    ResultBundle bundle;
    bundle.case_path = fs::absolute(case_path).string();
    bundle.plan = run_scp(lc.network, lc.series, *kind, opts);
    if (models_losses(*kind)) bundle.loss_audit = audit_losses(lc.network, bundle.plan);
    write_results(out, lc.network, bundle);
    std::printf("%s objective %.10g after %d solves%s\n", to_string(*kind), bundle.plan.objective,
                bundle.plan.iterations, bundle.plan.converged ? "" : " (not converged)");
    if (bundle.loss_audit)
        std::printf("loss audit: %zu fictitious records, min slack %.3g\n", bundle.loss_audit->fictitious_count,
                    bundle.loss_audit->min_slack);
    return 0;
}

int cmd_reinforce(const std::string& case_path, const std::string& initial_dir, const std::string& out,
                  unsigned parallel) {
    const auto lc = load_case(case_path);
    const auto initial = read_results(initial_dir, lc.network);
    ReinforceOptions opts;
    opts.workers = parallel;
    ResultBundle bundle;
    bundle.case_path = fs::absolute(case_path).string();
    bundle.initial_dir = fs::absolute(initial_dir).string();
    int code = 0;
    try {
        auto r = reinforce(lc.network, lc.series, initial.plan, opts);
        bundle.plan = std::move(r.plan);
        bundle.log = std::move(r.log);
    } catch (const ReinforcementError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        bundle.plan = initial.plan;
        bundle.log = e.log();
        code = kExitSolver;
    }
    write_results(out, lc.network, bundle);
    const auto& log = *bundle.log;
    std::printf("%zu of %zu snapshots failed screening\n", log.failing.size(), lc.series.size());
    for (const auto& r : log.records)
        std::printf("snapshot %zu: %s\n", r.snapshot, to_string(r.outcome));
    std::size_t certified = 0;
    for (bool c : log.certified) certified += c ? 1 : 0;
    if (code == 0) {
        std::printf("certified %zu of %zu snapshots\n", certified, log.certified.size());
        if (certified != log.certified.size()) code = kExitSolver;
    }
    return code;
}

int cmd_report(const std::string& results_dir) {
    std::string case_path;
    {
        std::ifstream in(fs::path(results_dir) / "objective.json");
        if (!in) throw ResultsError("cannot read objective.json in " + results_dir);
        case_path = nlohmann::json::parse(in).value("case", "");
    }
    const auto lc = load_case(case_path);
    const auto res = read_results(results_dir, lc.network);
    PlanSolution initial = res.plan;
    if (!res.initial_dir.empty()) initial = read_results(res.initial_dir, lc.network).plan;
    const auto s = summarize(lc.network, lc.series, initial, res.plan, res.log ? &*res.log : nullptr);
    write_summary(s, results_dir);
    std::printf("AC-feasible share of initial plan  %.2f%%\n", 100.0 * s.feasible_share);
    std::printf("redispatch positive / negative      %.6g / %.6g\n", s.redispatch_positive, s.redispatch_negative);
    std::printf("system cost initial / final         %.10g / %.10g\n", s.cost_initial, s.cost_final);
    std::printf("transmission expansion (pu km)      %.6g -> %.6g\n", s.transmission_expansion_initial,
                s.transmission_expansion_final);
    std::printf("storage charge / discharge (pu h)   %.6g / %.6g\n", s.storage_charge, s.storage_discharge);
    for (const auto& [carrier, cap] : s.final_mix.capacity)
        std::printf("capacity %-12s %.6g -> %.6g\n", carrier.c_str(), s.initial_mix.capacity.at(carrier), cap);
    for (const auto& [carrier, e] : s.final_mix.energy)
        std::printf("energy   %-12s %.6g -> %.6g\n", carrier.c_str(), s.initial_mix.energy.at(carrier), e);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Capacity expansion planning with convex AC approximations"};
    app.require_subcommand(1);

    std::string case_path, approx, out, initial_dir, results_dir;
    int tangents = 0, max_iters = 0;
    double scp_tol = -1.0;
    unsigned parallel = 1;
    bool verbose = false;

    auto* solve = app.add_subcommand("solve", "Solve the expansion problem with one approximation");
    solve->add_option("--case", case_path)->required();
    solve->add_option("--approx", approx)->required()->check(CLI::IsMember({"dc", "dc-lossy", "lpac", "decoupled"}));
    solve->add_option("--out", out)->required();
    solve->add_option("--h-tangents", tangents, "Tangents per loss or thermal curve");
    solve->add_option("--scp-tol", scp_tol, "Relative change at which iterations stop");
    solve->add_option("--max-iters", max_iters);
    solve->add_flag("--verbose", verbose);

    auto* reinf = app.add_subcommand("reinforce", "Make an initial plan AC-feasible");
    reinf->add_option("--case", case_path)->required();
    reinf->add_option("--initial", initial_dir)->required();
    reinf->add_option("--out", out)->required();
    reinf->add_option("--parallel", parallel)->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "Summarise a results directory");
    report->add_option("--results", results_dir)->required();

    auto* validate = app.add_subcommand("validate", "Load and check a case");
    validate->add_option("--case", case_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) return cmd_validate(case_path);
        if (*solve) return cmd_solve(case_path, approx, out, tangents, scp_tol, max_iters, verbose);
        if (*reinf) return cmd_reinforce(case_path, initial_dir, out, parallel);
        if (*report) return cmd_report(results_dir);
    } catch (const CaseError& e) {
        std::fprintf(stderr, "invalid case (%s): %s\n", to_string(e.kind()), e.what());
        return kExitValidation;
    } catch (const ResultsError& e) {
        std::fprintf(stderr, "invalid results: %s\n", e.what());
        return kExitValidation;
    } catch (const ScpError& e) {
        std::fprintf(stderr, "solver failure at iteration %d: %s\n", e.iteration(), e.what());
        return kExitSolver;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSolver;
    }
    return 0;
}
