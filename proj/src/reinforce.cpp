#include "accep/reinforce.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace accep {

const char* to_string(SnapshotOutcome outcome) {
    switch (outcome) {
        case SnapshotOutcome::opf_feasible: return "opf-feasible";
        case SnapshotOutcome::gep_reinforced: return "gep-reinforced";
    }
    return "?";
}

std::vector<std::size_t> screen_snapshots(const NetworkCase& net, const SnapshotSeries& series,
                                          const PlanSolution& initial, const ReinforceOptions& options,
                                          std::vector<AcSolveResult>* results) {
    const std::size_t T = series.size();
    std::vector<AcSolveResult> local(T);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t t = next++; t < T; t = next++) {
            const auto ctx = make_snapshot_context(net, series, initial, initial.u_source, t);
            local[t] = solve_ac_opf(net, series, ctx, options.nlp);
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(T)));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    std::vector<std::size_t> failing;
    for (std::size_t t = 0; t < T; ++t)
        if (!local[t].report.ok()) failing.push_back(t);
    if (results) *results = std::move(local);
    return failing;
}

namespace {

void store_point(PlanSolution& plan, const OperatingPoint& pt) {
    const auto t = static_cast<Eigen::Index>(pt.snapshot);
    plan.v.col(t) = pt.v;
    plan.theta.col(t) = pt.theta;
    plan.p.col(t) = pt.p;
    plan.q.col(t) = pt.q;
    plan.beta.col(t) = pt.beta;
    plan.beta_su.col(t) = pt.beta_su;
    plan.beta_sd.col(t) = pt.beta_sd;
    plan.p_from.col(t) = pt.p_from;
    plan.p_to.col(t) = pt.p_to;
    plan.q_from.col(t) = pt.q_from;
    plan.q_to.col(t) = pt.q_to;
    plan.p_loss.col(t) = pt.p_from + pt.p_to;
    plan.q_dem.col(t) = pt.q_from + pt.q_to;
    if (plan.dc_fwd.rows() > 0) {
        plan.dc_fwd.col(t) = pt.dc_fwd;
        plan.dc_bwd.col(t) = pt.dc_bwd;
        plan.dc_from.col(t) = pt.dc_from;
        plan.dc_to.col(t) = pt.dc_to;
    }
}

void ensure_shapes(PlanSolution& plan, const NetworkCase& net, std::size_t T) {
    const auto N = static_cast<Eigen::Index>(net.buses.size());
    const auto S = static_cast<Eigen::Index>(net.sources.size());
    const auto L = static_cast<Eigen::Index>(net.ac_branches.size());
    const auto Ti = static_cast<Eigen::Index>(T);
    auto fit = [&](Eigen::MatrixXd& m, Eigen::Index rows, double fill) {
        if (m.rows() != rows || m.cols() != Ti) m = Eigen::MatrixXd::Constant(rows, Ti, fill);
    };
    fit(plan.v, N, 1.0);
    fit(plan.theta, N, 0.0);
    fit(plan.q, S, 0.0);
    fit(plan.beta_sd, S, 0.0);
    fit(plan.p_loss, L, 0.0);
    fit(plan.q_dem, L, 0.0);
    fit(plan.q_from, L, 0.0);
    fit(plan.q_to, L, 0.0);
    fit(plan.cos_relax, L, 1.0);
}

}  // namespace

ReinforcedPlan reinforce(const NetworkCase& net, const SnapshotSeries& series, const PlanSolution& initial,
                         const ReinforceOptions& options) {
    const std::size_t T = series.size();
    const auto S = static_cast<Eigen::Index>(net.sources.size());
    std::vector<AcSolveResult> screened;
    ReinforcedPlan out;
    auto& log = out.log;
    log.failing = screen_snapshots(net, series, initial, options, &screened);
    log.cumulative_increments = Eigen::VectorXd::Zero(S);

    PlanSolution& plan = out.plan;
    plan = initial;
    ensure_shapes(plan, net, T);
    for (std::size_t t = 0; t < T; ++t)
        if (screened[t].report.ok()) store_point(plan, screened[t].point);

    Eigen::VectorXd u_star = initial.u_source;
    for (const std::size_t t : log.failing) {
        SnapshotRecord rec;
        rec.snapshot = t;
        rec.increments = Eigen::VectorXd::Zero(S);
        const auto ctx = make_snapshot_context(net, series, initial, u_star, t);
        const auto opf = solve_ac_opf(net, series, ctx, options.nlp);
        rec.opf = opf.report;
        if (opf.report.ok()) {
            rec.outcome = SnapshotOutcome::opf_feasible;
            store_point(plan, opf.point);
        } else {
            const auto gep = solve_ac_gep(net, series, ctx, options.nlp);
            rec.gep = gep.report;
            if (!gep.report.ok()) {
                log.records.push_back(rec);
                throw ReinforcementError("expansion step failed at snapshot " + std::to_string(t) + ": " +
                                             gep.report.message,
                                         log);
            }
            rec.outcome = SnapshotOutcome::gep_reinforced;
            rec.increments = gep.increments;
            u_star += gep.increments;
            log.cumulative_increments += gep.increments;
            store_point(plan, gep.point);
        }
        log.records.push_back(rec);
    }
    plan.u_source = u_star;
    plan.price.setZero();
    plan.cost = evaluate_cost(net, series, plan);
    plan.objective = plan.cost.total();

    const auto Ti = static_cast<Eigen::Index>(T);
    log.redispatch_positive = Eigen::MatrixXd::Zero(S, Ti);
    log.redispatch_negative = Eigen::MatrixXd::Zero(S, Ti);
    for (Eigen::Index s = 0; s < S; ++s)
        for (Eigen::Index t = 0; t < Ti; ++t) {
            const double d = (plan.p(s, t) - initial.p(s, t)) * series.duration[static_cast<std::size_t>(t)];
            (d > 0 ? log.redispatch_positive(s, t) : log.redispatch_negative(s, t)) = d;
        }
    log.shutdown = plan.beta_sd;

    for (std::size_t t = 0; t < T; ++t) {
        const auto cert =
            certify_operating_point(net, series, plan.u_ac, plan_operating_point(net, plan, t), options.nlp.certification_tol);
        log.certification_residual.push_back(cert.residual);
        log.certified.push_back(cert.passed);
    }
    return out;
}

RedispatchTotals account_redispatch(const PlanSolution& initial, const PlanSolution& final_plan,
                                    const SnapshotSeries& series) {
    RedispatchTotals r;
    for (Eigen::Index s = 0; s < initial.p.rows(); ++s)
        for (Eigen::Index t = 0; t < initial.p.cols(); ++t) {
            const double d = (final_plan.p(s, t) - initial.p(s, t)) * series.duration[static_cast<std::size_t>(t)];
            if (d > 0) r.positive += d;
            else r.negative += d;
        }
    return r;
}

CostDelta decompose_cost_change(const NetworkCase& net, const SnapshotSeries& series, const PlanSolution& initial,
                                const PlanSolution& final_plan) {
    CostDelta d;
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        const auto& src = net.sources[s];
        const auto si = static_cast<Eigen::Index>(s);
        d.capital_increments += src.capital_cost * (final_plan.u_source[si] - initial.u_source[si]);
        for (std::size_t t = 0; t < series.size(); ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            d.redispatch += src.marginal_cost * (final_plan.p(si, ti) - initial.p(si, ti)) * series.duration[t];
            d.startup += src.startup_cost * (final_plan.beta_su(si, ti) - initial.beta_su(si, ti));
            const double sd_final = final_plan.beta_sd.size() ? final_plan.beta_sd(si, ti) : 0.0;
            const double sd_initial = initial.beta_sd.size() ? initial.beta_sd(si, ti) : 0.0;
            d.shutdown += src.startup_cost * (sd_final - sd_initial);
        }
    }
    return d;
}

}  // namespace accep
