#include "accep/scp.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace accep {

double relative_change(const Eigen::VectorXd& u, const Eigen::VectorXd& u_prev) {
    const double denom = u.norm();
    if (denom == 0.0) return (u - u_prev).norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return (u - u_prev).norm() / denom;
}

std::string format_scp_state(const ScpState& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "scp k=%d delta=%.6g objective=%.10g circuits_added=%.6g", s.k, s.delta,
                  s.objective, s.circuits_added);
    return buf;
}

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

conic::Solution solve_or_throw(const Formulation& f, const conic::SolverOptions& opts, int k, const char* stage) {
    auto sol = conic::solve(f.program, opts);
    if (!sol.ok())
        throw ScpError(k, sol.status,
                       std::string(stage) + " solve at iteration " + std::to_string(k) + " ended with status " +
                           conic::to_string(sol.status));
    return sol;
}

}  // namespace

PlanSolution run_scp(const NetworkCase& net, const SnapshotSeries& series, FormulationKind kind,
                     const ScpOptions& options) {
    const auto L = static_cast<Eigen::Index>(net.ac_branches.size());
    Eigen::VectorXd u_min(L);
    for (Eigen::Index l = 0; l < L; ++l) u_min[l] = net.ac_branches[static_cast<std::size_t>(l)].u_min;

    FormulationOptions fopts;
    fopts.tangents = options.tangents;

    ScpState state;
    Eigen::VectorXd u_prev = u_min;
    Eigen::VectorXd params = u_min;
    std::vector<double> deltas;
    bool guard_used = false;
    bool converged = false;
    Eigen::VectorXd best_u = u_min;
    double best_delta = std::numeric_limits<double>::infinity();
    PlanSolution first;

    for (int k = 1; k <= options.max_iters; ++k) {
        fopts.parameter_circuits = to_std(params);
        fopts.fixed_circuits.reset();
        const auto f = build_formulation(net, series, kind, fopts);
        const auto sol = solve_or_throw(f, options.solver, k, "expansion");
        auto plan = extract_plan(f, net, series, sol);
        const Eigen::VectorXd u = plan.u_ac;

        state.k = k;
        state.parameter_circuits = params;
        state.u = u;
        state.delta = relative_change(u, u_prev);
        state.objective = sol.objective;
        state.circuits_added = (u - u_min).sum();
        state.objectives.push_back(sol.objective);
        deltas.push_back(state.delta);
        if (options.observer) options.observer(state);

        if (state.delta <= best_delta) {
            best_delta = state.delta;
            best_u = u;
        }
        if (k == 1 && std::isinf(options.tol)) {
            plan.iterations = 1;
            plan.converged = true;
            plan.delta_history = deltas;
            return plan;
        }
        if (state.delta <= options.tol) {
            converged = true;
            best_u = u;
            break;
        }
        const std::size_t n = deltas.size();
        if (!guard_used && n >= 4 && deltas[n - 1] > deltas[n - 2] && deltas[n - 2] > deltas[n - 3] &&
            deltas[n - 3] > deltas[n - 4]) {
            guard_used = true;
            params = 0.5 * (u + u_prev);
        } else {
            params = u;
        }
        u_prev = u;
    }

    fopts.parameter_circuits = to_std(best_u);
    fopts.fixed_circuits = fopts.parameter_circuits;
    const auto f = build_formulation(net, series, kind, fopts);
    const int final_k = static_cast<int>(deltas.size()) + 1;
    const auto sol = solve_or_throw(f, options.solver, final_k, "final");
    auto plan = extract_plan(f, net, series, sol);
    plan.iterations = static_cast<int>(deltas.size());
    plan.converged = converged;
    plan.delta_history = deltas;
    return plan;
}

double angle_blocking_threshold(double theta_max, double x, double a, double f_max) {
    return theta_max / (x * a * f_max);
}

std::vector<AngleBlockingFlag> check_angle_blocking(const NetworkCase& net) {
    std::vector<AngleBlockingFlag> out;
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
        const auto& br = net.ac_branches[l];
        AngleBlockingFlag flag;
        flag.branch = l;
        flag.id = br.id;
        flag.threshold = angle_blocking_threshold(br.theta_max, br.x, br.a, br.f_max);
        flag.blocked = br.u_min >= flag.threshold;
        out.push_back(flag);
    }
    return out;
}

}  // namespace accep
