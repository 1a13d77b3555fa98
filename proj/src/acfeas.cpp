#include "accep/acfeas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/LU>

namespace accep {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Params {
    double g = 0.0, b = 0.0, bsh = 0.0;
};

Params scaled_params(const AcBranch& br, double circuits) {
    const auto y = br.admittance();
    return {y.g * circuits, y.b * circuits, br.b_sh * circuits};
}

// Flow at the n end of a branch (n, m) with derivatives in local order
// (v_n, v_m, theta_n, theta_m).
struct EndEval {
    double p = 0.0, q = 0.0;
    Eigen::Vector4d dp, dq;
    Eigen::Matrix4d hp, hq;
};

EndEval eval_end(const Params& k, double vn, double vm, double th, bool second_order) {
    const double cs = std::cos(th), sn = std::sin(th);
    const double C = k.g * cs + k.b * sn;
    const double S = k.g * sn - k.b * cs;
    const double bb = k.b + k.bsh / 2.0;
    EndEval e;
    e.p = k.g * vn * vn - vn * vm * C;
    e.q = -bb * vn * vn - vn * vm * S;
    e.dp << 2 * k.g * vn - vm * C, -vn * C, vn * vm * S, -vn * vm * S;
    e.dq << -2 * bb * vn - vm * S, -vn * S, -vn * vm * C, vn * vm * C;
    if (!second_order) return e;
    auto fill = [](Eigen::Matrix4d& h, double vnvn, double vnvm, double vnth, double vmth, double thth) {
        h.setZero();
        h(0, 0) = vnvn;
        h(0, 1) = h(1, 0) = vnvm;
        h(0, 2) = h(2, 0) = vnth;
        h(0, 3) = h(3, 0) = -vnth;
        h(1, 2) = h(2, 1) = vmth;
        h(1, 3) = h(3, 1) = -vmth;
        h(2, 2) = h(3, 3) = thth;
        h(2, 3) = h(3, 2) = -thth;
    };
    fill(e.hp, 2 * k.g, -C, vm * S, vn * S, vn * vm * C);
    fill(e.hq, -2 * bb, -S, -vm * C, -vn * C, vn * vm * S);
    return e;
}

double col_or(const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c, double fallback = 0.0) {
    return (m.rows() > r && m.cols() > c) ? m(r, c) : fallback;
}

}  // namespace

BranchFlows ac_branch_flows(double v_from, double v_to, double theta, const AcBranch& branch, double circuits) {
    const auto k = scaled_params(branch, circuits);
    const auto a = eval_end(k, v_from, v_to, theta, false);
    const auto b = eval_end(k, v_to, v_from, -theta, false);
    return {a.p, a.q, b.p, b.q};
}

BusInjections bus_injections(const NetworkCase& net, const Eigen::VectorXd& circuits, const Eigen::VectorXd& v,
                             const Eigen::VectorXd& theta) {
    const auto N = static_cast<Eigen::Index>(net.buses.size());
    BusInjections out{Eigen::VectorXd::Zero(N), Eigen::VectorXd::Zero(N)};
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
        const double u = circuits[static_cast<Eigen::Index>(l)];
        if (!(u > 0)) continue;
        const auto& br = net.ac_branches[l];
        const auto f = static_cast<Eigen::Index>(br.from), t = static_cast<Eigen::Index>(br.to);
        const auto fl = ac_branch_flows(v[f], v[t], theta[f] - theta[t], br, u);
        out.p[f] += fl.p_from;
        out.q[f] += fl.q_from;
        out.p[t] += fl.p_to;
        out.q[t] += fl.q_to;
    }
    return out;
}

Eigen::MatrixXd power_flow_jacobian(const NetworkCase& net, const Eigen::VectorXd& circuits,
                                    const Eigen::VectorXd& v, const Eigen::VectorXd& theta) {
    const auto N = static_cast<Eigen::Index>(net.buses.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * N, 2 * N);
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
        const double u = circuits[static_cast<Eigen::Index>(l)];
        if (!(u > 0)) continue;
        const auto& br = net.ac_branches[l];
        const auto k = scaled_params(br, u);
        const auto f = static_cast<Eigen::Index>(br.from), t = static_cast<Eigen::Index>(br.to);
        for (int side = 0; side < 2; ++side) {
            const Eigen::Index n = side == 0 ? f : t, m = side == 0 ? t : f;
            const auto e = eval_end(k, v[n], v[m], theta[n] - theta[m], false);
            // local (v_n, v_m, theta_n, theta_m) -> columns
            const Eigen::Index cols[4] = {N + n, N + m, n, m};
            for (int j = 0; j < 4; ++j) {
                J(n, cols[j]) += e.dp[j];
                J(N + n, cols[j]) += e.dq[j];
            }
        }
    }
    return J;
}

std::vector<std::size_t> island_reference_buses(const NetworkCase& net) {
    const auto islands = ac_islands(net);
    std::vector<std::size_t> refs;
    std::set<std::size_t> seen;
    for (std::size_t n = 0; n < net.buses.size(); ++n)
        if (seen.insert(islands[n]).second) refs.push_back(n);
    return refs;
}

PowerFlowResult newton_power_flow(const NetworkCase& net, const Eigen::VectorXd& circuits,
                                  const PowerFlowSpec& spec, const NewtonOptions& options) {
    const auto N = static_cast<Eigen::Index>(net.buses.size());
    PowerFlowResult r;
    r.v = spec.v_seed.size() == N ? spec.v_seed : Eigen::VectorXd::Ones(N);
    r.theta = spec.theta_seed.size() == N ? spec.theta_seed : Eigen::VectorXd::Zero(N);
    std::vector<bool> slack(static_cast<std::size_t>(N), false);
    for (auto s : spec.slack_buses) {
        slack[s] = true;
        r.theta[static_cast<Eigen::Index>(s)] = 0.0;
    }
    std::vector<Eigen::Index> free_buses;
    for (Eigen::Index n = 0; n < N; ++n)
        if (!slack[static_cast<std::size_t>(n)]) free_buses.push_back(n);
    const auto F = static_cast<Eigen::Index>(free_buses.size());

    for (int it = 0;; ++it) {
        r.iterations = it;
        r.injections = bus_injections(net, circuits, r.v, r.theta);
        Eigen::VectorXd mis(2 * F);
        for (Eigen::Index i = 0; i < F; ++i) {
            const auto n = free_buses[static_cast<std::size_t>(i)];
            mis[i] = r.injections.p[n] - spec.p_injection[n];
            mis[F + i] = r.injections.q[n] - spec.q_injection[n];
        }
        r.mismatch = F ? mis.cwiseAbs().maxCoeff() : 0.0;
        if (!std::isfinite(r.mismatch) || r.mismatch > 1e8) {
            r.message = "power flow diverged";
            return r;
        }
        if (r.mismatch <= options.tol) {
            r.converged = true;
            return r;
        }
        if (it >= options.max_iter) {
            r.message = "power flow did not converge in " + std::to_string(options.max_iter) + " iterations";
            return r;
        }
        const auto J = power_flow_jacobian(net, circuits, r.v, r.theta);
        Eigen::MatrixXd Jr(2 * F, 2 * F);
        for (Eigen::Index i = 0; i < F; ++i)
            for (Eigen::Index j = 0; j < F; ++j) {
                const auto a = free_buses[static_cast<std::size_t>(i)], b = free_buses[static_cast<std::size_t>(j)];
                Jr(i, j) = J(a, b);
                Jr(i, F + j) = J(a, N + b);
                Jr(F + i, j) = J(N + a, b);
                Jr(F + i, F + j) = J(N + a, N + b);
            }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(Jr);
        if (!lu.isInvertible()) {
            r.message = "singular power flow Jacobian";
            return r;
        }
        const Eigen::VectorXd dx = lu.solve(-mis);
        for (Eigen::Index i = 0; i < F; ++i) {
            const auto n = free_buses[static_cast<std::size_t>(i)];
            r.theta[n] += dx[i];
            r.v[n] += dx[F + i];
        }
    }
}

const char* to_string(NlpStatus status) {
    switch (status) {
        case NlpStatus::feasible_optimal: return "feasible-optimal";
        case NlpStatus::locally_infeasible: return "locally-infeasible";
        case NlpStatus::iteration_limit: return "iteration-limit";
    }
    return "?";
}

namespace {

// Net specified injection per bus: sources minus charging, loads and HVDC ends.
void specified_injections(const NetworkCase& net, const SnapshotSeries& series, const OperatingPoint& pt,
                          Eigen::VectorXd& p_spec, Eigen::VectorXd& q_spec) {
    const auto N = static_cast<Eigen::Index>(net.buses.size());
    const auto t = static_cast<Eigen::Index>(pt.snapshot);
    p_spec = -series.load_p.col(t);
    q_spec = series.load_q.rows() == N ? Eigen::VectorXd(-series.load_q.col(t)) : Eigen::VectorXd::Zero(N);
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        const auto n = static_cast<Eigen::Index>(net.sources[s].bus);
        p_spec[n] += pt.p[si] - (pt.p_charge.size() ? pt.p_charge[si] : 0.0);
        q_spec[n] += pt.q[si];
    }
    for (std::size_t l = 0; l < net.dc_branches.size(); ++l) {
        const auto li = static_cast<Eigen::Index>(l);
        p_spec[static_cast<Eigen::Index>(net.dc_branches[l].from)] -= pt.dc_from[li];
        p_spec[static_cast<Eigen::Index>(net.dc_branches[l].to)] -= pt.dc_to[li];
    }
}

}  // namespace

Certification certify_operating_point(const NetworkCase& net, const SnapshotSeries& series,
                                      const Eigen::VectorXd& circuits, const OperatingPoint& point, double tol) {
    Certification c;
    PowerFlowSpec spec;
    specified_injections(net, series, point, spec.p_injection, spec.q_injection);
    spec.slack_buses = island_reference_buses(net);
    spec.v_seed = point.v;
    spec.theta_seed = point.theta;
    const auto pf = newton_power_flow(net, circuits, spec);
    c.converged = pf.converged;
    if (!pf.converged) {
        c.message = pf.message;
        c.residual = pf.mismatch;
        return c;
    }
    double res = pf.mismatch;
    for (auto s : spec.slack_buses) {
        const auto n = static_cast<Eigen::Index>(s);
        res = std::max({res, std::abs(pf.injections.p[n] - spec.p_injection[n]),
                        std::abs(pf.injections.q[n] - spec.q_injection[n])});
    }
    c.residual = res;

    double viol = 0.0;
    std::string worst;
    auto note = [&](double v, const std::string& what) {
        if (v > viol) {
            viol = v;
            worst = what;
        }
    };
    for (Eigen::Index n = 0; n < pf.v.size(); ++n) {
        note(0.9 - pf.v[n], "voltage " + net.buses[static_cast<std::size_t>(n)].id);
        note(pf.v[n] - 1.1, "voltage " + net.buses[static_cast<std::size_t>(n)].id);
    }
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
        const double u = circuits[static_cast<Eigen::Index>(l)];
        if (!(u > 0)) continue;
        const auto& br = net.ac_branches[l];
        const auto f = static_cast<Eigen::Index>(br.from), t = static_cast<Eigen::Index>(br.to);
        const double th = pf.theta[f] - pf.theta[t];
        note(std::abs(th) - br.theta_max, "angle " + br.id);
        const auto fl = ac_branch_flows(pf.v[f], pf.v[t], th, br, u);
        const double lim = br.a * br.f_max * u;
        note(std::hypot(fl.p_from, fl.q_from) - lim, "thermal " + br.id);
        note(std::hypot(fl.p_to, fl.q_to) - lim, "thermal " + br.id);
    }
    const auto t = static_cast<Eigen::Index>(point.snapshot);
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        const auto& src = net.sources[s];
        const auto si = static_cast<Eigen::Index>(s);
        const double beta = point.beta[si], p = point.p[si], q = point.q[si];
        note(beta - point.u_source[si], "online " + src.id);
        note(-beta, "online " + src.id);
        note(src.p_min * beta - p, "active " + src.id);
        note(p - col_or(series.availability, si, t, 1.0) * src.p_max * beta, "active " + src.id);
        note(src.q_min * beta - q, "reactive " + src.id);
        note(q - src.q_max * beta, "reactive " + src.id);
        for (const auto& ln : src.capability.upper_lines)
            note(p - ln.slope * q - ln.intercept * src.p_max * beta, "capability " + src.id);
        for (const auto& ln : src.capability.lower_lines)
            note(ln.slope * q + ln.intercept * src.p_max * beta - p, "capability " + src.id);
    }
    c.limit_violation = viol;
    c.passed = res <= tol && viol <= tol;
    if (!c.passed)
        c.message = res > tol ? "power flow residual " + std::to_string(res) : "limit violated at " + worst;
    return c;
}

OperatingPoint plan_operating_point(const NetworkCase& net, const PlanSolution& plan, std::size_t t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const auto S = static_cast<Eigen::Index>(net.sources.size());
    auto col = [&](const Eigen::MatrixXd& m, Eigen::Index rows) -> Eigen::VectorXd {
        if (m.rows() == rows && m.cols() > ti) return m.col(ti);
        return Eigen::VectorXd::Zero(rows);
    };
    OperatingPoint pt;
    pt.snapshot = t;
    const auto N = static_cast<Eigen::Index>(net.buses.size());
    const auto L = static_cast<Eigen::Index>(net.ac_branches.size());
    const auto D = static_cast<Eigen::Index>(net.dc_branches.size());
    pt.v = plan.v.rows() == N ? Eigen::VectorXd(plan.v.col(ti)) : Eigen::VectorXd::Ones(N);
    pt.theta = col(plan.theta, N);
    pt.p = col(plan.p, S);
    pt.q = col(plan.q, S);
    pt.beta = col(plan.beta, S);
    pt.beta_su = col(plan.beta_su, S);
    pt.beta_sd = col(plan.beta_sd, S);
    pt.u_source = plan.u_source;
    pt.p_charge = col(plan.p_charge, S);
    pt.p_from = col(plan.p_from, L);
    pt.q_from = col(plan.q_from, L);
    pt.p_to = col(plan.p_to, L);
    pt.q_to = col(plan.q_to, L);
    pt.dc_fwd = col(plan.dc_fwd, D);
    pt.dc_bwd = col(plan.dc_bwd, D);
    pt.dc_from = col(plan.dc_from, D);
    pt.dc_to = col(plan.dc_to, D);
    return pt;
}

SnapshotContext make_snapshot_context(const NetworkCase& net, const SnapshotSeries& series,
                                      const PlanSolution& initial, const Eigen::VectorXd& u_source, std::size_t t) {
    const auto S = static_cast<Eigen::Index>(net.sources.size());
    const auto T = static_cast<Eigen::Index>(series.size());
    const auto ti = static_cast<Eigen::Index>(t);
    const auto prev = ti == 0 ? T - 1 : ti - 1;
    SnapshotContext ctx;
    ctx.t = t;
    ctx.circuits = initial.u_ac;
    ctx.u_dc = initial.u_dc;
    ctx.u_source = u_source;
    ctx.beta_prev = initial.beta.col(prev);
    ctx.beta_su = initial.beta_su.col(ti);
    ctx.implicit_sd = (ctx.beta_prev + ctx.beta_su - initial.beta.col(ti)).cwiseMax(0.0);
    ctx.p_charge = initial.p_charge.rows() == S ? Eigen::VectorXd(initial.p_charge.col(ti)) : Eigen::VectorXd::Zero(S);
    ctx.storage_p_cap = Eigen::VectorXd::Constant(S, kInfinity);
    for (Eigen::Index s = 0; s < S; ++s)
        if (net.sources[static_cast<std::size_t>(s)].kind == SourceKind::storage)
            ctx.storage_p_cap[s] = std::max(0.0, initial.p(s, ti));
    ctx.warm = plan_operating_point(net, initial, t);
    ctx.warm->u_source = u_source;
    return ctx;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Sources below this capacity have only empty operating ranges.
constexpr double kOfflineCapacity = 1e-6;

// Single-snapshot AC dispatch (and optional source expansion) problem.
class SnapshotModel : public nlp::Model {
public:
    SnapshotModel(const NetworkCase& net, const SnapshotSeries& series, const SnapshotContext& ctx, bool expansion)
        : net_(net), series_(series), ctx_(ctx) {
        N_ = static_cast<int>(net.buses.size());
        S_ = static_cast<int>(net.sources.size());
        D_ = static_cast<int>(net.dc_branches.size());
        n_ = 2 * N_ + 6 * S_ + 2 * D_;
        const auto t = static_cast<Eigen::Index>(ctx.t);
        const double dur = series.duration[ctx.t];

        for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
            const double u = ctx.circuits[static_cast<Eigen::Index>(l)];
            if (u > 0) branches_.push_back({l, scaled_params(net.ac_branches[l], u),
                                            net.ac_branches[l].a * net.ac_branches[l].f_max * u});
        }

        cost_ = Eigen::VectorXd::Zero(n_);
        for (int s = 0; s < S_; ++s) {
            const auto& src = net.sources[static_cast<std::size_t>(s)];
            cost_[p(s)] = dur * src.marginal_cost;
            cost_[su(s)] = src.startup_cost;
            cost_[sd(s)] = src.startup_cost;
            cost_[u(s)] = src.capital_cost;
        }
        scale_ = 1.0 / std::max(1.0, cost_.cwiseAbs().maxCoeff());

        // balances: sum of branch flows + B x + k = 0
        kp_ = series.load_p.col(t);
        kq_ = series.load_q.col(t);
        for (int s = 0; s < S_; ++s) {
            const int n = static_cast<int>(net.sources[static_cast<std::size_t>(s)].bus);
            bal_.emplace_back(n, p(s), -1.0);
            bal_.emplace_back(N_ + n, q(s), -1.0);
            kp_[n] += ctx.p_charge.size() ? ctx.p_charge[s] : 0.0;
        }
        for (int l = 0; l < D_; ++l) {
            const auto& link = net.dc_branches[static_cast<std::size_t>(l)];
            const int f = static_cast<int>(link.from), to = static_cast<int>(link.to);
            bal_.emplace_back(f, fwd(l), 1.0);
            bal_.emplace_back(f, bwd(l), -(1.0 - link.eta));
            bal_.emplace_back(to, bwd(l), 1.0);
            bal_.emplace_back(to, fwd(l), -(1.0 - link.eta));
        }

        // bounds, fixings and linear rows
        const auto refs = island_reference_buses(net);
        std::set<std::size_t> ref_set(refs.begin(), refs.end());
        for (int n = 0; n < N_; ++n) {
            bound(v(n), 0.9, 1.1);
            if (ref_set.count(static_cast<std::size_t>(n))) fix(th(n), 0.0);
            else bound(th(n), -kPi / 2, kPi / 2);
        }
        for (int s = 0; s < S_; ++s) {
            const auto& src = net.sources[static_cast<std::size_t>(s)];
            const bool storage = src.kind == SourceKind::storage;
            const double ustar = ctx.u_source[s];
            const double u_hi = expansion && !storage ? std::max(ustar, src.u_max) : ustar;
            if (u_hi > ustar) bound(u(s), ustar, u_hi);
            else fix(u(s), ustar);
            // beta <= u_hi caps useful startups and shutdowns
            if (storage) fix(su(s), ctx.beta_su[s]);
            else bound(su(s), ctx.beta_su[s], ctx.beta_su[s] + u_hi);
            bound(sd(s), 0.0, ctx.beta_prev[s] + ctx.beta_su[s] + u_hi);
            // beta = beta_prev + su - implicit_sd - sd
            eq({{beta(s), 1.0}, {su(s), -1.0}, {sd(s), 1.0}}, ctx.beta_prev[s] - ctx.implicit_sd[s]);
            if (u_hi <= kOfflineCapacity) {
                fix(beta(s), 0.0);
                fix(p(s), 0.0);
                fix(q(s), 0.0);
                continue;
            }
            bound(beta(s), 0.0, kInfinity);
            ineq({{beta(s), 1.0}, {u(s), -1.0}}, 0.0);
            const double avail = col_or(series.availability, s, t, 1.0);
            ineq({{p(s), -1.0}, {beta(s), src.p_min}}, 0.0);
            ineq({{p(s), 1.0}, {beta(s), -avail * src.p_max}}, 0.0);
            ineq({{q(s), -1.0}, {beta(s), src.q_min}}, 0.0);
            ineq({{q(s), 1.0}, {beta(s), -src.q_max}}, 0.0);
            for (const auto& ln : src.capability.upper_lines)
                ineq({{p(s), 1.0}, {q(s), -ln.slope}, {beta(s), -ln.intercept * src.p_max}}, 0.0);
            for (const auto& ln : src.capability.lower_lines)
                ineq({{p(s), -1.0}, {q(s), ln.slope}, {beta(s), ln.intercept * src.p_max}}, 0.0);
            if (storage) {
                const double pc = ctx.p_charge.size() ? ctx.p_charge[s] : 0.0;
                if (std::isfinite(ctx.storage_p_cap[s])) ineq({{p(s), 1.0}}, ctx.storage_p_cap[s]);
                ineq({{beta(s), -src.p_max}}, -pc);
                ineq({{p(s), 1.0}, {beta(s), -src.p_max}}, -pc);
            }
        }
        for (int l = 0; l < D_; ++l) {
            const auto& link = net.dc_branches[static_cast<std::size_t>(l)];
            const double cap = link.p_max * ctx.u_dc[l];
            bound(fwd(l), 0.0, cap);
            bound(bwd(l), 0.0, cap);
        }
        for (const auto& br : branches_) {
            const auto& b = net.ac_branches[br.index];
            const int f = static_cast<int>(b.from), to = static_cast<int>(b.to);
            ineq({{th(f), 1.0}, {th(to), -1.0}}, b.theta_max);
            ineq({{th(f), -1.0}, {th(to), 1.0}}, b.theta_max);
        }
        Aeq_ = to_matrix(eq_trip_, static_cast<int>(beq_.size()));
        Ain_ = to_matrix(in_trip_, static_cast<int>(bin_.size()));
    }

    int num_variables() const override { return n_; }
    int num_equalities() const override { return 2 * N_ + static_cast<int>(beq_.size()); }
    int num_inequalities() const override {
        return static_cast<int>(bin_.size()) + 2 * static_cast<int>(branches_.size());
    }

    double objective(const Eigen::VectorXd& x) const override { return scale_ * cost_.dot(x); }
    Eigen::VectorXd gradient(const Eigen::VectorXd&) const override { return scale_ * cost_; }
    double unscaled_objective(const Eigen::VectorXd& x) const { return cost_.dot(x); }

    Eigen::VectorXd equalities(const Eigen::VectorXd& x) const override {
        Eigen::VectorXd g(num_equalities());
        g.head(N_) = kp_;
        g.segment(N_, N_) = kq_;
        for (const auto& tr : bal_) g[tr.row()] += tr.value() * x[tr.col()];
        for (const auto& br : branches_)
            for (int side = 0; side < 2; ++side) {
                const auto e = end(br, side, x, false);
                g[e.first.n] += e.second.p;
                g[N_ + e.first.n] += e.second.q;
            }
        g.tail(static_cast<Eigen::Index>(beq_.size())) = Aeq_ * x - vec(beq_);
        return g;
    }

    nlp::SparseMatrix equality_jacobian(const Eigen::VectorXd& x) const override {
        Triplets trip(bal_.begin(), bal_.end());
        for (const auto& br : branches_)
            for (int side = 0; side < 2; ++side) {
                const auto e = end(br, side, x, false);
                for (int j = 0; j < 4; ++j) {
                    trip.emplace_back(e.first.n, e.first.cols[j], e.second.dp[j]);
                    trip.emplace_back(N_ + e.first.n, e.first.cols[j], e.second.dq[j]);
                }
            }
        for (int k = 0; k < Aeq_.outerSize(); ++k)
            for (nlp::SparseMatrix::InnerIterator it(Aeq_, k); it; ++it)
                trip.emplace_back(2 * N_ + it.row(), it.col(), it.value());
        nlp::SparseMatrix J(num_equalities(), n_);
        J.setFromTriplets(trip.begin(), trip.end());
        return J;
    }

    Eigen::VectorXd inequalities(const Eigen::VectorXd& x) const override {
        Eigen::VectorXd h(num_inequalities());
        const auto m = static_cast<Eigen::Index>(bin_.size());
        h.head(m) = Ain_ * x - vec(bin_);
        Eigen::Index r = m;
        for (const auto& br : branches_)
            for (int side = 0; side < 2; ++side) {
                const auto e = end(br, side, x, false).second;
                h[r++] = e.p * e.p + e.q * e.q - br.limit * br.limit;
            }
        return h;
    }

    nlp::SparseMatrix inequality_jacobian(const Eigen::VectorXd& x) const override {
        Triplets trip;
        for (int k = 0; k < Ain_.outerSize(); ++k)
            for (nlp::SparseMatrix::InnerIterator it(Ain_, k); it; ++it)
                trip.emplace_back(it.row(), it.col(), it.value());
        int r = static_cast<int>(bin_.size());
        for (const auto& br : branches_)
            for (int side = 0; side < 2; ++side) {
                const auto [loc, e] = end(br, side, x, false);
                for (int j = 0; j < 4; ++j) trip.emplace_back(r, loc.cols[j], 2 * (e.p * e.dp[j] + e.q * e.dq[j]));
                ++r;
            }
        nlp::SparseMatrix J(num_inequalities(), n_);
        J.setFromTriplets(trip.begin(), trip.end());
        return J;
    }

    nlp::SparseMatrix lagrangian_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& lam,
                                         const Eigen::VectorXd& mu) const override {
        Triplets trip;
        int r = static_cast<int>(bin_.size());
        for (const auto& br : branches_)
            for (int side = 0; side < 2; ++side) {
                const auto [loc, e] = end(br, side, x, true);
                Eigen::Matrix4d H = lam[loc.n] * e.hp + lam[N_ + loc.n] * e.hq;
                const double m = mu[r++];
                H += 2.0 * m * (e.dp * e.dp.transpose() + e.p * e.hp + e.dq * e.dq.transpose() + e.q * e.hq);
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j)
                        if (H(i, j) != 0.0) trip.emplace_back(loc.cols[i], loc.cols[j], H(i, j));
            }
        nlp::SparseMatrix H(n_, n_);
        H.setFromTriplets(trip.begin(), trip.end());
        return H;
    }

    Eigen::VectorXd initial_point(const OperatingPoint& warm, bool flat) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
        for (int n = 0; n < N_; ++n) {
            x[v(n)] = flat ? 1.0 : std::clamp(warm.v[n], 0.9, 1.1);
            x[th(n)] = flat ? 0.0 : std::clamp(warm.theta[n], -kPi / 2, kPi / 2);
        }
        for (int s = 0; s < S_; ++s) {
            x[p(s)] = warm.p[s];
            x[q(s)] = warm.q[s];
            x[beta(s)] = warm.beta[s];
            x[u(s)] = ctx_.u_source[s];
            x[su(s)] = ctx_.beta_su[s];
            x[sd(s)] = 0.0;
        }
        for (int l = 0; l < D_; ++l) {
            x[fwd(l)] = warm.dc_fwd.size() ? warm.dc_fwd[l] : 0.0;
            x[bwd(l)] = warm.dc_bwd.size() ? warm.dc_bwd[l] : 0.0;
        }
        return x;
    }

    OperatingPoint point(const Eigen::VectorXd& x) const {
        OperatingPoint pt;
        pt.snapshot = ctx_.t;
        pt.v = x.segment(v(0), N_);
        pt.theta = x.segment(th(0), N_);
        pt.p = x.segment(p(0), S_);
        pt.q = x.segment(q(0), S_);
        pt.beta = x.segment(beta(0), S_);
        pt.u_source = x.segment(u(0), S_);
        pt.beta_su = x.segment(su(0), S_);
        pt.beta_sd = x.segment(sd(0), S_);
        pt.p_charge = ctx_.p_charge;
        const auto L = static_cast<Eigen::Index>(net_.ac_branches.size());
        pt.p_from = pt.q_from = pt.p_to = pt.q_to = Eigen::VectorXd::Zero(L);
        for (const auto& br : branches_) {
            const auto& b = net_.ac_branches[br.index];
            const auto f = static_cast<Eigen::Index>(b.from), t = static_cast<Eigen::Index>(b.to);
            const auto fl = ac_branch_flows(pt.v[f], pt.v[t], pt.theta[f] - pt.theta[t], b,
                                            ctx_.circuits[static_cast<Eigen::Index>(br.index)]);
            const auto li = static_cast<Eigen::Index>(br.index);
            pt.p_from[li] = fl.p_from;
            pt.q_from[li] = fl.q_from;
            pt.p_to[li] = fl.p_to;
            pt.q_to[li] = fl.q_to;
        }
        pt.dc_fwd = D_ ? Eigen::VectorXd(x.segment(fwd(0), D_)) : Eigen::VectorXd();
        pt.dc_bwd = D_ ? Eigen::VectorXd(x.segment(bwd(0), D_)) : Eigen::VectorXd();
        pt.dc_from = pt.dc_to = Eigen::VectorXd::Zero(D_);
        for (int l = 0; l < D_; ++l) {
            const double eta = net_.dc_branches[static_cast<std::size_t>(l)].eta;
            pt.dc_from[l] = pt.dc_fwd[l] - (1.0 - eta) * pt.dc_bwd[l];
            pt.dc_to[l] = pt.dc_bwd[l] - (1.0 - eta) * pt.dc_fwd[l];
        }
        pt.objective = unscaled_objective(x);
        return pt;
    }

private:
    struct ActiveBranch {
        std::size_t index;
        Params k;
        double limit;
    };
    struct EndLocation {
        int n;
        int cols[4];
    };

    int v(int n) const { return n; }
    int th(int n) const { return N_ + n; }
    int p(int s) const { return 2 * N_ + s; }
    int q(int s) const { return 2 * N_ + S_ + s; }
    int beta(int s) const { return 2 * N_ + 2 * S_ + s; }
    int u(int s) const { return 2 * N_ + 3 * S_ + s; }
    int su(int s) const { return 2 * N_ + 4 * S_ + s; }
    int sd(int s) const { return 2 * N_ + 5 * S_ + s; }
    int fwd(int l) const { return 2 * N_ + 6 * S_ + l; }
    int bwd(int l) const { return 2 * N_ + 6 * S_ + D_ + l; }

    std::pair<EndLocation, EndEval> end(const ActiveBranch& br, int side, const Eigen::VectorXd& x,
                                        bool second_order) const {
        const auto& b = net_.ac_branches[br.index];
        const int n = static_cast<int>(side == 0 ? b.from : b.to), m = static_cast<int>(side == 0 ? b.to : b.from);
        EndLocation loc{n, {v(n), v(m), th(n), th(m)}};
        return {loc, eval_end(br.k, x[v(n)], x[v(m)], x[th(n)] - x[th(m)], second_order)};
    }

    void eq(std::initializer_list<std::pair<int, double>> terms, double rhs) {
        const int r = static_cast<int>(beq_.size());
        for (const auto& [c, a] : terms) eq_trip_.emplace_back(r, c, a);
        beq_.push_back(rhs);
    }
    void ineq(std::initializer_list<std::pair<int, double>> terms, double rhs) {
        const int r = static_cast<int>(bin_.size());
        for (const auto& [c, a] : terms) in_trip_.emplace_back(r, c, a);
        bin_.push_back(rhs);
    }
    void fix(int var, double value) { eq({{var, 1.0}}, value); }
    void bound(int var, double lo, double hi) {
        if (lo == hi) {
            fix(var, lo);
            return;
        }
        if (std::isfinite(lo)) ineq({{var, -1.0}}, -lo);
        if (std::isfinite(hi)) ineq({{var, 1.0}}, hi);
    }
    nlp::SparseMatrix to_matrix(const Triplets& trip, int rows) const {
        nlp::SparseMatrix m(rows, n_);
        m.setFromTriplets(trip.begin(), trip.end());
        return m;
    }
    static Eigen::VectorXd vec(const std::vector<double>& v) {
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    const NetworkCase& net_;
    const SnapshotSeries& series_;
    const SnapshotContext& ctx_;
    int N_ = 0, S_ = 0, D_ = 0, n_ = 0;
    std::vector<ActiveBranch> branches_;
    Eigen::VectorXd cost_;
    double scale_ = 1.0;
    Triplets bal_;
    Eigen::VectorXd kp_, kq_;
    Triplets eq_trip_, in_trip_;
    std::vector<double> beq_, bin_;
    nlp::SparseMatrix Aeq_, Ain_;
};

AcSolveResult solve_snapshot(const NetworkCase& net, const SnapshotSeries& series, const SnapshotContext& ctx,
                             const NlpSettings& settings, bool expansion) {
    SnapshotModel model(net, series, ctx, expansion);
    const OperatingPoint warm = ctx.warm ? *ctx.warm : plan_operating_point(net, PlanSolution{}, ctx.t);
    AcSolveResult out;
    for (int start = 0; start < 2; ++start) {
        const auto res = nlp::solve(model, model.initial_point(warm, start == 1), settings.ipm);
        NlpReport rep;
        rep.start = start;
        rep.iterations = res.iterations;
        rep.feasibility = res.feasibility;
        rep.stationarity = res.stationarity;
        rep.complementarity = res.complementarity;
        auto pt = model.point(res.x);
        rep.objective = pt.objective;
        if (res.status == nlp::Status::converged) {
            const auto cert = certify_operating_point(net, series, ctx.circuits, pt, settings.certification_tol);
            rep.certification_residual = cert.residual;
            rep.status = cert.passed ? NlpStatus::feasible_optimal : NlpStatus::locally_infeasible;
            if (!cert.passed) rep.message = "certification failed: " + cert.message;
        } else {
            rep.status = res.status == nlp::Status::iteration_limit ? NlpStatus::iteration_limit
                                                                    : NlpStatus::locally_infeasible;
            rep.message = std::string("interior point ended with ") + nlp::to_string(res.status);
        }
        out.point = std::move(pt);
        out.report = rep;
        if (rep.ok()) break;
    }
    out.increments = (out.point.u_source - ctx.u_source).cwiseMax(0.0);
    if (!expansion) out.increments.setZero();
    return out;
}

}  // namespace

AcSolveResult solve_ac_opf(const NetworkCase& net, const SnapshotSeries& series, const SnapshotContext& ctx,
                           const NlpSettings& settings) {
    return solve_snapshot(net, series, ctx, settings, false);
}

AcSolveResult solve_ac_gep(const NetworkCase& net, const SnapshotSeries& series, const SnapshotContext& ctx,
                           const NlpSettings& settings) {
    return solve_snapshot(net, series, ctx, settings, true);
}

}  // namespace accep
