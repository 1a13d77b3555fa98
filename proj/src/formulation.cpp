#include "accep/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "accep/graph.hpp"

namespace accep {

using conic::Affine;
using conic::kInf;
using conic::Term;

const char* to_string(FormulationKind kind) {
    switch (kind) {
        case FormulationKind::dc: return "dc";
        case FormulationKind::dc_lossy: return "dc-lossy";
        case FormulationKind::lpac: return "lpac";
        case FormulationKind::decoupled: return "decoupled";
    }
    return "?";
}

std::optional<FormulationKind> parse_formulation_kind(std::string_view text) {
    for (auto k : {FormulationKind::dc, FormulationKind::dc_lossy, FormulationKind::lpac, FormulationKind::decoupled})
        if (text == to_string(k)) return k;
    if (text == "dc_lossy") return FormulationKind::dc_lossy;
    return std::nullopt;
}

bool models_reactive_power(FormulationKind kind) {
    return kind == FormulationKind::lpac || kind == FormulationKind::decoupled;
}

bool models_losses(FormulationKind kind) { return kind != FormulationKind::dc; }

std::vector<std::string> expected_constraint_tags(FormulationKind kind) {
    std::vector<std::string> tags = {"online_limit",
                                     "online_consistency",
                                     "online_boundary",
                                     "ps_injections_online",
                                     "storage_unit_charging",
                                     "storage_unit_complementarity_relaxation",
                                     "state_of_charge_limits",
                                     "state_of_charge",
                                     "state_of_charge_cyclic",
                                     "flow_hvdc_along",
                                     "flow_hvdc_against",
                                     "flow_hvdc_limit"};
    auto add = [&](std::initializer_list<const char*> more) { tags.insert(tags.end(), more.begin(), more.end()); };
    switch (kind) {
        case FormulationKind::dc:
            add({"kvl", "thermal_limit_dc", "voltage_angle_difference_dc_approx", "nodal_balance_p_dc"});
            break;
        case FormulationKind::dc_lossy:
            add({"losses_p_dc", "kvl", "thermal_limit_dc_lossy", "voltage_angle_difference_dc_approx",
                 "nodal_balance_p_dc_lossy"});
            break;
        case FormulationKind::lpac:
            add({"qs_injection_online", "pq_upper", "pq_lower", "thermal_limit", "voltage_angle_difference",
                 "ac_nodal_balance_p", "ac_nodal_balance_q", "cosine_relaxation", "lpac_p", "lpac_q"});
            break;
        case FormulationKind::decoupled:
            add({"qs_injection_online", "pq_upper", "pq_lower", "voltage_angle_difference",
                 "ac_nodal_balance_p_decoupled", "ac_nodal_balance_q_decoupled", "decoupled_p", "decoupled_q",
                 "decoupled_p_losses", "decoupled_q_losses", "thermal_limit_decoupled"});
            break;
    }
    std::sort(tags.begin(), tags.end());
    tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
    return tags;
}

BranchPhysics branch_physics(const AcBranch& branch, double circuits) {
    const double k = circuits > 0.0 ? circuits : 1.0;
    const auto y = branch.admittance();
    return {y.g * k, y.b * k, branch.b_sh * k, branch.r / k, branch.x / k, k};
}

double tightened_u_max(const AcBranch& branch, const BranchPhysics& physics) {
    const double threshold = branch.theta_max / (physics.x * branch.a * branch.f_max);
    if (branch.u_max >= threshold) return std::max(branch.u_min, threshold);
    return branch.u_max;
}

BranchFlows lpac_flows(const BranchPhysics& ph, double v_from, double v_to, double theta, double cos_value) {
    const double loss = 1.0 - cos_value;
    BranchFlows f;
    f.p_from = ph.g * (v_from - v_to) + ph.g * loss - ph.b * theta;
    f.p_to = ph.g * (v_to - v_from) + ph.g * loss + ph.b * theta;
    f.q_from = -ph.b_sh / 2 * (2 * v_from - 1) - ph.b * (v_from - v_to) - ph.b * loss - ph.g * theta;
    f.q_to = -ph.b_sh / 2 * (2 * v_to - 1) - ph.b * (v_to - v_from) - ph.b * loss + ph.g * theta;
    return f;
}

BranchFlows decoupled_flows(const BranchPhysics& ph, double v_from, double v_to, double theta) {
    BranchFlows f;
    f.p_from = ph.g * (v_from - v_to) - ph.b * theta;
    f.p_to = ph.g * (v_to - v_from) + ph.b * theta;
    f.q_from = -ph.b_sh / 2 * (2 * v_from - 1) - ph.b * (v_from - v_to) - ph.g * theta;
    f.q_to = -ph.b_sh / 2 * (2 * v_to - 1) - ph.b * (v_to - v_from) + ph.g * theta;
    return f;
}

double cosine_cut_coefficient(double theta_max) { return (1.0 - std::cos(theta_max)) / (theta_max * theta_max); }

double compare_loss_models(double theta_max) {
    if (!(theta_max > 0.0 && theta_max <= kPi / 6.0 + 1e-15))
        throw std::domain_error("angle limit must lie in (0, pi/6]");
    // 1 - cos t = 2 sin^2(t/2) avoids cancellation for small t
    const double s = std::sin(theta_max / 2.0);
    return 4.0 * s * s / (theta_max * theta_max);
}

std::vector<double> loss_tangent_points(double a, double f_max, double u_max, int tangents) {
    std::vector<double> pts;
    const double span = a * f_max * u_max;
    for (int h = tangents; h >= 1; --h) pts.push_back(-h * span / tangents);
    for (int h = 1; h <= tangents; ++h) pts.push_back(h * span / tangents);
    return pts;
}

namespace {

using Grid = VariableCatalog::Grid;

Grid absent(std::size_t rows, std::size_t cols) {
    return Grid::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), -1);
}

std::string at(const std::string& id, std::size_t t) { return id + "@" + std::to_string(t); }

double circuits_for(const FormulationOptions& o, const AcBranch& br, std::size_t l) {
    if (o.fixed_circuits) return (*o.fixed_circuits)[l];
    if (!o.parameter_circuits.empty()) return o.parameter_circuits[l];
    return br.u_min;
}

// Injection side of a bus balance: sum p_s - sum p_c.
std::vector<Term> injection_terms(const Formulation& f, const NetworkCase& net, std::size_t n, std::size_t t,
                                  bool reactive) {
    std::vector<Term> terms;
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        if (net.sources[s].bus != n) continue;
        const auto si = static_cast<Eigen::Index>(s), ti = static_cast<Eigen::Index>(t);
        if (reactive) {
            terms.push_back({f.vars.q(si, ti), 1.0});
        } else {
            terms.push_back({f.vars.p(si, ti), 1.0});
            if (f.vars.p_charge(si, ti) >= 0) terms.push_back({f.vars.p_charge(si, ti), -1.0});
        }
    }
    return terms;
}

void add_dc_link_terms(const Formulation& f, const NetworkCase& net, std::size_t n, std::size_t t,
                       std::vector<Term>& terms) {
    for (std::size_t l = 0; l < net.dc_branches.size(); ++l) {
        const auto li = static_cast<Eigen::Index>(l), ti = static_cast<Eigen::Index>(t);
        if (net.dc_branches[l].from == n) terms.push_back({f.vars.dc_from(li, ti), -1.0});
        if (net.dc_branches[l].to == n) terms.push_back({f.vars.dc_to(li, ti), -1.0});
    }
}

void add_ac_circuits(Formulation& f, const NetworkCase& net) {
    auto& prog = f.program;
    f.vars.u_ac.assign(net.ac_branches.size(), -1);
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
        const auto& br = net.ac_branches[l];
        double lo = br.u_min, hi = f.u_max_ac[l];
        if (f.options.fixed_circuits) lo = hi = (*f.options.fixed_circuits)[l];
        f.vars.u_ac[l] = prog.add_variable(lo, hi, "u[" + br.id + "]");
    }
}

void add_bus_voltages(Formulation& f, const NetworkCase& net, std::size_t T) {
    auto& prog = f.program;
    const auto islands = ac_islands(net);
    std::vector<bool> is_ref(net.buses.size(), false);
    std::set<std::size_t> seen;
    for (std::size_t n = 0; n < net.buses.size(); ++n)
        if (seen.insert(islands[n]).second) is_ref[n] = true;
    f.vars.v = absent(net.buses.size(), T);
    f.vars.theta = absent(net.buses.size(), T);
    for (std::size_t n = 0; n < net.buses.size(); ++n)
        for (std::size_t t = 0; t < T; ++t) {
            const auto ni = static_cast<Eigen::Index>(n), ti = static_cast<Eigen::Index>(t);
            f.vars.v(ni, ti) = prog.add_variable(0.9, 1.1, "v[" + at(net.buses[n].id, t) + "]");
            const double lim = is_ref[n] ? 0.0 : kPi / 2;
            f.vars.theta(ni, ti) = prog.add_variable(-lim, lim, "theta[" + at(net.buses[n].id, t) + "]");
        }
}

std::vector<Term> angle_difference(const Formulation& f, const AcBranch& br, Eigen::Index t, double scale = 1.0) {
    return {{f.vars.theta(static_cast<Eigen::Index>(br.from), t), scale},
            {f.vars.theta(static_cast<Eigen::Index>(br.to), t), -scale}};
}

void add_angle_limits(Formulation& f, const NetworkCase& net, std::size_t T) {
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
        const auto& br = net.ac_branches[l];
        for (std::size_t t = 0; t < T; ++t)
            f.program.add_row(angle_difference(f, br, static_cast<Eigen::Index>(t)), -br.theta_max, br.theta_max,
                              "voltage_angle_difference", at(br.id, t));
    }
}

// ||args|| <= a f u_l
void add_thermal_cone(Formulation& f, const AcBranch& br, std::size_t l, Affine p_expr, Affine q_expr,
                      const std::string& tag, const std::string& label) {
    Affine bound;
    bound.add(f.vars.u_ac[l], br.a * br.f_max);
    f.program.add_cone({std::move(p_expr), std::move(q_expr)}, bound, tag, label);
}

// k * lin^2 <= y as ||(2 sqrt(k) lin, y - 1)|| <= y + 1, where y = y_terms + y_const.
void add_quadratic_cut(Formulation& f, std::vector<Term> lin, double k, std::vector<Term> y_terms, double y_const,
                       const std::string& tag, const std::string& label) {
    const double c = 2.0 * std::sqrt(k);
    Affine a1, a2, bound;
    for (auto& t : lin) a1.add(t.var, c * t.coef);
    for (auto& t : y_terms) {
        a2.add(t.var, t.coef);
        bound.add(t.var, t.coef);
    }
    a2.constant = y_const - 1.0;
    bound.constant = y_const + 1.0;
    f.program.add_cone({a1, a2}, bound, tag, label);
}

}  // namespace

void build_commitment_block(Formulation& f, const NetworkCase& net, const SnapshotSeries& series) {
    auto& prog = f.program;
    const std::size_t S = net.sources.size(), T = series.size();
    f.vars.u_source.assign(S, -1);
    f.vars.beta = absent(S, T);
    f.vars.beta_su = absent(S, T);
    for (std::size_t s = 0; s < S; ++s) {
        const auto& src = net.sources[s];
        f.vars.u_source[s] = prog.add_variable(src.u_min, src.u_max, "u[" + src.id + "]");
        const auto si = static_cast<Eigen::Index>(s);
        for (std::size_t t = 0; t < T; ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            f.vars.beta(si, ti) = prog.add_variable(0.0, kInf, "beta[" + at(src.id, t) + "]");
            f.vars.beta_su(si, ti) = prog.add_variable(0.0, kInf, "beta_su[" + at(src.id, t) + "]");
        }
        for (std::size_t t = 0; t < T; ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            prog.add_row({{f.vars.beta(si, ti), 1.0}, {f.vars.u_source[s], -1.0}}, -kInf, 0.0, "online_limit",
                         at(src.id, t));
            const auto prev = static_cast<Eigen::Index>(t == 0 ? T - 1 : t - 1);
            prog.add_row({{f.vars.beta(si, ti), 1.0}, {f.vars.beta(si, prev), -1.0}, {f.vars.beta_su(si, ti), -1.0}},
                         -kInf, 0.0, t == 0 ? "online_boundary" : "online_consistency", at(src.id, t));
        }
    }
}

void build_injection_block(Formulation& f, const NetworkCase& net, const SnapshotSeries& series) {
    auto& prog = f.program;
    const std::size_t S = net.sources.size(), T = series.size();
    const bool reactive = models_reactive_power(f.kind);
    f.vars.p = absent(S, T);
    f.vars.q = absent(S, T);
    for (std::size_t s = 0; s < S; ++s) {
        const auto& src = net.sources[s];
        const auto si = static_cast<Eigen::Index>(s);
        for (std::size_t t = 0; t < T; ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            const int p = prog.add_variable(-kInf, kInf, "p[" + at(src.id, t) + "]");
            const int beta = f.vars.beta(si, ti);
            f.vars.p(si, ti) = p;
            const double avail = series.availability(si, ti);
            prog.add_row({{p, 1.0}, {beta, -src.p_min}}, 0.0, kInf, "ps_injections_online", at(src.id, t));
            prog.add_row({{p, 1.0}, {beta, -avail * src.p_max}}, -kInf, 0.0, "ps_injections_online", at(src.id, t));
            if (!reactive) continue;
            const int q = prog.add_variable(-kInf, kInf, "q[" + at(src.id, t) + "]");
            f.vars.q(si, ti) = q;
            prog.add_row({{q, 1.0}, {beta, -src.q_min}}, 0.0, kInf, "qs_injection_online", at(src.id, t));
            prog.add_row({{q, 1.0}, {beta, -src.q_max}}, -kInf, 0.0, "qs_injection_online", at(src.id, t));
            for (const auto& line : src.capability.upper_lines)
                prog.add_row({{p, 1.0}, {q, -line.slope}, {beta, -line.intercept * src.p_max}}, -kInf, 0.0,
                             "pq_upper", at(src.id, t));
            for (const auto& line : src.capability.lower_lines)
                prog.add_row({{p, 1.0}, {q, -line.slope}, {beta, -line.intercept * src.p_max}}, 0.0, kInf,
                             "pq_lower", at(src.id, t));
        }
    }
}

void build_storage_block(Formulation& f, const NetworkCase& net, const SnapshotSeries& series) {
    auto& prog = f.program;
    const std::size_t S = net.sources.size(), T = series.size();
    f.vars.p_charge = absent(S, T);
    f.vars.p_inflow = absent(S, T);
    f.vars.energy = absent(S, T);
    for (std::size_t s = 0; s < S; ++s) {
        const auto& src = net.sources[s];
        if (src.kind != SourceKind::storage || !src.storage) continue;
        const auto& st = *src.storage;
        const auto si = static_cast<Eigen::Index>(s);
        for (std::size_t t = 0; t < T; ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            f.vars.p_charge(si, ti) = prog.add_variable(0.0, kInf, "p_c[" + at(src.id, t) + "]");
            const double inflow = series.inflow_max.size() ? series.inflow_max(si, ti) : 0.0;
            f.vars.p_inflow(si, ti) = prog.add_variable(0.0, inflow, "p_in[" + at(src.id, t) + "]");
            f.vars.energy(si, ti) = prog.add_variable(0.0, kInf, "e[" + at(src.id, t) + "]");
        }
        for (std::size_t t = 0; t < T; ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            const int beta = f.vars.beta(si, ti), p = f.vars.p(si, ti), pc = f.vars.p_charge(si, ti);
            const int e = f.vars.energy(si, ti);
            prog.add_row({{pc, 1.0}, {beta, -src.p_max}}, -kInf, 0.0, "storage_unit_charging", at(src.id, t));
            prog.add_row({{p, 1.0}, {pc, 1.0}, {beta, -src.p_max}}, -kInf, 0.0,
                         "storage_unit_complementarity_relaxation", at(src.id, t));
            prog.add_row({{e, 1.0}, {f.vars.u_source[s], -st.e_max}}, -kInf, 0.0, "state_of_charge_limits",
                         at(src.id, t));
            const auto prev = static_cast<Eigen::Index>(t == 0 ? T - 1 : t - 1);
            const double d = series.duration[t];
            prog.add_row({{e, 1.0},
                          {f.vars.energy(si, prev), -1.0},
                          {pc, -d * st.eta_chg},
                          {p, d / st.eta_dis},
                          {f.vars.p_inflow(si, ti), -d}},
                         0.0, 0.0, t == 0 ? "state_of_charge_cyclic" : "state_of_charge", at(src.id, t));
        }
    }
}

void build_hvdc_block(Formulation& f, const NetworkCase& net, const SnapshotSeries& series) {
    auto& prog = f.program;
    const std::size_t D = net.dc_branches.size(), T = series.size();
    f.vars.u_dc.assign(D, -1);
    f.vars.dc_from = absent(D, T);
    f.vars.dc_to = absent(D, T);
    f.vars.dc_fwd = absent(D, T);
    f.vars.dc_bwd = absent(D, T);
    for (std::size_t l = 0; l < D; ++l) {
        const auto& link = net.dc_branches[l];
        const int u = prog.add_variable(link.u_min, link.u_max, "u[" + link.id + "]");
        f.vars.u_dc[l] = u;
        const double cap = std::isfinite(link.u_max) ? link.p_max * link.u_max : kInf;
        const auto li = static_cast<Eigen::Index>(l);
        for (std::size_t t = 0; t < T; ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            const int fwd = prog.add_variable(0.0, cap, "fwd[" + at(link.id, t) + "]");
            const int bwd = prog.add_variable(0.0, cap, "bwd[" + at(link.id, t) + "]");
            const int pf = prog.add_variable(-kInf, kInf, "p_from[" + at(link.id, t) + "]");
            const int pt = prog.add_variable(-kInf, kInf, "p_to[" + at(link.id, t) + "]");
            f.vars.dc_fwd(li, ti) = fwd;
            f.vars.dc_bwd(li, ti) = bwd;
            f.vars.dc_from(li, ti) = pf;
            f.vars.dc_to(li, ti) = pt;
            prog.add_row({{pf, 1.0}, {fwd, -1.0}, {bwd, 1.0 - link.eta}}, 0.0, 0.0, "flow_hvdc_along", at(link.id, t));
            prog.add_row({{pt, 1.0}, {bwd, -1.0}, {fwd, 1.0 - link.eta}}, 0.0, 0.0, "flow_hvdc_against",
                         at(link.id, t));
            for (int end : {pf, pt}) {
                prog.add_row({{end, 1.0}, {u, -link.p_max}}, -kInf, 0.0, "flow_hvdc_limit", at(link.id, t));
                prog.add_row({{end, 1.0}, {u, link.p_max}}, 0.0, kInf, "flow_hvdc_limit", at(link.id, t));
            }
        }
    }
}

namespace {

// Shared by the DC and DC-lossy builders.
void build_dc_family(Formulation& f, const NetworkCase& net, const SnapshotSeries& series, bool lossy) {
    auto& prog = f.program;
    const std::size_t L = net.ac_branches.size(), N = net.buses.size(), T = series.size();
    add_ac_circuits(f, net);
    f.vars.p_from = absent(L, T);
    f.vars.p_loss = absent(L, T);
    for (std::size_t l = 0; l < L; ++l) {
        const auto& br = net.ac_branches[l];
        const auto& ph = f.physics[l];
        const double angle_cap = br.theta_max / ph.x;
        const int u = f.vars.u_ac[l];
        const double rating = br.a * br.f_max;
        const auto tangents = loss_tangent_points(br.a, br.f_max, f.u_max_ac[l], f.options.tangents);
        for (std::size_t t = 0; t < T; ++t) {
            const auto li = static_cast<Eigen::Index>(l), ti = static_cast<Eigen::Index>(t);
            const int p = prog.add_variable(-angle_cap, angle_cap, "p[" + at(br.id, t) + "]",
                                            "voltage_angle_difference_dc_approx");
            f.vars.p_from(li, ti) = p;
            if (!lossy) {
                prog.add_row({{p, 1.0}, {u, -rating}}, -kInf, 0.0, "thermal_limit_dc", at(br.id, t));
                prog.add_row({{p, 1.0}, {u, rating}}, 0.0, kInf, "thermal_limit_dc", at(br.id, t));
                continue;
            }
            const int loss = prog.add_variable(0.0, kInf, "p_loss[" + at(br.id, t) + "]");
            f.vars.p_loss(li, ti) = loss;
            for (double p0 : tangents)
                prog.add_row({{loss, 1.0}, {p, -2.0 * ph.r * p0}}, -ph.r * p0 * p0, kInf, "losses_p_dc", at(br.id, t));
            prog.add_row({{p, 1.0}, {loss, 1.0}, {u, -rating}}, -kInf, 0.0, "thermal_limit_dc_lossy", at(br.id, t));
            prog.add_row({{p, -1.0}, {loss, 1.0}, {u, -rating}}, -kInf, 0.0, "thermal_limit_dc_lossy", at(br.id, t));
        }
    }
    const auto basis = build_cycle_basis(net);
    for (Eigen::Index c = 0; c < basis.matrix.cols(); ++c) {
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<Term> terms;
            for (Eigen::SparseMatrix<double>::InnerIterator it(basis.matrix, c); it; ++it)
                terms.push_back({f.vars.p_from(it.row(), static_cast<Eigen::Index>(t)),
                                 it.value() * f.physics[static_cast<std::size_t>(it.row())].x});
            prog.add_row(std::move(terms), 0.0, 0.0, "kvl", "cycle" + std::to_string(c) + "@" + std::to_string(t));
        }
    }
    f.balance_p = absent(N, T);
    const char* tag = lossy ? "nodal_balance_p_dc_lossy" : "nodal_balance_p_dc";
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < T; ++t) {
            auto terms = injection_terms(f, net, n, t, false);
            const auto ti = static_cast<Eigen::Index>(t);
            for (std::size_t l = 0; l < L; ++l) {
                const auto& br = net.ac_branches[l];
                const auto li = static_cast<Eigen::Index>(l);
                if (br.from != n && br.to != n) continue;
                terms.push_back({f.vars.p_from(li, ti), br.from == n ? -1.0 : 1.0});
                if (lossy) terms.push_back({f.vars.p_loss(li, ti), -0.5});
            }
            add_dc_link_terms(f, net, n, t, terms);
            const double d = series.load_p(static_cast<Eigen::Index>(n), ti);
            f.balance_p(static_cast<Eigen::Index>(n), ti) =
                prog.add_row(std::move(terms), d, d, tag, at(net.buses[n].id, t));
        }
}

// Shared by LPAC and decoupled: directed flows, voltages, balances.
void build_ac_family(Formulation& f, const NetworkCase& net, const SnapshotSeries& series, bool decoupled) {
    auto& prog = f.program;
    const std::size_t L = net.ac_branches.size(), N = net.buses.size(), T = series.size();
    add_ac_circuits(f, net);
    add_bus_voltages(f, net, T);
    f.vars.p_from = absent(L, T);
    f.vars.p_to = absent(L, T);
    f.vars.q_from = absent(L, T);
    f.vars.q_to = absent(L, T);
    f.vars.cos_relax = absent(L, T);
    f.vars.p_loss = absent(L, T);
    f.vars.q_dem = absent(L, T);
    for (std::size_t l = 0; l < L; ++l) {
        const auto& br = net.ac_branches[l];
        const auto& ph = f.physics[l];
        const auto li = static_cast<Eigen::Index>(l);
        const auto from = static_cast<Eigen::Index>(br.from), to = static_cast<Eigen::Index>(br.to);
        for (std::size_t t = 0; t < T; ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            const std::string label = at(br.id, t);
            const int pf = prog.add_variable(-kInf, kInf, "p_from[" + label + "]");
            const int pt = prog.add_variable(-kInf, kInf, "p_to[" + label + "]");
            const int qf = prog.add_variable(-kInf, kInf, "q_from[" + label + "]");
            const int qt = prog.add_variable(-kInf, kInf, "q_to[" + label + "]");
            f.vars.p_from(li, ti) = pf;
            f.vars.p_to(li, ti) = pt;
            f.vars.q_from(li, ti) = qf;
            f.vars.q_to(li, ti) = qt;
            const int vf = f.vars.v(from, ti), vt = f.vars.v(to, ti);
            const int af = f.vars.theta(from, ti), at_ = f.vars.theta(to, ti);
            const char* ptag = decoupled ? "decoupled_p" : "lpac_p";
            const char* qtag = decoupled ? "decoupled_q" : "lpac_q";
            // p = g (v_n - v_m) [+ g (1 - cos)] - b theta
            // q = -(b_sh/2)(2 v_n - 1) - b (v_n - v_m) [- b (1 - cos)] - g theta
            int cs = -1;
            if (!decoupled) {
                cs = prog.add_variable(std::cos(br.theta_max), 1.0, "cos[" + label + "]");
                f.vars.cos_relax(li, ti) = cs;
            }
            struct End {
                int p, q, vn, vm, an, am;
            };
            for (const End& e : {End{pf, qf, vf, vt, af, at_}, End{pt, qt, vt, vf, at_, af}}) {
                std::vector<Term> pr = {{e.p, 1.0}, {e.vn, -ph.g}, {e.vm, ph.g}, {e.an, ph.b}, {e.am, -ph.b}};
                std::vector<Term> qr = {{e.q, 1.0}, {e.vn, ph.b_sh + ph.b}, {e.vm, -ph.b}, {e.an, ph.g}, {e.am, -ph.g}};
                double prhs = 0.0, qrhs = ph.b_sh / 2;
                if (!decoupled) {
                    pr.push_back({cs, ph.g});
                    prhs += ph.g;
                    qr.push_back({cs, -ph.b});
                    qrhs -= ph.b;
                }
                prog.add_row(std::move(pr), prhs, prhs, ptag, label);
                prog.add_row(std::move(qr), qrhs, qrhs, qtag, label);
            }
            if (!decoupled) {
                const double k = cosine_cut_coefficient(br.theta_max);
                add_quadratic_cut(f, angle_difference(f, br, ti), k, {{cs, -1.0}}, 1.0, "cosine_relaxation", label);
                add_thermal_cone(f, br, l, Affine{{pf, 1.0}}, Affine{{qf, 1.0}}, "thermal_limit", label);
                add_thermal_cone(f, br, l, Affine{{pt, 1.0}}, Affine{{qt, 1.0}}, "thermal_limit", label);
                continue;
            }
            const double tm2 = br.theta_max * br.theta_max;
            const int loss = prog.add_variable(0.0, ph.g * tm2, "p_loss[" + label + "]", "decoupled_p_losses");
            const int dem = prog.add_variable(0.0, -ph.b * tm2, "q_dem[" + label + "]", "decoupled_q_losses");
            f.vars.p_loss(li, ti) = loss;
            f.vars.q_dem(li, ti) = dem;
            if (ph.g > 0)
                add_quadratic_cut(f, angle_difference(f, br, ti), ph.g, {{loss, 1.0}}, 0.0, "decoupled_p_losses", label);
            if (ph.b < 0)
                add_quadratic_cut(f, angle_difference(f, br, ti), -ph.b, {{dem, 1.0}}, 0.0, "decoupled_q_losses", label);
            add_thermal_cone(f, br, l, Affine{{pf, 1.0}, {loss, 1.0}}, Affine{{qf, 1.0}, {dem, 1.0}},
                             "thermal_limit_decoupled", label);
            add_thermal_cone(f, br, l, Affine{{pt, 1.0}, {loss, 1.0}}, Affine{{qt, 1.0}, {dem, 1.0}},
                             "thermal_limit_decoupled", label);
        }
    }
    add_angle_limits(f, net, T);

    f.balance_p = absent(N, T);
    f.balance_q = absent(N, T);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < T; ++t) {
            const auto ni = static_cast<Eigen::Index>(n), ti = static_cast<Eigen::Index>(t);
            auto pt = injection_terms(f, net, n, t, false);
            auto qt = injection_terms(f, net, n, t, true);
            for (std::size_t l = 0; l < L; ++l) {
                const auto& br = net.ac_branches[l];
                const auto li = static_cast<Eigen::Index>(l);
                if (br.from == n) {
                    pt.push_back({f.vars.p_from(li, ti), -1.0});
                    qt.push_back({f.vars.q_from(li, ti), -1.0});
                }
                if (br.to == n) {
                    pt.push_back({f.vars.p_to(li, ti), -1.0});
                    qt.push_back({f.vars.q_to(li, ti), -1.0});
                }
                if (decoupled && (br.from == n || br.to == n)) {
                    pt.push_back({f.vars.p_loss(li, ti), -0.5});
                    qt.push_back({f.vars.q_dem(li, ti), -0.5});
                }
            }
            add_dc_link_terms(f, net, n, t, pt);
            const double dp = series.load_p(ni, ti), dq = series.load_q(ni, ti);
            const std::string label = at(net.buses[n].id, t);
            f.balance_p(ni, ti) = prog.add_row(std::move(pt), dp, dp,
                                               decoupled ? "ac_nodal_balance_p_decoupled" : "ac_nodal_balance_p", label);
            f.balance_q(ni, ti) = prog.add_row(std::move(qt), dq, dq,
                                               decoupled ? "ac_nodal_balance_q_decoupled" : "ac_nodal_balance_q", label);
        }
}

}  // namespace

void build_dc_flow(Formulation& f, const NetworkCase& net, const SnapshotSeries& series) {
    build_dc_family(f, net, series, false);
}

void build_dc_lossy_flow(Formulation& f, const NetworkCase& net, const SnapshotSeries& series) {
    build_dc_family(f, net, series, true);
}

void build_lpac_flow(Formulation& f, const NetworkCase& net, const SnapshotSeries& series) {
    build_ac_family(f, net, series, false);
}

void build_decoupled_flow(Formulation& f, const NetworkCase& net, const SnapshotSeries& series) {
    build_ac_family(f, net, series, true);
}

void build_objective(Formulation& f, const NetworkCase& net, const SnapshotSeries& series) {
    auto& prog = f.program;
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        const auto& src = net.sources[s];
        const auto si = static_cast<Eigen::Index>(s);
        prog.add_cost(f.vars.u_source[s], src.capital_cost);
        for (std::size_t t = 0; t < series.size(); ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            prog.add_cost(f.vars.p(si, ti), src.marginal_cost * series.duration[t]);
            prog.add_cost(f.vars.beta_su(si, ti), src.startup_cost);
        }
    }
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l)
        prog.add_cost(f.vars.u_ac[l], net.ac_branches[l].capital_cost);
    for (std::size_t l = 0; l < net.dc_branches.size(); ++l)
        prog.add_cost(f.vars.u_dc[l], net.dc_branches[l].capital_cost);
}

Formulation build_formulation(const NetworkCase& net, const SnapshotSeries& series, FormulationKind kind,
                              const FormulationOptions& options) {
    if (options.tangents < 1) throw std::invalid_argument("tangent count must be at least 1");
    Formulation f;
    f.kind = kind;
    f.options = options;
    const bool dc_family = kind == FormulationKind::dc || kind == FormulationKind::dc_lossy;
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
        const auto& br = net.ac_branches[l];
        f.physics.push_back(branch_physics(br, circuits_for(options, br, l)));
        f.u_max_ac.push_back(dc_family ? tightened_u_max(br, f.physics.back()) : br.u_max);
    }
    build_commitment_block(f, net, series);
    build_injection_block(f, net, series);
    build_storage_block(f, net, series);
    build_hvdc_block(f, net, series);
    switch (kind) {
        case FormulationKind::dc: build_dc_flow(f, net, series); break;
        case FormulationKind::dc_lossy: build_dc_lossy_flow(f, net, series); break;
        case FormulationKind::lpac: build_lpac_flow(f, net, series); break;
        case FormulationKind::decoupled: build_decoupled_flow(f, net, series); break;
    }
    build_objective(f, net, series);
    return f;
}

std::vector<std::string> emitted_constraint_tags(const conic::ConvexProgram& program) {
    std::set<std::string> tags;
    for (const auto& r : program.rows()) tags.insert(r.tag);
    for (const auto& c : program.cones()) tags.insert(c.tag);
    for (const auto& v : program.variables())
        if (!v.bound_tag.empty()) tags.insert(v.bound_tag);
    return {tags.begin(), tags.end()};
}

namespace {

Eigen::MatrixXd read_grid(const Grid& g, const Eigen::VectorXd& x, double fallback = 0.0) {
    Eigen::MatrixXd out(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) out(i, j) = g(i, j) >= 0 ? x[g(i, j)] : fallback;
    return out;
}

Eigen::VectorXd read_list(const std::vector<int>& ids, const Eigen::VectorXd& x) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) out[static_cast<Eigen::Index>(i)] = x[ids[i]];
    return out;
}

}  // namespace

PlanSolution extract_plan(const Formulation& f, const NetworkCase& net, const SnapshotSeries& series,
                          const conic::Solution& solution) {
    const auto& x = solution.x;
    const auto& v = f.vars;
    const auto N = static_cast<Eigen::Index>(net.buses.size());
    const auto L = static_cast<Eigen::Index>(net.ac_branches.size());
    const auto T = static_cast<Eigen::Index>(series.size());
    PlanSolution plan;
    plan.kind = f.kind;
    plan.u_source = read_list(v.u_source, x);
    plan.u_ac = read_list(v.u_ac, x);
    plan.u_dc = read_list(v.u_dc, x);
    plan.parameter_circuits.resize(L);
    for (Eigen::Index l = 0; l < L; ++l) plan.parameter_circuits[l] = f.physics[static_cast<std::size_t>(l)].circuits;
    plan.p = read_grid(v.p, x);
    plan.q = read_grid(v.q, x);
    plan.beta = read_grid(v.beta, x);
    plan.beta_su = read_grid(v.beta_su, x);
    plan.beta_sd = Eigen::MatrixXd::Zero(plan.beta.rows(), plan.beta.cols());
    plan.p_charge = read_grid(v.p_charge, x);
    plan.p_inflow = read_grid(v.p_inflow, x);
    plan.energy = read_grid(v.energy, x);
    plan.p_loss = read_grid(v.p_loss, x);
    plan.q_dem = read_grid(v.q_dem, x);
    plan.cos_relax = read_grid(v.cos_relax, x, 1.0);
    plan.dc_from = read_grid(v.dc_from, x);
    plan.dc_to = read_grid(v.dc_to, x);
    plan.dc_fwd = read_grid(v.dc_fwd, x);
    plan.dc_bwd = read_grid(v.dc_bwd, x);

    if (models_reactive_power(f.kind)) {
        plan.p_from = read_grid(v.p_from, x);
        plan.p_to = read_grid(v.p_to, x);
        plan.q_from = read_grid(v.q_from, x);
        plan.q_to = read_grid(v.q_to, x);
        if (f.kind == FormulationKind::decoupled) {
            // bus-side injections include the split losses
            plan.p_from += plan.p_loss / 2;
            plan.p_to += plan.p_loss / 2;
            plan.q_from += plan.q_dem / 2;
            plan.q_to += plan.q_dem / 2;
        }
        plan.v = read_grid(v.v, x);
        plan.theta = read_grid(v.theta, x);
    } else {
        const Eigen::MatrixXd mid = read_grid(v.p_from, x);
        plan.p_from = mid + plan.p_loss / 2;
        plan.p_to = -mid + plan.p_loss / 2;
        plan.q_from = Eigen::MatrixXd::Zero(L, T);
        plan.q_to = Eigen::MatrixXd::Zero(L, T);
        plan.v = Eigen::MatrixXd::Ones(N, T);
        plan.theta.resize(N, T);
        Eigen::VectorXd reactance(L);
        for (Eigen::Index l = 0; l < L; ++l) reactance[l] = f.physics[static_cast<std::size_t>(l)].x;
        for (Eigen::Index t = 0; t < T; ++t) plan.theta.col(t) = angles_from_flows(net, mid.col(t), reactance);
    }

    plan.price = Eigen::MatrixXd::Zero(N, T);
    if (solution.row_dual_upper.size() > 0)
        for (Eigen::Index n = 0; n < N; ++n)
            for (Eigen::Index t = 0; t < T; ++t)
                plan.price(n, t) = solution.row_dual_upper[f.balance_p(n, t)] / series.duration[static_cast<std::size_t>(t)];
    plan.objective = solution.objective;
    plan.cost = evaluate_cost(net, series, plan);
    return plan;
}

ObjectiveBreakdown evaluate_cost(const NetworkCase& net, const SnapshotSeries& series, const PlanSolution& plan) {
    ObjectiveBreakdown c;
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        const auto& src = net.sources[s];
        const auto si = static_cast<Eigen::Index>(s);
        c.capital_sources += src.capital_cost * plan.u_source[si];
        for (std::size_t t = 0; t < series.size(); ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            c.operation += src.marginal_cost * plan.p(si, ti) * series.duration[t];
            c.startup += src.startup_cost * plan.beta_su(si, ti);
            if (plan.beta_sd.size()) c.shutdown += src.startup_cost * plan.beta_sd(si, ti);
        }
    }
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l)
        c.capital_ac += net.ac_branches[l].capital_cost * plan.u_ac[static_cast<Eigen::Index>(l)];
    for (std::size_t l = 0; l < net.dc_branches.size(); ++l)
        c.capital_dc += net.dc_branches[l].capital_cost * plan.u_dc[static_cast<Eigen::Index>(l)];
    return c;
}

}  // namespace accep
