#include "accep/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace accep {

LossAudit audit_losses(const NetworkCase& net, const PlanSolution& plan, double flag_tol) {
    if (!models_losses(plan.kind))
        throw std::invalid_argument(std::string("loss audit is not defined for the ") + to_string(plan.kind) +
                                    " formulation");
    LossAudit audit;
    audit.kind = plan.kind;
    audit.min_slack = std::numeric_limits<double>::infinity();
    audit.max_slack = -std::numeric_limits<double>::infinity();
    const auto T = plan.p_from.cols();
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
        const auto& br = net.ac_branches[l];
        const auto li = static_cast<Eigen::Index>(l);
        const double circuits = plan.parameter_circuits.size() ? plan.parameter_circuits[li] : br.u_min;
        const auto ph = branch_physics(br, circuits);
        const double k = cosine_cut_coefficient(br.theta_max);
        for (Eigen::Index t = 0; t < T; ++t) {
            LossRecord r;
            r.branch = br.id;
            r.branch_index = l;
            r.snapshot = static_cast<std::size_t>(t);
            const auto f = static_cast<Eigen::Index>(br.from), to = static_cast<Eigen::Index>(br.to);
            r.theta = plan.theta(f, t) - plan.theta(to, t);
            switch (plan.kind) {
                case FormulationKind::lpac:
                    r.model = plan.p_from(li, t) + plan.p_to(li, t);
                    r.bound = 2.0 * ph.g * k * r.theta * r.theta;
                    break;
                case FormulationKind::decoupled:
                    r.model = plan.p_loss(li, t);
                    r.bound = ph.g * r.theta * r.theta;
                    break;
                default: {
                    const double mid = 0.5 * (plan.p_from(li, t) - plan.p_to(li, t));
                    r.model = plan.p_loss(li, t);
                    r.bound = ph.r * mid * mid;
                    break;
                }
            }
            r.slack = r.model - r.bound;
            r.fictitious = r.slack > flag_tol;
            r.below_bound = r.slack < 0.0;
            audit.total_model += r.model;
            audit.total_bound += r.bound;
            audit.min_slack = std::min(audit.min_slack, r.slack);
            audit.max_slack = std::max(audit.max_slack, r.slack);
            if (r.fictitious) ++audit.fictitious_count;
            audit.records.push_back(r);
        }
    }
    if (audit.records.empty()) audit.min_slack = audit.max_slack = 0.0;
    return audit;
}

Eigen::VectorXd energy_balance_residual(const NetworkCase& net, const SnapshotSeries& series,
                                        const PlanSolution& plan) {
    const auto T = static_cast<Eigen::Index>(series.size());
    Eigen::VectorXd r = Eigen::VectorXd::Zero(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        double v = plan.p.col(t).sum() - series.load_p.col(t).sum();
        if (plan.p_charge.size()) v -= plan.p_charge.col(t).sum();
        if (plan.p_from.size()) v -= plan.p_from.col(t).sum() + plan.p_to.col(t).sum();
        if (plan.dc_from.size()) v -= plan.dc_from.col(t).sum() + plan.dc_to.col(t).sum();
        r[t] = v;
    }
    (void)net;
    return r;
}

CarrierTotals carrier_totals(const NetworkCase& net, const SnapshotSeries& series, const PlanSolution& plan) {
    CarrierTotals c;
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
        const auto& src = net.sources[s];
        const auto si = static_cast<Eigen::Index>(s);
        const double rating = src.kind == SourceKind::compensator ? src.q_max : src.p_max;
        c.capacity[src.carrier] += rating * plan.u_source[si];
        double e = 0.0;
        for (std::size_t t = 0; t < series.size(); ++t) e += plan.p(si, static_cast<Eigen::Index>(t)) * series.duration[t];
        c.energy[src.carrier] += e;
    }
    return c;
}

double transmission_expansion(const NetworkCase& net, const PlanSolution& plan) {
    double total = 0.0;
    for (std::size_t l = 0; l < net.ac_branches.size(); ++l) {
        const auto& br = net.ac_branches[l];
        total += (plan.u_ac[static_cast<Eigen::Index>(l)] - br.u_min) * br.f_max * br.length_km;
    }
    for (std::size_t l = 0; l < net.dc_branches.size(); ++l) {
        const auto& br = net.dc_branches[l];
        total += (plan.u_dc[static_cast<Eigen::Index>(l)] - br.u_min) * br.p_max * br.length_km;
    }
    return total;
}

Summary summarize(const NetworkCase& net, const SnapshotSeries& series, const PlanSolution& initial,
                  const PlanSolution& final_plan, const ReinforcementLog* log) {
    Summary s;
    if (log && series.size() > 0)
        s.feasible_share = 1.0 - static_cast<double>(log->failing.size()) / static_cast<double>(series.size());
    const auto rd = account_redispatch(initial, final_plan, series);
    s.redispatch_positive = rd.positive;
    s.redispatch_negative = rd.negative;
    s.cost_initial = evaluate_cost(net, series, initial).total();
    s.cost_final = evaluate_cost(net, series, final_plan).total();
    s.transmission_expansion_initial = transmission_expansion(net, initial);
    s.transmission_expansion_final = transmission_expansion(net, final_plan);
    for (std::size_t k = 0; k < net.sources.size(); ++k) {
        if (net.sources[k].kind != SourceKind::storage) continue;
        const auto si = static_cast<Eigen::Index>(k);
        for (std::size_t t = 0; t < series.size(); ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            if (final_plan.p_charge.size()) s.storage_charge += final_plan.p_charge(si, ti) * series.duration[t];
            s.storage_discharge += final_plan.p(si, ti) * series.duration[t];
        }
    }
    s.initial_mix = carrier_totals(net, series, initial);
    s.final_mix = carrier_totals(net, series, final_plan);
    return s;
}

void write_summary(const Summary& s, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    auto open = [&](const char* name) {
        std::ofstream out(d / name);
        if (!out) throw std::runtime_error("cannot write " + (d / name).string());
        return out;
    };
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    {
        auto out = open("summary.csv");
        out << "metric,value\n";
        out << "feasible_share," << num(s.feasible_share) << "\n";
        out << "redispatch_positive," << num(s.redispatch_positive) << "\n";
        out << "redispatch_negative," << num(s.redispatch_negative) << "\n";
        out << "cost_initial," << num(s.cost_initial) << "\n";
        out << "cost_final," << num(s.cost_final) << "\n";
        out << "transmission_expansion_initial," << num(s.transmission_expansion_initial) << "\n";
        out << "transmission_expansion_final," << num(s.transmission_expansion_final) << "\n";
        out << "storage_charge," << num(s.storage_charge) << "\n";
        out << "storage_discharge," << num(s.storage_discharge) << "\n";
    }
    auto mix = [&](const char* name, const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
        auto out = open(name);
        out << "plan,carrier,value\n";
        for (const auto& [k, v] : a) out << "initial," << k << "," << num(v) << "\n";
        for (const auto& [k, v] : b) out << "final," << k << "," << num(v) << "\n";
    };
    mix("capacity_mix.csv", s.initial_mix.capacity, s.final_mix.capacity);
    mix("energy_mix.csv", s.initial_mix.energy, s.final_mix.energy);
}

}  // namespace accep
