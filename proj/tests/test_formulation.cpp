#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "accep/caseio.hpp"
#include "accep/formulation.hpp"
#include "support.hpp"

using namespace accep;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PlanSolution solve_plan(const NetworkCase& net, const SnapshotSeries& series, FormulationKind kind) {
    const auto f = build_formulation(net, series, kind);
    const auto sol = conic::solve(f.program);
    REQUIRE(sol.ok());
    return extract_plan(f, net, series, sol);
}

std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

const std::vector<std::string> kShared = {
    "online_limit",     "online_consistency", "online_boundary",   "ps_injections_online",
    "storage_unit_charging", "storage_unit_complementarity_relaxation", "state_of_charge_limits",
    "state_of_charge",  "state_of_charge_cyclic", "flow_hvdc_along", "flow_hvdc_against", "flow_hvdc_limit"};

std::vector<std::string> with_shared(std::vector<std::string> extra) {
    extra.insert(extra.end(), kShared.begin(), kShared.end());
    return sorted(extra);
}

}  // namespace

TEST_CASE("constraint families per formulation", "[formulation]") {
    const auto lc = load_case(testing::data_path("case24.json"));
    const std::pair<FormulationKind, std::vector<std::string>> rows[] = {
        {FormulationKind::dc,
         with_shared({"kvl", "thermal_limit_dc", "voltage_angle_difference_dc_approx", "nodal_balance_p_dc"})},
        {FormulationKind::dc_lossy,
         with_shared({"losses_p_dc", "kvl", "thermal_limit_dc_lossy", "voltage_angle_difference_dc_approx",
                      "nodal_balance_p_dc_lossy"})},
        {FormulationKind::lpac,
         with_shared({"qs_injection_online", "pq_upper", "pq_lower", "thermal_limit", "voltage_angle_difference",
                      "ac_nodal_balance_p", "ac_nodal_balance_q", "cosine_relaxation", "lpac_p", "lpac_q"})},
        {FormulationKind::decoupled,
         with_shared({"qs_injection_online", "pq_upper", "pq_lower", "voltage_angle_difference",
                      "ac_nodal_balance_p_decoupled", "ac_nodal_balance_q_decoupled", "decoupled_p", "decoupled_q",
                      "decoupled_p_losses", "decoupled_q_losses", "thermal_limit_decoupled"})},
    };
    for (const auto& [kind, tags] : rows) {
        INFO(to_string(kind));
        const auto f = build_formulation(lc.network, lc.series, kind);
        CHECK(emitted_constraint_tags(f.program) == tags);
        CHECK(expected_constraint_tags(kind) == tags);
    }
}

TEST_CASE("kind names round trip", "[formulation]") {
    for (auto k : {FormulationKind::dc, FormulationKind::dc_lossy, FormulationKind::lpac, FormulationKind::decoupled})
        CHECK(parse_formulation_kind(to_string(k)) == k);
    CHECK_FALSE(parse_formulation_kind("ac").has_value());
}

TEST_CASE("loss tangent points", "[formulation]") {
    const auto p = loss_tangent_points(0.7, 1.0, 2.0, 3);
    const std::vector<double> want = {-1.4, -0.9333333333333333, -0.4666666666666667,
                                      0.4666666666666667, 0.9333333333333333, 1.4};
    REQUIRE(p.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK_THAT(p[i], WithinAbs(want[i], 1e-12));
}

TEST_CASE("cosine cut and loss factor", "[formulation]") {
    const double t = kPi / 6;
    CHECK_THAT(cosine_cut_coefficient(t), WithinAbs((1.0 - std::sqrt(3.0) / 2.0) / (t * t), 1e-15));
    CHECK_THAT(cosine_cut_coefficient(t), WithinAbs(0.48868, 1e-5));
    CHECK_THAT(compare_loss_models(t), WithinAbs(0.97736, 1e-5));
    CHECK_THAT(compare_loss_models(kPi / 12), WithinAbs(0.99430, 1e-5));
    // 2 (1 - cos t) / t^2 = 1 - t^2 / 12 + O(t^4)
    CHECK_THAT(compare_loss_models(1e-4), WithinAbs(1.0 - 1e-8 / 12.0, 1e-15));
    CHECK_THROWS_AS(compare_loss_models(0.6), std::domain_error);
    CHECK_THROWS_AS(compare_loss_models(0.0), std::domain_error);
}

TEST_CASE("linearised flows on the flat profile", "[formulation]") {
    const auto br = testing::line("l", 0, 1, 0.01, 0.1, 0.04);
    const auto ph = branch_physics(br, 1.0);
    const auto lp = lpac_flows(ph, 1.0, 1.0, 0.0, 1.0);
    CHECK(lp.p_from == 0.0);
    CHECK(lp.p_to == 0.0);
    CHECK_THAT(lp.q_from, WithinAbs(-0.02, 1e-15));
    CHECK_THAT(lp.q_to, WithinAbs(-0.02, 1e-15));
    const auto dp = decoupled_flows(ph, 1.0, 1.0, 0.0);
    CHECK_THAT(dp.q_from, WithinAbs(-0.02, 1e-15));
}

TEST_CASE("lpac losses at the cosine cut", "[formulation]") {
    const auto br = testing::line("l", 0, 1, 0.02, 0.1);
    const auto ph = branch_physics(br, 1.0);
    const double k = cosine_cut_coefficient(kPi / 6);
    for (double th : {-0.3, 0.05, 0.2}) {
        const auto f = lpac_flows(ph, 1.0, 1.0, th, 1.0 - k * th * th);
        CHECK_THAT(f.p_from + f.p_to, WithinAbs(2.0 * ph.g * k * th * th, 1e-15));
    }
}

TEST_CASE("branch parameters scale with circuits", "[formulation]") {
    const auto br = testing::line("l", 0, 1, 0.01, 0.1, 0.02);
    const auto one = branch_physics(br, 1.0), three = branch_physics(br, 3.0);
    CHECK_THAT(three.g, WithinRel(3.0 * one.g, 1e-14));
    CHECK_THAT(three.b, WithinRel(3.0 * one.b, 1e-14));
    CHECK_THAT(three.b_sh, WithinRel(0.06, 1e-14));
    CHECK_THAT(three.x, WithinRel(0.1 / 3.0, 1e-14));
    // series admittance of r + jx
    CHECK_THAT(one.g, WithinRel(0.01 / (0.01 * 0.01 + 0.1 * 0.1), 1e-14));
    CHECK_THAT(one.b, WithinRel(-0.1 / (0.01 * 0.01 + 0.1 * 0.1), 1e-14));
}

TEST_CASE("single snapshot drops the consistency rows", "[formulation]") {
    const auto lc = load_case(testing::data_path("case3.json"));
    const auto f = build_formulation(lc.network, lc.series, FormulationKind::dc);
    const auto tags = emitted_constraint_tags(f.program);
    CHECK(std::count(tags.begin(), tags.end(), "online_limit") == 1);
    CHECK(std::count(tags.begin(), tags.end(), "online_boundary") == 1);
    CHECK(std::count(tags.begin(), tags.end(), "online_consistency") == 0);
}

TEST_CASE("equal reactances split the transfer two to one", "[formulation]") {
    auto net = testing::triangle();
    net.sources.push_back(testing::generator("g", 0, 3, 1.0, 1.0));
    auto series = SnapshotSeries::uniform(3, 1, 1);
    series.load_p(2, 0) = 0.6;
    series.load_q = Eigen::MatrixXd::Zero(3, 1);
    const auto plan = solve_plan(net, series, FormulationKind::dc);
    CHECK_THAT(plan.p_from(1, 0), WithinAbs(0.4, 1e-6));
    CHECK_THAT(plan.p_from(0, 0), WithinAbs(0.2, 1e-6));
    CHECK_THAT(plan.p_from(2, 0), WithinAbs(0.2, 1e-6));
}

TEST_CASE("zero availability forces zero output", "[formulation]") {
    auto net = testing::two_bus();
    net.sources.push_back(testing::generator("cheap", 0, 3, 1.0, 1.0));
    net.sources.push_back(testing::generator("dear", 1, 3, 1.0, 50.0));
    auto series = SnapshotSeries::uniform(2, 2, 2);
    series.load_p(1, 0) = series.load_p(1, 1) = 0.5;
    series.load_q = Eigen::MatrixXd::Zero(2, 2);
    series.availability(0, 1) = 0.0;
    const auto plan = solve_plan(net, series, FormulationKind::dc);
    CHECK(std::abs(plan.p(0, 1)) < 1e-7);
    CHECK_THAT(plan.p(1, 1), WithinAbs(0.5, 1e-6));
}

TEST_CASE("objective recomputed from plan values", "[formulation]") {
    const auto lc = load_case(testing::data_path("case5.json"));
    for (auto kind : {FormulationKind::dc, FormulationKind::lpac}) {
        const auto plan = solve_plan(lc.network, lc.series, kind);
        const double recomputed = evaluate_cost(lc.network, lc.series, plan).total();
        CHECK_THAT(recomputed, WithinRel(plan.objective, 1e-8));
    }
}

TEST_CASE("cost evaluation from hand-built plans", "[formulation]") {
    auto net = testing::two_bus();
    net.sources.push_back(testing::generator("g", 0, 3, 10.0, 0.0));
    const auto series = SnapshotSeries::uniform(2, 1, 1);
    PlanSolution plan;
    plan.u_source = Eigen::VectorXd::Constant(1, 2.0);
    plan.u_ac = Eigen::VectorXd::Ones(1);
    plan.p = plan.beta = plan.beta_su = Eigen::MatrixXd::Zero(1, 1);
    CHECK_THAT(evaluate_cost(net, series, plan).total(), WithinAbs(20.0, 1e-12));
    net.sources[0].capital_cost = 0.0;
    CHECK(evaluate_cost(net, series, plan).total() == 0.0);
}

TEST_CASE("commitment and storage identities hold at the optimum", "[formulation]") {
    const auto lc = load_case(testing::data_path("case5.json"));
    const auto plan = solve_plan(lc.network, lc.series, FormulationKind::dc_lossy);
    const auto T = static_cast<Eigen::Index>(lc.series.size());
    for (std::size_t s = 0; s < lc.network.sources.size(); ++s) {
        const auto& src = lc.network.sources[s];
        const auto si = static_cast<Eigen::Index>(s);
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto prev = t == 0 ? T - 1 : t - 1;
            CHECK(plan.beta(si, t) <= plan.u_source[si] + 1e-7);
            CHECK(plan.beta(si, t) <= plan.beta(si, prev) + plan.beta_su(si, t) + 1e-7);
        }
        if (!src.storage) continue;
        double net_energy = 0.0;
        for (Eigen::Index t = 0; t < T; ++t)
            net_energy += (src.storage->eta_chg * plan.p_charge(si, t) - plan.p(si, t) / src.storage->eta_dis +
                           plan.p_inflow(si, t)) *
                          lc.series.duration[static_cast<std::size_t>(t)];
        CHECK(std::abs(net_energy) < 1e-6);
    }
}

TEST_CASE("lossless branches make the lossy model collapse", "[formulation]") {
    auto lc = load_case(testing::data_path("case5.json"));
    for (auto& br : lc.network.ac_branches) br.r = 0.0;
    const auto dc = solve_plan(lc.network, lc.series, FormulationKind::dc);
    const auto lossy = solve_plan(lc.network, lc.series, FormulationKind::dc_lossy);
    CHECK_THAT(lossy.objective, WithinRel(dc.objective, 1e-6));
    CHECK(lossy.p_loss.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("angle tightening caps dc expansion", "[formulation]") {
    auto br = testing::line("l", 0, 1, 0.0, 0.8, 0.0, 1.0);
    br.u_min = 1.0;
    br.u_max = 3.0;
    CHECK(tightened_u_max(br, branch_physics(br, 1.0)) == 1.0);
    br.x = 0.2;
    CHECK_THAT(tightened_u_max(br, branch_physics(br, 1.0)), WithinAbs(3.0, 1e-12));
}
