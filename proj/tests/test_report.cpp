#include <catch_amalgamated.hpp>

#include <cmath>

#include "accep/caseio.hpp"
#include "accep/reinforce.hpp"
#include "accep/report.hpp"
#include "accep/scp.hpp"
#include "support.hpp"

using namespace accep;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PlanSolution two_bus_plan(FormulationKind kind, double theta, double p_from, double p_to, double p_loss) {
    PlanSolution plan;
    plan.kind = kind;
    plan.parameter_circuits = Eigen::VectorXd::Ones(1);
    plan.theta = Eigen::MatrixXd::Zero(2, 1);
    plan.theta(0, 0) = theta;
    plan.p_from = Eigen::MatrixXd::Constant(1, 1, p_from);
    plan.p_to = Eigen::MatrixXd::Constant(1, 1, p_to);
    plan.p_loss = Eigen::MatrixXd::Constant(1, 1, p_loss);
    return plan;
}

}  // namespace

TEST_CASE("loss audit is undefined without losses", "[report]") {
    const auto net = testing::two_bus();
    CHECK_THROWS_AS(audit_losses(net, two_bus_plan(FormulationKind::dc, 0.1, 1, -1, 0)), std::invalid_argument);
}

TEST_CASE("loss at zero angle is fictitious", "[report]") {
    const auto net = testing::two_bus(0.01, 0.1);
    const auto audit = audit_losses(net, two_bus_plan(FormulationKind::decoupled, 0.0, 0.0, 0.0, 0.01));
    REQUIRE(audit.records.size() == 1);
    CHECK(audit.records[0].bound == 0.0);
    CHECK(audit.records[0].fictitious);
    CHECK(audit.fictitious_count == 1);
}

TEST_CASE("loss bounds per formulation", "[report]") {
    const auto net = testing::two_bus(0.02, 0.1);
    const double g = 0.02 / (0.02 * 0.02 + 0.1 * 0.1);
    const double th = 0.1;

    const double exact = g * th * th;
    const auto dec = audit_losses(net, two_bus_plan(FormulationKind::decoupled, th, 0, 0, exact));
    CHECK_THAT(dec.records[0].bound, WithinRel(exact, 1e-14));
    CHECK(std::abs(dec.records[0].slack) < 1e-15);
    CHECK_FALSE(dec.records[0].fictitious);

    const double k = (1.0 - std::cos(kPi / 6)) / (kPi / 6 * kPi / 6);
    const auto lp = audit_losses(net, two_bus_plan(FormulationKind::lpac, th, 0.5, -0.49, 0.0));
    CHECK_THAT(lp.records[0].bound, WithinRel(2.0 * g * k * th * th, 1e-12));
    CHECK_THAT(lp.records[0].model, WithinAbs(0.01, 1e-15));

    // quadratic resistive loss on the mean flow
    const auto lossy = audit_losses(net, two_bus_plan(FormulationKind::dc_lossy, th, 0.51, -0.49, 0.0));
    CHECK_THAT(lossy.records[0].bound, WithinRel(0.02 * 0.5 * 0.5, 1e-12));
    CHECK(lossy.records[0].below_bound);
}

TEST_CASE("summary of an unchanged plan", "[report]") {
    const auto lc = load_case(testing::data_path("case5.json"));
    const auto plan = run_scp(lc.network, lc.series, FormulationKind::dc_lossy);
    const auto s = summarize(lc.network, lc.series, plan, plan, nullptr);
    CHECK(s.redispatch_positive == 0.0);
    CHECK(s.redispatch_negative == 0.0);
    CHECK(s.cost_final == s.cost_initial);
    CHECK(s.transmission_expansion_final == s.transmission_expansion_initial);
    CHECK_THAT(s.cost_initial, WithinRel(plan.objective, 1e-6));
}

TEST_CASE("losses raise the planning cost", "[report]") {
    const auto lc = load_case(testing::data_path("case5.json"));
    const auto dc = run_scp(lc.network, lc.series, FormulationKind::dc);
    const auto lossy = run_scp(lc.network, lc.series, FormulationKind::dc_lossy);
    CHECK(lossy.objective >= dc.objective - 1e-6 * dc.objective);
}

TEST_CASE("reinforced plans keep the energy balance", "[report]") {
    const auto lc = load_case(testing::data_path("case5.json"));
    const auto initial = run_scp(lc.network, lc.series, FormulationKind::dc);
    const auto out = reinforce(lc.network, lc.series, initial);
    const auto res = energy_balance_residual(lc.network, lc.series, out.plan);
    REQUIRE(res.size() == static_cast<Eigen::Index>(lc.series.size()));
    CHECK(res.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("transmission expansion counts added circuit length", "[report]") {
    auto net = testing::two_bus();
    net.ac_branches[0].u_min = 1.0;
    net.ac_branches[0].u_max = 3.0;
    net.ac_branches[0].f_max = 2.0;
    net.ac_branches[0].length_km = 100.0;
    PlanSolution plan;
    plan.u_ac = Eigen::VectorXd::Constant(1, 2.5);
    plan.u_dc = Eigen::VectorXd::Zero(0);
    CHECK_THAT(transmission_expansion(net, plan), WithinAbs(1.5 * 2.0 * 100.0, 1e-12));
    plan.u_ac[0] = 1.0;
    CHECK(transmission_expansion(net, plan) == 0.0);
}
