#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "accep/acfeas.hpp"
#include "accep/caseio.hpp"
#include "accep/scp.hpp"
#include "support.hpp"

using namespace accep;
using Catch::Matchers::WithinAbs;
using cplx = std::complex<double>;

namespace {

PowerFlowSpec two_bus_spec(double p_load, double q_load) {
    PowerFlowSpec spec;
    spec.p_injection = Eigen::Vector2d(0.0, -p_load);
    spec.q_injection = Eigen::Vector2d(0.0, -q_load);
    spec.slack_buses = {0};
    spec.v_seed = Eigen::Vector2d::Ones();
    spec.theta_seed = Eigen::Vector2d::Zero();
    return spec;
}

// complex power leaving bus `k` of a single pi-section
cplx pi_section_power(const AcBranch& br, cplx vk, cplx vm) {
    const cplx y = 1.0 / cplx(br.r, br.x);
    const cplx i = y * (vk - vm) + cplx(0.0, br.b_sh / 2.0) * vk;
    return vk * std::conj(i);
}

NetworkCase two_bus_with_generator(double u_max) {
    auto net = testing::two_bus(0.01, 0.1, 0.02);
    net.ac_branches[0].u_min = net.ac_branches[0].u_max = 1.0;
    auto g = testing::generator("g", 0, u_max, 1.0, 1.0);
    g.u_min = u_max;
    net.sources.push_back(g);
    return net;
}

}  // namespace

TEST_CASE("flat profile flows carry only line charging", "[acfeas]") {
    const auto br = testing::line("l", 0, 1, 0.01, 0.1, 0.04);
    const auto f = ac_branch_flows(1.0, 1.0, 0.0, br, 1.0);
    CHECK(std::abs(f.p_from) < 1e-15);
    CHECK(std::abs(f.p_to) < 1e-15);
    CHECK_THAT(f.q_from, WithinAbs(-0.02, 1e-15));
    CHECK_THAT(f.q_to, WithinAbs(-0.02, 1e-15));
}

TEST_CASE("branch losses at unit voltage", "[acfeas]") {
    const auto br = testing::line("l", 0, 1, 0.02, 0.1, 0.03);
    const double g = 0.02 / (0.02 * 0.02 + 0.1 * 0.1);
    for (double th : {0.1, -0.25}) {
        const auto f = ac_branch_flows(1.0, 1.0, th, br, 1.0);
        CHECK_THAT(f.p_from + f.p_to, WithinAbs(2.0 * g * (1.0 - std::cos(th)), 1e-14));
    }
}

TEST_CASE("branch flows agree with complex arithmetic", "[acfeas]") {
    const auto br = testing::line("l", 0, 1, 0.03, 0.12, 0.05);
    const double vf = 1.04, vt = 0.97, th = 0.13;
    const cplx Vf = std::polar(vf, th), Vt = std::polar(vt, 0.0);
    const auto f = ac_branch_flows(vf, vt, th, br, 1.0);
    const cplx sf = pi_section_power(br, Vf, Vt), st = pi_section_power(br, Vt, Vf);
    CHECK_THAT(f.p_from, WithinAbs(sf.real(), 1e-13));
    CHECK_THAT(f.q_from, WithinAbs(sf.imag(), 1e-13));
    CHECK_THAT(f.p_to, WithinAbs(st.real(), 1e-13));
    CHECK_THAT(f.q_to, WithinAbs(st.imag(), 1e-13));
    // two circuits behave as two parallel sections
    const auto f2 = ac_branch_flows(vf, vt, th, br, 2.0);
    CHECK_THAT(f2.p_from, WithinAbs(2.0 * sf.real(), 1e-13));
}

TEST_CASE("jacobian matches finite differences", "[acfeas]") {
    const auto lc = load_case(testing::data_path("case5.json"));
    const auto N = static_cast<Eigen::Index>(lc.network.buses.size());
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dv(0.93, 1.07), dth(-0.2, 0.2), du(1.0, 2.0);
    Eigen::VectorXd v(N), th(N), c(static_cast<Eigen::Index>(lc.network.ac_branches.size()));
    for (Eigen::Index i = 0; i < N; ++i) {
        v[i] = dv(rng);
        th[i] = dth(rng);
    }
    for (Eigen::Index l = 0; l < c.size(); ++l) c[l] = du(rng);
    const auto J = power_flow_jacobian(lc.network, c, v, th);
    const double h = 1e-6;
    Eigen::MatrixXd fd(2 * N, 2 * N);
    for (Eigen::Index k = 0; k < 2 * N; ++k) {
        Eigen::VectorXd vp = v, vm = v, tp = th, tm = th;
        if (k < N) {
            tp[k] += h;
            tm[k] -= h;
        } else {
            vp[k - N] += h;
            vm[k - N] -= h;
        }
        const auto a = bus_injections(lc.network, c, vp, tp), b = bus_injections(lc.network, c, vm, tm);
        fd.col(k) << (a.p - b.p) / (2 * h), (a.q - b.q) / (2 * h);
    }
    CHECK((J - fd).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("newton solves a loaded two-bus system", "[acfeas]") {
    const auto net = testing::two_bus(0.01, 0.1, 0.02);
    const auto pf = newton_power_flow(net, Eigen::VectorXd::Ones(1), two_bus_spec(0.5, 0.1));
    REQUIRE(pf.converged);
    CHECK(pf.mismatch < 1e-10);
    CHECK(pf.v[0] == 1.0);
    CHECK(pf.theta[0] == 0.0);
    const cplx V1 = std::polar(pf.v[0], pf.theta[0]), V2 = std::polar(pf.v[1], pf.theta[1]);
    const cplx s2 = pi_section_power(net.ac_branches[0], V2, V1);
    CHECK_THAT(s2.real(), WithinAbs(-0.5, 1e-9));
    CHECK_THAT(s2.imag(), WithinAbs(-0.1, 1e-9));
    // receiving end sags and lags
    CHECK(pf.v[1] < 1.0);
    CHECK(pf.theta[1] < 0.0);
}

TEST_CASE("newton reports divergence", "[acfeas]") {
    const auto net = testing::two_bus(0.01, 0.1, 0.02);
    const auto pf = newton_power_flow(net, Eigen::VectorXd::Ones(1), two_bus_spec(1e6, 0.0));
    CHECK_FALSE(pf.converged);
    CHECK_FALSE(pf.message.empty());
}

TEST_CASE("unloaded lossless system stays flat", "[acfeas]") {
    const auto net = testing::two_bus(0.01, 0.1, 0.0);
    const auto pf = newton_power_flow(net, Eigen::VectorXd::Ones(1), two_bus_spec(0.0, 0.0));
    REQUIRE(pf.converged);
    CHECK_THAT(pf.v[1], WithinAbs(1.0, 1e-12));
    CHECK_THAT(pf.theta[1], WithinAbs(0.0, 1e-12));
}

TEST_CASE("one reference bus per island", "[acfeas]") {
    auto net = testing::buses(4);
    net.ac_branches.push_back(testing::line("a", 1, 0, 0.0, 0.1));
    net.ac_branches.push_back(testing::line("b", 2, 3, 0.0, 0.1));
    CHECK(island_reference_buses(net) == std::vector<std::size_t>{0, 2});
}

TEST_CASE("snapshot dispatch of case5 certifies", "[acfeas]") {
    const auto lc = load_case(testing::data_path("case5.json"));
    const auto plan = run_scp(lc.network, lc.series, FormulationKind::lpac);
    std::size_t feasible = 0;
    for (std::size_t t = 0; t < lc.series.size(); ++t) {
        const auto ctx = make_snapshot_context(lc.network, lc.series, plan, plan.u_source, t);
        const auto res = solve_ac_opf(lc.network, lc.series, ctx);
        if (!res.report.ok()) continue;
        ++feasible;
        CHECK(res.report.certification_residual <= 1e-6);
        CHECK(res.increments.cwiseAbs().maxCoeff() == 0.0);
        const auto cert = certify_operating_point(lc.network, lc.series, ctx.circuits, res.point);
        CHECK(cert.passed);
    }
    CHECK(feasible > 0);
}

TEST_CASE("load beyond capacity is locally infeasible", "[acfeas]") {
    const auto net = two_bus_with_generator(1.0);
    auto series = SnapshotSeries::uniform(2, 1, 1);
    series.load_p(1, 0) = 0.5;
    series.load_q = Eigen::MatrixXd::Zero(2, 1);
    PlanSolution plan;
    plan.u_source = Eigen::VectorXd::Ones(1);
    plan.u_ac = Eigen::VectorXd::Ones(1);
    plan.u_dc = Eigen::VectorXd::Zero(0);
    plan.beta = plan.p = Eigen::MatrixXd::Constant(1, 1, 0.5);
    plan.beta.setOnes();
    plan.beta_su = plan.beta_sd = plan.q = plan.p_charge = Eigen::MatrixXd::Zero(1, 1);
    plan.v = Eigen::MatrixXd::Ones(2, 1);
    plan.theta = Eigen::MatrixXd::Zero(2, 1);

    const auto ok_ctx = make_snapshot_context(net, series, plan, plan.u_source, 0);
    const auto ok = solve_ac_opf(net, series, ok_ctx);
    CHECK(ok.report.ok());
    CHECK_THAT(ok.point.p[0], WithinAbs(0.5 + ok.point.p_from[0] + ok.point.p_to[0], 1e-6));

    series.load_p(1, 0) = 3.0;
    const auto ctx = make_snapshot_context(net, series, plan, plan.u_source, 0);
    const auto bad = solve_ac_opf(net, series, ctx);
    CHECK(bad.report.status == NlpStatus::locally_infeasible);
}
