#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/LU>

#include "accep/conic.hpp"

using namespace accep::conic;
using Catch::Matchers::WithinAbs;

TEST_CASE("lower bound LP", "[conic]") {
    ConvexProgram p;
    const int x = p.add_variable(-kInf, kInf, "x");
    p.set_cost(x, 1.0);
    p.add_row({{x, 1.0}}, 3.0, kInf, "lb");
    const auto sol = solve(p);
    REQUIRE(sol.status == Status::optimal);
    CHECK_THAT(sol.x[0], WithinAbs(3.0, 1e-6));
    CHECK_THAT(sol.row_dual_lower[0], WithinAbs(1.0, 1e-6));
}

TEST_CASE("cone section maximum", "[conic]") {
    ConvexProgram p;
    const int x = p.add_variable(-kInf, kInf, "x");
    p.set_cost(x, -1.0);
    p.add_cone({Affine{{x, 1.0}}, Affine{{}, 1.0}}, Affine{{}, 2.0}, "disk");
    const auto sol = solve(p);
    REQUIRE(sol.status == Status::optimal);
    CHECK_THAT(sol.x[0], WithinAbs(std::sqrt(3.0), 1e-6));
}

TEST_CASE("contradicting bounds are infeasible", "[conic]") {
    ConvexProgram p;
    const int x = p.add_variable(-kInf, kInf, "x");
    p.set_cost(x, 1.0);
    p.add_row({{x, 1.0}}, 1.0, kInf, "ge");
    p.add_row({{x, 1.0}}, -kInf, 0.0, "le");
    CHECK(solve(p).status == Status::infeasible);
}

TEST_CASE("unbounded ray is detected", "[conic]") {
    ConvexProgram p;
    const int x = p.add_variable(-kInf, kInf, "x");
    const int y = p.add_variable(0.0, kInf, "y");
    p.set_cost(x, -1.0);
    p.add_row({{x, 1.0}, {y, -1.0}}, -kInf, 1.0, "r");
    CHECK(solve(p).status == Status::unbounded);
}

TEST_CASE("fixed variables and empty rows are presolved", "[conic]") {
    ConvexProgram p;
    const int x = p.add_variable(2.0, 2.0, "fixed");
    const int y = p.add_variable(0.0, 10.0, "y");
    p.set_cost(y, 1.0);
    p.add_row({{x, 1.0}, {y, 1.0}}, 5.0, kInf, "sum");
    p.add_row({{x, 1.0}}, 1.0, 3.0, "only-fixed");
    const auto sol = solve(p);
    REQUIRE(sol.status == Status::optimal);
    CHECK_THAT(sol.x[0], WithinAbs(2.0, 1e-12));
    CHECK_THAT(sol.x[1], WithinAbs(3.0, 1e-6));

    ConvexProgram q;
    const int z = q.add_variable(1.0, 1.0);
    q.add_row({{z, 1.0}}, 2.0, 2.0, "impossible");
    CHECK(solve(q).status == Status::infeasible);
}

TEST_CASE("equality duals are marginal costs", "[conic]") {
    // min x1 + 2 x2 s.t. x1 + x2 = 4, x1 <= 3, x >= 0 -> x = (3, 1), price 2
    ConvexProgram p;
    const int a = p.add_variable(0.0, 3.0);
    const int b = p.add_variable(0.0, kInf);
    p.set_cost(a, 1.0);
    p.set_cost(b, 2.0);
    p.add_row({{a, 1.0}, {b, 1.0}}, 4.0, 4.0, "balance");
    const auto sol = solve(p);
    REQUIRE(sol.ok());
    CHECK_THAT(sol.x[0], WithinAbs(3.0, 1e-6));
    CHECK_THAT(sol.x[1], WithinAbs(1.0, 1e-6));
    CHECK_THAT(sol.row_dual_upper[0], WithinAbs(2.0, 1e-5));
}

TEST_CASE("quadratic epigraph through rotated cone", "[conic]") {
    // y >= 3 (x - 1)^2 + 2 as ||(2 sqrt3 (x - 1), w - 1)|| <= w + 1 with w = y - 2
    ConvexProgram p;
    const int x = p.add_variable(-kInf, kInf);
    const int y = p.add_variable(-kInf, kInf);
    p.set_cost(y, 1.0);
    const double k = 2.0 * std::sqrt(3.0);
    Affine arg1({{x, k}}, -k), arg2({{y, 1.0}}, -3.0), bound({{y, 1.0}}, -1.0);
    p.add_cone({arg1, arg2}, bound, "epi");
    const auto sol = solve(p);
    REQUIRE(sol.ok());
    CHECK_THAT(sol.x[0], WithinAbs(1.0, 1e-3));
    CHECK_THAT(sol.x[1], WithinAbs(2.0, 1e-6));
}

TEST_CASE("check_solution names the violated cone", "[conic]") {
    ConvexProgram p;
    const int x = p.add_variable(-kInf, kInf, "x");
    p.add_row({{x, 1.0}}, -kInf, 5.0, "row");
    p.add_cone({Affine{{x, 1.0}}}, Affine{{}, 1.0}, "box", "the-cone");
    Eigen::VectorXd pt(1);
    pt << 0.5;
    CHECK(check_solution(p, pt).within(1e-9));
    pt << 1.1;
    const auto rep = check_solution(p, pt);
    CHECK_THAT(rep.cones.max_violation, WithinAbs(0.1, 1e-12));
    CHECK(rep.cones.worst == "the-cone");
    CHECK(rep.inequalities.max_violation == 0.0);
}

TEST_CASE("soc step length matches bisection", "[conic]") {
    std::mt19937 rng(7);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd u(4), du(4);
        for (int i = 1; i < 4; ++i) u[i] = nd(rng);
        u[0] = u.tail(3).norm() + std::abs(nd(rng)) + 0.01;
        for (int i = 0; i < 4; ++i) du[i] = nd(rng);
        const double a = detail::soc_step(u, du);
        auto inside = [&](double t) {
            const Eigen::VectorXd w = u + t * du;
            return w[0] - w.tail(3).norm() >= -1e-12;
        };
        if (std::isinf(a)) {
            CHECK(inside(1e3));
            continue;
        }
        CHECK(inside(a * (1 - 1e-9)));
        CHECK_FALSE(inside(a * (1 + 1e-6) + 1e-9));
    }
}

TEST_CASE("nt scaling maps z onto inverse-scaled s", "[conic]") {
    Eigen::VectorXd s(3), z(3);
    s << 2.0, 0.5, -1.0;
    z << 1.5, -0.3, 0.4;
    const Eigen::MatrixXd W = detail::soc_nt_scaling(s, z);
    const Eigen::VectorXd lhs = W * z;
    const Eigen::VectorXd rhs = W.inverse() * s;
    CHECK((lhs - rhs).norm() < 1e-10);
    CHECK((W - W.transpose()).norm() < 1e-14);
}

TEST_CASE("random feasible LP/SOC programs satisfy weak duality and determinism", "[conic]") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        ConvexProgram p;
        const int n = 6;
        Eigen::VectorXd x0(n);
        for (int j = 0; j < n; ++j) {
            x0[j] = ud(rng);
            p.add_variable(-2.0, 2.0);
            p.set_cost(j, ud(rng));
        }
        for (int i = 0; i < 4; ++i) {
            std::vector<Term> terms;
            double val = 0.0;
            for (int j = 0; j < n; ++j) {
                const double c = ud(rng);
                terms.push_back({j, c});
                val += c * x0[j];
            }
            if (i == 0)
                p.add_row(terms, val, val, "eq");
            else
                p.add_row(terms, val - 0.5, val + 0.5, "ineq");
        }
        Affine a1, a2;
        a1.add(0, 1.0).add(1, -1.0);
        a2.add(2, 1.0);
        a1.constant = -(x0[0] - x0[1]);
        a2.constant = -x0[2];
        p.add_cone({a1, a2}, Affine{{}, 1.0}, "ball");
        const auto s1 = solve(p);
        REQUIRE(s1.ok());
        CHECK(check_solution(p, s1.x).within(1e-5));
        CHECK(s1.dual_objective <= s1.objective + 1e-5);
        CHECK(std::abs(s1.objective - s1.dual_objective) <= 1e-4 * (1 + std::abs(s1.objective)));
        const auto s2 = solve(p);
        CHECK(s2.status == s1.status);
        CHECK(std::abs(s2.objective - s1.objective) <= 1e-10);
    }
}

TEST_CASE("program dump is one constraint per line", "[conic]") {
    ConvexProgram p;
    const int x = p.add_variable(0.0, 1.0, "x");
    p.add_row({{x, 2.0}}, -kInf, 1.0, "r", "row0");
    p.add_cone({Affine{{x, 1.0}}}, Affine{{}, 1.0}, "c", "cone0");
    std::ostringstream out;
    dump_program(p, out);
    const auto text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text.find("row r row0") != std::string::npos);
    CHECK(text.find("soc c cone0") != std::string::npos);
}
