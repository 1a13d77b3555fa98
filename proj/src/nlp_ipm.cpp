#include "accep/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include <Eigen/SparseCholesky>

namespace accep::nlp {

const char* to_string(Status status) {
    switch (status) {
        case Status::converged: return "converged";
        case Status::infeasible: return "infeasible";
        case Status::iteration_limit: return "iteration-limit";
        case Status::numerical_failure: return "numerical-failure";
    }
    return "?";
}

namespace {

constexpr double kMinBarrier = 1e-10;

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double fraction) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0) alpha = std::min(alpha, -fraction * v[i] / dv[i]);
    return alpha;
}

// [M + dw I, J'; J, -dc I] assembled as a full symmetric sparse matrix.
SparseMatrix assemble_kkt(const SparseMatrix& M, const SparseMatrix& J, double dw, double dc) {
    const auto n = M.rows(), m = J.rows();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(M.nonZeros() + 2 * J.nonZeros() + n + m));
    for (int k = 0; k < M.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(M, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < J.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(J, k); it; ++it) {
            trip.emplace_back(n + it.row(), it.col(), it.value());
            trip.emplace_back(it.col(), n + it.row(), it.value());
        }
    for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, dw);
    for (Eigen::Index i = 0; i < m; ++i) trip.emplace_back(n + i, n + i, -dc);
    SparseMatrix K(n + m, n + m);
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

}  // namespace

Result solve(const Model& model, const Eigen::VectorXd& x0, const Options& opt) {
    const int n = model.num_variables(), me = model.num_equalities(), mi = model.num_inequalities();
    Result r;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd h = model.inequalities(x);
    Eigen::VectorXd z = Eigen::VectorXd::Constant(mi, opt.z0);
    for (int i = 0; i < mi; ++i)
        if (h[i] < -opt.z0) z[i] = -h[i];
    double gamma = 1.0;
    Eigen::VectorXd mu = gamma * z.cwiseInverse();
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(me);
    double dw_last = 0.0;
    const double dc = 1e-10;

    Eigen::SimplicialLDLT<SparseMatrix> ldlt;

    for (int it = 0;; ++it) {
        const Eigen::VectorXd g = model.equalities(x);
        h = model.inequalities(x);
        const SparseMatrix Jg = model.equality_jacobian(x);
        const SparseMatrix Jh = model.inequality_jacobian(x);
        const Eigen::VectorXd grad = model.gradient(x);
        const Eigen::VectorXd Lx = grad + Jg.transpose() * lam + Jh.transpose() * mu;

        r.feasibility = std::max(inf_norm(g), mi ? std::max(0.0, h.maxCoeff()) : 0.0);
        r.stationarity = inf_norm(Lx) / (1.0 + std::max(inf_norm(lam), inf_norm(mu)));
        r.complementarity = mi ? z.dot(mu) / (1.0 + inf_norm(x)) : 0.0;
        r.iterations = it;
        if (opt.verbose)
            std::printf("nlp %3d f=%.10g feas=%.3e grad=%.3e comp=%.3e dw=%.1e\n", it, model.objective(x),
                        r.feasibility, r.stationarity, r.complementarity, dw_last);
        if (!x.allFinite() || !Lx.allFinite()) {
            r.status = Status::numerical_failure;
            break;
        }
        if (r.feasibility <= opt.feas_tol && r.stationarity <= opt.grad_tol && r.complementarity <= opt.comp_tol) {
            r.status = Status::converged;
            break;
        }
        if (r.feasibility > opt.feas_tol && std::max(inf_norm(lam), inf_norm(mu)) > 1e12) {
            r.status = Status::infeasible;
            break;
        }
        if (it >= opt.max_iter) {
            r.status = r.feasibility > opt.feas_tol ? Status::infeasible : Status::iteration_limit;
            break;
        }

        const Eigen::VectorXd zinv = z.cwiseInverse();
        const Eigen::VectorXd w = mu.cwiseProduct(zinv);
        const SparseMatrix M = model.lagrangian_hessian(x, lam, mu) + SparseMatrix(Jh.transpose() * w.asDiagonal() * Jh);
        const Eigen::VectorXd N =
            Lx + Jh.transpose() * (zinv.cwiseProduct(mu.cwiseProduct(h) + Eigen::VectorXd::Constant(mi, gamma)));

        // Inertia correction: the factorisation must show n positive and me
        // negative pivots.
        double dw = 0.0;
        bool factored = false;
        for (int attempt = 0; attempt < 25; ++attempt) {
            const SparseMatrix K = assemble_kkt(M, Jg, dw, dc);
            ldlt.compute(K);
            if (ldlt.info() == Eigen::Success) {
                const auto& D = ldlt.vectorD();
                int pos = 0, neg = 0;
                for (Eigen::Index i = 0; i < D.size(); ++i) {
                    if (D[i] > 0) ++pos;
                    else if (D[i] < 0) ++neg;
                }
                if (pos == n && neg == me) {
                    factored = true;
                    break;
                }
            }
            dw = dw == 0.0 ? (dw_last == 0.0 ? 1e-4 : std::max(1e-20, dw_last / 3)) : dw * (dw_last == 0.0 ? 100 : 8);
        }
        if (!factored) {
            r.status = Status::numerical_failure;
            break;
        }
        dw_last = dw;
        Eigen::VectorXd rhs(n + me);
        rhs << -N, -g;
        Eigen::VectorXd sol = ldlt.solve(rhs);
        if (me > 0) {
            // refine against the unregularised constraint block
            const SparseMatrix K0 = assemble_kkt(M, Jg, dw, 0.0);
            for (int k = 0; k < 3; ++k) {
                const Eigen::VectorXd res = rhs - K0 * sol;
                if (inf_norm(res) <= 1e-14 * (1.0 + inf_norm(rhs))) break;
                sol += ldlt.solve(res);
            }
        }
        const Eigen::VectorXd dx = sol.head(n);
        const Eigen::VectorXd dlam = sol.tail(me);
        const Eigen::VectorXd dz = -h - z - Jh * dx;
        const Eigen::VectorXd dmu = -mu + zinv.cwiseProduct(Eigen::VectorXd::Constant(mi, gamma) - mu.cwiseProduct(dz));

        const double ap = max_step(z, dz, opt.step_fraction);
        const double ad = max_step(mu, dmu, opt.step_fraction);
        if (opt.verbose) {
            Eigen::Index gi = 0, hi = 0;
            if (me) g.cwiseAbs().maxCoeff(&gi);
            if (mi) h.maxCoeff(&hi);
            std::printf("    ap=%.3e ad=%.3e |dx|=%.3e worst eq %ld (%.3e) ineq %ld (%.3e) gamma=%.3e\n", ap, ad,
                        inf_norm(dx), static_cast<long>(gi), me ? g[gi] : 0.0, static_cast<long>(hi),
                        mi ? h[hi] : 0.0, gamma);
        }
        x += ap * dx;
        z += ap * dz;
        lam += ad * dlam;
        mu += ad * dmu;
        gamma = mi ? std::max(opt.centering * z.dot(mu) / mi, kMinBarrier) : 0.0;
    }
    r.x = x;
    r.lam = lam;
    r.mu = mu;
    r.z = z;
    r.objective = model.objective(x);
    return r;
}

}  // namespace accep::nlp
