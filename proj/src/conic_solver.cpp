#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "accep/conic.hpp"

// Primal:  min c'x  s.t.  A x = b,  G x + s = h,  s in K
// Dual:    max -b'y - h'z  s.t.  A'y + G'z + c = 0,  z in K
// K is a product of a nonnegative orthant and second-order cones. The
// homogeneous self-dual embedding with Mehrotra predictor-corrector steps
// follows the usual ECOS/CVXOPT structure.

namespace accep::conic {

namespace detail {

double soc_step(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& du) {
    const auto m = u.size();
    const double u0 = u[0], d0 = du[0];
    const auto u1 = u.tail(m - 1);
    const auto d1 = du.tail(m - 1);
    const double a = d0 * d0 - d1.squaredNorm();
    const double b = u0 * d0 - u1.dot(d1);
    const double c = std::max(u0 * u0 - u1.squaredNorm(), 0.0);
    // smallest positive root of a t^2 + 2 b t + c
    double root = kInf;
    if (a == 0.0) {
        if (b < 0.0) root = -c / (2.0 * b);
    } else {
        const double disc = b * b - a * c;
        if (a > 0.0) {
            if (b < 0.0 && disc >= 0.0) root = c / (-b + std::sqrt(disc));
        } else {
            const double sq = std::sqrt(std::max(disc, 0.0));
            root = b >= 0.0 ? (b + sq) / (-a) : c / (-b + sq);
        }
    }
    if (d0 < 0.0) root = std::min(root, -u0 / d0);
    return std::max(root, 0.0);
}

Eigen::MatrixXd soc_nt_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
    const auto m = s.size();
    const double sres = std::max(s[0] * s[0] - s.tail(m - 1).squaredNorm(), 1e-300);
    const double zres = std::max(z[0] * z[0] - z.tail(m - 1).squaredNorm(), 1e-300);
    const Eigen::VectorXd sb = s / std::sqrt(sres);
    const Eigen::VectorXd zb = z / std::sqrt(zres);
    const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 1e-300));
    const double w0 = (sb[0] + zb[0]) / (2.0 * gamma);
    const Eigen::VectorXd w1 = (sb.tail(m - 1) - zb.tail(m - 1)) / (2.0 * gamma);
    const double eta = std::pow(sres / zres, 0.25);
    Eigen::MatrixXd W(m, m);
    W(0, 0) = w0;
    W.block(0, 1, 1, m - 1) = w1.transpose();
    W.block(1, 0, m - 1, 1) = w1;
    W.block(1, 1, m - 1, m - 1) =
        Eigen::MatrixXd::Identity(m - 1, m - 1) + w1 * w1.transpose() / (1.0 + w0);
    return eta * W;
}

}  // namespace detail

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;
using Vec = Eigen::VectorXd;

struct ConeLayout {
    Eigen::Index orthant = 0;
    std::vector<Eigen::Index> soc_start;
    std::vector<Eigen::Index> soc_dim;

    Eigen::Index degree() const { return orthant + static_cast<Eigen::Index>(soc_dim.size()); }
};

// Where a dual entry of the standard form came from.
struct DualOrigin {
    enum Kind { row_upper, row_lower, bound } kind;
    int index;
};

struct StandardForm {
    Eigen::Index n = 0;
    SpMat A, G;
    Vec c, b, h;
    ConeLayout cones;
    double obj_const = 0.0;
    std::vector<int> reduced_of;   // original var -> reduced index or -1
    std::vector<int> original_of;  // reduced -> original
    Vec fixed_value;               // original size
    std::vector<int> eq_row_of;    // A row -> program row
    std::vector<DualOrigin> g_origin;  // orthant rows of G
    bool trivially_infeasible = false;
};

StandardForm to_standard_form(const ConvexProgram& prog, double tol) {
    StandardForm f;
    const auto& vars = prog.variables();
    const auto nvar = vars.size();
    f.reduced_of.assign(nvar, -1);
    f.fixed_value = Vec::Zero(static_cast<Eigen::Index>(nvar));
    for (std::size_t j = 0; j < nvar; ++j) {
        const auto& v = vars[j];
        if (v.lower > v.upper) f.trivially_infeasible = true;
        const double width = v.upper - v.lower;
        if (std::isfinite(v.lower) && std::isfinite(v.upper) &&
            width <= 1e-12 * std::max(1.0, std::abs(v.lower))) {
            f.fixed_value[static_cast<Eigen::Index>(j)] = v.lower;
            f.obj_const += prog.cost()[j] * v.lower;
        } else {
            f.reduced_of[j] = static_cast<int>(f.original_of.size());
            f.original_of.push_back(static_cast<int>(j));
        }
    }
    f.obj_const += prog.objective_constant();
    f.n = static_cast<Eigen::Index>(f.original_of.size());
    f.c = Vec::Zero(f.n);
    for (Eigen::Index k = 0; k < f.n; ++k) f.c[k] = prog.cost()[static_cast<std::size_t>(f.original_of[k])];

    auto reduce = [&](const std::vector<Term>& terms, std::vector<Term>& out) {
        double constant = 0.0;
        out.clear();
        for (const auto& t : terms) {
            const int r = f.reduced_of[static_cast<std::size_t>(t.var)];
            if (r < 0)
                constant += t.coef * f.fixed_value[t.var];
            else
                out.push_back({r, t.coef});
        }
        return constant;
    };

    std::vector<Trip> a_trip, g_trip;
    std::vector<double> b_vals, h_vals;
    std::vector<Term> red;
    Eigen::Index arow = 0, grow = 0;
    const auto& rows = prog.rows();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const double cst = reduce(r.terms, red);
        const double lo = r.lower - cst, up = r.upper - cst;
        if (red.empty()) {
            const double scale = 1.0 + std::max(std::abs(std::isfinite(lo) ? lo : 0.0),
                                                std::abs(std::isfinite(up) ? up : 0.0));
            if (lo > tol * scale || up < -tol * scale) f.trivially_infeasible = true;
            continue;
        }
        if (r.is_equality()) {
            for (const auto& t : red) a_trip.emplace_back(arow, t.var, t.coef);
            b_vals.push_back(lo);
            f.eq_row_of.push_back(static_cast<int>(i));
            ++arow;
            continue;
        }
        if (std::isfinite(up)) {
            for (const auto& t : red) g_trip.emplace_back(grow, t.var, t.coef);
            h_vals.push_back(up);
            f.g_origin.push_back({DualOrigin::row_upper, static_cast<int>(i)});
            ++grow;
        }
        if (std::isfinite(lo)) {
            for (const auto& t : red) g_trip.emplace_back(grow, t.var, -t.coef);
            h_vals.push_back(-lo);
            f.g_origin.push_back({DualOrigin::row_lower, static_cast<int>(i)});
            ++grow;
        }
    }
    for (Eigen::Index k = 0; k < f.n; ++k) {
        const auto& v = vars[static_cast<std::size_t>(f.original_of[k])];
        if (std::isfinite(v.upper)) {
            g_trip.emplace_back(grow++, k, 1.0);
            h_vals.push_back(v.upper);
            f.g_origin.push_back({DualOrigin::bound, 2 * f.original_of[k] + 1});
        }
        if (std::isfinite(v.lower)) {
            g_trip.emplace_back(grow++, k, -1.0);
            h_vals.push_back(-v.lower);
            f.g_origin.push_back({DualOrigin::bound, 2 * f.original_of[k]});
        }
    }
    f.cones.orthant = grow;
    for (const auto& cone : prog.cones()) {
        f.cones.soc_start.push_back(grow);
        f.cones.soc_dim.push_back(static_cast<Eigen::Index>(cone.args.size() + 1));
        // s0 = bound(x)
        double cst = reduce(cone.bound.terms, red);
        for (const auto& t : red) g_trip.emplace_back(grow, t.var, -t.coef);
        h_vals.push_back(cone.bound.constant + cst);
        ++grow;
        for (const auto& arg : cone.args) {
            cst = reduce(arg.terms, red);
            for (const auto& t : red) g_trip.emplace_back(grow, t.var, -t.coef);
            h_vals.push_back(arg.constant + cst);
            ++grow;
        }
    }
    f.A.resize(arow, f.n);
    f.A.setFromTriplets(a_trip.begin(), a_trip.end());
    f.G.resize(grow, f.n);
    f.G.setFromTriplets(g_trip.begin(), g_trip.end());
    f.b = Eigen::Map<Vec>(b_vals.data(), static_cast<Eigen::Index>(b_vals.size()));
    f.h = Eigen::Map<Vec>(h_vals.data(), static_cast<Eigen::Index>(h_vals.size()));
    return f;
}

// Ruiz equilibration of [A; G] keeping a single row scale per cone.
struct Scaling {
    Vec D, EA, EG;
};

Scaling equilibrate(StandardForm& f, bool enabled) {
    Scaling s{Vec::Ones(f.n), Vec::Ones(f.A.rows()), Vec::Ones(f.G.rows())};
    if (!enabled || f.n == 0) return s;
    for (int pass = 0; pass < 15; ++pass) {
        Vec col = Vec::Zero(f.n), ra = Vec::Zero(f.A.rows()), rg = Vec::Zero(f.G.rows());
        for (int k = 0; k < f.A.outerSize(); ++k)
            for (SpMat::InnerIterator it(f.A, k); it; ++it) {
                const double v = std::abs(it.value());
                col[it.col()] = std::max(col[it.col()], v);
                ra[it.row()] = std::max(ra[it.row()], v);
            }
        for (int k = 0; k < f.G.outerSize(); ++k)
            for (SpMat::InnerIterator it(f.G, k); it; ++it) {
                const double v = std::abs(it.value());
                col[it.col()] = std::max(col[it.col()], v);
                rg[it.row()] = std::max(rg[it.row()], v);
            }
        for (std::size_t q = 0; q < f.cones.soc_dim.size(); ++q) {
            auto seg = rg.segment(f.cones.soc_start[q], f.cones.soc_dim[q]);
            seg.setConstant(seg.maxCoeff());
        }
        auto inv_sqrt = [](double v) { return v > 0 ? 1.0 / std::sqrt(v) : 1.0; };
        Vec dc = col.unaryExpr(inv_sqrt), da = ra.unaryExpr(inv_sqrt), dg = rg.unaryExpr(inv_sqrt);
        if ((dc.array() - 1).abs().maxCoeff() < 1e-3 && (da.size() == 0 || (da.array() - 1).abs().maxCoeff() < 1e-3) &&
            (dg.size() == 0 || (dg.array() - 1).abs().maxCoeff() < 1e-3))
            break;
        for (Eigen::Index j = 0; j < f.n; ++j) {
            const double nd = std::clamp(s.D[j] * dc[j], 1e-4, 1e4);
            dc[j] = nd / s.D[j];
            s.D[j] = nd;
        }
        for (Eigen::Index i = 0; i < da.size(); ++i) {
            const double ne = std::clamp(s.EA[i] * da[i], 1e-4, 1e4);
            da[i] = ne / s.EA[i];
            s.EA[i] = ne;
        }
        for (Eigen::Index i = 0; i < dg.size(); ++i) {
            const double ne = std::clamp(s.EG[i] * dg[i], 1e-4, 1e4);
            dg[i] = ne / s.EG[i];
            s.EG[i] = ne;
        }
        f.A = da.asDiagonal() * f.A * dc.asDiagonal();
        f.G = dg.asDiagonal() * f.G * dc.asDiagonal();
    }
    f.c = s.D.cwiseProduct(f.c);
    f.b = s.EA.cwiseProduct(f.b);
    f.h = s.EG.cwiseProduct(f.h);
    return s;
}

// Cone algebra on a stacked vector.
struct ConeOps {
    const ConeLayout& K;

    Vec identity() const {
        Vec e = Vec::Zero(K.orthant + std::accumulate(K.soc_dim.begin(), K.soc_dim.end(), Eigen::Index{0}));
        e.head(K.orthant).setOnes();
        for (auto st : K.soc_start) e[st] = 1.0;
        return e;
    }

    // min over cones of the smallest "eigenvalue"
    double min_eig(const Vec& u) const {
        double m = kInf;
        if (K.orthant) m = u.head(K.orthant).minCoeff();
        for (std::size_t q = 0; q < K.soc_dim.size(); ++q) {
            const auto seg = u.segment(K.soc_start[q], K.soc_dim[q]);
            m = std::min(m, seg[0] - seg.tail(seg.size() - 1).norm());
        }
        return m;
    }

    Vec circ(const Vec& u, const Vec& v) const {
        Vec w(u.size());
        w.head(K.orthant) = u.head(K.orthant).cwiseProduct(v.head(K.orthant));
        for (std::size_t q = 0; q < K.soc_dim.size(); ++q) {
            const auto st = K.soc_start[q], d = K.soc_dim[q];
            const auto us = u.segment(st, d), vs = v.segment(st, d);
            w[st] = us.dot(vs);
            w.segment(st + 1, d - 1) = us[0] * vs.tail(d - 1) + vs[0] * us.tail(d - 1);
        }
        return w;
    }

    // x with lambda o x = d
    Vec inv_circ(const Vec& lam, const Vec& d) const {
        Vec x(d.size());
        x.head(K.orthant) = d.head(K.orthant).cwiseQuotient(lam.head(K.orthant));
        for (std::size_t q = 0; q < K.soc_dim.size(); ++q) {
            const auto st = K.soc_start[q], n = K.soc_dim[q];
            const auto l = lam.segment(st, n), dd = d.segment(st, n);
            const double det = l[0] * l[0] - l.tail(n - 1).squaredNorm();
            const double x0 = (l[0] * dd[0] - l.tail(n - 1).dot(dd.tail(n - 1))) / det;
            x[st] = x0;
            x.segment(st + 1, n - 1) = (dd.tail(n - 1) - x0 * l.tail(n - 1)) / l[0];
        }
        return x;
    }

    double max_step(const Vec& u, const Vec& du) const {
        double a = kInf;
        for (Eigen::Index i = 0; i < K.orthant; ++i)
            if (du[i] < 0) a = std::min(a, -u[i] / du[i]);
        for (std::size_t q = 0; q < K.soc_dim.size(); ++q)
            a = std::min(a, detail::soc_step(u.segment(K.soc_start[q], K.soc_dim[q]),
                                             du.segment(K.soc_start[q], K.soc_dim[q])));
        return a;
    }
};

// Nesterov-Todd scaling for the whole cone.
struct NtScaling {
    Vec orth_w;                        // sqrt(s / z)
    std::vector<Eigen::MatrixXd> soc;  // W blocks
    std::vector<Eigen::MatrixXd> soc_inv;

    void compute(const ConeLayout& K, const Vec& s, const Vec& z) {
        orth_w = (s.head(K.orthant).cwiseQuotient(z.head(K.orthant))).cwiseSqrt();
        soc.resize(K.soc_dim.size());
        soc_inv.resize(K.soc_dim.size());
        for (std::size_t q = 0; q < K.soc_dim.size(); ++q) {
            const auto st = K.soc_start[q], d = K.soc_dim[q];
            soc[q] = detail::soc_nt_scaling(s.segment(st, d), z.segment(st, d));
            Eigen::MatrixXd J = Eigen::MatrixXd::Identity(d, d);
            J.bottomRightCorner(d - 1, d - 1) *= -1.0;
            const double eta2 = std::abs(soc[q](0, 0) * soc[q](0, 0) -
                                         soc[q].block(0, 1, 1, d - 1).squaredNorm());
            soc_inv[q] = J * soc[q] * J / eta2;
        }
    }

    Vec apply(const ConeLayout& K, const Vec& v) const {
        Vec w(v.size());
        w.head(K.orthant) = orth_w.cwiseProduct(v.head(K.orthant));
        for (std::size_t q = 0; q < K.soc_dim.size(); ++q)
            w.segment(K.soc_start[q], K.soc_dim[q]) = soc[q] * v.segment(K.soc_start[q], K.soc_dim[q]);
        return w;
    }

    Vec apply_inv(const ConeLayout& K, const Vec& v) const {
        Vec w(v.size());
        w.head(K.orthant) = v.head(K.orthant).cwiseQuotient(orth_w);
        for (std::size_t q = 0; q < K.soc_dim.size(); ++q)
            w.segment(K.soc_start[q], K.soc_dim[q]) = soc_inv[q] * v.segment(K.soc_start[q], K.soc_dim[q]);
        return w;
    }
};

class KktSystem {
public:
    KktSystem(const StandardForm& f) : f_(f) {
        n_ = f.n;
        p_ = f.A.rows();
        m_ = f.G.rows();
        dim_ = n_ + p_ + m_;
    }

    // Factorizes [reg*I A' G'; A -reg*I 0; G 0 -(W^2 + reg*I)].
    bool factor(const NtScaling* W, double reg) {
        std::vector<Trip> trip;
        std::vector<Trip> trip0;
        trip.reserve(static_cast<std::size_t>(2 * (f_.A.nonZeros() + f_.G.nonZeros()) + dim_ + 9 * m_));
        auto add = [&](Eigen::Index i, Eigen::Index j, double v) {
            trip.emplace_back(i, j, v);
            trip0.emplace_back(i, j, v);
        };
        for (int k = 0; k < f_.A.outerSize(); ++k)
            for (SpMat::InnerIterator it(f_.A, k); it; ++it) {
                add(n_ + it.row(), it.col(), it.value());
                add(it.col(), n_ + it.row(), it.value());
            }
        for (int k = 0; k < f_.G.outerSize(); ++k)
            for (SpMat::InnerIterator it(f_.G, k); it; ++it) {
                add(n_ + p_ + it.row(), it.col(), it.value());
                add(it.col(), n_ + p_ + it.row(), it.value());
            }
        const auto& K = f_.cones;
        const Eigen::Index zoff = n_ + p_;
        for (Eigen::Index i = 0; i < K.orthant; ++i) {
            const double w = W ? W->orth_w[i] : 1.0;
            add(zoff + i, zoff + i, -w * w);
        }
        for (std::size_t q = 0; q < K.soc_dim.size(); ++q) {
            const auto st = K.soc_start[q], d = K.soc_dim[q];
            Eigen::MatrixXd W2 = W ? Eigen::MatrixXd(W->soc[q] * W->soc[q]) : Eigen::MatrixXd::Identity(d, d);
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j < d; ++j) add(zoff + st + i, zoff + st + j, -W2(i, j));
        }
        for (Eigen::Index i = 0; i < dim_; ++i) {
            const double sgn = i < n_ ? 1.0 : -1.0;
            trip.emplace_back(i, i, sgn * reg);
            trip0.emplace_back(i, i, 0.0);
        }
        K_.resize(dim_, dim_);
        K_.setFromTriplets(trip.begin(), trip.end());
        K0_.resize(dim_, dim_);
        K0_.setFromTriplets(trip0.begin(), trip0.end());
        if (!analyzed_) {
            ldlt_.analyzePattern(K_);
            analyzed_ = true;
        }
        ldlt_.factorize(K_);
        if (ldlt_.info() != Eigen::Success && reg < 1e-5) return factor(W, reg * 100.0);
        return ldlt_.info() == Eigen::Success;
    }

    Vec solve(const Vec& rhs) const {
        Vec x = ldlt_.solve(rhs);
        const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
        for (int it = 0; it < 8; ++it) {
            Vec r = rhs - K0_ * x;
            if (!r.allFinite()) break;
            if (r.lpNorm<Eigen::Infinity>() <= 1e-13 * scale) break;
            x += ldlt_.solve(r);
        }
        return x;
    }

    Eigen::Index dim() const { return dim_; }

private:
    const StandardForm& f_;
    Eigen::Index n_, p_, m_, dim_;
    SpMat K_, K0_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    bool analyzed_ = false;
};

}  // namespace

Solution solve(const ConvexProgram& program, const SolverOptions& options) {
    Solution sol;
    const auto nvar = static_cast<Eigen::Index>(program.num_variables());
    const auto nrows = static_cast<Eigen::Index>(program.rows().size());
    sol.x = Vec::Zero(nvar);
    sol.row_dual_lower = Vec::Zero(nrows);
    sol.row_dual_upper = Vec::Zero(nrows);
    for (const auto& c : program.cones()) sol.cone_duals.push_back(Vec::Zero(static_cast<Eigen::Index>(c.args.size() + 1)));

    const double tol = options.tol;
    StandardForm f = to_standard_form(program, tol);
    if (f.trivially_infeasible) {
        sol.status = Status::infeasible;
        return sol;
    }
    const Vec c0 = f.c, b0 = f.b, h0 = f.h;
    const SpMat A0 = f.A, G0 = f.G;
    const Scaling sc = equilibrate(f, options.equilibrate);
    const double cs = std::max(1.0, f.c.lpNorm<Eigen::Infinity>());
    f.c /= cs;
    const auto& K = f.cones;
    const ConeOps ops{K};
    const Eigen::Index n = f.n, p = f.A.rows(), m = f.G.rows();

    auto finish = [&](const Vec& x, const Vec& y, const Vec& z) {
        // x, y, z unscaled and divided by tau.
        for (Eigen::Index j = 0; j < nvar; ++j) sol.x[j] = f.fixed_value[j];
        for (Eigen::Index k = 0; k < n; ++k) sol.x[f.original_of[k]] = x[k];
        for (Eigen::Index i = 0; i < p; ++i) sol.row_dual_upper[f.eq_row_of[i]] = -y[i];
        for (Eigen::Index i = 0; i < K.orthant; ++i) {
            const auto& o = f.g_origin[static_cast<std::size_t>(i)];
            if (o.kind == DualOrigin::row_upper) sol.row_dual_upper[o.index] += z[i];
            if (o.kind == DualOrigin::row_lower) sol.row_dual_lower[o.index] += z[i];
        }
        for (std::size_t q = 0; q < K.soc_dim.size(); ++q)
            sol.cone_duals[q] = z.segment(K.soc_start[q], K.soc_dim[q]);
        sol.objective = program.objective(sol.x);
        sol.dual_objective = f.obj_const - b0.dot(y) - h0.dot(z);
    };

    if (m == 0 && p == 0) {
        if (c0.lpNorm<Eigen::Infinity>() > 0) {
            sol.status = Status::unbounded;
        } else {
            finish(Vec::Zero(n), Vec(), Vec());
            sol.status = Status::optimal;
        }
        return sol;
    }

    KktSystem kkt(f);
    const double reg = 1e-9;
    if (!kkt.factor(nullptr, reg)) {
        sol.status = Status::numerical_failure;
        return sol;
    }
    auto split = [&](const Vec& v, Vec& x, Vec& y, Vec& z) {
        x = v.head(n);
        y = v.segment(n, p);
        z = v.tail(m);
    };

    Vec x, y, z, s, tmp;
    {
        Vec rhs(n + p + m);
        rhs << Vec::Zero(n), f.b, f.h;
        split(kkt.solve(rhs), x, tmp, s);
        s = -s;
        rhs << -f.c, Vec::Zero(p), Vec::Zero(m);
        split(kkt.solve(rhs), tmp, y, z);
    }
    const Vec e = ops.identity();
    {
        const double as = -ops.min_eig(s);
        if (as >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + std::max(as, 0.0)) * e;
        const double az = -ops.min_eig(z);
        if (az >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + std::max(az, 0.0)) * e;
    }
    double tau = 1.0, kappa = 1.0;
    const double degree = static_cast<double>(K.degree());

    const double bnorm = 1.0 + b0.lpNorm<Eigen::Infinity>();
    const double hnorm = 1.0 + h0.lpNorm<Eigen::Infinity>();
    const double cnorm = 1.0 + c0.lpNorm<Eigen::Infinity>();

    NtScaling W;
    sol.status = Status::iteration_limit;
    for (int iter = 0; iter <= options.max_iter; ++iter) {
        sol.iterations = iter;
        // Residuals of the embedding (scaled space).
        const Vec R1 = f.A.transpose() * y + f.G.transpose() * z + f.c * tau;
        const Vec R2 = -(f.A * x) + f.b * tau;
        const Vec R3 = -(f.G * x) + f.h * tau - s;
        const double R4 = -f.c.dot(x) - f.b.dot(y) - f.h.dot(z) - kappa;

        // Unscaled iterates.
        const Vec xu = sc.D.cwiseProduct(x) / tau;
        const Vec yu = sc.EA.cwiseProduct(y) * (cs / tau);
        const Vec zu = sc.EG.cwiseProduct(z) * (cs / tau);
        const Vec su = s.cwiseQuotient(sc.EG) / tau;
        const double pres = std::max(p ? (A0 * xu - b0).lpNorm<Eigen::Infinity>() / bnorm : 0.0,
                                     (G0 * xu + su - h0).lpNorm<Eigen::Infinity>() / hnorm);
        const double dres = (A0.transpose() * yu + G0.transpose() * zu + c0).lpNorm<Eigen::Infinity>() / cnorm;
        const double gap = su.dot(zu);
        const double pcost = c0.dot(xu);
        const double dcost = -b0.dot(yu) - h0.dot(zu);
        const double relgap = std::abs(gap) / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
        sol.primal_residual = pres;
        sol.dual_residual = dres;
        sol.gap = gap;
        if (options.verbose)
            std::fprintf(stderr, "%3d pcost %+.8e dcost %+.8e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n",
                         iter, pcost, dcost, gap, pres, dres, tau, kappa);
        if (pres <= tol && dres <= tol && (gap <= tol || relgap <= tol)) {
            finish(xu, yu, zu);
            sol.status = Status::optimal;
            return sol;
        }
        // Certificates (scale invariant in the embedding iterates).
        {
            const Vec yc = sc.EA.cwiseProduct(y), zc = sc.EG.cwiseProduct(z);
            const double hz_by = h0.dot(zc) + b0.dot(yc);
            if (hz_by < 0 && tau < kappa) {
                const double res = (A0.transpose() * yc + G0.transpose() * zc).lpNorm<Eigen::Infinity>();
                if (res <= tol * -hz_by) {
                    sol.status = Status::infeasible;
                    sol.x = Vec::Zero(nvar);
                    return sol;
                }
            }
            const Vec xc = sc.D.cwiseProduct(x), scn = s.cwiseQuotient(sc.EG);
            const double cx = c0.dot(xc);
            if (cx < 0 && tau < kappa) {
                const double res = std::max(p ? (A0 * xc).lpNorm<Eigen::Infinity>() : 0.0,
                                            (G0 * xc + scn).lpNorm<Eigen::Infinity>());
                if (res <= tol * -cx) {
                    sol.status = Status::unbounded;
                    return sol;
                }
            }
        }
        if (iter == options.max_iter) break;

        W.compute(K, s, z);
        const Vec lambda = W.apply(K, z);
        if (options.verbose) std::fprintf(stderr, "    lambda finite %d mineig s %.3e z %.3e\n", (int)lambda.allFinite(), ops.min_eig(s), ops.min_eig(z));
        if (!lambda.allFinite() || !kkt.factor(&W, reg)) {
            sol.status = Status::numerical_failure;
            break;
        }
        const double mu = (s.dot(z) + kappa * tau) / (degree + 1.0);

        Vec rhs1(n + p + m);
        rhs1 << -f.c, f.b, f.h;
        Vec x1, y1, z1;
        split(kkt.solve(rhs1), x1, y1, z1);
        const double denom_base = -f.c.dot(x1) - f.b.dot(y1) - f.h.dot(z1);

        struct Dir {
            Vec dx, dy, dz, ds;
            double dtau, dkappa;
        };
        auto direction = [&](double sigma, const Vec& ds_target, double dk_target) {
            const double red = 1.0 - sigma;
            const Vec r1 = -red * R1, r2 = -red * R2, r3 = -red * R3;
            const double r4 = -red * R4;
            const Vec lds = ops.inv_circ(lambda, ds_target);
            Vec rhs2(n + p + m);
            rhs2 << r1, -r2, -r3 - W.apply(K, lds);
            Vec x2, y2, z2;
            split(kkt.solve(rhs2), x2, y2, z2);
            Dir d;
            d.dtau = (r4 + f.c.dot(x2) + f.b.dot(y2) + f.h.dot(z2) + dk_target / tau) /
                     (kappa / tau + denom_base);
            d.dx = x2 + d.dtau * x1;
            d.dy = y2 + d.dtau * y1;
            d.dz = z2 + d.dtau * z1;
            d.ds = W.apply(K, lds - W.apply(K, d.dz));
            d.dkappa = (dk_target - kappa * d.dtau) / tau;
            return d;
        };
        auto step_to_boundary = [&](const Dir& d) {
            double a = std::min(ops.max_step(s, d.ds), ops.max_step(z, d.dz));
            if (d.dtau < 0) a = std::min(a, -tau / d.dtau);
            if (d.dkappa < 0) a = std::min(a, -kappa / d.dkappa);
            return a;
        };

        const Vec ll = ops.circ(lambda, lambda);
        const Dir aff = direction(0.0, -ll, -kappa * tau);
        const double a_aff = std::min(1.0, step_to_boundary(aff));
        const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 0.0, 1.0);

        const Vec corr = ops.circ(W.apply_inv(K, aff.ds), W.apply(K, aff.dz));
        const Dir dir = direction(sigma, -ll - corr + sigma * mu * e, -kappa * tau - aff.dkappa * aff.dtau + sigma * mu);
        const double alpha = std::min(1.0, 0.99 * step_to_boundary(dir));
        if (options.verbose) std::fprintf(stderr, "    a_aff %.3e alpha %.3e sigma %.3e\n", a_aff, alpha, sigma);
        if (!(alpha > 1e-12) || !dir.dx.allFinite()) {
            sol.status = Status::numerical_failure;
            break;
        }
        x += alpha * dir.dx;
        y += alpha * dir.dy;
        z += alpha * dir.dz;
        s += alpha * dir.ds;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
    }
    // Report the last iterate for diagnostics.
    finish(sc.D.cwiseProduct(x) / tau, sc.EA.cwiseProduct(y) * (cs / tau), sc.EG.cwiseProduct(z) * (cs / tau));
    return sol;
}

}  // namespace accep::conic
