#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace accep::nlp {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// min f(x) s.t. g(x) = 0, h(x) <= 0 with twice differentiable f, g, h.
class Model {
public:
    virtual ~Model() = default;
    virtual int num_variables() const = 0;
    virtual int num_equalities() const = 0;
    virtual int num_inequalities() const = 0;
    virtual double objective(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd equalities(const Eigen::VectorXd& x) const = 0;
    virtual SparseMatrix equality_jacobian(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd inequalities(const Eigen::VectorXd& x) const = 0;
    virtual SparseMatrix inequality_jacobian(const Eigen::VectorXd& x) const = 0;
    /// Hessian of f + lam'g + mu'h, full symmetric storage.
    virtual SparseMatrix lagrangian_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& lam,
                                            const Eigen::VectorXd& mu) const = 0;
};

enum class Status { converged, infeasible, iteration_limit, numerical_failure };

const char* to_string(Status status);

struct Options {
    double feas_tol = 1e-8;  // absolute, on g and max(h, 0)
    double grad_tol = 1e-6;  // relative to the multipliers
    double comp_tol = 1e-6;
    int max_iter = 200;
    double step_fraction = 0.99995;
    double centering = 0.1;
    double z0 = 1.0;
    bool verbose = false;
};

struct Result {
    Status status = Status::numerical_failure;
    Eigen::VectorXd x, lam, mu, z;
    double objective = 0.0;
    double feasibility = 0.0;
    double stationarity = 0.0;
    double complementarity = 0.0;
    int iterations = 0;
};

/// Primal-dual interior point with slack barrier and inertia-corrected KKT.
Result solve(const Model& model, const Eigen::VectorXd& x0, const Options& options = {});

}  // namespace accep::nlp
