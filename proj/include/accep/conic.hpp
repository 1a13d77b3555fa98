#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace accep::conic {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Term {
    int var = 0;
    double coef = 0.0;
};

/// Sparse affine expression sum(coef * x[var]) + constant.
struct Affine {
    std::vector<Term> terms;
    double constant = 0.0;

    Affine() = default;
    Affine(std::initializer_list<Term> t, double c = 0.0) : terms(t), constant(c) {}

    Affine& add(int var, double coef) {
        terms.push_back({var, coef});
        return *this;
    }
    Affine& operator+=(const Affine& other);
    Affine& operator*=(double s);
    double evaluate(const Eigen::VectorXd& x) const;
};

struct Variable {
    double lower = -kInf;
    double upper = kInf;
    std::string name;
    /// Equation tag carried by the bounds when they encode a model constraint.
    std::string bound_tag;
};

/// lower <= expr <= upper (lower == upper encodes an equality).
struct LinearRow {
    std::vector<Term> terms;
    double lower = -kInf;
    double upper = kInf;
    std::string tag;
    std::string label;

    bool is_equality() const { return lower == upper; }
};

/// || (args_i(x))_i ||_2 <= bound(x)
struct SocConstraint {
    std::vector<Affine> args;
    Affine bound;
    std::string tag;
    std::string label;
};

/// Linear objective, linear rows and second-order cones over bounded variables.
class ConvexProgram {
public:
    int add_variable(double lower, double upper, std::string name = {}, std::string bound_tag = {});
    /// Duplicate variables in `terms` are merged.
    int add_row(std::vector<Term> terms, double lower, double upper, std::string tag,
                std::string label = {});
    int add_cone(std::vector<Affine> args, Affine bound, std::string tag, std::string label = {});

    void set_cost(int var, double coef) { cost_[static_cast<std::size_t>(var)] = coef; }
    void add_cost(int var, double coef) { cost_[static_cast<std::size_t>(var)] += coef; }
    void add_objective_constant(double c) { objective_constant_ += c; }

    std::size_t num_variables() const { return variables_.size(); }
    const std::vector<Variable>& variables() const { return variables_; }
    std::vector<Variable>& variables() { return variables_; }
    const std::vector<LinearRow>& rows() const { return rows_; }
    const std::vector<SocConstraint>& cones() const { return cones_; }
    const std::vector<double>& cost() const { return cost_; }
    double objective_constant() const { return objective_constant_; }

    double objective(const Eigen::VectorXd& x) const;

    /// Empty when well formed; otherwise human-readable problems.
    std::vector<std::string> check_well_formed() const;

private:
    std::vector<Variable> variables_;
    std::vector<LinearRow> rows_;
    std::vector<SocConstraint> cones_;
    std::vector<double> cost_;
    double objective_constant_ = 0.0;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit, numerical_failure };

const char* to_string(Status status);

struct SolverOptions {
    double tol = 1e-6;
    int max_iter = 200;
    bool equilibrate = true;
    bool verbose = false;
};

struct Solution {
    Status status = Status::numerical_failure;
    Eigen::VectorXd x;
    /// Multipliers of linear rows. For equalities `row_dual_upper` carries the
    /// free multiplier; for inequalities both sides are nonnegative.
    Eigen::VectorXd row_dual_lower;
    Eigen::VectorXd row_dual_upper;
    /// Cone multipliers (first entry pairs with the bound).
    std::vector<Eigen::VectorXd> cone_duals;
    double objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;

    bool ok() const { return status == Status::optimal; }
};

/// Homogeneous self-dual interior point method with Nesterov-Todd scaling.
Solution solve(const ConvexProgram& program, const SolverOptions& options = {});

struct ClassResidual {
    double max_violation = 0.0;
    std::string worst;  // label (or index) of the worst constraint
};

struct ResidualReport {
    ClassResidual bounds;
    ClassResidual equalities;
    ClassResidual inequalities;
    ClassResidual cones;

    double max_violation() const;
    bool within(double tol) const { return max_violation() <= tol; }
};

/// Evaluates all constraint classes at `point`, independently of solve().
ResidualReport check_solution(const ConvexProgram& program, const Eigen::VectorXd& point);

/// One constraint per line in canonical order (variables, rows, cones).
void dump_program(const ConvexProgram& program, std::ostream& out);

namespace detail {
/// Largest step alpha >= 0 keeping u + alpha * du in the second-order cone
/// (u strictly inside); infinity when unrestricted.
double soc_step(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& du);

/// Nesterov-Todd scaling of a second-order cone pair (s, z): returns the
/// symmetric matrix W with W z = W^{-1} s.
Eigen::MatrixXd soc_nt_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z);
}  // namespace detail

}  // namespace accep::conic
