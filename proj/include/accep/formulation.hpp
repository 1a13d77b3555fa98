#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "accep/conic.hpp"
#include "accep/netmodel.hpp"

namespace accep {

enum class FormulationKind { dc, dc_lossy, lpac, decoupled };

const char* to_string(FormulationKind kind);
std::optional<FormulationKind> parse_formulation_kind(std::string_view text);
bool models_reactive_power(FormulationKind kind);
bool models_losses(FormulationKind kind);

/// Constraint tags emitted for a kind, sorted and unique.
std::vector<std::string> expected_constraint_tags(FormulationKind kind);

struct FormulationOptions {
    int tangents = 3;
    /// Circuits used to derive AC branch parameters; empty means u_min.
    /// Zero counts as a single circuit.
    std::vector<double> parameter_circuits;
    /// Fixes the AC branch circuits (final solve of the expansion loop).
    std::optional<std::vector<double>> fixed_circuits;
};

/// Electrical parameters of an AC branch for a given circuit count.
struct BranchPhysics {
    double g = 0.0;
    double b = 0.0;
    double b_sh = 0.0;
    double r = 0.0;
    double x = 0.0;
    double circuits = 1.0;  // count used for the parameters
};

BranchPhysics branch_physics(const AcBranch& branch, double circuits);

/// u_max of a DC-family branch after the angle-limit tightening.
double tightened_u_max(const AcBranch& branch, const BranchPhysics& physics);

struct BranchFlows {
    double p_from = 0.0;
    double q_from = 0.0;
    double p_to = 0.0;
    double q_to = 0.0;
};

/// Linearised flows with a given cosine surrogate (theta = theta_from - theta_to).
BranchFlows lpac_flows(const BranchPhysics& ph, double v_from, double v_to, double theta, double cos_value);
BranchFlows decoupled_flows(const BranchPhysics& ph, double v_from, double v_to, double theta);

/// Coefficient of the quadratic cosine cut, (1 - cos t) / t^2.
double cosine_cut_coefficient(double theta_max);

/// 2 (1 - cos t) / t^2 for 0 < t <= pi/6; throws std::domain_error otherwise.
double compare_loss_models(double theta_max);

/// Tangent centres +-h a f u_max / H, h = 1..H, ascending.
std::vector<double> loss_tangent_points(double a, double f_max, double u_max, int tangents);

/// Variable indices (-1 where absent). Grids are element x snapshot.
struct VariableCatalog {
    using Grid = Eigen::MatrixXi;

    std::vector<int> u_source, u_ac, u_dc;
    Grid beta, beta_su, p, q, p_charge, p_inflow, energy;
    Grid p_from, p_to, q_from, q_to, p_loss, q_dem, cos_relax;
    Grid dc_from, dc_to, dc_fwd, dc_bwd;
    Grid theta, v;
};

struct Formulation {
    FormulationKind kind = FormulationKind::dc;
    FormulationOptions options;
    conic::ConvexProgram program;
    VariableCatalog vars;
    std::vector<BranchPhysics> physics;  // per AC branch
    std::vector<double> u_max_ac;        // after tightening
    Eigen::MatrixXi balance_p, balance_q;  // nodal balance rows, bus x snapshot
};

// Blocks, in the order used by build_formulation. Each block creates the
// variables it owns.
void build_commitment_block(Formulation& f, const NetworkCase& net, const SnapshotSeries& series);
void build_injection_block(Formulation& f, const NetworkCase& net, const SnapshotSeries& series);
void build_storage_block(Formulation& f, const NetworkCase& net, const SnapshotSeries& series);
void build_hvdc_block(Formulation& f, const NetworkCase& net, const SnapshotSeries& series);
void build_dc_flow(Formulation& f, const NetworkCase& net, const SnapshotSeries& series);
void build_dc_lossy_flow(Formulation& f, const NetworkCase& net, const SnapshotSeries& series);
void build_lpac_flow(Formulation& f, const NetworkCase& net, const SnapshotSeries& series);
void build_decoupled_flow(Formulation& f, const NetworkCase& net, const SnapshotSeries& series);
void build_objective(Formulation& f, const NetworkCase& net, const SnapshotSeries& series);

Formulation build_formulation(const NetworkCase& net, const SnapshotSeries& series, FormulationKind kind,
                              const FormulationOptions& options = {});

/// Distinct tags of rows, cones and tagged bounds of a program, sorted.
std::vector<std::string> emitted_constraint_tags(const conic::ConvexProgram& program);

struct ObjectiveBreakdown {
    double capital_sources = 0.0;
    double capital_ac = 0.0;
    double capital_dc = 0.0;
    double operation = 0.0;
    double startup = 0.0;
    double shutdown = 0.0;

    double total() const { return capital_sources + capital_ac + capital_dc + operation + startup + shutdown; }
};

/// Expansion, dispatch and flows of a solved plan. Matrices are element x snapshot.
struct PlanSolution {
    FormulationKind kind = FormulationKind::dc;
    Eigen::VectorXd u_source, u_ac, u_dc;
    Eigen::VectorXd parameter_circuits;
    Eigen::MatrixXd p, q, beta, beta_su, beta_sd, p_charge, p_inflow, energy;
    Eigen::MatrixXd p_from, p_to, q_from, q_to, p_loss, q_dem, cos_relax;
    Eigen::MatrixXd dc_from, dc_to, dc_fwd, dc_bwd;
    Eigen::MatrixXd v, theta;
    Eigen::MatrixXd price;  // active-power nodal price per energy, bus x snapshot
    ObjectiveBreakdown cost;
    double objective = 0.0;  // as reported by the solver
    int iterations = 1;
    bool converged = true;
    std::vector<double> delta_history;
};

PlanSolution extract_plan(const Formulation& f, const NetworkCase& net, const SnapshotSeries& series,
                          const conic::Solution& solution);

/// Recomputes the cost terms from plan values alone.
ObjectiveBreakdown evaluate_cost(const NetworkCase& net, const SnapshotSeries& series, const PlanSolution& plan);

}  // namespace accep
