#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "accep/formulation.hpp"
#include "accep/netmodel.hpp"
#include "accep/nlp.hpp"

namespace accep {

/// Exact pi-model flows of one circuit bundle: g, b, b_sh scaled by `circuits`.
/// theta = theta_from - theta_to.
BranchFlows ac_branch_flows(double v_from, double v_to, double theta, const AcBranch& branch, double circuits);

/// Net flow leaving every bus through AC branches (branches with zero circuits
/// are out of service).
struct BusInjections {
    Eigen::VectorXd p, q;
};

BusInjections bus_injections(const NetworkCase& net, const Eigen::VectorXd& circuits, const Eigen::VectorXd& v,
                             const Eigen::VectorXd& theta);

/// d(p, q) / d(theta, v), 2N x 2N, rows [p; q], columns [theta; v].
Eigen::MatrixXd power_flow_jacobian(const NetworkCase& net, const Eigen::VectorXd& circuits,
                                    const Eigen::VectorXd& v, const Eigen::VectorXd& theta);

struct PowerFlowSpec {
    Eigen::VectorXd p_injection;  // specified net injection per bus
    Eigen::VectorXd q_injection;
    /// One slack bus per synchronous island (angle 0, voltage from v_seed).
    std::vector<std::size_t> slack_buses;
    Eigen::VectorXd v_seed, theta_seed;
};

struct PowerFlowResult {
    bool converged = false;
    int iterations = 0;
    double mismatch = 0.0;  // max over non-slack buses
    std::string message;
    Eigen::VectorXd v, theta;
    BusInjections injections;
};

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 30;
};

/// Polar Newton-Raphson with all non-slack buses PQ.
PowerFlowResult newton_power_flow(const NetworkCase& net, const Eigen::VectorXd& circuits,
                                  const PowerFlowSpec& spec, const NewtonOptions& options = {});

/// Lowest-index bus of every AC island.
std::vector<std::size_t> island_reference_buses(const NetworkCase& net);

/// Single-snapshot AC state.
struct OperatingPoint {
    std::size_t snapshot = 0;
    Eigen::VectorXd v, theta;                      // per bus
    Eigen::VectorXd p, q, beta, beta_su, beta_sd;  // per source
    Eigen::VectorXd u_source;                      // per source
    Eigen::VectorXd p_charge;                      // per source (storage only)
    Eigen::VectorXd p_from, q_from, p_to, q_to;    // per AC branch
    Eigen::VectorXd dc_fwd, dc_bwd, dc_from, dc_to;  // per HVDC link
    double objective = 0.0;
};

enum class NlpStatus { feasible_optimal, locally_infeasible, iteration_limit };

const char* to_string(NlpStatus status);

struct NlpReport {
    NlpStatus status = NlpStatus::locally_infeasible;
    double feasibility = 0.0;
    double stationarity = 0.0;
    double complementarity = 0.0;
    double objective = 0.0;
    int iterations = 0;
    int start = 0;  // 0 warm start, 1 flat start
    double certification_residual = 0.0;
    std::string message;

    bool ok() const { return status == NlpStatus::feasible_optimal; }
};

/// Independent check of an operating point: Newton power flow from the stated
/// injections, then slack mismatch and operating limits.
struct Certification {
    bool passed = false;
    bool converged = false;
    double residual = 0.0;   // max(power-flow mismatch, slack-bus mismatch)
    double limit_violation = 0.0;
    std::string message;
};

Certification certify_operating_point(const NetworkCase& net, const SnapshotSeries& series,
                                      const Eigen::VectorXd& circuits, const OperatingPoint& point,
                                      double tol = 1e-6);

/// Data fixed by the initial solution around one snapshot.
struct SnapshotContext {
    std::size_t t = 0;
    Eigen::VectorXd circuits;        // AC circuits u_l (fixed)
    Eigen::VectorXd u_dc;            // HVDC circuits (fixed)
    Eigen::VectorXd u_source;        // current u_s
    Eigen::VectorXd beta_prev;       // beta*_{s,t-1}, cyclic
    Eigen::VectorXd beta_su;         // beta^su*_{s,t}
    Eigen::VectorXd implicit_sd;     // max(beta*_{t-1} + beta^su* - beta*_t, 0)
    Eigen::VectorXd p_charge;        // fixed charging
    Eigen::VectorXd storage_p_cap;   // discharge bound from the initial solution
    std::optional<OperatingPoint> warm;
};

SnapshotContext make_snapshot_context(const NetworkCase& net, const SnapshotSeries& series,
                                      const PlanSolution& initial, const Eigen::VectorXd& u_source, std::size_t t);

struct NlpSettings {
    nlp::Options ipm;
    double certification_tol = 1e-6;
};

struct AcSolveResult {
    OperatingPoint point;
    NlpReport report;
    Eigen::VectorXd increments;  // u_s - u_s^* (zero for the OPF)
};

/// Dispatch-only snapshot problem with every u fixed.
AcSolveResult solve_ac_opf(const NetworkCase& net, const SnapshotSeries& series, const SnapshotContext& ctx,
                           const NlpSettings& settings = {});

/// Snapshot problem allowing u_s >= u_s^* for non-storage sources.
AcSolveResult solve_ac_gep(const NetworkCase& net, const SnapshotSeries& series, const SnapshotContext& ctx,
                           const NlpSettings& settings = {});

/// Operating point of snapshot t as stated by a plan.
OperatingPoint plan_operating_point(const NetworkCase& net, const PlanSolution& plan, std::size_t t);

}  // namespace accep
