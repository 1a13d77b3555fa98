#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "accep/conic.hpp"
#include "accep/formulation.hpp"
#include "accep/netmodel.hpp"

namespace accep {

/// Progress of the successive convex programming loop after iteration k.
struct ScpState {
    int k = 0;
    Eigen::VectorXd parameter_circuits;  // circuits behind y_l^k and b_sh^k
    Eigen::VectorXd u;                   // u_l after the k-th solve
    double delta = 0.0;
    double objective = 0.0;
    double circuits_added = 0.0;  // sum of u_l - u_l^min
    std::vector<double> objectives;
};

struct ScpOptions {
    double tol = 0.05;
    int max_iters = 8;
    int tangents = 3;
    conic::SolverOptions solver;
    std::function<void(const ScpState&)> observer;
};

class ScpError : public std::runtime_error {
public:
    ScpError(int iteration, conic::Status status, const std::string& message)
        : std::runtime_error(message), iteration_(iteration), status_(status) {}
    int iteration() const { return iteration_; }
    conic::Status status() const { return status_; }

private:
    int iteration_;
    conic::Status status_;
};

/// Relative change ||u - u_prev|| / ||u||; zero when both vanish.
double relative_change(const Eigen::VectorXd& u, const Eigen::VectorXd& u_prev);

/// Solves the planning problem with branch parameters re-derived from the
/// previous expansion until the expansion settles, then re-solves once with
/// the expansion fixed. Throws ScpError when a solve is not optimal.
PlanSolution run_scp(const NetworkCase& net, const SnapshotSeries& series, FormulationKind kind,
                     const ScpOptions& options = {});

/// Formats the per-iteration log line.
std::string format_scp_state(const ScpState& state);

struct AngleBlockingFlag {
    std::size_t branch = 0;
    std::string id;
    double threshold = 0.0;  // theta_max / (x a f_max)
    bool blocked = false;    // u_min >= threshold
};

double angle_blocking_threshold(double theta_max, double x, double a, double f_max);

/// One entry per AC branch, evaluated with per-circuit reactance.
std::vector<AngleBlockingFlag> check_angle_blocking(const NetworkCase& net);

}  // namespace accep
