#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "accep/acfeas.hpp"
#include "accep/formulation.hpp"
#include "accep/netmodel.hpp"

namespace accep {

enum class SnapshotOutcome { opf_feasible, gep_reinforced };

const char* to_string(SnapshotOutcome outcome);

struct SnapshotRecord {
    std::size_t snapshot = 0;
    SnapshotOutcome outcome = SnapshotOutcome::opf_feasible;
    NlpReport opf;                // retry with the current expansion
    std::optional<NlpReport> gep;  // present when the expansion step ran
    Eigen::VectorXd increments;   // per source
};

struct ReinforcementLog {
    std::vector<std::size_t> failing;  // snapshots whose screening solve failed
    std::vector<SnapshotRecord> records;
    Eigen::VectorXd cumulative_increments;  // per source
    Eigen::MatrixXd redispatch_positive;    // source x snapshot, energy
    Eigen::MatrixXd redispatch_negative;    // source x snapshot, energy (<= 0)
    Eigen::MatrixXd shutdown;               // beta^sd, source x snapshot
    std::vector<double> certification_residual;  // per snapshot of the final plan
    std::vector<bool> certified;
};

struct ReinforceOptions {
    NlpSettings nlp;
    unsigned workers = 1;
};

class ReinforcementError : public std::runtime_error {
public:
    ReinforcementError(const std::string& message, ReinforcementLog partial)
        : std::runtime_error(message), log_(std::move(partial)) {}
    const ReinforcementLog& log() const { return log_; }

private:
    ReinforcementLog log_;
};

/// Snapshots whose dispatch problem at the initial expansion is not AC-feasible.
/// Solutions for every snapshot are returned through `results` when given.
std::vector<std::size_t> screen_snapshots(const NetworkCase& net, const SnapshotSeries& series,
                                          const PlanSolution& initial, const ReinforceOptions& options = {},
                                          std::vector<AcSolveResult>* results = nullptr);

struct ReinforcedPlan {
    PlanSolution plan;
    ReinforcementLog log;
};

/// Makes an initial plan AC-feasible snapshot by snapshot. Throws
/// ReinforcementError when an expansion step fails.
ReinforcedPlan reinforce(const NetworkCase& net, const SnapshotSeries& series, const PlanSolution& initial,
                         const ReinforceOptions& options = {});

struct RedispatchTotals {
    double positive = 0.0;
    double negative = 0.0;  // <= 0
};

RedispatchTotals account_redispatch(const PlanSolution& initial, const PlanSolution& final_plan,
                                    const SnapshotSeries& series);

/// Terms linking the final cost to the initial one.
struct CostDelta {
    double capital_increments = 0.0;
    double redispatch = 0.0;  // operation cost change
    double startup = 0.0;     // change of startup cost
    double shutdown = 0.0;    // penalty on beta^sd
    double total() const { return capital_increments + redispatch + startup + shutdown; }
};

CostDelta decompose_cost_change(const NetworkCase& net, const SnapshotSeries& series, const PlanSolution& initial,
                                const PlanSolution& final_plan);

}  // namespace accep
