#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "accep/formulation.hpp"
#include "accep/netmodel.hpp"
#include "accep/reinforce.hpp"

namespace accep {

inline constexpr double kFictitiousLossTol = 1e-5;

struct LossRecord {
    std::string branch;
    std::size_t branch_index = 0;
    std::size_t snapshot = 0;
    double theta = 0.0;  // angle difference (or implied by the flow for DC-lossy)
    double model = 0.0;
    double bound = 0.0;
    double slack = 0.0;  // model - bound
    bool fictitious = false;
    bool below_bound = false;
};

struct LossAudit {
    FormulationKind kind = FormulationKind::dc_lossy;
    std::vector<LossRecord> records;
    double total_model = 0.0;
    double total_bound = 0.0;
    double min_slack = 0.0;
    double max_slack = 0.0;
    std::size_t fictitious_count = 0;
};

/// Compares each branch loss of a loss-modelling plan with its analytical lower
/// bound. Throws std::invalid_argument for the lossless DC kind.
LossAudit audit_losses(const NetworkCase& net, const PlanSolution& plan, double flag_tol = kFictitiousLossTol);

/// Sum of injections minus load and network losses, per snapshot.
Eigen::VectorXd energy_balance_residual(const NetworkCase& net, const SnapshotSeries& series,
                                        const PlanSolution& plan);

struct CarrierTotals {
    std::map<std::string, double> capacity;  // p.u. (compensators: reactive rating)
    std::map<std::string, double> energy;    // p.u. * h
};

CarrierTotals carrier_totals(const NetworkCase& net, const SnapshotSeries& series, const PlanSolution& plan);

/// sum over branches of (u - u_min) * rating * length, in p.u. * km.
double transmission_expansion(const NetworkCase& net, const PlanSolution& plan);

struct Summary {
    double feasible_share = 1.0;  // of the initial solution
    double redispatch_positive = 0.0;
    double redispatch_negative = 0.0;
    double cost_initial = 0.0;
    double cost_final = 0.0;
    double transmission_expansion_initial = 0.0;
    double transmission_expansion_final = 0.0;
    double storage_charge = 0.0;     // final, p.u. * h
    double storage_discharge = 0.0;  // final, p.u. * h
    CarrierTotals initial_mix, final_mix;
};

Summary summarize(const NetworkCase& net, const SnapshotSeries& series, const PlanSolution& initial,
                  const PlanSolution& final_plan, const ReinforcementLog* log = nullptr);

/// Tidy CSV files: summary.csv, capacity_mix.csv, energy_mix.csv.
void write_summary(const Summary& summary, const std::string& dir);

}  // namespace accep
