#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "accep/formulation.hpp"
#include "accep/netmodel.hpp"
#include "accep/reinforce.hpp"
#include "accep/report.hpp"

namespace accep {

class ResultsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ResultBundle {
    std::string case_path;
    std::string initial_dir;  // set for reinforced plans
    PlanSolution plan;
    std::optional<LossAudit> loss_audit;
    std::optional<ReinforcementLog> log;
};

/// Plan with every per-element matrix and vector sized to the network (missing
/// ones are zero). This is the form read_results returns.
PlanSolution canonical_plan(const PlanSolution& plan, const NetworkCase& net, std::size_t snapshots);

/// Writes plan.csv, dispatch.csv, flows.csv, buses.csv, objective.json,
/// loss_audit.csv and reinforcement_log.json into `dir`.
void write_results(const std::filesystem::path& dir, const NetworkCase& net, const ResultBundle& bundle);

ResultBundle read_results(const std::filesystem::path& dir, const NetworkCase& net);

}  // namespace accep
