#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "accep/conic.hpp"
#include "accep/netmodel.hpp"

namespace accep {

inline constexpr int kCaseSchemaVersion = 1;

class CaseError : public std::runtime_error {
public:
    enum class Kind { io, parse, schema_version, unknown_key, missing_key, bad_value, dangling_reference, invalid };

    CaseError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

const char* to_string(CaseError::Kind kind);

struct ScenarioOptions {
    double load_power_factor = 0.99;
    double hvdc_loss_per_1000km = 0.03;
    bool attach_vsc_compensators = true;
};

struct SolverSettings {
    double tol = 1e-6;
    int max_iter = 200;
    double scp_tol = 0.05;
    int scp_max_iters = 8;
    int tangents = 3;
};

struct LoadedCase {
    NetworkCase network;
    SnapshotSeries series;
    ScenarioOptions scenario;
    SolverSettings solver;
};

/// Reads a JSON case (snapshots inline or from a CSV next to it) and validates
/// it. Throws CaseError.
LoadedCase load_case(const std::filesystem::path& path);

/// Same as load_case for in-memory text; relative series paths resolve
/// against `base_dir`.
LoadedCase parse_case(const std::string& text, const std::filesystem::path& base_dir = {});

}  // namespace accep
