#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace accep {

inline constexpr double kPi = 3.14159265358979323846;

enum class SourceKind { sg, ibr, storage, compensator };
enum class ConverterKind { line_commutated, voltage_source };
enum class CapabilityPreset { d_curve, u_shape, triangle, rectangle, custom };

const char* to_string(SourceKind kind);
const char* to_string(ConverterKind kind);
const char* to_string(CapabilityPreset preset);

/// Half-plane bounding active power as a function of reactive power:
/// p <= slope * q + intercept * p_max * beta (upper) or >= (lower).
struct CapabilityLine {
    double slope = 0.0;
    double intercept = 0.0;

    bool operator==(const CapabilityLine&) const = default;
};

/// Convex PQ polytope of a source, expressed per unit of p_max.
struct CapabilityCurve {
    CapabilityPreset preset = CapabilityPreset::rectangle;
    std::vector<CapabilityLine> upper_lines;
    std::vector<CapabilityLine> lower_lines;
    double q_min = -0.4;  // per unit of p_max
    double q_max = 0.4;

    static CapabilityCurve d_curve();
    static CapabilityCurve u_shape();
    static CapabilityCurve triangle(double cos_phi = 0.95);
    static CapabilityCurve rectangle();

    bool operator==(const CapabilityCurve&) const = default;
};

struct Bus {
    std::string id;
    std::string voltage_class;
};

struct SeriesAdmittance {
    double g = 0.0;
    double b = 0.0;
};

SeriesAdmittance series_admittance(double r, double x);

struct AcBranch {
    std::string id;
    std::size_t from = 0;
    std::size_t to = 0;
    double r = 0.0;          // per circuit
    double x = 0.0;          // per circuit
    double b_sh = 0.0;       // total shunt susceptance per circuit
    double f_max = 0.0;      // thermal rating per circuit
    double a = 1.0;          // loading limit fraction
    double theta_max = kPi / 6.0;
    double u_min = 1.0;
    double u_max = 1.0;
    double capital_cost = 0.0;  // per circuit and year
    double length_km = 0.0;

    SeriesAdmittance admittance() const { return series_admittance(r, x); }
};

struct DcBranch {
    std::string id;
    std::size_t from = 0;
    std::size_t to = 0;
    double p_max = 0.0;  // per circuit
    double length_km = 0.0;
    double eta = 0.0;  // loss fraction
    ConverterKind converter = ConverterKind::line_commutated;
    double u_min = 0.0;
    double u_max = 0.0;
    double capital_cost = 0.0;
};

struct StorageParams {
    double e_max = 0.0;    // energy per unit of capacity
    double eta_dis = 1.0;  // discharging efficiency
    double eta_chg = 1.0;  // charging efficiency
};

struct PowerSource {
    std::string id;
    std::size_t bus = 0;
    SourceKind kind = SourceKind::sg;
    std::string carrier;
    double p_min = 0.0;  // per unit of capacity
    double p_max = 1.0;
    double q_min = 0.0;
    double q_max = 0.0;
    CapabilityCurve capability;
    double u_min = 0.0;
    double u_max = 0.0;
    double capital_cost = 0.0;   // per unit and year
    double marginal_cost = 0.0;  // per p.u. energy (p.u. * h)
    double startup_cost = 0.0;   // per unit started
    std::optional<StorageParams> storage;
    /// Set for compensators owned by a voltage-source HVDC link.
    std::optional<std::size_t> vsc_link;
};

struct NetworkCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<AcBranch> ac_branches;
    std::vector<DcBranch> dc_branches;
    std::vector<PowerSource> sources;

    std::optional<std::size_t> find_bus(const std::string& id) const;
    std::optional<std::size_t> find_source(const std::string& id) const;
};

/// Time series over T snapshots. Matrices are element-major (row = element).
struct SnapshotSeries {
    std::vector<double> duration;   // hours, per snapshot
    Eigen::MatrixXd load_p;         // buses x T
    Eigen::MatrixXd load_q;         // buses x T
    Eigen::MatrixXd availability;   // sources x T, in [0, 1]
    Eigen::MatrixXd inflow_max;     // sources x T, storage inflow bound

    std::size_t size() const { return duration.size(); }

    /// Pads per-source rows (unit availability, no inflow) up to `sources`.
    void resize_sources(std::size_t sources);

    /// Uniform series with unit availability and no inflow.
    static SnapshotSeries uniform(std::size_t buses, std::size_t sources, std::size_t snapshots,
                                  double hours = 1.0);
};

struct Violation {
    std::string element;
    std::string message;
};

/// Structural checks; never throws. Empty result means the case is usable.
std::vector<Violation> validate_case(const NetworkCase& network);
std::vector<Violation> validate_case(const NetworkCase& network, const SnapshotSeries& series);

/// d_q = d_p * tan(arccos(cos_phi)); positive values consume reactive power.
Eigen::MatrixXd derive_reactive_loads(const Eigen::MatrixXd& load_p, double cos_phi);

/// Reactive range of VSC terminals per unit of link rating (rectangle curve).
inline constexpr double kVscReactiveShare = 0.4;

/// Adds (or refreshes) two rectangle compensators per voltage-source link,
/// with reactive limits scaled by p_max * u of the link. `circuits` overrides
/// the link capacity used for scaling (defaults to u_min).
NetworkCase attach_vsc_compensators(const NetworkCase& network,
                                    const std::vector<double>* circuits = nullptr);

/// Vertices of the (p, q) polytope of a source at beta = 1 and the given
/// availability; empty when infeasible.
std::vector<Eigen::Vector2d> capability_vertices(const PowerSource& source, double availability = 1.0);

/// Connected components of the AC graph; entry n holds the island of bus n.
std::vector<std::size_t> ac_islands(const NetworkCase& network, std::size_t* count = nullptr);

/// HVDC loss fraction for a link of given length (default 3 % per 1000 km).
double hvdc_loss_factor(double length_km, double loss_per_1000km = 0.03);

}  // namespace accep
