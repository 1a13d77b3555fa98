#include "accep/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace accep {

const char* to_string(SourceKind kind) {
    switch (kind) {
        case SourceKind::sg: return "sg";
        case SourceKind::ibr: return "ibr";
        case SourceKind::storage: return "storage";
        case SourceKind::compensator: return "compensator";
    }
    return "?";
}

const char* to_string(ConverterKind kind) {
    return kind == ConverterKind::voltage_source ? "vsc" : "lcc";
}

const char* to_string(CapabilityPreset preset) {
    switch (preset) {
        case CapabilityPreset::d_curve: return "d-curve";
        case CapabilityPreset::u_shape: return "u-shape";
        case CapabilityPreset::triangle: return "triangle";
        case CapabilityPreset::rectangle: return "rectangle";
        case CapabilityPreset::custom: return "custom";
    }
    return "?";
}

CapabilityCurve CapabilityCurve::d_curve() {
    return {CapabilityPreset::d_curve, {{0.5, 1.0}, {-1.0 / 3.0, 1.0}}, {}, -0.4, 0.6};
}

CapabilityCurve CapabilityCurve::u_shape() {
    return {CapabilityPreset::u_shape, {}, {{0.5, 0.0}, {-0.5, 0.0}}, -0.4, 0.4};
}

CapabilityCurve CapabilityCurve::triangle(double cos_phi) {
    const double tan_phi = std::tan(std::acos(cos_phi));
    return {CapabilityPreset::triangle,
            {},
            {{1.0 / tan_phi, 0.0}, {-1.0 / tan_phi, 0.0}},
            -tan_phi,
            tan_phi};
}

CapabilityCurve CapabilityCurve::rectangle() {
    return {CapabilityPreset::rectangle, {}, {}, -0.4, 0.4};
}

SeriesAdmittance series_admittance(double r, double x) {
    const double d = r * r + x * x;
    return {r / d, -x / d};
}

std::optional<std::size_t> NetworkCase::find_bus(const std::string& id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return i;
    return std::nullopt;
}

std::optional<std::size_t> NetworkCase::find_source(const std::string& id) const {
    for (std::size_t i = 0; i < sources.size(); ++i)
        if (sources[i].id == id) return i;
    return std::nullopt;
}

SnapshotSeries SnapshotSeries::uniform(std::size_t buses, std::size_t sources, std::size_t snapshots,
                                       double hours) {
    SnapshotSeries s;
    const auto T = static_cast<Eigen::Index>(snapshots);
    s.duration.assign(snapshots, hours);
    s.load_p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(buses), T);
    s.load_q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(buses), T);
    s.availability = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(sources), T);
    s.inflow_max = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sources), T);
    return s;
}

void SnapshotSeries::resize_sources(std::size_t sources) {
    const auto old = availability.rows();
    const auto S = static_cast<Eigen::Index>(sources);
    if (S <= old) return;
    const auto T = static_cast<Eigen::Index>(size());
    availability.conservativeResize(S, T);
    inflow_max.conservativeResize(S, T);
    availability.bottomRows(S - old).setOnes();
    inflow_max.bottomRows(S - old).setZero();
}

std::vector<std::size_t> ac_islands(const NetworkCase& network, std::size_t* count) {
    const std::size_t n = network.buses.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (const auto& br : network.ac_branches) {
        if (br.from >= n || br.to >= n) continue;
        auto a = find(br.from), b = find(br.to);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::size_t> label(n, n), island(n);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto root = find(i);
        if (label[root] == n) label[root] = next++;
        island[i] = label[root];
    }
    if (count) *count = next;
    return island;
}

double hvdc_loss_factor(double length_km, double loss_per_1000km) {
    return loss_per_1000km * length_km / 1000.0;
}

namespace {

struct HalfPlane {
    // a * p + b * q <= c
    double a, b, c;
};

std::vector<HalfPlane> capability_planes(const PowerSource& s, double availability) {
    const auto& cap = s.capability;
    std::vector<HalfPlane> hp;
    hp.push_back({1.0, 0.0, availability * s.p_max});
    hp.push_back({-1.0, 0.0, -s.p_min});
    hp.push_back({0.0, 1.0, s.q_max});
    hp.push_back({0.0, -1.0, -s.q_min});
    for (const auto& l : cap.upper_lines) hp.push_back({1.0, -l.slope, l.intercept * s.p_max});
    for (const auto& l : cap.lower_lines) hp.push_back({-1.0, l.slope, -l.intercept * s.p_max});
    return hp;
}

}  // namespace

std::vector<Eigen::Vector2d> capability_vertices(const PowerSource& source, double availability) {
    const auto hp = capability_planes(source, availability);
    constexpr double tol = 1e-10;
    std::vector<Eigen::Vector2d> vertices;
    for (std::size_t i = 0; i < hp.size(); ++i) {
        for (std::size_t j = i + 1; j < hp.size(); ++j) {
            const double det = hp[i].a * hp[j].b - hp[i].b * hp[j].a;
            if (std::abs(det) < 1e-14) continue;
            const double p = (hp[i].c * hp[j].b - hp[i].b * hp[j].c) / det;
            const double q = (hp[i].a * hp[j].c - hp[i].c * hp[j].a) / det;
            bool inside = true;
            for (const auto& h : hp) {
                if (h.a * p + h.b * q > h.c + tol * (1.0 + std::abs(h.c))) {
                    inside = false;
                    break;
                }
            }
            if (!inside) continue;
            const Eigen::Vector2d v(p, q);
            bool dup = false;
            for (const auto& w : vertices) dup = dup || (w - v).norm() < 1e-9;
            if (!dup) vertices.push_back(v);
        }
    }
    return vertices;
}

namespace {

template <typename T>
std::string str(const T& v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

std::vector<Violation> validate_case(const NetworkCase& net) {
    std::vector<Violation> out;
    auto fail = [&](std::string element, std::string msg) {
        out.push_back({std::move(element), std::move(msg)});
    };
    const std::size_t n = net.buses.size();
    if (n == 0) fail("case", "no buses");
    if (!(net.base_mva > 0)) fail("case", "base_mva must be positive");

    std::set<std::string> ids;
    for (const auto& b : net.buses)
        if (!ids.insert(b.id).second) fail("bus " + b.id, "duplicate bus id");

    auto check_ids = [&](const auto& items, const char* what) {
        std::set<std::string> seen;
        for (const auto& it : items)
            if (!seen.insert(it.id).second) fail(std::string(what) + " " + it.id, "duplicate id");
    };
    check_ids(net.ac_branches, "ac_branch");
    check_ids(net.dc_branches, "dc_branch");
    check_ids(net.sources, "source");

    for (const auto& br : net.ac_branches) {
        const std::string e = "ac_branch " + br.id;
        if (br.from >= n || br.to >= n) fail(e, "endpoint bus out of range");
        if (br.from == br.to) fail(e, "self loop");
        if (!(br.x > 0)) fail(e, "x must be positive (x = " + str(br.x) + ")");
        if (!(br.r >= 0)) fail(e, "r must be nonnegative");
        if (!(br.b_sh >= 0)) fail(e, "b_sh must be nonnegative");
        if (!(br.f_max > 0)) fail(e, "f_max must be positive");
        if (!(br.a > 0 && br.a <= 1)) fail(e, "loading limit a must lie in (0, 1]");
        if (!(br.theta_max > 0 && br.theta_max <= kPi / 2)) fail(e, "theta_max must lie in (0, pi/2]");
        if (!(br.u_min >= 0 && br.u_min <= br.u_max)) fail(e, "circuit bounds need 0 <= u_min <= u_max");
        if (!(br.capital_cost >= 0)) fail(e, "capital cost must be nonnegative");
        if (br.x > 0 && br.r >= 0) {
            auto y = br.admittance();
            if (!(y.g >= 0 && y.b <= 0)) fail(e, "admittance sign convention violated");
        }
    }
    for (const auto& br : net.dc_branches) {
        const std::string e = "dc_branch " + br.id;
        if (br.from >= n || br.to >= n) fail(e, "endpoint bus out of range");
        if (br.from == br.to) fail(e, "self loop");
        if (!(br.eta >= 0 && br.eta < 1)) fail(e, "loss factor must lie in [0, 1)");
        if (!(br.p_max > 0)) fail(e, "p_max must be positive");
        if (!(br.u_min >= 0 && br.u_min <= br.u_max)) fail(e, "circuit bounds need 0 <= u_min <= u_max");
        if (!(br.capital_cost >= 0)) fail(e, "capital cost must be nonnegative");
    }
    for (const auto& s : net.sources) {
        const std::string e = "source " + s.id;
        if (s.bus >= n) fail(e, "bus out of range");
        if (!(s.p_min <= s.p_max)) fail(e, "p_min > p_max");
        if (!(s.q_min <= s.q_max)) fail(e, "q_min > q_max");
        if (!(s.u_min >= 0 && s.u_min <= s.u_max)) fail(e, "unit bounds need 0 <= u_min <= u_max");
        if (!(s.capital_cost >= 0 && s.marginal_cost >= 0 && s.startup_cost >= 0))
            fail(e, "costs must be nonnegative");
        if (s.kind == SourceKind::storage) {
            if (!s.storage) {
                fail(e, "storage source without storage parameters");
            } else {
                const auto& st = *s.storage;
                if (!(st.eta_dis > 0 && st.eta_dis <= 1)) fail(e, "discharge efficiency must lie in (0, 1]");
                if (!(st.eta_chg > 0 && st.eta_chg <= 1)) fail(e, "charge efficiency must lie in (0, 1]");
                if (!(st.e_max >= 0)) fail(e, "e_max must be nonnegative");
            }
        } else if (s.storage) {
            fail(e, "storage parameters on non-storage source");
        }
        for (const auto& l : s.capability.upper_lines)
            if (!std::isfinite(l.slope) || !std::isfinite(l.intercept)) fail(e, "non-finite capability line");
        for (const auto& l : s.capability.lower_lines)
            if (!std::isfinite(l.slope) || !std::isfinite(l.intercept)) fail(e, "non-finite capability line");
        if (s.p_min <= s.p_max && s.q_min <= s.q_max && capability_vertices(s).empty())
            fail(e, "empty PQ capability polytope");
    }

    // Every bus must reach every other through AC or HVDC branches; AC
    // components form the synchronous islands.
    if (n > 0) {
        std::vector<std::vector<std::size_t>> adj(n);
        auto link = [&](std::size_t a, std::size_t b) {
            if (a < n && b < n) {
                adj[a].push_back(b);
                adj[b].push_back(a);
            }
        };
        for (const auto& br : net.ac_branches) link(br.from, br.to);
        for (const auto& br : net.dc_branches) link(br.from, br.to);
        std::vector<bool> seen(n, false);
        std::queue<std::size_t> queue;
        queue.push(0);
        seen[0] = true;
        while (!queue.empty()) {
            auto v = queue.front();
            queue.pop();
            for (auto w : adj[v])
                if (!seen[w]) {
                    seen[w] = true;
                    queue.push(w);
                }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!seen[i]) fail("bus " + net.buses[i].id, "not connected to the rest of the network");
    }
    return out;
}

std::vector<Violation> validate_case(const NetworkCase& net, const SnapshotSeries& series) {
    auto out = validate_case(net);
    const auto T = static_cast<Eigen::Index>(series.size());
    auto fail = [&](std::string element, std::string msg) {
        out.push_back({std::move(element), std::move(msg)});
    };
    auto shape = [&](const Eigen::MatrixXd& m, std::size_t rows, const char* what) {
        if (m.rows() != static_cast<Eigen::Index>(rows) || m.cols() != T)
            fail("snapshots", std::string(what) + " has wrong shape");
    };
    shape(series.load_p, net.buses.size(), "load_p");
    shape(series.load_q, net.buses.size(), "load_q");
    shape(series.availability, net.sources.size(), "availability");
    shape(series.inflow_max, net.sources.size(), "inflow_max");
    for (std::size_t t = 0; t < series.size(); ++t)
        if (!(series.duration[t] > 0)) fail("snapshot " + std::to_string(t), "duration must be positive");
    if (series.availability.size() > 0 &&
        (series.availability.minCoeff() < 0 || series.availability.maxCoeff() > 1))
        fail("snapshots", "availability outside [0, 1]");
    if (series.inflow_max.size() > 0 && series.inflow_max.minCoeff() < 0)
        fail("snapshots", "negative storage inflow bound");
    return out;
}

Eigen::MatrixXd derive_reactive_loads(const Eigen::MatrixXd& load_p, double cos_phi) {
    if (!(cos_phi > 0 && cos_phi <= 1))
        throw std::invalid_argument("power factor must lie in (0, 1]");
    const double tan_phi = cos_phi == 1.0 ? 0.0 : std::tan(std::acos(cos_phi));
    return load_p * tan_phi;
}

NetworkCase attach_vsc_compensators(const NetworkCase& network, const std::vector<double>* circuits) {
    NetworkCase out = network;
    for (std::size_t l = 0; l < network.dc_branches.size(); ++l) {
        const auto& link = network.dc_branches[l];
        if (link.converter != ConverterKind::voltage_source) continue;
        const double units = circuits ? (*circuits)[l] : link.u_min;
        for (int end = 0; end < 2; ++end) {
            PowerSource s;
            s.id = "vsc:" + link.id + (end == 0 ? ":from" : ":to");
            s.bus = end == 0 ? link.from : link.to;
            s.kind = SourceKind::compensator;
            s.carrier = "vsc";
            s.p_min = 0.0;
            s.p_max = 0.0;
            s.capability = CapabilityCurve::rectangle();
            s.q_min = -kVscReactiveShare * link.p_max;
            s.q_max = kVscReactiveShare * link.p_max;
            s.u_min = units;
            s.u_max = units;
            s.vsc_link = l;
            if (auto existing = out.find_source(s.id))
                out.sources[*existing] = s;
            else
                out.sources.push_back(s);
        }
    }
    return out;
}

}  // namespace accep
