#pragma once

#include <filesystem>
#include <string>

#include "accep/netmodel.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(ACCEP_DATA_DIR) / name; }

inline accep::AcBranch line(const std::string& id, std::size_t from, std::size_t to, double r, double x,
                            double b_sh = 0.0, double f_max = 1.0) {
    accep::AcBranch b;
    b.id = id;
    b.from = from;
    b.to = to;
    b.r = r;
    b.x = x;
    b.b_sh = b_sh;
    b.f_max = f_max;
    b.a = 0.7;
    return b;
}

inline accep::PowerSource generator(const std::string& id, std::size_t bus, double u_max, double capital,
                                    double marginal) {
    accep::PowerSource s;
    s.id = id;
    s.bus = bus;
    s.kind = accep::SourceKind::sg;
    s.carrier = "gas";
    s.capability = accep::CapabilityCurve::d_curve();
    s.q_min = s.capability.q_min;
    s.q_max = s.capability.q_max;
    s.u_max = u_max;
    s.capital_cost = capital;
    s.marginal_cost = marginal;
    return s;
}

inline accep::NetworkCase buses(std::size_t n) {
    accep::NetworkCase net;
    net.name = "test";
    for (std::size_t i = 0; i < n; ++i) net.buses.push_back({"b" + std::to_string(i + 1), ""});
    return net;
}

inline accep::NetworkCase two_bus(double r = 0.01, double x = 0.1, double b_sh = 0.0) {
    auto net = buses(2);
    net.ac_branches.push_back(line("l12", 0, 1, r, x, b_sh));
    return net;
}

inline accep::NetworkCase triangle(double x = 0.1) {
    auto net = buses(3);
    net.ac_branches.push_back(line("l12", 0, 1, 0.0, x));
    net.ac_branches.push_back(line("l13", 0, 2, 0.0, x));
    net.ac_branches.push_back(line("l23", 1, 2, 0.0, x));
    return net;
}

}  // namespace testing
