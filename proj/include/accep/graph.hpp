#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/SparseCore>

#include "accep/netmodel.hpp"

namespace accep {

/// Bus x AC-branch incidence: +1 at the from bus, -1 at the to bus.
using IncidenceMatrix = Eigen::SparseMatrix<double>;

struct CycleBasis {
    /// Branch x cycle matrix with entries in {-1, 0, +1}.
    Eigen::SparseMatrix<double> matrix;
    std::size_t components = 0;

    std::size_t size() const { return static_cast<std::size_t>(matrix.cols()); }
};

IncidenceMatrix build_incidence(const NetworkCase& network);

/// Fundamental cycles of a BFS spanning forest (roots at the lowest bus index,
/// ties broken by branch index). Each chord closes exactly one cycle, oriented
/// along the chord.
CycleBasis build_cycle_basis(const NetworkCase& network);

/// Spanning forest used by the cycle basis: for each bus, the branch to its
/// parent (or -1 for roots) and the BFS order.
struct SpanningForest {
    std::vector<long> parent_branch;
    std::vector<std::size_t> order;
};

SpanningForest build_spanning_forest(const NetworkCase& network);

/// Bus angles consistent with given DC branch flows along the spanning forest:
/// theta_from - theta_to = flow * x. Roots are at angle zero.
Eigen::VectorXd angles_from_flows(const NetworkCase& network, const Eigen::VectorXd& flows,
                                  const Eigen::VectorXd& reactance);

}  // namespace accep
