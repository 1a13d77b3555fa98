#include "accep/graph.hpp"

#include <algorithm>
#include <queue>

namespace accep {

IncidenceMatrix build_incidence(const NetworkCase& network) {
    const auto n = static_cast<Eigen::Index>(network.buses.size());
    const auto m = static_cast<Eigen::Index>(network.ac_branches.size());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(2 * network.ac_branches.size());
    for (Eigen::Index l = 0; l < m; ++l) {
        const auto& br = network.ac_branches[static_cast<std::size_t>(l)];
        entries.emplace_back(static_cast<Eigen::Index>(br.from), l, 1.0);
        entries.emplace_back(static_cast<Eigen::Index>(br.to), l, -1.0);
    }
    IncidenceMatrix k(n, m);
    k.setFromTriplets(entries.begin(), entries.end());
    return k;
}

SpanningForest build_spanning_forest(const NetworkCase& network) {
    const std::size_t n = network.buses.size();
    std::vector<std::vector<std::size_t>> incident(n);
    for (std::size_t l = 0; l < network.ac_branches.size(); ++l) {
        incident[network.ac_branches[l].from].push_back(l);
        incident[network.ac_branches[l].to].push_back(l);
    }
    SpanningForest forest;
    forest.parent_branch.assign(n, -2);
    for (std::size_t root = 0; root < n; ++root) {
        if (forest.parent_branch[root] != -2) continue;
        forest.parent_branch[root] = -1;
        std::queue<std::size_t> queue;
        queue.push(root);
        while (!queue.empty()) {
            const auto v = queue.front();
            queue.pop();
            forest.order.push_back(v);
            for (auto l : incident[v]) {  // ascending branch index
                const auto& br = network.ac_branches[l];
                const auto w = br.from == v ? br.to : br.from;
                if (forest.parent_branch[w] != -2) continue;
                forest.parent_branch[w] = static_cast<long>(l);
                queue.push(w);
            }
        }
    }
    return forest;
}

CycleBasis build_cycle_basis(const NetworkCase& network) {
    const std::size_t n = network.buses.size();
    const auto forest = build_spanning_forest(network);

    std::vector<bool> tree(network.ac_branches.size(), false);
    std::vector<std::size_t> depth(n, 0);
    for (auto v : forest.order) {
        const long pb = forest.parent_branch[v];
        if (pb < 0) continue;
        tree[static_cast<std::size_t>(pb)] = true;
        const auto& br = network.ac_branches[static_cast<std::size_t>(pb)];
        const auto parent = br.from == v ? br.to : br.from;
        depth[v] = depth[parent] + 1;
    }
    auto parent_of = [&](std::size_t v) {
        const auto& br = network.ac_branches[static_cast<std::size_t>(forest.parent_branch[v])];
        return br.from == v ? br.to : br.from;
    };

    std::size_t components = 0;
    for (auto pb : forest.parent_branch) components += pb == -1 ? 1 : 0;

    std::vector<Eigen::Triplet<double>> entries;
    Eigen::Index cycle = 0;
    for (std::size_t l = 0; l < network.ac_branches.size(); ++l) {
        if (tree[l]) continue;
        const auto& chord = network.ac_branches[l];
        // Traverse chord from -> to, then return through the tree to `from`.
        entries.emplace_back(static_cast<Eigen::Index>(l), cycle, 1.0);
        std::vector<std::pair<std::size_t, double>> up_from, up_to;
        auto a = chord.to, b = chord.from;
        // Path from `to` up to the common ancestor (walking toward `from`).
        while (a != b) {
            if (depth[a] >= depth[b]) {
                const auto pb = static_cast<std::size_t>(forest.parent_branch[a]);
                const auto& br = network.ac_branches[pb];
                // moving a -> parent(a): sign +1 if branch oriented a -> parent
                up_to.emplace_back(pb, br.from == a ? 1.0 : -1.0);
                a = parent_of(a);
            } else {
                const auto pb = static_cast<std::size_t>(forest.parent_branch[b]);
                const auto& br = network.ac_branches[pb];
                // this segment is traversed parent(b) -> b
                up_from.emplace_back(pb, br.from == b ? -1.0 : 1.0);
                b = parent_of(b);
            }
        }
        for (auto [br, s] : up_to) entries.emplace_back(static_cast<Eigen::Index>(br), cycle, s);
        for (auto [br, s] : up_from) entries.emplace_back(static_cast<Eigen::Index>(br), cycle, s);
        ++cycle;
    }
    CycleBasis basis;
    basis.components = components;
    basis.matrix.resize(static_cast<Eigen::Index>(network.ac_branches.size()), cycle);
    basis.matrix.setFromTriplets(entries.begin(), entries.end());
    return basis;
}

Eigen::VectorXd angles_from_flows(const NetworkCase& network, const Eigen::VectorXd& flows,
                                  const Eigen::VectorXd& reactance) {
    const auto forest = build_spanning_forest(network);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(network.buses.size()));
    for (auto v : forest.order) {
        const long pb = forest.parent_branch[v];
        if (pb < 0) continue;
        const auto l = static_cast<Eigen::Index>(pb);
        const auto& br = network.ac_branches[static_cast<std::size_t>(pb)];
        const double drop = flows[l] * reactance[l];
        if (br.to == v)
            theta[static_cast<Eigen::Index>(v)] = theta[static_cast<Eigen::Index>(br.from)] - drop;
        else
            theta[static_cast<Eigen::Index>(v)] = theta[static_cast<Eigen::Index>(br.to)] + drop;
    }
    return theta;
}

}  // namespace accep
