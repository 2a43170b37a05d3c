#include "gridstab/sensitivity.hpp"

#include "gridstab/error.hpp"

namespace gridstab {

std::size_t SensitivityMatrices::position(const std::string& node) const {
    const auto it = pos_.find(node);
    if (it == pos_.end()) throw UnknownNode("node " + node + " is not a state node");
    return it->second;
}

std::vector<Eigen::Index> SensitivityMatrices::active_indices() const {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < mask.size(); ++i)
        if (mask[i]) idx.push_back(i);
    return idx;
}

SensitivityMatrices build_sensitivity(const Feeder& f) {
    const std::size_t total = f.node_count();
    const std::size_t root = f.node_index(f.substation());

    // cumulative impedance from the substation down to every node
    std::vector<Matrix3c> cum(total, Matrix3c::Zero());
    for (std::size_t u : f.topological_order()) {
        if (const auto k = f.parent_line(u)) cum[u] = cum[f.parent_node(u)] + f.lines()[*k].impedance.z;
    }

    SensitivityMatrices s;
    std::vector<std::size_t> state;  // feeder node index per state position
    for (std::size_t i = 0; i < total; ++i) {
        if (i == root) continue;
        s.pos_.emplace(f.nodes()[i].id, state.size());
        s.nodes.push_back(f.nodes()[i].id);
        s.phases.push_back(f.nodes()[i].phases);
        state.push_back(i);
    }
    const Eigen::Index n = Eigen::Index(state.size());
    s.R = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    s.X = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    s.mask.setConstant(3 * n, false);

    auto lca = [&](std::size_t a, std::size_t b) {
        while (f.depth(a) > f.depth(b)) a = f.parent_node(a);
        while (f.depth(b) > f.depth(a)) b = f.parent_node(b);
        while (a != b) {
            a = f.parent_node(a);
            b = f.parent_node(b);
        }
        return a;
    };

    for (Eigen::Index i = 0; i < n; ++i) {
        const PhaseSet pi = s.phases[std::size_t(i)];
        for (std::size_t p = 0; p < 3; ++p) s.mask[3 * i + Eigen::Index(p)] = pi.contains(p);
        for (Eigen::Index j = i; j < n; ++j) {
            const PhaseSet pj = s.phases[std::size_t(j)];
            const Matrix3c& c = cum[lca(state[std::size_t(i)], state[std::size_t(j)])];
            for (std::size_t a = 0; a < 3; ++a) {
                if (!pi.contains(a)) continue;
                for (std::size_t b = 0; b < 3; ++b) {
                    if (!pj.contains(b)) continue;
                    const auto z = 2.0 * c(Eigen::Index(a), Eigen::Index(b));
                    const Eigen::Index r = 3 * i + Eigen::Index(a), col = 3 * j + Eigen::Index(b);
                    s.R(r, col) = s.R(col, r) = z.real();
                    s.X(r, col) = s.X(col, r) = z.imag();
                }
            }
        }
    }
    return s;
}

}  // namespace gridstab
