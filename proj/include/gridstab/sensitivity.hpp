#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "gridstab/feeder.hpp"

namespace gridstab {

/// Linearized flow sensitivities v = R p + X q + v0 over the non-substation
/// nodes, three slots per node (phase A, B, C). Slots of absent phases are
/// kept as zero rows/columns and flagged in `mask`.
struct SensitivityMatrices {
    Eigen::MatrixXd R;
    Eigen::MatrixXd X;
    std::vector<std::string> nodes;  // state order
    std::vector<PhaseSet> phases;    // per state node
    Eigen::Array<bool, Eigen::Dynamic, 1> mask;

    std::size_t node_count() const { return nodes.size(); }
    Eigen::Index dim() const { return R.rows(); }
    /// Position of a node in the state order; throws UnknownNode (also for the substation).
    std::size_t position(const std::string& node) const;
    Eigen::Index index(const std::string& node, Phase p) const {
        return Eigen::Index(3 * position(node) + static_cast<std::size_t>(p));
    }
    /// Row indices of present phases, ascending.
    std::vector<Eigen::Index> active_indices() const;

    std::unordered_map<std::string, std::size_t> pos_;
};

SensitivityMatrices build_sensitivity(const Feeder& f);

}  // namespace gridstab
