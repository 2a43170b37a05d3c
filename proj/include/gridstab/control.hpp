#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridstab/metrics.hpp"
#include "gridstab/sensitivity.hpp"

namespace gridstab {

enum class ControlKind { droop, pbc };
ControlKind parse_control_kind(const std::string& s);
std::string to_string(ControlKind k);

/// Actuator-performance node pair.
struct Apnp {
    std::string actuator;
    std::string performance;
    PhaseSet phases;
    bool colocated() const { return actuator == performance; }
};

struct Configuration {
    std::vector<Apnp> apnps;

    /// Co-located pairs on every phase of each listed node.
    static Configuration colocated(const std::vector<std::string>& nodes, const SensitivityMatrices& s);

    /// Throws UnknownNode, StructureError (duplicate actuator) or PhaseError.
    void validate(const SensitivityMatrices& s) const;
    bool uses_node(const std::string& id) const;
};

/// Diagonal gain entries of one APNP, indexed by phase. Entries on phases the
/// pair does not control must be zero.
struct ChannelGains {
    PhaseTriple f11{};
    PhaseTriple f12{};
    PhaseTriple f21{};
    PhaseTriple f22{};
};
using ApnpGains = std::vector<ChannelGains>;  // one per APNP, same order

/// PBC: F11 = a, F22 = 2a. Droop: F11 = F21 = a.
ApnpGains uniform_gains(const Configuration& cfg, ControlKind kind, double a);
ApnpGains scaled(ApnpGains g, double s);

/// Dense gain blocks, rows indexed by actuator slots and columns by
/// performance slots of the 3n state.
struct GainMatrix {
    Eigen::MatrixXd F11, F12, F21, F22;
};

GainMatrix to_gain_matrix(const SensitivityMatrices& s, const Configuration& cfg, const ApnpGains& g);
/// Inverse of to_gain_matrix; throws StructureError on any entry outside the
/// diagonal APNP pattern or on a coupling block the control kind forbids.
ApnpGains from_gain_matrix(const SensitivityMatrices& s, const Configuration& cfg, ControlKind kind,
                           const GainMatrix& gm);
void validate_gains(const Configuration& cfg, ControlKind kind, const ApnpGains& g);

/// x_{k+1} = (A - B F) x_k for droop (state e^v) or PBC (state [e^v; e^delta]).
struct ClosedLoopSystem {
    ControlKind kind;
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd F;
    Eigen::MatrixXd dynamics;
    Eigen::Array<bool, Eigen::Dynamic, 1> active_mask;
    /// State rows of performance-node phases; eigenvalues are taken here.
    std::vector<Eigen::Index> controlled;

    Eigen::Index state_dim() const { return A.rows(); }
    Eigen::MatrixXd controlled_dynamics() const;
};

ClosedLoopSystem build_droop(const SensitivityMatrices& s, const Configuration& cfg, const GainMatrix& gm);
ClosedLoopSystem build_pbc(const SensitivityMatrices& s, const Configuration& cfg, const GainMatrix& gm);
ClosedLoopSystem build_system(const SensitivityMatrices& s, const Configuration& cfg, ControlKind kind,
                              const ApnpGains& g);

/// (I + B F)^{-1} dv for a droop system. Throws SingularMatrix.
Eigen::VectorXd disturbance_response(const ClosedLoopSystem& sys, const Eigen::VectorXd& dv);

/// Dynamics restricted to the performance slots, assembled straight from the
/// sensitivity submatrices. Equal to ClosedLoopSystem::controlled_dynamics()
/// but cheap enough to evaluate for thousands of sampled gains.
class ReducedModel {
public:
    ReducedModel(const SensitivityMatrices& s, const Configuration& cfg, ControlKind kind);

    ControlKind kind() const { return kind_; }
    const Configuration& config() const { return cfg_; }
    std::size_t perf_count() const { return perf_.size(); }
    const std::vector<Eigen::Index>& perf_slots() const { return perf_; }

    Eigen::MatrixXd dynamics(const ApnpGains& g) const;
    /// Droop steady-state shift at the performance slots, (I + B F)^{-1} dv.
    Eigen::VectorXd disturbance_response(const ApnpGains& g, double dv) const;

private:
    ControlKind kind_;
    Configuration cfg_;
    std::vector<Eigen::Index> perf_;
    struct Entry {
        std::size_t apnp;
        std::size_t phase;
        Eigen::Index perf_pos;
    };
    std::vector<Entry> entries_;
    Eigen::MatrixXd x_pa_, r_pa_;
};

}  // namespace gridstab
