#pragma once

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "gridstab/control.hpp"

namespace gridstab {

enum class SolverKind { linear, exact_two_bus };
SolverKind parse_solver_kind(const std::string& s);
std::string to_string(SolverKind k);

/// Constant per-phase consumption in p.u.
struct PhaseLoad {
    PhaseTriple p{};
    PhaseTriple q{};
};

struct SimScenario {
    Feeder feeder;
    Configuration cfg;
    ControlKind kind = ControlKind::pbc;
    ApnpGains gains;
    std::map<std::string, PhaseLoad> loads;  // nodes not listed carry no load
    double v_slack = 1.0;
    double v_ref = 1.0;          // PBC magnitude reference, p.u.
    double angle_ref_deg = 0.0;  // PBC angle reference relative to the nominal phase angle
    int horizon = 100;
    SolverKind solver = SolverKind::linear;
    double step_period_s = 1.0;
    double divergence_threshold = 0.5;  // p.u. deviation of |V| from 1
    // Relative extra load on phase A of every loaded node (exact solver symmetry breaking).
    double perturbation = 0.0;
};

/// One row per step; vectors span the 3n state slots (absent phases zero).
struct Trajectory {
    std::vector<std::string> nodes;
    std::vector<PhaseSet> phases;
    std::vector<Eigen::VectorXd> vmag, angle;  // angle in radians relative to nominal
    std::vector<Eigen::VectorXd> p_inv, q_inv;
    std::vector<double> error_norm;  // norm of the controlled tracking error at each step
    std::vector<double> step_norm;   // norm of the controlled state change from the previous step
    std::optional<int> divergence_step;
    std::optional<int> onset_step;  // first k with step_norm[k] > step_norm[1]
    std::string divergence_reason;
    double step_period_s = 1.0;

    int steps() const { return int(vmag.size()); }
    bool diverged() const { return divergence_step.has_value(); }
    /// No divergence, and the state change either settled below 1e-9 or kept
    /// shrinking over the last 20% of the horizon.
    bool converged() const;
};

// Setpoint update. `e` holds the measured error on the 3n slots (PBC: 6n,
// magnitude channel first). Droop returns absolute setpoints; PBC adds the
// increment to the previous setpoints.
void step_control(ControlKind kind, const SensitivityMatrices& s, const Configuration& cfg, const ApnpGains& g,
                  const Eigen::VectorXd& e, Eigen::VectorXd& p_inv, Eigen::VectorXd& q_inv);

struct FlowResult {
    Eigen::VectorXd v;      // squared magnitudes
    Eigen::VectorXd angle;  // radians relative to nominal
};
/// v = R p + X q + v0 and angle = X p / 2 - R q / 2, with p, q net injections.
FlowResult solve_linear_flow(const SensitivityMatrices& s, const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                             double v0 = 1.0);

/// Exact branch solution for a single line with receiving-end consumption
/// s_load per phase. Returns the receiving-end phasors (nominal angles
/// included). Single-phase lines use the closed-form quadratic; coupled lines
/// a fixed-point iteration. Throws NoRealSolution on voltage collapse.
std::array<std::complex<double>, 3> solve_exact_two_bus(const LineImpedance& z,
                                                       const std::array<std::complex<double>, 3>& s_load,
                                                       double v_slack = 1.0);

Trajectory run(const SimScenario& scn);

SimScenario scenario_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
nlohmann::json trajectory_summary(const Trajectory& t);
std::string trajectory_csv(const Trajectory& t);

}  // namespace gridstab
