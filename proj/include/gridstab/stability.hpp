#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridstab/control.hpp"

namespace gridstab {

inline constexpr double kDisturbance = 0.535;          // p.u., uniform voltage disturbance
inline constexpr double kContractionThreshold = 0.07;  // required steady-state error contraction

struct EigenReport {
    std::vector<std::complex<double>> eigenvalues;
    std::vector<std::complex<double>> dominant;  // every eigenvalue of maximal modulus
    double spectral_radius = 0.0;
    bool stable = false;  // rho < 1 strictly
};

/// Eigenvalues of the dynamics on the controlled (performance) subspace.
EigenReport eigen_report(const ClosedLoopSystem& sys);
EigenReport eigen_report(const Eigen::MatrixXd& m);
/// Throws NumericalFailure if the eigensolver does not converge.
double spectral_radius(const Eigen::MatrixXd& m);

enum class Family { pbc_1ph, droop_1ph, pbc_rx, droop_rx, pbc_phase, droop_phase };
Family parse_family(const std::string& s);
std::string to_string(Family f);
ControlKind family_kind(Family f);

struct FamilyParams {
    double x = 0.0;   // *_1ph
    double d = 0.0;   // *_rx
    double l1 = 0.0;  // *_rx
    double cx = 0.0;  // *_phase
    double l2 = 0.0;  // *_phase
};

struct CriticalGain {
    double a_crit = 0.0;
    std::string method;  // "analytic" | "bisection"
    double lo = 0.0, hi = 0.0, tol = 0.0;
    int iterations = 0;
};

/// Closed forms for the two-bus families. The PBC phase-ratio family throws
/// NoStabilizingGain for c_x >= 2.
CriticalGain analytic_acrit(Family f, const FamilyParams& p);

using RhoFn = std::function<double(double)>;

struct BisectOptions {
    double lo = 1e-6;
    double hi = 1e4;
    double tol = 1e-6;
    int max_iter = 60;
};

/// Largest stabilizing gain scale, located on rho(a) < 1. Throws
/// NoStabilizingGain when rho(lo) >= 1 and Unbounded when rho(hi) < 1.
CriticalGain bisect_acrit(const RhoFn& rho, const BisectOptions& opt = {});

/// rho as a function of the uniform gain a for a two-bus family (raw_b fixtures).
RhoFn family_rho(Family f, const FamilyParams& p);
/// rho(a) for a configuration with gains a * base.
RhoFn scaled_gain_rho(const SensitivityMatrices& s, const Configuration& cfg, ControlKind kind,
                      const ApnpGains& base);

struct SweepPoint {
    double a;
    double rho;
    bool stable;
};
std::vector<SweepPoint> gain_sweep(const RhoFn& rho, const std::vector<double>& a_values);

struct Goodness {
    bool good = false;
    bool stable = false;
    double rho = 0.0;
    // droop only: per-node contraction 1 - |dSS|/|dV| over performance phases
    double mean_contraction = 0.0;
    double worst_contraction = 0.0;
    std::string worst_node;
};

/// PBC: good iff rho < 1. Droop: additionally the mean contraction under a
/// uniform 0.535 p.u. disturbance must reach 7%.
Goodness is_good(const ClosedLoopSystem& sys, const SensitivityMatrices& s);
Goodness is_good(const ReducedModel& model, const ApnpGains& g, const SensitivityMatrices& s);

}  // namespace gridstab
