#pragma once

#include <array>
#include <string>
#include <vector>

#include "gridstab/feeder.hpp"

namespace gridstab {

using PhaseTriple = std::array<double, 3>;  // NaN where undefined or absent

/// d_i = R_ii / X_ii per present phase. Throws DivisionByZeroReactance.
PhaseTriple rx_ratio(const LineImpedance& z);

/// c_{x,i} = sum_{j != i} X_ij / X_ii. Throws DivisionByZero.
PhaseTriple phase_ratio_x(const LineImpedance& z);
/// c_{r,i} = sum_{j != i} R_ij / R_ii. Throws DivisionByZero.
PhaseTriple phase_ratio_r(const LineImpedance& z);

struct LineLength {
    PhaseTriple l1{};  // |Z_ii|, NaN on absent phases
    double l2 = 0.0;   // largest singular value of the complex block
};
LineLength line_length(const LineImpedance& z);
double spectral_norm(const Matrix3c& z);

/// All metrics at once; ratios whose denominator is zero come back as NaN.
struct LineMetrics {
    PhaseTriple d{};
    PhaseTriple cx{};
    PhaseTriple cr{};
    LineLength length;
};
LineMetrics line_metrics(const LineImpedance& z);

LineImpedance make_rx_line(double d, double l1, PhaseSet phases = PhaseSet::all());
LineImpedance make_phase_ratio_line(double cx, double l2);

enum class RatioKind { rx, phase };
RatioKind parse_ratio_kind(const std::string& s);
std::string to_string(RatioKind k);

struct ScaledFeeder {
    Feeder feeder;
    std::vector<std::string> warnings;
};
/// Multiplies every line's R/X ratio (rx) or off-diagonal terms (phase) by
/// `factor`, then restores each line's L2. Lines without reactance on a present
/// phase are left alone under rx and reported in `warnings`.
ScaledFeeder scale_feeder_ratios(const Feeder& f, RatioKind which, double factor);

/// Metrics of the summed impedance along the node's path to the substation.
LineMetrics path_metrics(const Feeder& f, const std::string& node_id);

}  // namespace gridstab
