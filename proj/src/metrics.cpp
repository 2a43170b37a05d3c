#include "gridstab/metrics.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "gridstab/error.hpp"

namespace gridstab {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

PhaseTriple ratio_of(const Matrix3d& num_diag_src, const Matrix3d& den, PhaseSet ph, bool offdiag) {
    PhaseTriple out{kNaN, kNaN, kNaN};
    for (int i = 0; i < 3; ++i) {
        if (!ph.contains(std::size_t(i))) continue;
        double num = 0.0;
        if (offdiag) {
            for (int j = 0; j < 3; ++j)
                if (j != i) num += num_diag_src(i, j);
        } else {
            num = num_diag_src(i, i);
        }
        if (den(i, i) != 0.0) out[std::size_t(i)] = num / den(i, i);
    }
    return out;
}

void require_defined(const PhaseTriple& t, PhaseSet ph, auto&& raise) {
    for (std::size_t i = 0; i < 3; ++i)
        if (ph.contains(i) && std::isnan(t[i])) raise(i);
}

}  // namespace

PhaseTriple rx_ratio(const LineImpedance& z) {
    auto d = ratio_of(z.r(), z.x(), z.phases, false);
    require_defined(d, z.phases, [](std::size_t i) {
        throw DivisionByZeroReactance(std::string("zero reactance on phase ") + kPhaseLetters[i]);
    });
    return d;
}

PhaseTriple phase_ratio_x(const LineImpedance& z) {
    auto c = ratio_of(z.x(), z.x(), z.phases, true);
    require_defined(c, z.phases, [](std::size_t i) {
        throw DivisionByZero(std::string("zero self reactance on phase ") + kPhaseLetters[i]);
    });
    return c;
}

PhaseTriple phase_ratio_r(const LineImpedance& z) {
    auto c = ratio_of(z.r(), z.r(), z.phases, true);
    require_defined(c, z.phases, [](std::size_t i) {
        throw DivisionByZero(std::string("zero self resistance on phase ") + kPhaseLetters[i]);
    });
    return c;
}

double spectral_norm(const Matrix3c& z) {
    Eigen::JacobiSVD<Matrix3c> svd(z);
    return svd.singularValues()(0);
}

LineLength line_length(const LineImpedance& z) {
    LineLength len;
    for (std::size_t i = 0; i < 3; ++i)
        len.l1[i] = z.phases.contains(i) ? std::abs(z.z(Eigen::Index(i), Eigen::Index(i))) : kNaN;
    len.l2 = spectral_norm(z.z);
    return len;
}

LineMetrics line_metrics(const LineImpedance& z) {
    return {ratio_of(z.r(), z.x(), z.phases, false), ratio_of(z.x(), z.x(), z.phases, true),
            ratio_of(z.r(), z.r(), z.phases, true), line_length(z)};
}

LineImpedance make_rx_line(double d, double l1, PhaseSet phases) {
    if (!(d >= 0.0) || !(l1 > 0.0)) throw ParseError("make_rx_line needs d >= 0 and L1 > 0");
    const double x = l1 / std::sqrt(d * d + 1.0);
    Matrix3c z = Matrix3c::Zero();
    for (std::size_t i = 0; i < 3; ++i)
        if (phases.contains(i)) z(Eigen::Index(i), Eigen::Index(i)) = {d * x, x};
    return {z, phases};
}

LineImpedance make_phase_ratio_line(double cx, double l2) {
    if (!(cx >= 0.0) || !(l2 > 0.0)) throw ParseError("make_phase_ratio_line needs c >= 0 and L2 > 0");
    const double x = l2 / (1.0 + cx);
    const double xm = cx * x / 2.0;
    Matrix3c z;
    z.setConstant({0.0, xm});
    z.diagonal().setConstant({0.0, x});
    return {z, PhaseSet::all()};
}

RatioKind parse_ratio_kind(const std::string& s) {
    if (s == "rx") return RatioKind::rx;
    if (s == "phase") return RatioKind::phase;
    throw ParseError("ratio kind must be \"rx\" or \"phase\", got \"" + s + "\"");
}

std::string to_string(RatioKind k) { return k == RatioKind::rx ? "rx" : "phase"; }

ScaledFeeder scale_feeder_ratios(const Feeder& f, RatioKind which, double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw ParseError("scale factor must be positive");
    std::vector<LineImpedance> out;
    std::vector<std::string> warnings;
    out.reserve(f.lines().size());
    for (const auto& ln : f.lines()) {
        const auto& orig = ln.impedance;
        Matrix3c z = orig.z;
        if (which == RatioKind::rx) {
            bool skip = false;
            for (std::size_t i = 0; i < 3; ++i)
                if (orig.phases.contains(i) && orig.z(Eigen::Index(i), Eigen::Index(i)).imag() == 0.0)
                    skip = true;
            if (skip) {
                warnings.push_back("line " + ln.id + ": zero reactance, R/X scaling skipped");
                out.push_back(orig);
                continue;
            }
            for (Eigen::Index i = 0; i < 9; ++i) z(i) = {z(i).real() * factor, z(i).imag()};
        } else {
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    if (i != j) z(i, j) *= factor;
        }
        const double s_new = spectral_norm(z);
        if (s_new == 0.0) throw DegenerateBlock("line " + ln.id + " has a zero block after scaling");
        z *= spectral_norm(orig.z) / s_new;
        out.emplace_back(z, orig.phases);
    }
    return {f.with_impedances(out), std::move(warnings)};
}

LineMetrics path_metrics(const Feeder& f, const std::string& node_id) {
    const PhaseSet ph = f.node(node_id).phases;
    Matrix3c z = path_impedance(f, node_id);
    for (std::size_t i = 0; i < 3; ++i) {
        if (ph.contains(i)) continue;
        z.row(Eigen::Index(i)).setZero();
        z.col(Eigen::Index(i)).setZero();
    }
    return line_metrics(LineImpedance(z, ph));
}

}  // namespace gridstab
