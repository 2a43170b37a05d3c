#include "gridstab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include <Eigen/Eigenvalues>

#include "gridstab/error.hpp"
#include "gridstab/twobus.hpp"

namespace gridstab {

EigenReport eigen_report(const Eigen::MatrixXd& m) {
    EigenReport rep;
    if (m.size() == 0) {
        rep.stable = true;
        return rep;
    }
    if (!m.allFinite()) throw NumericalFailure("dynamics matrix has non-finite entries");
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    if (es.info() != Eigen::Success) throw NumericalFailure("eigensolver did not converge");
    const auto& ev = es.eigenvalues();
    rep.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    for (const auto& l : rep.eigenvalues) rep.spectral_radius = std::max(rep.spectral_radius, std::abs(l));
    const double tie = 1e-12 * std::max(1.0, rep.spectral_radius);
    for (const auto& l : rep.eigenvalues)
        if (std::abs(l) >= rep.spectral_radius - tie) rep.dominant.push_back(l);
    rep.stable = rep.spectral_radius < 1.0;
    return rep;
}

EigenReport eigen_report(const ClosedLoopSystem& sys) { return eigen_report(sys.controlled_dynamics()); }

double spectral_radius(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1) {
        if (!std::isfinite(m(0, 0))) throw NumericalFailure("dynamics matrix has non-finite entries");
        return std::abs(m(0, 0));
    }
    return eigen_report(m).spectral_radius;
}

Family parse_family(const std::string& s) {
    static const std::map<std::string, Family> names{
        {"pbc_1ph", Family::pbc_1ph},     {"droop_1ph", Family::droop_1ph},
        {"pbc_rx", Family::pbc_rx},       {"droop_rx", Family::droop_rx},
        {"pbc_phase", Family::pbc_phase}, {"droop_phase", Family::droop_phase}};
    const auto it = names.find(s);
    if (it == names.end()) throw ParseError("unknown family \"" + s + "\"");
    return it->second;
}

std::string to_string(Family f) {
    switch (f) {
        case Family::pbc_1ph: return "pbc_1ph";
        case Family::droop_1ph: return "droop_1ph";
        case Family::pbc_rx: return "pbc_rx";
        case Family::droop_rx: return "droop_rx";
        case Family::pbc_phase: return "pbc_phase";
        case Family::droop_phase: return "droop_phase";
    }
    return {};
}

ControlKind family_kind(Family f) {
    switch (f) {
        case Family::pbc_1ph:
        case Family::pbc_rx:
        case Family::pbc_phase: return ControlKind::pbc;
        default: return ControlKind::droop;
    }
}

namespace {

void check_params(Family f, const FamilyParams& p) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ParseError(std::string(name) + " must be positive");
    };
    switch (f) {
        case Family::pbc_1ph:
        case Family::droop_1ph: positive(p.x, "X"); break;
        case Family::pbc_rx:
        case Family::droop_rx:
            positive(p.l1, "L1");
            if (!(p.d >= 0.0) || !std::isfinite(p.d)) throw ParseError("d must be non-negative");
            break;
        case Family::pbc_phase:
        case Family::droop_phase:
            positive(p.l2, "L2");
            if (!(p.cx >= 0.0) || !std::isfinite(p.cx)) throw ParseError("c_x must be non-negative");
            break;
    }
}

}  // namespace

CriticalGain analytic_acrit(Family f, const FamilyParams& p) {
    check_params(f, p);
    CriticalGain cg;
    cg.method = "analytic";
    const double root = std::sqrt(p.d * p.d + 1.0);
    switch (f) {
        case Family::pbc_1ph: cg.a_crit = 2.0 / p.x; break;
        case Family::droop_1ph: cg.a_crit = 1.0 / p.x; break;
        case Family::pbc_rx: cg.a_crit = 2.0 / (p.l1 * root); break;
        case Family::droop_rx: cg.a_crit = root / (p.l1 * (p.d + 1.0)); break;
        case Family::pbc_phase:
            if (p.cx >= 2.0)
                throw NoStabilizingGain("phase ratio " + std::to_string(p.cx) +
                                        " >= 2: mutual coupling exceeds self reactance");
            cg.a_crit = 2.0 / p.l2;
            break;
        case Family::droop_phase: cg.a_crit = 1.0 / p.l2; break;
    }
    cg.lo = cg.hi = cg.a_crit;
    return cg;
}

CriticalGain bisect_acrit(const RhoFn& rho, const BisectOptions& opt) {
    if (!(opt.lo > 0.0) || !(opt.hi > opt.lo) || !(opt.tol > 0.0))
        throw ParseError("bisection needs 0 < lo < hi and tol > 0");
    double lo = opt.lo, hi = opt.hi;
    if (!(rho(lo) < 1.0))
        throw NoStabilizingGain("no stabilizing gain: rho >= 1 already at a = " + std::to_string(lo));
    if (rho(hi) < 1.0) throw Unbounded("stable for every gain up to a = " + std::to_string(hi));
    int it = 0;
    while (hi - lo > opt.tol && it < opt.max_iter) {
        const double mid = 0.5 * (lo + hi);
        (rho(mid) < 1.0 ? lo : hi) = mid;
        ++it;
    }
    return {0.5 * (lo + hi), "bisection", lo, hi, opt.tol, it};
}

RhoFn scaled_gain_rho(const SensitivityMatrices& s, const Configuration& cfg, ControlKind kind,
                      const ApnpGains& base) {
    auto model = std::make_shared<ReducedModel>(s, cfg, kind);
    validate_gains(cfg, kind, base);
    return [model, base](double a) { return spectral_radius(model->dynamics(scaled(base, a))); };
}

RhoFn family_rho(Family f, const FamilyParams& p) {
    check_params(f, p);
    Feeder fd = [&] {
        switch (f) {
            case Family::pbc_1ph:
            case Family::droop_1ph: return two_bus_raw_b(0.0, p.x);
            case Family::pbc_rx:
            case Family::droop_rx: return two_bus_rx(p.d, p.l1);
            default: return two_bus_phase_ratio(p.cx, p.l2);
        }
    }();
    const auto s = build_sensitivity(fd);
    const auto cfg = Configuration::colocated({"load"}, s);
    const auto kind = family_kind(f);
    return scaled_gain_rho(s, cfg, kind, uniform_gains(cfg, kind, 1.0));
}

std::vector<SweepPoint> gain_sweep(const RhoFn& rho, const std::vector<double>& a_values) {
    std::vector<SweepPoint> out;
    out.reserve(a_values.size());
    for (double a : a_values) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw ParseError("sweep gains must be finite and non-negative");
        const double r = rho(a);
        out.push_back({a, r, r < 1.0});
    }
    return out;
}

namespace {

void fill_contraction(Goodness& g, const Eigen::VectorXd& dss, const std::vector<Eigen::Index>& slots,
                      const SensitivityMatrices& s) {
    std::map<std::size_t, std::pair<double, int>> per_node;
    double total = 0.0;
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const double c = 1.0 - std::abs(dss[Eigen::Index(k)]) / kDisturbance;
        total += c;
        auto& acc = per_node[std::size_t(slots[k] / 3)];
        acc.first += c;
        acc.second += 1;
    }
    g.mean_contraction = slots.empty() ? 0.0 : total / double(slots.size());
    g.worst_contraction = 1.0;
    for (const auto& [node, acc] : per_node) {
        const double c = acc.first / acc.second;
        if (c < g.worst_contraction) {
            g.worst_contraction = c;
            g.worst_node = s.nodes[node];
        }
    }
    if (per_node.empty()) g.worst_contraction = 0.0;
}

}  // namespace

Goodness is_good(const ClosedLoopSystem& sys, const SensitivityMatrices& s) {
    Goodness g;
    g.rho = eigen_report(sys).spectral_radius;
    g.stable = g.rho < 1.0;
    if (sys.kind == ControlKind::pbc) {
        g.good = g.stable;
        return g;
    }
    if (!g.stable) return g;
    Eigen::VectorXd dv = s.mask.cast<double>().matrix() * kDisturbance;
    const Eigen::VectorXd full = disturbance_response(sys, dv);
    fill_contraction(g, full(sys.controlled), sys.controlled, s);
    g.good = g.mean_contraction >= kContractionThreshold;
    return g;
}

Goodness is_good(const ReducedModel& model, const ApnpGains& gains, const SensitivityMatrices& s) {
    Goodness g;
    g.rho = spectral_radius(model.dynamics(gains));
    g.stable = g.rho < 1.0;
    if (model.kind() == ControlKind::pbc) {
        g.good = g.stable;
        return g;
    }
    if (!g.stable) return g;
    fill_contraction(g, model.disturbance_response(gains, kDisturbance), model.perf_slots(), s);
    g.good = g.mean_contraction >= kContractionThreshold;
    return g;
}

}  // namespace gridstab
