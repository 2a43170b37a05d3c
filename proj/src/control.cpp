#include "gridstab/control.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/LU>

#include "gridstab/error.hpp"

namespace gridstab {

ControlKind parse_control_kind(const std::string& s) {
    if (s == "droop") return ControlKind::droop;
    if (s == "pbc") return ControlKind::pbc;
    throw ParseError("control kind must be \"droop\" or \"pbc\", got \"" + s + "\"");
}

std::string to_string(ControlKind k) { return k == ControlKind::droop ? "droop" : "pbc"; }

Configuration Configuration::colocated(const std::vector<std::string>& nodes,
                                       const SensitivityMatrices& s) {
    Configuration cfg;
    for (const auto& id : nodes) cfg.apnps.push_back({id, id, s.phases[s.position(id)]});
    return cfg;
}

void Configuration::validate(const SensitivityMatrices& s) const {
    std::set<std::string> seen;
    for (const auto& ap : apnps) {
        const PhaseSet pa = s.phases[s.position(ap.actuator)];
        const PhaseSet pp = s.phases[s.position(ap.performance)];
        if (!seen.insert(ap.actuator).second)
            throw StructureError("actuator " + ap.actuator + " appears twice");
        if (ap.phases.empty()) throw PhaseError("APNP at " + ap.actuator + " has no phases");
        if (!ap.phases.subset_of(pa) || !ap.phases.subset_of(pp))
            throw PhaseError("APNP " + ap.actuator + "/" + ap.performance + " phases " +
                             ap.phases.to_string() + " not present at both nodes");
    }
}

bool Configuration::uses_node(const std::string& id) const {
    return std::any_of(apnps.begin(), apnps.end(),
                       [&](const Apnp& a) { return a.actuator == id || a.performance == id; });
}

ApnpGains uniform_gains(const Configuration& cfg, ControlKind kind, double a) {
    ApnpGains g(cfg.apnps.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        for (std::size_t p = 0; p < 3; ++p) {
            if (!cfg.apnps[k].phases.contains(p)) continue;
            g[k].f11[p] = a;
            if (kind == ControlKind::pbc)
                g[k].f22[p] = 2.0 * a;
            else
                g[k].f21[p] = a;
        }
    }
    return g;
}

ApnpGains scaled(ApnpGains g, double s) {
    for (auto& c : g)
        for (auto* t : {&c.f11, &c.f12, &c.f21, &c.f22})
            for (double& v : *t) v *= s;
    return g;
}

void validate_gains(const Configuration& cfg, ControlKind kind, const ApnpGains& g) {
    if (g.size() != cfg.apnps.size())
        throw StructureError("expected gains for " + std::to_string(cfg.apnps.size()) + " APNPs, got " +
                             std::to_string(g.size()));
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto& c = g[k];
        for (std::size_t p = 0; p < 3; ++p) {
            for (double v : {c.f11[p], c.f12[p], c.f21[p], c.f22[p]})
                if (!std::isfinite(v)) throw StructureError("non-finite gain");
            const bool on = cfg.apnps[k].phases.contains(p);
            if (!on && (c.f11[p] != 0.0 || c.f12[p] != 0.0 || c.f21[p] != 0.0 || c.f22[p] != 0.0))
                throw StructureError("gain on uncontrolled phase " + std::string(1, kPhaseLetters[p]) +
                                     " of " + cfg.apnps[k].actuator);
            if (kind == ControlKind::pbc && (c.f12[p] != 0.0 || c.f21[p] != 0.0))
                throw StructureError("PBC gains must have F12 = F21 = 0");
            if (kind == ControlKind::droop && (c.f12[p] != 0.0 || c.f22[p] != 0.0))
                throw StructureError("droop gains use F11 and F21 only");
        }
    }
}

GainMatrix to_gain_matrix(const SensitivityMatrices& s, const Configuration& cfg, const ApnpGains& g) {
    if (g.size() != cfg.apnps.size()) throw StructureError("gain count does not match configuration");
    const Eigen::Index n = s.dim();
    GainMatrix gm{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n),
                  Eigen::MatrixXd::Zero(n, n)};
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto& ap = cfg.apnps[k];
        for (Phase p : kAllPhases) {
            if (!ap.phases.contains(p)) continue;
            const auto i = std::size_t(p);
            const Eigen::Index r = s.index(ap.actuator, p), c = s.index(ap.performance, p);
            gm.F11(r, c) = g[k].f11[i];
            gm.F12(r, c) = g[k].f12[i];
            gm.F21(r, c) = g[k].f21[i];
            gm.F22(r, c) = g[k].f22[i];
        }
    }
    return gm;
}

ApnpGains from_gain_matrix(const SensitivityMatrices& s, const Configuration& cfg, ControlKind kind,
                           const GainMatrix& gm) {
    const Eigen::Index n = s.dim();
    for (const auto* m : {&gm.F11, &gm.F12, &gm.F21, &gm.F22})
        if (m->rows() != n || m->cols() != n) throw StructureError("gain block has wrong dimensions");
    cfg.validate(s);
    ApnpGains g(cfg.apnps.size());
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> allowed =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
    for (std::size_t k = 0; k < cfg.apnps.size(); ++k) {
        const auto& ap = cfg.apnps[k];
        for (Phase p : kAllPhases) {
            if (!ap.phases.contains(p)) continue;
            const auto i = std::size_t(p);
            const Eigen::Index r = s.index(ap.actuator, p), c = s.index(ap.performance, p);
            allowed(r, c) = true;
            g[k].f11[i] = gm.F11(r, c);
            g[k].f12[i] = gm.F12(r, c);
            g[k].f21[i] = gm.F21(r, c);
            g[k].f22[i] = gm.F22(r, c);
        }
    }
    for (const auto* m : {&gm.F11, &gm.F12, &gm.F21, &gm.F22})
        for (Eigen::Index c = 0; c < n; ++c)
            for (Eigen::Index r = 0; r < n; ++r)
                if ((*m)(r, c) != 0.0 && !allowed(r, c))
                    throw StructureError("gain entry (" + std::to_string(r) + ", " + std::to_string(c) +
                                         ") lies outside the APNP structure");
    validate_gains(cfg, kind, g);
    return g;
}

namespace {

std::vector<Eigen::Index> performance_slots(const SensitivityMatrices& s, const Configuration& cfg) {
    std::set<Eigen::Index> slots;
    for (const auto& ap : cfg.apnps)
        for (Phase p : kAllPhases)
            if (ap.phases.contains(p)) slots.insert(s.index(ap.performance, p));
    return {slots.begin(), slots.end()};
}

ClosedLoopSystem assemble(ControlKind kind, Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd F,
                          const SensitivityMatrices& s, const Configuration& cfg) {
    ClosedLoopSystem sys{kind, std::move(A), std::move(B), std::move(F), {}, {}, {}};
    sys.dynamics = sys.A - sys.B * sys.F;
    const Eigen::Index n = s.dim();
    const int channels = kind == ControlKind::pbc ? 2 : 1;
    sys.active_mask.resize(channels * n);
    for (int c = 0; c < channels; ++c) sys.active_mask.segment(c * n, n) = s.mask;
    const auto perf = performance_slots(s, cfg);
    for (int c = 0; c < channels; ++c)
        for (Eigen::Index i : perf) sys.controlled.push_back(c * n + i);
    if (sys.controlled.empty())
        for (Eigen::Index i = 0; i < sys.active_mask.size(); ++i)
            if (sys.active_mask[i]) sys.controlled.push_back(i);
    return sys;
}

}  // namespace

Eigen::MatrixXd ClosedLoopSystem::controlled_dynamics() const {
    return dynamics(controlled, controlled);
}

ClosedLoopSystem build_droop(const SensitivityMatrices& s, const Configuration& cfg, const GainMatrix& gm) {
    from_gain_matrix(s, cfg, ControlKind::droop, gm);
    const Eigen::Index n = s.dim();
    Eigen::MatrixXd B(n, 2 * n);
    B << s.X, s.R;
    Eigen::MatrixXd F(2 * n, n);
    F << gm.F11, gm.F21;
    return assemble(ControlKind::droop, Eigen::MatrixXd::Zero(n, n), std::move(B), std::move(F), s, cfg);
}

ClosedLoopSystem build_pbc(const SensitivityMatrices& s, const Configuration& cfg, const GainMatrix& gm) {
    from_gain_matrix(s, cfg, ControlKind::pbc, gm);
    const Eigen::Index n = s.dim();
    Eigen::MatrixXd B(2 * n, 2 * n);
    B << s.X, s.R, -0.5 * s.R, 0.5 * s.X;
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    F.topLeftCorner(n, n) = gm.F11;
    F.bottomRightCorner(n, n) = gm.F22;
    return assemble(ControlKind::pbc, Eigen::MatrixXd::Identity(2 * n, 2 * n), std::move(B), std::move(F), s,
                    cfg);
}

ClosedLoopSystem build_system(const SensitivityMatrices& s, const Configuration& cfg, ControlKind kind,
                              const ApnpGains& g) {
    const GainMatrix gm = to_gain_matrix(s, cfg, g);
    return kind == ControlKind::droop ? build_droop(s, cfg, gm) : build_pbc(s, cfg, gm);
}

namespace {

Eigen::VectorXd solve_checked(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    if (!(lu.rcond() > 1e-14)) throw SingularMatrix("I + BF is singular");
    return lu.solve(rhs);
}

}  // namespace

Eigen::VectorXd disturbance_response(const ClosedLoopSystem& sys, const Eigen::VectorXd& dv) {
    if (sys.kind != ControlKind::droop) throw StructureError("disturbance response is defined for droop");
    if (dv.size() != sys.state_dim()) throw StructureError("disturbance vector has wrong length");
    const Eigen::MatrixXd bf = sys.B * sys.F;
    return solve_checked(Eigen::MatrixXd::Identity(bf.rows(), bf.cols()) + bf, dv);
}

ReducedModel::ReducedModel(const SensitivityMatrices& s, const Configuration& cfg, ControlKind kind)
    : kind_(kind), cfg_(cfg) {
    cfg.validate(s);
    perf_ = performance_slots(s, cfg);
    std::vector<Eigen::Index> act;
    for (std::size_t k = 0; k < cfg.apnps.size(); ++k) {
        const auto& ap = cfg.apnps[k];
        for (Phase p : kAllPhases) {
            if (!ap.phases.contains(p)) continue;
            const Eigen::Index slot = s.index(ap.performance, p);
            const auto pos = std::lower_bound(perf_.begin(), perf_.end(), slot) - perf_.begin();
            entries_.push_back({k, std::size_t(p), Eigen::Index(pos)});
            act.push_back(s.index(ap.actuator, p));
        }
    }
    x_pa_ = s.X(perf_, act);
    r_pa_ = s.R(perf_, act);
}

Eigen::MatrixXd ReducedModel::dynamics(const ApnpGains& g) const {
    const Eigen::Index np = Eigen::Index(perf_.size());
    const Eigen::Index ne = Eigen::Index(entries_.size());
    Eigen::MatrixXd f11 = Eigen::MatrixXd::Zero(ne, np), f2 = Eigen::MatrixXd::Zero(ne, np);
    for (Eigen::Index e = 0; e < ne; ++e) {
        const auto& en = entries_[std::size_t(e)];
        const auto& c = g[en.apnp];
        f11(e, en.perf_pos) = c.f11[en.phase];
        f2(e, en.perf_pos) = kind_ == ControlKind::droop ? c.f21[en.phase] : c.f22[en.phase];
    }
    if (kind_ == ControlKind::droop) return -(x_pa_ * f11 + r_pa_ * f2);
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2 * np, 2 * np);
    m.topLeftCorner(np, np) -= x_pa_ * f11;
    m.topRightCorner(np, np) -= r_pa_ * f2;
    m.bottomLeftCorner(np, np) += 0.5 * r_pa_ * f11;
    m.bottomRightCorner(np, np) -= 0.5 * x_pa_ * f2;
    return m;
}

Eigen::VectorXd ReducedModel::disturbance_response(const ApnpGains& g, double dv) const {
    if (kind_ != ControlKind::droop) throw StructureError("disturbance response is defined for droop");
    const Eigen::MatrixXd bf = -dynamics(g);
    const Eigen::Index np = bf.rows();
    return solve_checked(Eigen::MatrixXd::Identity(np, np) + bf, Eigen::VectorXd::Constant(np, dv));
}

}  // namespace gridstab
