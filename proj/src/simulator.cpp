#include "gridstab/simulator.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "gridstab/error.hpp"
#include "gridstab/json_io.hpp"

namespace gridstab {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
const std::array<double, 3> kNominal{0.0, -120.0 * kDeg, 120.0 * kDeg};

double wrap(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

}  // namespace

SolverKind parse_solver_kind(const std::string& s) {
    if (s == "linear") return SolverKind::linear;
    if (s == "exact_two_bus") return SolverKind::exact_two_bus;
    throw ParseError("solver must be \"linear\" or \"exact_two_bus\", got \"" + s + "\"");
}

std::string to_string(SolverKind k) { return k == SolverKind::linear ? "linear" : "exact_two_bus"; }

bool Trajectory::converged() const {
    if (diverged() || step_norm.size() < 3) return false;
    if (step_norm.back() < 1e-9) return true;
    const std::size_t start = std::max<std::size_t>(1, step_norm.size() - std::max<std::size_t>(1, step_norm.size() / 5));
    return step_norm.back() <= step_norm[start];
}

void step_control(ControlKind kind, const SensitivityMatrices& s, const Configuration& cfg, const ApnpGains& g,
                  const Eigen::VectorXd& e, Eigen::VectorXd& p_inv, Eigen::VectorXd& q_inv) {
    const Eigen::Index n = s.dim();
    if (kind == ControlKind::droop) {
        p_inv.setZero();
        q_inv.setZero();
    }
    for (std::size_t k = 0; k < cfg.apnps.size(); ++k) {
        const auto& ap = cfg.apnps[k];
        for (Phase ph : kAllPhases) {
            if (!ap.phases.contains(ph)) continue;
            const auto i = std::size_t(ph);
            const Eigen::Index a = s.index(ap.actuator, ph), p = s.index(ap.performance, ph);
            if (kind == ControlKind::droop) {
                q_inv[a] += -g[k].f11[i] * e[p];
                p_inv[a] += -g[k].f21[i] * e[p];
            } else {
                q_inv[a] -= g[k].f11[i] * e[p] + g[k].f12[i] * e[n + p];
                p_inv[a] -= g[k].f21[i] * e[p] + g[k].f22[i] * e[n + p];
            }
        }
    }
}

FlowResult solve_linear_flow(const SensitivityMatrices& s, const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                             double v0) {
    FlowResult r;
    r.v = s.R * p + s.X * q;
    r.v.array() += v0;
    r.angle = 0.5 * (s.X * p - s.R * q);
    for (Eigen::Index i = 0; i < s.dim(); ++i)
        if (!s.mask[i]) r.v[i] = r.angle[i] = 0.0;
    return r;
}

std::array<std::complex<double>, 3> solve_exact_two_bus(const LineImpedance& z,
                                                       const std::array<std::complex<double>, 3>& s_load,
                                                       double v_slack) {
    if (!(v_slack > 0.0)) throw ParseError("slack voltage must be positive");
    std::array<std::complex<double>, 3> out{};
    if (z.phases.size() == 1) {
        const std::size_t i = z.phases.contains(Phase::A) ? 0 : z.phases.contains(Phase::B) ? 1 : 2;
        const auto zi = z.z(Eigen::Index(i), Eigen::Index(i));
        const double r = zi.real(), x = zi.imag(), P = s_load[i].real(), Q = s_load[i].imag();
        const double b = v_slack * v_slack - 2.0 * (r * P + x * Q);
        const double disc = b * b - 4.0 * std::norm(zi) * (P * P + Q * Q);
        if (disc < 0.0 || b <= 0.0 || !std::isfinite(disc))
            throw NoRealSolution("no real receiving-end voltage (voltage collapse)");
        const double w = 0.5 * (b + std::sqrt(disc));
        const double delta = std::atan2(x * P - r * Q, w + r * P + x * Q);
        out[i] = std::polar(std::sqrt(w), kNominal[i] - delta);
        return out;
    }
    std::array<std::complex<double>, 3> vs{}, v{};
    for (std::size_t i = 0; i < 3; ++i)
        if (z.phases.contains(i)) v[i] = vs[i] = std::polar(v_slack, kNominal[i]);
    for (int it = 0; it < 500; ++it) {
        Eigen::Vector3cd cur = Eigen::Vector3cd::Zero();
        for (std::size_t i = 0; i < 3; ++i)
            if (z.phases.contains(i)) cur[Eigen::Index(i)] = std::conj(s_load[i] / v[i]);
        const Eigen::Vector3cd drop = z.z * cur;
        double change = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            if (!z.phases.contains(i)) continue;
            const auto nv = vs[i] - drop[Eigen::Index(i)];
            if (!std::isfinite(nv.real()) || !std::isfinite(nv.imag()) || std::abs(nv) < 1e-6)
                throw NoRealSolution("branch iteration collapsed");
            change = std::max(change, std::abs(nv - v[i]));
            v[i] = nv;
        }
        if (change < 1e-14) return v;
    }
    throw NoRealSolution("branch iteration did not converge");
}

namespace {

struct Measurement {
    Eigen::VectorXd vmag, angle, v;
};

}  // namespace

Trajectory run(const SimScenario& scn) {
    if (scn.horizon < 1) throw ParseError("horizon must be at least 1");
    if (!(scn.divergence_threshold > 0.0)) throw ParseError("divergence threshold must be positive");
    const auto s = build_sensitivity(scn.feeder);
    scn.cfg.validate(s);
    validate_gains(scn.cfg, scn.kind, scn.gains);
    if (scn.solver == SolverKind::exact_two_bus && scn.feeder.node_count() != 2)
        throw StructureError("the exact two-bus solver needs a two-node feeder");

    const Eigen::Index n = s.dim();
    Eigen::VectorXd p_load = Eigen::VectorXd::Zero(n), q_load = Eigen::VectorXd::Zero(n);
    for (const auto& [id, ld] : scn.loads) {
        for (Phase ph : kAllPhases) {
            const auto i = std::size_t(ph);
            if (!s.phases[s.position(id)].contains(ph)) {
                if (ld.p[i] != 0.0 || ld.q[i] != 0.0) throw PhaseError("load on absent phase at " + id);
                continue;
            }
            const double bump = ph == Phase::A ? 1.0 + scn.perturbation : 1.0;
            p_load[s.index(id, ph)] = ld.p[i] * bump;
            q_load[s.index(id, ph)] = ld.q[i] * bump;
        }
    }

    const bool pbc = scn.kind == ControlKind::pbc;
    std::vector<Eigen::Index> ctrl;
    {
        const ReducedModel red(s, scn.cfg, scn.kind);
        ctrl = red.perf_slots();
        if (ctrl.empty()) ctrl = s.active_indices();
        if (pbc) {
            const auto m = ctrl.size();
            for (std::size_t k = 0; k < m; ++k) ctrl.push_back(n + ctrl[k]);
        }
    }

    auto measure = [&](const Eigen::VectorXd& p_inv, const Eigen::VectorXd& q_inv) -> Measurement {
        Measurement m{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
        if (scn.solver == SolverKind::linear) {
            const auto fl = solve_linear_flow(s, p_inv - p_load, q_inv - q_load, scn.v_slack * scn.v_slack);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!s.mask[i]) continue;
                if (fl.v[i] < 0.0) throw NoRealSolution("negative squared voltage");
                m.v[i] = fl.v[i];
                m.vmag[i] = std::sqrt(fl.v[i]);
                m.angle[i] = fl.angle[i];
            }
            return m;
        }
        std::array<std::complex<double>, 3> sl{};
        for (std::size_t i = 0; i < 3; ++i)
            sl[i] = {p_load[Eigen::Index(i)] - p_inv[Eigen::Index(i)], q_load[Eigen::Index(i)] - q_inv[Eigen::Index(i)]};
        const auto v = solve_exact_two_bus(scn.feeder.lines()[0].impedance, sl, scn.v_slack);
        for (Eigen::Index i = 0; i < 3; ++i) {
            if (!s.mask[i]) continue;
            m.vmag[i] = std::abs(v[std::size_t(i)]);
            m.v[i] = std::norm(v[std::size_t(i)]);
            m.angle[i] = wrap(std::arg(v[std::size_t(i)]) - kNominal[std::size_t(i)]);
        }
        return m;
    };

    const double v_ref2 = scn.v_ref * scn.v_ref, d_ref = scn.angle_ref_deg * kDeg;
    auto error = [&](const Measurement& m) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(pbc ? 2 * n : n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!s.mask[i]) continue;
            e[i] = m.v[i] - (pbc ? v_ref2 : 1.0);
            if (pbc) e[n + i] = wrap(m.angle[i] - d_ref);
        }
        return e;
    };

    Trajectory t;
    t.nodes = s.nodes;
    t.phases = s.phases;
    t.step_period_s = scn.step_period_s;
    Eigen::VectorXd p_inv = Eigen::VectorXd::Zero(n), q_inv = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd prev_state, last_e;

    auto deviates = [&](const Measurement& m) {
        for (Eigen::Index i = 0; i < n; ++i)
            if (s.mask[i] && std::abs(m.vmag[i] - 1.0) > scn.divergence_threshold) return true;
        return false;
    };

    for (int k = 0; k <= scn.horizon; ++k) {
        Measurement m;
        try {
            if (k > 0) step_control(scn.kind, s, scn.cfg, scn.gains, last_e, p_inv, q_inv);
            m = measure(p_inv, q_inv);
        } catch (const NoRealSolution& ex) {
            t.divergence_step = k;
            t.divergence_reason = ex.what();
            break;
        }
        const Eigen::VectorXd e = error(m);
        Eigen::VectorXd state(ctrl.size());
        for (std::size_t c = 0; c < ctrl.size(); ++c) state[Eigen::Index(c)] = e[ctrl[c]];
        t.vmag.push_back(m.vmag);
        t.angle.push_back(m.angle);
        t.p_inv.push_back(p_inv);
        t.q_inv.push_back(q_inv);
        t.error_norm.push_back(state.norm());
        t.step_norm.push_back(k == 0 ? 0.0 : (state - prev_state).norm());
        prev_state = state;
        last_e = e;
        if (k >= 2 && !t.onset_step && t.step_norm[std::size_t(k)] > t.step_norm[1]) t.onset_step = k;
        if (deviates(m)) {
            t.divergence_step = k;
            t.divergence_reason = "voltage deviation above threshold";
            break;
        }
    }
    return t;
}

namespace {

PhaseTriple load_triple(const nlohmann::json& e, const char* key, PhaseSet ph, double scale) {
    PhaseTriple t{};
    if (!e.contains(key)) return t;
    const auto& v = e.at(key);
    if (v.is_number()) {
        for (std::size_t i = 0; i < 3; ++i)
            if (ph.contains(i)) t[i] = v.get<double>() * scale;
    } else if (v.is_array() && v.size() == 3) {
        for (std::size_t i = 0; i < 3; ++i) {
            if (!v[i].is_number()) throw_bad(key, "entries must be numbers");
            t[i] = v[i].get<double>() * scale;
        }
    } else {
        throw_bad(key, "expected a number or a 3-element array");
    }
    return t;
}

}  // namespace

SimScenario scenario_from_json(const nlohmann::json& doc, const std::string& base_dir) {
    if (!doc.is_object()) throw ParseError("scenario must be a JSON object");
    if (!doc.contains("feeder")) throw_missing("feeder");
    const auto& fd = doc.at("feeder");
    Feeder feeder = [&] {
        if (fd.is_string()) {
            std::filesystem::path path(fd.get<std::string>());
            if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
            return load_feeder(path);
        }
        return feeder_from_json(fd);
    }();
    const auto s = build_sensitivity(feeder);
    SimScenario scn{feeder, {}, parse_control_kind(get_field<std::string>(doc, "kind")), {}, {}};
    scn.cfg = config_from_json(get_field<nlohmann::json>(doc, "config"), s);
    if (doc.contains("gains"))
        scn.gains = gains_from_json(doc.at("gains"), scn.cfg, scn.kind);
    else
        scn.gains = uniform_gains(scn.cfg, scn.kind, get_field<double>(doc, "gain_scale"));

    // kW and kVAR are per phase; the per-phase power base is a third of base_mva
    const double kw_per_pu = 1000.0 * feeder.base_mva() / 3.0;
    for (const auto& e : get_field<nlohmann::json>(doc, "loads", nlohmann::json::array())) {
        const auto id = get_field<std::string>(e, "node");
        const PhaseSet ph = s.phases[s.position(id)];
        PhaseLoad ld;
        if (e.contains("p_kw") || e.contains("q_kvar")) {
            ld.p = load_triple(e, "p_kw", ph, 1.0 / kw_per_pu);
            ld.q = load_triple(e, "q_kvar", ph, 1.0 / kw_per_pu);
        } else {
            ld.p = load_triple(e, "p", ph, 1.0);
            ld.q = load_triple(e, "q", ph, 1.0);
        }
        scn.loads[id] = ld;
    }
    const auto refs = get_field<nlohmann::json>(doc, "refs", nlohmann::json::object());
    scn.v_ref = get_field<double>(refs, "v_pu", 1.0);
    scn.angle_ref_deg = get_field<double>(refs, "angle_deg", 0.0);
    scn.horizon = get_field<int>(doc, "horizon", 100);
    scn.solver = parse_solver_kind(get_field<std::string>(doc, "solver", "linear"));
    scn.step_period_s = get_field<double>(doc, "step_period_s", 1.0);
    scn.divergence_threshold = get_field<double>(doc, "divergence_threshold", 0.5);
    scn.v_slack = get_field<double>(doc, "v_slack", 1.0);
    scn.perturbation = get_field<double>(doc, "perturbation", 0.0);
    if (scn.horizon < 1) throw ParseError("horizon must be at least 1");
    if (!(scn.step_period_s > 0.0)) throw ParseError("step_period_s must be positive");
    return scn;
}

nlohmann::json trajectory_summary(const Trajectory& t) {
    nlohmann::json j{{"steps", t.steps()},
                     {"step_period_s", t.step_period_s},
                     {"diverged", t.diverged()},
                     {"converged", t.converged()},
                     {"divergence_step", nullptr},
                     {"divergence_time_s", nullptr},
                     {"onset_step", nullptr}};
    if (t.divergence_step) {
        j["divergence_step"] = *t.divergence_step;
        j["divergence_time_s"] = *t.divergence_step * t.step_period_s;
        j["divergence_reason"] = t.divergence_reason;
    }
    if (t.onset_step) j["onset_step"] = *t.onset_step;
    if (!t.error_norm.empty()) {
        j["initial_error"] = t.error_norm.front();
        j["final_error"] = t.error_norm.back();
    }
    return j;
}

std::string trajectory_csv(const Trajectory& t) {
    std::ostringstream os;
    os.precision(12);
    os << "step,node,phase,vmag,angle,p_inv,q_inv\n";
    for (int k = 0; k < t.steps(); ++k) {
        for (std::size_t j = 0; j < t.nodes.size(); ++j) {
            for (std::size_t p = 0; p < 3; ++p) {
                if (!t.phases[j].contains(p)) continue;
                const auto i = Eigen::Index(3 * j + p);
                os << k << ',' << t.nodes[j] << ',' << kPhaseLetters[p] << ',' << t.vmag[std::size_t(k)][i] << ','
                   << t.angle[std::size_t(k)][i] / kDeg << ',' << t.p_inv[std::size_t(k)][i] << ','
                   << t.q_inv[std::size_t(k)][i] << '\n';
            }
        }
    }
    return os.str();
}

}  // namespace gridstab
