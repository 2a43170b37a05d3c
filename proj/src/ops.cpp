#include "gridstab/ops.hpp"

#include <cmath>
#include <sstream>

#include "gridstab/error.hpp"
#include "gridstab/json_io.hpp"
#include "gridstab/metrics.hpp"
#include "gridstab/placement.hpp"
#include "gridstab/simulator.hpp"
#include "gridstab/stability.hpp"

namespace gridstab {
namespace {

using json = nlohmann::json;

Feeder resolve_feeder(const json& req, const OpContext& ctx) {
    if (!req.is_object()) throw ParseError("request must be a JSON object");
    if (!req.contains("feeder") || req.at("feeder").is_null()) {
        if (ctx.default_feeder) return *ctx.default_feeder;
        throw_missing("feeder");
    }
    const auto& fd = req.at("feeder");
    if (fd.is_string()) {
        std::filesystem::path p(fd.get<std::string>());
        if (p.is_relative()) p = ctx.base_dir / p;
        return load_feeder(p);
    }
    return feeder_from_json(fd);
}

json triple(const PhaseTriple& t) {
    json a = json::array();
    for (double v : t) a.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    return a;
}

json metrics_doc(const Feeder& f) {
    json lines = json::array();
    for (const auto& ln : f.lines()) {
        const auto m = line_metrics(ln.impedance);
        lines.push_back({{"id", ln.id},
                         {"from", ln.from},
                         {"to", ln.to},
                         {"phases", ln.impedance.phases.to_string()},
                         {"d", triple(m.d)},
                         {"cx", triple(m.cx)},
                         {"cr", triple(m.cr)},
                         {"l1", triple(m.length.l1)},
                         {"l2", m.length.l2}});
    }
    json nodes = json::array();
    for (const auto& b : branch_metrics_ranking(f, false))
        nodes.push_back({{"node", b.node},
                         {"phases", b.phases.to_string()},
                         {"d", triple(b.d)},
                         {"cx", triple(b.cx)},
                         {"cr", triple(b.cr)},
                         {"mean_d", b.mean_d},
                         {"mean_cx", b.mean_cx},
                         {"rank_d", b.rank_d},
                         {"rank_cx", b.rank_cx}});
    return {{"lines", lines}, {"paths", nodes}};
}

FamilyParams family_params(const json& req) {
    const json& p = req.contains("params") ? req.at("params") : req;
    FamilyParams fp;
    fp.x = get_field<double>(p, "x", 0.0);
    fp.d = get_field<double>(p, "d", 0.0);
    fp.l1 = get_field<double>(p, "l1", 0.0);
    fp.cx = get_field<double>(p, "cx", 0.0);
    fp.l2 = get_field<double>(p, "l2", 0.0);
    return fp;
}

json params_doc(Family fam, const FamilyParams& p) {
    switch (fam) {
        case Family::pbc_1ph:
        case Family::droop_1ph: return {{"x", p.x}};
        case Family::pbc_rx:
        case Family::droop_rx: return {{"d", p.d}, {"l1", p.l1}};
        case Family::pbc_phase:
        case Family::droop_phase: return {{"cx", p.cx}, {"l2", p.l2}};
    }
    return json::object();
}

// Either a two-bus family or a feeder configuration scaled by a.
struct RhoTarget {
    RhoFn rho;
    json describe;
    std::optional<Family> family;
    FamilyParams params;
};

RhoTarget rho_target(const json& req, const OpContext& ctx) {
    if (!req.is_object()) throw ParseError("request must be a JSON object");
    if (req.contains("family")) {
        const Family fam = parse_family(get_field<std::string>(req, "family"));
        const FamilyParams p = family_params(req);
        // build once to surface invalid parameters as input errors
        RhoFn rho = family_rho(fam, p);
        return {std::move(rho), {{"family", to_string(fam)}, {"params", params_doc(fam, p)}}, fam, p};
    }
    const Feeder f = resolve_feeder(req, ctx);
    auto s = std::make_shared<SensitivityMatrices>(build_sensitivity(f));
    const ControlKind kind = parse_control_kind(get_field<std::string>(req, "kind"));
    const Configuration cfg = config_from_json(get_field<json>(req, "config"), *s);
    const ApnpGains base =
        req.contains("gains") ? gains_from_json(req.at("gains"), cfg, kind) : uniform_gains(cfg, kind, 1.0);
    RhoFn inner = scaled_gain_rho(*s, cfg, kind, base);
    RhoFn rho = [s, inner](double a) { return inner(a); };
    return {std::move(rho), {{"kind", to_string(kind)}, {"config", config_to_json(cfg)}}, std::nullopt, {}};
}

BisectOptions bisect_options(const json& req) {
    BisectOptions o;
    const json b = get_field<json>(req, "bisect", json::object());
    o.lo = get_field<double>(b, "lo", o.lo);
    o.hi = get_field<double>(b, "hi", o.hi);
    o.tol = get_field<double>(b, "tol", o.tol);
    o.max_iter = get_field<int>(b, "max_iter", o.max_iter);
    if (!(o.lo > 0.0) || !(o.hi > o.lo) || !(o.tol > 0.0) || o.max_iter < 1)
        throw ParseError("bisect needs 0 < lo < hi, tol > 0 and max_iter >= 1");
    return o;
}

json op_acrit(const json& req, const OpContext& ctx) {
    const auto target = rho_target(req, ctx);
    const auto cg = bisect_acrit(target.rho, bisect_options(req));
    json out = target.describe;
    out["a_crit"] = cg.a_crit;
    out["method"] = cg.method;
    out["iterations"] = cg.iterations;
    out["tol"] = cg.tol;
    out["analytic"] = nullptr;
    if (target.family) out["analytic"] = analytic_acrit(*target.family, target.params).a_crit;
    return out;
}

std::vector<double> gain_values(const json& req) {
    if (!req.contains("a")) throw_missing("a");
    const json& a = req.at("a");
    std::vector<double> out;
    if (a.is_string()) return parse_grid(a.get<std::string>());
    if (a.is_array()) {
        for (const auto& v : a) {
            if (!v.is_number()) throw ParseError("\"a\" values must be numbers");
            out.push_back(v.get<double>());
        }
    } else if (a.is_object()) {
        std::ostringstream os;
        os.precision(17);
        os << get_field<double>(a, "start") << ':' << get_field<double>(a, "step") << ':' << get_field<double>(a, "stop");
        return parse_grid(os.str());
    } else {
        throw ParseError("\"a\" must be a list, a start:step:stop string or an object");
    }
    if (out.empty()) throw ParseError("\"a\" is empty");
    return out;
}

json op_sweep(const json& req, const OpContext& ctx) {
    const auto target = rho_target(req, ctx);
    json pts = json::array();
    for (const auto& p : gain_sweep(target.rho, gain_values(req)))
        pts.push_back({{"a", p.a}, {"rho", p.rho}, {"stable", p.stable}});
    json out = target.describe;
    out["points"] = pts;
    return out;
}

json scenario_doc(const json& req, const OpContext& ctx) {
    if (!req.is_object()) throw ParseError("request must be a JSON object");
    json doc = req;
    if (!doc.contains("feeder") || doc.at("feeder").is_null()) {
        if (!ctx.default_feeder) throw_missing("feeder");
        doc["feeder"] = feeder_to_json(*ctx.default_feeder);
    }
    return doc;
}

json op_simulate(const json& req, const OpContext& ctx) {
    const auto scn = scenario_from_json(scenario_doc(req, ctx), ctx.base_dir.string());
    const auto t = run(scn);
    json out = trajectory_summary(t);
    out["error_norm"] = t.error_norm;
    out["step_norm"] = t.step_norm;
    json fin = json::array();
    if (t.steps() > 0) {
        const auto& v = t.vmag.back();
        const auto& th = t.angle.back();
        for (std::size_t j = 0; j < t.nodes.size(); ++j)
            for (std::size_t p = 0; p < 3; ++p) {
                if (!t.phases[j].contains(p)) continue;
                const auto i = Eigen::Index(3 * j + p);
                fin.push_back({{"node", t.nodes[j]},
                               {"phase", std::string(1, kPhaseLetters[p])},
                               {"vmag", v[i]},
                               {"angle_deg", th[i] * 180.0 / M_PI}});
            }
    }
    out["final"] = fin;
    return out;
}

json op_heatmap(const json& req, const OpContext& ctx) {
    const Feeder f = resolve_feeder(req, ctx);
    const auto s = build_sensitivity(f);
    const auto cfg = config_from_json(get_field<json>(req, "config", json::array()), s);
    const auto kind = parse_control_kind(get_field<std::string>(req, "kind"));
    const auto spec = sampling_from_json(get_field<json>(req, "sampling", json::object()));
    return to_json(cpp(f, cfg, kind, spec));
}

template <typename T, typename Parse>
std::vector<T> list_field(const json& req, const char* key, std::vector<T> fallback, Parse parse) {
    if (!req.contains(key)) return fallback;
    const auto& a = req.at(key);
    if (!a.is_array() || a.empty()) throw ParseError(std::string("\"") + key + "\" must be a non-empty list");
    std::vector<T> out;
    for (const auto& v : a) out.push_back(parse(v));
    return out;
}

json op_table1(const json& req, const OpContext& ctx) {
    const Feeder f = resolve_feeder(req, ctx);
    const auto str = [](const json& v) {
        if (!v.is_string()) throw ParseError("expected a string");
        return v.get<std::string>();
    };
    const auto kinds = list_field<ControlKind>(req, "kinds", {ControlKind::pbc, ControlKind::droop},
                                               [&](const json& v) { return parse_control_kind(str(v)); });
    const auto ratios = list_field<RatioKind>(req, "ratios", {RatioKind::rx, RatioKind::phase},
                                              [&](const json& v) { return parse_ratio_kind(str(v)); });
    const auto ms = list_field<int>(req, "m", {1, 5, 10, 15}, [](const json& v) {
        if (!v.is_number_integer()) throw ParseError("\"m\" entries must be integers");
        return v.get<int>();
    });
    const double factor = get_field<double>(req, "factor", 1.5);
    const int trials = get_field<int>(req, "trials", 10);
    const int budget = get_field<int>(req, "budget", 500);
    if (!(factor > 0.0)) throw ParseError("factor must be positive");
    if (budget < 1) throw ParseError("budget must be at least 1");
    const auto spec = sampling_from_json(get_field<json>(req, "sampling", json::object()));

    json rows = json::array();
    for (auto ratio : ratios)
        for (auto kind : kinds)
            for (int m : ms) {
                json row{{"kind", to_string(kind)}, {"ratio", to_string(ratio)}, {"m", m}};
                try {
                    const auto r = cross_apply_experiment(f, kind, m, ratio, factor, trials, spec, budget);
                    row.update(to_json(r));
                    row["status"] = "ok";
                } catch (const NoGoodConfigurationFound& e) {
                    row["status"] = "n/a";
                    row["message"] = e.what();
                }
                rows.push_back(std::move(row));
            }
    return {{"factor", factor}, {"trials", trials}, {"sampling", to_json(spec)}, {"rows", rows}};
}

json op_branch_compare(const json& req, const OpContext& ctx) {
    const Feeder f = resolve_feeder(req, ctx);
    const auto ids = [](const json& v) {
        if (!v.is_string()) throw ParseError("configuration entries must be node ids");
        return v.get<std::string>();
    };
    const auto chi1 = list_field<std::string>(req, "chi1", {"node_8", "node_53", "node_57", "node_66"}, ids);
    const auto chi2 = list_field<std::string>(req, "chi2", {"node_8", "node_53", "node_57", "node_74"}, ids);
    const auto spec = sampling_from_json(get_field<json>(req, "sampling", json::object()));
    json rows = json::array();
    for (const auto& r : branch_compare(f, chi1, chi2, spec)) {
        const int total = int(r.heatmap.verdicts.size());
        rows.push_back({{"label", r.label},
                        {"kind", to_string(r.kind)},
                        {"config", r.label == "chi1" ? chi1 : chi2},
                        {"blue", r.heatmap.blue},
                        {"yellow", r.heatmap.yellow},
                        {"red", r.heatmap.red},
                        {"error", r.heatmap.errors},
                        {"total", total},
                        {"red_fraction", total ? double(r.heatmap.red) / total : 0.0}});
    }
    return {{"sampling", to_json(spec)}, {"rows", rows}};
}

std::string num(const json& v) {
    if (v.is_null()) return "";
    std::ostringstream os;
    os.precision(12);
    if (v.is_number_integer()) os << v.get<long long>();
    else if (v.is_boolean()) os << (v.get<bool>() ? "true" : "false");
    else os << v.get<double>();
    return os.str();
}

}  // namespace

std::vector<double> parse_grid(const std::string& text) {
    double start = 0, step = 0, stop = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> start >> c1 >> step >> c2 >> stop) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof())
        throw ParseError("gain grid must look like start:step:stop, got \"" + text + "\"");
    if (!(step > 0.0) || stop < start) throw ParseError("gain grid needs step > 0 and stop >= start");
    const auto n = std::llround(std::floor((stop - start) / step + 1e-9));
    if (n > 1000000) throw ParseError("gain grid has too many points");
    std::vector<double> out;
    for (long long i = 0; i <= n; ++i) out.push_back(start + double(i) * step);
    return out;
}

nlohmann::json execute(const std::string& op, const nlohmann::json& request, const OpContext& ctx) {
    if (op == "feeder") {
        const Feeder f = resolve_feeder(request, ctx);
        return {{"feeder", feeder_to_json(f)}, {"metrics", metrics_doc(f)}};
    }
    if (op == "metrics") return metrics_doc(resolve_feeder(request, ctx));
    if (op == "acrit") return op_acrit(request, ctx);
    if (op == "sweep") return op_sweep(request, ctx);
    if (op == "simulate") return op_simulate(request, ctx);
    if (op == "heatmap") return op_heatmap(request, ctx);
    if (op == "table1") return op_table1(request, ctx);
    if (op == "branch_compare") return op_branch_compare(request, ctx);
    throw ParseError("unknown operation \"" + op + "\"");
}

std::string render_json(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

std::string metrics_csv(const nlohmann::json& r) {
    std::ostringstream os;
    os << "line,from,to,phases,d_a,d_b,d_c,cx_a,cx_b,cx_c,cr_a,cr_b,cr_c,l1_a,l1_b,l1_c,l2\n";
    for (const auto& ln : r.at("lines")) {
        os << ln.at("id").get<std::string>() << ',' << ln.at("from").get<std::string>() << ','
           << ln.at("to").get<std::string>() << ',' << ln.at("phases").get<std::string>();
        for (const char* k : {"d", "cx", "cr", "l1"})
            for (const auto& v : ln.at(k)) os << ',' << num(v);
        os << ',' << num(ln.at("l2")) << '\n';
    }
    return os.str();
}

std::string sweep_csv(const nlohmann::json& r) {
    std::ostringstream os;
    os << "a,rho,stable\n";
    for (const auto& p : r.at("points"))
        os << num(p.at("a")) << ',' << num(p.at("rho")) << ',' << num(p.at("stable")) << '\n';
    return os.str();
}

std::string table1_csv(const nlohmann::json& r) {
    std::ostringstream os;
    os << "ratio,kind,m,support,contradict,inconclusive,lost_ab,lost_ba,percent_support\n";
    for (const auto& row : r.at("rows")) {
        os << row.at("ratio").get<std::string>() << ',' << row.at("kind").get<std::string>() << ','
           << num(row.at("m"));
        if (row.at("status") == "ok") {
            for (const char* k : {"support", "contradict", "inconclusive", "lost_ab", "lost_ba", "percent_support"})
                os << ',' << num(row.at(k));
        } else {
            os << ",,,,,,N/A";
        }
        os << '\n';
    }
    return os.str();
}

std::string branch_compare_csv(const nlohmann::json& r) {
    std::ostringstream os;
    os << "config,kind,blue,yellow,red,error,total,red_fraction\n";
    for (const auto& row : r.at("rows")) {
        os << row.at("label").get<std::string>() << ',' << row.at("kind").get<std::string>();
        for (const char* k : {"blue", "yellow", "red", "error", "total", "red_fraction"}) os << ',' << num(row.at(k));
        os << '\n';
    }
    return os.str();
}

std::string simulate_csv(const nlohmann::json& request, const OpContext& ctx) {
    return trajectory_csv(run(scenario_from_json(scenario_doc(request, ctx), ctx.base_dir.string())));
}

}  // namespace gridstab
