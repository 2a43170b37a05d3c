#include "gridstab/json_io.hpp"

#include "gridstab/error.hpp"

namespace gridstab {

void throw_missing(const char* key) { throw ParseError(std::string("missing field \"") + key + "\""); }

void throw_bad(const char* key, const std::string& what) {
    throw ParseError(std::string("field \"") + key + "\": " + what);
}

Configuration config_from_json(const nlohmann::json& doc, const SensitivityMatrices& s) {
    if (!doc.is_array()) throw ParseError("configuration must be an array");
    Configuration cfg;
    for (const auto& e : doc) {
        if (e.is_string()) {
            const auto id = e.get<std::string>();
            cfg.apnps.push_back({id, id, s.phases[s.position(id)]});
            continue;
        }
        if (!e.is_object()) throw ParseError("configuration entries must be node ids or objects");
        Apnp ap;
        ap.actuator = get_field<std::string>(e, "actuator");
        ap.performance = get_field<std::string>(e, "performance", ap.actuator);
        if (e.contains("phases")) {
            ap.phases = PhaseSet::parse(get_field<std::string>(e, "phases"));
        } else {
            ap.phases = PhaseSet(s.phases[s.position(ap.actuator)].bits() &
                                 s.phases[s.position(ap.performance)].bits());
        }
        cfg.apnps.push_back(ap);
    }
    cfg.validate(s);
    return cfg;
}

nlohmann::json config_to_json(const Configuration& cfg) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& ap : cfg.apnps)
        out.push_back({{"actuator", ap.actuator}, {"performance", ap.performance}, {"phases", ap.phases.to_string()}});
    return out;
}

namespace {

PhaseTriple triple(const nlohmann::json& e, const char* key, PhaseSet ph) {
    PhaseTriple t{};
    if (!e.contains(key)) return t;
    const auto& v = e.at(key);
    if (v.is_number()) {
        for (std::size_t i = 0; i < 3; ++i)
            if (ph.contains(i)) t[i] = v.get<double>();
    } else if (v.is_array() && v.size() == 3) {
        for (std::size_t i = 0; i < 3; ++i) {
            if (!v[i].is_number()) throw_bad(key, "entries must be numbers");
            t[i] = v[i].get<double>();
        }
    } else {
        throw_bad(key, "expected a number or a 3-element array");
    }
    return t;
}

}  // namespace

ApnpGains gains_from_json(const nlohmann::json& doc, const Configuration& cfg, ControlKind kind) {
    if (!doc.is_array()) throw ParseError("gains must be an array with one entry per APNP");
    if (doc.size() != cfg.apnps.size())
        throw StructureError("expected gains for " + std::to_string(cfg.apnps.size()) + " APNPs, got " +
                             std::to_string(doc.size()));
    ApnpGains g(doc.size());
    for (std::size_t k = 0; k < doc.size(); ++k) {
        if (!doc[k].is_object()) throw ParseError("gain entries must be objects");
        const PhaseSet ph = cfg.apnps[k].phases;
        g[k] = {triple(doc[k], "f11", ph), triple(doc[k], "f12", ph), triple(doc[k], "f21", ph),
                triple(doc[k], "f22", ph)};
    }
    validate_gains(cfg, kind, g);
    return g;
}

nlohmann::json gains_to_json(const ApnpGains& g, const Configuration& cfg, ControlKind kind) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t k = 0; k < g.size(); ++k) {
        nlohmann::json e{{"actuator", cfg.apnps[k].actuator}, {"f11", g[k].f11}};
        if (kind == ControlKind::pbc)
            e["f22"] = g[k].f22;
        else
            e["f21"] = g[k].f21;
        out.push_back(e);
    }
    return out;
}

}  // namespace gridstab
