#pragma once

#include <string>

#include "json.hpp"

#include "gridstab/control.hpp"

namespace gridstab {

/// Entries are node ids (co-located, every phase of the node) or objects
/// {"actuator", "performance" (defaults to actuator), "phases" (defaults to
/// the phases common to both nodes)}.
Configuration config_from_json(const nlohmann::json& doc, const SensitivityMatrices& s);
nlohmann::json config_to_json(const Configuration& cfg);

/// One object per APNP with optional "f11", "f12", "f21", "f22"; each is a
/// number (applied to every controlled phase) or a three-element array.
ApnpGains gains_from_json(const nlohmann::json& doc, const Configuration& cfg, ControlKind kind);
nlohmann::json gains_to_json(const ApnpGains& g, const Configuration& cfg, ControlKind kind);

[[noreturn]] void throw_missing(const char* key);
[[noreturn]] void throw_bad(const char* key, const std::string& what);

/// Typed field access that reports failures as ParseError.
template <typename T>
T get_field(const nlohmann::json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) throw_missing(key);
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw_bad(key, e.what());
    }
}
template <typename T>
T get_field(const nlohmann::json& obj, const char* key, T fallback) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
    return get_field<T>(obj, key);
}
}  // namespace gridstab
