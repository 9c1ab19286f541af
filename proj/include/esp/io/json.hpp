#pragma once

// JSON forms of EllipseParams, SolverConfig, metrics and raster sidecars.

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include <json.hpp>

#include "esp/ellipse.hpp"
#include "esp/error.hpp"
#include "esp/metrics.hpp"
#include "esp/solver.hpp"

namespace esp::io {

using json = nlohmann::json;

inline json to_json(const EllipseParams& e) {
    return json{{"x0", e.x0}, {"y0", e.y0}, {"a", e.a}, {"b", e.b}, {"theta", e.theta}};
}

/// Reads {x0, y0, a, b, theta}; axes are swapped and theta folded if needed.
inline EllipseParams ellipse_from_json(const json& j) {
    if (!j.is_object()) throw InvalidArgument("ellipse json: expected an object");
    EllipseParams e;
    try {
        e.x0 = j.at("x0").get<double>();
        e.y0 = j.at("y0").get<double>();
        e.a = j.at("a").get<double>();
        e.b = j.at("b").get<double>();
        e.theta = j.at("theta").get<double>();
    } catch (const json::exception& ex) {
        throw InvalidArgument(std::string("ellipse json: ") + ex.what());
    }
    return normalized(e);
}

inline json to_json(const Metrics& m) { return json{{"dice", m.dice}, {"bd", m.bd}, {"bdsd", m.bdsd}}; }

inline const char* to_string(TangentScaling s) { return s == TangentScaling::raw ? "raw" : "unit"; }

inline TangentScaling tangent_scaling_from_string(const std::string& s) {
    if (s == "raw") return TangentScaling::raw;
    if (s == "unit") return TangentScaling::unit;
    throw InvalidArgument("unknown tangent scaling '" + s + "' (expected raw or unit)");
}

/// Looks up `key` in either snake_case or the CLI's kebab-case spelling.
inline const json* find_key(const json& j, const std::string& key) {
    if (auto it = j.find(key); it != j.end()) return &*it;
    std::string kebab = key;
    for (char& c : kebab)
        if (c == '_') c = '-';
    if (auto it = j.find(kebab); it != j.end()) return &*it;
    return nullptr;
}

/// Non-negative real, also accepting the strings "inf"/"infinity".
inline double number_or_inf(const json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity" || s == "Infinity") return std::numeric_limits<double>::infinity();
    }
    throw InvalidArgument("config: '" + key + "' must be a number");
}

/// Overlays solver keys present in j onto cfg (keys mirror the CLI flags).
inline void apply_solver_config(const json& j, SolverConfig& cfg) {
    if (!j.is_object()) throw InvalidArgument("config: expected a JSON object");
    auto real = [&](const char* key, double& dst) {
        if (const json* v = find_key(j, key)) dst = number_or_inf(*v, key);
    };
    auto count = [&](const char* key, std::size_t& dst) {
        if (const json* v = find_key(j, key)) {
            if (!v->is_number_integer() || v->get<long long>() < 0) {
                throw InvalidArgument(std::string("config: '") + key + "' must be a non-negative integer");
            }
            dst = v->get<std::size_t>();
        }
    };
    real("lambda", cfg.lambda);
    real("epsilon", cfg.epsilon);
    real("tau_q", cfg.tau_q);
    real("tol", cfg.tol);
    real("kernel_sigma", cfg.kernel_sigma);
    count("max_iters", cfg.max_iters);
    count("kernel_radius", cfg.kernel_radius);
    count("ellipse_class", cfg.ellipse_class);
    if (const json* v = find_key(j, "tangent_scaling")) {
        if (!v->is_string()) throw InvalidArgument("config: 'tangent_scaling' must be a string");
        cfg.tangent_scaling = tangent_scaling_from_string(v->get<std::string>());
    }
}

inline json to_json(const SolverConfig& c) {
    json j{{"lambda", c.lambda},
           {"epsilon", c.epsilon},
           {"tau_q", c.tau_q},
           {"max_iters", c.max_iters},
           {"kernel_radius", c.kernel_radius},
           {"kernel_sigma", c.kernel_sigma},
           {"ellipse_class", c.ellipse_class},
           {"tangent_scaling", to_string(c.tangent_scaling)}};
    j["tol"] = std::isinf(c.tol) ? json("inf") : json(c.tol);
    return j;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& ex) {
        throw InvalidArgument(path + ": " + ex.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

} // namespace esp::io
