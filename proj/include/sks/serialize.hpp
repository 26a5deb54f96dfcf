#pragma once

// Structured serialization.  A derivation file is a JSON object holding the
// premiss and the ordered step list; each step carries its rule, redex path,
// conclusion line and a trace hash over the step's occurrence mapping, so a
// loaded file can prove that the tracing recomputed here matches the one the
// writer saw.  Flows serialize to JSON and to DOT for graph viewers.

#include <json.hpp>

#include <string>

#include "sks/flow.hpp"

namespace sks {

// ---- trace hashes ----------------------------------------------------------

// FNV-1a over the step's occurrence mapping; 0 for steps without an atomic
// trace (the general rules).
inline uint64_t trace_hash(const Step& s) {
    if (is_general(s.rule)) return 0;
    StepTrace t = compute_trace(s);
    uint64_t h = 1469598103934665603ull;
    auto mix = [&](uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    for (int32_t v : t.to_conclusion) mix(static_cast<uint64_t>(v) + 1);
    mix(0x9e3779b9ull);
    for (uint32_t v : t.created) mix(v);
    mix(0x9e3779b9ull);
    for (uint32_t v : t.destroyed) mix(v);
    return h;
}

// ---- derivations -----------------------------------------------------------

inline nlohmann::json derivation_to_json(const Derivation& d) {
    nlohmann::json steps = nlohmann::json::array();
    for (const Step& s : d.steps) {
        nlohmann::json path = nlohmann::json::array();
        for (uint8_t b : s.redex) path.push_back(static_cast<int>(b));
        char trace[17];
        std::snprintf(trace, sizeof trace, "%016llx",
                      static_cast<unsigned long long>(trace_hash(s)));
        nlohmann::json step = {{"rule", rule_ascii(s.rule)},
                               {"path", std::move(path)},
                               {"line", render_binary(s.conclusion)},
                               {"trace", trace}};
        if (!s.eq_wiring.empty()) step["wiring"] = s.eq_wiring;
        steps.push_back(std::move(step));
    }
    return {{"premiss", render_binary(d.premiss)}, {"steps", std::move(steps)}};
}

// Structural load: shape and formula syntax are checked here, step validity
// is left to check_derivation so a bad file still yields a full report.
inline Derivation derivation_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("premiss") || !j.contains("steps") ||
        !j["steps"].is_array())
        throw std::runtime_error("derivation_from_json: expected {premiss, steps}");
    Derivation d;
    d.premiss = parse(j["premiss"].get<std::string>());
    Formula prev = d.premiss;
    for (const nlohmann::json& js : j["steps"]) {
        Step s;
        if (!rule_from_ascii(js.at("rule").get<std::string>(), s.rule))
            throw std::runtime_error("derivation_from_json: unknown rule " +
                                     js.at("rule").get<std::string>());
        for (const nlohmann::json& b : js.at("path")) {
            int v = b.get<int>();
            if (v != 0 && v != 1)
                throw std::runtime_error("derivation_from_json: path steps must be 0 or 1");
            s.redex.push_back(static_cast<uint8_t>(v));
        }
        s.premiss = prev;
        s.conclusion = parse(js.at("line").get<std::string>());
        if (js.contains("wiring")) s.eq_wiring = js["wiring"].get<std::vector<int32_t>>();
        prev = s.conclusion;
        d.steps.push_back(std::move(s));
    }
    return d;
}

// Compares the stored trace hashes against recomputed ones; call only on
// derivations that already passed check_derivation.
inline bool verify_traces(const Derivation& d, const nlohmann::json& j) {
    const nlohmann::json& steps = j.at("steps");
    if (steps.size() != d.steps.size()) return false;
    for (size_t i = 0; i < d.steps.size(); ++i) {
        char expect[17];
        std::snprintf(expect, sizeof expect, "%016llx",
                      static_cast<unsigned long long>(trace_hash(d.steps[i])));
        if (steps[i].value("trace", "") != expect) return false;
    }
    return true;
}

// ---- flows -------------------------------------------------------------------

inline nlohmann::json flow_to_json(const Flow& f) {
    nlohmann::json vertices = nlohmann::json::array();
    for (size_t i = 0; i < f.vertices.size(); ++i)
        vertices.push_back({{"id", i},
                            {"kind", vertex_kind_name(f.vertices[i].kind)},
                            {"step", f.vertices[i].step}});
    nlohmann::json edges = nlohmann::json::array();
    auto endpoint = [](uint32_t v) {
        return v == flow_none ? nlohmann::json() : nlohmann::json(v);
    };
    for (size_t i = 0; i < f.edges.size(); ++i)
        edges.push_back({{"id", i},
                         {"atom", f.edges[i].label.text()},
                         {"above", endpoint(f.edges[i].above)},
                         {"below", endpoint(f.edges[i].below)}});
    return {{"vertices", std::move(vertices)}, {"edges", std::move(edges)}};
}

// DOT render: structural vertices as labelled nodes, dangling edge ends as
// points on the premiss/conclusion rank.
inline std::string flow_to_dot(const Flow& f) {
    std::string out = "digraph flow {\n  rankdir=TB;\n  node [fontsize=10];\n";
    for (size_t i = 0; i < f.vertices.size(); ++i) {
        out += "  v" + std::to_string(i) + " [label=\"" +
               vertex_kind_name(f.vertices[i].kind) + "\", shape=box];\n";
    }
    for (size_t i = 0; i < f.edges.size(); ++i) {
        std::string above = f.edges[i].above == flow_none
                                ? "top" + std::to_string(i)
                                : "v" + std::to_string(f.edges[i].above);
        std::string below = f.edges[i].below == flow_none
                                ? "bot" + std::to_string(i)
                                : "v" + std::to_string(f.edges[i].below);
        if (f.edges[i].above == flow_none)
            out += "  " + above + " [shape=point, rank=min];\n";
        if (f.edges[i].below == flow_none)
            out += "  " + below + " [shape=point, rank=max];\n";
        out += "  " + above + " -> " + below + " [label=\"" + f.edges[i].label.text() +
               "\"];\n";
    }
    out += "}\n";
    return out;
}

}  // namespace sks

