// Atomic flows: the occurrence-tracing graphs of derivations.  Every
// structural inference step contributes one vertex; every atom occurrence
// lifeline contributes one edge.  Logical and equality steps only permute
// occurrences and leave no trace.  The module covers extraction, validity
// (directed acyclicity plus existence of a polarity assignment), connected
// components, flow-guided substitution of formulae for atoms, and the
// weakening/coweakening reduction rules together with their derivation
// counterparts.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sks/derivation.hpp"

namespace sks {

// ---- graph types -------------------------------------------------------------

enum class VertexKind : uint8_t {
    Identity,       // no upper edge, two lower edges (a, -a)
    Cut,            // two upper edges (a, -a), no lower edge
    Weakening,      // no upper edge, one lower edge
    Coweakening,    // one upper edge, no lower edge
    Contraction,    // two upper edges, one lower edge (all same literal)
    Cocontraction,  // one upper edge, two lower edges (all same literal)
};

inline const char* vertex_kind_name(VertexKind k) {
    switch (k) {
        case VertexKind::Identity: return "identity";
        case VertexKind::Cut: return "cut";
        case VertexKind::Weakening: return "weakening";
        case VertexKind::Coweakening: return "coweakening";
        case VertexKind::Contraction: return "contraction";
        case VertexKind::Cocontraction: return "cocontraction";
    }
    return "?";
}

inline uint8_t up_arity(VertexKind k) {
    switch (k) {
        case VertexKind::Identity: return 0;
        case VertexKind::Cut: return 2;
        case VertexKind::Weakening: return 0;
        case VertexKind::Coweakening: return 1;
        case VertexKind::Contraction: return 2;
        case VertexKind::Cocontraction: return 1;
    }
    return 0;
}

inline uint8_t down_arity(VertexKind k) {
    switch (k) {
        case VertexKind::Identity: return 2;
        case VertexKind::Cut: return 0;
        case VertexKind::Weakening: return 1;
        case VertexKind::Coweakening: return 0;
        case VertexKind::Contraction: return 1;
        case VertexKind::Cocontraction: return 2;
    }
    return 0;
}

// Sentinel for absent edges, vertices and dangling endpoints.
inline constexpr uint32_t flow_none = 0xFFFFFFFFu;

struct Vertex {
    VertexKind kind;
    std::array<uint32_t, 2> up{flow_none, flow_none};    // edges entering from above
    std::array<uint32_t, 2> down{flow_none, flow_none};  // edges leaving below
    uint32_t step = flow_none;  // originating step index when extracted
};

// Edges run top to bottom.  `above` is the vertex the edge hangs from (one of
// its down ports); `below` is the vertex it enters (one of its up ports).
// flow_none endpoints are dangling: a premiss occurrence at the top, a
// conclusion occurrence at the bottom.
struct Edge {
    Literal label;
    uint32_t above = flow_none;
    uint8_t above_port = 0;
    uint32_t below = flow_none;
    uint8_t below_port = 0;
};

struct Flow {
    std::vector<Vertex> vertices;
    std::vector<Edge> edges;
};

// lines[i][k] is the edge carrying atom leaf k of derivation line i (line 0
// is the premiss, line i+1 the conclusion of step i).
struct OccurrenceMap {
    std::vector<std::vector<uint32_t>> lines;
};

// ---- extraction --------------------------------------------------------------

namespace detail {

inline VertexKind vertex_kind_of(RuleId r) {
    switch (r) {
        case RuleId::ai_down: return VertexKind::Identity;
        case RuleId::ai_up: return VertexKind::Cut;
        case RuleId::aw_down: return VertexKind::Weakening;
        case RuleId::aw_up: return VertexKind::Coweakening;
        case RuleId::ac_down: return VertexKind::Contraction;
        case RuleId::ac_up: return VertexKind::Cocontraction;
        default: throw std::logic_error("vertex_kind_of: not a structural rule");
    }
}

}  // namespace detail

// Builds the atomic flow of a checked derivation along with the per-line
// occurrence-to-edge map.  Throws std::invalid_argument on invalid steps and
// on general rules (expand those first).
inline std::pair<Flow, OccurrenceMap> extract_flow(const Derivation& d) {
    Flow fl;
    OccurrenceMap occ;

    std::vector<uint32_t> cur(static_cast<size_t>(d.premiss->atom_leaves));
    for (uint32_t k = 0; k < cur.size(); ++k) {
        cur[k] = static_cast<uint32_t>(fl.edges.size());
        fl.edges.push_back(Edge{atom_at(d.premiss, k)});
    }
    occ.lines.push_back(cur);

    for (size_t i = 0; i < d.steps.size(); ++i) {
        const Step& s = d.steps[i];
        if (is_general(s.rule))
            throw std::invalid_argument(std::string("extract_flow: general rule ") +
                                        rule_ascii(s.rule) + " at step " + std::to_string(i) +
                                        " (expand first)");
        StepTrace t = compute_trace(s);

        std::vector<uint32_t> next(static_cast<size_t>(s.conclusion->atom_leaves), flow_none);
        for (uint32_t p = 0; p < t.to_conclusion.size(); ++p)
            if (t.to_conclusion[p] >= 0) next[static_cast<uint32_t>(t.to_conclusion[p])] = cur[p];

        if (is_structural(s.rule)) {
            uint32_t v = static_cast<uint32_t>(fl.vertices.size());
            Vertex vx{detail::vertex_kind_of(s.rule)};
            vx.step = static_cast<uint32_t>(i);
            for (uint8_t q = 0; q < t.destroyed.size(); ++q) {
                uint32_t e = cur[t.destroyed[q]];
                fl.edges[e].below = v;
                fl.edges[e].below_port = q;
                vx.up[q] = e;
            }
            for (uint8_t q = 0; q < t.created.size(); ++q) {
                uint32_t e = static_cast<uint32_t>(fl.edges.size());
                fl.edges.push_back(Edge{atom_at(s.conclusion, t.created[q]), v, q});
                vx.down[q] = e;
                next[t.created[q]] = e;
            }
            fl.vertices.push_back(vx);
        }

        occ.lines.push_back(next);
        cur = std::move(next);
    }
    return {std::move(fl), std::move(occ)};
}

// ---- validity ------------------------------------------------------------------

struct FlowCheck {
    bool ok = true;
    std::string error;  // empty when ok
};

namespace detail {

// Union-find over edges with a parity relative to the parent: 0 means same
// polarity as the representative, 1 means opposite.
struct ParityUnionFind {
    std::vector<uint32_t> parent;
    std::vector<uint8_t> rel;

    explicit ParityUnionFind(size_t n) : parent(n), rel(n, 0) {
        for (size_t i = 0; i < n; ++i) parent[i] = static_cast<uint32_t>(i);
    }

    std::pair<uint32_t, uint8_t> find(uint32_t x) {
        if (parent[x] == x) return {x, 0};
        auto [root, p] = find(parent[x]);
        parent[x] = root;
        rel[x] = static_cast<uint8_t>(rel[x] ^ p);
        return {root, rel[x]};
    }

    // Merges x and y with the given relative parity; returns false on conflict.
    bool unite(uint32_t x, uint32_t y, uint8_t parity) {
        auto [rx, px] = find(x);
        auto [ry, py] = find(y);
        if (rx == ry) return static_cast<uint8_t>(px ^ py) == parity;
        parent[ry] = rx;
        rel[ry] = static_cast<uint8_t>(px ^ py ^ parity);
        return true;
    }
};

// Collects the polarity constraints of a vertex: identity and cut force the
// two incident edges to differ, (co)contraction forces all incident edges
// equal, (co)weakening forces nothing.
inline void polarity_constraints(const Vertex& v,
                                 std::vector<std::tuple<uint32_t, uint32_t, uint8_t>>& out) {
    switch (v.kind) {
        case VertexKind::Identity: out.emplace_back(v.down[0], v.down[1], 1); break;
        case VertexKind::Cut: out.emplace_back(v.up[0], v.up[1], 1); break;
        case VertexKind::Contraction:
            out.emplace_back(v.up[0], v.up[1], 0);
            out.emplace_back(v.up[0], v.down[0], 0);
            break;
        case VertexKind::Cocontraction:
            out.emplace_back(v.down[0], v.down[1], 0);
            out.emplace_back(v.up[0], v.down[0], 0);
            break;
        default: break;
    }
}

}  // namespace detail

// Structural validity: port arities and endpoint wiring, directed acyclicity
// under the top-to-bottom orientation, and existence of a polarity
// assignment (identity/cut edges opposite, (co)contraction edges equal).
inline FlowCheck validate(const Flow& f) {
    auto fail = [](std::string msg) { return FlowCheck{false, std::move(msg)}; };

    for (uint32_t vi = 0; vi < f.vertices.size(); ++vi) {
        const Vertex& v = f.vertices[vi];
        for (uint8_t q = 0; q < 2; ++q) {
            bool want_up = q < up_arity(v.kind);
            if (want_up != (v.up[q] != flow_none))
                return fail("vertex " + std::to_string(vi) + ": up port arity mismatch");
            bool want_down = q < down_arity(v.kind);
            if (want_down != (v.down[q] != flow_none))
                return fail("vertex " + std::to_string(vi) + ": down port arity mismatch");
            if (v.up[q] != flow_none) {
                if (v.up[q] >= f.edges.size()) return fail("up port points past edge list");
                const Edge& e = f.edges[v.up[q]];
                if (e.below != vi || e.below_port != q)
                    return fail("edge " + std::to_string(v.up[q]) + ": lower endpoint mismatch");
            }
            if (v.down[q] != flow_none) {
                if (v.down[q] >= f.edges.size()) return fail("down port points past edge list");
                const Edge& e = f.edges[v.down[q]];
                if (e.above != vi || e.above_port != q)
                    return fail("edge " + std::to_string(v.down[q]) + ": upper endpoint mismatch");
            }
        }
    }
    for (uint32_t ei = 0; ei < f.edges.size(); ++ei) {
        const Edge& e = f.edges[ei];
        if (e.above != flow_none &&
            (e.above >= f.vertices.size() || f.vertices[e.above].down[e.above_port] != ei))
            return fail("edge " + std::to_string(ei) + ": dangling upper back-reference");
        if (e.below != flow_none &&
            (e.below >= f.vertices.size() || f.vertices[e.below].up[e.below_port] != ei))
            return fail("edge " + std::to_string(ei) + ": dangling lower back-reference");
    }

    // Directed acyclicity over vertices (Kahn's algorithm).
    std::vector<uint32_t> indeg(f.vertices.size(), 0);
    for (const Edge& e : f.edges)
        if (e.above != flow_none && e.below != flow_none) indeg[e.below]++;
    std::vector<uint32_t> queue;
    for (uint32_t vi = 0; vi < f.vertices.size(); ++vi)
        if (indeg[vi] == 0) queue.push_back(vi);
    size_t seen = 0;
    while (!queue.empty()) {
        uint32_t vi = queue.back();
        queue.pop_back();
        ++seen;
        for (uint32_t e : f.vertices[vi].down)
            if (e != flow_none && f.edges[e].below != flow_none)
                if (--indeg[f.edges[e].below] == 0) queue.push_back(f.edges[e].below);
    }
    if (seen != f.vertices.size()) return fail("cycle found");

    // Polarity assignment existence.
    detail::ParityUnionFind uf(f.edges.size());
    std::vector<std::tuple<uint32_t, uint32_t, uint8_t>> constraints;
    for (const Vertex& v : f.vertices) detail::polarity_constraints(v, constraints);
    for (auto& [a, b, parity] : constraints)
        if (!uf.unite(a, b, parity)) return fail("no polarity assignment exists");

    return {};
}

// Label consistency holds on every extracted flow but is not part of flow
// validity: identity/cut edges carry dual literals, (co)contraction edges
// carry one literal.
inline FlowCheck check_labels(const Flow& f) {
    for (uint32_t vi = 0; vi < f.vertices.size(); ++vi) {
        const Vertex& v = f.vertices[vi];
        auto lab = [&](uint32_t e) { return f.edges[e].label; };
        bool ok = true;
        switch (v.kind) {
            case VertexKind::Identity: ok = lab(v.down[0]) == lab(v.down[1]).dual(); break;
            case VertexKind::Cut: ok = lab(v.up[0]) == lab(v.up[1]).dual(); break;
            case VertexKind::Contraction:
                ok = lab(v.up[0]) == lab(v.up[1]) && lab(v.up[0]) == lab(v.down[0]);
                break;
            case VertexKind::Cocontraction:
                ok = lab(v.down[0]) == lab(v.down[1]) && lab(v.up[0]) == lab(v.down[0]);
                break;
            default: break;
        }
        if (!ok)
            return {false, "vertex " + std::to_string(vi) + " (" + vertex_kind_name(v.kind) +
                               "): inconsistent edge labels"};
    }
    return {};
}

// ---- components and polarity ---------------------------------------------------

// Connected components of the underlying undirected graph, as sorted lists
// of edge ids, ordered by smallest member.
inline std::vector<std::vector<uint32_t>> components(const Flow& f) {
    std::vector<uint32_t> parent(f.edges.size());
    for (uint32_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto unite = [&](uint32_t a, uint32_t b) { parent[find(a)] = find(b); };

    for (const Vertex& v : f.vertices) {
        uint32_t first = flow_none;
        for (auto& ports : {v.up, v.down})
            for (uint32_t e : ports)
                if (e != flow_none) {
                    if (first == flow_none)
                        first = e;
                    else
                        unite(first, e);
                }
    }

    std::map<uint32_t, std::vector<uint32_t>> buckets;
    for (uint32_t e = 0; e < f.edges.size(); ++e) buckets[find(e)].push_back(e);
    std::vector<std::vector<uint32_t>> out;
    out.reserve(buckets.size());
    for (auto& [root, edges] : buckets) out.push_back(std::move(edges));
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

// A polarity assignment maps every edge to +1 or -1 subject to the vertex
// constraints; valid flows admit exactly two per connected component.
struct PolarityAssignment {
    std::vector<int8_t> sign;  // +1 or -1 per edge
};

// Number of polarity assignments of a valid flow: 2^|components|.  Throws
// std::overflow_error when the count exceeds 64 bits.
inline uint64_t polarity_assignment_count(const Flow& f) {
    size_t c = components(f).size();
    if (c >= 64) throw std::overflow_error("polarity_assignment_count: more than 2^63 assignments");
    return uint64_t{1} << c;
}

namespace detail {

// One consistent polarity per component, found by propagating constraints
// from an arbitrary +1 seed edge.  Requires validate(f).ok.
inline std::vector<int8_t> base_polarity(const Flow& f,
                                         const std::vector<std::vector<uint32_t>>& comps) {
    ParityUnionFind uf(f.edges.size());
    std::vector<std::tuple<uint32_t, uint32_t, uint8_t>> constraints;
    for (const Vertex& v : f.vertices) polarity_constraints(v, constraints);
    for (auto& [a, b, parity] : constraints)
        if (!uf.unite(a, b, parity))
            throw std::invalid_argument("base_polarity: flow admits no polarity assignment");

    std::vector<int8_t> sign(f.edges.size(), 0);
    for (const auto& comp : comps) {
        auto [seed_root, seed_par] = uf.find(comp.front());
        (void)seed_par;
        for (uint32_t e : comp) {
            auto [root, par] = uf.find(e);
            if (root != seed_root)
                throw std::logic_error("base_polarity: component not closed under constraints");
            sign[e] = par == 0 ? int8_t{1} : int8_t{-1};
        }
    }
    return sign;
}

}  // namespace detail

// Chooses one polarity assignment, deciding each component independently:
// the predicate sees the component's edges and the candidate full sign
// vector and accepts or rejects the orientation.  Returns std::nullopt when
// some component satisfies neither orientation.
template <typename Pred>
inline std::optional<PolarityAssignment> choose_polarity(const Flow& f, Pred&& accept) {
    auto comps = components(f);
    std::vector<int8_t> sign = detail::base_polarity(f, comps);
    for (const auto& comp : comps) {
        bool ok = accept(comp, sign);
        if (!ok) {
            for (uint32_t e : comp) sign[e] = static_cast<int8_t>(-sign[e]);
            ok = accept(comp, sign);
        }
        if (!ok) return std::nullopt;
    }
    return PolarityAssignment{std::move(sign)};
}

// The canonical assignment of a label-consistent flow: edges carrying a
// non-negated literal are positive.  No two dual occurrences then share the
// negative polarity.
inline PolarityAssignment canonical_polarity(const Flow& f) {
    auto chosen = choose_polarity(f, [&](const std::vector<uint32_t>& comp,
                                         const std::vector<int8_t>& sign) {
        for (uint32_t e : comp)
            if ((sign[e] > 0) != !f.edges[e].label.neg) return false;
        return true;
    });
    if (!chosen)
        throw std::invalid_argument("canonical_polarity: labels are not component-consistent");
    return *chosen;
}

// ---- DOT export ----------------------------------------------------------------

// Graphviz text for a flow; vertex kinds map to node shapes, edge labels show
// literals, and an optional polarity assignment colours the edges.  Output is
// deterministic in the id order.
inline std::string to_dot(const Flow& f, const PolarityAssignment* pol = nullptr) {
    auto shape = [](VertexKind k) {
        switch (k) {
            case VertexKind::Identity: return "triangle";
            case VertexKind::Cut: return "invtriangle";
            case VertexKind::Weakening: return "circle";
            case VertexKind::Coweakening: return "doublecircle";
            case VertexKind::Contraction: return "invhouse";
            case VertexKind::Cocontraction: return "house";
        }
        return "box";
    };
    std::ostringstream out;
    out << "digraph flow {\n  rankdir=TB;\n  node [fontsize=10];\n";
    for (uint32_t vi = 0; vi < f.vertices.size(); ++vi)
        out << "  v" << vi << " [shape=" << shape(f.vertices[vi].kind) << " label=\""
            << vertex_kind_name(f.vertices[vi].kind) << "\"];\n";
    for (uint32_t ei = 0; ei < f.edges.size(); ++ei) {
        const Edge& e = f.edges[ei];
        if (e.above == flow_none)
            out << "  top" << ei << " [shape=none label=\"\"];\n";
        if (e.below == flow_none)
            out << "  bot" << ei << " [shape=none label=\"\"];\n";
    }
    for (uint32_t ei = 0; ei < f.edges.size(); ++ei) {
        const Edge& e = f.edges[ei];
        out << "  ";
        if (e.above == flow_none)
            out << "top" << ei;
        else
            out << "v" << e.above;
        out << " -> ";
        if (e.below == flow_none)
            out << "bot" << ei;
        else
            out << "v" << e.below;
        out << " [label=\"" << e.label.text() << "\"";
        if (pol) out << " color=\"" << (pol->sign[ei] > 0 ? "#2060c0" : "#c03020") << "\"";
        out << "];\n";
    }
    out << "}\n";
    return out.str();
}

// ---- weakening and coweakening reductions ----------------------------------------

// The seven reduction rules, named by the vertex pair they remove: a
// weakening feeding a vertex from above, or a vertex feeding a coweakening.
enum class ReductionRule : uint8_t {
    WeakeningContraction,
    WeakeningCut,
    WeakeningCoweakening,
    WeakeningCocontraction,
    CocontractionCoweakening,
    IdentityCoweakening,
    ContractionCoweakening,
};

inline const char* reduction_rule_name(ReductionRule r) {
    switch (r) {
        case ReductionRule::WeakeningContraction: return "aw-down/ac-down";
        case ReductionRule::WeakeningCut: return "aw-down/ai-up";
        case ReductionRule::WeakeningCoweakening: return "aw-down/aw-up";
        case ReductionRule::WeakeningCocontraction: return "aw-down/ac-up";
        case ReductionRule::CocontractionCoweakening: return "ac-up/aw-up";
        case ReductionRule::IdentityCoweakening: return "ai-down/aw-up";
        case ReductionRule::ContractionCoweakening: return "ac-down/aw-up";
    }
    return "?";
}

struct Reduction {
    ReductionRule rule;
    uint32_t edge;   // the edge joining the two vertices
    uint32_t above;  // its upper vertex
    uint32_t below;  // its lower vertex
};

inline std::optional<ReductionRule> classify_redex(VertexKind above, VertexKind below) {
    if (above == VertexKind::Weakening) {
        switch (below) {
            case VertexKind::Contraction: return ReductionRule::WeakeningContraction;
            case VertexKind::Cut: return ReductionRule::WeakeningCut;
            case VertexKind::Coweakening: return ReductionRule::WeakeningCoweakening;
            case VertexKind::Cocontraction: return ReductionRule::WeakeningCocontraction;
            default: return std::nullopt;
        }
    }
    if (below == VertexKind::Coweakening) {
        switch (above) {
            case VertexKind::Cocontraction: return ReductionRule::CocontractionCoweakening;
            case VertexKind::Identity: return ReductionRule::IdentityCoweakening;
            case VertexKind::Contraction: return ReductionRule::ContractionCoweakening;
            default: return std::nullopt;
        }
    }
    return std::nullopt;
}

// All redexes of the flow in edge id order.
inline std::vector<Reduction> find_reductions(const Flow& f) {
    std::vector<Reduction> out;
    for (uint32_t ei = 0; ei < f.edges.size(); ++ei) {
        const Edge& e = f.edges[ei];
        if (e.above == flow_none || e.below == flow_none) continue;
        auto rule = classify_redex(f.vertices[e.above].kind, f.vertices[e.below].kind);
        if (rule) out.push_back(Reduction{*rule, ei, e.above, e.below});
    }
    return out;
}

// Result of one graph rewrite.  Vertices and edges are reindexed densely;
// the maps send old ids to new ids, -1 when removed.  When a rewrite fuses
// two edges into one, both old ids map to the same new id.
struct SurgeryResult {
    Flow flow;
    std::vector<int32_t> vertex_map;
    std::vector<int32_t> edge_map;
};

// Applies one reduction to the flow alone.  The derivation-side counterpart
// is reduce_derivation; flow_reduce keeps the two in lockstep.
inline SurgeryResult apply_reduction(const Flow& f, const Reduction& r) {
    const Vertex& va = f.vertices[r.above];
    const Vertex& vb = f.vertices[r.below];

    auto other_up = [&](const Vertex& v) { return v.up[v.up[0] == r.edge ? 1 : 0]; };
    auto other_down = [&](const Vertex& v) { return v.down[v.down[0] == r.edge ? 1 : 0]; };

    // merge_from fuses into merge_into; the fused edge keeps merge_into's
    // upper endpoint and takes merge_from's lower endpoint.  Fresh vertices
    // are appended after the survivors and adopt the listed old edge.
    uint32_t merge_into = flow_none, merge_from = flow_none;
    struct NewVertex {
        VertexKind kind;
        uint32_t up = flow_none;
        uint32_t down = flow_none;
    };
    std::vector<NewVertex> fresh;

    switch (r.rule) {
        case ReductionRule::WeakeningContraction:
            merge_into = other_up(vb);
            merge_from = vb.down[0];
            break;
        case ReductionRule::WeakeningCut:
            fresh.push_back({VertexKind::Coweakening, other_up(vb), flow_none});
            break;
        case ReductionRule::WeakeningCoweakening:
            break;
        case ReductionRule::WeakeningCocontraction:
            fresh.push_back({VertexKind::Weakening, flow_none, vb.down[0]});
            fresh.push_back({VertexKind::Weakening, flow_none, vb.down[1]});
            break;
        case ReductionRule::CocontractionCoweakening:
            merge_into = va.up[0];
            merge_from = other_down(va);
            break;
        case ReductionRule::IdentityCoweakening:
            fresh.push_back({VertexKind::Weakening, flow_none, other_down(va)});
            break;
        case ReductionRule::ContractionCoweakening:
            fresh.push_back({VertexKind::Coweakening, va.up[0], flow_none});
            fresh.push_back({VertexKind::Coweakening, va.up[1], flow_none});
            break;
    }

    SurgeryResult out;
    out.vertex_map.assign(f.vertices.size(), -1);
    out.edge_map.assign(f.edges.size(), -1);

    // Surviving edges, still carrying old vertex ids in their endpoints.
    for (uint32_t ei = 0; ei < f.edges.size(); ++ei) {
        if (ei == r.edge || ei == merge_from) continue;
        out.edge_map[ei] = static_cast<int32_t>(out.flow.edges.size());
        out.flow.edges.push_back(f.edges[ei]);
    }
    if (merge_from != flow_none) {
        out.edge_map[merge_from] = out.edge_map[merge_into];
        Edge& m = out.flow.edges[static_cast<uint32_t>(out.edge_map[merge_into])];
        m.below = f.edges[merge_from].below;
        m.below_port = f.edges[merge_from].below_port;
    }

    // Surviving vertices; their incident edges all survive, so the port
    // references remap through edge_map.
    for (uint32_t vi = 0; vi < f.vertices.size(); ++vi) {
        if (vi == r.above || vi == r.below) continue;
        out.vertex_map[vi] = static_cast<int32_t>(out.flow.vertices.size());
        Vertex v = f.vertices[vi];
        v.step = flow_none;  // step indices no longer line up after surgery
        for (uint8_t q = 0; q < 2; ++q) {
            if (v.up[q] != flow_none) v.up[q] = static_cast<uint32_t>(out.edge_map[v.up[q]]);
            if (v.down[q] != flow_none) v.down[q] = static_cast<uint32_t>(out.edge_map[v.down[q]]);
        }
        out.flow.vertices.push_back(v);
    }

    // Edge endpoints: removed vertices leave a dangle (fresh vertices
    // overwrite theirs below).
    for (Edge& e : out.flow.edges) {
        if (e.above != flow_none) {
            int32_t nv = out.vertex_map[e.above];
            if (nv < 0) {
                e.above = flow_none;
                e.above_port = 0;
            } else {
                e.above = static_cast<uint32_t>(nv);
            }
        }
        if (e.below != flow_none) {
            int32_t nv = out.vertex_map[e.below];
            if (nv < 0) {
                e.below = flow_none;
                e.below_port = 0;
            } else {
                e.below = static_cast<uint32_t>(nv);
            }
        }
    }

    for (const NewVertex& nv : fresh) {
        uint32_t vi = static_cast<uint32_t>(out.flow.vertices.size());
        Vertex vx{nv.kind};
        if (nv.up != flow_none) {
            vx.up[0] = static_cast<uint32_t>(out.edge_map[nv.up]);
            out.flow.edges[vx.up[0]].below = vi;
            out.flow.edges[vx.up[0]].below_port = 0;
        }
        if (nv.down != flow_none) {
            vx.down[0] = static_cast<uint32_t>(out.edge_map[nv.down]);
            out.flow.edges[vx.down[0]].above = vi;
            out.flow.edges[vx.down[0]].above_port = 0;
        }
        out.flow.vertices.push_back(vx);
    }

    return out;
}

// ---- derivation-side reduction -----------------------------------------------

namespace detail {

// Per-line leaf replacements for substituting a formula along flow edges.
inline std::vector<std::pair<uint32_t, Formula>> edge_replacements(
    const std::vector<uint32_t>& line_occ, const std::vector<Formula>& by_edge) {
    std::vector<std::pair<uint32_t, Formula>> repl;
    for (uint32_t k = 0; k < line_occ.size(); ++k) {
        Formula b = by_edge[line_occ[k]];
        if (b) repl.emplace_back(k, b);
    }
    return repl;
}

}  // namespace detail

// Rewrites the derivation to match one flow reduction: the unit (f below a
// weakening, t above a coweakening) is substituted along the joining edge,
// the step whose active occurrence disappears becomes trivial and is
// dropped, and the other endpoint's step is replaced by its unit form.
// Premiss and conclusion are unchanged.
inline Derivation reduce_derivation(const Derivation& d, const Flow& fl,
                                    const OccurrenceMap& occ, const Reduction& r) {
    Formula unit =
        fl.vertices[r.above].kind == VertexKind::Weakening ? f_false() : f_true();

    std::vector<Formula> by_edge(fl.edges.size(), nullptr);
    by_edge[r.edge] = unit;
    std::vector<Formula> line(d.steps.size() + 1);
    line[0] = d.premiss;
    for (size_t i = 0; i <= d.steps.size(); ++i) {
        Formula orig = i == 0 ? d.premiss : d.steps[i - 1].conclusion;
        line[i] = substitute_at_indices(orig, detail::edge_replacements(occ.lines[i], by_edge));
    }

    size_t step_above = fl.vertices[r.above].step;
    size_t step_below = fl.vertices[r.below].step;

    Builder b(line[0]);
    for (size_t i = 0; i < d.steps.size(); ++i) {
        const Step& s = d.steps[i];
        const Path& p = s.redex;
        Formula target = line[i + 1];

        if (i == step_above) {
            switch (fl.vertices[r.above].kind) {
                case VertexKind::Weakening:
                    // f => f after substitution: vanishes.
                    if (b.current() != target) throw std::logic_error("reduce: weakening stays");
                    break;
                case VertexKind::Cocontraction:
                    // a => (a.t) or (t.a): an equality step.
                    b.eq_to(target);
                    break;
                case VertexKind::Contraction:
                    // [a.a] => t: two coweakenings.
                    b.rewrite(RuleId::aw_up, extend(p, 0));
                    b.rewrite(RuleId::aw_up, extend(p, 1));
                    b.eq_to(target);
                    break;
                case VertexKind::Identity: {
                    // t => [t.x] or [x.t]: one weakening below an equality.
                    Formula goal = subformula_at(target, p);
                    if (goal->left == f_true()) {
                        b.eq_to(replace_at(b.current(), p, f_or(f_true(), f_false())));
                        b.aw_down(extend(p, 1), goal->right->literal());
                    } else {
                        b.eq_to(replace_at(b.current(), p, f_or(f_false(), f_true())));
                        b.aw_down(extend(p, 0), goal->left->literal());
                    }
                    if (b.current() != target) throw std::logic_error("reduce: identity patch");
                    break;
                }
                default: throw std::logic_error("reduce: unexpected upper vertex");
            }
            continue;
        }
        if (i == step_below) {
            switch (fl.vertices[r.below].kind) {
                case VertexKind::Coweakening:
                    if (unit == f_true()) {
                        // t => t after substitution: vanishes.
                        if (b.current() != target)
                            throw std::logic_error("reduce: coweakening stays");
                    } else {
                        // f => t (fed by a weakening): close with one switch.
                        b.eq_to(replace_at(b.current(), p,
                                           f_and(f_false(), f_or(f_true(), f_true()))));
                        b.rewrite(RuleId::sw, p);
                        b.eq_to(target);
                    }
                    break;
                case VertexKind::Contraction:
                    // [f.a] or [a.f] => a: an equality step.
                    b.eq_to(target);
                    break;
                case VertexKind::Cocontraction:
                    // f => (a.a): two weakenings below an equality.
                    b.eq_to(replace_at(b.current(), p, f_and(f_false(), f_false())));
                    b.aw_down(extend(p, 0), subformula_at(target, p)->left->literal());
                    b.aw_down(extend(p, 1), subformula_at(target, p)->right->literal());
                    if (b.current() != target) throw std::logic_error("reduce: cocontraction patch");
                    break;
                case VertexKind::Cut: {
                    // (f.x) or (x.f) => f: one coweakening above an equality.
                    Formula pr = subformula_at(b.current(), p);
                    b.rewrite(RuleId::aw_up, extend(p, pr->left == f_false() ? 1 : 0));
                    b.eq_to(target);
                    break;
                }
                default: throw std::logic_error("reduce: unexpected lower vertex");
            }
            continue;
        }

        if (target == b.current()) continue;  // equality step that collapsed
        b.push(s.rule, p, target);
    }
    if (b.current() != d.conclusion()) throw std::logic_error("reduce: conclusion changed");
    return b.take();
}

// Applies the weakening/coweakening rewrites to fixpoint, transforming the
// derivation at every step and keeping flow, occurrence map and derivation
// synchronised.  Deterministic: always the redex on the smallest edge id.
struct ReduceResult {
    Flow flow;
    OccurrenceMap occ;
    Derivation derivation;
    uint64_t reductions = 0;
};

inline ReduceResult flow_reduce(const Derivation& d) {
    ReduceResult out;
    out.derivation = d;
    for (;;) {
        auto [fl, occ] = extract_flow(out.derivation);
        auto redexes = find_reductions(fl);
        if (redexes.empty()) {
            out.flow = std::move(fl);
            out.occ = std::move(occ);
            return out;
        }
        out.derivation = reduce_derivation(out.derivation, fl, occ, redexes.front());
        ++out.reductions;
    }
}

inline std::pair<Flow, Derivation> flow_reduce(const Flow& f, const Derivation& d) {
    if (f.vertices.size() != extract_flow(d).first.vertices.size())
        throw std::invalid_argument("flow_reduce: flow does not match the derivation");
    ReduceResult r = flow_reduce(d);
    return {std::move(r.flow), std::move(r.derivation)};
}

// ---- flow-guided substitution --------------------------------------------------

// Replaces, throughout the derivation, every atom occurrence traced by the
// given connected components: occurrences of the component's plain literal
// become beta, negated ones its De Morgan dual.  Structural steps riding a
// replaced component turn into the corresponding non-atomic expansions; all
// other steps survive the rewriting of their context.
inline Derivation substitute_via_flow(
    const Derivation& d,
    const std::vector<std::pair<std::vector<uint32_t>, Formula>>& subs) {
    auto [fl, occ] = extract_flow(d);

    std::vector<Formula> by_edge(fl.edges.size(), nullptr);
    for (const auto& [comp, beta] : subs) {
        if (comp.empty()) continue;
        uint32_t atom = fl.edges[comp.front()].label.atom;
        Formula beta_dual = dual(beta);
        for (uint32_t e : comp) {
            if (e >= fl.edges.size())
                throw std::invalid_argument("substitute_via_flow: edge outside the flow");
            if (fl.edges[e].label.atom != atom)
                throw std::invalid_argument(
                    "substitute_via_flow: component mixes distinct atoms");
            if (by_edge[e])
                throw std::invalid_argument("substitute_via_flow: components overlap");
            by_edge[e] = fl.edges[e].label.neg ? beta_dual : beta;
        }
    }

    // Every vertex must be wholly in or wholly out of the substitution.
    for (const Vertex& v : fl.vertices) {
        int in = 0, total = 0;
        for (uint32_t e : v.up)
            if (e != flow_none) ++total, in += by_edge[e] != nullptr;
        for (uint32_t e : v.down)
            if (e != flow_none) ++total, in += by_edge[e] != nullptr;
        if (in != 0 && in != total)
            throw std::invalid_argument(
                "substitute_via_flow: component is not closed under its vertices");
    }

    std::vector<Formula> line(d.steps.size() + 1);
    for (size_t i = 0; i <= d.steps.size(); ++i) {
        Formula orig = i == 0 ? d.premiss : d.steps[i - 1].conclusion;
        line[i] = substitute_at_indices(orig, detail::edge_replacements(occ.lines[i], by_edge));
    }

    // Vertices in step order double as the "is this step active" index.
    std::vector<const Vertex*> vertex_of_step(d.steps.size(), nullptr);
    for (const Vertex& v : fl.vertices) vertex_of_step[v.step] = &v;

    Builder b(line[0]);
    for (size_t i = 0; i < d.steps.size(); ++i) {
        const Step& s = d.steps[i];
        Formula target = line[i + 1];
        const Vertex* v = vertex_of_step[i];
        Formula repl = nullptr;
        if (v) {
            uint32_t probe = v->up[0] != flow_none ? v->up[0] : v->down[0];
            repl = by_edge[probe];
        }
        if (!repl) {
            if (target == b.current()) continue;  // equality step that collapsed
            b.push(s.rule, s.redex, target);
            continue;
        }
        switch (v->kind) {
            case VertexKind::Identity:
                b.splice(expand_gi_down(by_edge[v->down[0]]), s.redex);
                break;
            case VertexKind::Cut:
                b.splice(expand_gi_up(by_edge[v->up[0]]), s.redex);
                break;
            case VertexKind::Weakening:
                b.splice(expand_gw_down(by_edge[v->down[0]]), s.redex);
                break;
            case VertexKind::Coweakening:
                b.splice(expand_gw_up(by_edge[v->up[0]]), s.redex);
                break;
            case VertexKind::Contraction:
                b.splice(expand_gc_down(by_edge[v->down[0]]), s.redex);
                break;
            case VertexKind::Cocontraction:
                b.splice(expand_gc_up(by_edge[v->up[0]]), s.redex);
                break;
        }
        if (b.current() != target)
            throw std::logic_error("substitute_via_flow: expansion misses the substituted line");
    }
    return b.take();
}

inline Derivation substitute_via_flow(const Derivation& d, const std::vector<uint32_t>& comp,
                                      Formula beta) {
    return substitute_via_flow(d, {{comp, beta}});
}

}  // namespace sks
