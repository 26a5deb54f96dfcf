#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sks/corpus.hpp"
#include "sks/flow.hpp"

#include "fig_derivations.hpp"

using namespace sks;

namespace {

std::map<VertexKind, int> kind_counts(const Flow& f) {
    std::map<VertexKind, int> c;
    for (const Vertex& v : f.vertices) c[v.kind]++;
    return c;
}

int structural_steps(const Derivation& d) {
    int n = 0;
    for (const Step& s : d.steps) n += is_structural(s.rule);
    return n;
}

// Every edge is reachable from some line occurrence, and every line maps
// exactly its atom leaves.
void check_occurrence_map(const Derivation& d, const Flow& fl, const OccurrenceMap& occ) {
    REQUIRE(occ.lines.size() == d.steps.size() + 1);
    std::vector<bool> hit(fl.edges.size(), false);
    for (size_t i = 0; i < occ.lines.size(); ++i) {
        Formula line = i == 0 ? d.premiss : d.steps[i - 1].conclusion;
        REQUIRE(occ.lines[i].size() == line->atom_leaves);
        for (uint32_t k = 0; k < occ.lines[i].size(); ++k) {
            uint32_t e = occ.lines[i][k];
            REQUIRE(e < fl.edges.size());
            hit[e] = true;
            // The traced label matches the literal sitting at the leaf.
            REQUIRE(fl.edges[e].label == atom_at(line, k));
        }
    }
    REQUIRE(std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }));
}

}  // namespace

TEST_CASE("extraction: identity-cut detour yields the parallel pair") {
    Derivation d = testutil::identity_cut_detour();
    auto [fl, occ] = extract_flow(d);

    REQUIRE(fl.vertices.size() == 2);
    CHECK(fl.vertices[0].kind == VertexKind::Identity);
    CHECK(fl.vertices[1].kind == VertexKind::Cut);
    REQUIRE(fl.edges.size() == 2);
    // Both edges run from the identity into the cut; nothing dangles.
    for (const Edge& e : fl.edges) {
        CHECK(e.above == 0);
        CHECK(e.below == 1);
    }
    std::set<std::string> labels{fl.edges[0].label.text(), fl.edges[1].label.text()};
    CHECK(labels == std::set<std::string>{"a", "-a"});

    CHECK(validate(fl).ok);
    CHECK(check_labels(fl).ok);
    CHECK(components(fl).size() == 1);
    CHECK(polarity_assignment_count(fl) == 2);
    check_occurrence_map(d, fl, occ);
}

TEST_CASE("extraction: a single identity dangles two labelled edges") {
    Builder b(f_true());
    b.ai_down({}, Literal{AtomTable::instance().id("a"), false});
    Derivation d = b.take();

    auto [fl, occ] = extract_flow(d);
    REQUIRE(fl.vertices.size() == 1);
    CHECK(fl.vertices[0].kind == VertexKind::Identity);
    REQUIRE(fl.edges.size() == 2);
    CHECK(fl.edges[0].label.text() == "a");
    CHECK(fl.edges[1].label.text() == "-a");
    for (const Edge& e : fl.edges) {
        CHECK(e.above == 0);
        CHECK(e.below == flow_none);
    }
    check_occurrence_map(d, fl, occ);
}

TEST_CASE("extraction: logical and equality steps leave parallel free edges") {
    Builder b(parse("(a.[b.c])"));
    b.rewrite(RuleId::sw, {});
    b.eq_to(parse("[c.(a.b)]"));
    Derivation d = b.take();

    auto [fl, occ] = extract_flow(d);
    CHECK(fl.vertices.empty());
    REQUIRE(fl.edges.size() == 3);
    for (const Edge& e : fl.edges) {
        CHECK(e.above == flow_none);
        CHECK(e.below == flow_none);
    }
    // The final commutation moves c in front: edge of c is conclusion leaf 0.
    CHECK(occ.lines.back() == std::vector<uint32_t>{2, 0, 1});
    check_occurrence_map(d, fl, occ);
}

TEST_CASE("extraction: contraction detour has the expected vertex census") {
    Derivation d = testutil::contraction_detour();
    auto [fl, occ] = extract_flow(d);

    auto c = kind_counts(fl);
    CHECK(c[VertexKind::Identity] == 1);
    CHECK(c[VertexKind::Cut] == 2);
    CHECK(c[VertexKind::Contraction] == 1);
    CHECK(c[VertexKind::Cocontraction] == 1);
    CHECK(fl.vertices.size() == static_cast<size_t>(structural_steps(d)));

    CHECK(validate(fl).ok);
    CHECK(check_labels(fl).ok);
    CHECK(components(fl).size() == 1);  // everything traces the one atom pair
    check_occurrence_map(d, fl, occ);
}

TEST_CASE("extraction: nonatomic cocontraction splits into three vertices") {
    Derivation d = testutil::cocontraction_example();
    auto [fl, occ] = extract_flow(d);

    auto c = kind_counts(fl);
    CHECK(c[VertexKind::Cocontraction] == 3);
    CHECK(fl.vertices.size() == 3);
    CHECK(components(fl).size() == 3);
    CHECK(polarity_assignment_count(fl) == 8);
    check_occurrence_map(d, fl, occ);
}

TEST_CASE("extraction rejects general rule steps") {
    Builder b(f_false());
    b.gw_down({}, parse("[a.b]"));
    Derivation d = b.take();
    CHECK_THROWS_AS(extract_flow(d), std::invalid_argument);
}

TEST_CASE("extraction invariants hold on random proofs") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 30; ++i) {
        Derivation d = random_proof(rng);
        REQUIRE(check_derivation(d).valid);
        auto [fl, occ] = extract_flow(d);

        CHECK(fl.vertices.size() == static_cast<size_t>(structural_steps(d)));
        CHECK(validate(fl).ok);
        CHECK(check_labels(fl).ok);
        check_occurrence_map(d, fl, occ);

        // Component purity: one atom per component (both polarities).
        for (const auto& comp : components(fl)) {
            uint32_t atom = fl.edges[comp.front()].label.atom;
            for (uint32_t e : comp) CHECK(fl.edges[e].label.atom == atom);
        }
    }
}

TEST_CASE("validate rejects a directed cycle") {
    // A cocontraction feeding a contraction that feeds it back.
    Flow f;
    f.vertices.resize(2);
    f.edges.resize(4);
    Literal a{AtomTable::instance().id("a"), false};

    Vertex& cc = f.vertices[0];
    Vertex& c = f.vertices[1];
    cc.kind = VertexKind::Cocontraction;
    c.kind = VertexKind::Contraction;

    f.edges[0] = Edge{a, 0, 0, 1, 0};          // cocontraction -> contraction
    f.edges[1] = Edge{a, 1, 0, 0, 0};          // contraction -> cocontraction
    f.edges[2] = Edge{a, 0, 1, flow_none, 0};  // cocontraction's other output
    f.edges[3] = Edge{a, flow_none, 0, 1, 1};  // contraction's other input
    cc.up = {1, flow_none};
    cc.down = {0, 2};
    c.up = {0, 3};
    c.down = {1, flow_none};

    FlowCheck r = validate(f);
    REQUIRE_FALSE(r.ok);
    CHECK(r.error == "cycle found");
}

TEST_CASE("validate rejects an identity feeding a contraction") {
    // The identity wants opposite polarities on its edges, the contraction
    // equal ones; no assignment exists.
    Flow f;
    f.vertices.resize(2);
    f.edges.resize(3);
    Literal a{AtomTable::instance().id("a"), false};

    f.vertices[0].kind = VertexKind::Identity;
    f.vertices[1].kind = VertexKind::Contraction;
    f.edges[0] = Edge{a, 0, 0, 1, 0};
    f.edges[1] = Edge{a, 0, 1, 1, 1};
    f.edges[2] = Edge{a, 1, 0, flow_none, 0};
    f.vertices[0].down = {0, 1};
    f.vertices[1].up = {0, 1};
    f.vertices[1].down = {2, flow_none};

    FlowCheck r = validate(f);
    REQUIRE_FALSE(r.ok);
    CHECK(r.error == "no polarity assignment exists");
}

TEST_CASE("validate catches arity and wiring mistakes") {
    Flow f;
    f.vertices.resize(1);
    f.vertices[0].kind = VertexKind::Weakening;  // wants one lower edge
    CHECK_FALSE(validate(f).ok);

    f.edges.resize(1);
    f.edges[0] = Edge{Literal{AtomTable::instance().id("a"), false}, 0, 0, flow_none, 0};
    f.vertices[0].down = {0, flow_none};
    CHECK(validate(f).ok);

    f.edges[0].above_port = 1;  // back-reference now inconsistent
    CHECK_FALSE(validate(f).ok);
}

TEST_CASE("polarity: count, canonical choice, and unsatisfiable predicates") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 12; ++i) {
        Derivation d = random_proof(rng);
        auto [fl, occ] = extract_flow(d);
        size_t c = components(fl).size();
        CHECK(polarity_assignment_count(fl) == (uint64_t{1} << c));

        PolarityAssignment pol = canonical_polarity(fl);
        for (uint32_t e = 0; e < fl.edges.size(); ++e)
            CHECK((pol.sign[e] > 0) == !fl.edges[e].label.neg);
    }

    // Any orientation is accepted by the constant predicate...
    auto [fl, occ] = extract_flow(testutil::identity_cut_detour());
    CHECK(choose_polarity(fl, [](const auto&, const auto&) { return true; }).has_value());
    // ...but an identity can never have both edges negative.
    auto all_negative = [&](const std::vector<uint32_t>& comp, const std::vector<int8_t>& sign) {
        for (uint32_t e : comp)
            if (sign[e] > 0) return false;
        return true;
    };
    CHECK_FALSE(choose_polarity(fl, all_negative).has_value());
}

TEST_CASE("DOT export is deterministic and complete") {
    Builder b(f_true());
    b.ai_down({}, Literal{AtomTable::instance().id("a"), false});
    auto [fl, occ] = extract_flow(b.take());

    std::string dot = to_dot(fl);
    CHECK(dot ==
          "digraph flow {\n"
          "  rankdir=TB;\n"
          "  node [fontsize=10];\n"
          "  v0 [shape=triangle label=\"identity\"];\n"
          "  bot0 [shape=none label=\"\"];\n"
          "  bot1 [shape=none label=\"\"];\n"
          "  v0 -> bot0 [label=\"a\"];\n"
          "  v0 -> bot1 [label=\"-a\"];\n"
          "}\n");

    PolarityAssignment pol = canonical_polarity(fl);
    std::string coloured = to_dot(fl, &pol);
    CHECK(coloured.find("#2060c0") != std::string::npos);
    CHECK(coloured.find("#c03020") != std::string::npos);
}

// ---- reductions -----------------------------------------------------------------

namespace {

// Runs flow_reduce and checks the synchronisation invariants.
ReduceResult reduce_checked(const Derivation& d) {
    ReduceResult r = flow_reduce(d);
    REQUIRE(check_derivation(r.derivation).valid);
    CHECK(r.derivation.premiss == d.premiss);
    CHECK(r.derivation.conclusion() == d.conclusion());
    CHECK(find_reductions(r.flow).empty());
    CHECK(validate(r.flow).ok);
    return r;
}

}  // namespace

TEST_CASE("reduce: identity feeding a coweakening becomes a weakening") {
    Builder b(f_true());
    b.ai_down({}, Literal{AtomTable::instance().id("a"), false});
    b.rewrite(RuleId::aw_up, {0});  // [t.-a]
    Derivation d = b.take();

    ReduceResult r = reduce_checked(d);
    CHECK(r.reductions == 1);
    REQUIRE(r.flow.vertices.size() == 1);
    CHECK(r.flow.vertices[0].kind == VertexKind::Weakening);
    REQUIRE(r.flow.edges.size() == 1);
    CHECK(r.flow.edges[0].label.text() == "-a");
}

TEST_CASE("reduce: weakening feeding a contraction cancels both") {
    Literal a{AtomTable::instance().id("a"), false};
    Builder b(f_atom(a));
    b.eq_to(parse("[a.f]"));
    b.aw_down({1}, a);
    b.rewrite(RuleId::ac_down, {});
    Derivation d = b.take();

    ReduceResult r = reduce_checked(d);
    CHECK(r.reductions == 1);
    CHECK(r.flow.vertices.empty());
    CHECK(r.flow.edges.size() == 1);
    // Only the two equality steps survive.
    for (const Step& s : r.derivation.steps) CHECK(s.rule == RuleId::eq);
}

TEST_CASE("reduce: weakening feeding a cut leaves a coweakening") {
    Builder b(parse("(f.-a)"));
    b.aw_down({0}, Literal{AtomTable::instance().id("a"), false});
    b.rewrite(RuleId::ai_up, {});
    Derivation d = b.take();

    ReduceResult r = reduce_checked(d);
    CHECK(r.reductions == 1);
    REQUIRE(r.flow.vertices.size() == 1);
    CHECK(r.flow.vertices[0].kind == VertexKind::Coweakening);
    auto counts = check_derivation(r.derivation).rule_counts;
    CHECK(counts[RuleId::aw_up] == 1);
    CHECK(counts[RuleId::ai_up] == 0);
    CHECK(counts[RuleId::aw_down] == 0);
}

TEST_CASE("reduce: cocontraction feeding a coweakening cancels both") {
    Literal a{AtomTable::instance().id("a"), false};
    Builder b(f_atom(a));
    b.rewrite(RuleId::ac_up, {});
    b.rewrite(RuleId::aw_up, {0});
    b.eq_to(f_atom(a));
    Derivation d = b.take();

    ReduceResult r = reduce_checked(d);
    CHECK(r.reductions == 1);
    CHECK(r.flow.vertices.empty());
    CHECK(r.flow.edges.size() == 1);
}

TEST_CASE("reduce: weakening feeding a coweakening closes through a switch") {
    Literal a{AtomTable::instance().id("a"), false};
    Builder b(f_atom("b"));
    b.eq_to(parse("[b.f]"));
    b.aw_down({1}, a);
    b.rewrite(RuleId::aw_up, {1});  // [b.t]
    Derivation d = b.take();

    ReduceResult r = reduce_checked(d);
    CHECK(r.reductions == 1);
    CHECK(r.flow.vertices.empty());
    auto counts = check_derivation(r.derivation).rule_counts;
    CHECK(counts[RuleId::sw] == 1);
    CHECK(counts[RuleId::aw_down] == 0);
    CHECK(counts[RuleId::aw_up] == 0);
}

TEST_CASE("reduce: weakening feeding a cocontraction forks into two weakenings") {
    Literal a{AtomTable::instance().id("a"), false};
    Builder b(f_atom("b"));
    b.eq_to(parse("[b.f]"));
    b.aw_down({1}, a);
    b.rewrite(RuleId::ac_up, {1});  // [b.(a.a)]
    Derivation d = b.take();

    ReduceResult r = reduce_checked(d);
    CHECK(r.reductions == 1);
    auto c = kind_counts(r.flow);
    CHECK(c[VertexKind::Weakening] == 2);
    CHECK(r.flow.vertices.size() == 2);
    auto counts = check_derivation(r.derivation).rule_counts;
    CHECK(counts[RuleId::aw_down] == 2);
    CHECK(counts[RuleId::ac_up] == 0);
}

TEST_CASE("reduce: contraction feeding a coweakening forks into two coweakenings") {
    Builder b(parse("[a.a]"));
    b.rewrite(RuleId::ac_down, {});
    b.rewrite(RuleId::aw_up, {});
    Derivation d = b.take();

    ReduceResult r = reduce_checked(d);
    CHECK(r.reductions == 1);
    auto c = kind_counts(r.flow);
    CHECK(c[VertexKind::Coweakening] == 2);
    auto counts = check_derivation(r.derivation).rule_counts;
    CHECK(counts[RuleId::aw_up] == 2);
    CHECK(counts[RuleId::ac_down] == 0);
}

TEST_CASE("reduce: flows without weakening pairs are left alone") {
    for (auto make : {testutil::identity_cut_detour, testutil::contraction_detour,
                      testutil::cocontraction_example}) {
        Derivation d = make();
        ReduceResult r = flow_reduce(d);
        CHECK(r.reductions == 0);
        CHECK(r.derivation.steps.size() == d.steps.size());
    }
}

TEST_CASE("reduce: fixpoint on random proofs preserves endpoints and shrinks the flow") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 25; ++i) {
        Derivation d = random_proof(rng);
        auto [fl0, occ0] = extract_flow(d);
        ReduceResult r = reduce_checked(d);
        CHECK(r.flow.vertices.size() + r.flow.edges.size() <=
              fl0.vertices.size() + fl0.edges.size());
    }
}

TEST_CASE("reduce: graph surgery stays in lockstep with the derivation rewrite") {
    std::mt19937_64 rng(31);
    int exercised = 0;
    for (int i = 0; i < 40; ++i) {
        Derivation d = random_proof(rng);
        for (int round = 0; round < 4; ++round) {
            auto [fl, occ] = extract_flow(d);
            auto redexes = find_reductions(fl);
            if (redexes.empty()) break;
            ++exercised;

            SurgeryResult s = apply_reduction(fl, redexes.front());
            REQUIRE(validate(s.flow).ok);
            d = reduce_derivation(d, fl, occ, redexes.front());
            REQUIRE(check_derivation(d).valid);

            auto [fl2, occ2] = extract_flow(d);
            CHECK(kind_counts(fl2) == kind_counts(s.flow));
            CHECK(fl2.edges.size() == s.flow.edges.size());
        }
    }
    CHECK(exercised > 20);
}

// ---- confluence -----------------------------------------------------------------

namespace {

// Graph isomorphism on flows: vertex kinds, edge labels, dangling pattern
// and wiring must correspond; ports of equal-arity-2 vertices may swap.
// Backtracking over the vertex correspondence; fine for the small flows the
// confluence search produces.
bool flows_isomorphic(const Flow& A, const Flow& B) {
    if (A.vertices.size() != B.vertices.size() || A.edges.size() != B.edges.size()) return false;
    auto edge_sig = [](const Flow& F) {
        std::multiset<std::string> s;
        for (const Edge& e : F.edges)
            s.insert(e.label.text() + (e.above == flow_none ? "^" : "-") +
                     (e.below == flow_none ? "$" : "-"));
        return s;
    };
    if (edge_sig(A) != edge_sig(B)) return false;

    size_t n = A.vertices.size();
    std::vector<int> vmap(n, -1);
    std::vector<bool> vused(n, false);
    std::vector<int> emap(A.edges.size(), -1);
    std::vector<bool> eused(B.edges.size(), false);

    auto edge_compatible = [&](uint32_t ea, uint32_t eb) {
        if (ea == flow_none || eb == flow_none) return ea == eb;
        const Edge& x = A.edges[ea];
        const Edge& y = B.edges[eb];
        if (!(x.label == y.label)) return false;
        if ((x.above == flow_none) != (y.above == flow_none)) return false;
        if ((x.below == flow_none) != (y.below == flow_none)) return false;
        if (emap[ea] >= 0) return emap[ea] == static_cast<int>(eb);
        return !eused[eb];
    };

    std::function<bool(size_t)> assign = [&](size_t vi) -> bool {
        if (vi == n) return true;
        for (size_t wj = 0; wj < n; ++wj) {
            if (vused[wj] || B.vertices[wj].kind != A.vertices[vi].kind) continue;
            const Vertex& va = A.vertices[vi];
            const Vertex& vb = B.vertices[wj];
            uint8_t ua = up_arity(va.kind), da = down_arity(va.kind);
            for (int up_swap = 0; up_swap < (ua == 2 ? 2 : 1); ++up_swap) {
                for (int down_swap = 0; down_swap < (da == 2 ? 2 : 1); ++down_swap) {
                    std::array<std::pair<uint32_t, uint32_t>, 4> pairs;
                    size_t np = 0;
                    bool ok = true;
                    for (uint8_t q = 0; q < ua && ok; ++q) {
                        uint32_t ea = va.up[q], eb = vb.up[up_swap ? 1 - q : q];
                        ok = edge_compatible(ea, eb);
                        if (ok && ea != flow_none && emap[ea] < 0) pairs[np++] = {ea, eb};
                    }
                    for (uint8_t q = 0; q < da && ok; ++q) {
                        uint32_t ea = va.down[q], eb = vb.down[down_swap ? 1 - q : q];
                        ok = edge_compatible(ea, eb);
                        if (ok && ea != flow_none && emap[ea] < 0) {
                            // The same new pair may appear twice (parallel edges).
                            bool dup = false;
                            for (size_t k = 0; k < np; ++k)
                                if (pairs[k].first == ea) dup = pairs[k].second == eb, ok = dup;
                            if (ok && !dup) pairs[np++] = {ea, eb};
                        }
                    }
                    // Reject two new pairs claiming one target edge.
                    for (size_t x = 0; ok && x < np; ++x)
                        for (size_t y = x + 1; ok && y < np; ++y)
                            if (pairs[x].second == pairs[y].second) ok = false;
                    if (!ok) continue;
                    for (size_t k = 0; k < np; ++k) {
                        emap[pairs[k].first] = static_cast<int>(pairs[k].second);
                        eused[pairs[k].second] = true;
                    }
                    vmap[vi] = static_cast<int>(wj);
                    vused[wj] = true;
                    if (assign(vi + 1)) return true;
                    vused[wj] = false;
                    vmap[vi] = -1;
                    for (size_t k = 0; k < np; ++k) {
                        eused[pairs[k].second] = false;
                        emap[pairs[k].first] = -1;
                    }
                }
            }
        }
        return false;
    };
    return assign(0);
}

// Explores every maximal reduction sequence (up to the cap) and collects the
// normal forms reached, deduplicated up to isomorphism.
void explore_reductions(const Flow& f, std::vector<Flow>& normals, int& budget) {
    if (budget <= 0) return;
    auto redexes = find_reductions(f);
    if (redexes.empty()) {
        --budget;
        for (const Flow& seen : normals)
            if (flows_isomorphic(seen, f)) return;
        normals.push_back(f);
        return;
    }
    for (const Reduction& r : redexes) {
        explore_reductions(apply_reduction(f, r).flow, normals, budget);
        if (budget <= 0) return;
    }
}

}  // namespace

TEST_CASE("reduce: all maximal reduction sequences meet in one normal form") {
    std::mt19937_64 rng(47);
    CorpusOptions small;
    small.max_leaves = 24;
    small.growth_steps = 6;
    int tested = 0;
    for (int i = 0; i < 300 && tested < 60; ++i) {
        Derivation d = random_proof(rng, small);
        auto [fl, occ] = extract_flow(d);
        if (fl.vertices.size() > 9) continue;
        if (find_reductions(fl).empty()) continue;
        ++tested;

        std::vector<Flow> normals;
        int budget = 400;
        explore_reductions(fl, normals, budget);
        INFO("proof " << i);
        CHECK(normals.size() == 1);
    }
    CHECK(tested >= 30);
}

// ---- flow-guided substitution ------------------------------------------------------

TEST_CASE("substitute: a fresh atom keeps the rule multiset and the flow shape") {
    Derivation d = testutil::contraction_detour();
    auto [fl, occ] = extract_flow(d);
    auto comps = components(fl);
    REQUIRE(comps.size() == 1);

    Derivation out = substitute_via_flow(d, comps[0], f_atom("x"));
    REQUIRE(check_derivation(out).valid);
    CHECK(out.premiss == substitute_atom(d.premiss, "a", f_atom("x")));
    CHECK(out.conclusion() == substitute_atom(d.conclusion(), "a", f_atom("x")));
    CHECK(check_derivation(out).rule_counts == check_derivation(d).rule_counts);

    auto [fl2, occ2] = extract_flow(out);
    CHECK(kind_counts(fl2) == kind_counts(fl));
    CHECK(fl2.edges.size() == fl.edges.size());
}

TEST_CASE("substitute: t through a weakening leaves only switches and equalities") {
    Literal a{AtomTable::instance().id("a"), false};
    Builder b(f_atom("b"));
    b.eq_to(parse("[b.f]"));
    b.aw_down({1}, a);
    Derivation d = b.take();

    auto [fl, occ] = extract_flow(d);
    auto comps = components(fl);
    // The weakening edge is its own component; b's occurrence is another.
    std::vector<uint32_t> weak_comp;
    for (const auto& c : comps)
        if (fl.edges[c.front()].label.atom == a.atom) weak_comp = c;
    REQUIRE(weak_comp.size() == 1);

    Derivation out = substitute_via_flow(d, weak_comp, f_true());
    REQUIRE(check_derivation(out).valid);
    CHECK(out.premiss == d.premiss);
    CHECK(out.conclusion() == parse("[b.t]"));
    for (const Step& s : out.steps)
        CHECK((s.rule == RuleId::eq || s.rule == RuleId::sw));
}

TEST_CASE("substitute: a disjunction through a contraction uses two atomic contractions") {
    Builder b(parse("[a.a]"));
    b.rewrite(RuleId::ac_down, {});
    Derivation d = b.take();

    auto [fl, occ] = extract_flow(d);
    Derivation out = substitute_via_flow(d, components(fl)[0], parse("[c.d]"));
    REQUIRE(check_derivation(out).valid);
    CHECK(out.premiss == parse("[[c.d].[c.d]]"));
    CHECK(out.conclusion() == parse("[c.d]"));
    auto counts = check_derivation(out).rule_counts;
    CHECK(counts[RuleId::ac_down] == 2);
    CHECK(counts[RuleId::med] == 0);
    CHECK(counts.count(RuleId::gc_down) == 0);
}

TEST_CASE("substitute: negated occurrences take the dual formula") {
    Derivation d = testutil::identity_cut_detour();
    auto [fl, occ] = extract_flow(d);
    Formula beta = parse("(p.[q.r])");

    Derivation out = substitute_via_flow(d, components(fl)[0], beta);
    REQUIRE(check_derivation(out).valid);
    CHECK(out.premiss == f_true());
    CHECK(out.conclusion() == f_true());
    // The identity expansion introduces the formula and its dual.
    bool saw_beta = false, saw_dual = false;
    for (const Step& s : out.steps) {
        std::string line = render(s.conclusion);
        if (line.find(render(beta)) != std::string::npos) saw_beta = true;
        if (line.find(render(dual(beta))) != std::string::npos) saw_dual = true;
    }
    CHECK(saw_beta);
    CHECK(saw_dual);
}

TEST_CASE("substitute: simultaneous components with distinct replacements") {
    Derivation d = testutil::cocontraction_example();
    auto [fl, occ] = extract_flow(d);
    auto comps = components(fl);
    REQUIRE(comps.size() == 3);

    std::vector<std::pair<std::vector<uint32_t>, Formula>> subs;
    std::vector<Formula> betas = {parse("[x.y]"), parse("z"), parse("(w.w)")};
    for (size_t i = 0; i < comps.size(); ++i) subs.emplace_back(comps[i], betas[i]);

    Derivation out = substitute_via_flow(d, subs);
    REQUIRE(check_derivation(out).valid);

    // Expected endpoints, computed independently on the occurrence level.
    auto expected = [&](Formula line, const std::vector<uint32_t>& line_occ) {
        std::vector<std::pair<uint32_t, Formula>> repl;
        for (uint32_t k = 0; k < line_occ.size(); ++k)
            for (size_t ci = 0; ci < comps.size(); ++ci)
                if (std::count(comps[ci].begin(), comps[ci].end(), line_occ[k]))
                    repl.emplace_back(k, fl.edges[line_occ[k]].label.neg ? dual(betas[ci])
                                                                         : betas[ci]);
        return substitute_at_indices(line, repl);
    };
    CHECK(out.premiss == expected(d.premiss, occ.lines.front()));
    CHECK(out.conclusion() == expected(d.conclusion(), occ.lines.back()));
}

TEST_CASE("substitute: misuse is reported") {
    Derivation d = testutil::contraction_detour();
    auto [fl, occ] = extract_flow(d);
    auto comps = components(fl);

    // Half a component: the vertices are not closed under the edge set.
    std::vector<uint32_t> half{comps[0].front()};
    CHECK_THROWS_AS(substitute_via_flow(d, half, f_atom("x")), std::invalid_argument);

    // An edge id outside the flow.
    std::vector<uint32_t> bogus{static_cast<uint32_t>(fl.edges.size())};
    CHECK_THROWS_AS(substitute_via_flow(d, bogus, f_atom("x")), std::invalid_argument);
}

TEST_CASE("substitute: output size stays within the measured quadratic envelope") {
    std::mt19937_64 rng(59);
    uint64_t worst_num = 0, worst_den = 1;
    for (int i = 0; i < 20; ++i) {
        Derivation d = random_proof(rng);
        auto [fl, occ] = extract_flow(d);
        auto comps = components(fl);
        Formula beta = parse("([p.q].r)");
        Derivation out = substitute_via_flow(d, comps.front(), beta);
        REQUIRE(check_derivation(out).valid);

        uint64_t bound = d.size() * size(beta) * size(beta);
        if (out.size() * worst_den > worst_num * bound) {
            worst_num = out.size();
            worst_den = bound;
        }
    }
    // measured constant: the worst observed ratio stays below 2
    CHECK(worst_num <= 2 * worst_den);
}
