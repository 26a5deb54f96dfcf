#pragma once

// The normalisation pipeline.  A proof is first brought into simple form,
// where every cut sits at the bottom under a matching identity at the top
// and each cut atom is connected to its identity by a private flow; the
// simple core between the two blocks is then traded for a cascade of
// threshold derivations, which eliminates the cuts at quasipolynomial cost;
// finally the remaining coweakenings are reduced away, giving an analytic
// proof.  Every intermediate derivation is built through the checking
// Builder, so an unsound transformation fails at construction time.

#include "sks/flow.hpp"
#include "sks/threshold.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sks {

namespace detail {

// Path of element i in a right-nested chain of `count` elements.
inline Path nest_path(size_t count, size_t i) {
    Path p(i, uint8_t{1});
    if (i + 1 < count) p.push_back(uint8_t{0});
    return p;
}

}  // namespace detail

// ---- switch shuffles ----------------------------------------------------------

// Derivation from ctx{alpha} to [alpha.ctx{f}] in {s, eq}: the plugged
// subformula is pulled out of its context, leaving f behind.  One switch is
// spent per maximal block of conjunctions on the branch to the hole, i.e.
// per or-and alternation, which keeps the derivation quadratic.  Every
// rearranging eq step names the subterms it relocates, so occurrences of the
// extracted formula never get captured by look-alikes in the context.
inline Derivation push_out(const Context& ctx, Formula alpha) {
    Formula premiss = ctx.plug(alpha);
    Formula target = f_or(alpha, ctx.plug(f_false()));

    // First conjunction on the branch from the root to the hole.
    size_t split = ctx.hole.size();
    Formula walk = ctx.host;
    for (size_t i = 0; i < ctx.hole.size(); ++i) {
        if (walk->kind == Kind::And) {
            split = i;
            break;
        }
        walk = ctx.hole[i] ? walk->right : walk->left;
    }

    Builder b(premiss);
    if (split == ctx.hole.size()) {
        // Pure disjunctive branch: the extraction is an equality.
        b.eq_to(target, block_wiring(premiss, target, {{ctx.hole, Path{0}}}));
        return b.take();
    }

    // Gather the conjuncts of the whole block of nested conjunctions, then
    // push alpha past all of them with a single switch.
    Path conj_path(ctx.hole.begin(), ctx.hole.begin() + split);
    std::vector<Formula> betas;
    std::vector<Path> beta_at;  // positions of the conjuncts in the host
    size_t end = split;
    Path branch = conj_path;
    while (end < ctx.hole.size() && walk->kind == Kind::And) {
        Path at = branch;
        at.push_back(ctx.hole[end] ? 0 : 1);
        beta_at.push_back(std::move(at));
        betas.push_back(ctx.hole[end] ? walk->left : walk->right);
        branch.push_back(ctx.hole[end]);
        walk = ctx.hole[end] ? walk->right : walk->left;
        ++end;
    }
    Context inner{walk, Path(ctx.hole.begin() + end, ctx.hole.end())};
    size_t m = betas.size();

    b.splice(push_out(inner, alpha), branch);
    Formula inner_f = inner.plug(f_false());
    {
        Formula to = replace_at(ctx.host, conj_path,
                                f_and(f_and(betas), f_or(inner_f, alpha)));
        std::vector<std::pair<Path, Path>> blocks{
            {branch + Path{0}, conj_path + Path{1, 1}},
            {branch + Path{1}, conj_path + Path{1, 0}}};
        for (size_t i = 0; i < m; ++i)
            blocks.push_back({beta_at[i], conj_path + Path{0} + detail::nest_path(m, i)});
        b.eq_to(to, block_wiring(b.current(), to, blocks));
    }
    b.rewrite(RuleId::sw, conj_path);
    {
        std::vector<std::pair<Path, Path>> blocks{
            {conj_path + Path{1}, Path{0}},
            {conj_path + Path{0, 1}, Path{1} + branch}};
        for (size_t i = 0; i < m; ++i)
            blocks.push_back(
                {conj_path + Path{0, 0} + detail::nest_path(m, i), Path{1} + beta_at[i]});
        b.eq_to(target, block_wiring(b.current(), target, blocks));
    }
    return b.take();
}

// Derivation from (alpha.ctx{t}) to ctx{alpha} in {s, eq}: the dual shuffle,
// pushing a conjunct into the place of a t.
inline Derivation pull_in(const Context& ctx, Formula alpha) {
    return dualize(push_out(Context{dual(ctx.host), ctx.hole}, dual(alpha)));
}

// ---- occurrence splitting -----------------------------------------------------

// Derivation from alpha to [a.alpha{a/f}] in {aw-down, ac-down, s, eq}.  Each
// occurrence of the literal is pushed out in turn and the extracted copies
// are contracted into one; alpha must not contain the dual literal, so the
// substitution touches exactly the pushed occurrences.
inline Derivation split_out(Formula alpha, const Literal& a) {
    if (!literal_indices(alpha, a.dual()).empty())
        throw std::invalid_argument("split_out: formula contains the dual literal");
    Formula fa = f_atom(a);
    Formula target = f_or(fa, substitute_atom(alpha, a, f_false()));

    Builder b(alpha);
    size_t h = literal_indices(alpha, a).size();
    if (h == 0) {
        b.eq_to(f_or(f_false(), alpha));
        b.aw_down({0}, a);
        b.eq_to(target);
        return b.take();
    }
    for (size_t j = 0; j < h; ++j) {
        Path prefix(j, uint8_t{1});
        Formula cur = subformula_at(b.current(), prefix);
        uint32_t occ = literal_indices(cur, a).front();
        b.splice(push_out(context_at(cur, atom_leaf_path(cur, occ)), fa), prefix);
    }
    for (size_t j = h; j > 1; --j) {
        Formula rest = subformula_at(b.current(), {1, 1});
        b.eq_to(f_or(f_or(fa, fa), rest));
        b.rewrite(RuleId::ac_down, {0});
    }
    b.eq_to(target);
    return b.take();
}

// Derivation from (a.alpha{a/t}) to alpha in {aw-up, ac-up, s, eq}.
inline Derivation join_in(Formula alpha, const Literal& a) {
    return dualize(split_out(dual(alpha), a.dual()));
}

// ---- contraction polarity gadgets ---------------------------------------------

// Derivation from [x.x] to x whose only (co)contraction acts on the dual
// literal: an identity supplies a fresh pair, the dual atom is duplicated,
// and two switches line both copies up against the original occurrences so
// that two cuts can consume them.
inline Derivation gadget_contraction(const Literal& x) {
    Literal y = x.dual();
    Formula fx = f_atom(x), fy = f_atom(y);
    Formula xx = f_or(fx, fx);

    Builder b(xx);
    b.eq_to(f_and(f_true(), xx));
    b.ai_down({0}, y);
    b.eq_to(f_and(xx, f_or(fy, fx)));
    b.rewrite(RuleId::sw, {});
    b.eq_to(f_or(f_and(fy, xx), fx));
    b.rewrite(RuleId::ac_up, {0, 0});
    b.eq_to(f_or(f_and(fy, f_and(fy, xx)), fx));
    b.rewrite(RuleId::sw, {0, 1});
    b.eq_to(f_or(f_and(fy, f_or(fx, f_and(fy, fx))), fx));
    b.rewrite(RuleId::sw, {0});
    b.rewrite(RuleId::ai_up, {0, 0});
    b.rewrite(RuleId::ai_up, {0, 1});
    b.eq_to(fx);
    return b.take();
}

// Derivation from x to (x.x), dually.
inline Derivation gadget_cocontraction(const Literal& x) {
    return dualize(gadget_contraction(x.dual()));
}

// Rebuilds the derivation so that every (co)contraction acts on a
// non-negated literal; negated instances are replaced by the gadgets.  Under
// the canonical polarity assignment this makes all (co)contractions
// positive.  General rules must have been expanded away first.
inline Derivation remove_negative_cocontraction(const Derivation& d) {
    Builder b(d.premiss);
    for (const Step& s : d.steps) {
        if (is_general(s.rule))
            throw std::invalid_argument(
                "remove_negative_cocontraction: expand general rules first");
        if (s.rule == RuleId::ac_down || s.rule == RuleId::ac_up) {
            Formula redex = subformula_at(s.premiss, s.redex);
            Literal lit = s.rule == RuleId::ac_down ? redex->left->literal()
                                                    : redex->literal();
            if (lit.neg) {
                b.splice(s.rule == RuleId::ac_down ? gadget_contraction(lit)
                                                   : gadget_cocontraction(lit),
                         s.redex);
                continue;
            }
        }
        b.push(s.rule, s.redex, s.conclusion, s.eq_wiring);
    }
    return b.take();
}

// ---- simple form ----------------------------------------------------------------

// A proof in simple form over atoms b_1..b_n: the proof runs t, a block of n
// identities giving (/\_j [b_j.-b_j]), the core, [alpha.(\/_j (b_j.-b_j))], a
// block of n cuts, alpha.  Inside the core the flow of each cut atom's
// negated occurrences is a private component phi_j with exactly one dangling
// edge at each end, which is what lets a threshold formula be substituted
// for the atom wholesale.
struct SimpleForm {
    Derivation proof;
    Derivation core;
    std::vector<Literal> atoms;                      // b_1..b_n, non-negated, distinct
    std::vector<std::vector<uint32_t>> components;   // phi_j edge sets of the core's flow
};

namespace detail {

// Identity step paired with each cut step through the single negated edge
// joining them.  Only available once negated (co)contractions and
// weakening-fed cuts are gone.
struct CutPairing {
    size_t cut_step;
    size_t id_step;
    Formula id_pair;   // the [x.-x] the identity creates, as written
    Formula cut_pair;  // the (x.-x) the cut consumes, as written
    Literal atom;      // the non-negated literal of the pair
};

inline std::vector<CutPairing> pair_cuts(const Derivation& d, const Flow& fl) {
    std::vector<CutPairing> out;
    std::vector<char> id_used(fl.vertices.size(), 0);
    for (const Vertex& v : fl.vertices) {
        if (v.kind != VertexKind::Cut) continue;
        uint32_t neg_edge = fl.edges[v.up[0]].label.neg ? v.up[0] : v.up[1];
        uint32_t above = fl.edges[neg_edge].above;
        if (above == flow_none || fl.vertices[above].kind != VertexKind::Identity)
            throw std::logic_error("pair_cuts: cut not fed by an identity");
        if (id_used[above]++)
            throw std::logic_error("pair_cuts: identity feeds two cuts");
        const Step& cs = d.steps[v.step];
        const Step& is = d.steps[fl.vertices[above].step];
        out.push_back(CutPairing{v.step, fl.vertices[above].step,
                                 subformula_at(is.conclusion, is.redex),
                                 subformula_at(cs.premiss, cs.redex),
                                 Literal{fl.edges[neg_edge].label.atom, false}});
    }
    std::sort(out.begin(), out.end(),
              [](const CutPairing& a, const CutPairing& b) { return a.id_step < b.id_step; });
    return out;
}

// Builds a right-nested chain of `count` copies of `pair` from one, or
// merges it back down, using expanded general (co)contractions.
inline Derivation copy_chain(Formula pair, size_t count) {
    Builder b(pair);
    for (size_t m = 1; m < count; ++m)
        b.splice(expand_gc_up(pair), Path(m - 1, uint8_t{1}));
    return b.take();
}

inline Derivation merge_chain(Formula pair, size_t count) {
    Formula nest = pair;
    for (size_t m = 1; m < count; ++m) nest = f_or(pair, nest);
    Builder b(nest);
    for (size_t m = count; m > 1; --m)
        b.splice(expand_gc_down(pair), Path(m - 2, uint8_t{1}));
    return b.take();
}

}  // namespace detail

// Brings a proof into simple form.  Stage one removes negated
// (co)contractions and cuts fed by weakenings, so that afterwards every cut
// hangs off an identity by a single negated edge.  Stage two replays the
// proof inside a bookkeeping conjunction, consuming a pre-built identity
// block from the left and pushing spent cut pairs into a disjunction on the
// right.  Stage three merges pairs over the same atom into one identity and
// one cut per distinct atom, via expanded general (co)contractions.
inline SimpleForm to_simple_form(const Derivation& input) {
    if (!is_proof(input)) throw std::invalid_argument("to_simple_form: not a proof");
    Formula alpha = input.conclusion();

    // Stage one: polarise contractions, then starve weakening-fed cuts.
    Derivation d = remove_negative_cocontraction(expand_all_general(input));
    for (;;) {
        auto [fl, occ] = extract_flow(d);
        auto redexes = find_reductions(fl);
        auto it = std::find_if(redexes.begin(), redexes.end(), [](const Reduction& r) {
            return r.rule == ReductionRule::WeakeningCut;
        });
        if (it == redexes.end()) break;
        d = reduce_derivation(d, fl, occ, *it);
    }

    // Stage two bookkeeping: which steps are paired identities and cuts.
    Flow fl = extract_flow(d).first;
    std::vector<detail::CutPairing> pairs = detail::pair_cuts(d, fl);
    size_t l = pairs.size();
    std::unordered_map<size_t, size_t> id_of_step, cut_of_step;
    for (size_t j = 0; j < l; ++j) {
        id_of_step[pairs[j].id_step] = j;
        cut_of_step[pairs[j].cut_step] = j;
    }

    // Identity block: one ai-down per pair on a scaffold of t's.
    std::vector<Formula> id_pairs;
    for (const auto& p : pairs) id_pairs.push_back(p.id_pair);
    Builder head(f_true());
    head.eq_to(f_and(std::vector<Formula>(l, f_true())));
    for (size_t j = 0; j < l; ++j)
        head.ai_down(detail::nest_path(l, j), pairs[j].id_pair->left->literal());
    Derivation head_d = head.take();
    Formula prem_block = head_d.conclusion();

    // Replay of the original proof inside the wrapper
    // (remaining identities . [spent cuts . line]).  Identities are consumed
    // in replay order, so the next pair is always the leftmost conjunct, and
    // spent pairs are prepended to the disjunction on the line's left; both
    // bookkeeping moves are then pure regroupings that keep the occurrence
    // order of the whole line, which pins their traces without explicit
    // wiring.  The push and pull shuffles name their moved blocks themselves.
    std::vector<char> remaining(l, 1);
    std::vector<Formula> spent;
    auto wrapper = [&](Formula line) {
        std::vector<Formula> rest;
        for (size_t j = 0; j < l; ++j)
            if (remaining[j]) rest.push_back(id_pairs[j]);
        return f_and(f_and(rest), f_or(f_or(spent), line));
    };
    Builder mid(prem_block);
    mid.eq_to(wrapper(d.premiss));
    for (size_t i = 0; i < d.steps.size(); ++i) {
        const Step& s = d.steps[i];
        if (auto it = id_of_step.find(i); it != id_of_step.end()) {
            size_t j = it->second;
            remaining[j] = 0;
            Formula host = wrapper(s.premiss);
            Path hole = Path{1, 1} + s.redex;
            mid.eq_to(f_and(id_pairs[j], host));
            mid.splice(pull_in(Context{host, hole}, id_pairs[j]), {});
        } else if (auto it = cut_of_step.find(i); it != cut_of_step.end()) {
            size_t j = it->second;
            Formula sub_host = f_or(f_or(spent), s.premiss);
            mid.splice(push_out(Context{sub_host, Path{1} + s.redex}, pairs[j].cut_pair),
                       {1});
            spent.insert(spent.begin(), pairs[j].cut_pair);
            mid.eq_to(wrapper(s.conclusion));
        } else {
            mid.push(s.rule, Path{1, 1} + s.redex, wrapper(s.conclusion), s.eq_wiring);
        }
    }
    {
        // [spent.alpha] to [alpha.spent]: the one move that does invert the
        // occurrence order, so it carries its map.
        Formula endw = mid.current();
        Formula out = f_or(alpha, f_or(spent));
        mid.eq_to(out, block_wiring(endw, out, {{Path{1, 0}, Path{1}}, {Path{1, 1}, Path{0}}}));
    }
    Derivation mid_d = mid.take();

    // Stage three: group the pairs by atom, one identity and cut per atom.
    std::vector<Literal> atoms;
    std::vector<size_t> group_of(l);  // pair index -> atom index
    std::vector<std::vector<size_t>> members;
    for (size_t j = 0; j < l; ++j) {
        size_t g = 0;
        while (g < atoms.size() && !(atoms[g] == pairs[j].atom)) ++g;
        if (g == atoms.size()) {
            atoms.push_back(pairs[j].atom);
            members.push_back({});
        }
        group_of[j] = g;
        members[g].push_back(j);
    }
    size_t n = atoms.size();

    Builder top(f_true());
    top.eq_to(f_and(std::vector<Formula>(n, f_true())));
    std::vector<Formula> group_id_pair(n), group_cut_pair(n);
    for (size_t g = 0; g < n; ++g) {
        group_id_pair[g] = pairs[members[g].front()].id_pair;
        group_cut_pair[g] = pairs[members[g].front()].cut_pair;
        top.ai_down(detail::nest_path(n, g), group_id_pair[g]->left->literal());
    }
    Derivation top_d = top.take();
    Formula core_prem = top_d.conclusion();

    Builder core(core_prem);
    for (size_t g = 0; g < n; ++g)
        if (members[g].size() > 1)
            core.splice(detail::copy_chain(group_id_pair[g], members[g].size()),
                        detail::nest_path(n, g));
    core.eq_to(prem_block);
    core.splice(mid_d, {});
    {
        // Each group's copies as one right-nested run, so the merges below
        // see exactly the chains they collapse.
        std::vector<Formula> group_nests(n);
        for (size_t g = 0; g < n; ++g) {
            Formula nest = group_cut_pair[g];
            for (size_t m = 1; m < members[g].size(); ++m)
                nest = f_or(group_cut_pair[g], nest);
            group_nests[g] = nest;
        }
        core.eq_to(f_or(alpha, f_or(group_nests)));
    }
    for (size_t g = n; g > 0; --g) {
        // Innermost group first so the outer slot paths stay put.
        size_t gi = g - 1;
        if (members[gi].size() > 1)
            core.splice(detail::merge_chain(group_cut_pair[gi], members[gi].size()),
                        Path{1} + detail::nest_path(n, gi));
    }
    std::vector<Formula> cut_block(group_cut_pair.begin(), group_cut_pair.end());
    core.eq_to(f_or(alpha, f_or(cut_block)));
    Derivation core_d = core.take();

    Builder tail(core_d.conclusion());
    for (size_t g = 0; g < n; ++g)
        tail.rewrite(RuleId::ai_up, Path{1} + detail::nest_path(n, g));
    tail.eq_to(alpha);
    Derivation tail_d = tail.take();

    Builder whole(f_true());
    whole.splice(top_d, {});
    whole.splice(core_d, {});
    whole.splice(tail_d, {});

    SimpleForm sf;
    sf.proof = whole.take();
    sf.core = core_d;
    sf.atoms = atoms;

    // The phi components: one per atom, found from the negated occurrence in
    // the core's conclusion, and required to be private to the pair blocks.
    auto [cfl, cocc] = extract_flow(sf.core);
    auto comps = components(cfl);
    Formula concl = sf.core.conclusion();
    for (size_t g = 0; g < n; ++g) {
        Path p = Path{1} + detail::nest_path(n, g);
        p.push_back(group_cut_pair[g]->left->literal().neg ? 0 : 1);
        auto idx = atom_leaf_index(concl, p);
        if (!idx) throw std::logic_error("to_simple_form: misplaced cut pair");
        uint32_t edge = cocc.lines.back()[*idx];
        auto comp = std::find_if(comps.begin(), comps.end(), [&](const auto& c) {
            return std::find(c.begin(), c.end(), edge) != c.end();
        });
        if (comp == comps.end()) throw std::logic_error("to_simple_form: lost flow component");
        uint32_t lower_dangling = 0;
        for (uint32_t e : *comp) {
            if (cfl.edges[e].label != sf.atoms[g].dual())
                throw std::logic_error("to_simple_form: component mixes literals");
            if (cfl.edges[e].below == flow_none) ++lower_dangling;
            uint32_t vs[2] = {cfl.edges[e].above, cfl.edges[e].below};
            for (uint32_t v : vs)
                if (v != flow_none && (cfl.vertices[v].kind == VertexKind::Identity ||
                                       cfl.vertices[v].kind == VertexKind::Cut))
                    throw std::logic_error(
                        "to_simple_form: identity or cut inside a cut atom component");
        }
        if (lower_dangling != 1)
            throw std::logic_error("to_simple_form: cut atom component must reach "
                                   "exactly one conclusion occurrence");
        sf.components.push_back(*comp);
    }

    CheckReport rep = check_derivation(sf.proof);
    if (!rep.valid) throw std::logic_error("to_simple_form: produced an invalid proof");
    if (check_derivation(sf.core).rule_counts.count(RuleId::ai_up))
        throw std::logic_error("to_simple_form: core still contains a cut");
    return sf;
}

// ---- cut-free form --------------------------------------------------------------

// Eliminates the cuts of a proof in simple form.  For each threshold level k
// the core is replayed with theta_k{a_i/f} substituted for the negated cut
// atoms, bracketed above by splits that peel each a_i off theta_k and below
// by the threshold step derivations and joins that rebuild theta_{k+1}; the
// n+1 levels are chained inside a growing disjunction of alpha copies which
// a final block of contractions folds back to alpha.
inline Derivation to_cut_free(const SimpleForm& sf) {
    size_t n = sf.atoms.size();
    if (n == 0) return sf.proof;
    Formula alpha = sf.proof.conclusion();
    ThresholdBuilder tb(sf.atoms);

    std::vector<Formula> theta(n + 2);
    for (size_t k = 0; k <= n + 1; ++k) theta[k] = tb.theta(static_cast<uint32_t>(k));

    auto level = [&](size_t k) {
        std::vector<Formula> cut_f(n), cut_t(n);
        for (size_t i = 0; i < n; ++i) {
            cut_f[i] = substitute_atom(theta[k], sf.atoms[i], f_false());
            cut_t[i] = substitute_atom(theta[k + 1], sf.atoms[i], f_true());
        }

        Builder b(theta[k]);
        b.splice(detail::copy_chain(theta[k], n), {});
        for (size_t i = 0; i < n; ++i)
            b.splice(split_out(theta[k], sf.atoms[i]), detail::nest_path(n, i));

        std::vector<std::pair<std::vector<uint32_t>, Formula>> subs;
        for (size_t i = 0; i < n; ++i) subs.emplace_back(sf.components[i], dual(cut_f[i]));
        Derivation core_k = substitute_via_flow(sf.core, subs);
        b.eq_to(core_k.premiss);
        b.splice(core_k, {});

        std::vector<Formula> split(n);
        for (size_t i = 0; i < n; ++i) split[i] = f_and(f_atom(sf.atoms[i]), cut_f[i]);
        b.eq_to(f_or(alpha, f_or(split)));
        for (size_t i = 0; i < n; ++i) {
            Path at = Path{1} + detail::nest_path(n, i);
            Derivation g = tb.gamma(static_cast<uint32_t>(k), static_cast<uint32_t>(i + 1));
            b.eq_to(replace_at(b.current(), at + Path{1}, g.premiss));
            b.splice(g, at + Path{1});
            b.eq_to(replace_at(b.current(), at + Path{1}, cut_t[i]));
            b.splice(join_in(theta[k + 1], sf.atoms[i]), at);
        }
        b.splice(detail::merge_chain(theta[k + 1], n), {1});
        return b.take();
    };

    Builder b(f_true());
    for (size_t k = 0; k <= n; ++k) b.splice(level(k), Path(k, uint8_t{1}));
    std::vector<Formula> alphas(n + 1, alpha);
    b.eq_to(f_or(alphas));
    for (size_t m = n; m > 0; --m)
        b.splice(expand_gc_down(alpha), Path(m - 1, uint8_t{1}));

    Derivation out = b.take();
    for (const Step& s : out.steps)
        if (s.rule == RuleId::ai_up)
            throw std::logic_error("to_cut_free: a cut slipped through");
    return out;
}

inline Derivation to_cut_free(const Derivation& proof) {
    return to_cut_free(to_simple_form(proof));
}

// ---- analytic form --------------------------------------------------------------

// Removes every coweakening from a proof by reducing it against the vertex
// above it; in a proof each coweakening edge hangs off an identity,
// weakening, contraction or cocontraction, and all four cases are flow
// reductions.  Applied to a cut-free proof this yields an analytic one.
inline Derivation to_analytic(const Derivation& proof) {
    if (!is_proof(proof)) throw std::invalid_argument("to_analytic: not a proof");
    for (const Step& s : proof.steps)
        if (s.rule == RuleId::ai_up)
            throw std::invalid_argument("to_analytic: proof contains cuts");
    Derivation d = proof;
    for (;;) {
        auto [fl, occ] = extract_flow(d);
        auto redexes = find_reductions(fl);
        auto it = std::find_if(redexes.begin(), redexes.end(), [](const Reduction& r) {
            return r.rule == ReductionRule::CocontractionCoweakening ||
                   r.rule == ReductionRule::IdentityCoweakening ||
                   r.rule == ReductionRule::ContractionCoweakening ||
                   r.rule == ReductionRule::WeakeningCoweakening;
        });
        if (it == redexes.end()) break;
        d = reduce_derivation(d, fl, occ, *it);
    }
    for (const Step& s : d.steps)
        if (s.rule == RuleId::aw_up)
            throw std::logic_error("to_analytic: a coweakening survived");
    return d;
}

// ---- pipeline -------------------------------------------------------------------

struct StageReport {
    std::string stage;
    uint64_t size = 0;
    uint64_t steps = 0;
    std::map<RuleId, uint64_t> rule_counts;
    bool valid = false;
    double millis = 0.0;
};

struct PipelineReport {
    std::vector<StageReport> stages;

    std::string csv() const {
        std::string out = "stage,steps,size,valid,millis,rules\n";
        for (const StageReport& s : stages) {
            out += s.stage + ',' + std::to_string(s.steps) + ',' + std::to_string(s.size) +
                   ',' + (s.valid ? "1" : "0") + ',' + std::to_string(s.millis) + ',';
            bool first = true;
            for (const auto& [rule, count] : s.rule_counts) {
                if (!first) out += '|';
                first = false;
                out += std::string(rule_ascii(rule)) + ':' + std::to_string(count);
            }
            out += '\n';
        }
        return out;
    }
};

struct NormaliseResult {
    SimpleForm simple;
    Derivation cut_free;
    Derivation analytic;
    PipelineReport report;
};

namespace detail {

inline StageReport stage_report(const std::string& name, const Derivation& d, double millis) {
    CheckReport c = check_derivation(d);
    StageReport r;
    r.stage = name;
    r.size = c.size;
    r.steps = d.steps.size();
    r.rule_counts = std::move(c.rule_counts);
    r.valid = c.valid;
    r.millis = millis;
    return r;
}

}  // namespace detail

// Runs the full pipeline, checking and measuring each stage.
inline NormaliseResult normalise(const Derivation& proof) {
    using clock = std::chrono::steady_clock;
    NormaliseResult r;
    r.report.stages.push_back(detail::stage_report("input", proof, 0.0));

    auto t0 = clock::now();
    r.simple = to_simple_form(proof);
    auto t1 = clock::now();
    r.cut_free = to_cut_free(r.simple);
    auto t2 = clock::now();
    r.analytic = to_analytic(r.cut_free);
    auto t3 = clock::now();

    auto ms = [](auto a, auto b) {
        return std::chrono::duration<double, std::milli>(b - a).count();
    };
    r.report.stages.push_back(detail::stage_report("simple", r.simple.proof, ms(t0, t1)));
    r.report.stages.push_back(detail::stage_report("cutfree", r.cut_free, ms(t1, t2)));
    r.report.stages.push_back(detail::stage_report("analytic", r.analytic, ms(t2, t3)));
    return r;
}

}  // namespace sks
