// Deterministic pseudo-random generation of valid SKS proofs.  Proofs are
// grown top-down from t by applying forward rule instances and equality
// detours; every growth operation keeps the derivation checkable, so the
// output is valid by construction.  The generator seeds cuts, weakenings,
// coweakenings and both contraction directions to exercise flow extraction
// and reduction.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sks/derivation.hpp"

namespace sks {

struct CorpusOptions {
    int max_leaves = 60;   // growth stops at this line width
    int growth_steps = 14; // number of growth operations attempted
    int atoms = 4;         // size of the atom name pool (a, b, c, ...)
};

namespace detail {

// A proof of t by t with one identity-cut pair on the literal l; spliced
// into larger proofs as a cut detour.
inline Derivation cut_detour_gadget(const Literal& l) {
    Formula x = f_atom(l), nx = f_atom(l.dual());
    Builder b(f_true());
    b.ai_down({}, l);
    b.eq_to(f_or(f_and(x, f_true()), f_and(f_true(), nx)));
    b.rewrite(RuleId::med, {});
    b.eq_to(f_and(f_or(x, f_true()), f_or(nx, f_true())));
    b.rewrite(RuleId::sw, {});
    b.eq_to(f_or(f_and(nx, f_or(x, f_true())), f_true()));
    b.rewrite(RuleId::sw, {0});
    b.eq_to(f_or(f_and(x, nx), f_true()));
    b.rewrite(RuleId::ai_up, {0});
    b.eq_to(f_true());
    return b.take();
}

inline void collect_paths(Formula f, Path& prefix, std::vector<Path>& out) {
    out.push_back(prefix);
    if (is_binary(f)) {
        prefix.push_back(0);
        collect_paths(f->left, prefix, out);
        prefix.back() = 1;
        collect_paths(f->right, prefix, out);
        prefix.pop_back();
    }
}

inline std::vector<Path> all_paths(Formula f) {
    std::vector<Path> out;
    Path prefix;
    collect_paths(f, prefix, out);
    return out;
}

}  // namespace detail

// One pseudo-random valid SKS proof (premiss t).  Consumes a caller-owned
// generator so that corpus generation is reproducible as one stream.
inline Derivation random_proof(std::mt19937_64& rng, const CorpusOptions& opt = {}) {
    std::vector<Literal> pool;
    for (int i = 0; i < opt.atoms; ++i)
        pool.push_back(Literal{AtomTable::instance().id(std::string(1, char('a' + i))), false});
    auto pick_literal = [&]() {
        Literal l = pool[rng() % pool.size()];
        l.neg = rng() % 2 == 0;
        return l;
    };
    auto pick_path = [&](const std::vector<Path>& ps) { return ps[rng() % ps.size()]; };

    Builder b(f_true());
    b.ai_down({}, pick_literal());

    for (int step = 0; step < opt.growth_steps; ++step) {
        Formula cur = b.current();
        if (static_cast<int>(size(cur)) >= opt.max_leaves) break;
        std::vector<Path> paths = detail::all_paths(cur);
        std::vector<Path> atom_paths, switch_paths, medial_paths, binary_paths;
        for (const Path& p : paths) {
            Formula sub = subformula_at(cur, p);
            if (is_atom(sub)) atom_paths.push_back(p);
            if (is_binary(sub)) binary_paths.push_back(p);
            if (sub->kind == Kind::And && sub->right->kind == Kind::Or) switch_paths.push_back(p);
            if (sub->kind == Kind::Or && sub->left->kind == Kind::And &&
                sub->right->kind == Kind::And)
                medial_paths.push_back(p);
        }

        switch (rng() % 10) {
            case 0:
            case 1: {  // identity below an inserted t
                Path p = pick_path(paths);
                Formula sub = subformula_at(cur, p);
                b.eq_to(replace_at(cur, p, f_and(sub, f_true())));
                b.ai_down(extend(p, 1), pick_literal());
                break;
            }
            case 2: {  // weakening below an inserted f
                Path p = pick_path(paths);
                Formula sub = subformula_at(cur, p);
                b.eq_to(replace_at(cur, p, f_or(sub, f_false())));
                b.aw_down(extend(p, 1), pick_literal());
                break;
            }
            case 3: {  // cocontraction of an atom occurrence
                if (atom_paths.empty()) break;
                b.rewrite(RuleId::ac_up, pick_path(atom_paths));
                break;
            }
            case 4: {  // coweakening of an atom occurrence
                if (atom_paths.empty()) break;
                b.rewrite(RuleId::aw_up, pick_path(atom_paths));
                break;
            }
            case 5: {  // weakening-contraction detour on an atom occurrence
                if (atom_paths.empty()) break;
                Path p = pick_path(atom_paths);
                Literal l = subformula_at(cur, p)->literal();
                b.eq_to(replace_at(cur, p, f_or(f_atom(l), f_false())));
                b.aw_down(extend(p, 1), l);
                b.rewrite(RuleId::ac_down, p);
                break;
            }
            case 6: {  // identity-cut detour below an inserted t
                Path p = pick_path(paths);
                Formula sub = subformula_at(cur, p);
                b.eq_to(replace_at(cur, p, f_and(sub, f_true())));
                b.splice(detail::cut_detour_gadget(pick_literal()), extend(p, 1));
                break;
            }
            case 7: {  // switch, where the shape allows
                if (switch_paths.empty()) break;
                b.rewrite(RuleId::sw, pick_path(switch_paths));
                break;
            }
            case 8: {  // medial, where the shape allows
                if (medial_paths.empty()) break;
                b.rewrite(RuleId::med, pick_path(medial_paths));
                break;
            }
            case 9: {  // commutativity shuffle
                Path p = pick_path(binary_paths.empty() ? paths : binary_paths);
                Formula sub = subformula_at(cur, p);
                if (!is_binary(sub)) break;
                Formula swapped = sub->kind == Kind::Or ? f_or(sub->right, sub->left)
                                                        : f_and(sub->right, sub->left);
                b.eq_to(replace_at(cur, p, swapped));
                break;
            }
        }
    }
    return b.take();
}

// A proof containing at least one cut; regenerates (from the same stream)
// until one shows up, which the cut-detour operation makes quick.
inline Derivation random_proof_with_cut(std::mt19937_64& rng, const CorpusOptions& opt = {}) {
    for (;;) {
        Derivation d = random_proof(rng, opt);
        for (const Step& s : d.steps)
            if (s.rule == RuleId::ai_up) return d;
    }
}

// The generated corpus: `count` proofs, reproducible from the seed.
inline std::vector<Derivation> generate_corpus(uint64_t seed, int count,
                                               const CorpusOptions& opt = {}) {
    std::mt19937_64 rng(seed);
    std::vector<Derivation> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(random_proof(rng, opt));
    return out;
}

}  // namespace sks
