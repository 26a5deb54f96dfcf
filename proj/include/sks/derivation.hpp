#ifndef SKS_DERIVATION_HPP
#define SKS_DERIVATION_HPP

// SKS derivations: a premiss followed by inference steps, each rewriting one
// redex.  The checker verifies every step against its rule schema and the
// context identity outside the redex; equality steps are verified by
// canonical-form identity.  Steps carry full lines, so checking is local.
//
// The kernel also provides occurrence tracing per step (the basis for flow
// extraction), composition in sequence and under a connective, wrapping into
// a context, dualisation, and the atomisation of the general structural
// rules gw/gc plus the derived identity/cut expansions on whole formulae.

#include <cassert>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sks/formula.hpp"

namespace sks {

enum class RuleId : uint8_t {
    ai_down,  // t => [a.-a]
    ai_up,    // (a.-a) => f
    aw_down,  // f => a
    aw_up,    // a => t
    ac_down,  // [a.a] => a
    ac_up,    // a => (a.a)
    sw,       // (x.[y.z]) => [(x.y).z]
    med,      // [(x.y).(z.w)] => ([x.z].[y.w])
    eq,       // premiss = conclusion under the syntactic equations
    gw_down,  // f => x (general weakening)
    gw_up,    // x => t
    gc_down,  // [x.x] => x (general contraction)
    gc_up,    // x => (x.x)
};

inline const char* rule_name(RuleId r) {
    switch (r) {
        case RuleId::ai_down: return "ai↓";
        case RuleId::ai_up: return "ai↑";
        case RuleId::aw_down: return "aw↓";
        case RuleId::aw_up: return "aw↑";
        case RuleId::ac_down: return "ac↓";
        case RuleId::ac_up: return "ac↑";
        case RuleId::sw: return "s";
        case RuleId::med: return "m";
        case RuleId::eq: return "=";
        case RuleId::gw_down: return "gw↓";
        case RuleId::gw_up: return "gw↑";
        case RuleId::gc_down: return "gc↓";
        case RuleId::gc_up: return "gc↑";
    }
    return "?";
}

// Stable ascii identifiers used by the serialization format.
inline const char* rule_ascii(RuleId r) {
    switch (r) {
        case RuleId::ai_down: return "aid";
        case RuleId::ai_up: return "aiu";
        case RuleId::aw_down: return "awd";
        case RuleId::aw_up: return "awu";
        case RuleId::ac_down: return "acd";
        case RuleId::ac_up: return "acu";
        case RuleId::sw: return "s";
        case RuleId::med: return "m";
        case RuleId::eq: return "eq";
        case RuleId::gw_down: return "gwd";
        case RuleId::gw_up: return "gwu";
        case RuleId::gc_down: return "gcd";
        case RuleId::gc_up: return "gcu";
    }
    return "?";
}

inline bool rule_from_ascii(const std::string& s, RuleId& out) {
    static const std::map<std::string, RuleId> table = {
        {"aid", RuleId::ai_down}, {"aiu", RuleId::ai_up},   {"awd", RuleId::aw_down},
        {"awu", RuleId::aw_up},   {"acd", RuleId::ac_down}, {"acu", RuleId::ac_up},
        {"s", RuleId::sw},        {"m", RuleId::med},       {"eq", RuleId::eq},
        {"gwd", RuleId::gw_down}, {"gwu", RuleId::gw_up},   {"gcd", RuleId::gc_down},
        {"gcu", RuleId::gc_up},
    };
    auto it = table.find(s);
    if (it == table.end()) return false;
    out = it->second;
    return true;
}

inline bool is_structural(RuleId r) {
    switch (r) {
        case RuleId::ai_down:
        case RuleId::ai_up:
        case RuleId::aw_down:
        case RuleId::aw_up:
        case RuleId::ac_down:
        case RuleId::ac_up:
            return true;
        default:
            return false;
    }
}

inline bool is_general(RuleId r) {
    return r == RuleId::gw_down || r == RuleId::gw_up || r == RuleId::gc_down ||
           r == RuleId::gc_up;
}

struct Step {
    RuleId rule;
    Path redex;
    Formula premiss;
    Formula conclusion;
    // Optional explicit occurrence pairing for eq steps: position i of the
    // wiring maps the i-th atom leaf of the premiss redex to the given atom
    // leaf of the conclusion redex.  Empty selects the canonical alignment.
    // Constructions use this where a rearrangement moves a subterm across an
    // identical-looking one and the canonical alignment would tie them the
    // wrong way round.
    std::vector<int32_t> eq_wiring;
};

struct Derivation {
    Formula premiss = nullptr;
    std::vector<Step> steps;

    Formula conclusion() const { return steps.empty() ? premiss : steps.back().conclusion; }

    std::vector<Formula> lines() const {
        std::vector<Formula> out{premiss};
        for (const Step& s : steps) out.push_back(s.conclusion);
        return out;
    }

    // size: sum of leaf counts over all lines.
    uint64_t size() const {
        uint64_t total = sks::size(premiss);
        for (const Step& s : steps) total += sks::size(s.conclusion);
        return total;
    }
};

inline Derivation single_line(Formula f) { return Derivation{f, {}}; }

// Size with the equational steps left implicit, as when lines are read as
// equivalence classes under the syntactic equations: the premiss plus the
// conclusions of the proper rule instances.
inline uint64_t size_modulo_eq(const Derivation& d) {
    uint64_t total = size(d.premiss);
    for (const Step& s : d.steps)
        if (s.rule != RuleId::eq) total += size(s.conclusion);
    return total;
}

// ---- step schemas ------------------------------------------------------------

namespace detail {

inline bool dual_atom_pair(Formula x, Formula y) {
    return is_atom(x) && is_atom(y) && x->atom == y->atom && x->neg != y->neg;
}

}  // namespace detail

// Verifies the redex against the rule schema and the context outside it.
// Returns an empty string on success, else a reason.
inline std::string check_step(const Step& s) {
    Formula pr, cr;
    try {
        pr = subformula_at(s.premiss, s.redex);
        cr = subformula_at(s.conclusion, s.redex);
    } catch (const std::out_of_range&) {
        return "redex path leaves the tree";
    }
    // Context identity outside the redex.
    if (replace_at(s.premiss, s.redex, cr) != s.conclusion)
        return "context differs outside the redex";
    if (!s.eq_wiring.empty() && s.rule != RuleId::eq)
        return "only eq steps carry an occurrence map";
    switch (s.rule) {
        case RuleId::ai_down:
            if (pr != f_true()) return "ai-down: premiss redex is not t";
            if (cr->kind != Kind::Or || !detail::dual_atom_pair(cr->left, cr->right))
                return "ai-down: conclusion redex is not a disjunction of dual atoms";
            return "";
        case RuleId::ai_up:
            if (cr != f_false()) return "ai-up: conclusion redex is not f";
            if (pr->kind != Kind::And || !detail::dual_atom_pair(pr->left, pr->right))
                return "ai-up: premiss redex is not a conjunction of dual atoms";
            return "";
        case RuleId::aw_down:
            if (pr != f_false()) return "aw-down: premiss redex is not f";
            if (!is_atom(cr)) return "aw-down: conclusion redex is not an atom";
            return "";
        case RuleId::aw_up:
            if (!is_atom(pr)) return "aw-up: premiss redex is not an atom";
            if (cr != f_true()) return "aw-up: conclusion redex is not t";
            return "";
        case RuleId::ac_down:
            if (pr->kind != Kind::Or || pr->left != pr->right || !is_atom(pr->left))
                return "ac-down: premiss redex is not a disjunction of one atom twice";
            if (cr != pr->left) return "ac-down: conclusion redex is not that atom";
            return "";
        case RuleId::ac_up:
            if (!is_atom(pr)) return "ac-up: premiss redex is not an atom";
            if (cr->kind != Kind::And || cr->left != pr || cr->right != pr)
                return "ac-up: conclusion redex is not the atom conjoined with itself";
            return "";
        case RuleId::sw: {
            if (pr->kind != Kind::And || pr->right->kind != Kind::Or)
                return "switch: premiss redex is not (x.[y.z])";
            Formula x = pr->left, y = pr->right->left, z = pr->right->right;
            if (cr != f_or(f_and(x, y), z)) return "switch: conclusion redex mismatch";
            return "";
        }
        case RuleId::med: {
            if (pr->kind != Kind::Or || pr->left->kind != Kind::And ||
                pr->right->kind != Kind::And)
                return "medial: premiss redex is not [(x.y).(z.w)]";
            Formula x = pr->left->left, y = pr->left->right;
            Formula z = pr->right->left, w = pr->right->right;
            if (cr != f_and(f_or(x, z), f_or(y, w))) return "medial: conclusion redex mismatch";
            return "";
        }
        case RuleId::eq: {
            if (canonical(pr) != canonical(cr)) return "eq: sides differ modulo the equations";
            if (s.eq_wiring.empty()) return "";
            // The equations preserve the atom occurrences, so an explicit
            // pairing must be a literal-preserving bijection on the redex.
            uint32_t pa = static_cast<uint32_t>(pr->atom_leaves);
            if (s.eq_wiring.size() != pa) return "eq: occurrence map has the wrong size";
            std::vector<bool> hit(pa, false);
            for (uint32_t i = 0; i < pa; ++i) {
                int32_t w = s.eq_wiring[i];
                if (w < 0 || static_cast<uint32_t>(w) >= pa)
                    return "eq: occurrence map leaves the redex";
                if (hit[w]) return "eq: occurrence map is not a bijection";
                hit[w] = true;
                if (atom_at(pr, i) != atom_at(cr, static_cast<uint32_t>(w)))
                    return "eq: occurrence map changes a literal";
            }
            return "";
        }
        case RuleId::gw_down:
            if (pr != f_false()) return "gw-down: premiss redex is not f";
            return "";
        case RuleId::gw_up:
            if (cr != f_true()) return "gw-up: conclusion redex is not t";
            return "";
        case RuleId::gc_down:
            if (pr->kind != Kind::Or || pr->left != pr->right)
                return "gc-down: premiss redex is not a disjunction of one formula twice";
            if (cr != pr->left) return "gc-down: conclusion redex mismatch";
            return "";
        case RuleId::gc_up:
            if (cr->kind != Kind::And || cr->left != pr || cr->right != pr)
                return "gc-up: conclusion redex is not the premiss conjoined with itself";
            return "";
    }
    return "unknown rule";
}

// ---- occurrence tracing ------------------------------------------------------

// How the atom occurrences of a step's premiss line relate to those of its
// conclusion line.  Indices are atom-leaf indices within the full lines.
// Active occurrences consumed by a structural vertex appear in `destroyed`
// (in the vertex's upper-port order); occurrences the vertex creates appear
// in `created` (lower-port order).
struct StepTrace {
    std::vector<int32_t> to_conclusion;  // premiss index -> conclusion index, -1 if destroyed
    std::vector<uint32_t> created;
    std::vector<uint32_t> destroyed;
};

namespace detail {

inline uint32_t atoms_before(Formula f, const Path& p) {
    uint32_t n = 0;
    for (uint8_t stepdir : p) {
        if (stepdir) {
            n += static_cast<uint32_t>(f->left->atom_leaves);
            f = f->right;
        } else {
            f = f->left;
        }
    }
    return n;
}

}  // namespace detail

// Computes the occurrence trace of a checked step.  Throws on steps that do
// not pass check_step and on general rules (expand those first).
inline StepTrace compute_trace(const Step& s) {
    {
        std::string err = check_step(s);
        if (!err.empty()) throw std::invalid_argument("compute_trace: " + err);
    }
    if (is_general(s.rule))
        throw std::invalid_argument("compute_trace: general rule steps have no atomic trace");

    Formula pr = subformula_at(s.premiss, s.redex);
    Formula cr = subformula_at(s.conclusion, s.redex);
    uint32_t base_p = detail::atoms_before(s.premiss, s.redex);
    uint32_t base_c = base_p;  // context to the left of the redex is identical
    uint32_t pa = static_cast<uint32_t>(pr->atom_leaves);
    uint32_t ca = static_cast<uint32_t>(cr->atom_leaves);
    uint32_t total_p = static_cast<uint32_t>(s.premiss->atom_leaves);

    StepTrace t;
    t.to_conclusion.assign(total_p, -1);
    // Context occurrences left of the redex map identically; right of the
    // redex they shift by the redex atom-count delta.
    for (uint32_t i = 0; i < base_p; ++i) t.to_conclusion[i] = static_cast<int32_t>(i);
    for (uint32_t i = base_p + pa; i < total_p; ++i)
        t.to_conclusion[i] = static_cast<int32_t>(i - pa + ca);

    auto move_block = [&](uint32_t from, uint32_t to, uint32_t count) {
        for (uint32_t i = 0; i < count; ++i)
            t.to_conclusion[base_p + from + i] = static_cast<int32_t>(base_c + to + i);
    };

    switch (s.rule) {
        case RuleId::ai_down:
            t.created = {base_c, base_c + 1};
            break;
        case RuleId::ai_up:
            t.destroyed = {base_p, base_p + 1};
            break;
        case RuleId::aw_down:
            t.created = {base_c};
            break;
        case RuleId::aw_up:
            t.destroyed = {base_p};
            break;
        case RuleId::ac_down:
            t.destroyed = {base_p, base_p + 1};
            t.created = {base_c};
            break;
        case RuleId::ac_up:
            t.destroyed = {base_p};
            t.created = {base_c, base_c + 1};
            break;
        case RuleId::sw:
            // (x.[y.z]) => [(x.y).z]: linear order of blocks is unchanged.
            move_block(0, 0, pa);
            break;
        case RuleId::med: {
            // [(x.y).(z.w)] => ([x.z].[y.w]): y and z swap block positions.
            uint32_t nx = static_cast<uint32_t>(pr->left->left->atom_leaves);
            uint32_t ny = static_cast<uint32_t>(pr->left->right->atom_leaves);
            uint32_t nz = static_cast<uint32_t>(pr->right->left->atom_leaves);
            uint32_t nw = static_cast<uint32_t>(pr->right->right->atom_leaves);
            move_block(0, 0, nx);
            move_block(nx, nx + nz, ny);
            move_block(nx + ny, nx, nz);
            move_block(nx + ny + nz, nx + ny + nz, nw);
            break;
        }
        case RuleId::eq: {
            if (!s.eq_wiring.empty()) {
                for (uint32_t i = 0; i < pa; ++i)
                    t.to_conclusion[base_p + i] =
                        static_cast<int32_t>(base_c + static_cast<uint32_t>(s.eq_wiring[i]));
                break;
            }
            // Align the two sides through their canonical forms; the stable
            // sort in canonicalisation makes the pairing leftmost-first.
            auto [cp, tp] = canonical_trace(pr);
            auto [cc, tc] = canonical_trace(cr);
            if (cp != cc) throw std::logic_error("compute_trace: eq sides disagree");
            if (tp.size() != tc.size()) throw std::logic_error("compute_trace: eq trace size");
            for (size_t i = 0; i < tp.size(); ++i)
                t.to_conclusion[base_p + tp[i]] = static_cast<int32_t>(base_c + tc[i]);
            break;
        }
        default:
            throw std::logic_error("compute_trace: unhandled rule");
    }
    return t;
}

// ---- derivation checking -----------------------------------------------------

struct CheckReport {
    bool valid = true;
    std::map<RuleId, uint64_t> rule_counts;
    uint64_t size = 0;
    std::vector<std::pair<size_t, std::string>> failures;
};

inline CheckReport check_derivation(const Derivation& d) {
    CheckReport r;
    r.size = d.size();
    Formula cur = d.premiss;
    for (size_t i = 0; i < d.steps.size(); ++i) {
        const Step& s = d.steps[i];
        if (s.premiss != cur) {
            r.failures.emplace_back(i, "step premiss is not the previous line");
        }
        std::string err = check_step(s);
        if (!err.empty()) r.failures.emplace_back(i, err);
        r.rule_counts[s.rule]++;
        cur = s.conclusion;
    }
    r.valid = r.failures.empty();
    return r;
}

inline bool is_proof(const Derivation& d) { return canonical(d.premiss) == f_true(); }

// ---- construction ------------------------------------------------------------

// Incremental derivation builder.  Every applied step is schema-checked, so
// a malformed construction fails immediately rather than at check time.
class Builder {
public:
    explicit Builder(Formula premiss) : d_{premiss, {}}, cur_(premiss) {}

    Formula current() const { return cur_; }

    Derivation take() { return std::move(d_); }

    void push(RuleId rule, const Path& p, Formula conclusion,
              std::vector<int32_t> eq_wiring = {}) {
        Step s{rule, p, cur_, conclusion, std::move(eq_wiring)};
        std::string err = check_step(s);
        if (!err.empty())
            throw std::logic_error(std::string("Builder: invalid ") + rule_ascii(rule) +
                                   " step: " + err);
        d_.steps.push_back(std::move(s));
        cur_ = d_.steps.back().conclusion;
    }

    // Rewrites the subterm at p according to the rule, computing the
    // conclusion from the schema.
    void rewrite(RuleId rule, const Path& p) {
        Formula pr = subformula_at(cur_, p);
        Formula cr = nullptr;
        switch (rule) {
            case RuleId::ai_up:
                cr = f_false();
                break;
            case RuleId::aw_up:
                cr = f_true();
                break;
            case RuleId::ac_down:
            case RuleId::gc_down:
                cr = pr->left;
                break;
            case RuleId::ac_up:
            case RuleId::gc_up:
                cr = f_and(pr, pr);
                break;
            case RuleId::sw:
                cr = f_or(f_and(pr->left, pr->right->left), pr->right->right);
                break;
            case RuleId::med:
                cr = f_and(f_or(pr->left->left, pr->right->left),
                           f_or(pr->left->right, pr->right->right));
                break;
            default:
                throw std::logic_error("Builder::rewrite: rule needs an explicit conclusion");
        }
        push(rule, p, replace_at(cur_, p, cr));
    }

    void ai_down(const Path& p, const Literal& l) {
        push(RuleId::ai_down, p, replace_at(cur_, p, f_or(f_atom(l), f_atom(l.dual()))));
    }

    void aw_down(const Path& p, const Literal& l) {
        push(RuleId::aw_down, p, replace_at(cur_, p, f_atom(l)));
    }

    void gw_down(const Path& p, Formula alpha) {
        push(RuleId::gw_down, p, replace_at(cur_, p, alpha));
    }

    void gw_up(const Path& p) { push(RuleId::gw_up, p, replace_at(cur_, p, f_true())); }

    // Appends an equality step to exactly `target` unless already there.
    // A non-empty wiring forces the step even when the line is unchanged.
    void eq_to(Formula target, std::vector<int32_t> eq_wiring = {}) {
        if (cur_ == target && eq_wiring.empty()) return;
        push(RuleId::eq, {}, target, std::move(eq_wiring));
    }

    // Splices a whole derivation at the subterm position `at`.  The current
    // line must carry sub.premiss there.
    void splice(const Derivation& sub, const Path& at) {
        if (subformula_at(cur_, at) != sub.premiss)
            throw std::logic_error("Builder::splice: premiss mismatch at splice point");
        for (const Step& s : sub.steps) {
            Path p = at;
            p.insert(p.end(), s.redex.begin(), s.redex.end());
            push(s.rule, p, replace_at(cur_, at, s.conclusion), s.eq_wiring);
        }
    }

private:
    Derivation d_;
    Formula cur_;
};

// Occurrence map for an eq step that relocates whole subterms.  Each entry
// names a subterm of the premiss and its new position in the conclusion; the
// listed subterms must be pairwise disjoint and carried over unchanged.
// Leaves outside the listed blocks pair up in left-to-right order, which must
// preserve their literals; a mismatch means the block list does not describe
// the rearrangement and is reported as a logic error.
inline std::vector<int32_t> block_wiring(Formula premiss, Formula conclusion,
                                         const std::vector<std::pair<Path, Path>>& blocks) {
    uint32_t pa = static_cast<uint32_t>(premiss->atom_leaves);
    uint32_t ca = static_cast<uint32_t>(conclusion->atom_leaves);
    if (pa != ca) throw std::logic_error("block_wiring: sides differ in atom count");
    std::vector<int32_t> map(pa, -1);
    std::vector<bool> taken(ca, false);
    for (const auto& [from, to] : blocks) {
        Formula bf = subformula_at(premiss, from);
        Formula bt = subformula_at(conclusion, to);
        if (bf != bt) throw std::logic_error("block_wiring: moved subterm changed");
        uint32_t base_f = detail::atoms_before(premiss, from);
        uint32_t base_t = detail::atoms_before(conclusion, to);
        for (uint32_t i = 0; i < bf->atom_leaves; ++i) {
            if (map[base_f + i] != -1 || taken[base_t + i])
                throw std::logic_error("block_wiring: blocks overlap");
            map[base_f + i] = static_cast<int32_t>(base_t + i);
            taken[base_t + i] = true;
        }
    }
    uint32_t next = 0;
    for (uint32_t i = 0; i < pa; ++i) {
        if (map[i] != -1) continue;
        while (next < ca && taken[next]) ++next;
        if (next == ca || atom_at(premiss, i) != atom_at(conclusion, next))
            throw std::logic_error("block_wiring: leftover occurrences do not align");
        map[i] = static_cast<int32_t>(next);
        taken[next] = true;
    }
    return map;
}

// ---- composition -------------------------------------------------------------

inline Derivation in_context(const Context& ctx, const Derivation& d) {
    Builder b(ctx.plug(d.premiss));
    b.splice(d, ctx.hole);
    return b.take();
}

// Vertical pasting; inserts one eq step when the junction formulae differ
// syntactically.  Requires =-equal junction lines.
inline Derivation compose_seq(const Derivation& d1, const Derivation& d2) {
    if (canonical(d1.conclusion()) != canonical(d2.premiss))
        throw std::invalid_argument("compose_seq: junction formulae are not =-equal");
    Builder b(d1.premiss);
    b.splice(d1, {});
    b.eq_to(d2.premiss);
    b.splice(d2, {});
    return b.take();
}

// Runs d1 inside [<>.premiss(d2)], then d2 inside [conclusion(d1).<>].
inline Derivation compose_disj(const Derivation& d1, const Derivation& d2) {
    Builder b(f_or(d1.premiss, d2.premiss));
    b.splice(d1, {0});
    b.splice(d2, {1});
    return b.take();
}

inline Derivation compose_conj(const Derivation& d1, const Derivation& d2) {
    Builder b(f_and(d1.premiss, d2.premiss));
    b.splice(d1, {0});
    b.splice(d2, {1});
    return b.take();
}

// ---- dualisation ---------------------------------------------------------------

// The dual of a derivation from A to B is a derivation from dual(B) to
// dual(A).  Rules map to their duals; switch needs a commutativity
// adjustment on both sides, which eq steps absorb.
inline Derivation dualize(const Derivation& d) {
    Builder b(dual(d.conclusion()));
    for (size_t i = d.steps.size(); i-- > 0;) {
        const Step& s = d.steps[i];
        Formula target = dual(s.premiss);
        const Path& p = s.redex;
        switch (s.rule) {
            case RuleId::ai_down: b.push(RuleId::ai_up, p, target); break;
            case RuleId::ai_up: b.push(RuleId::ai_down, p, target); break;
            case RuleId::aw_down: b.push(RuleId::aw_up, p, target); break;
            case RuleId::aw_up: b.push(RuleId::aw_down, p, target); break;
            case RuleId::ac_down: b.push(RuleId::ac_up, p, target); break;
            case RuleId::ac_up: b.push(RuleId::ac_down, p, target); break;
            case RuleId::med: b.push(RuleId::med, p, target); break;
            case RuleId::eq: {
                // De Morgan duals keep the leaf order, so an explicit
                // occurrence map carries over inverted.
                std::vector<int32_t> w;
                if (!s.eq_wiring.empty()) {
                    w.assign(s.eq_wiring.size(), 0);
                    for (size_t k = 0; k < s.eq_wiring.size(); ++k)
                        w[static_cast<size_t>(s.eq_wiring[k])] = static_cast<int32_t>(k);
                }
                b.push(RuleId::eq, p, target, std::move(w));
                break;
            }
            case RuleId::gw_down: b.push(RuleId::gw_up, p, target); break;
            case RuleId::gw_up: b.push(RuleId::gw_down, p, target); break;
            case RuleId::gc_down: b.push(RuleId::gc_up, p, target); break;
            case RuleId::gc_up: b.push(RuleId::gc_down, p, target); break;
            case RuleId::sw: {
                // original: (x.[y.z]) => [(x.y).z]; dual current redex is
                // ([-x.-y].-z); commute to (-z.[-y.-x]), switch, commute.
                Formula pr = subformula_at(s.premiss, p);
                Formula dx = dual(pr->left);
                Formula dy = dual(pr->right->left);
                Formula dz = dual(pr->right->right);
                b.eq_to(replace_at(b.current(), p, f_and(dz, f_or(dy, dx))));
                b.rewrite(RuleId::sw, p);
                b.eq_to(target);
                break;
            }
        }
    }
    return b.take();
}

// ---- atomisation of general rules ---------------------------------------------

// f => alpha using {aw-down, s, eq}.  Plain weakenings reach every atom; a
// t leaf in disjunctive position needs the unit derivation
// f = (f.[t.t]) =s=> [(f.t).t] = t, hence the switch in the rule set.
inline Derivation expand_gw_down(Formula alpha) {
    if (alpha == f_false()) return single_line(f_false());
    if (alpha == f_true()) {
        Builder b(f_false());
        b.push(RuleId::eq, {}, f_and(f_false(), f_or(f_true(), f_true())));
        b.rewrite(RuleId::sw, {});
        b.push(RuleId::eq, {}, f_true());
        return b.take();
    }
    if (is_atom(alpha)) {
        Builder b(f_false());
        b.aw_down({}, alpha->literal());
        return b.take();
    }
    // Composite: split f into a pair of fs under the same connective and
    // recurse on both sides.
    Builder b(f_false());
    Formula ff = (alpha->kind == Kind::Or) ? f_or(f_false(), f_false())
                                           : f_and(f_false(), f_false());
    b.push(RuleId::eq, {}, ff);
    b.splice(expand_gw_down(alpha->left), {0});
    b.splice(expand_gw_down(alpha->right), {1});
    return b.take();
}

// alpha => t using {aw-up, s, eq}.
inline Derivation expand_gw_up(Formula alpha) { return dualize(expand_gw_down(dual(alpha))); }

// [alpha.alpha] => alpha using {ac-down, m, eq}.
inline Derivation expand_gc_down(Formula alpha) {
    Formula prem = f_or(alpha, alpha);
    if (is_unit(alpha)) {
        Builder b(prem);
        b.push(RuleId::eq, {}, alpha);
        return b.take();
    }
    if (is_atom(alpha)) {
        Builder b(prem);
        b.rewrite(RuleId::ac_down, {});
        return b.take();
    }
    Builder b(prem);
    Formula x = alpha->left, y = alpha->right;
    if (alpha->kind == Kind::Or) {
        // [[x.y].[x.y]] = [[x.x].[y.y]], then recurse on both halves.
        b.eq_to(f_or(f_or(x, x), f_or(y, y)));
    } else {
        // [(x.y).(x.y)] =m=> ([x.x].[y.y]), then recurse on both halves.
        b.rewrite(RuleId::med, {});
    }
    b.splice(expand_gc_down(x), {0});
    b.splice(expand_gc_down(y), {1});
    b.eq_to(alpha);
    return b.take();
}

// alpha => (alpha.alpha) using {ac-up, m, eq}.
inline Derivation expand_gc_up(Formula alpha) { return dualize(expand_gc_down(dual(alpha))); }

// t => [beta.dual(beta)] using {ai-down, s, eq}: identity on a whole formula,
// two switches per connective.
inline Derivation expand_gi_down(Formula beta) {
    Formula goal = f_or(beta, dual(beta));
    if (beta == f_true() || beta == f_false()) {
        Builder b(f_true());
        b.push(RuleId::eq, {}, goal);
        return b.take();
    }
    if (is_atom(beta)) {
        Builder b(f_true());
        b.ai_down({}, beta->literal());
        return b.take();
    }
    Formula x = beta->left, y = beta->right;
    Formula dx = dual(x), dy = dual(y);
    Builder b(f_true());
    b.eq_to(f_and(f_true(), f_true()));
    b.splice(expand_gi_down(x), {0});
    b.splice(expand_gi_down(y), {1});
    // current: ([x.dx].[y.dy]); two switches gather one pair, which pair
    // depending on the connective of beta.
    if (beta->kind == Kind::Or) {
        // goal [[x.y].(dx.dy)]: keep the duals grouped.
        b.eq_to(f_and(f_or(x, dx), f_or(dy, y)));
        b.rewrite(RuleId::sw, {});  // [([x.dx].dy).y]
        b.eq_to(replace_at(b.current(), {0}, f_and(dy, f_or(dx, x))));
        b.rewrite(RuleId::sw, {0});  // [[(dy.dx).x].y]
    } else {
        // goal [(x.y).[dx.dy]]: keep the positives grouped.
        b.rewrite(RuleId::sw, {});  // [([x.dx].y).dy]
        b.eq_to(replace_at(b.current(), {0}, f_and(y, f_or(x, dx))));
        b.rewrite(RuleId::sw, {0});  // [[(y.x).dx].dy]
    }
    b.eq_to(goal);
    return b.take();
}

// (beta.dual(beta)) => f using {ai-up, s, eq}.
inline Derivation expand_gi_up(Formula beta) { return dualize(expand_gi_down(dual(beta))); }

// Atomises one general-rule step into a derivation over atomic rules with
// the same premiss and conclusion lines.
inline Derivation expand_nonatomic(const Step& s) {
    std::string err = check_step(s);
    if (!err.empty()) throw std::invalid_argument("expand_nonatomic: " + err);
    Formula pr = subformula_at(s.premiss, s.redex);
    Formula cr = subformula_at(s.conclusion, s.redex);
    Derivation core;
    switch (s.rule) {
        case RuleId::gw_down: core = expand_gw_down(cr); break;
        case RuleId::gw_up: core = expand_gw_up(pr); break;
        case RuleId::gc_down: core = expand_gc_down(cr); break;
        case RuleId::gc_up: core = expand_gc_up(pr); break;
        default:
            throw std::invalid_argument("expand_nonatomic: not a general rule step");
    }
    return in_context(context_at(s.premiss, s.redex), core);
}

// Expands every general-rule step of a derivation in place.
inline Derivation expand_all_general(const Derivation& d) {
    Builder b(d.premiss);
    for (const Step& s : d.steps) {
        if (is_general(s.rule)) {
            b.splice(expand_nonatomic(s), {});
        } else {
            b.push(s.rule, s.redex, s.conclusion, s.eq_wiring);
        }
    }
    return b.take();
}

// ---- rendering -----------------------------------------------------------------

// Plain-text render in the stacked notation: lines separated by rule bars.
inline std::string render_text(const Derivation& d) {
    std::vector<std::string> lines;
    lines.push_back(render(d.premiss));
    for (const Step& s : d.steps) lines.push_back(render(s.conclusion));
    size_t width = 0;
    for (const auto& l : lines) width = std::max(width, l.size());
    width = std::min<size_t>(width, 72);
    std::string bar(width, '-');
    std::ostringstream out;
    out << lines[0] << "\n";
    for (size_t i = 0; i < d.steps.size(); ++i) {
        out << bar << " " << rule_name(d.steps[i].rule) << "\n";
        out << lines[i + 1] << "\n";
    }
    return out.str();
}

}  // namespace sks

#endif  // SKS_DERIVATION_HPP
