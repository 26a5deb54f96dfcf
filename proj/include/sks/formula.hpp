#ifndef SKS_FORMULA_HPP
#define SKS_FORMULA_HPP

// Formulae of system SKS: units f/t, atoms a and their duals -a, and the
// two binary connectives [.] (disjunction) and (.) (conjunction).
//
// Nodes are hash-consed into a global intern table, so a Formula is just a
// pointer and structural equality is pointer equality.  Connectives are kept
// binary internally; the printer flattens same-connective spines to the
// n-ary concrete syntax.  Every node caches its leaf count, atom-leaf count
// and a lazily computed canonical form used to decide equality modulo the
// eight syntactic equations (commutativity and associativity of both
// connectives, unit deletion [x.f] = x and (x.t) = x, and the unit
// collapses [t.t] = t and (f.f) = f).

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sks {

enum class Kind : uint8_t { False, True, Atom, Or, And };

struct Node;
using Formula = const Node*;

// Interned atom names.  Ids are stable for the lifetime of the process.
class AtomTable {
public:
    static AtomTable& instance() {
        static AtomTable t;
        return t;
    }

    uint32_t id(const std::string& name) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        uint32_t id = static_cast<uint32_t>(names_.size());
        names_.push_back(name);
        ids_.emplace(name, id);
        return id;
    }

    const std::string& name(uint32_t id) const {
        std::lock_guard<std::mutex> lock(mu_);
        return names_.at(id);
    }

private:
    mutable std::mutex mu_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, uint32_t> ids_;
};

// An atom occurrence payload: interned name id plus polarity.
struct Literal {
    uint32_t atom = 0;
    bool neg = false;

    friend bool operator==(const Literal& a, const Literal& b) {
        return a.atom == b.atom && a.neg == b.neg;
    }
    friend bool operator!=(const Literal& a, const Literal& b) { return !(a == b); }
    friend bool operator<(const Literal& a, const Literal& b) {
        const std::string& an = AtomTable::instance().name(a.atom);
        const std::string& bn = AtomTable::instance().name(b.atom);
        if (an != bn) return an < bn;
        return a.neg < b.neg;  // positive before negated
    }
    Literal dual() const { return Literal{atom, !neg}; }
    std::string text() const {
        const std::string& n = AtomTable::instance().name(atom);
        return neg ? "-" + n : n;
    }
};

struct Node {
    Kind kind;
    bool neg = false;         // atoms only
    uint32_t atom = 0;        // atoms only
    Formula left = nullptr;   // Or/And only
    Formula right = nullptr;  // Or/And only
    uint64_t leaves = 1;      // total leaf count (units + atoms); the size measure
    uint64_t atom_leaves = 0; // atom leaf count only
    uint32_t depth = 0;       // height of the binary tree
    size_t hash = 0;
    mutable std::atomic<Formula> canon{nullptr};  // cached canonical form

    Literal literal() const { return Literal{atom, neg}; }
};

namespace detail {

struct NodeKey {
    Kind kind;
    bool neg;
    uint32_t atom;
    Formula left;
    Formula right;

    friend bool operator==(const NodeKey& a, const NodeKey& b) {
        return a.kind == b.kind && a.neg == b.neg && a.atom == b.atom &&
               a.left == b.left && a.right == b.right;
    }
};

struct NodeKeyHash {
    size_t operator()(const NodeKey& k) const {
        size_t h = 1469598103934665603ull;
        auto mix = [&h](size_t v) {
            h ^= v;
            h *= 1099511628211ull;
        };
        mix(static_cast<size_t>(k.kind));
        mix(static_cast<size_t>(k.neg));
        mix(static_cast<size_t>(k.atom));
        mix(reinterpret_cast<size_t>(k.left));
        mix(reinterpret_cast<size_t>(k.right));
        return h;
    }
};

// Global intern table.  Nodes live for the whole process.
class InternTable {
public:
    static InternTable& instance() {
        static InternTable t;
        return t;
    }

    Formula intern(Kind kind, bool neg, uint32_t atom, Formula left, Formula right) {
        NodeKey key{kind, neg, atom, left, right};
        std::lock_guard<std::mutex> lock(mu_);
        auto it = table_.find(key);
        if (it != table_.end()) return it->second;
        auto node = new Node();
        node->kind = kind;
        node->neg = neg;
        node->atom = atom;
        node->left = left;
        node->right = right;
        if (kind == Kind::Or || kind == Kind::And) {
            node->leaves = left->leaves + right->leaves;
            node->atom_leaves = left->atom_leaves + right->atom_leaves;
            node->depth = 1 + std::max(left->depth, right->depth);
        } else {
            node->leaves = 1;
            node->atom_leaves = (kind == Kind::Atom) ? 1 : 0;
            node->depth = 0;
        }
        node->hash = NodeKeyHash{}(key);
        table_.emplace(key, node);
        arena_.push_back(node);
        return node;
    }

private:
    std::mutex mu_;
    std::unordered_map<NodeKey, Formula, NodeKeyHash> table_;
    std::vector<Formula> arena_;
};

}  // namespace detail

// ---- constructors ----------------------------------------------------------

inline Formula f_false() {
    return detail::InternTable::instance().intern(Kind::False, false, 0, nullptr, nullptr);
}

inline Formula f_true() {
    return detail::InternTable::instance().intern(Kind::True, false, 0, nullptr, nullptr);
}

inline Formula f_atom(uint32_t atom, bool neg = false) {
    return detail::InternTable::instance().intern(Kind::Atom, neg, atom, nullptr, nullptr);
}

inline Formula f_atom(const std::string& name, bool neg = false) {
    return f_atom(AtomTable::instance().id(name), neg);
}

inline Formula f_atom(const Literal& l) { return f_atom(l.atom, l.neg); }

inline Formula f_or(Formula a, Formula b) {
    return detail::InternTable::instance().intern(Kind::Or, false, 0, a, b);
}

inline Formula f_and(Formula a, Formula b) {
    return detail::InternTable::instance().intern(Kind::And, false, 0, a, b);
}

// Right-nested n-ary builders.  An empty operand list yields the connective's
// unit: f for [.], t for (.).
inline Formula f_or(const std::vector<Formula>& xs) {
    if (xs.empty()) return f_false();
    Formula acc = xs.back();
    for (size_t i = xs.size() - 1; i-- > 0;) acc = f_or(xs[i], acc);
    return acc;
}

inline Formula f_and(const std::vector<Formula>& xs) {
    if (xs.empty()) return f_true();
    Formula acc = xs.back();
    for (size_t i = xs.size() - 1; i-- > 0;) acc = f_and(xs[i], acc);
    return acc;
}

inline bool is_unit(Formula f) { return f->kind == Kind::False || f->kind == Kind::True; }
inline bool is_atom(Formula f) { return f->kind == Kind::Atom; }
inline bool is_binary(Formula f) { return f->kind == Kind::Or || f->kind == Kind::And; }

// size(f): number of unit and atom occurrences.
inline uint64_t size(Formula f) { return f->leaves; }

// ---- De Morgan dual --------------------------------------------------------

inline Formula dual(Formula f) {
    switch (f->kind) {
        case Kind::False: return f_true();
        case Kind::True: return f_false();
        case Kind::Atom: return f_atom(f->atom, !f->neg);
        case Kind::Or: return f_and(dual(f->left), dual(f->right));
        case Kind::And: return f_or(dual(f->left), dual(f->right));
    }
    throw std::logic_error("dual: bad kind");
}

// ---- parsing ---------------------------------------------------------------

struct ParseError : std::runtime_error {
    size_t position;
    ParseError(size_t pos, const std::string& msg)
        : std::runtime_error("parse error at " + std::to_string(pos) + ": " + msg),
          position(pos) {}
};

namespace detail {

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    Formula parse() {
        Formula f = formula();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError(pos_, "trailing input");
        return f;
    }

private:
    const std::string& text_;
    size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() &&
               (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                text_[pos_] == '\r'))
            ++pos_;
    }

    char peek() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError(pos_, "unexpected end of input");
        return text_[pos_];
    }

    void expect(char c) {
        if (peek() != c)
            throw ParseError(pos_, std::string("expected '") + c + "'");
        ++pos_;
    }

    Formula formula() {
        char c = peek();
        if (c == '[') return list(']', true);
        if (c == '(') return list(')', false);
        if (c == '-') {
            ++pos_;
            return f_atom(ident(), true);
        }
        if (c >= 'a' && c <= 'z') {
            std::string name = ident();
            if (name == "f") return f_false();
            if (name == "t") return f_true();
            return f_atom(name, false);
        }
        throw ParseError(pos_, "expected formula");
    }

    std::string ident() {
        skip_ws();
        size_t start = pos_;
        if (pos_ >= text_.size() || text_[pos_] < 'a' || text_[pos_] > 'z')
            throw ParseError(pos_, "expected atom name");
        ++pos_;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')
                ++pos_;
            else
                break;
        }
        return text_.substr(start, pos_ - start);
    }

    Formula list(char close, bool disj) {
        ++pos_;  // consume the opener
        std::vector<Formula> items;
        items.push_back(formula());
        expect('.');
        items.push_back(formula());
        while (peek() == '.') {
            ++pos_;
            items.push_back(formula());
        }
        expect(close);
        return disj ? f_or(items) : f_and(items);
    }
};

}  // namespace detail

inline Formula parse(const std::string& text) { return detail::Parser(text).parse(); }

// ---- printing --------------------------------------------------------------

namespace detail {

inline void flatten(Formula f, Kind kind, std::vector<Formula>& out) {
    if (f->kind == kind) {
        flatten(f->left, kind, out);
        flatten(f->right, kind, out);
    } else {
        out.push_back(f);
    }
}

inline void render_to(Formula f, std::string& out) {
    switch (f->kind) {
        case Kind::False: out += 'f'; return;
        case Kind::True: out += 't'; return;
        case Kind::Atom:
            if (f->neg) out += '-';
            out += AtomTable::instance().name(f->atom);
            return;
        case Kind::Or:
        case Kind::And: {
            std::vector<Formula> items;
            flatten(f, f->kind, items);
            out += (f->kind == Kind::Or) ? '[' : '(';
            for (size_t i = 0; i < items.size(); ++i) {
                if (i) out += '.';
                render_to(items[i], out);
            }
            out += (f->kind == Kind::Or) ? ']' : ')';
            return;
        }
    }
}

inline void render_binary_to(Formula f, std::string& out) {
    switch (f->kind) {
        case Kind::False: out += 'f'; return;
        case Kind::True: out += 't'; return;
        case Kind::Atom:
            if (f->neg) out += '-';
            out += AtomTable::instance().name(f->atom);
            return;
        case Kind::Or:
        case Kind::And:
            out += (f->kind == Kind::Or) ? '[' : '(';
            render_binary_to(f->left, out);
            out += '.';
            render_binary_to(f->right, out);
            out += (f->kind == Kind::Or) ? ']' : ')';
            return;
    }
}

}  // namespace detail

inline std::string render(Formula f) {
    std::string out;
    detail::render_to(f, out);
    return out;
}

// Fully bracketed two-operand form.  parse reads it back to the identical
// tree, which the flattening render cannot promise for left-leaning spines;
// serialization uses this form so redex paths survive a round trip.
inline std::string render_binary(Formula f) {
    std::string out;
    detail::render_binary_to(f, out);
    return out;
}

// ---- canonical form --------------------------------------------------------

namespace detail {

// Total order on canonical formulae: units (f < t) < atoms (by name, then
// positive before negated) < disjunctions < conjunctions; composite nodes
// compare by their flattened child lists, lexicographically.
inline int canon_rank(Formula f) {
    switch (f->kind) {
        case Kind::False: return 0;
        case Kind::True: return 1;
        case Kind::Atom: return 2;
        case Kind::Or: return 3;
        case Kind::And: return 4;
    }
    return 5;
}

inline int canon_cmp(Formula a, Formula b) {
    if (a == b) return 0;
    int ra = canon_rank(a), rb = canon_rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    if (a->kind == Kind::Atom) {
        const std::string& an = AtomTable::instance().name(a->atom);
        const std::string& bn = AtomTable::instance().name(b->atom);
        if (an != bn) return an < bn ? -1 : 1;
        if (a->neg != b->neg) return a->neg ? 1 : -1;
        return 0;
    }
    std::vector<Formula> xs, ys;
    flatten(a, a->kind, xs);
    flatten(b, b->kind, ys);
    size_t n = std::min(xs.size(), ys.size());
    for (size_t i = 0; i < n; ++i) {
        int c = canon_cmp(xs[i], ys[i]);
        if (c) return c;
    }
    if (xs.size() != ys.size()) return xs.size() < ys.size() ? -1 : 1;
    return 0;
}

// Shared core of simplify_units and canonical: flatten the spine of
// same-kind children, drop the connective's unit, collapse a repeated
// counter-unit pair ([t.t] = t, (f.f) = f) to a single occurrence, and
// rebuild.  When `sorted` is set the children are additionally stable-sorted
// under canon_cmp.  `trace`, when non-null, receives for every atom leaf of
// the result the index of the originating atom leaf of the input (atom
// leaves indexed left to right); unit leaves are not traced.
inline Formula normal_rebuild(Formula f, bool sorted, std::vector<uint32_t>* trace,
                              uint32_t base, bool canon_children);

inline Formula normal_step(Formula f, bool sorted, std::vector<uint32_t>* trace,
                           uint32_t base) {
    switch (f->kind) {
        case Kind::False:
        case Kind::True:
            return f;
        case Kind::Atom:
            if (trace) trace->push_back(base);
            return f;
        case Kind::Or:
        case Kind::And:
            return normal_rebuild(f, sorted, trace, base, true);
    }
    throw std::logic_error("normal_step: bad kind");
}

inline Formula normal_rebuild(Formula f, bool sorted, std::vector<uint32_t>* trace,
                              uint32_t base, bool) {
    const Kind kind = f->kind;
    const Formula unit = (kind == Kind::Or) ? f_false() : f_true();
    const Formula counter = (kind == Kind::Or) ? f_true() : f_false();

    // Collect direct children of the same-kind spine, left to right, with
    // the atom-leaf offset of each child within the input.
    struct Item {
        Formula g;
        uint32_t off;
    };
    std::vector<Item> spine;
    {
        std::vector<Item> stack{{f, base}};
        while (!stack.empty()) {
            Item it = stack.back();
            stack.pop_back();
            if (it.g->kind == kind) {
                stack.push_back(
                    {it.g->right, it.off + static_cast<uint32_t>(it.g->left->atom_leaves)});
                stack.push_back({it.g->left, it.off});
            } else {
                spine.push_back(it);
            }
        }
    }

    struct Child {
        Formula norm;
        std::vector<uint32_t> trace;
    };
    std::vector<Child> children;
    for (auto& item : spine) {
        Child c;
        std::vector<uint32_t>* tp = trace ? &c.trace : nullptr;
        c.norm = normal_step(item.g, sorted, tp, item.off);
        // A normalised child of the same kind is spliced into this spine.
        if (c.norm->kind == kind) {
            std::vector<Formula> parts;
            flatten(c.norm, kind, parts);
            // Child traces follow the flattened leaf order; split them.
            size_t taken = 0;
            for (Formula part : parts) {
                Child sub;
                sub.norm = part;
                if (trace) {
                    sub.trace.assign(c.trace.begin() + taken,
                                     c.trace.begin() + taken + part->atom_leaves);
                    taken += part->atom_leaves;
                }
                children.push_back(std::move(sub));
            }
        } else {
            children.push_back(std::move(c));
        }
    }

    // Drop the connective's unit; collapse repeated counter-units to one.
    std::vector<Child> kept;
    bool saw_counter = false;
    for (auto& c : children) {
        if (c.norm == unit) continue;
        if (c.norm == counter) {
            if (saw_counter) continue;
            saw_counter = true;
        }
        kept.push_back(std::move(c));
    }
    // [t.x] keeps its t; only a bare repeated counter-unit pair collapses.
    // (Handled above: duplicates removed, a single counter-unit stays.)
    if (kept.empty()) {
        return unit;
    }
    if (sorted) {
        std::stable_sort(kept.begin(), kept.end(), [](const Child& a, const Child& b) {
            return canon_cmp(a.norm, b.norm) < 0;
        });
    }
    if (kept.size() == 1) {
        if (trace)
            trace->insert(trace->end(), kept[0].trace.begin(), kept[0].trace.end());
        return kept[0].norm;
    }
    std::vector<Formula> parts;
    parts.reserve(kept.size());
    for (auto& c : kept) {
        parts.push_back(c.norm);
        if (trace) trace->insert(trace->end(), c.trace.begin(), c.trace.end());
    }
    Formula acc = parts.back();
    for (size_t i = parts.size() - 1; i-- > 0;)
        acc = detail::InternTable::instance().intern(kind, false, 0, parts[i], acc);
    return acc;
}

}  // namespace detail

// simplify_units(f): apply the unit equations and flatten associativity,
// preserving the left-to-right order of the remaining operands.
inline Formula simplify_units(Formula f) {
    return detail::normal_step(f, false, nullptr, 0);
}

// canonical(f): simplify_units plus sorting of operands under a fixed total
// order.  Two formulae are equal modulo the syntactic equations iff their
// canonicals are pointer-equal.
inline Formula canonical(Formula f) {
    Formula cached = f->canon.load(std::memory_order_acquire);
    if (cached) return cached;
    Formula c = detail::normal_step(f, true, nullptr, 0);
    f->canon.store(c, std::memory_order_release);
    return c;
}

// canonical_trace(f): canonical form plus, for each atom leaf of the result
// in left-to-right order, the index of the input atom leaf it came from.
// The stable sort makes the alignment deterministic (leftmost first).
inline std::pair<Formula, std::vector<uint32_t>> canonical_trace(Formula f) {
    std::vector<uint32_t> trace;
    Formula c = detail::normal_step(f, true, &trace, 0);
    return {c, std::move(trace)};
}

inline bool eq_modulo(Formula a, Formula b) { return canonical(a) == canonical(b); }

// ---- paths and occurrence references ----------------------------------------

// A path from the root of the binary tree: 0 = left child, 1 = right child.
using Path = std::vector<uint8_t>;

inline Path operator+(Path a, const Path& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline Path extend(Path p, uint8_t step) {
    p.push_back(step);
    return p;
}

// OccRef: reference to one atom occurrence inside a formula, as a root path.
struct OccRef {
    Path path;
    friend bool operator==(const OccRef& a, const OccRef& b) { return a.path == b.path; }
    friend bool operator<(const OccRef& a, const OccRef& b) { return a.path < b.path; }
};

inline Formula subformula_at(Formula f, const Path& p) {
    for (uint8_t step : p) {
        if (!is_binary(f)) throw std::out_of_range("subformula_at: path leaves the tree");
        f = step ? f->right : f->left;
    }
    return f;
}

inline Formula replace_at(Formula f, const Path& p, Formula repl, size_t from = 0) {
    if (from == p.size()) return repl;
    if (!is_binary(f)) throw std::out_of_range("replace_at: path leaves the tree");
    if (p[from])
        return detail::InternTable::instance().intern(f->kind, false, 0, f->left,
                                                      replace_at(f->right, p, repl, from + 1));
    return detail::InternTable::instance().intern(f->kind, false, 0,
                                                  replace_at(f->left, p, repl, from + 1),
                                                  f->right);
}

// Atom-leaf index (left to right, counting atom leaves only) <-> path.
inline Path atom_leaf_path(Formula f, uint32_t index) {
    Path p;
    while (is_binary(f)) {
        uint64_t l = f->left->atom_leaves;
        if (index < l) {
            p.push_back(0);
            f = f->left;
        } else {
            index -= static_cast<uint32_t>(l);
            p.push_back(1);
            f = f->right;
        }
    }
    if (!is_atom(f)) throw std::out_of_range("atom_leaf_path: no such atom occurrence");
    return p;
}

inline std::optional<uint32_t> atom_leaf_index(Formula f, const Path& p) {
    uint32_t before = 0;
    for (uint8_t step : p) {
        if (!is_binary(f)) return std::nullopt;
        if (step) {
            before += static_cast<uint32_t>(f->left->atom_leaves);
            f = f->right;
        } else {
            f = f->left;
        }
    }
    if (!is_atom(f)) return std::nullopt;
    return before;
}

// Literal found at a given atom-leaf index.
inline Literal atom_at(Formula f, uint32_t index) {
    while (is_binary(f)) {
        uint64_t l = f->left->atom_leaves;
        if (index < l) {
            f = f->left;
        } else {
            index -= static_cast<uint32_t>(l);
            f = f->right;
        }
    }
    if (!is_atom(f)) throw std::out_of_range("atom_at: no such atom occurrence");
    return f->literal();
}

// All atom occurrences of a given literal, as atom-leaf indices.
inline void collect_literal_indices(Formula f, const Literal& l, uint32_t base,
                                    std::vector<uint32_t>& out) {
    if (f->kind == Kind::Atom) {
        if (f->literal() == l) out.push_back(base);
        return;
    }
    if (is_binary(f)) {
        collect_literal_indices(f->left, l, base, out);
        collect_literal_indices(f->right, l, base + static_cast<uint32_t>(f->left->atom_leaves),
                                out);
    }
}

inline std::vector<uint32_t> literal_indices(Formula f, const Literal& l) {
    std::vector<uint32_t> out;
    collect_literal_indices(f, l, 0, out);
    return out;
}

// ---- substitution ----------------------------------------------------------

// Literal-keyed substitution.  A key (a, neg) with value beta replaces every
// occurrence of exactly that literal with beta.  When the replaced occurrence
// is negated, the De Morgan dual of beta is inserted; two keys that differ
// only in polarity act independently.
struct Subst {
    std::map<std::pair<uint32_t, bool>, Formula> map;

    void set(const Literal& l, Formula beta) { map[{l.atom, l.neg}] = beta; }
    void set(const std::string& name, Formula beta) {
        map[{AtomTable::instance().id(name), false}] = beta;
    }
    const Formula* find(const Literal& l) const {
        auto it = map.find({l.atom, l.neg});
        return it == map.end() ? nullptr : &it->second;
    }
};

inline Formula substitute(Formula f, const Subst& s) {
    switch (f->kind) {
        case Kind::False:
        case Kind::True:
            return f;
        case Kind::Atom: {
            const Formula* beta = s.find(f->literal());
            if (!beta) return f;
            return f->neg ? dual(*beta) : *beta;
        }
        case Kind::Or: {
            Formula l = substitute(f->left, s), r = substitute(f->right, s);
            return (l == f->left && r == f->right) ? f : f_or(l, r);
        }
        case Kind::And: {
            Formula l = substitute(f->left, s), r = substitute(f->right, s);
            return (l == f->left && r == f->right) ? f : f_and(l, r);
        }
    }
    throw std::logic_error("substitute: bad kind");
}

// Convenience: {name/beta} on the positive occurrences and the dual on the
// negated ones, i.e. the usual semantic substitution for one atom.
inline Formula substitute_atom(Formula f, const std::string& name, Formula beta) {
    Subst s;
    uint32_t id = AtomTable::instance().id(name);
    s.map[{id, false}] = beta;
    s.map[{id, true}] = beta;  // negated occurrences receive dual(beta)
    return substitute(f, s);
}

// As above but keyed by a literal: occurrences of l become beta, occurrences
// of its dual become dual(beta).
inline Formula substitute_atom(Formula f, const Literal& l, Formula beta) {
    Subst s;
    Formula v = l.neg ? dual(beta) : beta;
    s.map[{l.atom, false}] = v;
    s.map[{l.atom, true}] = v;
    return substitute(f, s);
}

// Occurrence-keyed substitution: replaces the atom leaves at the given
// atom-leaf indices with the paired formulae, verbatim.
inline Formula substitute_at_indices(Formula f,
                                     const std::vector<std::pair<uint32_t, Formula>>& repl,
                                     uint32_t base = 0) {
    if (repl.empty()) return f;
    if (f->kind == Kind::Atom) {
        for (auto& [idx, beta] : repl)
            if (idx == base) return beta;
        return f;
    }
    if (!is_binary(f)) return f;
    uint32_t mid = base + static_cast<uint32_t>(f->left->atom_leaves);
    bool any_left = false, any_right = false;
    for (auto& [idx, beta] : repl) {
        (void)beta;
        if (idx >= base && idx < mid) any_left = true;
        if (idx >= mid && idx < base + f->atom_leaves) any_right = true;
    }
    Formula l = any_left ? substitute_at_indices(f->left, repl, base) : f->left;
    Formula r = any_right ? substitute_at_indices(f->right, repl, mid) : f->right;
    if (l == f->left && r == f->right) return f;
    return detail::InternTable::instance().intern(f->kind, false, 0, l, r);
}

// ---- evaluation ------------------------------------------------------------

// Truth-value assignment for atoms, by interned id.
struct Assignment {
    std::unordered_map<uint32_t, bool> values;

    void set(const std::string& name, bool v) { values[AtomTable::instance().id(name)] = v; }
    bool get(uint32_t atom) const {
        auto it = values.find(atom);
        if (it == values.end())
            throw std::invalid_argument("evaluate: no value for atom '" +
                                        AtomTable::instance().name(atom) + "'");
        return it->second;
    }
};

inline bool evaluate(Formula f, const Assignment& v) {
    switch (f->kind) {
        case Kind::False: return false;
        case Kind::True: return true;
        case Kind::Atom: return v.get(f->atom) != f->neg;
        case Kind::Or: return evaluate(f->left, v) || evaluate(f->right, v);
        case Kind::And: return evaluate(f->left, v) && evaluate(f->right, v);
    }
    throw std::logic_error("evaluate: bad kind");
}

inline void collect_atoms(Formula f, std::vector<uint32_t>& out) {
    if (f->kind == Kind::Atom) {
        out.push_back(f->atom);
        return;
    }
    if (is_binary(f)) {
        collect_atoms(f->left, out);
        collect_atoms(f->right, out);
    }
}

// Distinct atom ids occurring in f, sorted by id.
inline std::vector<uint32_t> atoms(Formula f) {
    std::vector<uint32_t> out;
    collect_atoms(f, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---- contexts ---------------------------------------------------------------

// A formula with exactly one hole, represented as a host tree plus the path
// of the subterm standing in the hole position.  plug replaces that subterm.
struct Context {
    Formula host;  // some formula; the subterm at `hole` is the placeholder
    Path hole;

    Formula plug(Formula gamma) const { return replace_at(host, hole, gamma); }
};

// Context around the subterm at `p` inside `f` (the subterm itself becomes
// the placeholder).
inline Context context_at(Formula f, const Path& p) { return Context{f, p}; }

}  // namespace sks

#endif  // SKS_FORMULA_HPP
