#pragma once

// Threshold formulae and the weakening-only derivations between consecutive
// thresholds.  theta(k) over n distinct atoms is true under an assignment
// exactly when at least k of the atoms are true; it is built by splitting the
// atom vector in half and taking the disjunction, over i+j=k, of conjunctions
// of the two halves' thresholds.  gamma(k,l) is a derivation from
// canonical(theta(k){a_l/f}) to canonical(theta(k+1){a_l/t}) whose rules are
// contained in {aw-down, aw-up, eq}; these derivations are the engine of the
// cut elimination pipeline, and their quasipolynomial size is what makes it
// quasipolynomial overall.
//
// Construction and memoisation both key on contiguous subranges of the atom
// vector, because the halving recursion only ever asks for those.  A builder
// instance is not synchronised; confine one instance to one thread.

#include "sks/derivation.hpp"
#include "sks/formula.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sks {

// Ordered atom vector; entries must be pairwise distinct and non-dual, which
// for literals means pairwise distinct atom ids.
using AtomVector = std::vector<Literal>;

inline void validate_atoms(const AtomVector& atoms) {
    if (atoms.empty()) throw std::invalid_argument("threshold: empty atom vector");
    for (size_t i = 0; i < atoms.size(); ++i)
        for (size_t j = i + 1; j < atoms.size(); ++j)
            if (atoms[i].atom == atoms[j].atom)
                throw std::invalid_argument("threshold: atoms must be pairwise distinct and non-dual");
}

// a1, a2, ... an as positive literals.
inline AtomVector default_atoms(uint32_t n, const std::string& prefix = "a") {
    AtomVector v;
    v.reserve(n);
    for (uint32_t i = 1; i <= n; ++i)
        v.push_back(Literal{AtomTable::instance().id(prefix + std::to_string(i)), false});
    return v;
}

class ThresholdBuilder {
public:
    // memo_limit caps the number of cached entries per table (0 = unbounded);
    // past the cap results are recomputed instead of cached.
    explicit ThresholdBuilder(AtomVector atoms, size_t memo_limit = 0)
        : atoms_(std::move(atoms)), memo_limit_(memo_limit) {
        validate_atoms(atoms_);
    }

    const AtomVector& atoms() const { return atoms_; }
    uint32_t n() const { return static_cast<uint32_t>(atoms_.size()); }

    Formula theta(uint32_t k) { return theta_range(k, 0, n()); }

    // l is 1-based, as in the subscript of a_l.
    Derivation gamma(uint32_t k, uint32_t l) {
        require_l(l);
        return gamma_range(k, l - 1, 0, n());
    }
    Derivation upsilon(uint32_t k, uint32_t l) {
        require_l(l);
        return upsilon_range(k, l - 1, 0, n());
    }
    Derivation delta(uint32_t k, uint32_t l) {
        require_l(l);
        return delta_range(k, l - 1, 0, n());
    }

    size_t theta_cache_entries() const { return theta_memo_.size(); }
    size_t gamma_cache_entries() const { return gamma_memo_.size(); }

private:
    friend std::vector<struct ThetaProfileRow> theta_size_profile(uint32_t);

    void require_l(uint32_t l) const {
        if (l < 1 || l > n()) throw std::invalid_argument("threshold: l out of range");
    }

    // theta over atoms_[lo .. lo+len).  Bodies are kept unit-free: a disjunct
    // (theta_i . theta_j) drops a t conjunct, and the i = 0, j = 0 pairs never
    // both survive because k = 0 is a base case.  Disjuncts are ordered by
    // decreasing i.
    Formula theta_range(uint32_t k, uint32_t lo, uint32_t len) {
        if (k == 0) return f_true();
        if (k > len) return f_false();
        if (len == 1) return f_atom(atoms_[lo]);
        uint64_t key = pack(k, 0, lo, len);
        if (auto it = theta_memo_.find(key); it != theta_memo_.end()) return it->second;
        uint32_t p = len / 2, q = len - p;
        uint32_t i_hi = std::min(p, k);
        uint32_t i_lo = (k > q) ? k - q : 0;
        std::vector<Formula> disjuncts;
        for (uint32_t i = i_hi; ; --i) {
            Formula l = theta_range(i, lo, p);
            Formula r = theta_range(k - i, lo + p, q);
            disjuncts.push_back(l == f_true() ? r : (r == f_true() ? l : f_and(l, r)));
            if (i == i_lo) break;
        }
        Formula body = f_or(disjuncts);
        if (memo_limit_ == 0 || theta_memo_.size() < memo_limit_) theta_memo_[key] = body;
        return body;
    }

    Formula subst_at(Formula f, uint32_t atom_index, Formula beta) const {
        return substitute_atom(f, atoms_[atom_index], beta);
    }

    // The coweakening block: collapses the one disjunct of theta(k){a_l/f}
    // that the gamma recursion cannot reach (the i = p term when l <= p, the
    // j = q term when l > p) down to f.  l0 is 0-based within the range.
    Derivation upsilon_range(uint32_t k, uint32_t l0, uint32_t lo, uint32_t len) {
        if (len < 2) return single_line(f_false());
        uint32_t p = len / 2, q = len - p;
        Formula prem, rest;
        if (l0 < p && p <= k && k <= len) {
            prem = f_and(subst_at(theta_range(p, lo, p), lo + l0, f_false()),
                         theta_range(k - p, lo + p, q));
            rest = simplify_units(f_and(subst_at(theta_range(p, lo, p), lo + l0, f_true()),
                                        theta_range(k - p, lo + p, q)));
        } else if (l0 >= p && q <= k && k <= len) {
            prem = f_and(theta_range(k - q, lo, p),
                         subst_at(theta_range(q, lo + p, q), lo + l0, f_false()));
            rest = simplify_units(f_and(theta_range(k - q, lo, p),
                                        subst_at(theta_range(q, lo + p, q), lo + l0, f_true())));
        } else {
            return single_line(f_false());
        }
        // prem is rest with one extra f conjunct (modulo units), so pull the f
        // aside, weaken the rest away, and fold the units.
        Builder b(prem);
        if (rest == f_true()) {
            b.eq_to(f_false());
        } else {
            b.eq_to(f_and(rest, f_false()));
            b.splice(expand_gw_up(rest), {0});
            b.eq_to(f_false());
        }
        return b.take();
    }

    // The weakening block: introduces from f the one disjunct of
    // theta(k){a_l/t} that the gamma recursion cannot supply.
    Derivation delta_range(uint32_t k, uint32_t l0, uint32_t lo, uint32_t len) {
        if (len < 2) return single_line(f_false());
        uint32_t p = len / 2, q = len - p;
        if (l0 < p && 0 < k && k <= q) return expand_gw_down(theta_range(k, lo + p, q));
        if (l0 >= p && 0 < k && k <= p) return expand_gw_down(theta_range(k, lo, p));
        return single_line(f_false());
    }

    Derivation gamma_range(uint32_t k, uint32_t l0, uint32_t lo, uint32_t len) {
        if (len == 1) return single_line(k == 0 ? f_true() : f_false());
        if (k > len) return single_line(f_false());
        uint64_t key = pack(k, l0, lo, len);
        if (auto it = gamma_memo_.find(key); it != gamma_memo_.end()) return it->second;

        uint32_t p = len / 2, q = len - p;
        std::vector<Derivation> blocks;
        if (l0 < p) {
            // (gamma_i . theta_j) for i + j = k, 0 <= i < p, 0 <= j <= q,
            // by decreasing i; empty exactly when k = len.
            uint32_t i_hi = std::min(p - 1, k);
            uint32_t i_lo = (k > q) ? k - q : 0;
            if (i_lo <= i_hi)
                for (uint32_t i = i_hi; ; --i) {
                    blocks.push_back(compose_conj(gamma_range(i, l0, lo, p),
                                                  single_line(theta_range(k - i, lo + p, q))));
                    if (i == i_lo) break;
                }
        } else {
            // (theta_i . gamma_j) for i + j = k, 0 <= i <= p, 0 <= j < q.
            uint32_t i_hi = std::min(p, k);
            uint32_t i_lo = (k + 1 > q) ? k + 1 - q : 0;
            if (i_lo <= i_hi)
                for (uint32_t i = i_hi; ; --i) {
                    blocks.push_back(compose_conj(single_line(theta_range(i, lo, p)),
                                                  gamma_range(k - i, l0 - p, lo + p, q)));
                    if (i == i_lo) break;
                }
        }
        blocks.push_back(upsilon_range(k, l0, lo, len));
        blocks.push_back(delta_range(k + 1, l0, lo, len));

        Derivation assembly = blocks.back();
        for (size_t i = blocks.size() - 1; i-- > 0;) assembly = compose_disj(blocks[i], assembly);

        Formula prem = canonical(subst_at(theta_range(k, lo, len), lo + l0, f_false()));
        Formula concl = canonical(subst_at(theta_range(k + 1, lo, len), lo + l0, f_true()));
        Builder b(prem);
        b.eq_to(assembly.premiss);
        b.splice(assembly, {});
        b.eq_to(concl);
        Derivation out = b.take();
        if (memo_limit_ == 0 || gamma_memo_.size() < memo_limit_) gamma_memo_[key] = out;
        return out;
    }

    // k, l0 < 2^16 and lo, len < 2^16 in any realistic use.
    static uint64_t pack(uint32_t k, uint32_t l0, uint32_t lo, uint32_t len) {
        return (uint64_t(k) << 48) | (uint64_t(l0) << 32) | (uint64_t(lo) << 16) | len;
    }

    AtomVector atoms_;
    size_t memo_limit_;
    std::unordered_map<uint64_t, Formula> theta_memo_;
    std::unordered_map<uint64_t, Derivation> gamma_memo_;
};

inline Formula theta(uint32_t k, const AtomVector& atoms) {
    return ThresholdBuilder(atoms).theta(k);
}
inline Derivation gamma(uint32_t k, uint32_t l, const AtomVector& atoms) {
    return ThresholdBuilder(atoms).gamma(k, l);
}
inline Derivation upsilon(uint32_t k, uint32_t l, const AtomVector& atoms) {
    return ThresholdBuilder(atoms).upsilon(k, l);
}
inline Derivation delta(uint32_t k, uint32_t l, const AtomVector& atoms) {
    return ThresholdBuilder(atoms).delta(k, l);
}

// ---- size accounting -----------------------------------------------------------

struct ThetaProfileRow {
    uint32_t n;
    uint32_t k;
    uint64_t size;
};

// Sizes of theta(k) for all k <= n+1, n <= n_max.  Hash consing keeps the
// shared-subrange dag small even where the formula tree is astronomically
// large, and leaf counts are cached per node, so this is cheap.  Checks that
// within each n the size peaks at k = floor(n/2)+1 and that the peak stays
// below n^(h*log2(n)) with h = 2/(log2(3)-log2(2)).
inline std::vector<ThetaProfileRow> theta_size_profile(uint32_t n_max) {
    std::vector<ThetaProfileRow> rows;
    const long double h = 2.0L / (std::log2(3.0L) - 1.0L);
    for (uint32_t n = 1; n <= n_max; ++n) {
        ThresholdBuilder tb(default_atoms(n));
        uint32_t peak_k = n / 2 + 1;
        uint64_t peak = size(tb.theta(peak_k));
        for (uint32_t k = 0; k <= n + 1; ++k) {
            uint64_t sz = size(tb.theta(k));
            rows.push_back({n, k, sz});
            if (sz > peak)
                throw std::logic_error("theta_size_profile: size not maximal at k = n/2+1 for n = " +
                                       std::to_string(n));
        }
        long double bound = std::exp(h * std::log2((long double)n) * std::log((long double)n));
        if ((long double)peak > bound)
            throw std::logic_error("theta_size_profile: quasipolynomial bound violated at n = " +
                                   std::to_string(n));
    }
    return rows;
}

}  // namespace sks
