#ifndef SKS_FIG_DERIVATIONS_HPP
#define SKS_FIG_DERIVATIONS_HPP

// Three small reference derivations used across the test suites: a proof of
// t with an identity-cut detour, a derivation threading contraction and
// cocontraction around two cuts, and a nonatomic cocontraction.  They double
// as extraction fixtures for the flow tests.

#include "sks/derivation.hpp"

namespace sks::testutil {

// t => [a.-a] => ... => t; the identity's two atom occurrences are consumed
// by the one cut, so the flow is exactly one identity above one cut.
inline Derivation identity_cut_detour() {
    Literal a{AtomTable::instance().id("a"), false};
    Builder b(f_true());
    b.ai_down({}, a);                                     // [a.-a]
    b.eq_to(parse("[(a.t).(t.-a)]"));
    b.rewrite(RuleId::med, {});                           // ([a.t].[t.-a])
    b.eq_to(parse("([a.t].[-a.t])"));
    b.rewrite(RuleId::sw, {});                            // [([a.t].-a).t]
    b.eq_to(parse("[(-a.[a.t]).t]"));
    b.rewrite(RuleId::sw, {0});                           // [[(-a.a).t].t]
    b.eq_to(parse("[(a.-a).t]"));
    b.rewrite(RuleId::ai_up, {0});                        // [f.t]
    b.eq_to(f_true());
    return b.take();
}

// ((a.[-a.t]).-a) => ... => (a.f): one identity, one contraction, one
// cocontraction, two cuts; three premiss occurrences dangle at the top.
inline Derivation contraction_detour() {
    Literal na{AtomTable::instance().id("a"), true};
    Builder b(parse("((a.[-a.t]).-a)"));
    b.ai_down({0, 1, 1}, na);                             // ((a.[-a.[-a.a]]).-a)
    b.eq_to(parse("((a.[[-a.-a].a]).-a)"));
    b.rewrite(RuleId::sw, {0});                           // ([(a.[-a.-a]).a].-a)
    b.rewrite(RuleId::ac_down, {0, 0, 1});                // ([(a.-a).a].-a)
    b.rewrite(RuleId::ai_up, {0, 0});                     // ([f.a].-a)
    b.eq_to(parse("(a.-a)"));
    b.rewrite(RuleId::ac_up, {0});                        // ((a.a).-a)
    b.eq_to(parse("(a.(a.-a))"));
    b.rewrite(RuleId::ai_up, {1});                        // (a.f)
    return b.take();
}

// ([a.b].a) => (([a.b].a).([a.b].a)) via three ac-up and one medial: the
// shape of a nonatomic cocontraction.
inline Derivation cocontraction_example() {
    Builder b(parse("([a.b].a)"));
    b.rewrite(RuleId::ac_up, {0, 0});                     // ([(a.a).b].a)
    b.rewrite(RuleId::ac_up, {0, 1});                     // ([(a.a).(b.b)].a)
    b.rewrite(RuleId::ac_up, {1});                        // ([(a.a).(b.b)].(a.a))
    b.rewrite(RuleId::med, {0});                          // (([a.b].[a.b]).(a.a))
    b.eq_to(parse("(([a.b].a).([a.b].a))"));
    return b.take();
}

}  // namespace sks::testutil

#endif  // SKS_FIG_DERIVATIONS_HPP
