#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hoare2ri/poly.hpp"
#include "hoare2ri/solver.hpp"
#include "hoare2ri/term.hpp"
#include "hoare2ri/textexpr.hpp"
#include "hoare2ri/theory.hpp"

namespace hoare2ri {

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// Constraint plumbing

inline void flattenConjInto(const Term& phi, std::vector<Term>& out) {
    if (!phi->isVar && phi->kind == SymKind::TheorySym && phi->name == "&&") {
        flattenConjInto(phi->args[0], out);
        flattenConjInto(phi->args[1], out);
        return;
    }
    out.push_back(phi);
}

inline std::vector<Term> flattenConj(const Term& phi) {
    std::vector<Term> out;
    flattenConjInto(phi, out);
    return out;
}

inline Term conjOf(const std::vector<Term>& cs) {
    if (cs.empty()) return mkBoolVal(true);
    Term t = cs[0];
    for (size_t i = 1; i < cs.size(); ++i) t = mkOp("&&", {t, cs[i]});
    return t;
}

struct FreshGen {
    int counter = 0;
    std::string next() { return "_v" + std::to_string(++counter); }
    Term nextVar(const Sort& s) { return mkVar(next(), s); }
};

// ---------------------------------------------------------------------------
// Rules and systems

struct ConstrainedRule {
    Term lhs;
    Term rhs;
    Term constraint;  // boolean; trivially true when absent in the source
    std::string label;
};

inline std::string showRule(const ConstrainedRule& r) {
    std::string s = showTerm(r.lhs) + " -> " + showTerm(r.rhs);
    if (!isTrueTerm(r.constraint)) s += " [" + showTerm(r.constraint) + "]";
    return s;
}

class Lctrs {
  public:
    std::vector<ConstrainedRule> rules;

    const FunSym* findSymbol(const std::string& name) const {
        auto it = symbols_.find(name);
        return it == symbols_.end() ? nullptr : &it->second;
    }

    const FunSym& declare(const std::string& name, std::vector<Sort> argSorts, Sort resSort) {
        auto it = symbols_.find(name);
        if (it != symbols_.end()) {
            if (it->second.argSorts != argSorts || !(it->second.resSort == resSort))
                throw TermError("conflicting declarations for symbol '" + name + "'");
            return it->second;
        }
        FunSym f{name, std::move(argSorts), resSort, SymKind::TermSym};
        return symbols_.emplace(name, std::move(f)).first->second;
    }

    const std::map<std::string, FunSym>& symbols() const { return symbols_; }

    void addRule(ConstrainedRule r) {
        if (r.lhs->isVar) throw TermError("rule left side must not be a variable");
        if (r.lhs->kind == SymKind::ValueSym) throw TermError("rule left side must not be a value");
        if (!(r.lhs->sort == r.rhs->sort))
            throw TermError("rule sides have different sorts: " + showRule(r));
        if (!r.constraint) r.constraint = mkBoolVal(true);
        if (!(r.constraint->sort == sortBool))
            throw TermError("rule constraint must be boolean: " + showRule(r));
        std::set<std::string> scope;
        for (auto& v : varsOf(r.lhs)) scope.insert(v->name);
        for (auto& v : varsOf(r.constraint)) scope.insert(v->name);
        for (auto& v : varsOf(r.rhs))
            if (!scope.count(v->name))
                throw TermError("rule right side has unbound variable '" + v->name +
                                "': " + showRule(r));
        rules.push_back(std::move(r));
    }

    std::set<std::string> definedSymbols() const {
        std::set<std::string> ds;
        for (auto& r : rules) ds.insert(r.lhs->name);
        return ds;
    }

    std::vector<size_t> rulesRootedAt(const std::string& name) const {
        std::vector<size_t> idx;
        for (size_t i = 0; i < rules.size(); ++i)
            if (rules[i].lhs->name == name) idx.push_back(i);
        return idx;
    }

    // canonical argument names for a symbol, read off the first rule whose
    // left side applies it to distinct variables
    std::vector<std::string> argNames(const std::string& name) const {
        const FunSym* f = findSymbol(name);
        size_t n = f ? f->argSorts.size() : 0;
        for (auto& r : rules) {
            const Term& l = r.lhs;
            for (const Term* t : {&l, &r.rhs}) {
                if ((*t)->isVar || (*t)->name != name) continue;
                std::set<std::string> seen;
                bool allVars = true;
                for (auto& a : (*t)->args)
                    if (!a->isVar || !seen.insert(a->name).second) { allVars = false; break; }
                if (!allVars) continue;
                std::vector<std::string> names;
                for (auto& a : (*t)->args) names.push_back(a->name);
                return names;
            }
        }
        std::vector<std::string> names;
        for (size_t i = 0; i < n; ++i) names.push_back("x" + std::to_string(i + 1));
        return names;
    }

  private:
    std::map<std::string, FunSym> symbols_;
};

// ---------------------------------------------------------------------------
// Constrained terms. `terms` usually holds one term (a constrained term) or
// two (an equation between constrained terms sharing one constraint).

struct CTerms {
    std::vector<Term> terms;
    Term constraint;

    std::vector<Term> allVars() const {
        std::vector<Term> out;
        std::set<std::string> seen;
        for (auto& t : terms)
            for (auto& v : varsOf(t))
                if (seen.insert(v->name).second) out.push_back(v);
        for (auto& v : varsOf(constraint))
            if (seen.insert(v->name).second) out.push_back(v);
        return out;
    }
};

inline std::string showCTerms(const CTerms& ct) {
    std::string s;
    for (size_t i = 0; i < ct.terms.size(); ++i) {
        if (i) s += " == ";
        s += showTerm(ct.terms[i]);
    }
    if (!isTrueTerm(ct.constraint)) s += " [" + showTerm(ct.constraint) + "]";
    return s;
}

// Canonical comparison key: variables renamed in first-occurrence order,
// conjuncts sorted. Equal keys mean equal up to renaming and conjunct order.
inline std::string canonicalKey(const CTerms& ct) {
    Subst ren;
    int n = 0;
    for (auto& v : ct.allVars()) ren.bind(v->name, mkVar("V" + std::to_string(++n), v->sort));
    std::string s;
    for (size_t i = 0; i < ct.terms.size(); ++i) {
        if (i) s += " == ";
        s += showTerm(applySubst(ct.terms[i], ren));
    }
    std::vector<std::string> cs;
    for (auto& c : flattenConj(ct.constraint)) {
        Term rc = applySubst(c, ren);
        if (isTrueTerm(rc)) continue;
        cs.push_back(showTerm(rc));
    }
    std::sort(cs.begin(), cs.end());
    s += " [";
    for (size_t i = 0; i < cs.size(); ++i) {
        if (i) s += " && ";
        s += cs[i];
    }
    s += "]";
    return s;
}

inline std::string ctDigest(const CTerms& ct) { return hex64(fnv1a64(canonicalKey(ct))); }

// Like canonicalKey but comparison conjuncts collapse to canonical polynomial
// atoms, so forms differing only by ring identities share a key.  Conjunct
// order can still perturb opaque-term numbering; disagreement of keys is
// therefore inconclusive while agreement certifies ~-equivalence.
inline std::string ctPolyKey(const CTerms& ct) {
    Subst ren;
    int n = 0;
    for (auto& v : ct.allVars()) ren.bind(v->name, mkVar("V" + std::to_string(++n), v->sort));
    std::string s;
    for (size_t i = 0; i < ct.terms.size(); ++i) {
        if (i) s += " == ";
        s += showTerm(applySubst(ct.terms[i], ren));
    }
    OpaquePool pool;
    std::vector<std::string> cs;
    for (auto& c : flattenConj(ct.constraint)) {
        Term rc = applySubst(c, ren);
        if (isTrueTerm(rc)) continue;
        bool neg = false;
        Term body = rc;
        if (!body->isVar && body->name == "!" && body->args.size() == 1) {
            neg = true;
            body = body->args[0];
        }
        std::optional<PolyAtom> a = atomFromComparison(body, neg, pool);
        cs.push_back(a ? showAtom(*a) : showTerm(rc));
    }
    std::sort(cs.begin(), cs.end());
    s += " [";
    for (size_t i = 0; i < cs.size(); ++i) {
        if (i) s += " && ";
        s += cs[i];
    }
    s += "]";
    return s;
}

// ---------------------------------------------------------------------------
// Normalization of constrained terms:
//   1. ground theory subterms evaluate in place
//   2. remaining theory subterms in the term part move into the constraint
//      as fresh definitions (v = e)
//   3. ground-true conjuncts drop, duplicated definitions share one variable
//   4. definitions whose variable is used nowhere else drop
//   5. fresh variables take free canonical argument names where possible,
//      leftovers renumber to _v1.._vk

namespace detail {

inline bool isTheoryRedex(const Term& t) {
    return !t->isVar && t->kind == SymKind::TheorySym && !isValue(t) && isLogicalTerm(t);
}

// outermost maximal logical subterms below non-theory context; values sitting
// directly under a term symbol count, so state arguments always abstract
inline void maximalTheorySubterms(const Term& t, std::vector<Position>& out, Position& cur) {
    if (t->isVar || isValue(t)) return;
    if (isTheoryRedex(t)) {
        out.push_back(cur);
        return;
    }
    for (size_t i = 0; i < t->args.size(); ++i) {
        cur.push_back(int(i + 1));
        if (t->kind == SymKind::TermSym && isValue(t->args[i]))
            out.push_back(cur);
        else
            maximalTheorySubterms(t->args[i], out, cur);
        cur.pop_back();
    }
}

inline Term replaceEverywhere(const Term& t, const Term& from, const Term& to) {
    if (termEq(t, from)) return to;
    if (t->isVar || t->args.empty()) return t;
    Term out = t;
    for (size_t i = 0; i < t->args.size(); ++i) {
        Term r = replaceEverywhere(t->args[i], from, to);
        if (r.get() != t->args[i].get()) out = replaceAt(out, {int(i + 1)}, r);
    }
    return out;
}

inline bool isFreshName(const std::string& n) { return n.rfind("_v", 0) == 0; }

}  // namespace detail

inline CTerms normalizeCT(const Lctrs& sys, CTerms ct, FreshGen& fresh) {
    // 1 + 2: calculation steps inside the term part
    std::vector<std::pair<Term, Term>> defs;  // fresh var, definition body
    for (auto& t : ct.terms) {
        for (;;) {
            std::vector<Position> ps;
            Position cur;
            detail::maximalTheorySubterms(t, ps, cur);
            if (ps.empty()) break;
            Term e = subtermAt(t, ps[0]);
            if (isValue(e)) {
                Term v;
                for (auto& [dv, de] : defs)
                    if (termEq(de, e)) { v = dv; break; }
                if (!v) {
                    v = fresh.nextVar(e->sort);
                    defs.push_back({v, e});
                }
                t = replaceAt(t, ps[0], v);
                continue;
            }
            if (varsOf(e).empty()) {
                Term v = evalGround(e);
                for (auto& u : ct.terms) u = detail::replaceEverywhere(u, e, v);
                continue;
            }
            Term v;
            for (auto& [dv, de] : defs)
                if (termEq(de, e)) { v = dv; break; }
            if (!v) {
                v = fresh.nextVar(e->sort);
                defs.push_back({v, e});
            }
            for (auto& u : ct.terms) u = detail::replaceEverywhere(u, e, v);
        }
    }

    std::vector<Term> conj = flattenConj(ct.constraint);
    for (auto& [v, e] : defs) {
        Term def = e->sort == sortInt ? mkOp("=", {v, e})
                                      : mkOp("&&", {mkOp("=>", {v, e}), mkOp("=>", {e, v})});
        conj.push_back(def);
    }

    // 3: ground conjuncts evaluate; duplicated definition bodies unify
    bool falsified = false;
    std::vector<Term> kept;
    for (auto& c : conj) {
        if (varsOf(c).empty()) {
            if (!boolOf(evalGround(c))) falsified = true;
            continue;
        }
        kept.push_back(c);
    }
    if (falsified) {
        ct.constraint = mkBoolVal(false);
        return ct;
    }
    conj = std::move(kept);
    for (auto& [v, e] : defs) {
        if (isValue(e) || e->isVar) continue;
        for (auto& c : conj) {
            bool isOwnDef = !c->isVar && c->name == "=" && c->args.size() == 2 &&
                            termEq(c->args[0], v) && termEq(c->args[1], e);
            if (!isOwnDef) c = detail::replaceEverywhere(c, e, v);
        }
    }

    auto occursInTerms = [&](const std::string& name) {
        for (auto& t : ct.terms)
            if (occursIn(name, t)) return true;
        return false;
    };
    auto countOccurrences = [](const Term& t, const std::string& name) {
        long n = 0;
        for (auto& p : positionsOf(t)) {
            Term s = subtermAt(t, p);
            if (s->isVar && s->name == name) ++n;
        }
        return n;
    };
    auto isComparison = [](const Term& t) {
        return !t->isVar && t->args.size() == 2 &&
               (t->name == "=" || t->name == "!=" || t->name == ">=" || t->name == ">");
    };

    // 3b: Gaussian elimination of variables the terms no longer carry. An
    // equality that is unit-linear in such a variable rewrites every other
    // conjunct mentioning it, after which the equality itself is a witness.
    for (;;) {
        bool eliminated = false;
        for (size_t i = 0; i < conj.size() && !eliminated; ++i) {
            const Term& d = conj[i];
            if (d->isVar || d->name != "=" || d->args.size() != 2) continue;
            OpaquePool dpool;
            Poly pd = polySub(polyFromTerm(d->args[0], dpool), polyFromTerm(d->args[1], dpool));
            for (auto& w : varsOf(d)) {
                if (occursInTerms(w->name)) continue;
                if (countOccurrences(d, w->name) != 1) continue;
                auto c = unitLinearCoef(pd, w->name);
                if (!c) continue;
                std::vector<size_t> others;
                for (size_t j = 0; j < conj.size(); ++j)
                    if (j != i && occursIn(w->name, conj[j])) others.push_back(j);
                if (others.empty()) continue;
                bool blocked = false;
                std::vector<std::pair<Poly, OpaquePool>> diffs(others.size());
                for (size_t k = 0; k < others.size() && !blocked; ++k) {
                    const Term& q = conj[others[k]];
                    if (!isComparison(q)) { blocked = true; break; }
                    diffs[k].first = polySub(polyFromTerm(q->args[0], diffs[k].second),
                                             polyFromTerm(q->args[1], diffs[k].second));
                    for (auto& [print, entry] : diffs[k].second.byPrint)
                        if (occursIn(w->name, entry.second)) blocked = true;
                }
                if (blocked) continue;
                Poly wPoly = polyAdd(Poly::variable(w->name), polyScale(pd, -*c));
                for (size_t k = 0; k < others.size(); ++k)
                    conj[others[k]] = comparisonOfPoly(conj[others[k]]->name,
                                                       polySubstVar(diffs[k].first, w->name, wPoly),
                                                       diffs[k].second);
                eliminated = true;
                break;
            }
        }
        if (!eliminated) break;
    }
    {
        std::vector<Term> alive;
        for (auto& c : conj) {
            if (varsOf(c).empty()) {
                if (!boolOf(evalGround(c))) {
                    ct.constraint = mkBoolVal(false);
                    return ct;
                }
                continue;
            }
            alive.push_back(c);
        }
        conj = std::move(alive);
    }

    // 4: an equality conjunct with a one-off unit-linear variable is an
    // existential witness; nothing else reads it, so the conjunct goes
    for (;;) {
        bool dropped = false;
        for (size_t i = 0; i < conj.size(); ++i) {
            const Term& c = conj[i];
            if (c->isVar || c->name != "=" || c->args.size() != 2) continue;
            OpaquePool pool;
            Poly p = polySub(polyFromTerm(c->args[0], pool), polyFromTerm(c->args[1], pool));
            for (auto& v : varsOf(c)) {
                if (occursInTerms(v->name)) continue;
                bool elsewhere = false;
                for (size_t j = 0; j < conj.size() && !elsewhere; ++j)
                    if (j != i && occursIn(v->name, conj[j])) elsewhere = true;
                if (elsewhere) continue;
                if (countOccurrences(c, v->name) != 1) continue;
                if (!unitLinearCoef(p, v->name)) continue;
                conj.erase(conj.begin() + i);
                dropped = true;
                break;
            }
            if (dropped) break;
        }
        if (!dropped) break;
    }

    ct.constraint = conjOf(conj);

    // 5a: adopt free canonical names at state argument positions
    for (;;) {
        std::string from, to;
        for (auto& t : ct.terms) {
            for (auto& q : positionsOf(t)) {
                Term s = subtermAt(t, q);
                if (s->isVar || s->kind != SymKind::TermSym || s->args.empty()) continue;
                auto names = sys.argNames(s->name);
                for (size_t i = 0; i < s->args.size() && from.empty(); ++i) {
                    const Term& a = s->args[i];
                    if (!a->isVar || !detail::isFreshName(a->name)) continue;
                    if (i >= names.size()) continue;
                    const std::string& nice = names[i];
                    if (detail::isFreshName(nice)) continue;
                    bool taken = occursIn(nice, ct.constraint);
                    for (auto& u : ct.terms) taken = taken || occursIn(nice, u);
                    if (taken) continue;
                    from = a->name;
                    to = nice;
                }
                if (!from.empty()) break;
            }
            if (!from.empty()) break;
        }
        if (from.empty()) break;
        Subst ren;
        Term target;
        for (auto& t : ct.terms)
            for (auto& v : varsOf(t))
                if (v->name == from) target = v;
        if (!target) break;
        ren.bind(from, mkVar(to, target->sort));
        for (auto& t : ct.terms) t = applySubst(t, ren);
        ct.constraint = applySubst(ct.constraint, ren);
    }

    // 5b: renumber leftover fresh variables in first-occurrence order
    std::vector<Term> order;
    std::set<std::string> seen;
    for (auto& t : ct.terms)
        for (auto& v : varsOf(t))
            if (detail::isFreshName(v->name) && seen.insert(v->name).second) order.push_back(v);
    for (auto& v : varsOf(ct.constraint))
        if (detail::isFreshName(v->name) && seen.insert(v->name).second) order.push_back(v);
    Subst ren;
    int k = 0;
    bool identity = true;
    for (auto& v : order) {
        std::string nn = "_v" + std::to_string(++k);
        if (nn != v->name) identity = false;
        ren.bind(v->name, mkVar(nn, v->sort));
    }
    if (!identity) {
        for (auto& t : ct.terms) t = applySubst(t, ren);
        ct.constraint = applySubst(ct.constraint, ren);
    }
    return ct;
}

// ---------------------------------------------------------------------------
// Ground rewriting, leftmost-innermost, calculation steps included.

struct GroundRunResult {
    Term term;
    long steps = 0;
    bool outOfFuel = false;
    std::vector<std::string> trace;  // "pos rule-label" per step
};

namespace detail {

inline std::optional<std::pair<Term, std::string>> groundStepAt(const Lctrs& sys, const Term& t) {
    for (size_t i = 0; i < t->args.size(); ++i) {
        auto sub = groundStepAt(sys, t->args[i]);
        if (sub) {
            return std::make_pair(replaceAt(t, {int(i + 1)}, sub->first),
                                  std::to_string(i + 1) +
                                      (sub->second.empty() || sub->second[0] == ' '
                                           ? sub->second
                                           : "." + sub->second));
        }
    }
    if (t->isVar || isValue(t)) return std::nullopt;
    if (t->kind == SymKind::TheorySym) {
        bool allValues = true;
        for (auto& a : t->args) allValues = allValues && isValue(a);
        if (allValues) return std::make_pair(evalGround(t), std::string(" calc"));
        return std::nullopt;
    }
    for (auto& r : sys.rules) {
        auto sigma = matchTerm(r.lhs, t);
        if (!sigma) continue;
        Term cond = applySubst(r.constraint, *sigma);
        if (!varsOf(cond).empty()) continue;
        if (!boolOf(evalGround(cond))) continue;
        return std::make_pair(applySubst(r.rhs, *sigma),
                              std::string(" ") + (r.label.empty() ? showRule(r) : r.label));
    }
    return std::nullopt;
}

}  // namespace detail

inline GroundRunResult groundRewriteLI(const Lctrs& sys, Term t, long fuel) {
    GroundRunResult res;
    while (res.steps < fuel) {
        auto step = detail::groundStepAt(sys, t);
        if (!step) break;
        t = step->first;
        ++res.steps;
        std::string where = step->second;
        if (!where.empty() && where[0] == ' ') where = "ε" + where;
        res.trace.push_back(where);
    }
    res.term = t;
    res.outOfFuel = res.steps >= fuel && detail::groundStepAt(sys, t).has_value();
    return res;
}

// ---------------------------------------------------------------------------
// Constrained rewriting: apply a rule whose variables are all bound by the
// match, under a validity side condition on the constraint.

struct RuleApplication {
    size_t termIdx;
    Position pos;
    size_t ruleIdx;
};

inline std::optional<CTerms> applyRuleAt(const Lctrs& sys, const CTerms& ct, size_t termIdx,
                                         const Position& pos, const ConstrainedRule& rule,
                                         SolverFacade& solver) {
    std::set<std::string> lhsVars;
    for (auto& v : varsOf(rule.lhs)) lhsVars.insert(v->name);
    for (auto& v : varsOf(rule.rhs))
        if (!lhsVars.count(v->name)) return std::nullopt;
    for (auto& v : varsOf(rule.constraint))
        if (!lhsVars.count(v->name)) return std::nullopt;

    Term sub = subtermAt(ct.terms[termIdx], pos);
    auto sigma = matchTerm(rule.lhs, sub);
    if (!sigma) return std::nullopt;
    Term cond = applySubst(rule.constraint, *sigma);
    if (!isTrueTerm(cond)) {
        auto v = solver.checkValid(mkOp("=>", {ct.constraint, cond}));
        if (v.verdict != Validity::Valid) return std::nullopt;
    }
    CTerms out = ct;
    out.terms[termIdx] = replaceAt(out.terms[termIdx], pos, applySubst(rule.rhs, *sigma));
    return out;
}

inline std::vector<RuleApplication> findRuleApplications(const Lctrs& sys, const CTerms& ct,
                                                         SolverFacade& solver) {
    std::vector<RuleApplication> apps;
    for (size_t ti = 0; ti < ct.terms.size(); ++ti) {
        for (auto& pos : positionsOf(ct.terms[ti])) {
            Term sub = subtermAt(ct.terms[ti], pos);
            if (sub->isVar || sub->kind != SymKind::TermSym) continue;
            for (size_t ri = 0; ri < sys.rules.size(); ++ri) {
                if (applyRuleAt(sys, ct, ti, pos, sys.rules[ri], solver))
                    apps.push_back({ti, pos, ri});
            }
        }
    }
    return apps;
}

// Basic positions: a defined symbol applied to arguments free of defined
// symbols.
inline bool containsDefined(const Term& t, const std::set<std::string>& defined) {
    if (t->isVar) return false;
    if (t->kind == SymKind::TermSym && defined.count(t->name)) return true;
    for (auto& a : t->args)
        if (containsDefined(a, defined)) return true;
    return false;
}

inline std::vector<Position> basicPositions(const Term& t, const std::set<std::string>& defined) {
    std::vector<Position> out;
    for (auto& p : positionsOf(t)) {
        Term sub = subtermAt(t, p);
        if (sub->isVar || sub->kind != SymKind::TermSym || !defined.count(sub->name)) continue;
        bool basic = true;
        for (auto& a : sub->args)
            if (containsDefined(a, defined)) { basic = false; break; }
        if (basic) out.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Orthogonality: left-linearity plus absence of satisfiable critical overlaps.

struct OverlapReport {
    bool leftLinear = true;
    std::vector<std::string> nonLeftLinear;  // rule renderings
    std::vector<std::string> overlaps;       // pair descriptions
    bool orthogonal() const { return leftLinear && overlaps.empty(); }
};

namespace detail {

inline ConstrainedRule renameApart(const ConstrainedRule& r, int tag) {
    Subst ren;
    std::set<std::string> seen;
    for (const Term& t : {r.lhs, r.rhs, r.constraint})
        for (auto& v : varsOf(t))
            if (seen.insert(v->name).second)
                ren.bind(v->name, mkVar(v->name + "_r" + std::to_string(tag), v->sort));
    return {applySubst(r.lhs, ren), applySubst(r.rhs, ren), applySubst(r.constraint, ren),
            r.label};
}

}  // namespace detail

inline OverlapReport checkOrthogonal(const Lctrs& sys, SolverFacade& solver) {
    OverlapReport rep;
    for (auto& r : sys.rules) {
        std::set<std::string> seen;
        for (auto& p : positionsOf(r.lhs)) {
            Term sub = subtermAt(r.lhs, p);
            if (sub->isVar && !seen.insert(sub->name).second) {
                rep.leftLinear = false;
                rep.nonLeftLinear.push_back(showRule(r));
                break;
            }
        }
    }
    for (size_t i = 0; i < sys.rules.size(); ++i) {
        for (size_t j = 0; j < sys.rules.size(); ++j) {
            ConstrainedRule rj = detail::renameApart(sys.rules[j], 2);
            for (auto& p : positionsOf(sys.rules[i].lhs)) {
                if (i == j && p.empty()) continue;
                Term sub = subtermAt(sys.rules[i].lhs, p);
                if (sub->isVar || sub->kind != SymKind::TermSym) continue;
                if (sub->name != rj.lhs->name) continue;
                auto u = unify(sub, rj.lhs);
                if (!u) continue;
                Term both = mkOp("&&", {applySubst(sys.rules[i].constraint, *u),
                                        applySubst(rj.constraint, *u)});
                auto sat = solver.checkSat(both);
                if (sat.verdict == Satness::Unsat) continue;
                std::ostringstream os;
                os << "rules " << (sys.rules[i].label.empty() ? std::to_string(i) : sys.rules[i].label)
                   << " and " << (sys.rules[j].label.empty() ? std::to_string(j) : sys.rules[j].label)
                   << " overlap at " << showPosition(p);
                if (sat.verdict == Satness::Unknown) os << " (joint constraint undecided)";
                rep.overlaps.push_back(os.str());
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Quasi-reductivity: a defined symbol applied to normal-form arguments always
// reduces. Supported left-side shapes: arguments that are variables or values
// (guard coverage is one validity query), and arguments applying a
// constructor to distinct variables (coverage is checked per constructor of
// that sort; a defined root below is unreachable in normal forms).

struct QuasiReductivityReport {
    bool holds = true;
    std::vector<std::string> gaps;  // per-symbol diagnostics
};

namespace detail {

// encode rules as guard formulas over xs; a nested pattern is only accepted
// at `nestedAt` with root `ctor`
inline std::optional<Term> ruleCoverFormula(const ConstrainedRule& rule0,
                                            const std::vector<Term>& xs, int nestedAt,
                                            const std::string& ctor,
                                            const std::vector<Term>& innerXs) {
    ConstrainedRule r = renameApart(rule0, 9);
    std::vector<Term> conds;
    Subst sigma;
    auto bindVar = [&](const Term& pat, const Term& x) {
        if (sigma.hasBinding(pat->name)) {
            conds.push_back(mkOp("=", {x, *sigma.lookup(pat->name)}));
        } else {
            sigma.bind(pat->name, x);
        }
    };
    auto bindValue = [&](const Term& pat, const Term& x) {
        if (pat->sort == sortInt) conds.push_back(mkOp("=", {x, pat}));
        else conds.push_back(isTrueTerm(pat) ? x : mkOp("!", {x}));
    };
    for (size_t i = 0; i < r.lhs->args.size(); ++i) {
        const Term& pat = r.lhs->args[i];
        if (int(i) == nestedAt) {
            if (pat->isVar) {
                // variable pattern covers this constructor with inner args free
                continue;
            }
            if (pat->name != ctor || pat->args.size() != innerXs.size()) return std::nullopt;
            for (size_t j = 0; j < pat->args.size(); ++j) {
                const Term& ip = pat->args[j];
                if (ip->isVar) bindVar(ip, innerXs[j]);
                else if (isValue(ip)) bindValue(ip, innerXs[j]);
                else return std::nullopt;
            }
            continue;
        }
        if (pat->isVar) bindVar(pat, xs[i]);
        else if (isValue(pat)) bindValue(pat, xs[i]);
        else return std::nullopt;
    }
    for (auto& v : varsOf(r.constraint))
        if (!sigma.hasBinding(v->name)) return std::nullopt;
    conds.push_back(applySubst(r.constraint, sigma));
    return conjOf(conds);
}

}  // namespace detail

inline QuasiReductivityReport checkQuasiReductive(const Lctrs& sys, SolverFacade& solver) {
    QuasiReductivityReport rep;
    auto defined = sys.definedSymbols();
    auto judge = [&](const std::string& f, const std::vector<Term>& cover, const std::string& ctx) {
        Term disj = cover.empty() ? Term(mkBoolVal(false)) : cover[0];
        for (size_t i = 1; i < cover.size(); ++i) disj = mkOp("||", {disj, cover[i]});
        auto v = solver.checkValid(disj);
        if (v.verdict == Validity::Valid) return;
        rep.holds = false;
        std::string msg = f + ctx + ": rule guards do not cover all values";
        if (v.verdict == Validity::Invalid && v.counterexample) {
            msg += " (uncovered:";
            for (auto& [name, val] : v.counterexample->m) msg += " " + name + "=" + showTerm(val);
            msg += ")";
        } else if (v.verdict == Validity::Unknown) {
            msg = f + ctx + ": coverage undecided: " + v.reason;
        }
        rep.gaps.push_back(msg);
    };

    for (auto& f : sys.definedSymbols()) {
        auto idxs = sys.rulesRootedAt(f);
        const FunSym* sym = sys.findSymbol(f);
        if (!sym) continue;
        std::vector<Term> xs;
        for (size_t i = 0; i < sym->argSorts.size(); ++i)
            xs.push_back(mkVar("_q" + std::to_string(i + 1), sym->argSorts[i]));

        // locate nested-pattern argument positions
        int nestedAt = -1;
        bool unsupported = false;
        for (size_t ri : idxs) {
            const Term& l = sys.rules[ri].lhs;
            for (size_t i = 0; i < l->args.size(); ++i) {
                const Term& pat = l->args[i];
                if (pat->isVar || isValue(pat)) continue;
                if (nestedAt == -1) nestedAt = int(i);
                else if (nestedAt != int(i)) unsupported = true;
            }
        }
        if (unsupported) {
            rep.holds = false;
            rep.gaps.push_back(f + ": nested patterns at several positions, coverage not checked");
            continue;
        }

        if (nestedAt == -1) {
            std::vector<Term> cover;
            bool ok = true;
            for (size_t ri : idxs) {
                auto c = detail::ruleCoverFormula(sys.rules[ri], xs, -1, "", {});
                if (!c) { ok = false; break; }
                cover.push_back(*c);
            }
            if (!ok) {
                rep.holds = false;
                rep.gaps.push_back(f + ": left sides outside the supported shapes");
                continue;
            }
            judge(f, cover, "");
            continue;
        }

        // normal-form arguments at the nested position are rooted by
        // constructors: symbols of that sort without rules
        const Sort argSort = sym->argSorts[size_t(nestedAt)];
        std::vector<const FunSym*> ctors;
        for (auto& [name, g] : sys.symbols())
            if (g.resSort == argSort && !defined.count(name)) ctors.push_back(&g);
        if (argSort == sortInt || argSort == sortBool) {
            rep.holds = false;
            rep.gaps.push_back(f + ": nested pattern over a value sort, coverage not checked");
            continue;
        }
        for (const FunSym* c : ctors) {
            std::vector<Term> innerXs;
            for (size_t j = 0; j < c->argSorts.size(); ++j)
                innerXs.push_back(mkVar("_qi" + std::to_string(j + 1), c->argSorts[j]));
            std::vector<Term> cover;
            for (size_t ri : idxs) {
                auto cf = detail::ruleCoverFormula(sys.rules[ri], xs, nestedAt, c->name, innerXs);
                if (!cf) continue;  // rule for a different constructor
                cover.push_back(*cf);
            }
            judge(f, cover, " on " + c->name);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Textual format: one rule per line, `lhs -> rhs [constraint]`, comments
// start with '#'. Symbols and their sorts are inferred from use: variables
// are integers, unknown function symbols start out state-sorted and get
// patched to the sort of the opposite rule side when that side is known.

namespace detail {

// parses a term with the shared expression parser, declaring unknown symbols
// in the system on the fly
inline Term parseRuleTerm(Lctrs& sys, TokenCursor& cur, std::map<std::string, Sort>& varSorts,
                          std::vector<std::string>& declaredNow) {
    ExprCtx ctx;
    ctx.resolve = [&](const std::string& name, std::vector<Term>* args, const Token& tok) -> Term {
        if (!args) {
            auto it = varSorts.find(name);
            if (it == varSorts.end()) it = varSorts.emplace(name, sortInt).first;
            return mkVar(name, it->second);
        }
        if (isTheorySymName(name)) return mkOp(name, *args);
        if (const FunSym* f = sys.findSymbol(name)) {
            try {
                return mkApp(*f, *args);
            } catch (const TermError& e) {
                throw ParseError(e.what(), tok.line, tok.col);
            }
        }
        std::vector<Sort> argSorts;
        for (auto& a : *args) argSorts.push_back(a->sort);
        const FunSym& f = sys.declare(name, std::move(argSorts), sortState);
        declaredNow.push_back(name);
        return mkApp(f, *args);
    };
    ctx.apply = [](const std::string& name, std::vector<Term> args, const Token& tok) -> Term {
        if (name == "neg") return mkOp("-", {mkIntVal(0), args[0]});
        if (name == "/") throw ParseError("'/' is not a rule operator", tok.line, tok.col);
        if (name == "<=") return mkOp(">=", {args[1], args[0]});
        if (name == "<") return mkOp(">", {args[1], args[0]});
        try {
            return mkOp(name, std::move(args));
        } catch (const TermError& e) {
            throw ParseError(e.what(), tok.line, tok.col);
        }
    };
    return parseExpr(cur, ctx, 0);
}

}  // namespace detail

class LctrsParser {
  public:
    explicit LctrsParser(Lctrs& sys) : sys_(sys) {}

    void addRuleLine(const std::string& line, int lineNo) {
        for (int attempt = 0; attempt < 8; ++attempt) {
            if (tryParse(line, lineNo)) return;
        }
        throw ParseError("could not reconcile symbol sorts", lineNo, 1);
    }

  private:
    bool tryParse(const std::string& line, int lineNo) {
        auto toks = tokenize(line, lineNo);
        TokenCursor cur(toks);
        std::map<std::string, Sort> varSorts;
        std::vector<std::string> declaredNow;
        Term lhs = detail::parseRuleTerm(sys_, cur, varSorts, declaredNow);
        cur.expect(Tok::Arrow, "'->'");
        Term rhs = detail::parseRuleTerm(sys_, cur, varSorts, declaredNow);
        Term constraint = mkBoolVal(true);
        if (cur.accept(Tok::LBracket)) {
            constraint = detail::parseRuleTerm(sys_, cur, varSorts, declaredNow);
            if (!(constraint->sort == sortBool)) {
                Token t = cur.peek();
                throw ParseError("constraint must be boolean", t.line, t.col);
            }
            cur.expect(Tok::RBracket, "']'");
        }
        Token t = cur.peek();
        if (t.kind != Tok::End) throw ParseError("unexpected '" + t.text + "'", t.line, t.col);

        if (!(lhs->sort == rhs->sort)) {
            // a freshly guessed symbol can adopt the sort of the other side
            auto freshHere = [&](const Term& side) {
                return !side->isVar && side->kind == SymKind::TermSym &&
                       std::find(declaredNow.begin(), declaredNow.end(), side->name) !=
                           declaredNow.end();
            };
            if (freshHere(lhs) && !freshHere(rhs)) {
                repatch(lhs->name, rhs->sort);
                return false;
            }
            if (freshHere(rhs) && !freshHere(lhs)) {
                repatch(rhs->name, lhs->sort);
                return false;
            }
            throw ParseError("rule sides have different sorts", lineNo, 1);
        }
        ConstrainedRule r{lhs, rhs, constraint, "r" + std::to_string(sys_.rules.size() + 1)};
        sys_.addRule(std::move(r));
        return true;
    }

    void repatch(const std::string& name, const Sort& resSort) {
        const FunSym* old = sys_.findSymbol(name);
        Lctrs next;
        for (auto& [n, f] : sys_.symbols()) {
            if (n == name) next.declare(n, f.argSorts, resSort);
            else next.declare(n, f.argSorts, f.resSort);
        }
        (void)old;
        for (auto& r : sys_.rules) next.rules.push_back(r);
        sys_ = std::move(next);
    }

    Lctrs& sys_;
};

inline Lctrs parseLctrs(const std::string& text) {
    Lctrs sys;
    LctrsParser p(sys);
    std::istringstream is(text);
    std::string line;
    int lineNo = 0;
    while (std::getline(is, line)) {
        ++lineNo;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        bool blank = true;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) { blank = false; break; }
        if (blank) continue;
        p.addRuleLine(line, lineNo);
    }
    return sys;
}

inline std::string showLctrs(const Lctrs& sys) {
    std::string out;
    for (auto& r : sys.rules) out += showRule(r) + "\n";
    return out;
}

// Parses one term against an existing system's symbols, using the rule
// grammar. Unknown applied symbols are rejected rather than declared.
inline Term parseTermFor(const Lctrs& sys, const std::string& text) {
    auto toks = tokenize(text, 1);
    TokenCursor cur(toks);
    std::map<std::string, Sort> varSorts;
    std::vector<std::string> declaredNow;
    Lctrs scratch = sys;
    Term t = detail::parseRuleTerm(scratch, cur, varSorts, declaredNow);
    Token rest = cur.peek();
    if (rest.kind != Tok::End) throw ParseError("unexpected '" + rest.text + "'", rest.line, rest.col);
    if (!declaredNow.empty())
        throw ParseError("unknown symbol '" + declaredNow.front() + "'", 1, 1);
    return t;
}

}  // namespace hoare2ri
