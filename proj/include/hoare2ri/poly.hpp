#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hoare2ri/term.hpp"
#include "hoare2ri/theory.hpp"

namespace hoare2ri {

// ---------------------------------------------------------------------------
// Multivariate integer polynomials, used by the builtin validity engine and
// by constrained-term normalization. Non-polynomial subterms (div, mod, exp)
// are folded into opaque atoms identified by their canonical print, treated
// as fresh variables; every derivation over them stays sound because they are
// never rewritten.

using Monomial = std::map<std::string, int>;  // variable -> exponent, all > 0

struct Poly {
    std::map<Monomial, Int> coef;  // zero coefficients never stored

    static Poly constant(const Int& c) {
        Poly p;
        if (c != 0) p.coef[{}] = c;
        return p;
    }
    static Poly variable(const std::string& v) {
        Poly p;
        p.coef[{{v, 1}}] = 1;
        return p;
    }

    bool isZero() const { return coef.empty(); }
    bool isConst() const {
        return coef.empty() || (coef.size() == 1 && coef.begin()->first.empty());
    }
    Int constValue() const {
        auto it = coef.find({});
        return it == coef.end() ? Int(0) : it->second;
    }

    void addTerm(const Monomial& m, const Int& c) {
        if (c == 0) return;
        auto it = coef.find(m);
        if (it == coef.end()) {
            coef[m] = c;
        } else {
            it->second += c;
            if (it->second == 0) coef.erase(it);
        }
    }

    bool operator==(const Poly& o) const { return coef == o.coef; }
    bool operator<(const Poly& o) const { return coef < o.coef; }
};

inline Poly polyAdd(const Poly& a, const Poly& b) {
    Poly r = a;
    for (auto& [m, c] : b.coef) r.addTerm(m, c);
    return r;
}

inline Poly polyNeg(const Poly& a) {
    Poly r;
    for (auto& [m, c] : a.coef) r.coef[m] = -c;
    return r;
}

inline Poly polySub(const Poly& a, const Poly& b) { return polyAdd(a, polyNeg(b)); }

inline Poly polyMul(const Poly& a, const Poly& b) {
    Poly r;
    for (auto& [ma, ca] : a.coef)
        for (auto& [mb, cb] : b.coef) {
            Monomial m = ma;
            for (auto& [v, e] : mb) m[v] += e;
            r.addTerm(m, ca * cb);
        }
    return r;
}

inline Poly polyScale(const Poly& a, const Int& k) {
    Poly r;
    if (k == 0) return r;
    for (auto& [m, c] : a.coef) r.coef[m] = c * k;
    return r;
}

inline std::vector<std::string> polyVars(const Poly& p) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& [m, c] : p.coef)
        for (auto& [v, e] : m)
            if (seen.insert(v).second) out.push_back(v);
    return out;
}

// Substitute variable v by polynomial q.
inline Poly polySubstVar(const Poly& p, const std::string& v, const Poly& q) {
    Poly r;
    for (auto& [m, c] : p.coef) {
        auto it = m.find(v);
        if (it == m.end()) {
            r.addTerm(m, c);
            continue;
        }
        Monomial rest = m;
        int e = it->second;
        rest.erase(v);
        Poly part;
        part.coef[rest] = c;
        for (int i = 0; i < e; ++i) part = polyMul(part, q);
        r = polyAdd(r, part);
    }
    return r;
}

// If v occurs exactly linearly with coefficient +-1 and in no other monomial,
// return the coefficient sign; used for invertible eliminations over Z.
inline std::optional<int> unitLinearCoef(const Poly& p, const std::string& v) {
    std::optional<int> sign;
    for (auto& [m, c] : p.coef) {
        auto it = m.find(v);
        if (it == m.end()) continue;
        if (it->second != 1 || m.size() != 1) return std::nullopt;
        if (sign) return std::nullopt;
        if (c == 1) sign = 1;
        else if (c == -1) sign = -1;
        else return std::nullopt;
    }
    return sign;
}

inline std::string showPoly(const Poly& p) {
    if (p.coef.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (auto& [m, c] : p.coef) {
        if (!first) os << (c >= 0 ? " + " : " - ");
        else if (c < 0) os << "-";
        first = false;
        Int ac = c < 0 ? Int(-c) : c;
        bool wrote = false;
        if (ac != 1 || m.empty()) {
            os << ac.str();
            wrote = true;
        }
        for (auto& [v, e] : m) {
            if (wrote) os << "*";
            os << v;
            if (e > 1) os << "^" << e;
            wrote = true;
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Conversion from integer-sorted logical terms. Opaque subterms get stable
// synthetic names so equal subterms share an atom.

struct OpaquePool {
    std::map<std::string, std::pair<std::string, Term>> byPrint;  // print -> (name, term)
    std::string nameFor(const Term& t) {
        std::string key = showTerm(t);
        auto it = byPrint.find(key);
        if (it != byPrint.end()) return it->second.first;
        std::string name = "#o" + std::to_string(byPrint.size() + 1);
        byPrint.emplace(key, std::make_pair(name, t));
        return name;
    }
};

inline Poly polyFromTerm(const Term& t, OpaquePool& pool) {
    if (t->isVar) return Poly::variable(t->name);
    if (isIntVal(t)) return Poly::constant(*t->num);
    if (t->kind == SymKind::TheorySym) {
        if (t->name == "+") return polyAdd(polyFromTerm(t->args[0], pool), polyFromTerm(t->args[1], pool));
        if (t->name == "-") return polySub(polyFromTerm(t->args[0], pool), polyFromTerm(t->args[1], pool));
        if (t->name == "*") return polyMul(polyFromTerm(t->args[0], pool), polyFromTerm(t->args[1], pool));
    }
    return Poly::variable(pool.nameFor(t));
}

// ---------------------------------------------------------------------------
// Normalized comparison atoms: p = 0, p >= 0 (integer-tightened), p != 0.

enum class AtomKind { Eq, Ge, Neq };

struct PolyAtom {
    AtomKind kind;
    Poly p;
    bool operator==(const PolyAtom& o) const { return kind == o.kind && p == o.p; }
    bool operator<(const PolyAtom& o) const {
        if (kind != o.kind) return kind < o.kind;
        return p < o.p;
    }
};

inline Int polyContentGcd(const Poly& p, bool skipConstant) {
    Int g = 0;
    for (auto& [m, c] : p.coef) {
        if (skipConstant && m.empty()) continue;
        g = boost::multiprecision::gcd(g, c < 0 ? Int(-c) : c);
    }
    return g;
}

inline PolyAtom canonicalAtom(AtomKind kind, Poly p) {
    if (p.isConst()) return PolyAtom{kind, p};
    if (kind == AtomKind::Ge) {
        // g*q + c >= 0  <=>  q + floor(c/g) >= 0  for g = gcd of variable coefficients
        Int g = polyContentGcd(p, true);
        if (g > 1) {
            Poly q;
            Int c = 0;
            for (auto& [m, coe] : p.coef) {
                if (m.empty()) c = coe;
                else q.coef[m] = coe / g;
            }
            q.addTerm({}, euclidDiv(c, g));  // floor since g > 0
            return PolyAtom{AtomKind::Ge, q};
        }
        return PolyAtom{AtomKind::Ge, std::move(p)};
    }
    // Eq / Neq: primitive part with positive leading coefficient
    Int g = polyContentGcd(p, false);
    Poly q;
    for (auto& [m, c] : p.coef) q.coef[m] = g > 1 ? Int(c / g) : c;
    if (!q.coef.empty() && q.coef.begin()->second < 0) q = polyNeg(q);
    return PolyAtom{kind, std::move(q)};
}

// Builds the atom for a comparison term, negated if `negate`.
// Comparison ops: =, !=, >=, > (parser sugar already eliminated <=, <).
inline std::optional<PolyAtom> atomFromComparison(const Term& t, bool negate, OpaquePool& pool) {
    if (t->isVar || t->kind != SymKind::TheorySym) return std::nullopt;
    const std::string& f = t->name;
    if (f != "=" && f != "!=" && f != ">=" && f != ">") return std::nullopt;
    Poly l = polyFromTerm(t->args[0], pool);
    Poly r = polyFromTerm(t->args[1], pool);
    Poly d = polySub(l, r);
    AtomKind k;
    if (f == "=") k = negate ? AtomKind::Neq : AtomKind::Eq;
    else if (f == "!=") k = negate ? AtomKind::Eq : AtomKind::Neq;
    else if (f == ">=") {
        if (negate) { k = AtomKind::Ge; d = polySub(polyNeg(d), Poly::constant(1)); }
        else k = AtomKind::Ge;
    } else {  // ">"
        if (negate) { k = AtomKind::Ge; d = polyNeg(d); }
        else { k = AtomKind::Ge; d = polySub(d, Poly::constant(1)); }
    }
    return canonicalAtom(k, std::move(d));
}

inline std::string showAtom(const PolyAtom& a) {
    switch (a.kind) {
        case AtomKind::Eq: return showPoly(a.p) + " = 0";
        case AtomKind::Ge: return showPoly(a.p) + " >= 0";
        default: return showPoly(a.p) + " != 0";
    }
}

// ---------------------------------------------------------------------------
// Rendering polynomials back into terms. Opaque names resolve through the
// pool they were created with.

inline Term opaqueTermOf(const OpaquePool& pool, const std::string& name) {
    for (auto& [print, entry] : pool.byPrint)
        if (entry.first == name) return entry.second;
    return nullptr;
}

// Sum of the monomials given as (monomial, positive coefficient) pairs; 0 when empty.
inline Term monomialSumTerm(const std::vector<std::pair<Monomial, Int>>& monos,
                            const OpaquePool& pool) {
    if (monos.empty()) return mkIntVal(0);
    Term sum;
    for (auto& [m, c] : monos) {
        Term prod;
        if (c != 1 || m.empty()) prod = mkIntVal(c);
        for (auto& [v, e] : m) {
            Term base = v.rfind("#o", 0) == 0 ? opaqueTermOf(pool, v) : mkVar(v, sortInt);
            for (int k = 0; k < e; ++k) prod = prod ? mkOp("*", {prod, base}) : base;
        }
        sum = sum ? mkOp("+", {sum, prod}) : prod;
    }
    return sum;
}

// Renders `l op r` for the difference polynomial p = l - r, splitting monomials
// by coefficient sign so both sides print without negations.
inline Term comparisonOfPoly(const std::string& op, const Poly& p, const OpaquePool& pool) {
    std::vector<std::pair<Monomial, Int>> pos, neg;
    for (auto& [m, c] : p.coef)
        (c > 0 ? pos : neg).push_back({m, c > 0 ? c : Int(-c)});
    return mkOp(op, {monomialSumTerm(pos, pool), monomialSumTerm(neg, pool)});
}

}  // namespace hoare2ri
