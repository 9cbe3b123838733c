#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hoare2ri/bigint.hpp"

namespace hoare2ri {

struct TermError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Sorts and symbols

struct Sort {
    std::string name;
    bool operator==(const Sort& o) const { return name == o.name; }
    bool operator!=(const Sort& o) const { return name != o.name; }
    bool operator<(const Sort& o) const { return name < o.name; }
};

inline const Sort sortInt{"int"};
inline const Sort sortBool{"bool"};
inline const Sort sortState{"state"};

// Value symbols are the theory constants in bijection with the carrier.
enum class SymKind { TermSym, TheorySym, ValueSym };

struct FunSym {
    std::string name;
    std::vector<Sort> argSorts;
    Sort resSort;
    SymKind kind = SymKind::TermSym;
};

// ---------------------------------------------------------------------------
// Terms. Immutable, shared. A node is a variable or an application; values
// are nullary applications carrying their payload.

struct TermNode;
using Term = std::shared_ptr<const TermNode>;

struct TermNode {
    bool isVar = false;
    std::string name;
    Sort sort{"int"};
    SymKind kind = SymKind::TermSym;
    std::optional<Int> num;   // set iff integer value
    std::optional<bool> bv;   // set iff boolean value
    std::vector<Term> args;
    size_t hash = 0;
};

inline size_t hashCombine(size_t h, size_t v) {
    return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

inline size_t hashString(const std::string& s) {
    size_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline Term mkVar(const std::string& name, const Sort& sort) {
    auto n = std::make_shared<TermNode>();
    n->isVar = true;
    n->name = name;
    n->sort = sort;
    n->hash = hashCombine(hashString(name), hashString(sort.name)) | 1;
    return n;
}

inline Term mkApp(const FunSym& f, std::vector<Term> args) {
    if (args.size() != f.argSorts.size())
        throw TermError("arity mismatch for symbol '" + f.name + "'");
    for (size_t i = 0; i < args.size(); ++i)
        if (args[i]->sort != f.argSorts[i])
            throw TermError("sort mismatch at argument " + std::to_string(i + 1) +
                            " of '" + f.name + "': expected " + f.argSorts[i].name +
                            ", got " + args[i]->sort.name);
    auto n = std::make_shared<TermNode>();
    n->isVar = false;
    n->name = f.name;
    n->sort = f.resSort;
    n->kind = f.kind;
    n->args = std::move(args);
    size_t h = hashString(f.name);
    h = hashCombine(h, hashString(f.resSort.name));
    for (auto& a : n->args) h = hashCombine(h, a->hash);
    n->hash = h & ~size_t(1);
    return n;
}

inline Term mkIntVal(const Int& v) {
    auto n = std::make_shared<TermNode>();
    n->isVar = false;
    n->name = v.str();
    n->sort = sortInt;
    n->kind = SymKind::ValueSym;
    n->num = v;
    n->hash = hashCombine(hashString(n->name), 7) & ~size_t(1);
    return n;
}

inline Term mkBoolVal(bool b) {
    auto n = std::make_shared<TermNode>();
    n->isVar = false;
    n->name = b ? "true" : "false";
    n->sort = sortBool;
    n->kind = SymKind::ValueSym;
    n->bv = b;
    n->hash = hashCombine(hashString(n->name), 11) & ~size_t(1);
    return n;
}

inline bool isValue(const Term& t) { return !t->isVar && t->kind == SymKind::ValueSym; }
inline bool isIntVal(const Term& t) { return isValue(t) && t->num.has_value(); }
inline bool isBoolVal(const Term& t) { return isValue(t) && t->bv.has_value(); }
inline bool isTrueTerm(const Term& t) { return isBoolVal(t) && *t->bv; }
inline bool isFalseTerm(const Term& t) { return isBoolVal(t) && !*t->bv; }

inline bool termEq(const Term& a, const Term& b) {
    if (a.get() == b.get()) return true;
    if (a->hash != b->hash) return false;
    if (a->isVar != b->isVar || a->name != b->name || a->sort != b->sort) return false;
    if (a->args.size() != b->args.size()) return false;
    for (size_t i = 0; i < a->args.size(); ++i)
        if (!termEq(a->args[i], b->args[i])) return false;
    return true;
}

// Total order on terms, used for canonical sets.
inline int termCmp(const Term& a, const Term& b) {
    if (a.get() == b.get()) return 0;
    if (a->isVar != b->isVar) return a->isVar ? -1 : 1;
    if (int c = a->name.compare(b->name)) return c < 0 ? -1 : 1;
    if (int c = a->sort.name.compare(b->sort.name)) return c < 0 ? -1 : 1;
    if (a->args.size() != b->args.size()) return a->args.size() < b->args.size() ? -1 : 1;
    for (size_t i = 0; i < a->args.size(); ++i)
        if (int c = termCmp(a->args[i], b->args[i])) return c;
    return 0;
}

struct TermLess {
    bool operator()(const Term& a, const Term& b) const { return termCmp(a, b) < 0; }
};

// ---------------------------------------------------------------------------
// Positions: 1-based argument paths; the root is the empty sequence.

using Position = std::vector<int>;

inline std::string showPosition(const Position& p) {
    if (p.empty()) return "ε";
    std::string s;
    for (size_t i = 0; i < p.size(); ++i) {
        if (i) s += '.';
        s += std::to_string(p[i]);
    }
    return s;
}

inline Term subtermAt(const Term& t, const Position& p) {
    Term cur = t;
    for (int i : p) {
        if (i < 1 || size_t(i) > cur->args.size())
            throw TermError("position " + showPosition(p) + " out of range");
        cur = cur->args[i - 1];
    }
    return cur;
}

inline Term replaceAt(const Term& t, const Position& p, const Term& s) {
    if (p.empty()) return s;
    int i = p.front();
    if (i < 1 || size_t(i) > t->args.size())
        throw TermError("position " + showPosition(p) + " out of range");
    auto n = std::make_shared<TermNode>(*t);
    Position rest(p.begin() + 1, p.end());
    n->args[i - 1] = replaceAt(t->args[i - 1], rest, s);
    size_t h = hashString(n->name);
    h = hashCombine(h, hashString(n->sort.name));
    for (auto& a : n->args) h = hashCombine(h, a->hash);
    n->hash = h & ~size_t(1);
    return n;
}

inline void collectPositions(const Term& t, Position& cur, std::vector<Position>& out) {
    out.push_back(cur);
    for (size_t i = 0; i < t->args.size(); ++i) {
        cur.push_back(int(i + 1));
        collectPositions(t->args[i], cur, out);
        cur.pop_back();
    }
}

inline std::vector<Position> positionsOf(const Term& t) {
    std::vector<Position> out;
    Position cur;
    collectPositions(t, cur, out);
    return out;
}

// Variables in first-occurrence order.
inline void collectVars(const Term& t, std::vector<Term>& out, std::set<std::string>& seen) {
    if (t->isVar) {
        if (seen.insert(t->name).second) out.push_back(t);
        return;
    }
    for (auto& a : t->args) collectVars(a, out, seen);
}

inline std::vector<Term> varsOf(const Term& t) {
    std::vector<Term> out;
    std::set<std::string> seen;
    collectVars(t, out, seen);
    return out;
}

inline bool occursIn(const std::string& var, const Term& t) {
    if (t->isVar) return t->name == var;
    for (auto& a : t->args)
        if (occursIn(var, a)) return true;
    return false;
}

inline bool containsSubterm(const Term& t, const Term& s) {
    if (termEq(t, s)) return true;
    for (auto& a : t->args)
        if (containsSubterm(a, s)) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Substitutions

struct Subst {
    std::map<std::string, Term> m;

    bool hasBinding(const std::string& v) const { return m.count(v) != 0; }
    const Term* lookup(const std::string& v) const {
        auto it = m.find(v);
        return it == m.end() ? nullptr : &it->second;
    }
    void bind(const std::string& v, const Term& t) { m[v] = t; }
    bool empty() const { return m.empty(); }
};

inline Term applySubst(const Term& t, const Subst& s) {
    if (t->isVar) {
        if (auto* b = s.lookup(t->name)) {
            if ((*b)->sort != t->sort)
                throw TermError("substitution binds '" + t->name + "' across sorts");
            return *b;
        }
        return t;
    }
    if (t->args.empty()) return t;
    bool changed = false;
    std::vector<Term> args;
    args.reserve(t->args.size());
    for (auto& a : t->args) {
        Term r = applySubst(a, s);
        changed = changed || r.get() != a.get();
        args.push_back(r);
    }
    if (!changed) return t;
    auto n = std::make_shared<TermNode>(*t);
    n->args = std::move(args);
    size_t h = hashString(n->name);
    h = hashCombine(h, hashString(n->sort.name));
    for (auto& a : n->args) h = hashCombine(h, a->hash);
    n->hash = h & ~size_t(1);
    return n;
}

// sigma then tau: x -> tau(sigma(x)), plus tau's own bindings.
inline Subst composeSubst(const Subst& sigma, const Subst& tau) {
    Subst out;
    for (auto& [v, t] : sigma.m) out.bind(v, applySubst(t, tau));
    for (auto& [v, t] : tau.m)
        if (!out.hasBinding(v)) out.bind(v, t);
    return out;
}

// ---------------------------------------------------------------------------
// Matching: find sigma with pattern*sigma == subject. Variables of the
// subject are treated as constants.

inline bool matchInto(const Term& pat, const Term& sub, Subst& s) {
    if (pat->isVar) {
        if (pat->sort != sub->sort) return false;
        if (auto* b = s.lookup(pat->name)) return termEq(*b, sub);
        s.bind(pat->name, sub);
        return true;
    }
    if (sub->isVar) return false;
    if (pat->name != sub->name || pat->sort != sub->sort ||
        pat->args.size() != sub->args.size())
        return false;
    if (isValue(pat) != isValue(sub)) return false;
    for (size_t i = 0; i < pat->args.size(); ++i)
        if (!matchInto(pat->args[i], sub->args[i], s)) return false;
    return true;
}

inline std::optional<Subst> matchTerm(const Term& pattern, const Term& subject) {
    Subst s;
    if (matchInto(pattern, subject, s)) return s;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Unification with occurs check. When a variable meets a term, variables of
// the second argument are bound in preference, so unifying s with a renamed
// rule left-hand side keeps s's variable names in the unifier's range.

inline bool unifyInto(const Term& a, const Term& b, Subst& s);

inline bool unifyBind(const Term& var, const Term& t, Subst& s) {
    Term tt = applySubst(t, s);
    if (tt->isVar && tt->name == var->name) return true;
    if (occursIn(var->name, tt)) return false;
    if (var->sort != tt->sort) return false;
    Subst single;
    single.bind(var->name, tt);
    for (auto& [v, bnd] : s.m) bnd = applySubst(bnd, single);
    s.bind(var->name, tt);
    return true;
}

inline bool unifyInto(const Term& a0, const Term& b0, Subst& s) {
    Term a = applySubst(a0, s);
    Term b = applySubst(b0, s);
    if (termEq(a, b)) return true;
    if (b->isVar) return unifyBind(b, a, s);
    if (a->isVar) return unifyBind(a, b, s);
    if (a->name != b->name || a->sort != b->sort || a->args.size() != b->args.size())
        return false;
    for (size_t i = 0; i < a->args.size(); ++i)
        if (!unifyInto(a->args[i], b->args[i], s)) return false;
    return true;
}

inline std::optional<Subst> unify(const Term& a, const Term& b) {
    Subst s;
    if (unifyInto(a, b, s)) return s;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Printing. Theory operators print infix with minimal parentheses; div, mod
// and exp print prefix; everything else prints as f(a1,...,an).

inline int infixPrec(const std::string& op) {
    if (op == "*") return 8;
    if (op == "+" || op == "-") return 7;
    if (op == "=" || op == "!=" || op == ">=" || op == ">") return 6;
    if (op == "&&") return 4;
    if (op == "||") return 3;
    if (op == "=>") return 2;
    return -1;
}

inline bool leftAssoc(const std::string& op) {
    return op == "*" || op == "+" || op == "-" || op == "&&" || op == "||";
}

inline void printTerm(std::ostream& os, const Term& t, int parentPrec, bool rightSide) {
    if (t->isVar) {
        os << t->name;
        return;
    }
    if (isIntVal(t)) {
        bool neg = *t->num < 0;
        bool needParens = neg && parentPrec > 0;
        if (needParens) os << '(';
        os << t->name;
        if (needParens) os << ')';
        return;
    }
    if (t->name == "!" && t->args.size() == 1) {
        os << "!(";
        printTerm(os, t->args[0], 0, false);
        os << ')';
        return;
    }
    int prec = t->args.size() == 2 ? infixPrec(t->name) : -1;
    if (prec > 0) {
        bool needParens = prec < parentPrec || (prec == parentPrec && rightSide == leftAssoc(t->name));
        if (needParens) os << '(';
        printTerm(os, t->args[0], prec, false);
        os << ' ' << t->name << ' ';
        printTerm(os, t->args[1], prec, true);
        if (needParens) os << ')';
        return;
    }
    os << t->name;
    if (!t->args.empty() || t->kind == SymKind::TermSym) {
        if (!t->args.empty()) {
            os << '(';
            for (size_t i = 0; i < t->args.size(); ++i) {
                if (i) os << ',';
                printTerm(os, t->args[i], 0, false);
            }
            os << ')';
        }
    }
}

inline std::string showTerm(const Term& t) {
    std::ostringstream os;
    printTerm(os, t, 0, false);
    return os.str();
}

}  // namespace hoare2ri
