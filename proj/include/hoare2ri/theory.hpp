#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hoare2ri/bigint.hpp"
#include "hoare2ri/term.hpp"

namespace hoare2ri {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// The integer core theory: total on all arguments. Division and modulo by
// zero evaluate to 0; exp with a negative exponent evaluates to 0. `<=` and
// `<` exist only as parser sugar and never appear in terms.

inline const FunSym& theorySym(const std::string& name) {
    static const std::map<std::string, FunSym> table = [] {
        std::map<std::string, FunSym> m;
        auto add = [&](const std::string& n, std::vector<Sort> as, Sort r) {
            m[n] = FunSym{n, std::move(as), r, SymKind::TheorySym};
        };
        add("+", {sortInt, sortInt}, sortInt);
        add("-", {sortInt, sortInt}, sortInt);
        add("*", {sortInt, sortInt}, sortInt);
        add("exp", {sortInt, sortInt}, sortInt);
        add("div", {sortInt, sortInt}, sortInt);
        add("mod", {sortInt, sortInt}, sortInt);
        add("=", {sortInt, sortInt}, sortBool);
        add("!=", {sortInt, sortInt}, sortBool);
        add(">=", {sortInt, sortInt}, sortBool);
        add(">", {sortInt, sortInt}, sortBool);
        add("&&", {sortBool, sortBool}, sortBool);
        add("||", {sortBool, sortBool}, sortBool);
        add("=>", {sortBool, sortBool}, sortBool);
        add("!", {sortBool}, sortBool);
        return m;
    }();
    auto it = table.find(name);
    if (it == table.end()) throw EvalError("unknown theory symbol '" + name + "'");
    return it->second;
}

inline bool isTheorySymName(const std::string& name) {
    static const std::vector<std::string> names = {
        "+", "-", "*", "exp", "div", "mod", "=", "!=", ">=", ">", "&&", "||", "=>", "!"};
    for (auto& n : names)
        if (n == name) return true;
    return false;
}

inline Term mkOp(const std::string& name, std::vector<Term> args) {
    return mkApp(theorySym(name), std::move(args));
}

// A logical term is built from theory symbols, values and variables only.
inline bool isLogicalTerm(const Term& t) {
    if (t->isVar || isValue(t)) return true;
    if (t->kind != SymKind::TheorySym) return false;
    for (auto& a : t->args)
        if (!isLogicalTerm(a)) return false;
    return true;
}

inline Int intOf(const Term& t) {
    if (!isIntVal(t)) throw EvalError("expected an integer value, got " + showTerm(t));
    return *t->num;
}

inline bool boolOf(const Term& t) {
    if (!isBoolVal(t)) throw EvalError("expected a boolean value, got " + showTerm(t));
    return *t->bv;
}

// Evaluates a ground logical term to its value. Errors on variables and on
// non-theory symbols.
inline Term evalGround(const Term& t) {
    if (t->isVar) throw EvalError("evalGround: non-ground input, variable '" + t->name + "'");
    if (isValue(t)) return t;
    if (t->kind != SymKind::TheorySym)
        throw EvalError("evalGround: non-theory symbol '" + t->name + "' present");
    const std::string& f = t->name;
    if (f == "&&") {
        return mkBoolVal(boolOf(evalGround(t->args[0])) && boolOf(evalGround(t->args[1])));
    }
    if (f == "||") {
        return mkBoolVal(boolOf(evalGround(t->args[0])) || boolOf(evalGround(t->args[1])));
    }
    if (f == "=>") {
        return mkBoolVal(!boolOf(evalGround(t->args[0])) || boolOf(evalGround(t->args[1])));
    }
    if (f == "!") return mkBoolVal(!boolOf(evalGround(t->args[0])));
    Int a = intOf(evalGround(t->args[0]));
    Int b = intOf(evalGround(t->args[1]));
    if (f == "+") return mkIntVal(a + b);
    if (f == "-") return mkIntVal(a - b);
    if (f == "*") return mkIntVal(a * b);
    if (f == "exp") return mkIntVal(expInt(a, b));
    if (f == "div") return mkIntVal(euclidDiv(a, b));
    if (f == "mod") return mkIntVal(euclidMod(a, b));
    if (f == "=") return mkBoolVal(a == b);
    if (f == "!=") return mkBoolVal(a != b);
    if (f == ">=") return mkBoolVal(a >= b);
    if (f == ">") return mkBoolVal(a > b);
    throw EvalError("evalGround: unhandled theory symbol '" + f + "'");
}

// gamma respects phi iff it maps every variable of phi to a value and the
// instantiated constraint evaluates to true.
inline bool respects(const Subst& gamma, const Term& phi) {
    for (auto& v : varsOf(phi)) {
        auto* b = gamma.lookup(v->name);
        if (!b || !isValue(*b)) return false;
    }
    return boolOf(evalGround(applySubst(phi, gamma)));
}

// The calculation rule f(x1,...,xn) -> y [y = f(x1,...,xn)] for a non-value
// theory symbol. Boolean results use y = f(...) via <=> encoded with =.
struct CalcRule {
    Term lhs;
    Term rhs;
    Term constraint;
};

inline CalcRule calcRuleFor(const std::string& name) {
    const FunSym& f = theorySym(name);
    std::vector<Term> xs;
    for (size_t i = 0; i < f.argSorts.size(); ++i)
        xs.push_back(mkVar("x" + std::to_string(i + 1), f.argSorts[i]));
    Term lhs = mkApp(f, xs);
    Term y = mkVar("y", f.resSort);
    Term cond;
    if (f.resSort == sortInt) {
        cond = mkOp("=", {y, lhs});
    } else {
        // y <=> f(...) expressed as (y => f(...)) && (f(...) => y)
        cond = mkOp("&&", {mkOp("=>", {y, lhs}), mkOp("=>", {lhs, y})});
    }
    return CalcRule{lhs, y, cond};
}

}  // namespace hoare2ri
