#pragma once

#include <map>
#include <string>
#include <vector>

#include "hoare2ri/lctrs.hpp"
#include "hoare2ri/whilelang.hpp"

namespace hoare2ri {

// ---------------------------------------------------------------------------
// Programs become rewrite systems over state terms: one state symbol per
// command line, one end symbol for the blank end marker, and transition rules
// that mirror control flow. Assertions contribute no states; guards become
// rule constraints.

struct ConversionMap {
    std::vector<int> commandLines;  // non-assertion lines, blank included
    int startLine = 0;
    int endLine = 0;
    std::map<int, int> successor;  // command line -> following command line
    std::vector<std::string> vars;

    std::string stateName(int line) const {
        return line == endLine ? "end" : "state" + std::to_string(line);
    }
};

struct Conversion {
    Lctrs sys;
    ConversionMap map;
};

inline Conversion convert(const WhileAst& ast) {
    Conversion conv;
    ConversionMap& map = conv.map;
    map.vars = ast.vars;

    for (auto& l : ast.lines)
        if (l.kind != LineKind::Assert) map.commandLines.push_back(l.number);
    map.startLine = map.commandLines.front();
    map.endLine = map.commandLines.back();
    for (size_t i = 0; i + 1 < map.commandLines.size(); ++i)
        map.successor[map.commandLines[i]] = map.commandLines[i + 1];

    std::vector<Sort> argSorts(map.vars.size(), sortInt);
    for (int line : map.commandLines) conv.sys.declare(map.stateName(line), argSorts, sortState);

    std::vector<Term> xs;
    for (auto& v : map.vars) xs.push_back(mkVar(v, sortInt));
    auto state = [&](int line, std::vector<Term> args) {
        return mkApp(*conv.sys.findSymbol(map.stateName(line)), std::move(args));
    };
    auto label = [](int line, bool alt = false) {
        return "r" + std::to_string(line) + (alt ? "x" : "");
    };

    for (auto& l : ast.lines) {
        switch (l.kind) {
            case LineKind::Assign: {
                std::vector<Term> rhs = xs;
                for (size_t k = 0; k < map.vars.size(); ++k)
                    if (map.vars[k] == l.var) rhs[k] = l.expr;
                conv.sys.addRule({state(l.number, xs), state(map.successor.at(l.number), rhs),
                                  mkBoolVal(true), label(l.number)});
                break;
            }
            case LineKind::Skip:
                conv.sys.addRule({state(l.number, xs), state(map.successor.at(l.number), xs),
                                  mkBoolVal(true), label(l.number)});
                break;
            case LineKind::IfOpen:
                conv.sys.addRule({state(l.number, xs), state(map.successor.at(l.number), xs),
                                  l.guard, label(l.number)});
                conv.sys.addRule({state(l.number, xs), state(map.successor.at(l.elseLine), xs),
                                  mkOp("!", {l.guard}), label(l.number, true)});
                break;
            case LineKind::ElseOpen:
                // reached when the then branch finishes: fall past the close
                conv.sys.addRule({state(l.number, xs), state(map.successor.at(l.closeLine), xs),
                                  mkBoolVal(true), label(l.number)});
                break;
            case LineKind::Close: {
                const ProgLine* open = ast.find(l.match);
                int target = open->kind == LineKind::WhileOpen ? l.match
                                                               : map.successor.at(l.number);
                conv.sys.addRule({state(l.number, xs), state(target, xs), mkBoolVal(true),
                                  label(l.number)});
                break;
            }
            case LineKind::WhileOpen:
                conv.sys.addRule({state(l.number, xs), state(map.successor.at(l.number), xs),
                                  l.guard, label(l.number)});
                conv.sys.addRule({state(l.number, xs), state(map.successor.at(l.closeLine), xs),
                                  mkOp("!", {l.guard}), label(l.number, true)});
                break;
            case LineKind::Assert:
            case LineKind::Blank:
                break;
        }
    }
    return conv;
}

// Appends the postcondition oracle: chk maps final states to their verdict.
inline void addCheckRules(Conversion& conv, const Term& psi) {
    conv.sys.declare("chk", {sortState}, sortBool);
    std::vector<Term> xs;
    for (auto& v : conv.map.vars) xs.push_back(mkVar(v, sortInt));
    Term endT = mkApp(*conv.sys.findSymbol("end"), xs);
    const FunSym* chk = conv.sys.findSymbol("chk");
    conv.sys.addRule({mkApp(*chk, {endT}), mkBoolVal(true), psi, "check_t"});
    conv.sys.addRule({mkApp(*chk, {endT}), mkBoolVal(false), mkOp("!", {psi}), "check_f"});
}

// The proof obligation: running the program from any state satisfying the
// precondition ends in a state the check accepts.
inline CTerms goalEquation(const Conversion& conv, const Term& phi) {
    std::vector<Term> xs;
    for (auto& v : conv.map.vars) xs.push_back(mkVar(v, sortInt));
    Term start = mkApp(*conv.sys.findSymbol(conv.map.stateName(conv.map.startLine)), xs);
    return {{mkApp(*conv.sys.findSymbol("chk"), {start}), mkBoolVal(true)}, phi};
}

// Ground state term for a valuation, for running the rewrite system directly.
inline Term stateTerm(const Conversion& conv, int line, const Valuation& theta) {
    std::vector<Term> args;
    for (auto& v : conv.map.vars) args.push_back(mkIntVal(theta.at(v)));
    return mkApp(*conv.sys.findSymbol(conv.map.stateName(line)), std::move(args));
}

}  // namespace hoare2ri
