#pragma once

// Checks that an annotated program is a proof tableau: every command is
// bracketed by assertions and the bracketing formulas satisfy the proof
// conditions of the underlying logic.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoare2ri/convert.hpp"

namespace hoare2ri {

struct TableauError : std::runtime_error {
    explicit TableauError(const std::string& m) : std::runtime_error(m) {}
};

// One proof condition.  `usedSolver` marks conditions that only closed
// semantically; syntactic and polynomial matching settle the rest.
struct Obligation {
    std::string kind;
    int line = 0;
    int otherLine = 0;
    Validity verdict = Validity::Unknown;
    bool usedSolver = false;
    std::string detail;
};

struct TableauReport {
    std::vector<Obligation> obligations;
    std::vector<std::string> shapeErrors;

    bool valid() const {
        if (!shapeErrors.empty()) return false;
        for (auto& o : obligations)
            if (o.verdict != Validity::Valid) return false;
        return true;
    }
};

struct HoareTriple {
    Term pre;
    WhileAst program;  // annotations stripped
    Term post;
};

namespace detail {

inline std::string showModel(const Subst& s) {
    std::string out;
    for (auto& [v, t] : s.m) {
        if (!out.empty()) out += ", ";
        out += v + " = " + showTerm(t);
    }
    return out;
}

// Conjunct list as canonical atom strings; nullopt when a conjunct is not a
// comparison (the solver ladder takes over then).
inline std::optional<std::vector<std::string>> atomStrings(const Term& f, OpaquePool& pool) {
    std::vector<std::string> out;
    for (auto& c : flattenConj(f)) {
        if (isTrueTerm(c)) continue;
        bool neg = false;
        Term body = c;
        if (!body->isVar && body->name == "!" && body->args.size() == 1) {
            neg = true;
            body = body->args[0];
        }
        auto a = atomFromComparison(body, neg, pool);
        if (!a) return std::nullopt;
        out.push_back(showAtom(*a));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Equality ladder: syntactic, then polynomial atom multisets, then the
// solver.  Multiset disagreement proves nothing, so it falls through.
inline void matchFormulas(SolverFacade& solver, const Term& a, const Term& b, Obligation& o) {
    if (termEq(a, b)) {
        o.verdict = Validity::Valid;
        return;
    }
    OpaquePool pool;
    auto as = atomStrings(a, pool);
    auto bs = atomStrings(b, pool);
    if (as && bs && *as == *bs) {
        o.verdict = Validity::Valid;
        o.detail = "matched as polynomial atoms";
        return;
    }
    ValidityResult r = solver.checkEquiv(a, b);
    o.verdict = r.verdict;
    o.usedSolver = true;
    if (r.verdict == Validity::Valid)
        o.detail = "matched only up to solver equivalence: " + showTerm(a) + " vs " + showTerm(b);
    else if (r.counterexample)
        o.detail = "differ at " + showModel(*r.counterexample);
    else
        o.detail = r.reason.empty() ? "equivalence undecided" : r.reason;
}

inline void checkImplies(SolverFacade& solver, const Term& a, const Term& b, Obligation& o) {
    ValidityResult r = solver.checkValid(mkOp("=>", {a, b}));
    o.verdict = r.verdict;
    o.usedSolver = true;
    if (r.verdict == Validity::Invalid && r.counterexample)
        o.detail = "fails at " + showModel(*r.counterexample);
    else if (r.verdict == Validity::Unknown)
        o.detail = r.reason.empty() ? "implication undecided" : r.reason;
}

}  // namespace detail

inline TableauReport checkTableau(const WhileAst& ast, SolverFacade& solver) {
    TableauReport rep;
    if (ast.lines.empty() || ast.lines.size() == 1) {
        rep.shapeErrors.push_back("program has no lines");
        return rep;
    }
    int lastReal = ast.lines[ast.lines.size() - 2].number;

    auto kindAt = [&](int n) -> std::optional<LineKind> {
        const ProgLine* l = ast.find(n);
        return l ? std::optional<LineKind>(l->kind) : std::nullopt;
    };
    auto assertionAt = [&](int n, const std::string& role) -> Term {
        const ProgLine* l = ast.find(n);
        if (l && l->kind == LineKind::Assert) return l->formula;
        rep.shapeErrors.push_back("line " + std::to_string(n) + ": expected " + role);
        return nullptr;
    };

    if (kindAt(1) != LineKind::Assert)
        rep.shapeErrors.push_back("line 1: a tableau begins with an assertion");
    if (kindAt(lastReal) != LineKind::Assert)
        rep.shapeErrors.push_back("line " + std::to_string(lastReal) +
                                  ": a tableau ends with an assertion");

    // consecutive assertions are consequence steps
    for (auto& l : ast.lines) {
        if (l.kind != LineKind::Assert) continue;
        const ProgLine* next = ast.find(l.number + 1);
        if (!next || next->kind != LineKind::Assert) continue;
        Obligation o{"implication", l.number, next->number};
        detail::checkImplies(solver, l.formula, next->formula, o);
        rep.obligations.push_back(std::move(o));
    }

    for (auto& l : ast.lines) {
        switch (l.kind) {
            case LineKind::Assign: {
                Term pre = assertionAt(l.number - 1, "an assertion above the assignment");
                Term post = assertionAt(l.number + 1, "an assertion below the assignment");
                if (!pre || !post) break;
                Obligation o{"assignment", l.number};
                Subst s;
                s.bind(l.var, l.expr);
                detail::matchFormulas(solver, pre, applySubst(post, s), o);
                rep.obligations.push_back(std::move(o));
                break;
            }
            case LineKind::Skip: {
                Term pre = assertionAt(l.number - 1, "an assertion above skip");
                Term post = assertionAt(l.number + 1, "an assertion below skip");
                if (!pre || !post) break;
                Obligation o{"skip", l.number};
                detail::matchFormulas(solver, pre, post, o);
                rep.obligations.push_back(std::move(o));
                break;
            }
            case LineKind::WhileOpen: {
                Term pre = assertionAt(l.number - 1, "an assertion above the loop");
                Term head = assertionAt(l.number + 1, "an assertion at the loop body head");
                Term tail = assertionAt(l.closeLine - 1, "an assertion at the loop body end");
                Term exit = assertionAt(l.closeLine + 1, "an assertion after the loop");
                Term inv = l.invariant ? l.invariant : pre;
                if (!inv) break;

                if (pre) {
                    Obligation o{"loop-entry", l.number, l.number - 1};
                    if (l.invariant && !termEq(pre, l.invariant)) {
                        detail::matchFormulas(solver, pre, inv, o);
                        if (o.verdict == Validity::Valid && head) {
                            Obligation h = o;
                            detail::matchFormulas(solver, head, mkOp("&&", {inv, l.guard}), h);
                            if (h.verdict != Validity::Valid) o = h;
                            else o.usedSolver = o.usedSolver || h.usedSolver;
                        }
                    } else if (head) {
                        detail::matchFormulas(solver, head, mkOp("&&", {inv, l.guard}), o);
                        o.otherLine = l.number + 1;
                    }
                    rep.obligations.push_back(std::move(o));
                }
                if (tail) {
                    Obligation o{"loop-body", l.closeLine - 1, l.number};
                    detail::matchFormulas(solver, tail, inv, o);
                    rep.obligations.push_back(std::move(o));
                }
                if (exit) {
                    Obligation o{"loop-exit", l.closeLine + 1, l.number};
                    detail::matchFormulas(solver, exit, mkOp("&&", {inv, mkOp("!", {l.guard})}), o);
                    rep.obligations.push_back(std::move(o));
                }
                break;
            }
            case LineKind::IfOpen: {
                Term pre = assertionAt(l.number - 1, "an assertion above the branch");
                Term thenHead = assertionAt(l.number + 1, "an assertion at the then-branch head");
                Term elseHead = assertionAt(l.elseLine + 1, "an assertion at the else-branch head");
                Term thenTail = assertionAt(l.elseLine - 1, "an assertion at the then-branch end");
                Term elseTail = assertionAt(l.closeLine - 1, "an assertion at the else-branch end");
                Term post = assertionAt(l.closeLine + 1, "an assertion after the branch");

                if (pre && thenHead && elseHead) {
                    Obligation o{"branch-entry", l.number};
                    detail::matchFormulas(solver, thenHead, mkOp("&&", {pre, l.guard}), o);
                    if (o.verdict == Validity::Valid) {
                        Obligation e = o;
                        e.otherLine = l.elseLine;
                        detail::matchFormulas(solver, elseHead,
                                              mkOp("&&", {pre, mkOp("!", {l.guard})}), e);
                        if (e.verdict != Validity::Valid) o = e;
                        else o.usedSolver = o.usedSolver || e.usedSolver;
                    }
                    rep.obligations.push_back(std::move(o));
                }
                if (thenTail && elseTail && post) {
                    Obligation o{"branch-join", l.closeLine, l.closeLine + 1};
                    detail::matchFormulas(solver, thenTail, post, o);
                    if (o.verdict == Validity::Valid) {
                        Obligation e = o;
                        detail::matchFormulas(solver, elseTail, post, e);
                        if (e.verdict != Validity::Valid) o = e;
                        else o.usedSolver = o.usedSolver || e.usedSolver;
                    }
                    rep.obligations.push_back(std::move(o));
                }
                break;
            }
            case LineKind::ElseOpen:
                if (kindAt(l.number - 1) != LineKind::Assert)
                    rep.shapeErrors.push_back("line " + std::to_string(l.number - 1) +
                                              ": expected an assertion before the else part");
                break;
            case LineKind::Close:
                if (kindAt(l.number - 1) != LineKind::Assert)
                    rep.shapeErrors.push_back("line " + std::to_string(l.number - 1) +
                                              ": expected an assertion at the block end");
                break;
            case LineKind::Assert:
            case LineKind::Blank:
                break;
        }
    }

    // dedupe shape errors produced from both sides of a boundary
    std::sort(rep.shapeErrors.begin(), rep.shapeErrors.end());
    rep.shapeErrors.erase(std::unique(rep.shapeErrors.begin(), rep.shapeErrors.end()),
                          rep.shapeErrors.end());
    return rep;
}

inline HoareTriple hoareTriple(const WhileAst& ast) {
    if (ast.lines.empty() || ast.lines[0].kind != LineKind::Assert)
        throw TableauError("a tableau begins with an assertion");
    const ProgLine* last = nullptr;
    for (auto& l : ast.lines)
        if (l.kind == LineKind::Assert) last = &l;
    return HoareTriple{ast.lines[0].formula, stripAnnotations(ast), last->formula};
}

inline nlohmann::json tableauReportJson(const TableauReport& rep) {
    nlohmann::json j;
    j["valid"] = rep.valid();
    j["shapeErrors"] = rep.shapeErrors;
    j["obligations"] = nlohmann::json::array();
    for (auto& o : rep.obligations) {
        nlohmann::json e;
        e["kind"] = o.kind;
        e["line"] = o.line;
        if (o.otherLine) e["otherLine"] = o.otherLine;
        e["verdict"] = o.verdict == Validity::Valid     ? "valid"
                       : o.verdict == Validity::Invalid ? "invalid"
                                                        : "unknown";
        e["usedSolver"] = o.usedSolver;
        if (!o.detail.empty()) e["detail"] = o.detail;
        j["obligations"].push_back(std::move(e));
    }
    return j;
}

}  // namespace hoare2ri
