#pragma once

// Turns a checked proof tableau into a rewriting-induction run on the
// converted system. Each assertion owns one equation, labeled A1, A2, ... in
// tableau order; equations with no assertion of their own (loop back edges,
// the final check) are labeled B1, B2, .... The walk mirrors the tableau:
// adjacent assertions become Generalization, a command becomes Simplification
// with that command's rule, a loop becomes Expansion with the entry equation
// as induction hypothesis, and a conditional becomes CaseSplitting whose
// branches merge again at the join.

#include <map>
#include <string>
#include <vector>

#include "hoare2ri/convert.hpp"
#include "hoare2ri/ri.hpp"
#include "hoare2ri/tableau.hpp"

namespace hoare2ri {

struct TransformResult {
    bool ok = false;
    std::string message;
    RIProcess process;
    std::vector<std::string> narration;
};

// The converted system plus the check rules for the tableau's postcondition;
// the result must outlive any process built on it.
inline Conversion conversionFor(const WhileAst& ast) {
    Conversion conv = convert(ast);
    addCheckRules(conv, hoareTriple(ast).post);
    return conv;
}

namespace detail {

struct TableauWalk {
    RIProcess& p;
    const Conversion& conv;
    const WhileAst& ast;
    bool narrate = false;
    std::map<int, int> ord;  // assertion line -> ordinal
    int bCount = 0;
    std::vector<std::string> narration;
    std::string err;

    TableauWalk(RIProcess& proc, const Conversion& c, const WhileAst& a, bool n)
        : p(proc), conv(c), ast(a), narrate(n) {
        for (auto& l : ast.lines)
            if (l.kind == LineKind::Assert) ord[l.number] = int(ord.size()) + 1;
    }

    void tell(const std::string& line) {
        if (narrate) narration.push_back(line);
    }
    void fail(int line, const std::string& what, const std::string& why) {
        if (err.empty()) err = "line " + std::to_string(line) + ", " + what + ": " + why;
    }

    std::string aLabel(int line) const { return "A" + std::to_string(ord.at(line)); }
    std::string bLabel() { return "B" + std::to_string(++bCount); }
    const Term& formula(int line) const { return ast.find(line)->formula; }

    std::string constraintOf(const std::string& label) const {
        const Equation* e = p.find(label);
        return e ? showTerm(e->ct.constraint) : "?";
    }

    // The equation the tableau associates with an assertion: the state the
    // given rule moves to, canonical variables, the asserted formula.
    CTerms assertedForm(const std::string& ruleId, int assertLine) const {
        const ConstrainedRule* r = nullptr;
        for (auto& rr : conv.sys.rules)
            if (rr.label == ruleId) r = &rr;
        if (!r) throw TableauError("the conversion has no rule labeled " + ruleId);
        std::vector<Term> xs;
        for (auto& v : conv.map.vars) xs.push_back(mkVar(v, sortInt));
        Term st = mkApp(*conv.sys.findSymbol(r->rhs->name), xs);
        return {{mkApp(*conv.sys.findSymbol("chk"), {st}), mkBoolVal(true)}, formula(assertLine)};
    }

    // Restates `label` as the asserted equation when the two differ; the
    // computed form is an instance, so Generalization bridges the gap.
    std::string settle(const std::string& label, int assertLine, const CTerms& asserted) {
        const Equation* e = p.find(label);
        if (!e) return label;  // merged away; the twin already settled
        if (termEq(e->ct.constraint, asserted.constraint) &&
            termEq(e->ct.terms[0], asserted.terms[0]))
            return label;
        StepResult r = applyGeneralizationTo(p, label, asserted, label);
        if (!r.ok) {
            fail(assertLine, "restating " + label + " as the asserted equation", r.note);
            return "";
        }
        tell("Generalization restates " + r.produced[0] + " in the tableau's terms.");
        return r.produced[0];
    }

    // One command: rewrite with its rule, then settle on the assertion after
    // it. Returns the label standing for that assertion.
    std::string moveAcross(const std::string& cur, int cmdLine, int assertLine) {
        std::string rid = "r" + std::to_string(cmdLine);
        CTerms asserted = assertedForm(rid, assertLine);
        bool fresh = p.indexOf(aLabel(assertLine)) < 0;
        std::string lbl = fresh ? aLabel(assertLine) : bLabel();
        StepResult r = applySimplification(p, cur, rid, lbl, 0, Position{1}, &asserted);
        if (!r.ok) {
            fail(cmdLine, "Simplification of " + cur + " with " + rid, r.note);
            return "";
        }
        tell("Simplification with " + rid + " turns " + cur + " into " + r.produced[0] + ".");
        return settle(r.produced[0], assertLine, asserted);
    }

    std::string walkWhile(const std::string& cur, const ProgLine& w) {
        int head = w.number + 1, tail = w.closeLine - 1, exit = w.closeLine + 1;
        StepResult r =
            applyExpansion(p, cur, 0, Position{1}, {aLabel(head), aLabel(exit)}, cur);
        if (!r.ok) {
            fail(w.number, "Expansion of " + cur, r.note);
            return "";
        }
        tell("Expansion splits " + cur + " into " + r.produced[0] + " (one more iteration) and " +
             r.produced[1] + " (the loop exits); " + cur + " joins the hypotheses.");
        std::string headLbl =
            settle(r.produced[0], head, assertedForm("r" + std::to_string(w.number), head));
        std::string exitLbl =
            settle(r.produced[1], exit, assertedForm("r" + std::to_string(w.number) + "x", exit));
        if (headLbl.empty() || exitLbl.empty()) return "";

        std::string bodyEnd = seg(head, tail, headLbl);
        if (bodyEnd.empty()) return "";

        std::string rid = "r" + std::to_string(w.closeLine);
        StepResult back = applySimplification(p, bodyEnd, rid, bLabel(), 0, Position{1});
        if (!back.ok) {
            fail(w.closeLine, "Simplification of " + bodyEnd + " with " + rid, back.note);
            return "";
        }
        tell("Simplification with " + rid + " carries " + bodyEnd + " back to the loop head as " +
             back.produced[0] + ".");
        StepResult hyp = applySimplification(p, back.produced[0], cur, bLabel(), 0, Position{});
        if (!hyp.ok) {
            fail(w.closeLine, "Simplification of " + back.produced[0] + " with hypothesis " + cur,
                 hyp.note);
            return "";
        }
        tell("The hypothesis " + cur + " rewrites " + back.produced[0] + " to " + hyp.produced[0] +
             "; induction closes the iteration.");
        StepResult del = applyDeletion(p, hyp.produced[0]);
        if (!del.ok) {
            fail(w.closeLine, "Deletion of " + hyp.produced[0], del.note);
            return "";
        }
        tell("Deletion removes " + hyp.produced[0] + " (" + del.note + ").");
        return exitLbl;
    }

    std::string walkIf(const std::string& cur, const ProgLine& f) {
        int thenHead = f.number + 1, thenTail = f.elseLine - 1;
        int elseHead = f.elseLine + 1, elseTail = f.closeLine - 1;
        int join = f.closeLine + 1;
        StepResult r =
            applyCaseSplitting(p, cur, 0, Position{1}, {aLabel(thenHead), aLabel(elseHead)});
        if (!r.ok) {
            fail(f.number, "CaseSplitting of " + cur, r.note);
            return "";
        }
        tell("Case splitting turns " + cur + " into " + r.produced[0] + " (guard holds) and " +
             r.produced[1] + " (guard fails).");
        std::string thenLbl = settle(
            r.produced[0], thenHead, assertedForm("r" + std::to_string(f.number), thenHead));
        std::string elseLbl = settle(
            r.produced[1], elseHead, assertedForm("r" + std::to_string(f.number) + "x", elseHead));
        if (thenLbl.empty() || elseLbl.empty()) return "";

        std::string thenEnd = seg(thenHead, thenTail, thenLbl);
        if (thenEnd.empty()) return "";
        std::string joined = moveAcross(thenEnd, f.elseLine, join);
        if (joined.empty()) return "";

        std::string elseEnd = seg(elseHead, elseTail, elseLbl);
        if (elseEnd.empty()) return "";
        std::string joined2 = moveAcross(elseEnd, f.closeLine, join);
        if (joined2.empty()) return "";
        if (joined2 != joined) {
            fail(join, "joining the branches",
                 "the branches settled on distinct equations " + joined + " and " + joined2);
            return "";
        }
        tell("Both branches now stand for " + joined + "; the conditional is joined.");
        return joined;
    }

    // Walks from the assertion at `from` to the one at `to`; `cur` stands for
    // `from` on entry, the returned label stands for `to`.
    std::string seg(int from, int to, std::string cur) {
        int i = from;
        while (i != to && err.empty()) {
            const ProgLine* l = ast.find(i + 1);
            if (!l) {
                fail(i + 1, "walking the tableau", "no such line");
                return "";
            }
            switch (l->kind) {
                case LineKind::Assert: {
                    StepResult r = applyGeneralization(p, cur, l->formula, aLabel(l->number));
                    if (!r.ok) {
                        fail(l->number, "Generalization of " + cur, r.note);
                        return "";
                    }
                    tell("Generalization weakens " + cur + " to " + r.produced[0] + " [" +
                         constraintOf(r.produced[0]) + "].");
                    cur = r.produced[0];
                    i = l->number;
                    break;
                }
                case LineKind::Assign:
                case LineKind::Skip:
                    cur = moveAcross(cur, l->number, l->number + 1);
                    i = l->number + 1;
                    break;
                case LineKind::WhileOpen:
                    cur = walkWhile(cur, *l);
                    i = l->closeLine + 1;
                    break;
                case LineKind::IfOpen:
                    cur = walkIf(cur, *l);
                    i = l->closeLine + 1;
                    break;
                default:
                    fail(l->number, "walking the tableau", "unexpected line kind");
                    return "";
            }
            if (cur.empty()) return "";
        }
        return cur;
    }
};

}  // namespace detail

// Runs the whole transformation. The conversion must have been built with
// conversionFor on the same tableau.
inline TransformResult transformTableau(const Conversion& conv, const WhileAst& ast,
                                        SolverFacade& solver, bool narrate = false) {
    TransformResult out;
    HoareTriple tr;
    try {
        tr = hoareTriple(ast);
    } catch (const TableauError& e) {
        out.message = e.what();
        return out;
    }
    TableauReport rep = checkTableau(ast, solver);
    if (!rep.valid()) {
        std::string why;
        for (auto& s : rep.shapeErrors)
            if (why.empty()) why = s;
        for (auto& o : rep.obligations)
            if (why.empty() && o.verdict != Validity::Valid)
                why = "line " + std::to_string(o.line) + ": " + o.kind +
                      (o.detail.empty() ? "" : " (" + o.detail + ")");
        out.message = "the tableau does not hold: " + why;
        return out;
    }

    out.process = startProcess(conv.sys, solver, {Equation{goalEquation(conv, tr.pre), "A1"}});
    detail::TableauWalk w(out.process, conv, ast, narrate);
    w.tell("A1 pairs the initial state with the precondition [" + showTerm(tr.pre) + "].");

    int first = ast.lines.front().number;
    int last = 0;
    for (auto& l : ast.lines)
        if (l.kind == LineKind::Assert) last = l.number;

    try {
        std::string fin = w.seg(first, last, "A1");
        if (!fin.empty() && w.err.empty()) {
            StepResult chk =
                applySimplification(out.process, fin, "check_t", w.bLabel(), 0, Position{});
            if (!chk.ok) {
                w.fail(last, "Simplification of " + fin + " with check_t", chk.note);
            } else {
                w.tell("Simplification with check_t reduces " + fin + " to " + chk.produced[0] +
                       ": the final state passes the postcondition check.");
                StepResult del = applyDeletion(out.process, chk.produced[0]);
                if (!del.ok)
                    w.fail(last, "Deletion of " + chk.produced[0], del.note);
                else
                    w.tell("Deletion removes " + chk.produced[0] + " (" + del.note + ").");
            }
        }
    } catch (const std::exception& e) {
        w.fail(last, "walking the tableau", e.what());
    }

    out.narration = std::move(w.narration);
    if (!w.err.empty()) {
        out.message = "transformation stuck at " + w.err;
        return out;
    }
    if (!out.process.done()) {
        out.message = "equations remain open after the walk";
        return out;
    }
    out.ok = true;
    out.message = "closed in " + std::to_string(out.process.steps.size()) + " steps";
    return out;
}

}  // namespace hoare2ri
