#pragma once

// Rewriting induction over constrained equations. A process carries goal
// equations E and accumulated hypotheses H; inference steps transform (E, H)
// until E is empty. Applied steps are recorded and can be replayed against
// the same system to validate a stored trace.
//
// Equation identity throughout the engine is ctPolyKey: equal keys certify
// equivalence up to renaming, conjunct order, and ring identities, so an
// equation may stand in for any key-equal form without affecting replay.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoare2ri/lctrs.hpp"

namespace hoare2ri {

struct Equation {
    CTerms ct;
    std::string label;
};

inline std::string showEquation(const Equation& e) { return e.label + ": " + showCTerms(e.ct); }

inline std::string ctPolyDigest(const CTerms& ct) { return hex64(fnv1a64(ctPolyKey(ct))); }

struct InferenceStep {
    std::string rule;  // Simplification, Expansion, Deletion, Generalization, CaseSplitting
    std::string target;
    std::string ruleId;  // Simplification only
    int side = 0;
    std::string position = "ε";
    std::vector<std::string> produced;      // labels standing for the target afterwards
    std::vector<std::string> producedKeys;  // ctPolyDigest of each produced equation
    std::string hypothesis;                 // Expansion: label added to H
    std::string generalizedTo;              // Generalization: the replacement constraint
    std::vector<Term> generalTerms;         // Generalization: the replacement terms
    Term generalConstraint;
    std::string note;
};

struct StepResult {
    bool ok = false;
    std::string note;
    std::vector<std::string> produced;
};

struct RIProcess {
    const Lctrs* sys = nullptr;
    SolverFacade* solver = nullptr;
    std::vector<Equation> goals;
    std::vector<Equation> eqs;
    std::vector<ConstrainedRule> hyps;
    std::vector<InferenceStep> steps;
    FreshGen fresh;

    bool done() const { return eqs.empty(); }

    int indexOf(const std::string& label) const {
        for (size_t i = 0; i < eqs.size(); ++i)
            if (eqs[i].label == label) return int(i);
        return -1;
    }
    const Equation* find(const std::string& label) const {
        int i = indexOf(label);
        return i < 0 ? nullptr : &eqs[size_t(i)];
    }
};

inline RIProcess startProcess(const Lctrs& sys, SolverFacade& solver,
                              std::vector<Equation> goalEqs) {
    RIProcess p;
    p.sys = &sys;
    p.solver = &solver;
    for (auto& g : goalEqs) {
        if (p.indexOf(g.label) >= 0)
            throw TermError("duplicate equation label '" + g.label + "'");
        p.eqs.push_back(g);
    }
    p.goals = p.eqs;
    return p;
}

namespace detail {

inline const ConstrainedRule* findRuleByLabel(const RIProcess& p, const std::string& id) {
    for (auto& r : p.sys->rules)
        if (r.label == id) return &r;
    for (auto& r : p.hyps)
        if (r.label == id) return &r;
    return nullptr;
}

inline std::optional<std::pair<size_t, Position>> findRedex(const RIProcess& p, const CTerms& ct,
                                                            const ConstrainedRule& rule,
                                                            std::optional<int> side,
                                                            const std::optional<Position>& pos) {
    std::vector<size_t> sides;
    if (side && *side >= 0 && size_t(*side) < ct.terms.size()) sides.push_back(size_t(*side));
    if (!side)
        for (size_t i = 0; i < ct.terms.size(); ++i) sides.push_back(i);
    for (size_t ti : sides) {
        if (pos) {
            if (applyRuleAt(*p.sys, ct, ti, *pos, rule, *p.solver)) return {{ti, *pos}};
            continue;
        }
        for (auto& q : positionsOf(ct.terms[ti]))
            if (applyRuleAt(*p.sys, ct, ti, q, rule, *p.solver)) return {{ti, q}};
    }
    return std::nullopt;
}

// Replaces eqs[at] by `out`, unless a key-equal equation already stands
// elsewhere in E; then the target is simply dropped and that equation is the
// step's produce.
inline StepResult replaceEquation(RIProcess& p, size_t at, Equation out, InferenceStep st) {
    std::string key = ctPolyKey(out.ct);
    for (size_t i = 0; i < p.eqs.size(); ++i) {
        if (i == at) continue;
        if (ctPolyKey(p.eqs[i].ct) != key) continue;
        st.note += (st.note.empty() ? "" : "; ") + ("merged into " + p.eqs[i].label);
        st.produced = {p.eqs[i].label};
        st.producedKeys = {ctPolyDigest(p.eqs[i].ct)};
        p.eqs.erase(p.eqs.begin() + long(at));
        StepResult r{true, st.note, st.produced};
        p.steps.push_back(std::move(st));
        return r;
    }
    if (p.indexOf(out.label) >= 0 && p.eqs[at].label != out.label)
        return {false, "equation label '" + out.label + "' is already in use", {}};
    st.produced = {out.label};
    st.producedKeys = {ctPolyDigest(out.ct)};
    p.eqs[at] = std::move(out);
    StepResult r{true, st.note, st.produced};
    p.steps.push_back(std::move(st));
    return r;
}

// Expd: one child per rule of R whose left side unifies with the chosen
// subterm, the rule renamed apart so goal variable names survive. Children
// keep unsatisfiable constraints; Deletion disposes of them explicitly.
inline std::vector<CTerms> expd(const RIProcess& p, const CTerms& ct, size_t side,
                                const Position& pos) {
    Term sub = subtermAt(ct.terms[side], pos);
    std::vector<CTerms> out;
    int tag = 0;
    for (auto& r0 : p.sys->rules) {
        ++tag;
        if (r0.lhs->name != sub->name) continue;
        ConstrainedRule r = renameApart(r0, tag);
        auto mgu = unify(sub, r.lhs);
        if (!mgu) continue;
        CTerms child;
        child.terms = ct.terms;
        child.terms[side] = replaceAt(child.terms[side], pos, r.rhs);
        for (auto& t : child.terms) t = applySubst(t, *mgu);
        std::vector<Term> cs;
        for (auto& c : flattenConj(applySubst(ct.constraint, *mgu)))
            if (!isTrueTerm(c)) cs.push_back(c);
        for (auto& c : flattenConj(applySubst(r.constraint, *mgu)))
            if (!isTrueTerm(c)) cs.push_back(c);
        child.constraint = conjOf(cs);
        out.push_back(std::move(child));
    }
    return out;
}

inline StepResult expandImpl(RIProcess& p, const std::string& target, int side,
                             const Position& pos, std::vector<std::string> childLabels,
                             bool addHypothesis, std::string hypLabel) {
    int ei = p.indexOf(target);
    if (ei < 0) return {false, "no equation labeled '" + target + "'", {}};
    Equation eq = p.eqs[size_t(ei)];
    if (eq.ct.terms.size() != 2) return {false, "expansion needs a two-sided equation", {}};
    if (side < 0 || side > 1) return {false, "side must be 0 or 1", {}};
    Term u = eq.ct.terms[size_t(side)];

    auto basics = basicPositions(u, p.sys->definedSymbols());
    if (std::find(basics.begin(), basics.end(), pos) == basics.end())
        return {false, "position " + showPosition(pos) + " is not basic in " + showTerm(u), {}};

    ConstrainedRule hyp;
    if (addHypothesis) {
        Term other = eq.ct.terms[size_t(1 - side)];
        if (u->isVar || u->kind != SymKind::TermSym)
            return {false, "the hypothesis left side must be rooted in a defined symbol", {}};
        std::set<std::string> scope;
        for (auto& v : varsOf(u)) scope.insert(v->name);
        for (auto& v : varsOf(eq.ct.constraint)) scope.insert(v->name);
        for (auto& v : varsOf(other))
            if (!scope.count(v->name))
                return {false, "cannot orient: '" + v->name + "' occurs on the right only", {}};
        hyp = ConstrainedRule{u, other, eq.ct.constraint,
                              hypLabel.empty() ? eq.label : std::move(hypLabel)};
        for (auto& r : p.sys->rules)
            if (r.label == hyp.label)
                return {false, "hypothesis label '" + hyp.label + "' collides with a rule", {}};
        for (auto& r : p.hyps)
            if (r.label == hyp.label)
                return {false, "hypothesis label '" + hyp.label + "' is already in use", {}};
    }

    auto children = expd(p, eq.ct, size_t(side), pos);
    if (childLabels.empty())
        for (size_t i = 0; i < children.size(); ++i)
            childLabels.push_back(eq.label + "." + std::to_string(i + 1));
    if (childLabels.size() != children.size())
        return {false, "expected " + std::to_string(children.size()) + " child labels", {}};

    InferenceStep st;
    st.rule = addHypothesis ? "Expansion" : "CaseSplitting";
    st.target = target;
    st.side = side;
    st.position = showPosition(pos);

    // settle every child before touching E, so a bad label leaves E intact
    std::vector<Equation> added;
    for (size_t i = 0; i < children.size(); ++i) {
        CTerms norm = normalizeCT(*p.sys, children[i], p.fresh);
        std::string key = ctPolyKey(norm);
        const Equation* twin = nullptr;
        for (auto& ex : p.eqs)
            if (ex.label != target && ctPolyKey(ex.ct) == key) { twin = &ex; break; }
        for (auto& ex : added)
            if (!twin && ctPolyKey(ex.ct) == key) { twin = &ex; break; }
        if (twin) {
            st.produced.push_back(twin->label);
            st.producedKeys.push_back(ctPolyDigest(twin->ct));
            st.note += (st.note.empty() ? "" : "; ") + ("child merged into " + twin->label);
            continue;
        }
        int used = p.indexOf(childLabels[i]);
        bool taken = used >= 0 && p.eqs[size_t(used)].label != target;
        for (auto& ex : added)
            if (ex.label == childLabels[i]) taken = true;
        if (taken)
            return {false, "equation label '" + childLabels[i] + "' is already in use", {}};
        st.produced.push_back(childLabels[i]);
        st.producedKeys.push_back(ctPolyDigest(norm));
        added.push_back(Equation{std::move(norm), childLabels[i]});
    }

    p.eqs.erase(p.eqs.begin() + ei);
    size_t at = size_t(ei);
    for (auto& ch : added) p.eqs.insert(p.eqs.begin() + long(at++), std::move(ch));

    if (addHypothesis) {
        st.hypothesis = hyp.label;
        st.note += (st.note.empty() ? "" : "; ") + ("hypothesis " + showRule(hyp));
        p.hyps.push_back(std::move(hyp));
    }
    StepResult r{true, st.note, st.produced};
    p.steps.push_back(std::move(st));
    return r;
}

}  // namespace detail

// Rewrites one side of the target with a rule of R or a hypothesis of H and
// normalizes the result. When `snapTo` is key-equal to the result, the
// equation is presented in that form instead; since engine identity is the
// key, the swap is invisible to later steps and to replay.
inline StepResult applySimplification(RIProcess& p, const std::string& target,
                                      const std::string& ruleId, const std::string& newLabel,
                                      std::optional<int> side = std::nullopt,
                                      std::optional<Position> pos = std::nullopt,
                                      const CTerms* snapTo = nullptr) {
    int ei = p.indexOf(target);
    if (ei < 0) return {false, "no equation labeled '" + target + "'", {}};
    const ConstrainedRule* rule = detail::findRuleByLabel(p, ruleId);
    if (!rule) return {false, "no rule or hypothesis labeled '" + ruleId + "'", {}};
    const CTerms& ct = p.eqs[size_t(ei)].ct;
    auto redex = detail::findRedex(p, ct, *rule, side, pos);
    if (!redex) return {false, "'" + ruleId + "' does not rewrite " + target, {}};

    CTerms rewritten = *applyRuleAt(*p.sys, ct, redex->first, redex->second, *rule, *p.solver);
    CTerms norm = normalizeCT(*p.sys, rewritten, p.fresh);

    InferenceStep st;
    st.rule = "Simplification";
    st.target = target;
    st.ruleId = ruleId;
    st.side = int(redex->first);
    st.position = showPosition(redex->second);
    if (snapTo) {
        if (ctPolyKey(norm) == ctPolyKey(*snapTo)) {
            norm = *snapTo;
            st.note = "presented in tableau form";
        } else {
            st.note = "tableau form not confirmed equivalent; keeping the computed form";
        }
    }
    return detail::replaceEquation(p, size_t(ei), Equation{std::move(norm), newLabel},
                                   std::move(st));
}

// Removes an equation with identical sides or an unsatisfiable constraint.
// An undecided constraint blocks the step rather than deleting optimistically.
inline StepResult applyDeletion(RIProcess& p, const std::string& target) {
    int ei = p.indexOf(target);
    if (ei < 0) return {false, "no equation labeled '" + target + "'", {}};
    const CTerms& ct = p.eqs[size_t(ei)].ct;
    std::string why;
    if (ct.terms.size() == 2 && termEq(ct.terms[0], ct.terms[1])) {
        why = "identical sides";
    } else {
        SatResult s = p.solver->checkSat(ct.constraint);
        if (s.verdict == Satness::Unsat)
            why = "unsatisfiable constraint";
        else if (s.verdict == Satness::Unknown)
            return {false,
                    "constraint satisfiability undecided" + (s.reason.empty() ? "" : ": " + s.reason),
                    {}};
        else
            return {false, "sides differ and the constraint is satisfiable", {}};
    }
    InferenceStep st;
    st.rule = "Deletion";
    st.target = target;
    st.note = why;
    p.eqs.erase(p.eqs.begin() + ei);
    p.steps.push_back(std::move(st));
    return {true, why, {}};
}

// Replaces the target by a more general equation, kept verbatim: the general
// terms must match onto the target's and the constraint must imply the
// instantiated general constraint, so every instance of the target is an
// instance of the replacement and proving it proves the original.
inline StepResult applyGeneralizationTo(RIProcess& p, const std::string& target,
                                        const CTerms& general, const std::string& newLabel) {
    int ei = p.indexOf(target);
    if (ei < 0) return {false, "no equation labeled '" + target + "'", {}};
    const CTerms& ct = p.eqs[size_t(ei)].ct;
    if (general.terms.size() != ct.terms.size())
        return {false, "the general form must keep the equation's arity", {}};
    std::set<std::string> scope;
    for (auto& t : general.terms)
        for (auto& v : varsOf(t)) scope.insert(v->name);
    for (auto& v : varsOf(general.constraint))
        if (!scope.count(v->name))
            return {false, "constraint variable '" + v->name + "' is not in the general terms", {}};
    Subst sigma;
    for (size_t i = 0; i < ct.terms.size(); ++i)
        if (!matchInto(general.terms[i], ct.terms[i], sigma))
            return {false, "the general terms do not match the equation", {}};
    ValidityResult v = p.solver->checkValid(
        mkOp("=>", {ct.constraint, applySubst(general.constraint, sigma)}));
    if (v.verdict != Validity::Valid)
        return {false,
                v.verdict == Validity::Invalid
                    ? "the constraint does not imply the proposed generalization"
                    : "generalization implication undecided" +
                          (v.reason.empty() ? std::string() : ": " + v.reason),
                {}};
    InferenceStep st;
    st.rule = "Generalization";
    st.target = target;
    st.generalizedTo = showTerm(general.constraint);
    st.generalTerms = general.terms;
    st.generalConstraint = general.constraint;
    return detail::replaceEquation(p, size_t(ei), Equation{general, newLabel}, std::move(st));
}

// Generalization that keeps the term pair and only weakens the constraint.
inline StepResult applyGeneralization(RIProcess& p, const std::string& target, const Term& psi,
                                      const std::string& newLabel) {
    int ei = p.indexOf(target);
    if (ei < 0) return {false, "no equation labeled '" + target + "'", {}};
    return applyGeneralizationTo(p, target, CTerms{p.eqs[size_t(ei)].ct.terms, psi}, newLabel);
}

// Case analysis at a basic position: the target is replaced by one child per
// applicable rule, and the oriented target joins H as induction hypothesis.
inline StepResult applyExpansion(RIProcess& p, const std::string& target, int side,
                                 const Position& pos, std::vector<std::string> childLabels = {},
                                 std::string hypLabel = "") {
    return detail::expandImpl(p, target, side, pos, std::move(childLabels), true,
                              std::move(hypLabel));
}

// Expansion without the induction hypothesis.
inline StepResult applyCaseSplitting(RIProcess& p, const std::string& target, int side,
                                     const Position& pos,
                                     std::vector<std::string> childLabels = {}) {
    return detail::expandImpl(p, target, side, pos, std::move(childLabels), false, "");
}

// ---------------------------------------------------------------------------
// Traces

inline Position parsePosition(const std::string& s) {
    Position p;
    if (s == "ε" || s.empty()) return p;
    size_t i = 0;
    while (i < s.size()) {
        size_t j = s.find('.', i);
        if (j == std::string::npos) j = s.size();
        p.push_back(std::stoi(s.substr(i, j - i)));
        i = j + 1;
    }
    return p;
}

inline nlohmann::json termJson(const Term& t) {
    if (t->isVar) return {{"var", t->name}, {"sort", t->sort.name}};
    if (t->kind == SymKind::ValueSym) return {{"val", t->name}, {"sort", t->sort.name}};
    nlohmann::json as = nlohmann::json::array();
    for (auto& a : t->args) as.push_back(termJson(a));
    return {{"app", t->name}, {"args", as}};
}

inline Term termFromJson(const Lctrs& sys, const nlohmann::json& j) {
    if (j.contains("var")) return mkVar(std::string(j.at("var")), Sort{std::string(j.at("sort"))});
    if (j.contains("val")) {
        if (Sort{std::string(j.at("sort"))} == sortBool) return mkBoolVal(j.at("val") == "true");
        return mkIntVal(Int(std::string(j.at("val"))));
    }
    std::vector<Term> args;
    for (auto& a : j.at("args")) args.push_back(termFromJson(sys, a));
    std::string name = j.at("app");
    if (const FunSym* f = sys.findSymbol(name)) return mkApp(*f, std::move(args));
    return mkOp(name, std::move(args));
}

inline nlohmann::json stepJson(const InferenceStep& st) {
    nlohmann::json j;
    j["rule"] = st.rule;
    j["target"] = st.target;
    if (!st.ruleId.empty()) j["ruleId"] = st.ruleId;
    j["side"] = st.side;
    j["position"] = st.position;
    j["produced"] = st.produced;
    j["producedKeys"] = st.producedKeys;
    if (!st.hypothesis.empty()) j["hypothesis"] = st.hypothesis;
    if (!st.generalizedTo.empty()) j["generalizedTo"] = st.generalizedTo;
    if (st.generalConstraint) {
        nlohmann::json terms = nlohmann::json::array();
        for (auto& t : st.generalTerms) terms.push_back(termJson(t));
        j["general"] = {{"terms", terms}, {"constraint", termJson(st.generalConstraint)}};
    }
    if (!st.note.empty()) j["note"] = st.note;
    return j;
}

inline nlohmann::json traceJson(const RIProcess& p) {
    nlohmann::json j;
    j["goals"] = nlohmann::json::array();
    for (auto& g : p.goals) j["goals"].push_back({{"label", g.label}, {"form", showCTerms(g.ct)}});
    j["steps"] = nlohmann::json::array();
    for (auto& st : p.steps) j["steps"].push_back(stepJson(st));
    j["hypotheses"] = nlohmann::json::array();
    for (auto& h : p.hyps) j["hypotheses"].push_back({{"label", h.label}, {"rule", showRule(h)}});
    j["remaining"] = nlohmann::json::array();
    for (auto& e : p.eqs) j["remaining"].push_back(e.label);
    j["closed"] = p.done();
    return j;
}

struct ReplayResult {
    bool ok = false;
    std::string message;
    size_t stepsRun = 0;
};

// Re-executes a recorded trace from the given goals. Every step must apply,
// produce the recorded labels, and reproduce the recorded keys; the final
// state must agree with the trace's claim.
inline ReplayResult replayTrace(const Lctrs& sys, SolverFacade& solver,
                                std::vector<Equation> goalEqs, const nlohmann::json& trace) {
    size_t n = 0;
    try {
        RIProcess p = startProcess(sys, solver, std::move(goalEqs));
        for (auto& js : trace.at("steps")) {
            std::string rule = js.at("rule");
            std::string target = js.at("target");
            std::vector<std::string> produced = js.at("produced");
            StepResult r;
            if (rule == "Simplification") {
                if (produced.empty()) return {false, "trace step has no produce", n};
                r = applySimplification(p, target, js.at("ruleId"), produced[0],
                                        int(js.at("side")), parsePosition(js.at("position")));
            } else if (rule == "Deletion") {
                r = applyDeletion(p, target);
            } else if (rule == "Generalization") {
                if (produced.empty()) return {false, "trace step has no produce", n};
                const nlohmann::json& g = js.at("general");
                CTerms general;
                for (auto& tj : g.at("terms")) general.terms.push_back(termFromJson(sys, tj));
                general.constraint = termFromJson(sys, g.at("constraint"));
                r = applyGeneralizationTo(p, target, general, produced[0]);
            } else if (rule == "Expansion") {
                r = applyExpansion(p, target, int(js.at("side")),
                                   parsePosition(js.at("position")), produced,
                                   std::string(js.at("hypothesis")));
            } else if (rule == "CaseSplitting") {
                r = applyCaseSplitting(p, target, int(js.at("side")),
                                       parsePosition(js.at("position")), produced);
            } else {
                return {false, "step " + std::to_string(n + 1) + ": unknown rule '" + rule + "'",
                        n};
            }
            std::string where = "step " + std::to_string(n + 1) + " (" + rule + " on " + target + ")";
            if (!r.ok) return {false, where + " does not apply: " + r.note, n};
            if (r.produced != produced)
                return {false, where + " produced different equations", n};
            std::vector<std::string> wantKeys = js.at("producedKeys");
            if (p.steps.back().producedKeys != wantKeys)
                return {false, where + " produced a different result", n};
            ++n;
        }
        bool closed = trace.at("closed");
        if (closed && !p.done()) return {false, "trace claims success but equations remain", n};
        if (!closed && p.done()) return {false, "trace claims open equations but none remain", n};
        return {true, "replayed " + std::to_string(n) + " steps", n};
    } catch (const std::exception& ex) {
        return {false, std::string("trace rejected: ") + ex.what(), n};
    }
}

}  // namespace hoare2ri
