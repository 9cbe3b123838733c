#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "hoare2ri/termination.hpp"

namespace hoare2ri {

// ---------------------------------------------------------------------------
// The end-to-end prover: parse, convert, check the tableau, transform it into
// a closed inference sequence (replaying the recorded trace), and certify
// termination. Stages stop at the first failure; the verdict names it.

struct PipelineStage {
    std::string name;
    bool ok = false;
    std::string detail;
    double ms = 0;
};

struct ProveOptions {
    bool narrate = false;
    Term rankOverride;  // replaces every @rank annotation when set
    unsigned seed = RankSearchOptions{}.seed;
};

struct PipelineReport {
    std::vector<PipelineStage> stages;  // parse, convert, tableau, transform, termination
    Verdict verdict = Verdict::Unknown;
    std::string message;
    int steps = 0;
    std::vector<std::string> hypotheses;  // oriented equation labels kept at the end
    std::string rules;                    // converted system, pretty-printed
    nlohmann::json trace;
    nlohmann::json certificates;
    std::vector<std::string> narration;

    bool ran(const std::string& stage) const {
        for (auto& s : stages)
            if (s.name == stage) return s.ok;
        return false;
    }
};

// An integer expression in the assertion grammar, e.g. a --rank argument.
inline Term parseIntExpression(const std::string& text) {
    Term cmp = parseAssertion("(" + text + ") >= 0");
    return cmp->args[0];
}

inline PipelineReport runProve(const std::string& source, SolverFacade& solver,
                               const ProveOptions& opts = {}) {
    PipelineReport rep;
    using Clock = std::chrono::steady_clock;
    Clock::time_point t0;
    auto begin = [&] { t0 = Clock::now(); };
    auto stage = [&](const std::string& name, bool ok, const std::string& detail) {
        rep.stages.push_back(
            {name, ok, detail, std::chrono::duration<double, std::milli>(Clock::now() - t0).count()});
        return ok;
    };

    begin();
    WhileAst ast;
    try {
        ast = parseProgram(source);
    } catch (const ParseError& e) {
        stage("parse", false, e.what());
        rep.message = std::string("parse error: ") + e.what();
        return rep;
    }
    size_t asserts = 0;
    for (auto& l : ast.lines) asserts += l.kind == LineKind::Assert;
    stage("parse", true,
          std::to_string(ast.lines.size()) + " lines, " + std::to_string(asserts) + " assertions");

    begin();
    Conversion conv;
    HoareTriple triple;
    try {
        conv = convert(ast);
        rep.rules = showLctrs(conv.sys);
        triple = hoareTriple(ast);
        addCheckRules(conv, triple.post);
    } catch (const TableauError& e) {
        stage("convert", false, e.what());
        rep.verdict = Verdict::TableauInvalid;
        rep.message = std::string("not a proof tableau: ") + e.what();
        return rep;
    }
    stage("convert", true, std::to_string(conv.sys.rules.size()) + " rules");

    begin();
    TableauReport tab = checkTableau(ast, solver);
    if (!tab.valid()) {
        std::string why;
        for (auto& e : tab.shapeErrors)
            if (why.empty()) why = e;
        for (auto& o : tab.obligations)
            if (why.empty() && o.verdict != Validity::Valid)
                why = "line " + std::to_string(o.line) + ": " + o.kind +
                      (o.detail.empty() ? "" : " (" + o.detail + ")");
        stage("tableau", false, why);
        rep.verdict = Verdict::TableauInvalid;
        rep.message = "the tableau does not hold: " + why;
        return rep;
    }
    stage("tableau", true, std::to_string(tab.obligations.size()) + " obligations hold");

    begin();
    TransformResult tr = transformTableau(conv, ast, solver, opts.narrate);
    rep.narration = tr.narration;
    if (!tr.ok) {
        stage("transform", false, tr.message);
        rep.message = tr.message;
        return rep;
    }
    rep.trace = traceJson(tr.process);
    rep.steps = int(tr.process.steps.size());
    for (auto& h : tr.process.hyps) rep.hypotheses.push_back(h.label);
    ReplayResult rr =
        replayTrace(conv.sys, solver, {Equation{goalEquation(conv, triple.pre), "A1"}}, rep.trace);
    if (!rr.ok) {
        stage("transform", false, "trace does not replay: " + rr.message);
        rep.message = "trace does not replay: " + rr.message;
        return rep;
    }
    stage("transform", true,
          "closed in " + std::to_string(rep.steps) + " steps; the trace replays");

    begin();
    TerminationReport term = certifyTermination(conv, ast, solver, opts.rankOverride, opts.seed);
    LiftResult lift = liftTermination(term, conv.sys, tr.process.hyps);
    rep.certificates = certificateJson(term);
    if (!lift.terminating) {
        stage("termination", false, lift.justification);
        rep.message = lift.justification;
        return rep;
    }
    stage("termination", true, lift.justification);

    rep.verdict = Verdict::Proved;
    rep.message = "total correctness established: the tableau holds, the inference sequence closed in " +
                  std::to_string(rep.steps) + " steps and replays, and every loop is certified";
    return rep;
}

inline nlohmann::json pipelineJson(const PipelineReport& rep) {
    nlohmann::json stages = nlohmann::json::array();
    for (auto& s : rep.stages)
        stages.push_back({{"name", s.name}, {"ok", s.ok}, {"detail", s.detail}, {"ms", s.ms}});
    nlohmann::json j{{"stages", stages},
                     {"verdict", verdictName(rep.verdict)},
                     {"message", rep.message},
                     {"steps", rep.steps},
                     {"hypotheses", rep.hypotheses},
                     {"certificates", rep.certificates}};
    if (!rep.trace.is_null()) j["trace"] = rep.trace;
    if (!rep.narration.empty()) j["narration"] = rep.narration;
    return j;
}

}  // namespace hoare2ri
