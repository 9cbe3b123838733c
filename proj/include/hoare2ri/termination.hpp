#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hoare2ri/transform.hpp"

namespace hoare2ri {

// ---------------------------------------------------------------------------
// Termination certificates for converted systems. The transition rules form a
// state graph whose only backward edges close loops; every infinite rewrite
// must traverse some loop header infinitely often, so a ranking expression
// that is bounded below and strictly decreasing around every header cycle
// rules out divergence. Inner loops appear in outer cycles as a single
// meta-transition: their modified variables are havocked and the exit
// constraint is assumed, which over-approximates any number of inner passes.

// One pass around a loop header. guard is over the header-entry values;
// update maps every program variable to its value after the pass.
struct LoopCycle {
    std::vector<std::string> path;  // rule labels in traversal order
    Term guard;
    Subst update;
};

struct LoopSummary {
    std::string header;
    int line = 0;       // while line
    int closeLine = 0;  // its back-edge source
    std::vector<LoopCycle> cycles;
    std::vector<std::string> modified;  // vars some cycle may change
};

struct RankCertificate {
    std::string header;
    Term rank;   // null when no expression is claimed
    Term rank2;  // second lexicographic component, usually null
    bool verified = false;
    std::string origin;  // "annotated" | "search" | "supplied"
    std::string detail;
    std::vector<std::string> checks;  // one verdict line per cycle
};

namespace termdetail {

struct Edge {
    std::string label;
    int src = 0;
    int dst = 0;
    Term guard;   // may be null
    Subst update;  // total on the program variables
};

// Rules between state terms, keyed by source line. Lines are recovered from
// the conversion map, never parsed out of symbol names.
struct StateGraph {
    std::map<int, std::vector<Edge>> out;
    std::vector<std::string> vars;
    std::map<std::string, int> lineOf;
};

inline StateGraph stateGraph(const Lctrs& sys, const ConversionMap& cmap) {
    StateGraph g;
    g.vars = cmap.vars;
    for (int l : cmap.commandLines) g.lineOf[cmap.stateName(l)] = l;
    g.lineOf[cmap.stateName(cmap.endLine)] = cmap.endLine;
    for (auto& r : sys.rules) {
        if (r.lhs->isVar || r.rhs->isVar) continue;
        auto si = g.lineOf.find(r.lhs->name);
        auto di = g.lineOf.find(r.rhs->name);
        if (si == g.lineOf.end() || di == g.lineOf.end()) continue;
        if (r.rhs->args.size() != cmap.vars.size())
            throw TermError("rule " + r.label + ": not converter-shaped");
        Edge e{r.label, si->second, di->second, r.constraint, {}};
        for (size_t k = 0; k < cmap.vars.size(); ++k) e.update.bind(cmap.vars[k], r.rhs->args[k]);
        g.out[e.src].push_back(e);
    }
    for (auto& [src, es] : g.out)
        std::sort(es.begin(), es.end(), [](const Edge& a, const Edge& b) { return a.label < b.label; });
    return g;
}

inline bool trivialGuard(const Term& t) {
    return !t || (!t->isVar && t->kind == SymKind::ValueSym && t->name == "true");
}

inline Term conjoin(const std::vector<Term>& ts) {
    Term acc;
    for (auto& t : ts) acc = acc ? mkOp("&&", {acc, t}) : t;
    return acc ? acc : mkBoolVal(true);
}

inline Subst composeUpdate(const Subst& sigma, const Subst& upd, const std::vector<std::string>& vars) {
    Subst next;
    for (auto& v : vars) {
        const Term* b = upd.lookup(v);
        next.bind(v, b ? applySubst(*b, sigma) : (sigma.lookup(v) ? *sigma.lookup(v) : mkVar(v, sortInt)));
    }
    return next;
}

struct CycleSearch {
    const StateGraph& g;
    int header;
    int extentHi;
    const std::map<int, const LoopSummary*>& inner;  // already-summarized headers
    std::vector<LoopCycle>& out;
    int havocCount = 0;

    void visit(int line, Subst sigma, std::vector<Term> guards, std::vector<std::string> path,
               std::set<int> onPath) {
        if (line == header && !path.empty()) {
            out.push_back({std::move(path), conjoin(guards), std::move(sigma)});
            return;
        }
        auto hi = inner.find(line);
        if (hi != inner.end() && line != header) {
            for (auto& v : hi->second->modified)
                sigma.bind(v, mkVar("_w" + std::to_string(++havocCount), sortInt));
            const Edge* exit = nullptr;
            auto oi = g.out.find(line);
            if (oi != g.out.end())
                for (auto& e : oi->second)
                    if (e.dst > hi->second->closeLine && !exit) exit = &e;
            if (!exit) return;
            if (!trivialGuard(exit->guard)) guards.push_back(applySubst(exit->guard, sigma));
            path.push_back(exit->label);
            Subst next = composeUpdate(sigma, exit->update, g.vars);
            visit(exit->dst, std::move(next), std::move(guards), std::move(path), std::move(onPath));
            return;
        }
        if (onPath.count(line)) return;
        onPath.insert(line);
        auto oi = g.out.find(line);
        if (oi == g.out.end()) return;
        for (auto& e : oi->second) {
            if (e.dst != header && (e.dst <= header || e.dst > extentHi)) continue;
            auto guards2 = guards;
            if (!trivialGuard(e.guard)) guards2.push_back(applySubst(e.guard, sigma));
            auto path2 = path;
            path2.push_back(e.label);
            visit(e.dst, composeUpdate(sigma, e.update, g.vars), std::move(guards2), std::move(path2), onPath);
        }
    }
};

}  // namespace termdetail

// One summary per while header, innermost loops resolved first. Headers are
// the targets of backward edges; a header's cycles stay within its extent.
inline std::vector<LoopSummary> summarizeLoops(const Lctrs& sys, const ConversionMap& cmap) {
    using namespace termdetail;
    StateGraph g = stateGraph(sys, cmap);
    std::map<int, int> extent;  // header line -> back-edge source line
    for (auto& [src, es] : g.out)
        for (auto& e : es)
            if (e.dst < e.src) extent[e.dst] = std::max(extent[e.dst], e.src);

    std::vector<LoopSummary> done;
    done.reserve(extent.size());  // byLine keeps pointers into done
    std::map<int, const LoopSummary*> byLine;
    std::vector<int> headers;
    for (auto& [h, c] : extent) headers.push_back(h);
    std::sort(headers.rbegin(), headers.rend());  // inner before outer
    for (int h : headers) {
        LoopSummary ls;
        ls.header = cmap.stateName(h);
        ls.line = h;
        ls.closeLine = extent[h];
        CycleSearch cs{g, h, extent[h], byLine, ls.cycles};
        Subst id;
        for (auto& v : g.vars) id.bind(v, mkVar(v, sortInt));
        cs.visit(h, id, {}, {}, {});
        std::set<std::string> mod;
        for (auto& c : ls.cycles)
            for (auto& v : g.vars)
                if (const Term* b = c.update.lookup(v))
                    if (!((*b)->isVar && (*b)->name == v)) mod.insert(v);
        if (ls.cycles.empty()) mod.insert(g.vars.begin(), g.vars.end());
        ls.modified.assign(mod.begin(), mod.end());
        done.push_back(std::move(ls));
        byLine[h] = &done.back();
    }
    std::sort(done.begin(), done.end(), [](const LoopSummary& a, const LoopSummary& b) { return a.line < b.line; });
    return done;
}

inline std::vector<LoopSummary> summarizeLoops(const Conversion& conv) {
    return summarizeLoops(conv.sys, conv.map);
}

namespace termdetail {

inline std::string validityName(Validity v) {
    return v == Validity::Valid ? "Valid" : v == Validity::Invalid ? "Invalid" : "Unknown";
}

inline std::string joinPath(const std::vector<std::string>& p) {
    std::string s;
    for (auto& x : p) s += (s.empty() ? "" : ",") + x;
    return s;
}

}  // namespace termdetail

// Both obligations per cycle: the rank is bounded below wherever the cycle
// can fire, and one pass strictly decreases it. With a second component the
// decrease may instead hold lexicographically.
inline RankCertificate verifyRank(const LoopSummary& ls, const Term& rank, SolverFacade& solver,
                                  const Term& rank2 = nullptr) {
    using namespace termdetail;
    RankCertificate cert;
    cert.header = ls.header;
    cert.rank = rank;
    cert.rank2 = rank2;
    cert.origin = "supplied";
    if (!rank) {
        cert.detail = "no ranking expression";
        return cert;
    }
    if (ls.cycles.empty()) {
        cert.detail = "no cycles enumerated for this header";
        return cert;
    }
    auto ge0 = [](const Term& e) { return mkOp(">=", {e, mkIntVal(0)}); };
    bool ok = true;
    for (auto& c : ls.cycles) {
        Term bound = ge0(rank);
        if (rank2) bound = mkOp("&&", {bound, ge0(rank2)});
        Term after = applySubst(rank, c.update);
        Term dec = mkOp(">", {rank, after});
        if (rank2) {
            Term tie = mkOp("&&", {mkOp("=", {rank, after}), mkOp(">", {rank2, applySubst(rank2, c.update)})});
            dec = mkOp("||", {dec, tie});
        }
        auto bv = solver.checkValid(mkOp("=>", {c.guard, bound}));
        auto dv = solver.checkValid(mkOp("=>", {c.guard, dec}));
        cert.checks.push_back("cycle " + joinPath(c.path) + ": bounded " + validityName(bv.verdict) +
                              ", decreasing " + validityName(dv.verdict));
        if (bv.verdict != Validity::Valid && ok) {
            ok = false;
            cert.detail = "bound not established on cycle " + joinPath(c.path) + " (" +
                          validityName(bv.verdict) + ")";
        }
        if (dv.verdict != Validity::Valid && ok) {
            ok = false;
            cert.detail = "decrease not established on cycle " + joinPath(c.path) + " (" +
                          validityName(dv.verdict) + ")";
        }
    }
    cert.verified = ok;
    if (ok) cert.detail = "bounded and decreasing on every cycle";
    return cert;
}

struct RankSearchOptions {
    Term annotated;  // tried before any template
    int coeffBound = 2;
    int lexBound = 1;
    bool tryLex = true;
    int samples = 24;
    unsigned seed = 0x5eed;
};

namespace termdetail {

// All coefficient tuples (per-variable coefficients then the constant),
// cheapest total weight first, constant-only templates excluded.
inline std::vector<std::vector<int>> coeffTuples(size_t nvars, int bound) {
    std::vector<std::vector<int>> all;
    std::vector<int> cur(nvars + 1, -bound);
    for (;;) {
        bool anyVar = false;
        for (size_t i = 0; i < nvars; ++i) anyVar = anyVar || cur[i] != 0;
        if (anyVar) all.push_back(cur);
        size_t k = cur.size();
        while (k > 0 && cur[k - 1] == bound) cur[--k] = -bound;
        if (k == 0) break;
        ++cur[k - 1];
    }
    auto weight = [](const std::vector<int>& t) {
        int w = 0;
        for (int c : t) w += c < 0 ? -c : c;
        return w;
    };
    std::stable_sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
        int wa = weight(a), wb = weight(b);
        return wa != wb ? wa < wb : a < b;
    });
    return all;
}

inline Term linearTerm(const std::vector<std::string>& vars, const std::vector<int>& cs) {
    Term acc;
    for (size_t i = 0; i < vars.size(); ++i) {
        int c = cs[i];
        if (!c) continue;
        int a = c < 0 ? -c : c;
        Term part = mkVar(vars[i], sortInt);
        if (a != 1) part = mkOp("*", {mkIntVal(a), part});
        if (!acc)
            acc = c < 0 ? mkOp("-", {mkIntVal(0), part}) : part;
        else
            acc = mkOp(c < 0 ? "-" : "+", {acc, part});
    }
    int c0 = cs[vars.size()];
    if (c0) acc = mkOp(c0 < 0 ? "-" : "+", {acc, mkIntVal(c0 < 0 ? -c0 : c0)});
    return acc;
}

// Ground refutation on shared sample valuations; a candidate surviving all
// samples still has to pass the solver.
struct RankSampler {
    std::vector<Subst> thetas;

    RankSampler(const LoopSummary& ls, const std::vector<std::string>& vars, int samples, unsigned seed) {
        std::set<std::string> names(vars.begin(), vars.end());
        for (auto& c : ls.cycles) {
            for (auto& v : varsOf(c.guard)) names.insert(v->name);
            for (auto& [k, t] : c.update.m)
                for (auto& v : varsOf(t)) names.insert(v->name);
        }
        std::mt19937 rng(seed);
        std::uniform_int_distribution<int> pick(-4, 4);
        for (int s = 0; s < samples; ++s) {
            Subst th;
            for (auto& n : names) th.bind(n, mkIntVal(pick(rng)));
            thetas.push_back(std::move(th));
        }
    }

    bool refutes(const LoopSummary& ls, const Term& rank, const Term& rank2) const {
        for (auto& th : thetas) {
            for (auto& c : ls.cycles) {
                if (!boolOf(evalGround(applySubst(c.guard, th)))) continue;
                Int e = intOf(evalGround(applySubst(rank, th)));
                if (e < 0) return true;
                Int e2 = 0;
                if (rank2) {
                    e2 = intOf(evalGround(applySubst(rank2, th)));
                    if (e2 < 0) return true;
                }
                Subst after;
                for (auto& [v, t] : c.update.m) after.bind(v, applySubst(t, th));
                Int ea = intOf(evalGround(applySubst(applySubst(rank, after), th)));
                if (rank2) {
                    Int ea2 = intOf(evalGround(applySubst(applySubst(rank2, after), th)));
                    if (!(e > ea || (e == ea && e2 > ea2))) return true;
                } else if (!(e > ea)) {
                    return true;
                }
            }
        }
        return false;
    }
};

}  // namespace termdetail

struct RankChoice {
    Term rank;
    Term rank2;  // null unless lexicographic
    std::string origin;
};

// Annotation first, then single linear templates cheapest-first, then
// lexicographic pairs. Every returned choice has already re-verified.
inline std::optional<RankChoice> searchRank(const LoopSummary& ls, const std::vector<std::string>& vars,
                                            SolverFacade& solver, const RankSearchOptions& opts = {}) {
    using namespace termdetail;
    if (ls.cycles.empty()) return std::nullopt;
    if (opts.annotated && verifyRank(ls, opts.annotated, solver).verified)
        return RankChoice{opts.annotated, nullptr, "annotated"};

    RankSampler sampler(ls, vars, opts.samples, opts.seed);
    for (auto& cs : coeffTuples(vars.size(), opts.coeffBound)) {
        Term e = linearTerm(vars, cs);
        if (sampler.refutes(ls, e, nullptr)) continue;
        if (verifyRank(ls, e, solver).verified) return RankChoice{e, nullptr, "search"};
    }
    if (opts.tryLex) {
        auto tuples = coeffTuples(vars.size(), opts.lexBound);
        std::vector<std::pair<size_t, size_t>> pairs;
        for (size_t i = 0; i < tuples.size(); ++i)
            for (size_t j = 0; j < tuples.size(); ++j)
                if (i != j) pairs.push_back({i, j});
        auto weight = [&](const std::vector<int>& t) {
            int w = 0;
            for (int c : t) w += c < 0 ? -c : c;
            return w;
        };
        std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
            return weight(tuples[a.first]) + weight(tuples[a.second]) <
                   weight(tuples[b.first]) + weight(tuples[b.second]);
        });
        for (auto& [i, j] : pairs) {
            Term e1 = linearTerm(vars, tuples[i]);
            Term e2 = linearTerm(vars, tuples[j]);
            if (sampler.refutes(ls, e1, e2)) continue;
            if (verifyRank(ls, e1, solver, e2).verified) return RankChoice{e1, e2, "search"};
        }
    }
    return std::nullopt;
}

struct TerminationReport {
    std::vector<LoopSummary> loops;
    std::vector<RankCertificate> certs;  // parallel to loops

    bool allCertified() const {
        if (certs.size() != loops.size()) return false;
        for (auto& c : certs)
            if (!c.verified) return false;
        return true;
    }
};

// Certify every loop of the conversion, consulting @rank annotations.
inline TerminationReport certifyTermination(const Conversion& conv, const WhileAst& ast,
                                            SolverFacade& solver, const Term& rankOverride = nullptr,
                                            unsigned seed = RankSearchOptions{}.seed) {
    TerminationReport rep;
    rep.loops = summarizeLoops(conv);
    for (auto& ls : rep.loops) {
        RankSearchOptions opts;
        opts.seed = seed;
        if (rankOverride)
            opts.annotated = rankOverride;
        else if (const ProgLine* pl = ast.find(ls.line))
            opts.annotated = pl->rank;
        if (auto ch = searchRank(ls, conv.map.vars, solver, opts)) {
            RankCertificate c = verifyRank(ls, ch->rank, solver, ch->rank2);
            c.origin = ch->origin;
            rep.certs.push_back(std::move(c));
        } else if (opts.annotated) {
            RankCertificate c = verifyRank(ls, opts.annotated, solver);
            c.origin = "annotated";
            c.detail += "; no template certificate found either";
            rep.certs.push_back(std::move(c));
        } else {
            RankCertificate c;
            c.header = ls.header;
            c.origin = "search";
            c.detail = "no linear or lexicographic certificate found";
            rep.certs.push_back(std::move(c));
        }
    }
    return rep;
}

struct LiftResult {
    bool terminating = false;
    std::string justification;
};

namespace termdetail {

inline bool stateShaped(const Term& t) {
    return !t->isVar && t->kind == SymKind::TermSym &&
           (t->name == "end" || t->name.rfind("state", 0) == 0);
}

}  // namespace termdetail

// The union of the converted rules, the check rules, and the oriented
// hypotheses terminates when every loop carries a certificate and every
// non-state rule rewrites its redex straight to a value, so nothing chains.
inline LiftResult liftTermination(const TerminationReport& rep, const Lctrs& sys,
                                  const std::vector<ConstrainedRule>& hyps) {
    using namespace termdetail;
    for (size_t i = 0; i < rep.loops.size(); ++i) {
        if (i >= rep.certs.size() || !rep.certs[i].verified)
            return {false, "missing ranking certificate for " + rep.loops[i].header};
    }
    for (auto& r : sys.rules) {
        if (stateShaped(r.lhs) && stateShaped(r.rhs)) continue;
        if (r.lhs->isVar) return {false, "rule " + r.label + ": left side is a variable"};
        if (r.rhs->isVar || r.rhs->kind != SymKind::ValueSym)
            return {false, "rule " + r.label + ": right side is not a value"};
    }
    for (auto& h : hyps) {
        if (h.rhs->isVar || h.rhs->kind != SymKind::ValueSym)
            return {false, "hypothesis " + h.label + ": right side is not a value"};
    }
    return {true,
            "state rules only step along loops whose certified rank is bounded and strictly "
            "decreasing per cycle; every other rule and hypothesis rewrites its redex to a value, "
            "so no rewrite sequence chains through them"};
}

inline nlohmann::json certificateJson(const TerminationReport& rep) {
    nlohmann::json loops = nlohmann::json::array();
    for (size_t i = 0; i < rep.loops.size(); ++i) {
        const LoopSummary& ls = rep.loops[i];
        nlohmann::json cycles = nlohmann::json::array();
        for (auto& c : ls.cycles) {
            nlohmann::json upd = nlohmann::json::object();
            for (auto& [v, t] : c.update.m)
                if (!(t->isVar && t->name == v)) upd[v] = showTerm(t);
            cycles.push_back({{"path", c.path}, {"guard", showTerm(c.guard)}, {"update", upd}});
        }
        nlohmann::json j{{"header", ls.header}, {"line", ls.line}, {"cycles", cycles}};
        if (i < rep.certs.size()) {
            const RankCertificate& c = rep.certs[i];
            j["verified"] = c.verified;
            j["origin"] = c.origin;
            j["detail"] = c.detail;
            j["checks"] = c.checks;
            if (c.rank) j["rank"] = showTerm(c.rank);
            if (c.rank2) j["rank2"] = showTerm(c.rank2);
        }
        loops.push_back(std::move(j));
    }
    return {{"loops", loops}};
}

enum class Verdict { Proved, Unknown, TableauInvalid };

inline std::string verdictName(Verdict v) {
    return v == Verdict::Proved ? "Proved" : v == Verdict::Unknown ? "Unknown" : "TableauInvalid";
}

struct CorrectnessOutcome {
    Verdict verdict = Verdict::Unknown;
    std::string stage;  // the stage that settled the verdict
    std::string message;
    TableauReport tableau;
    nlohmann::json trace;  // inference steps, when the transformation ran
    std::vector<std::string> narration;
    int steps = 0;
    TerminationReport termination;
    LiftResult lift;
};

// Full pipeline: tableau check, transformation to a closed inference
// sequence, replay of the recorded trace, and termination certificates.
// Proved requires all four; a failed tableau is its own verdict.
inline CorrectnessOutcome totalCorrectness(const WhileAst& ast, SolverFacade& solver,
                                           bool narrate = false, const Term& rankOverride = nullptr) {
    CorrectnessOutcome out;
    out.tableau = checkTableau(ast, solver);
    if (!out.tableau.valid()) {
        out.verdict = Verdict::TableauInvalid;
        out.stage = "tableau";
        std::string why;
        for (auto& e : out.tableau.shapeErrors)
            if (why.empty()) why = e;
        for (auto& o : out.tableau.obligations)
            if (why.empty() && o.verdict != Validity::Valid)
                why = "line " + std::to_string(o.line) + ": " + o.kind +
                      (o.detail.empty() ? "" : " (" + o.detail + ")");
        out.message = "the tableau does not hold: " + why;
        return out;
    }

    Conversion conv = conversionFor(ast);
    TransformResult tr = transformTableau(conv, ast, solver, narrate);
    out.narration = tr.narration;
    if (!tr.ok) {
        out.stage = "transform";
        out.message = tr.message;
        return out;
    }
    out.trace = traceJson(tr.process);
    out.steps = int(tr.process.steps.size());

    HoareTriple triple = hoareTriple(ast);
    ReplayResult rep = replayTrace(conv.sys, solver, {Equation{goalEquation(conv, triple.pre), "A1"}}, out.trace);
    if (!rep.ok) {
        out.stage = "replay";
        out.message = rep.message;
        return out;
    }

    out.termination = certifyTermination(conv, ast, solver, rankOverride);
    out.lift = liftTermination(out.termination, conv.sys, tr.process.hyps);
    if (!out.lift.terminating) {
        out.stage = "termination";
        out.message = out.lift.justification;
        return out;
    }

    out.verdict = Verdict::Proved;
    out.stage = "proof";
    out.message = "total correctness established: the tableau holds, the inference sequence closed in " +
                  std::to_string(out.steps) + " steps and replays, and every loop is certified";
    return out;
}

inline nlohmann::json correctnessJson(const CorrectnessOutcome& out) {
    nlohmann::json j{{"verdict", verdictName(out.verdict)},
                     {"stage", out.stage},
                     {"message", out.message},
                     {"tableau", tableauReportJson(out.tableau)},
                     {"termination", certificateJson(out.termination)},
                     {"terminating", out.lift.terminating},
                     {"justification", out.lift.justification}};
    if (out.steps) {
        j["steps"] = out.steps;
        j["trace"] = out.trace;
    }
    if (!out.narration.empty()) j["narration"] = out.narration;
    return j;
}

}  // namespace hoare2ri
