#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hoare2ri/poly.hpp"
#include "hoare2ri/term.hpp"
#include "hoare2ri/theory.hpp"

namespace hoare2ri {

enum class Validity { Valid, Invalid, Unknown };
enum class Satness { Sat, Unsat, Unknown };

struct ValidityResult {
    Validity verdict;
    std::optional<Subst> counterexample;  // confirmed by evalGround when present
    std::string reason;                   // set for Unknown
};

struct SatResult {
    Satness verdict;
    std::optional<Subst> model;  // confirmed by evalGround when present
    std::string reason;
};

struct SolverOptions {
    std::string externalCmd;  // empty: builtin only
    int timeoutMs = 10000;
    int branchCap = 512;
    long enumCap = 200000;
    int defaultBox = 6;
};

// ---------------------------------------------------------------------------
// SMT-LIB2 emission

inline void smtEmit(std::ostream& os, const Term& t) {
    if (t->isVar) {
        os << t->name;
        return;
    }
    if (isIntVal(t)) {
        if (*t->num < 0) os << "(- " << Int(-*t->num).str() << ")";
        else os << t->num->str();
        return;
    }
    if (isBoolVal(t)) {
        os << (*t->bv ? "true" : "false");
        return;
    }
    std::string op = t->name;
    if (op == "&&") op = "and";
    else if (op == "||") op = "or";
    else if (op == "!") op = "not";
    else if (op == "!=") op = "distinct";
    os << '(' << op;
    for (auto& a : t->args) {
        os << ' ';
        smtEmit(os, a);
    }
    os << ')';
}

inline bool smtCompatible(const Term& t) {
    if (t->isVar) return t->sort == sortInt || t->sort == sortBool;
    if (isValue(t)) return true;
    if (t->kind != SymKind::TheorySym) return false;
    // div/mod differ on zero divisors from the totalized theory; exp has no
    // SMT-LIB counterpart. Keep those queries on the builtin path.
    if (t->name == "div" || t->name == "mod" || t->name == "exp") return false;
    for (auto& a : t->args)
        if (!smtCompatible(a)) return false;
    return true;
}

inline std::string smtScript(const Term& phi) {
    std::ostringstream os;
    os << "(set-logic NIA)\n";
    for (auto& v : varsOf(phi))
        os << "(declare-const " << v->name << ' '
           << (v->sort == sortBool ? "Bool" : "Int") << ")\n";
    os << "(assert ";
    smtEmit(os, phi);
    os << ")\n(check-sat)\n(get-model)\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Subprocess with deadline. Feeds the script on stdin, captures stdout.

struct SubprocessResult {
    bool ran = false;
    bool timedOut = false;
    std::string output;
    std::string error;
};

inline SubprocessResult runWithTimeout(const std::string& cmd, const std::string& input,
                                       int timeoutMs) {
    SubprocessResult res;
    static std::once_flag sigpipeOnce;
    std::call_once(sigpipeOnce, [] { signal(SIGPIPE, SIG_IGN); });

    int inPipe[2], outPipe[2];
    if (pipe(inPipe) != 0 || pipe(outPipe) != 0) {
        res.error = "pipe failed";
        return res;
    }
    pid_t pid = fork();
    if (pid < 0) {
        res.error = "fork failed";
        return res;
    }
    if (pid == 0) {
        dup2(inPipe[0], 0);
        dup2(outPipe[1], 1);
        dup2(outPipe[1], 2);
        close(inPipe[0]); close(inPipe[1]);
        close(outPipe[0]); close(outPipe[1]);
        execl("/bin/sh", "sh", "-c", cmd.c_str(), (char*)nullptr);
        _exit(127);
    }
    close(inPipe[0]);
    close(outPipe[1]);
    size_t off = 0;
    while (off < input.size()) {
        ssize_t w = write(inPipe[1], input.data() + off, input.size() - off);
        if (w <= 0) break;
        off += size_t(w);
    }
    close(inPipe[1]);

    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeoutMs);
    char buf[4096];
    for (;;) {
        auto now = std::chrono::steady_clock::now();
        long remain = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        if (remain <= 0) {
            kill(pid, SIGKILL);
            waitpid(pid, nullptr, 0);
            close(outPipe[0]);
            res.timedOut = true;
            return res;
        }
        struct pollfd pfd{outPipe[0], POLLIN, 0};
        int pr = poll(&pfd, 1, int(remain));
        if (pr <= 0) continue;
        ssize_t n = read(outPipe[0], buf, sizeof buf);
        if (n < 0) continue;
        if (n == 0) break;
        res.output.append(buf, size_t(n));
    }
    close(outPipe[0]);
    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status) && WEXITSTATUS(status) == 127) {
        res.error = "command not found";
    } else {
        res.ran = true;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Minimal s-expression reader for model answers.

struct Sexp {
    std::string atom;
    std::vector<Sexp> kids;
    bool isAtom = true;
};

inline Sexp parseSexpAt(const std::string& s, size_t& i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    Sexp e;
    if (i < s.size() && s[i] == '(') {
        e.isAtom = false;
        ++i;
        for (;;) {
            while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
            if (i >= s.size()) break;
            if (s[i] == ')') { ++i; break; }
            e.kids.push_back(parseSexpAt(s, i));
        }
        return e;
    }
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) && s[j] != '(' && s[j] != ')') ++j;
    e.atom = s.substr(i, j - i);
    i = j;
    return e;
}

inline std::optional<Int> sexpIntValue(const Sexp& e) {
    if (e.isAtom) {
        const std::string& a = e.atom;
        if (a.empty()) return std::nullopt;
        size_t k = a[0] == '-' ? 1 : 0;
        if (k == a.size()) return std::nullopt;
        for (size_t i = k; i < a.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(a[i]))) return std::nullopt;
        return Int(a);
    }
    if (!e.kids.empty() && e.kids[0].isAtom && e.kids[0].atom == "-" && e.kids.size() == 2) {
        auto v = sexpIntValue(e.kids[1]);
        if (v) return Int(-*v);
    }
    return std::nullopt;
}

// Extracts variable assignments from a solver's get-model output.
inline Subst parseSmtModel(const std::string& out, const std::vector<Term>& vars) {
    Subst m;
    size_t i = 0;
    std::vector<Sexp> tops;
    while (i < out.size()) {
        while (i < out.size() && out[i] != '(') ++i;
        if (i >= out.size()) break;
        tops.push_back(parseSexpAt(out, i));
    }
    auto record = [&](const std::string& name, const Sexp& val) {
        for (auto& v : vars) {
            if (v->name != name) continue;
            if (v->sort == sortInt) {
                if (auto iv = sexpIntValue(val)) m.bind(name, mkIntVal(*iv));
            } else if (val.isAtom && (val.atom == "true" || val.atom == "false")) {
                m.bind(name, mkBoolVal(val.atom == "true"));
            }
        }
    };
    std::function<void(const Sexp&)> walk = [&](const Sexp& e) {
        if (e.isAtom) return;
        // (define-fun x () Int 3)
        if (e.kids.size() >= 5 && e.kids[0].isAtom && e.kids[0].atom == "define-fun" &&
            e.kids[1].isAtom) {
            record(e.kids[1].atom, e.kids.back());
            return;
        }
        // ((x 3) (y 4)) style
        if (e.kids.size() == 2 && e.kids[0].isAtom && !e.kids[0].atom.empty() &&
            std::isalpha(static_cast<unsigned char>(e.kids[0].atom[0]))) {
            record(e.kids[0].atom, e.kids[1]);
        }
        for (auto& k : e.kids) walk(k);
    };
    for (auto& t : tops) walk(t);
    return m;
}

// ---------------------------------------------------------------------------
// Builtin engine: negation normal form, capped disjunctive branch expansion,
// polynomial saturation per branch, bounded model enumeration.

struct Lit {
    Term atom;  // comparison term, boolean variable, or boolean value
    bool neg;
};

struct BranchOverflow {};

inline void dnfInto(const Term& t, bool neg, std::vector<std::vector<Lit>>& out, int cap) {
    if (!t->isVar && t->kind == SymKind::TheorySym) {
        const std::string& f = t->name;
        if (f == "!") { dnfInto(t->args[0], !neg, out, cap); return; }
        bool conj = (f == "&&" && !neg) || (f == "||" && neg) || (f == "=>" && neg);
        bool disj = (f == "||" && !neg) || (f == "&&" && neg) || (f == "=>" && !neg);
        if (conj || disj) {
            bool negL = neg, negR = neg;
            if (f == "=>") negL = !neg;
            if (disj) {
                dnfInto(t->args[0], negL, out, cap);
                dnfInto(t->args[1], negR, out, cap);
                if (int(out.size()) > cap) throw BranchOverflow{};
                return;
            }
            std::vector<std::vector<Lit>> left, right;
            dnfInto(t->args[0], negL, left, cap);
            dnfInto(t->args[1], negR, right, cap);
            if (long(left.size()) * long(right.size()) > cap) throw BranchOverflow{};
            for (auto& l : left)
                for (auto& r : right) {
                    std::vector<Lit> b = l;
                    b.insert(b.end(), r.begin(), r.end());
                    out.push_back(std::move(b));
                }
            return;
        }
    }
    out.push_back({Lit{t, neg}});
}

struct BranchState {
    std::vector<Lit> lits;
    std::set<PolyAtom> atoms;
    std::map<std::string, bool> boolFix;
    OpaquePool pool;
    bool refuted = false;
    bool unsupported = false;
};

inline bool atomGroundCheck(const PolyAtom& a, bool& refuted) {
    if (!a.p.isConst()) return false;
    Int c = a.p.constValue();
    bool ok = a.kind == AtomKind::Eq ? c == 0 : a.kind == AtomKind::Ge ? c >= 0 : c != 0;
    if (!ok) refuted = true;
    return true;  // ground, can be dropped if ok
}

inline void saturateBranch(BranchState& b) {
    // seed
    for (auto& lit : b.lits) {
        const Term& t = lit.atom;
        if (isBoolVal(t)) {
            if (*t->bv == lit.neg) b.refuted = true;
            continue;
        }
        if (t->isVar && t->sort == sortBool) {
            auto [it, fresh] = b.boolFix.emplace(t->name, !lit.neg);
            if (!fresh && it->second != !lit.neg) b.refuted = true;
            continue;
        }
        auto a = atomFromComparison(t, lit.neg, b.pool);
        if (!a) { b.unsupported = true; continue; }
        b.atoms.insert(*a);
    }
    if (b.refuted) return;

    std::set<std::string> substituted;
    for (int round = 0; round < 60 && !b.refuted; ++round) {
        bool changed = false;
        // ground checks
        for (auto it = b.atoms.begin(); it != b.atoms.end() && !b.refuted;) {
            bool ref = false;
            if (atomGroundCheck(*it, ref)) {
                if (ref) { b.refuted = true; break; }
                it = b.atoms.erase(it);
                changed = true;
            } else ++it;
        }
        if (b.refuted) break;

        // linear equality checks and unit-coefficient substitution
        std::optional<std::pair<std::string, Poly>> subst;
        for (auto& a : b.atoms) {
            if (a.kind != AtomKind::Eq) continue;
            bool linear = true;
            for (auto& [m, c] : a.p.coef) {
                int deg = 0;
                for (auto& [v, e] : m) deg += e;
                if (deg > 1) { linear = false; break; }
            }
            if (linear && !a.p.isConst()) {
                Int g = polyContentGcd(a.p, true);
                Int c = a.p.constValue();
                if (g > 1 && euclidMod(c, g) != 0) { b.refuted = true; break; }
            }
            if (subst) continue;
            for (auto& v : polyVars(a.p)) {
                if (substituted.count(v)) continue;
                auto sign = unitLinearCoef(a.p, v);
                if (!sign) continue;
                // v = -(p - sign*v) * sign
                Poly rest = a.p;
                Monomial mv{{v, 1}};
                rest.coef.erase(mv);
                Poly rhs = *sign == 1 ? polyNeg(rest) : rest;
                subst = {v, rhs};
                break;
            }
        }
        if (b.refuted) break;
        if (subst) {
            substituted.insert(subst->first);
            std::set<PolyAtom> next;
            for (auto& a : b.atoms) {
                Poly q = polySubstVar(a.p, subst->first, subst->second);
                next.insert(canonicalAtom(a.kind, std::move(q)));
            }
            // keep the defining equality so the model space is unchanged
            Poly def = polySub(Poly::variable(subst->first), subst->second);
            next.insert(canonicalAtom(AtomKind::Eq, std::move(def)));
            if (next != b.atoms) changed = true;
            b.atoms = std::move(next);
        }

        // pairwise inferences
        std::vector<PolyAtom> added;
        std::vector<PolyAtom> ges, eqs, neqs;
        for (auto& a : b.atoms)
            (a.kind == AtomKind::Ge ? ges : a.kind == AtomKind::Eq ? eqs : neqs).push_back(a);
        for (auto& e : eqs) {
            PolyAtom n = canonicalAtom(AtomKind::Neq, e.p);
            for (auto& q : neqs)
                if (q.p == n.p) { b.refuted = true; break; }
            if (b.refuted) break;
        }
        if (b.refuted) break;
        for (size_t i = 0; i < ges.size() && !b.refuted; ++i)
            for (size_t j = i + 1; j < ges.size() && !b.refuted; ++j) {
                Poly s = polyAdd(ges[i].p, ges[j].p);
                if (s.isConst()) {
                    if (s.constValue() < 0) { b.refuted = true; break; }
                    if (s.isZero()) added.push_back(canonicalAtom(AtomKind::Eq, ges[i].p));
                }
            }
        if (b.refuted) break;
        // p >= 0 and p != 0 give p - 1 >= 0
        for (auto& g : ges) {
            PolyAtom n = canonicalAtom(AtomKind::Neq, g.p);
            for (auto& q : neqs)
                if (q.p == n.p)
                    added.push_back(canonicalAtom(AtomKind::Ge, polySub(g.p, Poly::constant(1))));
        }
        for (auto& a : added)
            if (b.atoms.insert(a).second) changed = true;
        if (!changed) break;
    }
}

// Per-variable bounds derived from single-variable linear atoms.
struct VarBounds {
    std::optional<Int> lo, hi;
};

inline std::map<std::string, VarBounds> deriveBounds(const BranchState& b) {
    std::map<std::string, VarBounds> bounds;
    for (auto& a : b.atoms) {
        auto vs = polyVars(a.p);
        if (vs.size() != 1) continue;
        const std::string& v = vs[0];
        Monomial mv{{v, 1}};
        auto it = a.p.coef.find(mv);
        if (it == a.p.coef.end() || a.p.coef.size() > 2) continue;
        Int coefficient = it->second;
        Int c = a.p.constValue();
        auto& vb = bounds[v];
        if (a.kind == AtomKind::Eq) {
            if (euclidMod(-c, coefficient) == 0) {
                Int val = euclidDiv(-c, coefficient);
                if (!vb.lo || *vb.lo < val) vb.lo = val;
                if (!vb.hi || *vb.hi > val) vb.hi = val;
            }
        } else if (a.kind == AtomKind::Ge) {
            if (coefficient > 0) {
                Int lo = -euclidDiv(c, coefficient);
                if (!vb.lo || *vb.lo < lo) vb.lo = lo;
            } else {
                Int hi = euclidDiv(c, -coefficient);
                if (!vb.hi || *vb.hi > hi) vb.hi = hi;
            }
        }
    }
    return bounds;
}

// ---------------------------------------------------------------------------
// Facade

class SolverFacade {
  public:
    explicit SolverFacade(SolverOptions opts = {}) : opts_(std::move(opts)) {}

    static SolverFacade fromEnv() {
        SolverOptions o;
        if (const char* c = std::getenv("HOARE2RI_SOLVER")) o.externalCmd = c;
        return SolverFacade(o);
    }

    const SolverOptions& options() const { return opts_; }
    void setExternalCmd(const std::string& cmd) { opts_.externalCmd = cmd; }
    void setTimeoutMs(int ms) { opts_.timeoutMs = ms; }

    struct Stats {
        long queries = 0;
        long cacheHits = 0;
        long externalCalls = 0;
        long unconfirmedModels = 0;
        long builtinDecided = 0;
    };
    const Stats& stats() const { return stats_; }

    SatResult checkSat(const Term& phi) {
        if (phi->sort != sortBool) throw TermError("checkSat: constraint must be boolean");
        std::string key = "sat:" + showTerm(phi);
        {
            std::lock_guard<std::mutex> lk(mu_);
            ++stats_.queries;
            auto it = satCache_.find(key);
            if (it != satCache_.end()) { ++stats_.cacheHits; return it->second; }
        }
        SatResult r = checkSatCore(phi);
        std::lock_guard<std::mutex> lk(mu_);
        satCache_[key] = r;
        return r;
    }

    ValidityResult checkValid(const Term& phi) {
        SatResult s = checkSat(mkOp("!", {phi}));
        switch (s.verdict) {
            case Satness::Unsat: return {Validity::Valid, std::nullopt, ""};
            case Satness::Sat: return {Validity::Invalid, s.model, ""};
            default: return {Validity::Unknown, std::nullopt, s.reason};
        }
    }

    ValidityResult checkEquiv(const Term& a, const Term& b) {
        return checkValid(mkOp("&&", {mkOp("=>", {a, b}), mkOp("=>", {b, a})}));
    }

  private:
    SatResult checkSatCore(const Term& phi) {
        // ground constraints evaluate directly
        if (varsOf(phi).empty()) {
            try {
                bool v = boolOf(evalGround(phi));
                ++stats_.builtinDecided;
                return v ? SatResult{Satness::Sat, Subst{}, ""}
                         : SatResult{Satness::Unsat, std::nullopt, ""};
            } catch (const EvalError& e) {
                return {Satness::Unknown, std::nullopt, e.what()};
            }
        }
        for (auto& v : varsOf(phi))
            if (v->sort != sortInt && v->sort != sortBool)
                return {Satness::Unknown, std::nullopt,
                        "non-theory variable '" + v->name + "' in constraint"};

        bool overflow = false;
        std::vector<std::vector<Lit>> branches;
        try {
            dnfInto(phi, false, branches, opts_.branchCap);
        } catch (const BranchOverflow&) {
            overflow = true;
            branches.clear();
        }

        bool anyOpen = overflow;
        for (auto& lits : branches) {
            BranchState b;
            b.lits = lits;
            saturateBranch(b);
            if (b.refuted) continue;
            bool complete = false;
            auto model = huntModel(phi, b, complete);
            if (model) {
                ++stats_.builtinDecided;
                return {Satness::Sat, *model, ""};
            }
            if (!complete || b.unsupported) anyOpen = true;
        }
        if (!anyOpen) {
            ++stats_.builtinDecided;
            return {Satness::Unsat, std::nullopt, ""};
        }

        if (!opts_.externalCmd.empty() && smtCompatible(phi)) {
            SatResult ext = externalSat(phi);
            if (ext.verdict != Satness::Unknown) return ext;
            return {Satness::Unknown, std::nullopt,
                    ext.reason.empty() ? "builtin incomplete; external unknown" : ext.reason};
        }
        return {Satness::Unknown, std::nullopt, "builtin engine incomplete for this constraint"};
    }

    // Bounded enumeration over the branch. `complete` reports whether the
    // search space provably covered all models of the branch.
    std::optional<Subst> huntModel(const Term& phi, const BranchState& b, bool& complete) {
        complete = false;
        std::vector<Term> vars = varsOf(phi);
        std::vector<Term> intVars, boolVars;
        for (auto& v : vars)
            (v->sort == sortInt ? intVars : boolVars).push_back(v);
        auto bounds = deriveBounds(b);

        bool allBounded = true;
        std::vector<std::pair<Int, Int>> ranges;
        Int volume = 1;
        for (auto& v : intVars) {
            auto it = bounds.find(v->name);
            Int lo, hi;
            if (it != bounds.end() && it->second.lo && it->second.hi) {
                lo = *it->second.lo;
                hi = *it->second.hi;
            } else {
                allBounded = false;
                lo = -opts_.defaultBox;
                hi = opts_.defaultBox;
                if (it != bounds.end()) {
                    if (it->second.lo && *it->second.lo > lo) lo = *it->second.lo;
                    if (it->second.hi && *it->second.hi < hi) hi = *it->second.hi;
                }
            }
            if (lo > hi) {  // empty range: branch has no models at all
                complete = true;
                return std::nullopt;
            }
            ranges.push_back({lo, hi});
            volume *= (hi - lo + 1);
            if (volume > opts_.enumCap * 4) break;
        }
        for (size_t i = 0; i < boolVars.size(); ++i) volume *= 2;

        if (volume > opts_.enumCap) {
            // shrink default boxes until the volume fits; completeness is lost
            if (allBounded) return std::nullopt;  // bounded but too big: give up, incomplete
            for (int box = opts_.defaultBox; box >= 1; --box) {
                Int vol = 1;
                for (size_t i = 0; i < intVars.size(); ++i) {
                    auto it = bounds.find(intVars[i]->name);
                    Int lo = -box, hi = box;
                    if (it != bounds.end()) {
                        if (it->second.lo && *it->second.lo > lo) lo = *it->second.lo;
                        if (it->second.hi && *it->second.hi < hi) hi = *it->second.hi;
                    }
                    if (lo > hi) { vol = 0; break; }
                    ranges[i] = {lo, hi};
                    vol *= (hi - lo + 1);
                }
                for (size_t i = 0; i < boolVars.size(); ++i) vol *= 2;
                if (vol <= opts_.enumCap) { volume = vol; break; }
            }
            if (volume > opts_.enumCap) return std::nullopt;
            allBounded = false;
        }
        if (ranges.size() != intVars.size()) return std::nullopt;

        // fixed bool assignments from the branch; free bools enumerate
        std::vector<size_t> freeBoolIdx;
        Subst base;
        for (size_t i = 0; i < boolVars.size(); ++i) {
            auto it = b.boolFix.find(boolVars[i]->name);
            if (it != b.boolFix.end()) base.bind(boolVars[i]->name, mkBoolVal(it->second));
            else freeBoolIdx.push_back(i);
        }

        std::vector<Int> cur;
        for (auto& r : ranges) cur.push_back(r.first);
        long boolCombos = 1L << std::min<size_t>(freeBoolIdx.size(), 20);
        for (;;) {
            for (long bc = 0; bc < boolCombos; ++bc) {
                Subst gamma = base;
                for (size_t i = 0; i < intVars.size(); ++i)
                    gamma.bind(intVars[i]->name, mkIntVal(cur[i]));
                for (size_t i = 0; i < freeBoolIdx.size(); ++i)
                    gamma.bind(boolVars[freeBoolIdx[i]]->name, mkBoolVal((bc >> i) & 1));
                try {
                    if (boolOf(evalGround(applySubst(phi, gamma)))) return gamma;
                } catch (const EvalError&) {
                    return std::nullopt;  // cannot evaluate: give up on enumeration
                }
            }
            size_t k = 0;
            for (; k < cur.size(); ++k) {
                if (cur[k] < ranges[k].second) {
                    ++cur[k];
                    for (size_t j = 0; j < k; ++j) cur[j] = ranges[j].first;
                    break;
                }
            }
            if (k == cur.size()) break;
            if (cur.empty()) break;
        }
        // exhausted; complete only if every int var had derived two-sided bounds
        complete = allBounded && freeBoolIdx.size() <= 20;
        return std::nullopt;
    }

    SatResult externalSat(const Term& phi) {
        ++stats_.externalCalls;
        std::string script = smtScript(phi);
        SubprocessResult r = runWithTimeout(opts_.externalCmd, script, opts_.timeoutMs);
        if (r.timedOut) return {Satness::Unknown, std::nullopt, "external solver timeout"};
        if (!r.error.empty()) return {Satness::Unknown, std::nullopt, "external solver: " + r.error};
        std::istringstream is(r.output);
        std::string word;
        std::string verdict;
        while (is >> word) {
            if (word == "sat" || word == "unsat" || word == "unknown") { verdict = word; break; }
            if (word.rfind("(error", 0) == 0) {
                std::string rest;
                std::getline(is, rest);
                continue;
            }
        }
        if (verdict == "unsat") return {Satness::Unsat, std::nullopt, ""};
        if (verdict == "sat") {
            Subst m = parseSmtModel(r.output, varsOf(phi));
            for (auto& v : varsOf(phi))
                if (!m.hasBinding(v->name))
                    m.bind(v->name, v->sort == sortBool ? mkBoolVal(false) : mkIntVal(0));
            try {
                if (boolOf(evalGround(applySubst(phi, m)))) return {Satness::Sat, m, ""};
            } catch (const EvalError&) {
            }
            ++stats_.unconfirmedModels;
            return {Satness::Unknown, std::nullopt, "external model failed confirmation"};
        }
        if (verdict == "unknown") return {Satness::Unknown, std::nullopt, "external solver unknown"};
        return {Satness::Unknown, std::nullopt, "external solver protocol error"};
    }

    SolverOptions opts_;
    Stats stats_;
    std::map<std::string, SatResult> satCache_;
    std::mutex mu_;
};

}  // namespace hoare2ri
