#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include "hoare2ri/solver.hpp"
#include "hoare2ri/textexpr.hpp"

using namespace hoare2ri;

namespace {

Term parseConstraint(const std::string& src) {
    std::map<std::string, Sort> vars = {{"x", sortInt},  {"y", sortInt}, {"i", sortInt},
                                        {"z", sortInt},  {"b", sortBool}, {"c", sortBool}};
    auto toks = tokenize(src, 1);
    TokenCursor cur(toks);
    ExprCtx ctx;
    ctx.resolve = [&vars](const std::string& name, std::vector<Term>* args, const Token& tok) -> Term {
        if (args) {
            if (isTheorySymName(name)) return mkOp(name, *args);
            throw ParseError("unknown function '" + name + "'", tok.line, tok.col);
        }
        auto it = vars.find(name);
        if (it == vars.end()) throw ParseError("unknown variable '" + name + "'", tok.line, tok.col);
        return mkVar(name, it->second);
    };
    ctx.apply = [](const std::string& name, std::vector<Term> args, const Token&) -> Term {
        if (name == "neg") return mkOp("-", {mkIntVal(0), args[0]});
        if (name == "<=") return mkOp(">=", {args[1], args[0]});
        if (name == "<") return mkOp(">", {args[1], args[0]});
        return mkOp(name, std::move(args));
    };
    Term t = parseExpr(cur, ctx, 0);
    cur.expect(Tok::End, "end of expression");
    return t;
}

// Independent satisfiability oracle: exhaustive search over a box.
std::optional<Subst> oracleSatBox(const Term& phi, int lo, int hi) {
    auto vars = varsOf(phi);
    std::vector<Term> intVars, boolVars;
    for (auto& v : vars) (v->sort == sortInt ? intVars : boolVars).push_back(v);
    std::vector<int> cur(intVars.size(), lo);
    for (;;) {
        for (int bc = 0; bc < (1 << boolVars.size()); ++bc) {
            Subst g;
            for (size_t i = 0; i < intVars.size(); ++i) g.bind(intVars[i]->name, mkIntVal(cur[i]));
            for (size_t i = 0; i < boolVars.size(); ++i)
                g.bind(boolVars[i]->name, mkBoolVal((bc >> i) & 1));
            if (boolOf(evalGround(applySubst(phi, g)))) return g;
        }
        size_t k = 0;
        for (; k < cur.size(); ++k) {
            if (cur[k] < hi) {
                ++cur[k];
                for (size_t j = 0; j < k; ++j) cur[j] = lo;
                break;
            }
        }
        if (k == cur.size()) break;
    }
    return std::nullopt;
}

Term randLinTerm(std::mt19937_64& rng, const std::vector<Term>& vars, int depth) {
    std::uniform_int_distribution<int> lit(-5, 5);
    if (depth == 0) {
        if (rng() % 2 == 0) return vars[rng() % vars.size()];
        return mkIntVal(lit(rng));
    }
    static const char* ops[] = {"+", "-", "*"};
    return mkOp(ops[rng() % 3],
                {randLinTerm(rng, vars, depth - 1), randLinTerm(rng, vars, depth - 1)});
}

Term randFormula(std::mt19937_64& rng, const std::vector<Term>& vars, int depth) {
    if (depth == 0 || rng() % 3 == 0) {
        static const char* cmps[] = {"=", "!=", ">=", ">"};
        return mkOp(cmps[rng() % 4],
                    {randLinTerm(rng, vars, 1), randLinTerm(rng, vars, 1)});
    }
    switch (rng() % 4) {
        case 0: return mkOp("&&", {randFormula(rng, vars, depth - 1), randFormula(rng, vars, depth - 1)});
        case 1: return mkOp("||", {randFormula(rng, vars, depth - 1), randFormula(rng, vars, depth - 1)});
        case 2: return mkOp("=>", {randFormula(rng, vars, depth - 1), randFormula(rng, vars, depth - 1)});
        default: return mkOp("!", {randFormula(rng, vars, depth - 1)});
    }
}

std::string fakeCmd(const std::string& mode, const std::string& extra = "") {
    return "FAKE_MODE=" + mode + (extra.empty() ? "" : " " + extra) + " " + FAKE_SOLVER_PATH;
}

}  // namespace

TEST_CASE("validity of core obligations") {
    SolverFacade s;
    auto valid = [&](const std::string& f) { return s.checkValid(parseConstraint(f)).verdict; };

    CHECK(valid("x >= 0 => x + 1 >= 1") == Validity::Valid);
    CHECK(valid("x > i => x >= i + 1") == Validity::Valid);
    CHECK(valid("x >= i && x != i => x >= i + 1") == Validity::Valid);
    CHECK(valid("x > 0 || x <= 0") == Validity::Valid);
    CHECK(valid("2*z = i*(i+1) && !(x > i) && x >= i => 2*z = x*(x+1)") == Validity::Valid);
    CHECK(valid("2*z = i*(i-1) && x >= i && x > i => 2*z + 2*i = i*(i+1)") == Validity::Valid);
    // honest about globally nonlinear facts outside the search box
    CHECK(valid("x*x >= 0") == Validity::Unknown);
    CHECK(s.stats().builtinDecided > 0);
}

TEST_CASE("invalidity produces confirmed counterexamples") {
    SolverFacade s;
    auto r = s.checkValid(parseConstraint("x >= 0"));
    REQUIRE(r.verdict == Validity::Invalid);
    REQUIRE(r.counterexample);
    Term cx = applySubst(parseConstraint("x >= 0"), *r.counterexample);
    CHECK_FALSE(boolOf(evalGround(cx)));

    auto r2 = s.checkValid(parseConstraint("x >= 0 => x > 0"));
    REQUIRE(r2.verdict == Validity::Invalid);
    Term cx2 = applySubst(parseConstraint("x >= 0 => x > 0"), *r2.counterexample);
    CHECK_FALSE(boolOf(evalGround(cx2)));
}

TEST_CASE("satisfiability basics") {
    SolverFacade s;
    auto sat = [&](const std::string& f) { return s.checkSat(parseConstraint(f)); };

    CHECK(sat("x > x").verdict == Satness::Unsat);
    CHECK(sat("2*x = 1").verdict == Satness::Unsat);
    CHECK(sat("6*x + 9*y = 5").verdict == Satness::Unsat);
    CHECK(sat("b && !(b)").verdict == Satness::Unsat);
    CHECK(sat("x >= y && y >= x + 1").verdict == Satness::Unsat);
    CHECK(sat("x != x").verdict == Satness::Unsat);

    auto m = sat("x + y = 5 && x >= y");
    REQUIRE(m.verdict == Satness::Sat);
    REQUIRE(m.model);
    CHECK(boolOf(evalGround(applySubst(parseConstraint("x + y = 5 && x >= y"), *m.model))));

    auto mb = sat("b && !(c)");
    REQUIRE(mb.verdict == Satness::Sat);

    CHECK(sat("true").verdict == Satness::Sat);
    CHECK(sat("false").verdict == Satness::Unsat);
    CHECK(sat("3 > 4").verdict == Satness::Unsat);
    CHECK_THROWS_AS(s.checkSat(mkIntVal(3)), TermError);
}

TEST_CASE("equivalence checking") {
    SolverFacade s;
    CHECK(s.checkEquiv(parseConstraint("x >= 1"), parseConstraint("x > 0")).verdict == Validity::Valid);
    auto r = s.checkEquiv(parseConstraint("x >= 0"), parseConstraint("x > 0"));
    REQUIRE(r.verdict == Validity::Invalid);
    REQUIRE(r.counterexample);
}

TEST_CASE("solver agrees with the exhaustive oracle") {
    SolverFacade s;
    std::mt19937_64 rng(20260818);
    std::vector<Term> vars = {mkVar("x", sortInt), mkVar("y", sortInt)};
    int unknowns = 0;
    for (int iter = 0; iter < 150; ++iter) {
        Term phi = randFormula(rng, vars, 2);
        auto oracle = oracleSatBox(phi, -5, 5);
        auto got = s.checkSat(phi);
        if (got.verdict == Satness::Sat) {
            REQUIRE(got.model);
            REQUIRE(boolOf(evalGround(applySubst(phi, *got.model))));
        } else if (got.verdict == Satness::Unsat) {
            REQUIRE_FALSE(oracle.has_value());
        } else {
            ++unknowns;
        }
        if (oracle.has_value()) {
            // the default search box contains the oracle box, so a model
            // inside it must be found
            REQUIRE(got.verdict == Satness::Sat);
        }
    }
    CHECK(unknowns < 50);
}

TEST_CASE("query cache") {
    SolverFacade s;
    Term phi = parseConstraint("x >= 0 => x + 1 >= 1");
    s.checkValid(phi);
    long q1 = s.stats().queries;
    s.checkValid(phi);
    CHECK(s.stats().queries == q1 + 1);
    CHECK(s.stats().cacheHits >= 1);
}

TEST_CASE("smt script emission") {
    Term phi = parseConstraint("x >= 0 && b");
    CHECK(smtScript(phi) ==
          "(set-logic NIA)\n"
          "(declare-const x Int)\n"
          "(declare-const b Bool)\n"
          "(assert (and (>= x 0) b))\n"
          "(check-sat)\n(get-model)\n");
    CHECK(smtCompatible(phi));
    CHECK_FALSE(smtCompatible(parseConstraint("div(x,2) >= 1")));
    CHECK_FALSE(smtCompatible(parseConstraint("mod(x,2) = 0")));
    CHECK_FALSE(smtCompatible(parseConstraint("exp(x,2) >= 0")));
    CHECK(smtScript(parseConstraint("x != 0")) ==
          "(set-logic NIA)\n(declare-const x Int)\n"
          "(assert (distinct x 0))\n(check-sat)\n(get-model)\n");
    CHECK(smtScript(parseConstraint("x = -3")).find("(- 3)") != std::string::npos);
}

TEST_CASE("model answer parsing") {
    std::vector<Term> vars = {mkVar("x", sortInt), mkVar("b", sortBool)};
    Subst m1 = parseSmtModel("sat\n(model\n  (define-fun x () Int 42)\n"
                             "  (define-fun b () Bool true)\n)\n", vars);
    REQUIRE(m1.hasBinding("x"));
    CHECK(intOf(*m1.lookup("x")) == 42);
    CHECK(boolOf(*m1.lookup("b")) == true);

    Subst m2 = parseSmtModel("sat\n((x (- 7)) (b false))\n", vars);
    REQUIRE(m2.hasBinding("x"));
    CHECK(intOf(*m2.lookup("x")) == -7);
    CHECK(boolOf(*m2.lookup("b")) == false);
}

// builtin search cannot reach x*x >= 100 inside its default box, so these
// queries exercise the external solver path end to end
TEST_CASE("external solver protocol") {
    const std::string hard = "x*x >= 100 && x >= 0";

    SECTION("confirmed model is accepted") {
        SolverFacade s({fakeCmd("sat", "FAKE_VAL=12")});
        auto r = s.checkSat(parseConstraint(hard));
        REQUIRE(r.verdict == Satness::Sat);
        REQUIRE(r.model);
        CHECK(intOf(*r.model->lookup("x")) == 12);
        CHECK(s.stats().externalCalls == 1);
        CHECK(s.stats().unconfirmedModels == 0);
    }
    SECTION("unconfirmed model downgrades to unknown") {
        SolverFacade s({fakeCmd("sat", "FAKE_VAL=3")});
        auto r = s.checkSat(parseConstraint(hard));
        CHECK(r.verdict == Satness::Unknown);
        CHECK(s.stats().unconfirmedModels == 1);
    }
    SECTION("unsat answers are trusted") {
        SolverFacade s({fakeCmd("unsat")});
        auto r = s.checkSat(parseConstraint(hard));
        CHECK(r.verdict == Satness::Unsat);
    }
    SECTION("unknown and garbage answers give unknown") {
        SolverFacade s1({fakeCmd("unknown")});
        CHECK(s1.checkSat(parseConstraint(hard)).verdict == Satness::Unknown);
        SolverFacade s2({fakeCmd("garbage")});
        CHECK(s2.checkSat(parseConstraint(hard)).verdict == Satness::Unknown);
    }
    SECTION("timeouts are survived") {
        SolverOptions o;
        o.externalCmd = fakeCmd("sleep");
        o.timeoutMs = 300;
        SolverFacade s(o);
        auto t0 = std::chrono::steady_clock::now();
        auto r = s.checkSat(parseConstraint(hard));
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0).count();
        CHECK(r.verdict == Satness::Unknown);
        CHECK(ms < 5000);
    }
    SECTION("missing command reports unknown") {
        SolverFacade s({"/nonexistent/solver-binary"});
        CHECK(s.checkSat(parseConstraint(hard)).verdict == Satness::Unknown);
    }
    SECTION("external answers settle validity the builtin cannot") {
        SolverFacade s({fakeCmd("unsat")});
        CHECK(s.checkValid(parseConstraint("x*x >= 0")).verdict == Validity::Valid);
        CHECK(s.stats().externalCalls == 1);
    }
    SECTION("script reaches the solver wire-complete") {
        std::string cap = std::string(FAKE_SOLVER_PATH) + ".capture.txt";
        std::remove(cap.c_str());
        SolverFacade s({fakeCmd("unsat", "FAKE_CAPTURE=" + cap)});
        s.checkSat(parseConstraint(hard));
        std::ifstream f(cap);
        REQUIRE(f.good());
        std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        CHECK(text.find("(set-logic NIA)") != std::string::npos);
        CHECK(text.find("(declare-const x Int)") != std::string::npos);
        CHECK(text.find("(check-sat)") != std::string::npos);
        CHECK(text == smtScript(parseConstraint(hard)));
    }
}

TEST_CASE("division, modulo, exponent queries stay internal") {
    SolverFacade s({fakeCmd("sat", "FAKE_VAL=1000")});
    auto r = s.checkSat(parseConstraint("div(x,2) >= 100 && x >= 0"));
    CHECK(r.verdict == Satness::Unknown);
    CHECK(s.stats().externalCalls == 0);

    // inside the search box the builtin engine still decides them
    auto r2 = s.checkSat(parseConstraint("mod(x, 3) = 1 && x >= 0"));
    REQUIRE(r2.verdict == Satness::Sat);
    CHECK(s.stats().externalCalls == 0);
    auto r3 = s.checkValid(parseConstraint("mod(x, 0) = 0"));
    CHECK(r3.verdict == Validity::Unknown);  // sound: refuses to generalize a box search
}

TEST_CASE("constraints outside the theory degrade to unknown") {
    SolverFacade s;
    FunSym chk{"chk", {sortState}, sortBool, SymKind::TermSym};
    Term phi = mkApp(chk, {mkVar("q", sortState)});
    auto r = s.checkSat(phi);
    CHECK(r.verdict == Satness::Unknown);
    CHECK_FALSE(r.reason.empty());
}
