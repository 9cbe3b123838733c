#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <sstream>

#include "hoare2ri/termination.hpp"

using namespace hoare2ri;

namespace {

std::string readFile(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

WhileAst loadProgram(const std::string& name) {
    return parseProgram(readFile(std::string(PROGRAMS_DIR) + "/" + name));
}

Term iv(const std::string& n) { return mkVar(n, sortInt); }

}  // namespace

TEST_CASE("loop summaries over converted machines") {
    SolverFacade solver;

    SECTION("sum has one header with one composed cycle") {
        WhileAst ast = loadProgram("sum.whl");
        Conversion conv = conversionFor(ast);  // check rules present and ignored
        auto loops = summarizeLoops(conv);
        REQUIRE(loops.size() == 1);
        const LoopSummary& ls = loops[0];
        CHECK(ls.header == "state9");
        CHECK(ls.line == 9);
        CHECK(ls.closeLine == 16);
        REQUIRE(ls.cycles.size() == 1);
        const LoopCycle& c = ls.cycles[0];
        CHECK(c.path == std::vector<std::string>{"r9", "r12", "r14", "r16"});
        CHECK(showTerm(c.guard) == "x > i");
        CHECK(showTerm(*c.update.lookup("i")) == "i + 1");
        CHECK(showTerm(*c.update.lookup("z")) == "z + (i + 1)");
        CHECK(showTerm(*c.update.lookup("x")) == "x");
        CHECK(ls.modified == std::vector<std::string>{"i", "z"});
    }

    SECTION("plain programs summarize without any tableau") {
        WhileAst ast = loadProgram("sum_plain.whl");
        Conversion conv = convert(ast);
        auto loops = summarizeLoops(conv);
        REQUIRE(loops.size() == 1);
        CHECK(loops[0].header == "state3");
        REQUIRE(loops[0].cycles.size() == 1);
        CHECK(loops[0].cycles[0].path == std::vector<std::string>{"r3", "r4", "r5", "r6"});
        CHECK(showTerm(loops[0].cycles[0].guard) == "x > i");
    }

    SECTION("loop-free programs have no summaries") {
        WhileAst ast = parseProgram("vars x;\nx := x + 1;\n");
        CHECK(summarizeLoops(convert(ast)).empty());
    }
}

TEST_CASE("ranking verification on the sum loop") {
    SolverFacade solver;
    WhileAst ast = loadProgram("sum.whl");
    Conversion conv = conversionFor(ast);
    auto loops = summarizeLoops(conv);
    REQUIRE(loops.size() == 1);

    SECTION("x - i is bounded and decreasing") {
        auto cert = verifyRank(loops[0], mkOp("-", {iv("x"), iv("i")}), solver);
        CHECK(cert.verified);
        REQUIRE(cert.checks.size() == 1);
        CHECK(cert.checks[0] == "cycle r9,r12,r14,r16: bounded Valid, decreasing Valid");
        CHECK(cert.detail == "bounded and decreasing on every cycle");
    }

    SECTION("i alone fails") {
        auto cert = verifyRank(loops[0], iv("i"), solver);
        CHECK_FALSE(cert.verified);
        CHECK(cert.detail.find("not established") != std::string::npos);
    }

    SECTION("a constant is bounded but never decreases") {
        auto cert = verifyRank(loops[0], mkIntVal(5), solver);
        CHECK_FALSE(cert.verified);
        CHECK(cert.detail.find("decrease not established") == 0);
    }

    SECTION("z is not even bounded") {
        auto cert = verifyRank(loops[0], mkOp("-", {mkIntVal(0), iv("z")}), solver);
        CHECK_FALSE(cert.verified);
    }
}

TEST_CASE("the x != i variant defeats every rank and really diverges") {
    SolverFacade solver;
    WhileAst ast = loadProgram("sum_neq.whl");
    Conversion conv = conversionFor(ast);
    auto loops = summarizeLoops(conv);
    REQUIRE(loops.size() == 1);
    CHECK(showTerm(loops[0].cycles[0].guard) == "x != i");

    auto cert = verifyRank(loops[0], mkOp("-", {iv("x"), iv("i")}), solver);
    CHECK_FALSE(cert.verified);

    CHECK_FALSE(searchRank(loops[0], conv.map.vars, solver).has_value());

    // Overshooting the bound loops forever: run the machine from the header
    // with i already past x.
    RunResult run = interpret(ast, {{"x", 0}, {"i", 1}, {"z", 0}}, 500, loops[0].line);
    CHECK(run.status == RunStatus::OutOfFuel);
}

TEST_CASE("rank search") {
    SolverFacade solver;

    SECTION("enumeration finds x - i for sum") {
        WhileAst ast = loadProgram("sum.whl");
        Conversion conv = conversionFor(ast);
        auto loops = summarizeLoops(conv);
        auto ch = searchRank(loops[0], conv.map.vars, solver);
        REQUIRE(ch.has_value());
        CHECK(showTerm(ch->rank) == "x - i");
        CHECK_FALSE(ch->rank2);
        CHECK(ch->origin == "search");
        // whatever the search returns must re-verify from scratch
        SolverFacade fresh;
        CHECK(verifyRank(loops[0], ch->rank, fresh, ch->rank2).verified);
    }

    SECTION("the annotated rank wins over enumeration") {
        WhileAst ast = loadProgram("sum_rank.whl");
        Conversion conv = conversionFor(ast);
        TerminationReport rep = certifyTermination(conv, ast, solver);
        REQUIRE(rep.certs.size() == 1);
        CHECK(rep.certs[0].verified);
        CHECK(rep.certs[0].origin == "annotated");
        CHECK(showTerm(rep.certs[0].rank) == "x - i + 1");
    }

    SECTION("a guard-true identity loop admits no certificate") {
        WhileAst ast = parseProgram(
            "vars x;\n@ true\nwhile @ true (true) {\n@ true\nskip;\n@ true\n}\n@ true\n");
        Conversion conv = convert(ast);
        auto loops = summarizeLoops(conv);
        REQUIRE(loops.size() == 1);
        CHECK_FALSE(searchRank(loops[0], conv.map.vars, solver).has_value());
    }
}

TEST_CASE("nested loops certify inner-first with a havocked meta-step") {
    SolverFacade solver;
    WhileAst ast = loadProgram("nested.whl");
    Conversion conv = conversionFor(ast);

    auto loops = summarizeLoops(conv);
    REQUIRE(loops.size() == 2);
    CHECK(loops[0].header == "state2");
    CHECK(loops[1].header == "state8");

    REQUIRE(loops[1].cycles.size() == 1);
    CHECK(loops[1].cycles[0].path == std::vector<std::string>{"r8", "r11", "r13"});
    CHECK(showTerm(loops[1].cycles[0].guard) == "n > i");
    CHECK(loops[1].modified == std::vector<std::string>{"i"});

    // The outer cycle crosses the inner loop once: i is havocked, the inner
    // exit constraint is assumed, and n still ticks down by one.
    REQUIRE(loops[0].cycles.size() == 1);
    const LoopCycle& oc = loops[0].cycles[0];
    CHECK(oc.path == std::vector<std::string>{"r2", "r5", "r8x", "r16", "r18"});
    CHECK(showTerm(oc.guard) == "n > 0 && !(n > _w1)");
    CHECK((*oc.update.lookup("i"))->isVar);
    CHECK((*oc.update.lookup("i"))->name == "_w1");
    CHECK(showTerm(*oc.update.lookup("n")) == "n - 1");

    TerminationReport rep = certifyTermination(conv, ast, solver);
    REQUIRE(rep.allCertified());
    CHECK(showTerm(rep.certs[0].rank) == "n");
    CHECK(showTerm(rep.certs[1].rank) == "n - i");

    auto out = totalCorrectness(ast, solver);
    CHECK(out.verdict == Verdict::Proved);
    CHECK(out.steps == 18);
}

TEST_CASE("lifting the certificate to the full rule set") {
    SolverFacade solver;
    WhileAst ast = loadProgram("sum.whl");
    Conversion conv = conversionFor(ast);
    TransformResult tr = transformTableau(conv, ast, solver);
    REQUIRE(tr.ok);
    TerminationReport rep = certifyTermination(conv, ast, solver);
    REQUIRE(rep.allCertified());

    SECTION("converted rules, check rules, and hypotheses lift") {
        LiftResult lift = liftTermination(rep, conv.sys, tr.process.hyps);
        CHECK(lift.terminating);
        CHECK_FALSE(lift.justification.empty());
    }

    SECTION("a hypothesis that rewrites chk to chk is refused") {
        std::vector<ConstrainedRule> hyps = tr.process.hyps;
        const FunSym* chk = conv.sys.findSymbol("chk");
        REQUIRE(chk != nullptr);
        Term st = mkApp(*conv.sys.findSymbol("state9"), {iv("x"), iv("i"), iv("z")});
        hyps.push_back({mkApp(*chk, {st}), mkApp(*chk, {st}), mkBoolVal(true), "Hbad"});
        LiftResult lift = liftTermination(rep, conv.sys, hyps);
        CHECK_FALSE(lift.terminating);
        CHECK(lift.justification == "hypothesis Hbad: right side is not a value");
    }

    SECTION("no certificate, no terminating verdict") {
        TerminationReport bare;
        bare.loops = rep.loops;
        LiftResult lift = liftTermination(bare, conv.sys, tr.process.hyps);
        CHECK_FALSE(lift.terminating);
        CHECK(lift.justification.find("missing ranking certificate") == 0);

        TerminationReport unverified = rep;
        unverified.certs[0].verified = false;
        CHECK_FALSE(liftTermination(unverified, conv.sys, tr.process.hyps).terminating);
    }
}

TEST_CASE("total-correctness verdicts") {
    SolverFacade solver;

    SECTION("sum is proved outright") {
        auto out = totalCorrectness(loadProgram("sum.whl"), solver);
        CHECK(out.verdict == Verdict::Proved);
        CHECK(out.stage == "proof");
        CHECK(out.steps == 15);
        CHECK(out.lift.terminating);
        REQUIRE(out.termination.certs.size() == 1);
        CHECK(showTerm(out.termination.certs[0].rank) == "x - i");

        nlohmann::json j = correctnessJson(out);
        CHECK(j["verdict"] == "Proved");
        CHECK(j["terminating"] == true);
        CHECK(j["steps"] == 15);
        CHECK(j["trace"]["closed"] == true);
    }

    SECTION("the x != i variant stops at termination") {
        auto out = totalCorrectness(loadProgram("sum_neq.whl"), solver);
        CHECK(out.verdict == Verdict::Unknown);
        CHECK(out.stage == "termination");
        CHECK(out.message.find("missing ranking certificate") == 0);
        CHECK(out.steps == 15);  // the inference sequence itself closed
    }

    SECTION("a broken postcondition is a tableau failure") {
        std::string src = readFile(std::string(PROGRAMS_DIR) + "/sum.whl");
        auto at = src.rfind("@ z = x * (x + 1) / 2");
        REQUIRE(at != std::string::npos);
        src.replace(at, std::string("@ z = x * (x + 1) / 2").size(), "@ z = x");
        auto out = totalCorrectness(parseProgram(src), solver);
        CHECK(out.verdict == Verdict::TableauInvalid);
        CHECK(out.stage == "tableau");
        CHECK(out.message.find("the tableau does not hold") == 0);
        CHECK(correctnessJson(out)["verdict"] == "TableauInvalid");
    }
}

TEST_CASE("certified programs halt within their rank budget") {
    // The rank value at loop entry bounds the passes, and the interpreter
    // charges at most the loop extent per pass; nesting multiplies budgets.
    std::mt19937 rng(20260818);
    std::uniform_int_distribution<int> pick(-10, 10);

    SECTION("sum variants") {
        for (const char* name : {"sum.whl", "sum_rank.whl"}) {
            WhileAst ast = loadProgram(name);
            for (int trial = 0; trial < 200; ++trial) {
                Int x = pick(rng), i = pick(rng), z = pick(rng);
                long entryRank = x > 0 ? long(x) : 0;  // i, z are reset before the loop
                long fuel = 19 + 4 * (entryRank + 1);
                RunResult run = interpret(ast, {{"x", x}, {"i", i}, {"z", z}}, fuel);
                REQUIRE(run.status == RunStatus::Halted);
                if (x >= 0) CHECK(run.theta["z"] == x * (x + 1) / 2);
            }
        }
    }

    SECTION("nested") {
        WhileAst ast = loadProgram("nested.whl");
        for (int trial = 0; trial < 200; ++trial) {
            Int n = pick(rng), i = pick(rng);
            long outer = n > 0 ? long(n) : 0;
            long fuel = 21 * (outer + 2) * (outer + 2);
            RunResult run = interpret(ast, {{"n", n}, {"i", i}}, fuel);
            REQUIRE(run.status == RunStatus::Halted);
            CHECK(run.theta["n"] == (n > 0 ? Int(0) : n));
        }
    }
}

TEST_CASE("certificate JSON carries the full story") {
    SolverFacade solver;
    WhileAst ast = loadProgram("sum.whl");
    Conversion conv = conversionFor(ast);
    TerminationReport rep = certifyTermination(conv, ast, solver);
    nlohmann::json j = certificateJson(rep);
    REQUIRE(j["loops"].size() == 1);
    const auto& loop = j["loops"][0];
    CHECK(loop["header"] == "state9");
    CHECK(loop["rank"] == "x - i");
    CHECK(loop["verified"] == true);
    CHECK(loop["origin"] == "search");
    REQUIRE(loop["cycles"].size() == 1);
    CHECK(loop["cycles"][0]["path"] == nlohmann::json({"r9", "r12", "r14", "r16"}));
    CHECK(loop["cycles"][0]["guard"] == "x > i");
    CHECK(loop["cycles"][0]["update"]["i"] == "i + 1");
    CHECK(loop["cycles"][0]["update"]["z"] == "z + (i + 1)");
}
