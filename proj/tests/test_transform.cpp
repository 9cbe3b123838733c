#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "hoare2ri/transform.hpp"

using namespace hoare2ri;

namespace {

std::string readFile(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Fixture {
    WhileAst ast;
    Conversion conv;
    SolverFacade solver;

    explicit Fixture(const std::string& name)
        : ast(parseProgram(readFile(std::string(PROGRAMS_DIR) + "/" + name))),
          conv(conversionFor(ast)) {}
    Fixture(const std::string& source, int) : ast(parseProgram(source)), conv(conversionFor(ast)) {}
};

struct StepShape {
    std::string rule;
    std::string target;
    std::vector<std::string> produced;
};

// Random programs carrying their own valid tableaux: every command comes with
// assertions that track the exact effect, pins record constant assignments,
// and blocks restore the entry formula before control joins.
struct Scaffold {
    std::mt19937 rng;
    std::vector<std::string> lines;
    std::vector<std::string> F;
    std::map<std::string, long> pinned;

    explicit Scaffold(unsigned seed) : rng(seed) {}
    int pick(int n) { return int(rng() % unsigned(n)); }

    std::string f() const {
        std::string s;
        for (auto& c : F) s += (s.empty() ? "" : " && ") + c;
        return s;
    }
    void assertF() { lines.push_back("@ " + f()); }
    std::string guard() {
        switch (pick(3)) {
            case 0: return "x > 0";
            case 1: return "x >= 5";
            default: return "1 > x";
        }
    }

    void simple(const std::map<std::string, long>& outerPins) {
        std::vector<std::string> unpinned, bumpable;
        for (std::string v : {"y", "z"}) {
            bool mentioned = false;
            for (auto& c : F) mentioned = mentioned || c.find(v) != std::string::npos;
            if (!mentioned) unpinned.push_back(v);
        }
        for (auto& [v, c] : pinned)
            if (!outerPins.count(v)) bumpable.push_back(v);

        int kind = pick(3);
        if (kind == 1 && !unpinned.empty()) {
            std::string v = unpinned[size_t(pick(int(unpinned.size())))];
            long c = pick(6);
            lines.push_back(v + " := " + std::to_string(c) + ";");
            pinned[v] = c;
            F.push_back(v + " = " + std::to_string(c));
        } else if (kind == 2 && !bumpable.empty()) {
            std::string v = bumpable[size_t(pick(int(bumpable.size())))];
            long old = pinned[v];
            long k = 1 + pick(3);
            bool down = pick(2) == 0 && old - k >= 0;
            long now = down ? old - k : old + k;
            lines.push_back(v + " := " + v + (down ? " - " : " + ") + std::to_string(k) + ";");
            for (auto& c : F)
                if (c == v + " = " + std::to_string(old)) c = v + " = " + std::to_string(now);
            pinned[v] = now;
        } else {
            lines.push_back("skip;");
        }
        assertF();
    }

    void body(const std::string& extra) {
        auto base = F;
        auto basePins = pinned;
        F.push_back(extra);
        int n = pick(3);
        for (int i = 0; i < n; ++i) simple(basePins);
        F = base;
        pinned = basePins;
        assertF();  // drops the guard and any inner pins
    }

    void ifBlock() {
        auto base = F;
        auto basePins = pinned;
        std::string g = guard();
        lines.push_back("if (" + g + ") {");
        lines.push_back("@ " + f() + " && " + g);
        body(g);
        lines.push_back("} else {");
        lines.push_back("@ " + f() + " && !(" + g + ")");
        body("!(" + g + ")");
        lines.push_back("}");
        F = base;
        pinned = basePins;
        assertF();
    }

    void whileBlock() {
        std::string g = guard();
        lines.push_back("while (" + g + ") {");
        lines.push_back("@ " + f() + " && " + g);
        body(g);
        lines.push_back("}");
        F.push_back("!(" + g + ")");
        assertF();
    }

    std::string program() {
        F = {"x >= 0"};
        assertF();
        int blocks = 2 + pick(3);
        for (int i = 0; i < blocks; ++i) {
            switch (pick(4)) {
                case 0: ifBlock(); break;
                case 1: whileBlock(); break;
                default: simple({}); break;
            }
        }
        std::string out = "vars x, y, z;\n";
        for (auto& l : lines) out += l + "\n";
        return out;
    }
};

}  // namespace

TEST_CASE("the summation tableau maps to the fifteen-step run") {
    Fixture fx("sum.whl");
    TransformResult tr = transformTableau(fx.conv, fx.ast, fx.solver);
    INFO(tr.message);
    REQUIRE(tr.ok);
    REQUIRE(tr.process.done());
    CHECK(tr.message == "closed in 15 steps");

    std::vector<StepShape> want = {
        {"Generalization", "A1", {"A2"}},
        {"Simplification", "A2", {"A3"}},
        {"Generalization", "A3", {"A4"}},
        {"Simplification", "A4", {"A5"}},
        {"Generalization", "A5", {"A6"}},
        {"Expansion", "A6", {"A7", "A11"}},
        {"Generalization", "A7", {"A8"}},
        {"Simplification", "A8", {"A9"}},
        {"Simplification", "A9", {"A10"}},
        {"Simplification", "A10", {"B1"}},
        {"Simplification", "B1", {"B2"}},
        {"Deletion", "B2", {}},
        {"Generalization", "A11", {"A12"}},
        {"Simplification", "A12", {"B3"}},
        {"Deletion", "B3", {}},
    };
    REQUIRE(tr.process.steps.size() == want.size());
    for (size_t i = 0; i < want.size(); ++i) {
        INFO("step " << i + 1);
        CHECK(tr.process.steps[i].rule == want[i].rule);
        CHECK(tr.process.steps[i].target == want[i].target);
        CHECK(tr.process.steps[i].produced == want[i].produced);
    }
    CHECK(tr.process.steps[1].ruleId == "r3");
    CHECK(tr.process.steps[5].hypothesis == "A6");
    CHECK(tr.process.steps[7].ruleId == "r12");
    CHECK(tr.process.steps[7].note == "presented in tableau form");
    CHECK(tr.process.steps[10].ruleId == "A6");
    CHECK(tr.process.steps[13].ruleId == "check_t");
    REQUIRE(tr.process.hyps.size() == 1);
    CHECK(tr.process.hyps[0].label == "A6");

    SolverFacade solver2;
    ReplayResult rep = replayTrace(fx.conv.sys, solver2, tr.process.goals, traceJson(tr.process));
    INFO(rep.message);
    CHECK(rep.ok);
}

TEST_CASE("the conditional tableau splits, settles, and joins") {
    Fixture fx("abs_if.whl");
    TransformResult tr = transformTableau(fx.conv, fx.ast, fx.solver);
    INFO(tr.message);
    REQUIRE(tr.ok);
    REQUIRE(tr.process.done());
    CHECK(tr.process.hyps.empty());
    REQUIRE(tr.process.steps.size() == 13);

    CHECK(tr.process.steps[0].rule == "CaseSplitting");
    CHECK(tr.process.steps[0].produced == std::vector<std::string>{"A2", "A5"});
    CHECK(tr.process.steps[4].ruleId == "r5");
    CHECK(tr.process.steps[4].note ==
          "tableau form not confirmed equivalent; keeping the computed form");
    CHECK(tr.process.steps[5].rule == "Generalization");
    CHECK(tr.process.steps[5].target == "A4");
    CHECK(tr.process.steps[5].produced == std::vector<std::string>{"A4"});

    const InferenceStep& join = tr.process.steps[10];
    CHECK(join.ruleId == "r12");
    CHECK(join.produced == std::vector<std::string>{"A8"});
    CHECK(join.note.find("merged into A8") != std::string::npos);

    SolverFacade solver2;
    ReplayResult rep = replayTrace(fx.conv.sys, solver2, tr.process.goals, traceJson(tr.process));
    INFO(rep.message);
    CHECK(rep.ok);
}

TEST_CASE("narration walks through the run") {
    Fixture fx("sum.whl");
    TransformResult tr = transformTableau(fx.conv, fx.ast, fx.solver, true);
    REQUIRE(tr.ok);
    REQUIRE(tr.narration.size() == 16);  // one opener plus one line per step
    bool hyp = false, check = false;
    for (auto& l : tr.narration) {
        hyp = hyp || l.find("joins the hypotheses") != std::string::npos;
        check = check || l.find("check_t") != std::string::npos;
    }
    CHECK(hyp);
    CHECK(check);
}

TEST_CASE("an invalid tableau is refused before any step") {
    std::string src = readFile(std::string(PROGRAMS_DIR) + "/sum.whl");
    size_t at = src.rfind("@ z = x * (x + 1) / 2");
    REQUIRE(at != std::string::npos);
    src.replace(at, std::string("@ z = x * (x + 1) / 2").size(), "@ z = x");
    Fixture fx(src, 0);
    TransformResult tr = transformTableau(fx.conv, fx.ast, fx.solver);
    CHECK_FALSE(tr.ok);
    CHECK(tr.message.find("does not hold") != std::string::npos);
    CHECK(tr.process.steps.empty());
}

TEST_CASE("randomly scaffolded tableaux transform and replay") {
    for (unsigned trial = 0; trial < 25; ++trial) {
        Scaffold sc(20240818 + trial);
        std::string src = sc.program();
        INFO("trial " << trial << ":\n" << src);

        Fixture fx(src, 0);
        TableauReport rep = checkTableau(fx.ast, fx.solver);
        for (auto& e : rep.shapeErrors) INFO("shape: " << e);
        REQUIRE(rep.valid());

        TransformResult tr = transformTableau(fx.conv, fx.ast, fx.solver);
        INFO(tr.message);
        REQUIRE(tr.ok);
        REQUIRE(tr.process.done());

        SolverFacade solver2;
        ReplayResult rr =
            replayTrace(fx.conv.sys, solver2, tr.process.goals, traceJson(tr.process));
        INFO(rr.message);
        REQUIRE(rr.ok);
    }
}
