#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "hoare2ri/hoare2ri.hpp"

using namespace hoare2ri;

namespace {

std::string readFile(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string fixture(const std::string& name) {
    return readFile(std::string(PROGRAMS_DIR) + "/" + name);
}

nlohmann::json stripMs(nlohmann::json j) {
    for (auto& s : j["stages"]) s.erase("ms");
    return j;
}

}  // namespace

TEST_CASE("the prove report on sum matches the frozen golden") {
    SolverFacade solver{SolverOptions{}};
    PipelineReport rep = runProve(fixture("sum.whl"), solver, {});
    nlohmann::json live = stripMs(pipelineJson(rep));
    nlohmann::json golden = nlohmann::json::parse(readFile(std::string(GOLDEN_DIR) + "/sum_prove.json"));
    CHECK(live == golden);
}

TEST_CASE("converted rules match the frozen text") {
    SolverFacade solver{SolverOptions{}};
    PipelineReport rep = runProve(fixture("sum.whl"), solver, {});
    CHECK(rep.rules == readFile(std::string(GOLDEN_DIR) + "/sum_rules.txt"));
    CHECK(rep.hypotheses == std::vector<std::string>{"A6"});
}

TEST_CASE("runProve agrees with totalCorrectness on every fixture") {
    const char* names[] = {"sum.whl",     "sum_rank.whl", "sum_neq.whl",
                           "nested.whl",  "abs_if.whl",   "sum_plain.whl"};
    for (const char* name : names) {
        INFO(name);
        std::string src = fixture(name);
        SolverFacade s1{SolverOptions{}};
        PipelineReport rep = runProve(src, s1, {});
        SolverFacade s2{SolverOptions{}};
        CorrectnessOutcome out = totalCorrectness(parseProgram(src), s2);
        CHECK(rep.verdict == out.verdict);
        if (rep.verdict == Verdict::Proved) CHECK(rep.steps == out.steps);
        CHECK(s1.stats().unconfirmedModels == 0);
    }
}

TEST_CASE("expression parsing round-trips and rejects garbage") {
    CHECK(showTerm(parseIntExpression("x - i + 1")) == "x - i + 1");
    CHECK(showTerm(parseIntExpression("2 * (a + b)")) == "2 * (a + b)");
    CHECK(parseIntExpression("7")->num == Int(7));
    CHECK_THROWS_AS(parseIntExpression("1 +"), ParseError);
    CHECK_THROWS_AS(parseIntExpression(""), ParseError);
}

TEST_CASE("a rank override becomes the annotated certificate") {
    SolverFacade solver{SolverOptions{}};
    ProveOptions opts;
    opts.rankOverride = parseIntExpression("x - i + 1");
    PipelineReport rep = runProve(fixture("sum.whl"), solver, opts);
    REQUIRE(rep.verdict == Verdict::Proved);
    auto& loop = rep.certificates["loops"][0];
    CHECK(loop["origin"] == "annotated");
    CHECK(loop["rank"] == "x - i + 1");
}

TEST_CASE("parse failures stop at the parse stage") {
    SolverFacade solver{SolverOptions{}};
    PipelineReport rep = runProve("vars x;\nx := ;\n", solver, {});
    CHECK(rep.verdict == Verdict::Unknown);
    REQUIRE(rep.stages.size() == 1);
    CHECK(rep.stages[0].name == "parse");
    CHECK_FALSE(rep.stages[0].ok);
    CHECK(rep.message.rfind("parse error", 0) == 0);
    CHECK_FALSE(rep.ran("parse"));
}

TEST_CASE("a broken postcondition stops at the tableau stage") {
    std::string src = fixture("sum.whl");
    auto at = src.rfind("@ z = x * (x + 1) / 2");
    REQUIRE(at != std::string::npos);
    src.replace(at, std::string("@ z = x * (x + 1) / 2").size(), "@ z = x");
    SolverFacade solver{SolverOptions{}};
    PipelineReport rep = runProve(src, solver, {});
    CHECK(rep.verdict == Verdict::TableauInvalid);
    REQUIRE_FALSE(rep.stages.empty());
    CHECK(rep.stages.back().name == "tableau");
    CHECK_FALSE(rep.stages.back().ok);
    CHECK_FALSE(rep.ran("transform"));
    CHECK(rep.message.rfind("the tableau does not hold", 0) == 0);
}

TEST_CASE("a plain program is rejected as not a tableau") {
    SolverFacade solver{SolverOptions{}};
    PipelineReport rep = runProve(fixture("sum_plain.whl"), solver, {});
    CHECK(rep.verdict == Verdict::TableauInvalid);
    CHECK(rep.message.rfind("not a proof tableau", 0) == 0);
}

TEST_CASE("the sampler seed does not change the certificate on sum") {
    ProveOptions a, b;
    b.seed = 1;
    SolverFacade s1{SolverOptions{}}, s2{SolverOptions{}};
    PipelineReport ra = runProve(fixture("sum.whl"), s1, a);
    PipelineReport rb = runProve(fixture("sum.whl"), s2, b);
    CHECK(ra.certificates == rb.certificates);
    CHECK(ra.certificates["loops"][0]["rank"] == "x - i");
}
