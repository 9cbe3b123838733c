#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <map>
#include <sstream>

#include "hoare2ri/tableau.hpp"

using namespace hoare2ri;

namespace {

std::string readFile(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::map<std::string, int> kindCounts(const TableauReport& rep) {
    std::map<std::string, int> n;
    for (auto& o : rep.obligations) ++n[o.kind];
    return n;
}

// Flips the first comparison operator of a line to its complement.
std::string flipFirstComparison(const std::string& line) {
    static const std::vector<std::pair<std::string, std::string>> twoChar{
        {">=", "<"}, {"<=", ">"}, {"!=", "="}};
    static const std::vector<std::pair<std::string, std::string>> oneChar{
        {"=", "!="}, {">", "<="}, {"<", ">="}};
    for (size_t i = 0; i < line.size(); ++i) {
        for (auto& [op, repl] : twoChar)
            if (line.compare(i, op.size(), op) == 0)
                return line.substr(0, i) + repl + line.substr(i + op.size());
        for (auto& [op, repl] : oneChar)
            if (line.compare(i, op.size(), op) == 0)
                return line.substr(0, i) + repl + line.substr(i + op.size());
    }
    return line;
}

}  // namespace

TEST_CASE("the summation tableau discharges all twelve obligations") {
    WhileAst ast = parseProgram(readFile(std::string(PROGRAMS_DIR) + "/sum.whl"));
    SolverFacade solver;
    TableauReport rep = checkTableau(ast, solver);

    CHECK(rep.shapeErrors.empty());
    CHECK(rep.valid());
    CHECK(rep.obligations.size() == 12);

    auto n = kindCounts(rep);
    CHECK(n["implication"] == 5);
    CHECK(n["assignment"] == 4);
    CHECK(n["loop-entry"] == 1);
    CHECK(n["loop-body"] == 1);
    CHECK(n["loop-exit"] == 1);

    int solverUsed = 0;
    for (auto& o : rep.obligations) solverUsed += o.usedSolver ? 1 : 0;
    CHECK(solverUsed == 5);

    for (auto& o : rep.obligations) {
        INFO(o.kind << " at line " << o.line << ": " << o.detail);
        CHECK(o.verdict == Validity::Valid);
        if (o.kind == "assignment" && o.line == 12)
            CHECK(o.detail == "matched as polynomial atoms");
        if (o.kind == "assignment" && o.line != 12) CHECK(o.detail.empty());
    }

    nlohmann::json j = tableauReportJson(rep);
    CHECK(j["valid"] == true);
    CHECK(j["obligations"].size() == 12);
    CHECK(j["obligations"][0]["verdict"] == "valid");
}

TEST_CASE("the branching tableau discharges entry and join conditions") {
    WhileAst ast = parseProgram(readFile(std::string(PROGRAMS_DIR) + "/abs_if.whl"));
    SolverFacade solver;
    TableauReport rep = checkTableau(ast, solver);

    CHECK(rep.valid());
    CHECK(rep.obligations.size() == 6);
    auto n = kindCounts(rep);
    CHECK(n["implication"] == 2);
    CHECK(n["assignment"] == 2);
    CHECK(n["branch-entry"] == 1);
    CHECK(n["branch-join"] == 1);
}

TEST_CASE("a loop without an inline invariant takes it from the assertion above") {
    WhileAst ast = parseProgram(
        "@ x >= 0\n"
        "while (x > 0) {\n"
        "@ x >= 0 && x > 0\n"
        "@ x - 1 >= 0\n"
        "x := x - 1;\n"
        "@ x >= 0\n"
        "}\n"
        "@ x >= 0 && !(x > 0)\n");
    SolverFacade solver;
    TableauReport rep = checkTableau(ast, solver);

    CHECK(rep.valid());
    CHECK(rep.obligations.size() == 5);
    auto n = kindCounts(rep);
    CHECK(n["implication"] == 1);
    CHECK(n["assignment"] == 1);
    CHECK(n["loop-entry"] == 1);
    CHECK(n["loop-body"] == 1);
    CHECK(n["loop-exit"] == 1);
}

TEST_CASE("semantic equality falls back to the solver and is flagged") {
    WhileAst ast = parseProgram(
        "@ y >= 0 && y >= 0\n"
        "x := y;\n"
        "@ x >= 0\n");
    SolverFacade solver;
    TableauReport rep = checkTableau(ast, solver);

    REQUIRE(rep.obligations.size() == 1);
    CHECK(rep.valid());
    CHECK(rep.obligations[0].usedSolver);
    CHECK(rep.obligations[0].detail.substr(0, 7) == "matched");
}

TEST_CASE("commands without assertions between them are rejected as malformed") {
    WhileAst ast = parseProgram(
        "@ x >= 0\n"
        "x := x + 1;\n"
        "x := x + 2;\n"
        "@ x >= 3\n");
    SolverFacade solver;
    TableauReport rep = checkTableau(ast, solver);
    CHECK_FALSE(rep.valid());
    CHECK_FALSE(rep.shapeErrors.empty());
    CHECK(tableauReportJson(rep)["valid"] == false);
}

TEST_CASE("a program not ending in an assertion is rejected") {
    WhileAst ast = parseProgram(
        "@ x >= 0\n"
        "x := x + 1;\n");
    SolverFacade solver;
    CHECK_FALSE(checkTableau(ast, solver).valid());
}

TEST_CASE("an invalid implication carries a confirmed countermodel") {
    WhileAst ast = parseProgram(
        "@ x >= 0\n"
        "@ x >= 1\n"
        "skip;\n"
        "@ x >= 1\n");
    SolverFacade solver;
    TableauReport rep = checkTableau(ast, solver);

    CHECK_FALSE(rep.valid());
    REQUIRE(rep.obligations.size() == 2);
    CHECK(rep.obligations[0].kind == "implication");
    CHECK(rep.obligations[0].verdict == Validity::Invalid);
    CHECK(rep.obligations[0].detail.substr(0, 8) == "fails at");
    CHECK(rep.obligations[1].verdict == Validity::Valid);
}

TEST_CASE("flipping any annotation comparison invalidates the tableau") {
    std::istringstream in(readFile(std::string(PROGRAMS_DIR) + "/sum.whl"));
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(in, l)) lines.push_back(l);

    SolverFacade solver;
    int annotations = 0;
    for (size_t i = 0; i < lines.size(); ++i) {
        size_t at = lines[i].find_first_not_of(" \t");
        if (at == std::string::npos || lines[i][at] != '@') continue;
        ++annotations;

        std::vector<std::string> mutated = lines;
        mutated[i] = flipFirstComparison(lines[i]);
        REQUIRE(mutated[i] != lines[i]);
        std::string src;
        for (auto& s : mutated) src += s + "\n";

        INFO("mutated line " << i + 1 << ": " << mutated[i]);
        TableauReport rep = checkTableau(parseProgram(src), solver);
        CHECK_FALSE(rep.valid());
    }
    CHECK(annotations == 12);
}

TEST_CASE("the triple of a tableau strips annotations and keeps the ends") {
    WhileAst ast = parseProgram(readFile(std::string(PROGRAMS_DIR) + "/sum.whl"));
    HoareTriple t = hoareTriple(ast);

    CHECK(showTerm(t.pre) == "x >= 0");
    CHECK(showTerm(t.post) == "2 * z = x * (x + 1)");
    REQUIRE_FALSE(t.program.lines.empty());
    CHECK(t.program.lines[0].number == 3);
    const ProgLine* w = t.program.find(9);
    REQUIRE(w);
    CHECK(w->kind == LineKind::WhileOpen);
    CHECK(w->invariant == nullptr);
}
