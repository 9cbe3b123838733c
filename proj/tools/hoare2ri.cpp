#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "hoare2ri/hoare2ri.hpp"

using namespace hoare2ri;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kUnknown = 2;
constexpr int kUsage = 3;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Valuation parseInput(const WhileAst& ast, const std::string& text) {
    Valuation theta;
    for (auto& v : ast.vars) theta[v] = 0;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos) throw std::runtime_error("expected name=value in '" + item + "'");
        theta[item.substr(0, eq)] = Int(item.substr(eq + 1));
    }
    return theta;
}

int verdictExit(Verdict v) {
    switch (v) {
        case Verdict::Proved: return kOk;
        case Verdict::TableauInvalid: return kInvalid;
        default: return kUnknown;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hoare-logic proof tableaux as rewriting-induction sequences"};
    app.require_subcommand(1);

    std::string solverCmd;
    int timeoutMs = 10000;
    unsigned seed = ProveOptions{}.seed;
    app.add_option("--solver-cmd", solverCmd, "external SMT-LIB2 solver command");
    app.add_option("--timeout-ms", timeoutMs, "external solver timeout per query");
    app.add_option("--seed", seed, "seed for the rank-search sampler");

    std::string file, input, termText, rankText;
    long fuel = 100000;
    int startLine = 0;
    bool emitLctrs = false, emitProof = false, narrate = false;

    CLI::App* cParse = app.add_subcommand("parse", "parse a program and echo it back");
    cParse->add_option("file", file)->required();

    CLI::App* cInterp = app.add_subcommand("interpret", "run a program on a valuation");
    cInterp->add_option("file", file)->required();
    cInterp->add_option("--input", input, "comma-separated name=value pairs; unset vars are 0");
    cInterp->add_option("--fuel", fuel, "step budget");
    cInterp->add_option("--start", startLine, "start at this line");

    CLI::App* cConvert = app.add_subcommand("convert", "compile a program to rewrite rules");
    cConvert->add_option("file", file)->required();
    cConvert->add_flag("--emit-lctrs", emitLctrs, "print the rules");

    CLI::App* cCheck = app.add_subcommand("check-tableau", "check the assertion tableau");
    cCheck->add_option("file", file)->required();

    CLI::App* cTrans = app.add_subcommand("transform", "turn a valid tableau into an inference sequence");
    cTrans->add_option("file", file)->required();
    cTrans->add_flag("--emit-proof", emitProof, "print the trace as JSON");
    cTrans->add_flag("--narrate", narrate, "explain the steps");

    CLI::App* cProve = app.add_subcommand("prove", "establish total correctness end to end");
    cProve->add_option("file", file)->required();
    cProve->add_option("--rank", rankText, "ranking expression overriding @rank annotations");
    cProve->add_flag("--emit-lctrs", emitLctrs, "print the converted rules");
    cProve->add_flag("--emit-proof", emitProof, "print the full report as JSON");
    cProve->add_flag("--narrate", narrate, "explain the inference steps");

    CLI::App* cRewrite = app.add_subcommand("rewrite", "reduce a ground term under an .lctrs file");
    cRewrite->add_option("file", file)->required();
    cRewrite->add_option("--term", termText, "ground term to reduce")->required();
    cRewrite->add_option("--fuel", fuel, "step budget");

    CLI11_PARSE(app, argc, argv);

    SolverOptions sopts;
    if (const char* env = std::getenv("HOARE2RI_SOLVER")) sopts.externalCmd = env;
    if (!solverCmd.empty()) sopts.externalCmd = solverCmd;
    sopts.timeoutMs = timeoutMs;
    SolverFacade solver(sopts);

    try {
        if (cParse->parsed()) {
            WhileAst ast = parseProgram(slurp(file));
            std::cout << showProgram(ast);
            std::cerr << "parsed: " << ast.lines.size() << " lines\n";
            return kOk;
        }

        if (cInterp->parsed()) {
            WhileAst ast = parseProgram(slurp(file));
            RunResult run = interpret(ast, parseInput(ast, input), fuel, startLine);
            if (run.status == RunStatus::MissingVar) {
                std::cerr << "error: undefined variable reached at line " << run.line << "\n";
                return kUsage;
            }
            if (run.status == RunStatus::OutOfFuel) {
                std::cout << "out of fuel after " << run.steps << " steps at line " << run.line << "\n";
                return kUnknown;
            }
            std::string sep;
            for (auto& v : ast.vars) {
                std::cout << sep << v << "=" << run.theta[v];
                sep = ",";
            }
            std::cout << "\n";
            return kOk;
        }

        if (cConvert->parsed()) {
            WhileAst ast = parseProgram(slurp(file));
            Conversion conv = convert(ast);
            if (emitLctrs)
                std::cout << showLctrs(conv.sys);
            else
                std::cout << conv.sys.rules.size() << " rules over states "
                          << conv.map.stateName(conv.map.startLine) << ".."
                          << conv.map.stateName(conv.map.endLine) << "\n";
            return kOk;
        }

        if (cCheck->parsed()) {
            WhileAst ast = parseProgram(slurp(file));
            TableauReport rep = checkTableau(ast, solver);
            for (auto& e : rep.shapeErrors) std::cout << "shape: " << e << "\n";
            bool anyInvalid = !rep.shapeErrors.empty(), anyUnknown = false;
            for (auto& o : rep.obligations) {
                std::cout << "line " << o.line << " " << o.kind << ": "
                          << (o.verdict == Validity::Valid ? "holds"
                              : o.verdict == Validity::Invalid ? "fails" : "undecided")
                          << (o.detail.empty() ? "" : " (" + o.detail + ")") << "\n";
                anyInvalid = anyInvalid || o.verdict == Validity::Invalid;
                anyUnknown = anyUnknown || o.verdict == Validity::Unknown;
            }
            std::cout << (rep.valid() ? "tableau holds" : "tableau does not hold") << "\n";
            return rep.valid() ? kOk : anyInvalid ? kInvalid : kUnknown;
        }

        if (cTrans->parsed()) {
            WhileAst ast = parseProgram(slurp(file));
            Conversion conv = conversionFor(ast);
            TransformResult tr = transformTableau(conv, ast, solver, narrate);
            for (auto& line : tr.narration) std::cout << line << "\n";
            if (!tr.ok) {
                std::cerr << tr.message << "\n";
                return tr.message.rfind("the tableau does not hold", 0) == 0 ? kInvalid : kUnknown;
            }
            if (emitProof)
                std::cout << traceJson(tr.process).dump(2) << "\n";
            else
                std::cout << tr.message << "; hypotheses:";
            if (!emitProof) {
                for (auto& h : tr.process.hyps) std::cout << " " << h.label;
                std::cout << "\n";
            }
            return kOk;
        }

        if (cProve->parsed()) {
            if (sopts.externalCmd.empty())
                std::cerr << "note: no external solver configured; using the builtin procedures\n";
            ProveOptions opts;
            opts.narrate = narrate;
            opts.seed = seed;
            if (!rankText.empty()) opts.rankOverride = parseIntExpression(rankText);
            PipelineReport rep = runProve(slurp(file), solver, opts);
            if (emitProof) {
                std::cout << pipelineJson(rep).dump(2) << "\n";
            } else {
                for (auto& s : rep.stages)
                    std::cout << s.name << ": " << (s.ok ? "ok" : "failed") << " - " << s.detail
                              << "\n";
                for (auto& line : rep.narration) std::cout << line << "\n";
                if (emitLctrs) std::cout << rep.rules;
                std::cout << verdictName(rep.verdict) << ": " << rep.message << "\n";
                if (!rep.hypotheses.empty()) {
                    std::cout << "H = {";
                    std::string sep;
                    for (auto& h : rep.hypotheses) {
                        std::cout << sep << h;
                        sep = ", ";
                    }
                    std::cout << "}\n";
                }
            }
            if (!rep.ran("parse")) return kUsage;
            return verdictExit(rep.verdict);
        }

        if (cRewrite->parsed()) {
            Lctrs sys = parseLctrs(slurp(file));
            Term t = parseTermFor(sys, termText);
            std::cout << showTerm(t) << "\n";
            long left = fuel;
            GroundRunResult last;
            while (left > 0) {
                GroundRunResult one = groundRewriteLI(sys, t, 1);
                if (one.steps == 0) break;
                t = one.term;
                --left;
                std::cout << "  -> " << showTerm(t) << "   [" << one.trace[0] << "]\n";
            }
            GroundRunResult probe = groundRewriteLI(sys, t, 1);
            if (probe.steps != 0) {
                std::cout << "out of fuel\n";
                return kUnknown;
            }
            std::cout << "normal form after " << (fuel - left) << " steps\n";
            return kOk;
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }

    std::cerr << "no command given\n";
    return kUsage;
}
