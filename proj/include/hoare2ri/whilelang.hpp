#pragma once

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hoare2ri/textexpr.hpp"
#include "hoare2ri/theory.hpp"

namespace hoare2ri {

// ---------------------------------------------------------------------------
// Annotated while programs. Every source line is one statement or one
// assertion; lines are numbered densely from 1 and a blank end marker is
// appended after the last one. Assertions may use constant-denominator
// fractions, which are cleared atom by atom at parse time; inside program
// expressions `/` is Euclidean division.

enum class LineKind { Assign, Skip, IfOpen, ElseOpen, Close, WhileOpen, Assert, Blank };

struct ProgLine {
    int number = 0;
    LineKind kind = LineKind::Blank;
    std::string var;    // Assign target
    Term expr;          // Assign right side
    Term formula;       // Assert
    Term guard;         // IfOpen, WhileOpen
    Term invariant;     // WhileOpen, may be null on plain programs
    Term rank;          // WhileOpen, optional ranking hint
    int elseLine = 0;   // IfOpen
    int closeLine = 0;  // IfOpen, ElseOpen, WhileOpen
    int match = 0;      // Close: its opening line; ElseOpen: its if line
};

struct WhileAst {
    std::vector<ProgLine> lines;  // ascending numbers, Blank last
    std::vector<std::string> vars;
    bool hadVarsPragma = false;

    const ProgLine* find(int number) const {
        for (auto& l : lines)
            if (l.number == number) return &l;
        return nullptr;
    }
    int lastLine() const { return lines.empty() ? 0 : lines.back().number; }
};

namespace detail {

inline const std::set<std::string>& reservedWords() {
    static const std::set<std::string> w{"if",   "else", "while", "skip", "vars", "true",
                                         "false", "div",  "mod",   "exp",  "rank"};
    return w;
}

inline Term negated(const Term& t) {
    if (isIntVal(t)) return mkIntVal(-*t->num);
    return mkOp("-", {mkIntVal(0), t});
}

// Program expressions: `/` is div, <= and < mirror to >= and >.
inline const ExprCtx& programCtx() {
    static const ExprCtx ctx = [] {
        ExprCtx c;
        c.resolve = [](const std::string& name, std::vector<Term>* args, const Token& tk) -> Term {
            if (args) {
                if (name == "div" || name == "mod" || name == "exp") {
                    if (args->size() != 2)
                        throw ParseError("'" + name + "' takes two arguments", tk.line, tk.col);
                    return mkOp(name, *args);
                }
                throw ParseError("unknown function '" + name + "'", tk.line, tk.col);
            }
            if (reservedWords().count(name))
                throw ParseError("'" + name + "' is a reserved word", tk.line, tk.col);
            return mkVar(name, sortInt);
        };
        c.apply = [](const std::string& op, std::vector<Term> args, const Token& tk) -> Term {
            try {
                if (op == "neg") return negated(args[0]);
                if (op == "/") return mkOp("div", std::move(args));
                if (op == "<=") return mkOp(">=", {args[1], args[0]});
                if (op == "<") return mkOp(">", {args[1], args[0]});
                return mkOp(op, std::move(args));
            } catch (const TermError& e) {
                throw ParseError(e.what(), tk.line, tk.col);
            }
        };
        return c;
    }();
    return ctx;
}

// Raw assertion trees keep `/` as a marker so whole atoms can be cleared.
inline const FunSym& fracSym() {
    static const FunSym f{"#frac", {sortInt, sortInt}, sortInt, SymKind::TermSym};
    return f;
}

inline const ExprCtx& assertionCtx() {
    static const ExprCtx ctx = [] {
        ExprCtx c = programCtx();
        c.apply = [](const std::string& op, std::vector<Term> args, const Token& tk) -> Term {
            try {
                if (op == "neg") return negated(args[0]);
                if (op == "/") return mkApp(fracSym(), std::move(args));
                if (op == "<=") return mkOp(">=", {args[1], args[0]});
                if (op == "<") return mkOp(">", {args[1], args[0]});
                return mkOp(op, std::move(args));
            } catch (const TermError& e) {
                throw ParseError(e.what(), tk.line, tk.col);
            }
        };
        return c;
    }();
    return ctx;
}

struct Frac {
    Term num;
    Int den;  // always a positive constant
};

inline Term scaleTerm(const Term& t, const Int& k) {
    if (k == 1) return t;
    if (isIntVal(t)) return mkIntVal(*t->num * k);
    return mkOp("*", {mkIntVal(k), t});
}

inline Frac clearFrac(const Term& t, int fileLine);

inline Term clearExact(const Term& t, const std::string& what, int fileLine) {
    Frac f = clearFrac(t, fileLine);
    if (f.den != 1)
        throw ParseError("arguments of " + what + " must not contain fractions", fileLine, 1);
    return f.num;
}

inline Frac clearFrac(const Term& t, int fileLine) {
    if (t->isVar || isValue(t)) return {t, 1};
    const std::string& op = t->name;
    if (op == "#frac") {
        Frac a = clearFrac(t->args[0], fileLine);
        Frac b = clearFrac(t->args[1], fileLine);
        if (!varsOf(b.num).empty())
            throw ParseError("denominators must be integer constants", fileLine, 1);
        Int c = intOf(evalGround(b.num));
        if (c == 0) throw ParseError("zero denominator in a fraction", fileLine, 1);
        Term num = scaleTerm(a.num, b.den);
        Int den = a.den * c;
        if (den < 0) {
            num = negated(num);
            den = -den;
        }
        return {num, den};
    }
    if (op == "+" || op == "-") {
        Frac a = clearFrac(t->args[0], fileLine);
        Frac b = clearFrac(t->args[1], fileLine);
        Int l = boost::multiprecision::lcm(a.den, b.den);
        return {mkOp(op, {scaleTerm(a.num, l / a.den), scaleTerm(b.num, l / b.den)}), l};
    }
    if (op == "*") {
        Frac a = clearFrac(t->args[0], fileLine);
        Frac b = clearFrac(t->args[1], fileLine);
        Term num;
        if (isIntVal(a.num) && isIntVal(b.num)) num = mkIntVal(*a.num->num * *b.num->num);
        else if (isIntVal(a.num) && *a.num->num == 1) num = b.num;
        else if (isIntVal(b.num) && *b.num->num == 1) num = a.num;
        else num = mkOp("*", {a.num, b.num});
        return {num, a.den * b.den};
    }
    if (op == "div" || op == "mod" || op == "exp")
        return {mkOp(op, {clearExact(t->args[0], op, fileLine), clearExact(t->args[1], op, fileLine)}), 1};
    throw ParseError("'" + op + "' cannot appear inside an arithmetic expression", fileLine, 1);
}

inline Term clearFormula(const Term& t, int fileLine) {
    if (isBoolVal(t)) return t;
    if (t->isVar)
        throw ParseError("boolean variables are not allowed in assertions", fileLine, 1);
    const std::string& op = t->name;
    if (op == "&&" || op == "||" || op == "=>")
        return mkOp(op, {clearFormula(t->args[0], fileLine), clearFormula(t->args[1], fileLine)});
    if (op == "!") return mkOp("!", {clearFormula(t->args[0], fileLine)});
    if (op == "=" || op == "!=" || op == ">=" || op == ">") {
        Frac a = clearFrac(t->args[0], fileLine);
        Frac b = clearFrac(t->args[1], fileLine);
        Int l = boost::multiprecision::lcm(a.den, b.den);
        return mkOp(op, {scaleTerm(a.num, l / a.den), scaleTerm(b.num, l / b.den)});
    }
    throw ParseError("'" + op + "' is not a formula connective", fileLine, 1);
}

inline TokenCursor sliceCursor(const std::vector<Token>& toks, size_t from, size_t to, int fileLine) {
    std::vector<Token> s(toks.begin() + long(from), toks.begin() + long(to));
    s.push_back({Tok::End, "", fileLine, s.empty() ? 1 : s.back().col + 1});
    return TokenCursor(std::move(s));
}

inline Term parseFormula(TokenCursor& cur, int fileLine) {
    Term raw = parseExpr(cur, assertionCtx(), 0);
    cur.expect(Tok::End, "end of formula");
    if (raw->sort != sortBool)
        throw ParseError("an assertion must be a boolean formula", fileLine, 1);
    return clearFormula(raw, fileLine);
}

}  // namespace detail

// Parses one assertion formula, clearing fractions. Exposed for the CLI and tests.
inline Term parseAssertion(const std::string& text, int fileLine = 1) {
    TokenCursor cur(tokenize(text, fileLine));
    return detail::parseFormula(cur, fileLine);
}

inline Term parseProgramExpr(const std::string& text, int fileLine = 1) {
    TokenCursor cur(tokenize(text, fileLine));
    Term t = parseExpr(cur, detail::programCtx(), 0);
    cur.expect(Tok::End, "end of expression");
    return t;
}

inline WhileAst parseProgram(const std::string& src) {
    struct LineText {
        int fileLine;
        std::string text;
    };
    std::vector<LineText> raw;
    {
        std::istringstream in(src);
        std::string s;
        int n = 0;
        while (std::getline(in, s)) {
            ++n;
            auto hash = s.find('#');
            if (hash != std::string::npos) s.erase(hash);
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
                s.pop_back();
            raw.push_back({n, s});
        }
        while (!raw.empty() && raw.back().text.empty()) raw.pop_back();
        for (auto& l : raw)
            if (l.text.empty())
                throw ParseError("blank lines may only appear at the end of the file", l.fileLine, 1);
    }
    if (raw.empty()) throw ParseError("the program is empty", 1, 1);

    WhileAst ast;
    size_t begin = 0;
    {
        auto toks = tokenize(raw[0].text, raw[0].fileLine);
        if (toks[0].kind == Tok::Ident && toks[0].text == "vars") {
            TokenCursor cur(std::move(toks));
            cur.next();
            std::set<std::string> seen;
            for (;;) {
                Token v = cur.expect(Tok::Ident, "a variable name");
                if (detail::reservedWords().count(v.text))
                    throw ParseError("'" + v.text + "' is a reserved word", v.line, v.col);
                if (!seen.insert(v.text).second)
                    throw ParseError("duplicate variable '" + v.text + "'", v.line, v.col);
                ast.vars.push_back(v.text);
                if (!cur.accept(Tok::Comma)) break;
            }
            cur.expect(Tok::Semi, "';'");
            cur.expect(Tok::End, "end of line");
            ast.hadVarsPragma = true;
            begin = 1;
            if (raw.size() == 1) throw ParseError("the program is empty", raw[0].fileLine, 1);
        }
    }

    struct Frame {
        LineKind kind;  // IfOpen while the then part is open, ElseOpen, WhileOpen
        size_t open;    // index of the if/while line in ast.lines
        size_t elseAt;  // index of the else line, ElseOpen frames only
    };
    std::vector<Frame> stack;

    for (size_t li = begin; li < raw.size(); ++li) {
        int fl = raw[li].fileLine;
        auto toks = tokenize(raw[li].text, fl);
        ProgLine pl;
        pl.number = int(ast.lines.size()) + 1;
        Token t0 = toks[0];

        if (t0.kind == Tok::At) {
            TokenCursor cur = detail::sliceCursor(toks, 1, toks.size() - 1, fl);
            pl.kind = LineKind::Assert;
            pl.formula = detail::parseFormula(cur, fl);
        } else if (t0.kind == Tok::RBrace) {
            if (toks.size() == 2) {
                if (stack.empty()) throw ParseError("'}' without an open block", fl, t0.col);
                Frame fr = stack.back();
                if (fr.kind == LineKind::IfOpen)
                    throw ParseError("an if block needs an else part before '}'", fl, t0.col);
                stack.pop_back();
                pl.kind = LineKind::Close;
                pl.match = ast.lines[fr.open].number;
                ast.lines[fr.open].closeLine = pl.number;
                if (fr.kind == LineKind::ElseOpen) ast.lines[fr.elseAt].closeLine = pl.number;
            } else if (toks.size() == 4 && toks[1].kind == Tok::Ident && toks[1].text == "else" &&
                       toks[2].kind == Tok::LBrace) {
                if (stack.empty() || stack.back().kind != LineKind::IfOpen)
                    throw ParseError("'} else {' without an open if block", fl, t0.col);
                Frame& fr = stack.back();
                pl.kind = LineKind::ElseOpen;
                pl.match = ast.lines[fr.open].number;
                ast.lines[fr.open].elseLine = pl.number;
                fr.kind = LineKind::ElseOpen;
                fr.elseAt = ast.lines.size();
            } else {
                throw ParseError("a closing line is '}' or '} else {'", fl, t0.col);
            }
        } else if (t0.kind == Tok::Ident && t0.text == "skip") {
            TokenCursor cur(std::move(toks));
            cur.next();
            cur.expect(Tok::Semi, "';'");
            cur.expect(Tok::End, "end of line");
            pl.kind = LineKind::Skip;
        } else if (t0.kind == Tok::Ident && t0.text == "if") {
            TokenCursor cur(std::move(toks));
            cur.next();
            cur.expect(Tok::LParen, "'('");
            pl.guard = parseExpr(cur, detail::programCtx(), 0);
            cur.expect(Tok::RParen, "')'");
            cur.expect(Tok::LBrace, "'{'");
            cur.expect(Tok::End, "end of line");
            if (pl.guard->sort != sortBool)
                throw ParseError("an if guard must be boolean", fl, t0.col);
            pl.kind = LineKind::IfOpen;
            stack.push_back({LineKind::IfOpen, ast.lines.size(), 0});
        } else if (t0.kind == Tok::Ident && t0.text == "while") {
            // while @ invariant [@rank expr] ( guard ) {
            size_t last = toks.size() - 1;
            if (last < 4 || toks[last - 1].kind != Tok::LBrace || toks[last - 2].kind != Tok::RParen)
                throw ParseError("a while header ends with ') {'", fl, t0.col);
            size_t rp = last - 2;
            size_t gl = rp;
            int depth = 1;
            while (gl > 1) {
                --gl;
                if (toks[gl].kind == Tok::RParen) ++depth;
                if (toks[gl].kind == Tok::LParen && --depth == 0) break;
            }
            if (depth != 0)
                throw ParseError("unbalanced parentheses in a while header", fl, t0.col);
            if (gl > 1) {
                if (toks[1].kind != Tok::At)
                    throw ParseError("a while invariant starts with '@'", fl, toks[1].col);
                size_t rankAt = 0;
                for (size_t k = 2; k < gl; ++k)
                    if (toks[k].kind == Tok::At) {
                        rankAt = k;
                        break;
                    }
                size_t invEnd = rankAt ? rankAt : gl;
                TokenCursor inv = detail::sliceCursor(toks, 2, invEnd, fl);
                pl.invariant = detail::parseFormula(inv, fl);
                if (rankAt) {
                    if (rankAt + 1 >= gl || toks[rankAt + 1].kind != Tok::Ident ||
                        toks[rankAt + 1].text != "rank")
                        throw ParseError("expected 'rank' after '@'", fl, toks[rankAt].col);
                    TokenCursor rc = detail::sliceCursor(toks, rankAt + 2, gl, fl);
                    pl.rank = parseExpr(rc, detail::programCtx(), 0);
                    rc.expect(Tok::End, "end of ranking expression");
                    if (pl.rank->sort != sortInt)
                        throw ParseError("a ranking expression must be an integer", fl, toks[rankAt].col);
                }
            }
            TokenCursor gc = detail::sliceCursor(toks, gl + 1, rp, fl);
            pl.guard = parseExpr(gc, detail::programCtx(), 0);
            gc.expect(Tok::End, "')'");
            if (pl.guard->sort != sortBool)
                throw ParseError("a while guard must be boolean", fl, t0.col);
            pl.kind = LineKind::WhileOpen;
            stack.push_back({LineKind::WhileOpen, ast.lines.size(), 0});
        } else if (t0.kind == Tok::Ident) {
            if (detail::reservedWords().count(t0.text))
                throw ParseError("unexpected '" + t0.text + "'", fl, t0.col);
            TokenCursor cur(std::move(toks));
            cur.next();
            cur.expect(Tok::Assign, "':='");
            pl.kind = LineKind::Assign;
            pl.var = t0.text;
            pl.expr = parseExpr(cur, detail::programCtx(), 0);
            cur.expect(Tok::Semi, "';'");
            cur.expect(Tok::End, "end of line");
            if (pl.expr->sort != sortInt)
                throw ParseError("an assignment needs an integer expression", fl, t0.col);
        } else {
            throw ParseError("a line starts with a statement or '@'", fl, t0.col);
        }
        ast.lines.push_back(std::move(pl));
    }

    if (!stack.empty()) {
        const ProgLine& open = ast.lines[stack.back().open];
        throw ParseError("unclosed block opened at line " + std::to_string(open.number),
                         raw.back().fileLine, 1);
    }

    ProgLine blank;
    blank.number = int(ast.lines.size()) + 1;
    blank.kind = LineKind::Blank;
    ast.lines.push_back(blank);

    // variable order: the pragma if present, first appearance otherwise
    std::vector<std::string> order;
    std::set<std::string> seen;
    auto addTerm = [&](const Term& t) {
        if (!t) return;
        for (auto& v : varsOf(t))
            if (seen.insert(v->name).second) order.push_back(v->name);
    };
    for (auto& l : ast.lines) {
        if (l.kind == LineKind::Assign && seen.insert(l.var).second) order.push_back(l.var);
        addTerm(l.expr);
        addTerm(l.formula);
        addTerm(l.invariant);
        addTerm(l.rank);
        addTerm(l.guard);
    }
    if (ast.hadVarsPragma) {
        std::set<std::string> declared(ast.vars.begin(), ast.vars.end());
        for (auto& v : order)
            if (!declared.count(v))
                throw ParseError("variable '" + v + "' is not on the vars line", 1, 1);
    } else {
        ast.vars = order;
    }
    return ast;
}

// ---------------------------------------------------------------------------
// Execution. Assertions and braces are free; assignments, skips, and guard
// tests each consume one unit of fuel.

using Valuation = std::map<std::string, Int>;

enum class RunStatus { Halted, OutOfFuel, MissingVar };

struct RunResult {
    RunStatus status = RunStatus::Halted;
    Valuation theta;
    long steps = 0;
    int line = 0;  // line reached when stopping
};

inline RunResult interpret(const WhileAst& ast, Valuation theta, long fuel, int startLine = 0) {
    std::map<int, size_t> idx;
    for (size_t i = 0; i < ast.lines.size(); ++i) idx[ast.lines[i].number] = i;
    size_t pos = 0;
    if (startLine) {
        auto it = idx.find(startLine);
        if (it == idx.end()) throw TermError("no line " + std::to_string(startLine));
        pos = it->second;
    }

    RunResult res;
    res.theta = std::move(theta);
    auto eval = [&](const Term& e) -> std::optional<Term> {
        Subst s;
        for (auto& v : varsOf(e)) {
            auto it = res.theta.find(v->name);
            if (it == res.theta.end()) return std::nullopt;
            s.bind(v->name, mkIntVal(it->second));
        }
        return evalGround(applySubst(e, s));
    };

    while (pos < ast.lines.size()) {
        const ProgLine& l = ast.lines[pos];
        res.line = l.number;
        switch (l.kind) {
            case LineKind::Assert:
                ++pos;
                break;
            case LineKind::Blank:
                res.status = RunStatus::Halted;
                return res;
            case LineKind::Assign: {
                if (fuel <= 0) {
                    res.status = RunStatus::OutOfFuel;
                    return res;
                }
                auto v = eval(l.expr);
                if (!v) {
                    res.status = RunStatus::MissingVar;
                    return res;
                }
                res.theta[l.var] = intOf(*v);
                --fuel;
                ++res.steps;
                ++pos;
                break;
            }
            case LineKind::Skip:
                if (fuel <= 0) {
                    res.status = RunStatus::OutOfFuel;
                    return res;
                }
                --fuel;
                ++res.steps;
                ++pos;
                break;
            case LineKind::IfOpen:
            case LineKind::WhileOpen: {
                if (fuel <= 0) {
                    res.status = RunStatus::OutOfFuel;
                    return res;
                }
                auto v = eval(l.guard);
                if (!v) {
                    res.status = RunStatus::MissingVar;
                    return res;
                }
                --fuel;
                ++res.steps;
                if (boolOf(*v)) {
                    ++pos;
                } else {
                    int target = l.kind == LineKind::IfOpen ? l.elseLine : l.closeLine;
                    pos = idx.at(target) + 1;
                }
                break;
            }
            case LineKind::ElseOpen:
                pos = idx.at(l.closeLine) + 1;
                break;
            case LineKind::Close: {
                const ProgLine* open = ast.find(l.match);
                if (open && open->kind == LineKind::WhileOpen) pos = idx.at(l.match);
                else ++pos;
                break;
            }
        }
    }
    res.status = RunStatus::Halted;
    return res;
}

// ---------------------------------------------------------------------------

// The program without its annotations: assertion lines vanish, while headers
// lose their invariant and ranking hints. Line numbers keep their gaps.
inline WhileAst stripAnnotations(const WhileAst& ast) {
    WhileAst out;
    out.vars = ast.vars;
    out.hadVarsPragma = ast.hadVarsPragma;
    for (auto& l : ast.lines) {
        if (l.kind == LineKind::Assert) continue;
        ProgLine c = l;
        if (c.kind == LineKind::WhileOpen) {
            c.invariant = Term();
            c.rank = Term();
        }
        out.lines.push_back(std::move(c));
    }
    return out;
}

inline std::string showProgram(const WhileAst& ast) {
    std::ostringstream os;
    if (ast.hadVarsPragma) {
        os << "vars ";
        for (size_t i = 0; i < ast.vars.size(); ++i) os << (i ? ", " : "") << ast.vars[i];
        os << ";\n";
    }
    int depth = 0;
    auto pad = [&] {
        for (int i = 0; i < depth; ++i) os << "    ";
    };
    for (auto& l : ast.lines) {
        switch (l.kind) {
            case LineKind::Assert:
                pad();
                os << "@ " << showTerm(l.formula) << "\n";
                break;
            case LineKind::Assign:
                pad();
                os << l.var << " := " << showTerm(l.expr) << ";\n";
                break;
            case LineKind::Skip:
                pad();
                os << "skip;\n";
                break;
            case LineKind::IfOpen:
                pad();
                os << "if (" << showTerm(l.guard) << ") {\n";
                ++depth;
                break;
            case LineKind::ElseOpen:
                --depth;
                pad();
                os << "} else {\n";
                ++depth;
                break;
            case LineKind::Close:
                --depth;
                pad();
                os << "}\n";
                break;
            case LineKind::WhileOpen:
                pad();
                os << "while ";
                if (l.invariant) os << "@ " << showTerm(l.invariant) << " ";
                if (l.rank) os << "@rank " << showTerm(l.rank) << " ";
                os << "(" << showTerm(l.guard) << ") {\n";
                ++depth;
                break;
            case LineKind::Blank:
                break;
        }
    }
    return os.str();
}

}  // namespace hoare2ri
