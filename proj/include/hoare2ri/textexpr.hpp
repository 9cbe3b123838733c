#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hoare2ri/term.hpp"

namespace hoare2ri {

struct ParseError : std::runtime_error {
    int line;
    int col;
    ParseError(const std::string& msg, int line_, int col_)
        : std::runtime_error("parse error at " + std::to_string(line_) + ":" +
                             std::to_string(col_) + ": " + msg),
          line(line_), col(col_) {}
};

// ---------------------------------------------------------------------------
// Tokenizer shared by the while-language and the rewrite-system text format.

enum class Tok {
    End, Int, Ident, LParen, RParen, LBrace, RBrace, LBracket, RBracket,
    Comma, Semi, At, Colon, Assign, Arrow, Star,
    Plus, Minus, Slash, Eq, Neq, Ge, Gt, Le, Lt, And, Or, Not, Implies
};

struct Token {
    Tok kind;
    std::string text;
    int line;
    int col;
};

inline std::vector<Token> tokenize(const std::string& src, int lineNo) {
    std::vector<Token> out;
    size_t i = 0;
    auto push = [&](Tok k, const std::string& t, int col) { out.push_back({k, t, lineNo, col}); };
    while (i < src.size()) {
        char c = src[i];
        int col = int(i) + 1;
        if (c == ' ' || c == '\t' || c == '\r') { ++i; continue; }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            push(Tok::Int, src.substr(i, j - i), col);
            i = j;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            push(Tok::Ident, src.substr(i, j - i), col);
            i = j;
            continue;
        }
        auto two = [&](char a, char b) {
            return c == a && i + 1 < src.size() && src[i + 1] == b;
        };
        if (two(':', '=')) { push(Tok::Assign, ":=", col); i += 2; continue; }
        if (two('-', '>')) { push(Tok::Arrow, "->", col); i += 2; continue; }
        if (two('=', '>')) { push(Tok::Implies, "=>", col); i += 2; continue; }
        if (two('!', '=')) { push(Tok::Neq, "!=", col); i += 2; continue; }
        if (two('>', '=')) { push(Tok::Ge, ">=", col); i += 2; continue; }
        if (two('<', '=')) { push(Tok::Le, "<=", col); i += 2; continue; }
        if (two('&', '&')) { push(Tok::And, "&&", col); i += 2; continue; }
        if (two('|', '|')) { push(Tok::Or, "||", col); i += 2; continue; }
        switch (c) {
            case '(': push(Tok::LParen, "(", col); break;
            case ')': push(Tok::RParen, ")", col); break;
            case '{': push(Tok::LBrace, "{", col); break;
            case '}': push(Tok::RBrace, "}", col); break;
            case '[': push(Tok::LBracket, "[", col); break;
            case ']': push(Tok::RBracket, "]", col); break;
            case ',': push(Tok::Comma, ",", col); break;
            case ';': push(Tok::Semi, ";", col); break;
            case '@': push(Tok::At, "@", col); break;
            case ':': push(Tok::Colon, ":", col); break;
            case '*': push(Tok::Star, "*", col); break;
            case '+': push(Tok::Plus, "+", col); break;
            case '-': push(Tok::Minus, "-", col); break;
            case '/': push(Tok::Slash, "/", col); break;
            case '=': push(Tok::Eq, "=", col); break;
            case '>': push(Tok::Gt, ">", col); break;
            case '<': push(Tok::Lt, "<", col); break;
            case '!': push(Tok::Not, "!", col); break;
            default:
                throw ParseError(std::string("unexpected character '") + c + "'", lineNo, col);
        }
        ++i;
    }
    push(Tok::End, "", int(src.size()) + 1);
    return out;
}

// ---------------------------------------------------------------------------
// Precedence-climbing expression parser over a token stream. The resolver
// turns identifiers (with optional argument lists) into terms; operator
// applications are built by the caller-supplied factory so the while-language
// front end can route `/` through rational clearing while the rewrite-system
// format maps it to div directly.

struct ExprCtx {
    // name, args (empty when the identifier has no argument list), token
    std::function<Term(const std::string&, std::vector<Term>*, const Token&)> resolve;
    // op name in {"+","-","*","/","=","!=",">=",">","<=","<","&&","||","=>","!","neg"}
    std::function<Term(const std::string&, std::vector<Term>, const Token&)> apply;
};

class TokenCursor {
  public:
    explicit TokenCursor(std::vector<Token> toks) : toks_(std::move(toks)) {}
    const Token& peek() const { return toks_[pos_]; }
    const Token& next() { return toks_[pos_ == toks_.size() - 1 ? pos_ : pos_++]; }
    bool at(Tok k) const { return peek().kind == k; }
    Token expect(Tok k, const std::string& what) {
        if (!at(k)) throw ParseError("expected " + what + ", got '" + peek().text + "'",
                                     peek().line, peek().col);
        return next();
    }
    bool accept(Tok k) {
        if (!at(k)) return false;
        next();
        return true;
    }

  private:
    std::vector<Token> toks_;
    size_t pos_ = 0;
};

inline Term parseExpr(TokenCursor& cur, const ExprCtx& ctx, int minPrec);

inline Term parsePrimary(TokenCursor& cur, const ExprCtx& ctx) {
    Token t = cur.next();
    switch (t.kind) {
        case Tok::Int:
            return mkIntVal(Int(t.text));
        case Tok::Minus: {
            Term inner = parseExpr(cur, ctx, 9);
            if (isIntVal(inner)) return mkIntVal(-*inner->num);
            return ctx.apply("neg", {inner}, t);
        }
        case Tok::Not: {
            Term inner = parseExpr(cur, ctx, 9);
            return ctx.apply("!", {inner}, t);
        }
        case Tok::LParen: {
            Term inner = parseExpr(cur, ctx, 0);
            cur.expect(Tok::RParen, "')'");
            return inner;
        }
        case Tok::Ident: {
            if (t.text == "true") return mkBoolVal(true);
            if (t.text == "false") return mkBoolVal(false);
            if (cur.at(Tok::LParen)) {
                cur.next();
                std::vector<Term> args;
                if (!cur.at(Tok::RParen)) {
                    args.push_back(parseExpr(cur, ctx, 0));
                    while (cur.accept(Tok::Comma)) args.push_back(parseExpr(cur, ctx, 0));
                }
                cur.expect(Tok::RParen, "')'");
                return ctx.resolve(t.text, &args, t);
            }
            return ctx.resolve(t.text, nullptr, t);
        }
        default:
            throw ParseError("expected an expression, got '" + t.text + "'", t.line, t.col);
    }
}

struct OpInfo {
    std::string name;
    int prec;
    bool rightAssoc;
};

inline std::optional<OpInfo> binOpOf(const Token& t) {
    switch (t.kind) {
        case Tok::Star: return OpInfo{"*", 8, false};
        case Tok::Slash: return OpInfo{"/", 8, false};
        case Tok::Plus: return OpInfo{"+", 7, false};
        case Tok::Minus: return OpInfo{"-", 7, false};
        case Tok::Eq: return OpInfo{"=", 6, false};
        case Tok::Neq: return OpInfo{"!=", 6, false};
        case Tok::Ge: return OpInfo{">=", 6, false};
        case Tok::Gt: return OpInfo{">", 6, false};
        case Tok::Le: return OpInfo{"<=", 6, false};
        case Tok::Lt: return OpInfo{"<", 6, false};
        case Tok::And: return OpInfo{"&&", 4, false};
        case Tok::Or: return OpInfo{"||", 3, false};
        case Tok::Implies: return OpInfo{"=>", 2, true};
        default: return std::nullopt;
    }
}

inline Term parseExpr(TokenCursor& cur, const ExprCtx& ctx, int minPrec) {
    Term lhs = parsePrimary(cur, ctx);
    for (;;) {
        auto op = binOpOf(cur.peek());
        if (!op || op->prec < minPrec) return lhs;
        Token t = cur.next();
        int nextMin = op->rightAssoc ? op->prec : op->prec + 1;
        Term rhs = parseExpr(cur, ctx, nextMin);
        lhs = ctx.apply(op->name, {lhs, rhs}, t);
    }
}

}  // namespace hoare2ri
