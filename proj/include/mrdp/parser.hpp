// mrdp - map-reduce data plane model - DSL parser
// Copyright (c) 2026 mrdp project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "mrdp/dsl.hpp"

namespace mrdp {

enum class TokenType {
  Eof,
  Ident,
  Number,
  String,
  Colon,     // :
  Semi,      // ;
  Comma,     // ,
  LParen,    // (
  RParen,    // )
  LBrace,    // {
  RBrace,    // }
  LBracket,  // [
  RBracket,  // ]
  Equals,    // =
  Arrow,     // =>
  Plus,      // +
  Minus,     // -
  Star,      // *
  Lt,        // <
  Ge,        // >=

  // Keywords
  KwProgram,
  KwInput,
  KwOutput,
  KwWeights,
  KwScalars,
  KwLoad,
  KwMap,
  KwReduce,
};

struct Token {
  TokenType type = TokenType::Eof;
  std::string text;
  double number = 0.0;
  int line = 1;
  int col = 1;
};

// ==========================================================================
// Lexer
// ==========================================================================

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    while (true) {
      skip_ws_and_comments();
      Token t = next_token();
      out.push_back(t);
      if (t.type == TokenType::Eof) break;
    }
    return out;
  }

 private:
  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;

  char peek(size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_ws_and_comments() {
    while (pos_ < src_.size()) {
      char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  Token make(TokenType t, std::string text) {
    Token tok;
    tok.type = t;
    tok.text = std::move(text);
    tok.line = line_;
    tok.col = col_;
    return tok;
  }

  Token next_token() {
    if (pos_ >= src_.size()) return make(TokenType::Eof, "");
    int line = line_, col = col_;
    char c = peek();

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string ident;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
        ident.push_back(advance());
      }
      Token t = make(keyword_type(ident), ident);
      t.line = line;
      t.col = col;
      return t;
    }

    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      std::string num;
      while (pos_ < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.' ||
              peek() == 'e' || peek() == 'E' ||
              ((peek() == '+' || peek() == '-') &&
               (num.back() == 'e' || num.back() == 'E')))) {
        num.push_back(advance());
      }
      Token t = make(TokenType::Number, num);
      t.line = line;
      t.col = col;
      try {
        t.number = std::stod(num);
      } catch (const std::exception&) {
        throw ParseError("bad numeric literal '" + num + "'", line, col);
      }
      return t;
    }

    if (c == '"') {
      advance();
      std::string s;
      while (pos_ < src_.size() && peek() != '"') {
        if (peek() == '\n') throw ParseError("unterminated string", line, col);
        s.push_back(advance());
      }
      if (pos_ >= src_.size()) throw ParseError("unterminated string", line, col);
      advance();
      Token t = make(TokenType::String, s);
      t.line = line;
      t.col = col;
      return t;
    }

    advance();
    Token t;
    t.line = line;
    t.col = col;
    switch (c) {
      case ':': t.type = TokenType::Colon; break;
      case ';': t.type = TokenType::Semi; break;
      case ',': t.type = TokenType::Comma; break;
      case '(': t.type = TokenType::LParen; break;
      case ')': t.type = TokenType::RParen; break;
      case '{': t.type = TokenType::LBrace; break;
      case '}': t.type = TokenType::RBrace; break;
      case '[': t.type = TokenType::LBracket; break;
      case ']': t.type = TokenType::RBracket; break;
      case '+': t.type = TokenType::Plus; break;
      case '-': t.type = TokenType::Minus; break;
      case '*': t.type = TokenType::Star; break;
      case '<': t.type = TokenType::Lt; break;
      case '=':
        if (peek() == '>') {
          advance();
          t.type = TokenType::Arrow;
        } else {
          t.type = TokenType::Equals;
        }
        break;
      case '>':
        if (peek() == '=') {
          advance();
          t.type = TokenType::Ge;
        } else {
          throw ParseError("expected '>=' after '>'", line, col);
        }
        break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
    t.text = std::string(1, c);
    return t;
  }

  static TokenType keyword_type(const std::string& s) {
    if (s == "program") return TokenType::KwProgram;
    if (s == "input") return TokenType::KwInput;
    if (s == "output") return TokenType::KwOutput;
    if (s == "weights") return TokenType::KwWeights;
    if (s == "scalars") return TokenType::KwScalars;
    if (s == "load") return TokenType::KwLoad;
    if (s == "Map") return TokenType::KwMap;
    if (s == "Reduce") return TokenType::KwReduce;
    return TokenType::Ident;
  }
};

// ==========================================================================
// Parser: recursive descent over the token stream
// ==========================================================================

class Parser {
 public:
  explicit Parser(std::string_view src) : tokens_(Lexer(src).tokenize()) {}

  Program parse_program() {
    Program p;
    expect(TokenType::KwProgram, "program");
    p.name = expect(TokenType::Ident, "program name").text;
    expect(TokenType::LBrace, "{");
    while (!check(TokenType::RBrace)) {
      if (check(TokenType::KwInput) || check(TokenType::KwOutput) ||
          check(TokenType::KwWeights)) {
        p.decls.push_back(parse_decl());
      } else {
        p.stmts.push_back(parse_statement());
      }
    }
    expect(TokenType::RBrace, "}");
    expect(TokenType::Eof, "end of input");
    return p;
  }

 private:
  std::vector<Token> tokens_;
  size_t pos_ = 0;

  const Token& cur() const { return tokens_[pos_]; }

  bool check(TokenType t) const { return cur().type == t; }

  bool match(TokenType t) {
    if (!check(t)) return false;
    ++pos_;
    return true;
  }

  Token expect(TokenType t, const std::string& what) {
    if (!check(t)) {
      throw ParseError("expected " + what + ", got '" + cur().text + "'", cur().line,
                       cur().col);
    }
    return tokens_[pos_++];
  }

  TensorDecl parse_decl() {
    TensorDecl d;
    if (match(TokenType::KwInput)) {
      d.kind = TensorKind::Input;
    } else if (match(TokenType::KwOutput)) {
      d.kind = TensorKind::Output;
    } else {
      expect(TokenType::KwWeights, "declaration");
      d.kind = TensorKind::Weights;
    }
    d.name = expect(TokenType::Ident, "tensor name").text;
    expect(TokenType::Colon, ":");
    d.type_name = expect(TokenType::Ident, "type").text;
    expect(TokenType::LBracket, "[");
    while (true) {
      Token n = expect(TokenType::Number, "dimension");
      d.dims.push_back(static_cast<int>(n.number));
      if (!match(TokenType::Comma)) break;
    }
    expect(TokenType::RBracket, "]");
    if (match(TokenType::KwScalars)) d.scalars = true;
    if (d.kind == TensorKind::Weights) {
      expect(TokenType::Equals, "=");
      expect(TokenType::KwLoad, "load");
      expect(TokenType::LParen, "(");
      d.load_path = expect(TokenType::String, "file path").text;
      expect(TokenType::RParen, ")");
    }
    expect(TokenType::Semi, ";");
    return d;
  }

  Statement parse_statement() {
    Statement s;
    Token name = expect(TokenType::Ident, "statement target");
    s.target = name.text;
    s.line = name.line;
    expect(TokenType::Equals, "=");
    s.value = parse_expr();
    expect(TokenType::Semi, ";");
    return s;
  }

  // expr      := additive ( ('<' | '>=') additive )?
  // additive  := term ( ('+' | '-') term )*
  // term      := primary ( '*' primary )*
  ExprPtr parse_expr() {
    ExprPtr lhs = parse_additive();
    if (check(TokenType::Lt) || check(TokenType::Ge)) {
      char op = check(TokenType::Lt) ? '<' : 'g';
      int line = cur().line;
      ++pos_;
      ExprPtr rhs = parse_additive();
      return make_binary(op, std::move(lhs), std::move(rhs), line);
    }
    return lhs;
  }

  ExprPtr parse_additive() {
    ExprPtr lhs = parse_term();
    while (check(TokenType::Plus) || check(TokenType::Minus)) {
      char op = check(TokenType::Plus) ? '+' : '-';
      int line = cur().line;
      ++pos_;
      ExprPtr rhs = parse_term();
      lhs = make_binary(op, std::move(lhs), std::move(rhs), line);
    }
    return lhs;
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_primary();
    while (check(TokenType::Star)) {
      int line = cur().line;
      ++pos_;
      ExprPtr rhs = parse_primary();
      lhs = make_binary('*', std::move(lhs), std::move(rhs), line);
    }
    return lhs;
  }

  ExprPtr parse_primary() {
    const Token& t = cur();
    switch (t.type) {
      case TokenType::Number: {
        ++pos_;
        return make_number(t.number, t.line);
      }
      case TokenType::Minus: {
        // Unary minus only in front of a numeric literal.
        int line = t.line;
        ++pos_;
        Token n = expect(TokenType::Number, "number after unary '-'");
        return make_number(-n.number, line);
      }
      case TokenType::LParen: {
        ++pos_;
        ExprPtr e = parse_expr();
        expect(TokenType::RParen, ")");
        return e;
      }
      case TokenType::KwMap:
        return parse_map();
      case TokenType::KwReduce:
        return parse_reduce();
      case TokenType::Ident: {
        Token name = t;
        ++pos_;
        if (match(TokenType::LBracket)) {
          std::vector<ExprPtr> idx;
          idx.push_back(parse_expr());
          while (match(TokenType::Comma)) idx.push_back(parse_expr());
          expect(TokenType::RBracket, "]");
          return make_index(name.text, std::move(idx), name.line);
        }
        if (match(TokenType::LParen)) {
          std::vector<ExprPtr> args;
          if (!check(TokenType::RParen)) {
            args.push_back(parse_expr());
            while (match(TokenType::Comma)) args.push_back(parse_expr());
          }
          expect(TokenType::RParen, ")");
          return make_call(name.text, std::move(args), name.line);
        }
        return make_var(name.text, name.line);
      }
      default:
        throw ParseError("expected expression, got '" + t.text + "'", t.line, t.col);
    }
  }

  ExprPtr parse_map() {
    Token kw = expect(TokenType::KwMap, "Map");
    expect(TokenType::LParen, "(");
    Token n = expect(TokenType::Number, "map count");
    expect(TokenType::RParen, ")");
    expect(TokenType::LBrace, "{");
    Token var = expect(TokenType::Ident, "loop variable");
    expect(TokenType::Arrow, "=>");
    ExprPtr body = parse_expr();
    expect(TokenType::RBrace, "}");
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::MapExpr;
    e->line = kw.line;
    e->map_count = static_cast<int>(n.number);
    e->var1 = var.text;
    e->body = std::move(body);
    return e;
  }

  ExprPtr parse_reduce() {
    Token kw = expect(TokenType::KwReduce, "Reduce");
    expect(TokenType::LParen, "(");
    ExprPtr source = parse_expr();
    expect(TokenType::RParen, ")");
    expect(TokenType::LBrace, "{");
    expect(TokenType::LParen, "(");
    Token a = expect(TokenType::Ident, "accumulator variable");
    expect(TokenType::Comma, ",");
    Token b = expect(TokenType::Ident, "accumulator variable");
    expect(TokenType::RParen, ")");
    expect(TokenType::Arrow, "=>");
    ExprPtr body = parse_expr();
    expect(TokenType::RBrace, "}");
    auto e = std::make_unique<Expr>();
    e->kind = ExprKind::ReduceExpr;
    e->line = kw.line;
    e->var1 = a.text;
    e->var2 = b.text;
    e->source = std::move(source);
    e->body = std::move(body);
    return e;
  }
};

inline Program parse_program(std::string_view src) {
  return Parser(src).parse_program();
}

}  // namespace mrdp
