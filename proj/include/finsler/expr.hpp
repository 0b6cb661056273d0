#pragma once

/// \file expr.hpp
/// Parser and evaluator for metric expressions L(x,y).
///
/// Grammar (see docs/grammar.ebnf): precedence ^ > unary minus > * / > + -,
/// with +,-,*,/ left-associative and ^ right-associative. Variables are
/// x1..xn and y1..yn for an n-dimensional metric (or a caller-supplied name
/// list, e.g. {"t"} for fields along curves). Function names form a closed
/// set: sqrt, exp, sin, cos, pow. abs is deliberately absent: a pseudo-Finsler
/// L must be smooth on its cone, so positivity belongs in the cone predicate,
/// not in the expression.
///
/// ASTs are immutable and evaluable over plain doubles or jets with the same
/// code path, which is how parsed metrics feed the derivative pipelines.

#include <cctype>
#include <charconv>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "finsler/jet.hpp"

namespace finsler::expr {

class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& msg, int position)
      : std::runtime_error(msg + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  int position() const { return position_; }

 private:
  int position_;
};

class eval_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BinOp { Add, Sub, Mul, Div, Pow };
enum class Fn { Sqrt, Exp, Sin, Cos, Pow };

struct Ast;
using AstPtr = std::shared_ptr<const Ast>;

struct Ast {
  enum class Kind { Number, Var, Param, Neg, Bin, Call };
  Kind kind;
  double number = 0.0;
  int var = -1;       // index into the variable list (Kind::Var)
  std::string name;   // variable or parameter name
  BinOp op = BinOp::Add;
  Fn fn = Fn::Sqrt;
  std::vector<AstPtr> kids;
};

using Params = std::map<std::string, double>;

namespace detail {

struct Token {
  enum class Type { Number, Ident, Op, LParen, RParen, Comma, End };
  Type type;
  double number = 0.0;
  std::string text;
  int pos = 0;  // 1-based for messages
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }
  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
    tok_.pos = static_cast<int>(i_) + 1;
    if (i_ >= src_.size()) {
      tok_.type = Token::Type::End;
      tok_.text = "end of input";
      return;
    }
    const char c = src_[i_];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i_;
      while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
      if (j < src_.size() && src_[j] == '.') {
        ++j;
        while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
      }
      if (j < src_.size() && (src_[j] == 'e' || src_[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
        if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
          while (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) ++k;
          j = k;
        }
      }
      tok_.type = Token::Type::Number;
      tok_.text = src_.substr(i_, j - i_);
      tok_.number = std::strtod(tok_.text.c_str(), nullptr);
      i_ = j;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
        ++j;
      tok_.type = Token::Type::Ident;
      tok_.text = src_.substr(i_, j - i_);
      i_ = j;
      return;
    }
    tok_.text = std::string(1, c);
    ++i_;
    switch (c) {
      case '(': tok_.type = Token::Type::LParen; return;
      case ')': tok_.type = Token::Type::RParen; return;
      case ',': tok_.type = Token::Type::Comma; return;
      case '+': case '-': case '*': case '/': case '^':
        tok_.type = Token::Type::Op;
        return;
      default:
        throw parse_error("unexpected character '" + tok_.text + "'", tok_.pos);
    }
  }

  const std::string& src_;
  std::size_t i_ = 0;
  Token tok_;
};

class Parser {
 public:
  Parser(const std::string& src, const std::vector<std::string>& variables,
         bool xy_variables)
      : lex_(src), xy_variables_(xy_variables) {
    for (std::size_t i = 0; i < variables.size(); ++i)
      vars_.emplace(variables[i], static_cast<int>(i));
  }

  AstPtr parse() {
    AstPtr e = expression(0);
    const Token& t = lex_.peek();
    if (t.type != Token::Type::End)
      throw parse_error("unexpected '" + t.text + "'", t.pos);
    return e;
  }

 private:
  static int left_bp(const std::string& op) {
    if (op == "+" || op == "-") return 10;
    if (op == "*" || op == "/") return 20;
    if (op == "^") return 40;
    return -1;
  }
  static int right_bp(const std::string& op) {
    if (op == "^") return 40;  // right-associative
    return left_bp(op) + 1;
  }
  static BinOp bin_op(const std::string& op) {
    if (op == "+") return BinOp::Add;
    if (op == "-") return BinOp::Sub;
    if (op == "*") return BinOp::Mul;
    if (op == "/") return BinOp::Div;
    return BinOp::Pow;
  }

  AstPtr expression(int min_bp) {
    AstPtr lhs = prefix();
    while (true) {
      const Token& t = lex_.peek();
      if (t.type != Token::Type::Op) break;
      const int lbp = left_bp(t.text);
      if (lbp < min_bp) break;
      const Token op = lex_.take();
      AstPtr rhs = expression(right_bp(op.text));
      auto node = std::make_shared<Ast>();
      node->kind = Ast::Kind::Bin;
      node->op = bin_op(op.text);
      node->kids = {lhs, rhs};
      lhs = node;
    }
    return lhs;
  }

  AstPtr prefix() {
    Token t = lex_.take();
    switch (t.type) {
      case Token::Type::Number: {
        auto node = std::make_shared<Ast>();
        node->kind = Ast::Kind::Number;
        node->number = t.number;
        return node;
      }
      case Token::Type::Op:
        if (t.text == "-") {
          auto node = std::make_shared<Ast>();
          node->kind = Ast::Kind::Neg;
          // binds tighter than * and / but looser than ^
          node->kids = {expression(30)};
          return node;
        }
        throw parse_error("unexpected '" + t.text + "'", t.pos);
      case Token::Type::LParen: {
        AstPtr inner = expression(0);
        expect_rparen();
        return inner;
      }
      case Token::Type::Ident:
        return identifier(std::move(t));
      default:
        throw parse_error("unexpected '" + t.text + "'", t.pos);
    }
  }

  AstPtr identifier(Token t) {
    if (lex_.peek().type == Token::Type::LParen) {
      lex_.take();
      Fn fn;
      int arity;
      if (t.text == "sqrt") { fn = Fn::Sqrt; arity = 1; }
      else if (t.text == "exp") { fn = Fn::Exp; arity = 1; }
      else if (t.text == "sin") { fn = Fn::Sin; arity = 1; }
      else if (t.text == "cos") { fn = Fn::Cos; arity = 1; }
      else if (t.text == "pow") { fn = Fn::Pow; arity = 2; }
      else throw parse_error("unknown function '" + t.text + "'", t.pos);
      auto node = std::make_shared<Ast>();
      node->kind = Ast::Kind::Call;
      node->fn = fn;
      node->kids.push_back(expression(0));
      for (int k = 1; k < arity; ++k) {
        const Token& sep = lex_.peek();
        if (sep.type != Token::Type::Comma)
          throw parse_error("expected ',' in call to '" + t.text + "'", sep.pos);
        lex_.take();
        node->kids.push_back(expression(0));
      }
      expect_rparen();
      return node;
    }
    auto it = vars_.find(t.text);
    if (it != vars_.end()) {
      auto node = std::make_shared<Ast>();
      node->kind = Ast::Kind::Var;
      node->var = it->second;
      node->name = t.text;
      return node;
    }
    if (xy_variables_ && (t.text[0] == 'x' || t.text[0] == 'y') && t.text.size() > 1) {
      bool digits = true;
      for (std::size_t i = 1; i < t.text.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(t.text[i]))) digits = false;
      if (digits)
        throw parse_error("variable index out of range: '" + t.text + "'", t.pos);
    }
    auto node = std::make_shared<Ast>();
    node->kind = Ast::Kind::Param;
    node->name = t.text;
    return node;
  }

  void expect_rparen() {
    const Token& t = lex_.peek();
    if (t.type != Token::Type::RParen)
      throw parse_error("expected ')' before '" + t.text + "'", t.pos);
    lex_.take();
  }

  Lexer lex_;
  std::map<std::string, int> vars_;
  bool xy_variables_;
};

template <class S>
struct ConstantMaker;

template <>
struct ConstantMaker<double> {
  static double make(std::span<const double>, double v) { return v; }
};

template <>
struct ConstantMaker<Jet> {
  static Jet make(std::span<const Jet> vars, double v) {
    if (vars.empty())
      throw std::invalid_argument("jet expression evaluation needs variables");
    return Jet::constant(vars[0].space(), v);
  }
};

}  // namespace detail

/// Parse with an explicit variable-name list; names[i] binds to vars[i] at
/// evaluation time. Unknown identifiers become named parameters.
inline AstPtr parse(const std::string& source,
                    const std::vector<std::string>& variables) {
  if (source.empty()) throw parse_error("empty expression", 1);
  return detail::Parser(source, variables, false).parse();
}

/// Parse a metric expression of x1..xn, y1..yn. Out-of-range indices like x5
/// with n = 2 are rejected at parse time.
inline AstPtr parse_metric_expression(const std::string& source, int dimension) {
  if (source.empty()) throw parse_error("empty expression", 1);
  std::vector<std::string> names;
  names.reserve(2 * dimension);
  for (int i = 1; i <= dimension; ++i) names.push_back("x" + std::to_string(i));
  for (int i = 1; i <= dimension; ++i) names.push_back("y" + std::to_string(i));
  return detail::Parser(source, names, true).parse();
}

template <class S>
S evaluate(const Ast& ast, std::span<const S> vars, const Params& params) {
  using std::cos;
  using std::exp;
  using std::pow;
  using std::sin;
  using std::sqrt;
  switch (ast.kind) {
    case Ast::Kind::Number:
      return detail::ConstantMaker<S>::make(vars, ast.number);
    case Ast::Kind::Var:
      if (ast.var < 0 || ast.var >= static_cast<int>(vars.size()))
        throw eval_error("variable '" + ast.name + "' not bound");
      return vars[ast.var];
    case Ast::Kind::Param: {
      auto it = params.find(ast.name);
      if (it == params.end())
        throw eval_error("unknown identifier '" + ast.name + "'");
      return detail::ConstantMaker<S>::make(vars, it->second);
    }
    case Ast::Kind::Neg:
      return -evaluate(*ast.kids[0], vars, params);
    case Ast::Kind::Bin: {
      const S a = evaluate(*ast.kids[0], vars, params);
      const S b = evaluate(*ast.kids[1], vars, params);
      switch (ast.op) {
        case BinOp::Add: return a + b;
        case BinOp::Sub: return a - b;
        case BinOp::Mul: return a * b;
        case BinOp::Div: return a / b;
        case BinOp::Pow: return pow(a, b);
      }
      break;
    }
    case Ast::Kind::Call: {
      const S a = evaluate(*ast.kids[0], vars, params);
      switch (ast.fn) {
        case Fn::Sqrt: return sqrt(a);
        case Fn::Exp: return exp(a);
        case Fn::Sin: return sin(a);
        case Fn::Cos: return cos(a);
        case Fn::Pow: return pow(a, evaluate(*ast.kids[1], vars, params));
      }
      break;
    }
  }
  throw eval_error("malformed expression tree");
}

inline double evaluate(const Ast& ast, std::span<const double> vars,
                       const Params& params = {}) {
  return evaluate<double>(ast, vars, params);
}

/// Stable fully parenthesized form; parse(print(ast)) == ast structurally.
inline std::string print(const Ast& ast) {
  auto number = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  switch (ast.kind) {
    case Ast::Kind::Number:
      return number(ast.number);
    case Ast::Kind::Var:
    case Ast::Kind::Param:
      return ast.name;
    case Ast::Kind::Neg:
      return "(-" + print(*ast.kids[0]) + ")";
    case Ast::Kind::Bin: {
      const char* op = ast.op == BinOp::Add   ? " + "
                       : ast.op == BinOp::Sub ? " - "
                       : ast.op == BinOp::Mul ? "*"
                       : ast.op == BinOp::Div ? "/"
                                              : "^";
      return "(" + print(*ast.kids[0]) + op + print(*ast.kids[1]) + ")";
    }
    case Ast::Kind::Call: {
      const char* fn = ast.fn == Fn::Sqrt ? "sqrt"
                       : ast.fn == Fn::Exp ? "exp"
                       : ast.fn == Fn::Sin ? "sin"
                       : ast.fn == Fn::Cos ? "cos"
                                           : "pow";
      std::string s = std::string(fn) + "(" + print(*ast.kids[0]);
      if (ast.kids.size() > 1) s += ", " + print(*ast.kids[1]);
      return s + ")";
    }
  }
  return "";
}

inline bool equal(const Ast& a, const Ast& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Ast::Kind::Number:
      return a.number == b.number;
    case Ast::Kind::Var:
      return a.var == b.var && a.name == b.name;
    case Ast::Kind::Param:
      return a.name == b.name;
    case Ast::Kind::Neg:
      return equal(*a.kids[0], *b.kids[0]);
    case Ast::Kind::Bin:
      if (a.op != b.op) return false;
      break;
    case Ast::Kind::Call:
      if (a.fn != b.fn) return false;
      break;
  }
  if (a.kids.size() != b.kids.size()) return false;
  for (std::size_t i = 0; i < a.kids.size(); ++i)
    if (!equal(*a.kids[i], *b.kids[i])) return false;
  return true;
}

}  // namespace finsler::expr
