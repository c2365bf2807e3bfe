#pragma once

// Sandboxed predicate expressions: arithmetic, comparison and boolean logic
// over state fields plus four whitelisted functions. The grammar has no
// loops, definitions, assignment or general calls, and ASTs are capped at
// kMaxExprDepth levels.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "abc/error.hpp"
#include "abc/value.hpp"

namespace abc {

inline constexpr std::size_t kMaxExprDepth = 64;

enum class UnaryOp { logical_not, negate };
enum class BinaryOp { add, sub, mul, div, lt, le, gt, ge, eq, ne, logical_and, logical_or, in };
enum class Builtin { len, abs, min, max };

struct ExprNode {
  enum class Kind { literal, field, unary, binary, call };

  Kind kind = Kind::literal;
  nlohmann::json value;  // literal
  std::string path;      // field
  UnaryOp unary_op = UnaryOp::negate;
  BinaryOp binary_op = BinaryOp::add;
  Builtin builtin = Builtin::len;
  std::vector<std::shared_ptr<const ExprNode>> children;
  std::size_t depth = 1;
};

using ExprAst = std::shared_ptr<const ExprNode>;

inline const char* to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return "+";
    case BinaryOp::sub: return "-";
    case BinaryOp::mul: return "*";
    case BinaryOp::div: return "/";
    case BinaryOp::lt: return "lt";
    case BinaryOp::le: return "le";
    case BinaryOp::gt: return "gt";
    case BinaryOp::ge: return "ge";
    case BinaryOp::eq: return "eq";
    case BinaryOp::ne: return "ne";
    case BinaryOp::logical_and: return "and";
    case BinaryOp::logical_or: return "or";
    case BinaryOp::in: return "in";
  }
  return "?";
}

inline const char* to_string(Builtin fn) {
  switch (fn) {
    case Builtin::len: return "len";
    case Builtin::abs: return "abs";
    case Builtin::min: return "min";
    case Builtin::max: return "max";
  }
  return "?";
}

/// S-expression rendering, e.g. `(ge output.confidence 0.7)`.
inline std::string to_sexpr(const ExprAst& node) {
  switch (node->kind) {
    case ExprNode::Kind::literal: return node->value.dump();
    case ExprNode::Kind::field: return node->path;
    case ExprNode::Kind::unary:
      return std::string("(") + (node->unary_op == UnaryOp::logical_not ? "not " : "neg ") +
             to_sexpr(node->children[0]) + ")";
    case ExprNode::Kind::binary:
      return std::string("(") + to_string(node->binary_op) + " " + to_sexpr(node->children[0]) + " " +
             to_sexpr(node->children[1]) + ")";
    case ExprNode::Kind::call: {
      std::string out = std::string("(") + to_string(node->builtin);
      for (const auto& c : node->children) out += " " + to_sexpr(c);
      return out + ")";
    }
  }
  return "?";
}

namespace detail {

struct Token {
  enum class Kind { number, string, ident, op, lparen, rparen, lbracket, rbracket, comma, end };
  Kind kind = Kind::end;
  std::string text;
  double number = 0.0;
  std::size_t column = 1;
};

inline bool is_forbidden_word(std::string_view w) {
  static constexpr std::string_view words[] = {
      "lambda", "def",    "for",    "while",  "import", "class",  "exec",   "eval",  "if",
      "else",   "elif",   "return", "yield",  "global", "with",   "del",    "from",  "as",
      "assert", "async",  "await",  "try",    "except", "raise",  "nonlocal", "pass", "break",
      "continue", "function", "var", "let", "const", "new", "goto"};
  return std::find(std::begin(words), std::end(words), w) != std::end(words);
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      Token tok;
      tok.column = pos_ + 1;
      if (pos_ >= src_.size()) {
        tok.kind = Token::Kind::end;
        out.push_back(tok);
        return out;
      }
      char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        out.push_back(number(tok));
      } else if (c == '"' || c == '\'') {
        out.push_back(string(tok, c));
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        out.push_back(ident(tok));
      } else {
        out.push_back(punct(tok));
      }
    }
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  Token number(Token tok) {
    std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    tok.kind = Token::Kind::number;
    tok.text = std::string(src_.substr(start, pos_ - start));
    if (std::count(tok.text.begin(), tok.text.end(), '.') > 1)
      throw ExprSyntaxError("malformed number '" + tok.text + "'", tok.column);
    try {
      std::size_t used = 0;
      tok.number = std::stod(tok.text, &used);
      if (used != tok.text.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ExprSyntaxError("malformed number '" + tok.text + "'", tok.column);
    }
    if (pos_ < src_.size() && (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      throw ExprSyntaxError("unexpected character after number", pos_ + 1);
    return tok;
  }

  Token string(Token tok, char quote) {
    ++pos_;
    std::string text;
    while (true) {
      if (pos_ >= src_.size()) throw ExprSyntaxError("unterminated string literal", tok.column);
      char c = src_[pos_++];
      if (c == quote) break;
      if (c == '\\') {
        if (pos_ >= src_.size()) throw ExprSyntaxError("unterminated string literal", tok.column);
        char e = src_[pos_++];
        switch (e) {
          case 'n': text += '\n'; break;
          case 't': text += '\t'; break;
          case '\\': text += '\\'; break;
          case '\'': text += '\''; break;
          case '"': text += '"'; break;
          default: throw ExprSyntaxError(std::string("unknown escape '\\") + e + "'", pos_ - 1);
        }
      } else {
        text += c;
      }
    }
    tok.kind = Token::Kind::string;
    tok.text = std::move(text);
    return tok;
  }

  Token ident(Token tok) {
    std::size_t start = pos_;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        ++pos_;
      } else if (c == '.' && pos_ + 1 < src_.size() &&
                 (std::isalnum(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '_')) {
        ++pos_;
      } else {
        break;
      }
    }
    tok.kind = Token::Kind::ident;
    tok.text = std::string(src_.substr(start, pos_ - start));
    if (tok.text.find("__") != std::string::npos)
      throw ForbiddenConstruct("dunder identifier '" + tok.text + "' is not allowed", tok.column);
    if (is_forbidden_word(tok.text))
      throw ForbiddenConstruct("'" + tok.text + "' is not part of the expression language", tok.column);
    return tok;
  }

  Token punct(Token tok) {
    auto two = src_.substr(pos_, 2);
    static constexpr std::string_view twos[] = {"<=", ">=", "==", "!=", "&&", "||"};
    for (auto t : twos) {
      if (two == t) {
        pos_ += 2;
        tok.kind = Token::Kind::op;
        tok.text = std::string(t);
        return tok;
      }
    }
    char c = src_[pos_++];
    switch (c) {
      case '(': tok.kind = Token::Kind::lparen; break;
      case ')': tok.kind = Token::Kind::rparen; break;
      case '[': tok.kind = Token::Kind::lbracket; break;
      case ']': tok.kind = Token::Kind::rbracket; break;
      case ',': tok.kind = Token::Kind::comma; break;
      case '+': case '-': case '*': case '/': case '<': case '>': case '!':
        tok.kind = Token::Kind::op;
        break;
      case '=': throw ForbiddenConstruct("assignment is not allowed (use '==')", tok.column);
      case ';': throw ForbiddenConstruct("statement separators are not allowed", tok.column);
      case '{': case '}': case ':':
        throw ForbiddenConstruct(std::string("'") + c + "' introduces a block or definition", tok.column);
      default:
        throw ExprSyntaxError(std::string("unexpected character '") + c + "'", tok.column);
    }
    tok.text = std::string(1, c);
    return tok;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  ExprAst parse() {
    auto root = parse_or();
    if (peek().kind != Token::Kind::end) fail("unexpected trailing input '" + peek().text + "'");
    return root;
  }

 private:
  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.nesting_ > kMaxExprDepth)
        throw ExprSyntaxError("expression nesting exceeds " + std::to_string(kMaxExprDepth), p_.peek().column);
    }
    ~DepthGuard() { --p_.nesting_; }
    Parser& p_;
  };

  const Token& peek() const { return toks_[pos_]; }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool is_op(std::string_view s) const { return peek().kind == Token::Kind::op && peek().text == s; }
  bool is_word(std::string_view s) const { return peek().kind == Token::Kind::ident && peek().text == s; }
  [[noreturn]] void fail(const std::string& msg) const { throw ExprSyntaxError(msg, peek().column); }

  static ExprAst make(ExprNode node) {
    std::size_t d = 0;
    for (const auto& c : node.children) d = std::max(d, c->depth);
    node.depth = d + 1;
    if (node.depth > kMaxExprDepth)
      throw ExprSyntaxError("expression depth exceeds " + std::to_string(kMaxExprDepth), 0);
    return std::make_shared<const ExprNode>(std::move(node));
  }

  static ExprAst binary(BinaryOp op, ExprAst l, ExprAst r) {
    ExprNode n;
    n.kind = ExprNode::Kind::binary;
    n.binary_op = op;
    n.children = {std::move(l), std::move(r)};
    return make(std::move(n));
  }

  ExprAst parse_or() {
    DepthGuard guard(*this);
    auto lhs = parse_and();
    while (is_word("or") || is_op("||")) {
      next();
      lhs = binary(BinaryOp::logical_or, lhs, parse_and());
    }
    return lhs;
  }

  ExprAst parse_and() {
    auto lhs = parse_not();
    while (is_word("and") || is_op("&&")) {
      next();
      lhs = binary(BinaryOp::logical_and, lhs, parse_not());
    }
    return lhs;
  }

  ExprAst parse_not() {
    if (is_word("not") || is_op("!")) {
      DepthGuard guard(*this);
      next();
      ExprNode n;
      n.kind = ExprNode::Kind::unary;
      n.unary_op = UnaryOp::logical_not;
      n.children = {parse_not()};
      return make(std::move(n));
    }
    return parse_cmp();
  }

  ExprAst parse_cmp() {
    auto lhs = parse_add();
    struct Entry {
      std::string_view text;
      BinaryOp op;
    };
    static constexpr Entry cmp_ops[] = {{"<", BinaryOp::lt},  {"<=", BinaryOp::le}, {">", BinaryOp::gt},
                                        {">=", BinaryOp::ge}, {"==", BinaryOp::eq}, {"!=", BinaryOp::ne}};
    for (const auto& e : cmp_ops) {
      if (is_op(e.text)) {
        next();
        return binary(e.op, lhs, parse_add());
      }
    }
    if (is_word("in")) {
      next();
      return binary(BinaryOp::in, lhs, parse_add());
    }
    if (is_word("not") && pos_ + 1 < toks_.size() && toks_[pos_ + 1].kind == Token::Kind::ident &&
        toks_[pos_ + 1].text == "in") {
      next();
      next();
      ExprNode n;
      n.kind = ExprNode::Kind::unary;
      n.unary_op = UnaryOp::logical_not;
      n.children = {binary(BinaryOp::in, lhs, parse_add())};
      return make(std::move(n));
    }
    return lhs;
  }

  ExprAst parse_add() {
    auto lhs = parse_mul();
    while (is_op("+") || is_op("-")) {
      auto op = next().text == "+" ? BinaryOp::add : BinaryOp::sub;
      lhs = binary(op, lhs, parse_mul());
    }
    return lhs;
  }

  ExprAst parse_mul() {
    auto lhs = parse_unary();
    while (is_op("*") || is_op("/")) {
      auto op = next().text == "*" ? BinaryOp::mul : BinaryOp::div;
      lhs = binary(op, lhs, parse_unary());
    }
    return lhs;
  }

  ExprAst parse_unary() {
    if (is_op("-")) {
      DepthGuard guard(*this);
      next();
      ExprNode n;
      n.kind = ExprNode::Kind::unary;
      n.unary_op = UnaryOp::negate;
      n.children = {parse_unary()};
      return make(std::move(n));
    }
    if (is_op("+")) {
      DepthGuard guard(*this);
      next();
      return parse_unary();
    }
    return parse_primary();
  }

  ExprAst parse_primary() {
    const Token tok = peek();
    switch (tok.kind) {
      case Token::Kind::number: {
        next();
        ExprNode n;
        n.value = tok.number;
        return make(std::move(n));
      }
      case Token::Kind::string: {
        next();
        ExprNode n;
        n.value = tok.text;
        return make(std::move(n));
      }
      case Token::Kind::lparen: {
        next();
        auto inner = parse_or();
        if (peek().kind != Token::Kind::rparen) fail("expected ')'");
        next();
        return inner;
      }
      case Token::Kind::lbracket: return parse_list();
      case Token::Kind::ident: return parse_ident();
      case Token::Kind::end: fail("unexpected end of expression");
      default: fail("unexpected token '" + tok.text + "'");
    }
  }

  ExprAst parse_list() {
    DepthGuard guard(*this);
    next();
    nlohmann::json items = nlohmann::json::array();
    if (peek().kind != Token::Kind::rbracket) {
      while (true) {
        const Token tok = peek();
        bool neg = false;
        if (is_op("-")) {
          neg = true;
          next();
        }
        const Token item = next();
        if (item.kind == Token::Kind::number) {
          items.push_back(neg ? -item.number : item.number);
        } else if (!neg && item.kind == Token::Kind::string) {
          items.push_back(item.text);
        } else if (!neg && item.kind == Token::Kind::ident && (item.text == "true" || item.text == "false")) {
          items.push_back(item.text == "true");
        } else {
          throw ExprSyntaxError("list literals may only contain literal values", tok.column);
        }
        if (peek().kind == Token::Kind::comma) {
          next();
          continue;
        }
        break;
      }
    }
    if (peek().kind != Token::Kind::rbracket) fail("expected ']'");
    next();
    ExprNode n;
    n.value = std::move(items);
    return make(std::move(n));
  }

  ExprAst parse_ident() {
    const Token tok = next();
    if (tok.text == "true" || tok.text == "false") {
      ExprNode n;
      n.value = tok.text == "true";
      return make(std::move(n));
    }
    if (tok.text == "null" || tok.text == "None") {
      ExprNode n;
      n.value = nullptr;
      return make(std::move(n));
    }
    if (tok.text == "and" || tok.text == "or" || tok.text == "not" || tok.text == "in")
      throw ExprSyntaxError("unexpected keyword '" + tok.text + "'", tok.column);
    if (peek().kind == Token::Kind::lparen) return parse_call(tok);
    ExprNode n;
    n.kind = ExprNode::Kind::field;
    n.path = tok.text;
    return make(std::move(n));
  }

  ExprAst parse_call(const Token& name) {
    Builtin fn;
    if (name.text == "len") fn = Builtin::len;
    else if (name.text == "abs") fn = Builtin::abs;
    else if (name.text == "min") fn = Builtin::min;
    else if (name.text == "max") fn = Builtin::max;
    else throw ForbiddenConstruct("call to '" + name.text + "' is not allowed (only len, abs, min, max)", name.column);

    DepthGuard guard(*this);
    next();  // '('
    ExprNode n;
    n.kind = ExprNode::Kind::call;
    n.builtin = fn;
    if (peek().kind != Token::Kind::rparen) {
      while (true) {
        n.children.push_back(parse_or());
        if (peek().kind == Token::Kind::comma) {
          next();
          continue;
        }
        break;
      }
    }
    if (peek().kind != Token::Kind::rparen) fail("expected ')' after arguments");
    next();
    const auto argc = n.children.size();
    if ((fn == Builtin::len || fn == Builtin::abs) && argc != 1)
      throw ExprSyntaxError(name.text + "() takes exactly one argument", name.column);
    if ((fn == Builtin::min || fn == Builtin::max) && argc == 0)
      throw ExprSyntaxError(name.text + "() needs at least one argument", name.column);
    return make(std::move(n));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t nesting_ = 0;
};

inline double as_number(const nlohmann::json& v, const char* what) {
  if (!v.is_number()) throw TypeMismatch(std::string(what) + " expects numbers, got " + v.type_name());
  return v.get<double>();
}

inline bool as_bool(const nlohmann::json& v, const char* what) {
  if (!v.is_boolean()) throw TypeMismatch(std::string(what) + " expects booleans, got " + v.type_name());
  return v.get<bool>();
}

inline bool contains(const nlohmann::json& haystack, const nlohmann::json& needle) {
  if (haystack.is_array()) return std::find(haystack.begin(), haystack.end(), needle) != haystack.end();
  if (haystack.is_string() && needle.is_string())
    return haystack.get_ref<const std::string&>().find(needle.get_ref<const std::string&>()) != std::string::npos;
  if (haystack.is_object() && needle.is_string()) return haystack.contains(needle.get_ref<const std::string&>());
  throw TypeMismatch(std::string("'in' cannot search a ") + haystack.type_name() + " for a " + needle.type_name());
}

inline nlohmann::json eval_node(const ExprNode& node, const EvalView& view) {
  using K = ExprNode::Kind;
  switch (node.kind) {
    case K::literal: return node.value;
    case K::field: {
      const auto* v = view.resolve(node.path);
      if (!v) throw FieldResolutionError(node.path);
      return *v;
    }
    case K::unary: {
      auto v = eval_node(*node.children[0], view);
      if (node.unary_op == UnaryOp::logical_not) return !as_bool(v, "not");
      return -as_number(v, "unary '-'");
    }
    case K::binary: {
      const auto op = node.binary_op;
      if (op == BinaryOp::logical_and || op == BinaryOp::logical_or) {
        bool lhs = as_bool(eval_node(*node.children[0], view), to_string(op));
        if (op == BinaryOp::logical_and && !lhs) return false;
        if (op == BinaryOp::logical_or && lhs) return true;
        return as_bool(eval_node(*node.children[1], view), to_string(op));
      }
      auto l = eval_node(*node.children[0], view);
      auto r = eval_node(*node.children[1], view);
      switch (op) {
        case BinaryOp::eq: return l == r;
        case BinaryOp::ne: return l != r;
        case BinaryOp::in: return contains(r, l);
        case BinaryOp::lt: return as_number(l, "<") < as_number(r, "<");
        case BinaryOp::le: return as_number(l, "<=") <= as_number(r, "<=");
        case BinaryOp::gt: return as_number(l, ">") > as_number(r, ">");
        case BinaryOp::ge: return as_number(l, ">=") >= as_number(r, ">=");
        case BinaryOp::add: return as_number(l, "+") + as_number(r, "+");
        case BinaryOp::sub: return as_number(l, "-") - as_number(r, "-");
        case BinaryOp::mul: return as_number(l, "*") * as_number(r, "*");
        case BinaryOp::div: {
          double d = as_number(r, "/");
          if (d == 0.0) throw EvalError("division by zero");
          return as_number(l, "/") / d;
        }
        default: break;
      }
      throw EvalError("unsupported operator");
    }
    case K::call: {
      std::vector<nlohmann::json> args;
      args.reserve(node.children.size());
      for (const auto& c : node.children) args.push_back(eval_node(*c, view));
      switch (node.builtin) {
        case Builtin::len:
          if (args[0].is_string()) return args[0].get_ref<const std::string&>().size();
          if (args[0].is_array() || args[0].is_object()) return args[0].size();
          throw TypeMismatch(std::string("len() of a ") + args[0].type_name());
        case Builtin::abs: return std::fabs(as_number(args[0], "abs()"));
        case Builtin::min:
        case Builtin::max: {
          const bool is_min = node.builtin == Builtin::min;
          std::vector<nlohmann::json> pool = args;
          if (args.size() == 1 && args[0].is_array()) pool.assign(args[0].begin(), args[0].end());
          if (pool.empty()) throw EvalError(std::string(to_string(node.builtin)) + "() of an empty list");
          double best = as_number(pool[0], to_string(node.builtin));
          for (const auto& v : pool) {
            double x = as_number(v, to_string(node.builtin));
            best = is_min ? std::min(best, x) : std::max(best, x);
          }
          return best;
        }
      }
    }
  }
  throw EvalError("malformed expression node");
}

}  // namespace detail

/// Compiles `src` into an AST. Compilation never touches any state.
inline ExprAst compile_expression(std::string_view src) {
  detail::Lexer lexer(src);
  detail::Parser parser(lexer.run());
  return parser.parse();
}

/// Evaluates a compiled predicate. Throws FieldResolutionError, TypeMismatch
/// or EvalError; callers decide how failures count.
inline bool eval_expression(const ExprAst& ast, const EvalView& view) {
  auto v = detail::eval_node(*ast, view);
  if (!v.is_boolean()) throw TypeMismatch(std::string("expression yields a ") + v.type_name() + ", not a boolean");
  return v.get<bool>();
}

inline bool eval_expression(const ExprAst& ast, const StateDict& state, const ActionRecord* action = nullptr) {
  return eval_expression(ast, EvalView(state, action));
}

/// Field paths an expression reads, in first-seen order.
inline std::vector<std::string> referenced_fields(const ExprAst& ast) {
  std::vector<std::string> out;
  auto visit = [&](auto&& self, const ExprNode& n) -> void {
    if (n.kind == ExprNode::Kind::field && std::find(out.begin(), out.end(), n.path) == out.end())
      out.push_back(n.path);
    for (const auto& c : n.children) self(self, *c);
  };
  visit(visit, *ast);
  return out;
}

}  // namespace abc
