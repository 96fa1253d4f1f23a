#include "pdmp/expression.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <vector>

#include "pdmp/errors.hpp"

namespace pdmp {

struct Expression::Node {
  enum class Kind { constant, variable, unary, binary, call };
  Kind kind = Kind::constant;
  double value = 0.0;
  char op = 0;
  std::string function;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

NodePtr constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::constant;
  n->value = v;
  return n;
}

double call_function(const std::string& f, const std::vector<double>& a) {
  if (f == "exp") return std::exp(a[0]);
  if (f == "log") return std::log(a[0]);
  if (f == "sqrt") return std::sqrt(a[0]);
  if (f == "abs") return std::fabs(a[0]);
  if (f == "sin") return std::sin(a[0]);
  if (f == "cos") return std::cos(a[0]);
  if (f == "tan") return std::tan(a[0]);
  if (f == "sinh") return std::sinh(a[0]);
  if (f == "cosh") return std::cosh(a[0]);
  if (f == "tanh") return std::tanh(a[0]);
  if (f == "asinh") return std::asinh(a[0]);
  if (f == "atan") return std::atan(a[0]);
  if (f == "sign") return a[0] > 0 ? 1.0 : (a[0] < 0 ? -1.0 : 0.0);
  if (f == "step") return a[0] >= 0 ? 1.0 : 0.0;
  if (f == "min") return std::fmin(a[0], a[1]);
  if (f == "max") return std::fmax(a[0], a[1]);
  if (f == "pow") return std::pow(a[0], a[1]);
  return std::nan("");
}

std::size_t arity(const std::string& f) {
  static const std::map<std::string, std::size_t> table = {
      {"exp", 1},  {"log", 1},   {"sqrt", 1}, {"abs", 1},  {"sin", 1},  {"cos", 1},
      {"tan", 1},  {"sinh", 1},  {"cosh", 1}, {"tanh", 1}, {"asinh", 1}, {"atan", 1},
      {"sign", 1}, {"step", 1},  {"min", 2},  {"max", 2},  {"pow", 2}};
  auto it = table.find(f);
  return it == table.end() ? 0 : it->second;
}

double evaluate(const Node& n, double x) {
  switch (n.kind) {
    case Node::Kind::constant:
      return n.value;
    case Node::Kind::variable:
      return x;
    case Node::Kind::unary:
      return -evaluate(*n.args[0], x);
    case Node::Kind::binary: {
      const double a = evaluate(*n.args[0], x);
      const double b = evaluate(*n.args[1], x);
      switch (n.op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/': return a / b;
        default: return std::pow(a, b);
      }
    }
    case Node::Kind::call: {
      std::vector<double> a;
      a.reserve(n.args.size());
      for (const auto& arg : n.args) a.push_back(evaluate(*arg, x));
      return call_function(n.function, a);
    }
  }
  return std::nan("");
}

// expr   := term (('+'|'-') term)*
// term   := unary (('*'|'/') unary)*
// unary  := '-' unary | power
// power  := atom ('^' unary)?
// atom   := number | ident | ident '(' args ')' | '(' expr ')'
class Parser {
 public:
  Parser(std::string_view src, const std::map<std::string, double>& params)
      : src_(src), params_(params) {}

  NodePtr parse() {
    auto root = expr();
    skip();
    if (pos_ != src_.size()) fail("unexpected character '" + std::string(1, src_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression '" + std::string(src_) + "': " + what + " at offset " +
                      std::to_string(pos_));
  }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr binary(char op, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::binary;
    n->op = op;
    n->args = {std::move(a), std::move(b)};
    return n;
  }

  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) lhs = binary('+', lhs, term());
      else if (accept('-')) lhs = binary('-', lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) lhs = binary('*', lhs, unary());
      else if (accept('/')) lhs = binary('/', lhs, unary());
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::unary;
      n->args = {unary()};
      return n;
    }
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = atom();
    if (accept('^')) return binary('^', base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    if (accept('(')) {
      auto inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::string rest(src_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    pos_ += used;
    return constant(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string name(src_.substr(start, pos_ - start));
    if (accept('(')) {
      const std::size_t n_args = arity(name);
      if (n_args == 0) fail("unknown function '" + name + "'");
      auto call = std::make_shared<Node>();
      call->kind = Node::Kind::call;
      call->function = name;
      call->args.push_back(expr());
      while (accept(',')) call->args.push_back(expr());
      if (!accept(')')) fail("expected ')' after arguments of '" + name + "'");
      if (call->args.size() != n_args)
        fail("function '" + name + "' takes " + std::to_string(n_args) + " argument(s)");
      return call;
    }
    if (name == "x") {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::variable;
      return n;
    }
    if (auto it = params_.find(name); it != params_.end()) return constant(it->second);
    if (name == "pi") return constant(std::numbers::pi);
    if (name == "e") return constant(std::numbers::e);
    if (name == "inf") return constant(std::numeric_limits<double>::infinity());
    fail("unknown identifier '" + name + "'");
  }

  std::string_view src_;
  const std::map<std::string, double>& params_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::compile(std::string_view source, const std::map<std::string, double>& params) {
  Parser parser(source, params);
  auto root = parser.parse();
  return Expression(std::string(source), std::move(root));
}

double Expression::operator()(double x) const { return evaluate(*root_, x); }

}  // namespace pdmp
