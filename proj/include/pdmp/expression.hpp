#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

namespace pdmp {

/// A compiled real-valued expression in one variable `x`.
///
/// Grammar: numbers, `x`, `pi`, `e`, named parameters, `+ - * / ^`, unary
/// minus, parentheses and the functions exp, log, sqrt, abs, sin, cos, tan,
/// sinh, cosh, tanh, asinh, atan, sign, step (right-continuous Heaviside),
/// min, max, pow. Immutable once compiled, so safe to share across threads.
class Expression {
 public:
  struct Node;

  /// Throws ConfigError on syntax errors or unknown identifiers.
  static Expression compile(std::string_view source,
                            const std::map<std::string, double>& params = {});

  double operator()(double x) const;
  const std::string& source() const { return source_; }

 private:
  Expression(std::string source, std::shared_ptr<const Node> root)
      : source_(std::move(source)), root_(std::move(root)) {}

  std::string source_;
  std::shared_ptr<const Node> root_;
};

}  // namespace pdmp
