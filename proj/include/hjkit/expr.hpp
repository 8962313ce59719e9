#pragma once

/// @file expr.hpp
/// @brief Arithmetic expressions over named variables: + - * / ^, unary
/// minus, sin cos tan exp log sqrt tanh abs, and the constants pi and e.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjkit {

class ExprError : public std::runtime_error {
 public:
  ExprError(const std::string& message, std::size_t position)
      : std::runtime_error(message), position_(position) {}
  /// Zero-based character offset of the problem.
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class Expression {
 public:
  /// Throws ExprError for syntax errors and unknown names.
  static Expression parse(const std::string& text, const std::vector<std::string>& variables);

  /// Values in the order of the variable list given to parse.
  double operator()(const double* values) const;
  double operator()(const std::vector<double>& values) const { return (*this)(values.data()); }

  const std::string& text() const { return text_; }
  /// Whether the named variable occurs in the expression.
  bool uses(const std::string& variable) const;

 private:
  enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Tan, Exp, Log, Sqrt, Tanh, Abs };
  struct Instr {
    Op op;
    double value = 0.0;
    std::size_t index = 0;
  };
  friend class ExprParser;

  std::string text_;
  std::vector<std::string> variables_;
  std::vector<Instr> code_;
  std::size_t depth_ = 0;
};

}  // namespace hjkit
