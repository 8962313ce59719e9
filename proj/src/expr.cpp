#include "hjkit/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>

namespace hjkit {

class ExprParser {
 public:
  ExprParser(const std::string& s, const std::vector<std::string>& vars, Expression& out)
      : s_(s), vars_(vars), out_(out) {}

  void run() {
    expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    if (out_.code_.empty()) fail("empty expression");
  }

 private:
  using Op = Expression::Op;

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ExprError("expression '" + s_ + "': " + what + " at offset " + std::to_string(pos_), pos_);
  }
  void emit(Op op, double value = 0.0, std::size_t index = 0) {
    out_.code_.push_back({op, value, index});
    switch (op) {
      case Op::Const:
      case Op::Var:
        ++depth_;
        break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Pow:
        --depth_;
        break;
      default:
        break;
    }
    out_.depth_ = std::max(out_.depth_, depth_);
  }

  void expr() {
    term();
    for (;;) {
      if (accept('+')) {
        term();
        emit(Op::Add);
      } else if (accept('-')) {
        term();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }
  void term() {
    unary();
    for (;;) {
      if (accept('*')) {
        unary();
        emit(Op::Mul);
      } else if (accept('/')) {
        unary();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }
  void unary() {
    if (accept('-')) {
      unary();
      emit(Op::Neg);
    } else if (accept('+')) {
      unary();
    } else {
      power();
    }
  }
  void power() {
    primary();
    if (accept('^')) {
      unary();
      emit(Op::Pow);
    }
  }
  void primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (accept('(')) {
      expr();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      emit(Op::Const, v);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      static const std::map<std::string, Op> functions{{"sin", Op::Sin},   {"cos", Op::Cos},   {"tan", Op::Tan},
                                                       {"exp", Op::Exp},   {"log", Op::Log},   {"sqrt", Op::Sqrt},
                                                       {"tanh", Op::Tanh}, {"abs", Op::Abs}};
      for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i] == name) {
          emit(Op::Var, 0.0, i);
          return;
        }
      }
      if (const auto f = functions.find(name); f != functions.end()) {
        if (!accept('(')) fail("expected '(' after " + name);
        expr();
        if (!accept(')')) fail("expected ')'");
        emit(f->second);
        return;
      }
      if (name == "pi") {
        emit(Op::Const, 3.14159265358979323846);
        return;
      }
      if (name == "e") {
        emit(Op::Const, 2.71828182845904523536);
        return;
      }
      pos_ = start;
      fail("unknown name '" + name + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  Expression& out_;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
};

Expression Expression::parse(const std::string& text, const std::vector<std::string>& variables) {
  Expression e;
  e.text_ = text;
  e.variables_ = variables;
  ExprParser(e.text_, e.variables_, e).run();
  return e;
}

bool Expression::uses(const std::string& variable) const {
  for (const Instr& in : code_) {
    if (in.op == Op::Var && variables_[in.index] == variable) return true;
  }
  return false;
}

double Expression::operator()(const double* values) const {
  double small[32] = {};
  std::vector<double> big;
  double* st = small;
  if (depth_ > 32) {
    big.resize(depth_);
    st = big.data();
  }
  std::size_t top = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Const: st[top++] = in.value; break;
      case Op::Var: st[top++] = values[in.index]; break;
      case Op::Add: --top; st[top - 1] += st[top]; break;
      case Op::Sub: --top; st[top - 1] -= st[top]; break;
      case Op::Mul: --top; st[top - 1] *= st[top]; break;
      case Op::Div: --top; st[top - 1] /= st[top]; break;
      case Op::Pow: {
        --top;
        const double ex = st[top];
        const double b = st[top - 1];
        // Small integer powers by repeated multiplication: exact and fast.
        if (ex == std::round(ex) && std::abs(ex) <= 8) {
          double r = 1.0;
          for (int k = 0; k < static_cast<int>(std::abs(ex)); ++k) r *= b;
          st[top - 1] = ex < 0 ? 1.0 / r : r;
        } else {
          st[top - 1] = std::pow(b, ex);
        }
        break;
      }
      case Op::Neg: st[top - 1] = -st[top - 1]; break;
      case Op::Sin: st[top - 1] = std::sin(st[top - 1]); break;
      case Op::Cos: st[top - 1] = std::cos(st[top - 1]); break;
      case Op::Tan: st[top - 1] = std::tan(st[top - 1]); break;
      case Op::Exp: st[top - 1] = std::exp(st[top - 1]); break;
      case Op::Log: st[top - 1] = std::log(st[top - 1]); break;
      case Op::Sqrt: st[top - 1] = std::sqrt(st[top - 1]); break;
      case Op::Tanh: st[top - 1] = std::tanh(st[top - 1]); break;
      case Op::Abs: st[top - 1] = std::abs(st[top - 1]); break;
    }
  }
  return st[0];
}

}  // namespace hjkit
