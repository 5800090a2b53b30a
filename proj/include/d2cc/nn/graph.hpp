#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace d2cc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A trainable tensor with its accumulated gradient and Adam moments.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Owns parameters; references returned by add() stay valid for its lifetime.
class ParameterSet {
 public:
  Parameter& add(std::string name, int rows, int cols);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<std::unique_ptr<Parameter>>& all() { return params_; }
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

/// Handle to a node of a Graph.
struct Expr {
  Graph* graph = nullptr;
  int id = -1;
};

/// Deliberate gradient corruption for negative-control tests.
enum class Fault { None, EluDerivative };

/// A tape of operations over dense matrices. Build a forward expression,
/// then call backward() on a 1x1 result to accumulate parameter gradients.
class Graph {
 public:
  Expr input(Matrix value);
  Expr zeros(int rows, int cols = 1) { return input(Matrix::Zero(rows, cols)); }
  Expr param(Parameter& p);
  /// Column `column` of p as a column vector.
  Expr lookup(Parameter& p, int column);

  const Matrix& value(Expr e) const { return nodes_[e.id].value; }
  double scalar(Expr e) const { return nodes_[e.id].value(0, 0); }
  std::size_t size() const { return nodes_.size(); }

  void backward(Expr loss);
  void set_fault(Fault f) { fault_ = f; }
  /// Hash of the sign of every ELU input. Two forward passes with equal
  /// signatures lie on the same smooth piece of the function.
  std::uint64_t kink_signature() const;

  friend Expr operator+(Expr a, Expr b);
  friend Expr operator-(Expr a);
  friend Expr cmult(Expr a, Expr b);
  friend Expr matmul(Expr a, Expr b);
  friend Expr matmul_tn(Expr a, Expr b);
  friend Expr sigmoid(Expr a);
  friend Expr tanh(Expr a);
  friend Expr elu(Expr a);
  friend Expr vcat(std::span<const Expr> parts);
  friend Expr hcat(std::span<const Expr> parts);
  friend Expr rows(Expr a, int start, int count);
  friend Expr reshape(Expr a, int rows, int cols);
  friend Expr log_softmax(Expr a, int masked_row);
  friend Expr pick(Expr a, int row);
  friend Expr sum(std::span<const Expr> parts);

 private:
  enum class Op {
    Input, Param, Lookup, Add, Neg, CMult, MatMul, MatMulTN, Sigmoid, Tanh, Elu,
    VCat, HCat, Rows, Reshape, LogSoftmax, Pick, Sum,
  };
  struct Node {
    Op op;
    Matrix value;
    Matrix grad;
    std::vector<int> args;
    Parameter* param = nullptr;
    int aux = -1;
  };
  Expr push(Op op, Matrix value, std::vector<int> args, int aux = -1, Parameter* param = nullptr);
  void backprop(const Node& n);

  std::vector<Node> nodes_;
  Fault fault_ = Fault::None;
};

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a);
/// Elementwise product.
Expr cmult(Expr a, Expr b);
Expr matmul(Expr a, Expr b);
/// aᵀ b
Expr matmul_tn(Expr a, Expr b);
Expr sigmoid(Expr a);
Expr tanh(Expr a);
/// ELU with alpha = 1.
Expr elu(Expr a);
/// Stacks parts vertically (equal column counts).
Expr vcat(std::span<const Expr> parts);
/// Stacks parts side by side (equal row counts).
Expr hcat(std::span<const Expr> parts);
Expr rows(Expr a, int start, int count);
/// Column-major reshape.
Expr reshape(Expr a, int rows, int cols);
/// Log-softmax of a column vector. `masked_row` (if >= 0) is forced to -inf.
Expr log_softmax(Expr a, int masked_row = -1);
/// Element `row` of a column vector, as 1x1.
Expr pick(Expr a, int row);
Expr sum(std::span<const Expr> parts);

inline Expr vcat(std::initializer_list<Expr> parts) { return vcat(std::span<const Expr>(parts.begin(), parts.size())); }
inline Expr hcat(std::initializer_list<Expr> parts) { return hcat(std::span<const Expr>(parts.begin(), parts.size())); }
inline Expr sum(std::initializer_list<Expr> parts) { return sum(std::span<const Expr>(parts.begin(), parts.size())); }

}  // namespace d2cc::nn
