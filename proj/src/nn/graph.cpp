#include "d2cc/nn/graph.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace d2cc::nn {

Parameter& ParameterSet::add(std::string name, int rows, int cols) {
  if (contains(name)) throw std::logic_error("duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  p->adam_m = Matrix::Zero(rows, cols);
  p->adam_v = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterSet::get(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

const Parameter& ParameterSet::get(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return true;
  }
  return false;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

Expr Graph::push(Op op, Matrix value, std::vector<int> args, int aux, Parameter* param) {
  nodes_.push_back(Node{op, std::move(value), {}, std::move(args), param, aux});
  return Expr{this, static_cast<int>(nodes_.size()) - 1};
}

Expr Graph::input(Matrix value) { return push(Op::Input, std::move(value), {}); }

Expr Graph::param(Parameter& p) { return push(Op::Param, p.value, {}, -1, &p); }

Expr Graph::lookup(Parameter& p, int column) { return push(Op::Lookup, p.value.col(column), {}, column, &p); }

Expr operator+(Expr a, Expr b) {
  Graph& g = *a.graph;
  return g.push(Graph::Op::Add, g.value(a) + g.value(b), {a.id, b.id});
}

Expr operator-(Expr a) {
  Graph& g = *a.graph;
  return g.push(Graph::Op::Neg, -g.value(a), {a.id});
}

Expr cmult(Expr a, Expr b) {
  Graph& g = *a.graph;
  return g.push(Graph::Op::CMult, g.value(a).cwiseProduct(g.value(b)), {a.id, b.id});
}

Expr matmul(Expr a, Expr b) {
  Graph& g = *a.graph;
  return g.push(Graph::Op::MatMul, g.value(a) * g.value(b), {a.id, b.id});
}

Expr matmul_tn(Expr a, Expr b) {
  Graph& g = *a.graph;
  return g.push(Graph::Op::MatMulTN, g.value(a).transpose() * g.value(b), {a.id, b.id});
}

Expr sigmoid(Expr a) {
  Graph& g = *a.graph;
  Matrix v = g.value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return g.push(Graph::Op::Sigmoid, std::move(v), {a.id});
}

Expr tanh(Expr a) {
  Graph& g = *a.graph;
  return g.push(Graph::Op::Tanh, g.value(a).array().tanh().matrix(), {a.id});
}

std::uint64_t Graph::kink_signature() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Node& n : nodes_) {
    if (n.op != Op::Elu) continue;
    const Matrix& x = nodes_[n.args[0]].value;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      h ^= x.data()[k] > 0 ? 0x9eULL : 0x35ULL;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

Expr elu(Expr a) {
  Graph& g = *a.graph;
  Matrix v = g.value(a).unaryExpr([](double x) { return x > 0 ? x : std::expm1(x); });
  return g.push(Graph::Op::Elu, std::move(v), {a.id});
}

Expr vcat(std::span<const Expr> parts) {
  Graph& g = *parts.front().graph;
  Eigen::Index rows_total = 0;
  for (auto p : parts) rows_total += g.value(p).rows();
  Matrix v(rows_total, g.value(parts.front()).cols());
  std::vector<int> args;
  Eigen::Index r = 0;
  for (auto p : parts) {
    const Matrix& pv = g.value(p);
    v.middleRows(r, pv.rows()) = pv;
    r += pv.rows();
    args.push_back(p.id);
  }
  return g.push(Graph::Op::VCat, std::move(v), std::move(args));
}

Expr hcat(std::span<const Expr> parts) {
  Graph& g = *parts.front().graph;
  Eigen::Index cols_total = 0;
  for (auto p : parts) cols_total += g.value(p).cols();
  Matrix v(g.value(parts.front()).rows(), cols_total);
  std::vector<int> args;
  Eigen::Index c = 0;
  for (auto p : parts) {
    const Matrix& pv = g.value(p);
    v.middleCols(c, pv.cols()) = pv;
    c += pv.cols();
    args.push_back(p.id);
  }
  return g.push(Graph::Op::HCat, std::move(v), std::move(args));
}

Expr rows(Expr a, int start, int count) {
  Graph& g = *a.graph;
  return g.push(Graph::Op::Rows, g.value(a).middleRows(start, count), {a.id}, start);
}

Expr reshape(Expr a, int rows, int cols) {
  Graph& g = *a.graph;
  Matrix v = Eigen::Map<const Matrix>(g.value(a).data(), rows, cols);
  return g.push(Graph::Op::Reshape, std::move(v), {a.id});
}

Expr log_softmax(Expr a, int masked_row) {
  Graph& g = *a.graph;
  const Matrix& x = g.value(a);
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (i != masked_row) mx = std::max(mx, x(i, 0));
  }
  double z = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (i != masked_row) z += std::exp(x(i, 0) - mx);
  }
  const double log_z = mx + std::log(z);
  Matrix v = x.array() - log_z;
  if (masked_row >= 0) v(masked_row, 0) = -std::numeric_limits<double>::infinity();
  return g.push(Graph::Op::LogSoftmax, std::move(v), {a.id}, masked_row);
}

Expr pick(Expr a, int row) {
  Graph& g = *a.graph;
  return g.push(Graph::Op::Pick, g.value(a).block(row, 0, 1, 1), {a.id}, row);
}

Expr sum(std::span<const Expr> parts) {
  Graph& g = *parts.front().graph;
  Matrix v = g.value(parts.front());
  std::vector<int> args{parts.front().id};
  for (auto p : parts.subspan(1)) {
    v += g.value(p);
    args.push_back(p.id);
  }
  return g.push(Graph::Op::Sum, std::move(v), std::move(args));
}

void Graph::backward(Expr loss) {
  for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
  nodes_[loss.id].grad.setOnes();
  for (int i = loss.id; i >= 0; --i) backprop(nodes_[i]);
}

void Graph::backprop(const Node& n) {
  const Matrix& g = n.grad;
  auto grad_of = [this](int id) -> Matrix& { return nodes_[id].grad; };
  auto value_of = [this](int id) -> const Matrix& { return nodes_[id].value; };

  switch (n.op) {
    case Op::Input:
      break;
    case Op::Param:
      n.param->grad += g;
      break;
    case Op::Lookup:
      n.param->grad.col(n.aux) += g;
      break;
    case Op::Add:
      grad_of(n.args[0]) += g;
      grad_of(n.args[1]) += g;
      break;
    case Op::Neg:
      grad_of(n.args[0]) -= g;
      break;
    case Op::CMult:
      grad_of(n.args[0]) += g.cwiseProduct(value_of(n.args[1]));
      grad_of(n.args[1]) += g.cwiseProduct(value_of(n.args[0]));
      break;
    case Op::MatMul:
      grad_of(n.args[0]) += g * value_of(n.args[1]).transpose();
      grad_of(n.args[1]) += value_of(n.args[0]).transpose() * g;
      break;
    case Op::MatMulTN:
      // y = aᵀ b  =>  da = b gᵀ, db = a g
      grad_of(n.args[0]) += value_of(n.args[1]) * g.transpose();
      grad_of(n.args[1]) += value_of(n.args[0]) * g;
      break;
    case Op::Sigmoid:
      grad_of(n.args[0]) += g.cwiseProduct(n.value.cwiseProduct((1.0 - n.value.array()).matrix()));
      break;
    case Op::Tanh:
      grad_of(n.args[0]) += g.cwiseProduct((1.0 - n.value.array().square()).matrix());
      break;
    case Op::Elu: {
      const Matrix& x = value_of(n.args[0]);
      Matrix d = x.unaryExpr([](double v) { return v > 0 ? 1.0 : std::exp(v); });
      if (fault_ == Fault::EluDerivative) d *= 0.5;
      grad_of(n.args[0]) += g.cwiseProduct(d);
      break;
    }
    case Op::VCat: {
      Eigen::Index r = 0;
      for (int a : n.args) {
        Eigen::Index k = value_of(a).rows();
        grad_of(a) += g.middleRows(r, k);
        r += k;
      }
      break;
    }
    case Op::HCat: {
      Eigen::Index c = 0;
      for (int a : n.args) {
        Eigen::Index k = value_of(a).cols();
        grad_of(a) += g.middleCols(c, k);
        c += k;
      }
      break;
    }
    case Op::Rows:
      grad_of(n.args[0]).middleRows(n.aux, g.rows()) += g;
      break;
    case Op::Reshape: {
      Matrix& ga = grad_of(n.args[0]);
      Eigen::Map<Matrix>(ga.data(), g.rows(), g.cols()) += g;
      break;
    }
    case Op::LogSoftmax: {
      double total = 0.0;
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        if (i != n.aux) total += g(i, 0);
      }
      Matrix& ga = grad_of(n.args[0]);
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        if (i == n.aux) continue;
        ga(i, 0) += g(i, 0) - std::exp(n.value(i, 0)) * total;
      }
      break;
    }
    case Op::Pick:
      grad_of(n.args[0])(n.aux, 0) += g(0, 0);
      break;
    case Op::Sum:
      for (int a : n.args) grad_of(a) += g;
      break;
  }
}

}  // namespace d2cc::nn
