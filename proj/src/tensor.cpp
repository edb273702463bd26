#include "sirnet/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace sirnet {
namespace {

thread_local bool t_grad_enabled = true;

}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  if (shape.size() == 1) out << ',';
  out << ')';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values, bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values,
                       const std::vector<Tensor>& parents, const char* op,
                       BackwardFn backward, double kink_gap) {
  Tensor out(std::move(shape), std::move(values));
  auto& node = *out.node_;
  node.op = op;
  node.kink_gap = kink_gap;
  const bool any = t_grad_enabled && std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.requires_grad(); });
  if (any) {
    node.is_leaf = false;
    node.requires_grad = true;
    node.parents.reserve(parents.size());
    for (const auto& p : parents) node.parents.push_back(p.node_);
    node.backward = std::move(backward);
  }
  return out;
}

const detail::Node& Tensor::checked() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked().value.size(); }

std::span<const double> Tensor::data() const { return checked().value; }

std::span<double> Tensor::mutable_data() {
  if (!checked().is_leaf) throw ContractError("only leaf tensors may be written in place");
  return node_->value;
}

double Tensor::at(std::size_t flat_index) const { return checked().value.at(flat_index); }

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() needs a single-element tensor, shape is " +
                         shape_to_string(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return checked().is_leaf; }
const char* Tensor::op_name() const { return checked().op; }
double Tensor::kink_gap() const { return checked().kink_gap; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no populated gradient");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!has_grad()) throw ContractError("tensor has no populated gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::clear_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const {
  return Tensor(checked().shape, node_->value, false);
}

Tape Tape::record(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward on an undefined tensor");
  if (loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        shape_to_string(loss.shape()));
  }
  const auto& root = loss.node();
  if (root->consumed) {
    throw ContractError("graph already consumed by a previous backward; run a fresh forward pass");
  }
  if (!root->requires_grad) throw ContractError("loss is not on the tape (no operand requires grad)");

  Tape tape;
  tape.root_ = loss;
  // Iterative post-order DFS yields a topological order (parents first).
  std::unordered_set<const detail::Node*> visited{root.get()};
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto node = stack.back().first;
    const std::size_t next = stack.back().second++;
    if (next < node->parents.size()) {
      const auto& parent = node->parents[next];
      if (parent->requires_grad && visited.insert(parent.get()).second) {
        if (parent->consumed) {
          throw ContractError("graph already consumed by a previous backward; run a fresh forward pass");
        }
        stack.emplace_back(parent, 0);
      }
    } else {
      tape.order_.push_back(std::move(node));
      stack.pop_back();
    }
  }
  return tape;
}

double Tape::min_kink_gap() const {
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& n : order_) gap = std::min(gap, n->kink_gap);
  return gap;
}

void Tape::backward() {
  if (order_.empty()) throw ContractError("tape is empty or already replayed");
  for (auto& n : order_) {
    if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
    if (!n->is_leaf) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  order_.back()->grad[0] += 1.0;

  std::vector<std::span<double>> parent_grads;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    auto& n = **it;
    if (n.is_leaf) continue;
    parent_grads.clear();
    for (auto& p : n.parents) {
      parent_grads.push_back(p->requires_grad ? std::span<double>(p->grad)
                                              : std::span<double>());
    }
    n.backward(BackwardArgs{n.grad, n.value, parent_grads});
  }
  for (auto& n : order_) {
    if (n->is_leaf) continue;
    n->backward = nullptr;
    n->parents.clear();
    n->consumed = true;
  }
  order_.clear();
  root_ = Tensor();
}

void backward(const Tensor& loss) { Tape::record(loss).backward(); }

}  // namespace sirnet
