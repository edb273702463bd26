#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sirnet/errors.hpp"

namespace sirnet {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Arguments handed to a backward rule. `parent_grads[i]` is empty when the
// i-th parent does not participate in gradient computation.
struct BackwardArgs {
  std::span<const double> grad_out;
  std::span<const double> value_out;
  std::span<const std::span<double>> parent_grads;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until populated by a backward pass
  bool requires_grad = false;
  bool is_leaf = true;
  bool consumed = false;
  const char* op = "leaf";
  // Smallest distance of any input of a piecewise op to its kink.
  double kink_gap = std::numeric_limits<double>::infinity();
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

}  // namespace detail

/// Dense row-major f64 array with optional participation in reverse-mode
/// differentiation. Copies share the underlying node (handle semantics), so
/// a parameter tensor held by a model and by an optimizer is one object.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  /// Builds the result of a custom op. The result joins the tape only when at
  /// least one parent requires grad; otherwise `backward` is dropped.
  static Tensor from_op(Shape shape, std::vector<double> values,
                        const std::vector<Tensor>& parents, const char* op,
                        BackwardFn backward,
                        double kink_gap = std::numeric_limits<double>::infinity());

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable view; only leaves may be written.
  std::span<double> mutable_data();
  double at(std::size_t flat_index) const;
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  const char* op_name() const;
  double kink_gap() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad();

  /// Same values, cut off from the tape.
  Tensor detach() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const detail::Node& checked() const;

  std::shared_ptr<detail::Node> node_;
};

/// The ordered record of operations that produced a scalar loss. Nodes are
/// stored in topological order; backward visits them in reverse, once each.
class Tape {
 public:
  static Tape record(const Tensor& loss);

  std::size_t size() const { return order_.size(); }
  double min_kink_gap() const;

  /// Accumulates d(loss)/d(leaf) into every reachable leaf that requires
  /// grad. Consumes the recorded graph.
  void backward();

 private:
  Tensor root_;
  std::vector<std::shared_ptr<detail::Node>> order_;
};

void backward(const Tensor& loss);

/// While alive, ops on this thread record nothing on the tape.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace sirnet
