#include "sirnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sirnet {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

struct AxisView {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_to_string(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return Tensor::from_op(a.shape(), std::move(out), {a}, op,
                         [a, deriv](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           auto x = a.data();
                           for (std::size_t i = 0; i < x.size(); ++i) {
                             ga[i] += g.grad_out[i] * deriv(x[i], g.value_out[i]);
                           }
                         });
}

double min_abs(std::span<const double> x) {
  double m = kInf;
  for (double v : x) m = std::min(m, std::abs(v));
  return m;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    auto x = a.data();
    auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return Tensor::from_op(a.shape(), std::move(out), {a, b}, "add",
                           [](const BackwardArgs& g) {
                             for (auto pg : g.parent_grads) {
                               for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g.grad_out[i];
                             }
                           });
  }
  if (b.rank() == 1 && a.rank() >= 1 && a.shape().back() == b.dim(0)) {
    const std::size_t cols = b.dim(0);
    auto x = a.data();
    auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i % cols];
    return Tensor::from_op(a.shape(), std::move(out), {a, b}, "add",
                           [cols](const BackwardArgs& g) {
                             auto ga = g.parent_grads[0];
                             auto gb = g.parent_grads[1];
                             for (std::size_t i = 0; i < g.grad_out.size(); ++i) {
                               if (!ga.empty()) ga[i] += g.grad_out[i];
                               if (!gb.empty()) gb[i % cols] += g.grad_out[i];
                             }
                           });
  }
  throw DimensionError("add: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                       shape_to_string(b.shape()));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, "sub",
                         [](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           auto gb = g.parent_grads[1];
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.grad_out[i];
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g.grad_out[i];
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, "mul",
                         [a, b](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           auto gb = g.parent_grads[1];
                           auto x = a.data();
                           auto y = b.data();
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.grad_out[i] * y[i];
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g.grad_out[i] * x[i];
                         });
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary("add_scalar", a, [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  // d|t|/dt at 0 is taken as 0.
  auto out = unary("abs", a, [](double x) { return std::abs(x); },
                   [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
  if (out.requires_grad()) out.node()->kink_gap = min_abs(a.data());
  return out;
}

Tensor relu(const Tensor& a) {
  // Derivative at 0 is taken as 0.
  auto out = unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                   [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
  if (out.requires_grad()) out.node()->kink_gap = min_abs(a.data());
  return out;
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a,
               [](double x) {
                 if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                 const double e = std::exp(x);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      if (xv == 0.0) continue;
      const double* yr = &y[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += xv * yr[j];
    }
  }
  return Tensor::from_op(Shape{m, n}, std::move(out), {a, b}, "matmul",
                         [a, b, m, k, n](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           auto gb = g.parent_grads[1];
                           auto x = a.data();
                           auto y = b.data();
                           const auto& go = g.grad_out;
                           if (!ga.empty()) {
                             // dA = dOut * B^T
                             for (std::size_t i = 0; i < m; ++i) {
                               for (std::size_t p = 0; p < k; ++p) {
                                 double acc = 0.0;
                                 for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * y[p * n + j];
                                 ga[i * k + p] += acc;
                               }
                             }
                           }
                           if (!gb.empty()) {
                             // dB = A^T * dOut
                             for (std::size_t i = 0; i < m; ++i) {
                               for (std::size_t p = 0; p < k; ++p) {
                                 const double xv = x[i * k + p];
                                 if (xv == 0.0) continue;
                                 for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += xv * go[i * n + j];
                               }
                             }
                           }
                         });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::from_op(Shape{}, {s}, {a}, "sum", [](const BackwardArgs& g) {
    auto ga = g.parent_grads[0];
    for (auto& v : ga) v += g.grad_out[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  const auto v = axis_view("sum_axis", a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  auto x = a.data();
  std::vector<double> out(v.outer * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t l = 0; l < v.len; ++l) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        out[o * v.inner + i] += x[(o * v.len + l) * v.inner + i];
      }
    }
  }
  return Tensor::from_op(std::move(out_shape), std::move(out), {a}, "sum_axis",
                         [v](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           for (std::size_t o = 0; o < v.outer; ++o) {
                             for (std::size_t l = 0; l < v.len; ++l) {
                               for (std::size_t i = 0; i < v.inner; ++i) {
                                 ga[(o * v.len + l) * v.inner + i] += g.grad_out[o * v.inner + i];
                               }
                             }
                           }
                         });
}

Tensor l1_norm(const Tensor& a) { return sum(abs(a)); }

Tensor l2_norm_sq(const Tensor& a) { return sum(square(a)); }

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto v = axis_view("softmax", a.shape(), axis);
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const auto at = [&](std::size_t l) { return (o * v.len + l) * v.inner + i; };
      double mx = -kInf;
      for (std::size_t l = 0; l < v.len; ++l) mx = std::max(mx, x[at(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < v.len; ++l) {
        out[at(l)] = std::exp(x[at(l)] - mx);
        z += out[at(l)];
      }
      for (std::size_t l = 0; l < v.len; ++l) out[at(l)] /= z;
    }
  }
  return Tensor::from_op(a.shape(), std::move(out), {a}, "softmax", [v](const BackwardArgs& g) {
    auto ga = g.parent_grads[0];
    const auto& y = g.value_out;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const auto at = [&](std::size_t l) { return (o * v.len + l) * v.inner + i; };
        double dot = 0.0;
        for (std::size_t l = 0; l < v.len; ++l) dot += g.grad_out[at(l)] * y[at(l)];
        for (std::size_t l = 0; l < v.len; ++l) ga[at(l)] += y[at(l)] * (g.grad_out[at(l)] - dot);
      }
    }
  });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const auto v = axis_view("log_softmax", a.shape(), axis);
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const auto at = [&](std::size_t l) { return (o * v.len + l) * v.inner + i; };
      double mx = -kInf;
      for (std::size_t l = 0; l < v.len; ++l) mx = std::max(mx, x[at(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < v.len; ++l) z += std::exp(x[at(l)] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t l = 0; l < v.len; ++l) out[at(l)] = x[at(l)] - lse;
    }
  }
  return Tensor::from_op(a.shape(), std::move(out), {a}, "log_softmax",
                         [v](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           const auto& y = g.value_out;
                           for (std::size_t o = 0; o < v.outer; ++o) {
                             for (std::size_t i = 0; i < v.inner; ++i) {
                               const auto at = [&](std::size_t l) {
                                 return (o * v.len + l) * v.inner + i;
                               };
                               double total = 0.0;
                               for (std::size_t l = 0; l < v.len; ++l) total += g.grad_out[at(l)];
                               for (std::size_t l = 0; l < v.len; ++l) {
                                 ga[at(l)] += g.grad_out[at(l)] - std::exp(y[at(l)]) * total;
                               }
                             }
                           }
                         });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  const Shape& ref = parts.front().shape();
  axis_view("concat", ref, axis);
  std::vector<std::size_t> lens;
  std::size_t total_len = 0;
  for (const auto& p : parts) {
    bool ok = p.rank() == ref.size();
    for (std::size_t d = 0; ok && d < ref.size(); ++d) {
      if (d != axis && p.shape()[d] != ref[d]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: shape mismatch " + shape_to_string(ref) + " vs " +
                           shape_to_string(p.shape()) + " along axis " + std::to_string(axis));
    }
    lens.push_back(p.dim(axis));
    total_len += p.dim(axis);
  }
  Shape out_shape = ref;
  out_shape[axis] = total_len;
  const auto v = axis_view("concat", out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto x = parts[k].data();
    for (std::size_t o = 0; o < v.outer; ++o) {
      std::copy_n(&x[o * lens[k] * v.inner], lens[k] * v.inner,
                  &out[(o * v.len + offset) * v.inner]);
    }
    offset += lens[k];
  }
  return Tensor::from_op(std::move(out_shape), std::move(out), parts, "concat",
                         [v, lens](const BackwardArgs& g) {
                           std::size_t offset = 0;
                           for (std::size_t k = 0; k < lens.size(); ++k) {
                             auto gk = g.parent_grads[k];
                             if (!gk.empty()) {
                               for (std::size_t o = 0; o < v.outer; ++o) {
                                 for (std::size_t e = 0; e < lens[k] * v.inner; ++e) {
                                   gk[o * lens[k] * v.inner + e] +=
                                       g.grad_out[(o * v.len + offset) * v.inner + e];
                                 }
                               }
                             }
                             offset += lens[k];
                           }
                         });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto v = axis_view("slice", a.shape(), axis);
  if (begin > end || end > v.len) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for shape " + shape_to_string(a.shape()) + " on axis " +
                         std::to_string(axis));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t width = (end - begin) * v.inner;
  auto x = a.data();
  std::vector<double> out(v.outer * width);
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(&x[(o * v.len + begin) * v.inner], width, &out[o * width]);
  }
  return Tensor::from_op(std::move(out_shape), std::move(out), {a}, "slice",
                         [v, begin, width](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           for (std::size_t o = 0; o < v.outer; ++o) {
                             for (std::size_t e = 0; e < width; ++e) {
                               ga[(o * v.len + begin) * v.inner + e] += g.grad_out[o * width + e];
                             }
                           }
                         });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                         shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::from_op(std::move(shape), std::move(out), {a}, "reshape",
                         [](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.grad_out[i];
                         });
}

Tensor mask_mul(const Tensor& a, std::span<const double> mask) {
  if (mask.size() != a.numel()) {
    throw DimensionError("mask_mul: tensor " + shape_to_string(a.shape()) + " vs mask of " +
                         std::to_string(mask.size()) + " elements");
  }
  std::vector<double> m(mask.begin(), mask.end());
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * m[i];
  return Tensor::from_op(a.shape(), std::move(out), {a}, "mask_mul",
                         [m = std::move(m)](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.grad_out[i] * m[i];
                         });
}

Tensor squash(const Tensor& a) {
  if (a.rank() == 0) throw DimensionError("squash: needs at least rank 1, got scalar");
  const std::size_t d = a.shape().back();
  const std::size_t rows = d == 0 ? 0 : a.numel() / d;
  auto x = a.data();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* v = &x[r * d];
    double n2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) n2 += v[j] * v[j];
    if (n2 == 0.0) continue;
    const double n = std::sqrt(n2);
    // |out| = n^2 / (1 + n^2), capped below 1 for huge inputs.
    const double factor = std::min(n2 / (1.0 + n2), 1.0 - 0x1p-53) / n;
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = factor * v[j];
  }
  return Tensor::from_op(a.shape(), std::move(out), {a}, "squash", [a, d, rows](const BackwardArgs& g) {
    auto ga = g.parent_grads[0];
    auto x = a.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* v = &x[r * d];
      const double* go = &g.grad_out[r * d];
      double n2 = 0.0;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        n2 += v[j] * v[j];
        dot += v[j] * go[j];
      }
      if (n2 == 0.0) continue;  // derivative of squash at the origin is 0
      const double n = std::sqrt(n2);
      const double s = n / (1.0 + n2);
      // ds/dn divided by n
      const double ds = (1.0 - n2) / ((1.0 + n2) * (1.0 + n2)) / n;
      for (std::size_t j = 0; j < d; ++j) ga[r * d + j] += s * go[j] + ds * dot * v[j];
    }
  });
}

Tensor select_per_row(const Tensor& a, std::span<const std::size_t> index) {
  if (a.rank() != 2 || index.size() != a.dim(0)) {
    throw DimensionError("select_per_row: tensor " + shape_to_string(a.shape()) + " vs " +
                         std::to_string(index.size()) + " indices");
  }
  const std::size_t cols = a.dim(1);
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= cols) {
      throw DimensionError("select_per_row: index " + std::to_string(idx[r]) +
                           " out of range for shape " + shape_to_string(a.shape()));
    }
    out[r] = a.data()[r * cols + idx[r]];
  }
  return Tensor::from_op(Shape{idx.size()}, std::move(out), {a}, "select_per_row",
                         [idx, cols](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           for (std::size_t r = 0; r < idx.size(); ++r) {
                             ga[r * cols + idx[r]] += g.grad_out[r];
                           }
                         });
}

Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw DimensionError("pairwise_sq_dist: incompatible shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0);
  const std::size_t n = b.dim(0);
  const std::size_t d = a.dim(1);
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[i * d + k] - y[j * d + k];
        acc += diff * diff;
      }
      out[i * n + j] = acc;
    }
  }
  return Tensor::from_op(Shape{m, n}, std::move(out), {a, b}, "pairwise_sq_dist",
                         [a, b, m, n, d](const BackwardArgs& g) {
                           auto ga = g.parent_grads[0];
                           auto gb = g.parent_grads[1];
                           auto x = a.data();
                           auto y = b.data();
                           for (std::size_t i = 0; i < m; ++i) {
                             for (std::size_t j = 0; j < n; ++j) {
                               const double go = 2.0 * g.grad_out[i * n + j];
                               for (std::size_t k = 0; k < d; ++k) {
                                 const double diff = x[i * d + k] - y[j * d + k];
                                 if (!ga.empty()) ga[i * d + k] += go * diff;
                                 if (!gb.empty()) gb[j * d + k] -= go * diff;
                               }
                             }
                           }
                         });
}

}  // namespace sirnet
