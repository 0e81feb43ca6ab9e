#include "cran/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cran/tape.hpp"

namespace cran::ad {

namespace {

[[noreturn]] void shape_error(std::string_view op, const Tensor& a,
                              const Tensor& b, std::string_view what = {}) {
  std::string msg = std::string(op) + ": shape mismatch " +
                    shape_str(a.shape()) + " vs " + shape_str(b.shape());
  if (!what.empty()) msg += " (" + std::string(what) + ")";
  throw std::invalid_argument(msg);
}

void require_defined(std::string_view op, const Tensor& t) {
  if (!t.defined()) {
    throw std::invalid_argument(std::string(op) + ": undefined input");
  }
}

void require_rank2(std::string_view op, const Tensor& t) {
  require_defined(op, t);
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected a matrix, got " +
                                shape_str(t.shape()));
  }
}

std::vector<double>& grad_of(TensorImpl* t) {
  if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
  return t->grad;
}

// Returns the tape to record on, or nullptr when nothing participates.
Tape* recording(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = active_tape();
  if (!tape) return nullptr;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

void attach(Tape* tape, std::vector<std::shared_ptr<TensorImpl>> inputs,
            Tensor& out, Tape::Backward backward) {
  out.impl()->requires_grad = true;
  out.impl()->is_leaf = false;
  tape->record(std::move(inputs), out.shared(), std::move(backward));
}

template <typename Fwd, typename Deriv>
Tensor unary_elementwise(const Tensor& a, Fwd fwd, Deriv deriv) {
  require_defined("elementwise", a);
  auto src = a.data();
  std::vector<double> data(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) data[i] = fwd(src[i]);
  Tensor out = make_result(a.shape(), std::move(data));
  if (Tape* tape = recording({&a})) {
    TensorImpl* A = a.impl();
    TensorImpl* O = out.impl();
    attach(tape, {a.shared()}, out, [A, O, deriv] {
      if (!A->requires_grad) return;
      auto& ga = grad_of(A);
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] += O->grad[i] * deriv(A->data[i], O->data[i]);
      }
    });
  }
  return out;
}

Tensor add_or_sub(const Tensor& a, const Tensor& b, double sign,
                  std::string_view op) {
  require_defined(op, a);
  require_defined(op, b);
  const bool same = a.shape() == b.shape();
  const bool broadcast = !same && a.rank() == 2 && b.rank() == 2 &&
                         b.cols() == 1 && b.rows() == a.rows();
  if (!same && !broadcast) shape_error(op, a, b);

  const std::size_t rows = a.rows();
  const std::size_t cols = same ? a.size() / rows : a.cols();
  auto x = a.data();
  auto y = b.data();
  std::vector<double> data(x.size());
  if (same) {
    for (std::size_t i = 0; i < x.size(); ++i) data[i] = x[i] + sign * y[i];
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        data[r * cols + c] = x[r * cols + c] + sign * y[r];
      }
    }
  }
  Tensor out = make_result(a.shape(), std::move(data));
  if (Tape* tape = recording({&a, &b})) {
    TensorImpl* A = a.impl();
    TensorImpl* B = b.impl();
    TensorImpl* O = out.impl();
    attach(tape, {a.shared(), b.shared()}, out,
           [A, B, O, sign, same, rows, cols] {
             const auto& g = O->grad;
             if (A->requires_grad) {
               auto& ga = grad_of(A);
               for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
             }
             if (B->requires_grad) {
               auto& gb = grad_of(B);
               if (same) {
                 for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
               } else {
                 for (std::size_t r = 0; r < rows; ++r) {
                   double s = 0.0;
                   for (std::size_t c = 0; c < cols; ++c) s += g[r * cols + c];
                   gb[r] += sign * s;
                 }
               }
             }
           });
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) shape_error("matmul", a, b, "inner dimensions");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  auto x = a.data();
  auto y = b.data();
  std::vector<double> data(m * n, 0.0);
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = x.data() + i * k;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        s0 += arow[p] * y[p];
        s1 += arow[p + 1] * y[p + 1];
        s2 += arow[p + 2] * y[p + 2];
        s3 += arow[p + 3] * y[p + 3];
      }
      for (; p < k; ++p) s0 += arow[p] * y[p];
      data[i] = (s0 + s1) + (s2 + s3);
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* row = data.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double v = x[i * k + p];
        if (v == 0.0) continue;
        const double* brow = y.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += v * brow[j];
      }
    }
  }
  Tensor out = make_result({m, n}, std::move(data));
  if (Tape* tape = recording({&a, &b})) {
    TensorImpl* A = a.impl();
    TensorImpl* B = b.impl();
    TensorImpl* O = out.impl();
    attach(tape, {a.shared(), b.shared()}, out, [A, B, O, m, k, n] {
      const auto& g = O->grad;
      if (A->requires_grad) {
        auto& ga = grad_of(A);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              s += g[i * n + j] * B->data[p * n + j];
            }
            ga[i * k + p] += s;
          }
        }
      }
      if (B->requires_grad) {
        auto& gb = grad_of(B);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double v = A->data[i * k + p];
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += v * g[i * n + j];
          }
        }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return add_or_sub(a, b, 1.0, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return add_or_sub(a, b, -1.0, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined("mul", a);
  require_defined("mul", b);
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  auto x = a.data();
  auto y = b.data();
  std::vector<double> data(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) data[i] = x[i] * y[i];
  Tensor out = make_result(a.shape(), std::move(data));
  if (Tape* tape = recording({&a, &b})) {
    TensorImpl* A = a.impl();
    TensorImpl* B = b.impl();
    TensorImpl* O = out.impl();
    attach(tape, {a.shared(), b.shared()}, out, [A, B, O] {
      const auto& g = O->grad;
      if (A->requires_grad) {
        auto& ga = grad_of(A);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B->data[i];
      }
      if (B->requires_grad) {
        auto& gb = grad_of(B);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A->data[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  return unary_elementwise(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor tanh(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elementwise(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& a) {
  require_rank2("softmax", a);
  const std::size_t rows = a.rows(), cols = a.cols();
  auto x = a.data();
  std::vector<double> data(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * cols;
    double* out = data.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = std::exp(in[c] - mx);
      total += out[c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[c] /= total;
  }
  Tensor out = make_result(a.shape(), std::move(data));
  if (Tape* tape = recording({&a})) {
    TensorImpl* A = a.impl();
    TensorImpl* O = out.impl();
    attach(tape, {a.shared()}, out, [A, O, rows, cols] {
      auto& ga = grad_of(A);
      const auto& g = O->grad;
      const auto& y = O->data;
      for (std::size_t r = 0; r < rows; ++r) {
        double inner = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          inner += g[r * cols + c] * y[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) {
          ga[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - inner);
        }
      }
    });
  }
  return out;
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank2("conv1d", input);
  require_defined("conv1d", weight);
  require_rank2("conv1d", bias);
  if (weight.rank() != 3) {
    throw std::invalid_argument("conv1d: weight must be [out x in x width], got " +
                                shape_str(weight.shape()));
  }
  const std::size_t out_ch = weight.shape()[0];
  const std::size_t in_ch = weight.shape()[1];
  const std::size_t width = weight.shape()[2];
  if (input.rows() != in_ch) shape_error("conv1d", input, weight, "channels");
  if (bias.rows() != out_ch || bias.cols() != 1) {
    shape_error("conv1d", weight, bias, "bias");
  }
  const std::size_t steps = input.cols();
  if (steps < width) {
    throw std::invalid_argument("conv1d: sequence of " + std::to_string(steps) +
                                " frames shorter than kernel width " +
                                std::to_string(width));
  }
  const std::size_t out_len = steps - width + 1;
  auto x = input.data();
  auto w = weight.data();
  auto b = bias.data();
  // one-hot text leaves most input rows empty
  std::vector<std::size_t> live;
  for (std::size_t c = 0; c < in_ch; ++c) {
    const double* xrow = x.data() + c * steps;
    if (std::any_of(xrow, xrow + steps, [](double v) { return v != 0.0; })) {
      live.push_back(c);
    }
  }
  std::vector<double> data(out_ch * out_len);
  for (std::size_t o = 0; o < out_ch; ++o) {
    double* out = data.data() + o * out_len;
    std::fill(out, out + out_len, b[o]);
    for (std::size_t c : live) {
      const double* xrow = x.data() + c * steps;
      for (std::size_t k = 0; k < width; ++k) {
        const double wv = w[(o * in_ch + c) * width + k];
        for (std::size_t t = 0; t < out_len; ++t) out[t] += wv * xrow[t + k];
      }
    }
  }
  Tensor out = make_result({out_ch, out_len}, std::move(data));
  if (Tape* tape = recording({&input, &weight, &bias})) {
    TensorImpl* X = input.impl();
    TensorImpl* W = weight.impl();
    TensorImpl* B = bias.impl();
    TensorImpl* O = out.impl();
    attach(tape, {input.shared(), weight.shared(), bias.shared()}, out,
           [X, W, B, O, out_ch, in_ch, width, steps, out_len] {
             const auto& g = O->grad;
             if (B->requires_grad) {
               auto& gb = grad_of(B);
               for (std::size_t o = 0; o < out_ch; ++o) {
                 double s = 0.0;
                 for (std::size_t t = 0; t < out_len; ++t) s += g[o * out_len + t];
                 gb[o] += s;
               }
             }
             if (W->requires_grad) {
               auto& gw = grad_of(W);
               for (std::size_t o = 0; o < out_ch; ++o) {
                 const double* grow = g.data() + o * out_len;
                 for (std::size_t c = 0; c < in_ch; ++c) {
                   const double* xrow = X->data.data() + c * steps;
                   for (std::size_t k = 0; k < width; ++k) {
                     double s = 0.0;
                     for (std::size_t t = 0; t < out_len; ++t) {
                       s += grow[t] * xrow[t + k];
                     }
                     gw[(o * in_ch + c) * width + k] += s;
                   }
                 }
               }
             }
             if (X->requires_grad) {
               auto& gx = grad_of(X);
               for (std::size_t o = 0; o < out_ch; ++o) {
                 const double* grow = g.data() + o * out_len;
                 for (std::size_t c = 0; c < in_ch; ++c) {
                   double* gxrow = gx.data() + c * steps;
                   for (std::size_t k = 0; k < width; ++k) {
                     const double wv = W->data[(o * in_ch + c) * width + k];
                     for (std::size_t t = 0; t < out_len; ++t) {
                       gxrow[t + k] += wv * grow[t];
                     }
                   }
                 }
               }
             }
           });
  }
  return out;
}

Tensor maxpool1d(const Tensor& input, std::size_t width, std::size_t stride) {
  require_rank2("maxpool1d", input);
  if (width == 0 || stride == 0) {
    throw std::invalid_argument("maxpool1d: width and stride must be positive");
  }
  const std::size_t rows = input.rows(), steps = input.cols();
  if (steps < width) {
    throw std::invalid_argument("maxpool1d: sequence of " +
                                std::to_string(steps) +
                                " frames shorter than pool width " +
                                std::to_string(width));
  }
  const std::size_t out_len = (steps - width) / stride + 1;
  auto x = input.data();
  std::vector<double> data(rows * out_len);
  std::vector<std::size_t> argmax(rows * out_len);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = r * steps + t * stride;
      for (std::size_t k = 1; k < width; ++k) {
        const std::size_t idx = r * steps + t * stride + k;
        if (x[idx] > x[best]) best = idx;
      }
      data[r * out_len + t] = x[best];
      argmax[r * out_len + t] = best;
    }
  }
  Tensor out = make_result({rows, out_len}, std::move(data));
  if (Tape* tape = recording({&input})) {
    TensorImpl* X = input.impl();
    TensorImpl* O = out.impl();
    attach(tape, {input.shared()}, out, [X, O, argmax = std::move(argmax)] {
      auto& gx = grad_of(X);
      for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += O->grad[i];
    });
  }
  return out;
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) {
    throw std::invalid_argument("concat: axis must be 0 or 1");
  }
  for (const auto& p : parts) require_rank2("concat", p);
  const Tensor& first = parts.front();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (axis == 0 && p.cols() != first.cols()) shape_error("concat", first, p);
    if (axis == 1 && p.rows() != first.rows()) shape_error("concat", first, p);
    total += axis == 0 ? p.rows() : p.cols();
  }
  const std::size_t rows = axis == 0 ? total : first.rows();
  const std::size_t cols = axis == 0 ? first.cols() : total;
  std::vector<double> data(rows * cols);
  // Offset of each part along the concatenation axis.
  std::vector<std::size_t> offsets;
  offsets.reserve(parts.size());
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    auto src = p.data();
    if (axis == 0) {
      std::copy(src.begin(), src.end(), data.begin() + offset * cols);
      offset += p.rows();
    } else {
      const std::size_t pc = p.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(src.begin() + r * pc, pc, data.begin() + r * cols + offset);
      }
      offset += pc;
    }
  }
  Tensor out = make_result({rows, cols}, std::move(data));
  Tape* tape = active_tape();
  const bool any = std::any_of(parts.begin(), parts.end(),
                               [](const Tensor& p) { return p.requires_grad(); });
  if (tape && any) {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::vector<TensorImpl*> raw;
    for (const auto& p : parts) {
      inputs.push_back(p.shared());
      raw.push_back(p.impl());
    }
    TensorImpl* O = out.impl();
    attach(tape, std::move(inputs), out,
           [raw = std::move(raw), offsets = std::move(offsets), O, axis, cols] {
             for (std::size_t i = 0; i < raw.size(); ++i) {
               TensorImpl* P = raw[i];
               if (!P->requires_grad) continue;
               auto& gp = grad_of(P);
               const std::size_t pr = P->shape[0];
               const std::size_t pc = P->shape[1];
               for (std::size_t r = 0; r < pr; ++r) {
                 for (std::size_t c = 0; c < pc; ++c) {
                   const std::size_t src =
                       axis == 0 ? (offsets[i] + r) * cols + c
                                 : r * cols + offsets[i] + c;
                   gp[r * pc + c] += O->grad[src];
                 }
               }
             }
           });
  }
  return out;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_defined("dot", a);
  require_defined("dot", b);
  if (a.shape() != b.shape()) shape_error("dot", a, b);
  auto x = a.data();
  auto y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  Tensor out = make_result({1, 1}, {s});
  if (Tape* tape = recording({&a, &b})) {
    TensorImpl* A = a.impl();
    TensorImpl* B = b.impl();
    TensorImpl* O = out.impl();
    attach(tape, {a.shared(), b.shared()}, out, [A, B, O] {
      const double g = O->grad[0];
      if (A->requires_grad) {
        auto& ga = grad_of(A);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * B->data[i];
      }
      if (B->requires_grad) {
        auto& gb = grad_of(B);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * A->data[i];
      }
    });
  }
  return out;
}

Tensor mean_cols(const Tensor& a) {
  require_rank2("mean", a);
  const std::size_t rows = a.rows(), cols = a.cols();
  auto x = a.data();
  std::vector<double> data(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += x[r * cols + c];
    data[r] = s / static_cast<double>(cols);
  }
  Tensor out = make_result({rows, 1}, std::move(data));
  if (Tape* tape = recording({&a})) {
    TensorImpl* A = a.impl();
    TensorImpl* O = out.impl();
    attach(tape, {a.shared()}, out, [A, O, rows, cols] {
      auto& ga = grad_of(A);
      const double inv = 1.0 / static_cast<double>(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += O->grad[r] * inv;
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  require_defined("sum", a);
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor out = make_result({1, 1}, {s});
  if (Tape* tape = recording({&a})) {
    TensorImpl* A = a.impl();
    TensorImpl* O = out.impl();
    attach(tape, {a.shared()}, out, [A, O] {
      auto& ga = grad_of(A);
      for (auto& g : ga) g += O->grad[0];
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank2("transpose", a);
  const std::size_t rows = a.rows(), cols = a.cols();
  auto x = a.data();
  std::vector<double> data(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) data[c * rows + r] = x[r * cols + c];
  }
  Tensor out = make_result({cols, rows}, std::move(data));
  if (Tape* tape = recording({&a})) {
    TensorImpl* A = a.impl();
    TensorImpl* O = out.impl();
    attach(tape, {a.shared()}, out, [A, O, rows, cols] {
      auto& ga = grad_of(A);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += O->grad[c * rows + r];
      }
    });
  }
  return out;
}

Tensor gather_cols(const Tensor& a, std::span<const std::size_t> indices) {
  require_rank2("gather_cols", a);
  if (indices.empty()) throw std::invalid_argument("gather_cols: no indices");
  const std::size_t rows = a.rows(), cols = a.cols(), n = indices.size();
  for (auto idx : indices) {
    if (idx >= cols) {
      throw std::invalid_argument("gather_cols: column " + std::to_string(idx) +
                                  " out of range for shape " +
                                  shape_str(a.shape()));
    }
  }
  auto x = a.data();
  std::vector<double> data(rows * n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) data[r * n + j] = x[r * cols + indices[j]];
  }
  Tensor out = make_result({rows, n}, std::move(data));
  if (Tape* tape = recording({&a})) {
    TensorImpl* A = a.impl();
    TensorImpl* O = out.impl();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    attach(tape, {a.shared()}, out, [A, O, rows, cols, idx = std::move(idx)] {
      auto& ga = grad_of(A);
      const std::size_t n = idx.size();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) ga[r * cols + idx[j]] += O->grad[r * n + j];
      }
    });
  }
  return out;
}

Tensor column(const Tensor& a, std::size_t index) {
  const std::array<std::size_t, 1> idx{index};
  return gather_cols(a, idx);
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kRelu: return "relu";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kMaxPool1d: return "maxpool1d";
    case OpKind::kConcat: return "concat";
    case OpKind::kDot: return "dot";
    case OpKind::kMeanCols: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kGatherCols: return "gather_cols";
  }
  return "unknown";
}

std::span<const OpKind> all_op_kinds() {
  static constexpr std::array kinds{
      OpKind::kMatMul,   OpKind::kAdd,       OpKind::kSub,
      OpKind::kMul,      OpKind::kScale,     OpKind::kTanh,
      OpKind::kSigmoid,  OpKind::kRelu,      OpKind::kSoftmax,
      OpKind::kConv1d,   OpKind::kMaxPool1d, OpKind::kConcat,
      OpKind::kDot,      OpKind::kMeanCols,  OpKind::kSum,
      OpKind::kTranspose, OpKind::kGatherCols};
  return kinds;
}

Tensor forward_op(OpKind kind, std::span<const Tensor> inputs,
                  const OpAttrs& attrs) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw std::invalid_argument(std::string(op_name(kind)) + ": expected " +
                                  std::to_string(n) + " inputs, got " +
                                  std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::kMatMul: need(2); return matmul(inputs[0], inputs[1]);
    case OpKind::kAdd: need(2); return add(inputs[0], inputs[1]);
    case OpKind::kSub: need(2); return sub(inputs[0], inputs[1]);
    case OpKind::kMul: need(2); return mul(inputs[0], inputs[1]);
    case OpKind::kScale: need(1); return scale(inputs[0], attrs.factor);
    case OpKind::kTanh: need(1); return tanh(inputs[0]);
    case OpKind::kSigmoid: need(1); return sigmoid(inputs[0]);
    case OpKind::kRelu: need(1); return relu(inputs[0]);
    case OpKind::kSoftmax: need(1); return softmax(inputs[0]);
    case OpKind::kConv1d: need(3); return conv1d(inputs[0], inputs[1], inputs[2]);
    case OpKind::kMaxPool1d:
      need(1);
      return maxpool1d(inputs[0], attrs.width, attrs.stride);
    case OpKind::kConcat: return concat(inputs, attrs.axis);
    case OpKind::kDot: need(2); return dot(inputs[0], inputs[1]);
    case OpKind::kMeanCols: need(1); return mean_cols(inputs[0]);
    case OpKind::kSum: need(1); return sum(inputs[0]);
    case OpKind::kTranspose: need(1); return transpose(inputs[0]);
    case OpKind::kGatherCols: need(1); return gather_cols(inputs[0], attrs.indices);
  }
  throw std::invalid_argument("forward_op: unknown kind");
}

}  // namespace cran::ad
