#ifndef CRAN_OPS_HPP_
#define CRAN_OPS_HPP_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "cran/tensor.hpp"

namespace cran::ad {

// Differentiable primitives. Each op records itself on the active tape when
// at least one input requires a gradient; the numeric result never depends
// on whether recording happens. Shape errors throw std::invalid_argument
// naming the op and the offending shapes.

// (m x k) * (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
// Same shapes, or b an (rows x 1) column broadcast across a's columns.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
// Elementwise product, same shapes.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// max(0, x) elementwise; also serves as the hinge clamp.
Tensor relu(const Tensor& a);
// Row-wise, max-subtracted.
Tensor softmax(const Tensor& a);
// input (C_in x T), weight (C_out x C_in x W), bias (C_out x 1)
// -> (C_out x T-W+1). Valid mode, stride 1.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias);
// Temporal max over windows of `width` columns advanced by `stride`.
Tensor maxpool1d(const Tensor& input, std::size_t width, std::size_t stride);
// axis 0 stacks rows (equal column counts), axis 1 stacks columns.
Tensor concat(std::span<const Tensor> parts, int axis);
// Sum of elementwise products of two same-shape tensors -> (1 x 1).
Tensor dot(const Tensor& a, const Tensor& b);
// Mean over columns: (r x c) -> (r x 1).
Tensor mean_cols(const Tensor& a);
// Sum of all entries -> (1 x 1).
Tensor sum(const Tensor& a);
Tensor transpose(const Tensor& a);
// Columns `indices` of a, in the given order.
Tensor gather_cols(const Tensor& a, std::span<const std::size_t> indices);
Tensor column(const Tensor& a, std::size_t index);

enum class OpKind {
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kTanh,
  kSigmoid,
  kRelu,
  kSoftmax,
  kConv1d,
  kMaxPool1d,
  kConcat,
  kDot,
  kMeanCols,
  kSum,
  kTranspose,
  kGatherCols,
};

struct OpAttrs {
  double factor = 1.0;
  std::size_t width = 3;
  std::size_t stride = 3;
  int axis = 0;
  std::vector<std::size_t> indices;
};

std::string_view op_name(OpKind kind);
std::span<const OpKind> all_op_kinds();

// Uniform entry point over every primitive.
Tensor forward_op(OpKind kind, std::span<const Tensor> inputs,
                  const OpAttrs& attrs = {});

}  // namespace cran::ad

#endif  // CRAN_OPS_HPP_
