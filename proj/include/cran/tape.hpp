#ifndef CRAN_TAPE_HPP_
#define CRAN_TAPE_HPP_

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "cran/tensor.hpp"

namespace cran::ad {

// Leaf tensor -> d(loss)/d(leaf), keyed by the leaf's storage.
using GradientMap = std::unordered_map<const TensorImpl*, std::vector<double>>;

// Define-by-run record of the operations executed while the tape is active.
// Nodes are appended in execution order, so operands always precede the
// node that consumes them.
class Tape {
 public:
  using Backward = std::function<void()>;

  struct Node {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    Backward backward;
  };

  void record(std::vector<std::shared_ptr<TensorImpl>> inputs,
              std::shared_ptr<TensorImpl> output, Backward backward);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Reverse sweep from a scalar loss. Leaf gradients are accumulated into
  // each leaf's grad buffer; intermediate buffers are released afterwards.
  // Returns the accumulated gradient of every leaf reached.
  GradientMap backprop(const Tensor& loss);

  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

// Tape that operations record onto for the current thread, or nullptr.
Tape* active_tape();

// Makes `tape` the active tape for this thread until destroyed.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Disables recording for this thread until destroyed.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace cran::ad

#endif  // CRAN_TAPE_HPP_
