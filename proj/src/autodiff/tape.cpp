#include "cran/tape.hpp"

#include <stdexcept>
#include <unordered_set>

namespace cran::ad {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) {
  g_active_tape = nullptr;
}

NoGradScope::~NoGradScope() { g_active_tape = previous_; }

void Tape::record(std::vector<std::shared_ptr<TensorImpl>> inputs,
                  std::shared_ptr<TensorImpl> output, Backward backward) {
  nodes_.push_back({std::move(inputs), std::move(output), std::move(backward)});
}

GradientMap Tape::backprop(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backprop: undefined loss");
  if (loss.size() != 1) {
    throw std::invalid_argument("backprop: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }
  GradientMap result;
  if (!loss.requires_grad()) return result;
  if (nodes_.empty()) throw std::logic_error("backprop: empty tape");

  TensorImpl* root = loss.impl();
  if (root->is_leaf) {
    // A leaf used directly as the loss.
    if (root->grad.empty()) root->grad.assign(1, 0.0);
    root->grad[0] += 1.0;
    result.emplace(root, root->grad);
    return result;
  }

  // Intermediate buffers may hold stale values from an earlier sweep.
  for (auto& node : nodes_) node.output->grad.clear();
  root->grad.assign(1, 1.0);

  std::unordered_set<TensorImpl*> leaves;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not upstream of the loss
    it->backward();
    for (const auto& in : it->inputs) {
      if (in->requires_grad && in->is_leaf) leaves.insert(in.get());
    }
  }
  for (auto* leaf : leaves) {
    if (!leaf->grad.empty()) result.emplace(leaf, leaf->grad);
  }
  for (auto& node : nodes_) {
    node.output->grad.clear();
    node.output->grad.shrink_to_fit();
  }
  return result;
}

}  // namespace cran::ad
