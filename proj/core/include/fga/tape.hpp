#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "fga/tensor.hpp"

namespace fga {

using NodeId = std::int32_t;

/// Reverse-mode autodiff tape. Operations append their outputs in execution
/// order together with a backward rule; backward() replays the rules in
/// reverse, accumulating gradients exactly once per use, and finally adds
/// each parameter leaf's gradient into its bound Variable.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never needs a gradient (labels, masks, literals).
    NodeId constant(Tensor v);

    /// Leaf whose gradient is wanted (model inputs under a gradient check,
    /// Grad-CAM images).
    NodeId input(Tensor v);

    /// Leaf bound to a Variable; backward() accumulates into var.grad.
    NodeId param(Variable& var);

    const Tensor& value(NodeId id) const;
    /// Gradient of the loss w.r.t. this node; valid after backward(), zero
    /// tensor for nodes the loss does not depend on.
    const Tensor& grad(NodeId id) const;
    /// True once backward has deposited a gradient at this node.
    bool has_grad(NodeId id) const;
    bool needs_grad(NodeId id) const;
    std::size_t node_count() const { return nodes_.size(); }

    /// Runs the reverse sweep from a scalar loss node.
    void backward(NodeId loss);

    // --- operation-author interface ---

    /// Appends a computed node. Ops that need a backward rule call
    /// emit_step() right after, so the closure can capture the new id.
    NodeId emit(Tensor value, bool needs_grad, std::nullptr_t = nullptr);

    /// Appends a backward rule for the most recently emitted node.
    void emit_step(std::function<void(Tape&)> fn);

    /// Mutable gradient accumulation buffer (allocated on demand).
    Tensor& grad_buffer(NodeId id);

private:
    struct Node {
        Tensor value;
        Tensor grad;  // empty until touched by backward
        bool needs_grad = false;
        Variable* var = nullptr;
    };
    struct Step {
        std::function<void(Tape&)> fn;
    };

    void check(NodeId id) const;

    // deque keeps value()/grad() references stable while new nodes append
    std::deque<Node> nodes_;
    std::vector<Step> steps_;
};

} // namespace fga
