#include "fga/tape.hpp"

#include <string>

namespace fga {

void Tape::check(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw TapeError("node " + std::to_string(id) + " does not belong to this tape (detached tensor?)");
    }
}

NodeId Tape::constant(Tensor v) {
    nodes_.push_back(Node{std::move(v), Tensor(), false, nullptr});
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::input(Tensor v) {
    nodes_.push_back(Node{std::move(v), Tensor(), true, nullptr});
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::param(Variable& var) {
    nodes_.push_back(Node{var.value, Tensor(), true, &var});
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Tensor& Tape::value(NodeId id) const {
    check(id);
    return nodes_[static_cast<std::size_t>(id)].value;
}

const Tensor& Tape::grad(NodeId id) const {
    check(id);
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) {
        // Loss did not reach this node; expose a zero gradient lazily.
        const_cast<Node&>(n).grad = Tensor(n.value.shape(), 0.0);
    }
    return n.grad;
}

bool Tape::has_grad(NodeId id) const {
    check(id);
    return !nodes_[static_cast<std::size_t>(id)].grad.empty();
}

bool Tape::needs_grad(NodeId id) const {
    check(id);
    return nodes_[static_cast<std::size_t>(id)].needs_grad;
}

NodeId Tape::emit(Tensor value, bool needs_grad, std::nullptr_t) {
    nodes_.push_back(Node{std::move(value), Tensor(), needs_grad, nullptr});
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::emit_step(std::function<void(Tape&)> fn) {
    steps_.push_back(Step{std::move(fn)});
}

Tensor& Tape::grad_buffer(NodeId id) {
    check(id);
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) {
        n.grad = Tensor(n.value.shape(), 0.0);
    }
    return n.grad;
}

void Tape::backward(NodeId loss) {
    check(loss);
    const Node& loss_node = nodes_[static_cast<std::size_t>(loss)];
    if (loss_node.value.size() != 1) {
        throw ValueError("backward requires a scalar loss, got shape " + loss_node.value.shape().str());
    }
    grad_buffer(loss)[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
        it->fn(*this);
    }
    for (Node& n : nodes_) {
        if (n.var != nullptr && !n.grad.empty()) {
            Tensor& g = n.var->grad;
            for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
    }
}

} // namespace fga
