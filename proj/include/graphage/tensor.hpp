#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "graphage/errors.hpp"

namespace graphage {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Dense row-major double tensor with an optional gradient buffer.
// Value-semantic handle: copies share the underlying buffer (a Tensor is a
// node in the computation graph, not a container). Use clone() for a deep copy.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor scalar(double v, bool requires_grad = false);

    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }
    std::size_t rank() const { return node_->shape.size(); }

    double* data() { return node_->value.data(); }
    const double* data() const { return node_->value.data(); }
    std::vector<double>& values() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }

    double& operator()(std::size_t i) { return node_->value[i]; }
    double operator()(std::size_t i) const { return node_->value[i]; }
    double& operator()(std::size_t i, std::size_t j) {
        return node_->value[i * node_->shape[1] + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        return node_->value[i * node_->shape[1] + j];
    }

    // scalar read; throws UsageError-style ShapeError when size != 1
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool rg) { node_->requires_grad = rg; return *this; }

    // gradient buffer, allocated (zeroed) on first access; const-qualified
    // because copies share the node (handle semantics)
    std::vector<double>& grad() const;
    const std::vector<double>* grad_if_present() const;
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad();

    Tensor clone() const;  // deep copy of values (fresh grad, same requires_grad)

    bool defined() const { return node_ != nullptr; }
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    void check_finite(const char* op) const;

private:
    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;  // empty until requested; same length as value when present
        bool requires_grad = false;
    };
    std::shared_ptr<Node> node_ = std::make_shared<Node>();
};

// Wengert list of executed differentiable operations. Ops append a backward
// step at forward time; backward() replays the list in reverse, visiting each
// recorded op exactly once. One tape (and the tensors on it) per thread.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> backward_step);

    // Seeds d(loss)/d(loss) = 1 and replays the list in reverse.
    // Returns the number of backward steps executed.
    std::size_t backward(Tensor& loss);

    std::size_t op_count() const { return steps_.size(); }

    static Tape* active();

private:
    std::vector<std::function<void()>> steps_;
    Tape* prev_ = nullptr;
};

// True when a tape is active and any input requires grad: the op must record.
inline bool recording(const Tensor& a) {
    return Tape::active() != nullptr && a.requires_grad();
}
inline bool recording(const Tensor& a, const Tensor& b) {
    return Tape::active() != nullptr && (a.requires_grad() || b.requires_grad());
}

}  // namespace graphage
