#include "graphage/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace graphage {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

static std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
        n *= e;
    }
    return n;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
    node_->shape = std::move(shape);
    node_->value.assign(shape_numel(node_->shape), fill);
    node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    if (n != values.size()) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
}

std::vector<double>& Tensor::grad() const {
    if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
    return node_->grad;
}

const std::vector<double>* Tensor::grad_if_present() const {
    return node_->grad.empty() ? nullptr : &node_->grad;
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::clone() const {
    Tensor out(node_->shape, node_->value, node_->requires_grad);
    return out;
}

void Tensor::check_finite(const char* op) const {
    for (double v : node_->value) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by ") + op);
        }
    }
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_step) {
    steps_.push_back(std::move(backward_step));
}

std::size_t Tape::backward(Tensor& loss) {
    if (loss.size() != 1) {
        throw ShapeError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    }
    loss.grad()[0] = 1.0;
    std::size_t executed = 0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
        (*it)();
        ++executed;
    }
    return executed;
}

}  // namespace graphage
