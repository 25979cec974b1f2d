#include "dbdn/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace dbdn {

namespace {
thread_local Tape* g_active_tape = nullptr;

void check_shape(const Shape& s) {
  if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
    throw ShapeError("tensor dims must all be >= 1, got " + s.str());
  }
}
}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill) : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  impl_->shape = shape;
  impl_->data.assign(shape.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  if (values.size() != shape.numel()) {
    throw ShapeError("data length " + std::to_string(values.size()) +
                     " does not match shape " + shape.str());
  }
  impl_->shape = shape;
  impl_->data = std::move(values);
}

float Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on non-scalar tensor " + shape().str());
  }
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

std::span<float> Tensor::grad_mut() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
  return impl_->grad;
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, impl_->data);
}

Tape::~Tape() { clear(); }

std::size_t Tape::record(std::string op, std::vector<Tensor> inputs,
                         Tensor output, BackwardFn backward) {
  const std::size_t id = nodes_.size();
  for (const Tensor& in : inputs) {
    if (in.impl_->tape == this && in.impl_->node && *in.impl_->node >= id) {
      throw std::logic_error("tape input recorded after its consumer");
    }
  }
  output.impl_->node = id;
  output.impl_->tape = this;
  output.impl_->requires_grad = true;
  nodes_.push_back({std::move(op), std::move(inputs), std::move(output),
                    std::move(backward)});
  return id;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss");
  }
  if (loss.impl_->tape != this || !loss.impl_->node) {
    throw std::logic_error("backward: loss was not recorded on this tape");
  }
  const std::size_t last = *loss.impl_->node;
  Tensor seed = loss;
  seed.grad_mut()[0] = 1.0f;
  for (std::size_t i = last + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.output.has_grad()) continue;
    node.backward();
  }
}

void Tape::clear() {
  for (Node& node : nodes_) {
    node.output.impl_->node.reset();
    node.output.impl_->tape = nullptr;
  }
  nodes_.clear();
}

Tape* Tape::active() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

bool needs_recording(std::initializer_list<const Tensor*> operands) {
  if (g_active_tape == nullptr) return false;
  return std::any_of(operands.begin(), operands.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

bool needs_recording(std::span<const Tensor> operands) {
  if (g_active_tape == nullptr) return false;
  return std::any_of(operands.begin(), operands.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

}  // namespace dbdn
