#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dbdn {

/// Raised for any shape, channel or geometry mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// (batch, channels, height, width). Row-major storage with w fastest.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

class Tape;

/// Reference-counted 4-D float tensor. Copies share storage; the value is
/// treated as immutable once produced by an op, only the gradient buffer is
/// written during backward. Parameters are the exception: optimizers update
/// their data in place through data_mut().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const float> data() const { return impl_->data; }
  std::span<float> data_mut() { return impl_->data; }
  float item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const float> grad() const { return impl_->grad; }
  /// Gradient buffer, allocated zero-filled on first access.
  std::span<float> grad_mut() const;
  void zero_grad();

  std::optional<std::size_t> node_id() const { return impl_->node; }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  /// Deep copy of values only; the clone is a fresh leaf.
  Tensor clone() const;

 private:
  friend class Tape;

  struct Impl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;
    bool requires_grad = false;
    std::optional<std::size_t> node;
    const Tape* tape = nullptr;
  };
  std::shared_ptr<Impl> impl_;
};

/// Dynamically recorded computation graph. Nodes are appended in execution
/// order, so insertion order is a topological order and backward simply walks
/// the list in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  /// Appends a node producing `output` from `inputs`. `backward` reads
  /// output.grad() and accumulates into the inputs that require grad.
  std::size_t record(std::string op, std::vector<Tensor> inputs, Tensor output,
                     BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable tensor.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  std::string_view op_name(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<Tensor>& inputs(std::size_t id) const {
    return nodes_.at(id).inputs;
  }
  void clear();

  /// Tape that ops currently record into, or nullptr (inference mode).
  static Tape* active();

 private:
  friend class TapeScope;

  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

/// Makes `tape` the recording target for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// True when an op on these operands must be recorded.
bool needs_recording(std::initializer_list<const Tensor*> operands);
bool needs_recording(std::span<const Tensor> operands);

}  // namespace dbdn
