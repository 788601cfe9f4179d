#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace csagan {

// Engine-wide arithmetic precision. Values are stored as double; in f32 mode
// every op rounds its forward result to single precision and matrix products
// run in single precision. Set once before any computation.
enum class Precision { kF32, kF64 };

void set_precision(Precision p);
Precision precision();
const char* precision_name(Precision p);
Precision parse_precision(const std::string& name);

// Reads CSAGAN_PRECISION (f32 | f64); returns fallback when unset.
Precision precision_from_env(Precision fallback);

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

// Reference-counted handle to a node of the differentiation graph. Copies
// share storage. Values are only mutated in place for leaf parameters
// (optimizer updates) and gradients (accumulation during backward).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);
  // Leaf that participates in differentiation.
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int dim() const { return static_cast<int>(shape().size()); }
  int64_t size(int d) const;
  int64_t numel() const;

  std::span<const double> data() const;
  // In-place access; only legal on leaves (no graph record).
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<int64_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  bool has_graph() const;
  const std::string& op_name() const;

  // Same values, no graph linkage, no gradient.
  Tensor detach() const;
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_result(Shape, std::vector<double>, std::string,
                            std::vector<Tensor>,
                            std::function<void(TensorImpl&)>);
  friend Tensor wrap_impl(std::shared_ptr<TensorImpl>);
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::string op;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads this->grad and accumulates into parents' grads.
  std::function<void(TensorImpl&)> backward_fn;

  std::vector<double>& ensure_grad();
};

// Builds an op result. Rounds data to the engine precision. The backward
// closure is only retained when some input requires grad.
Tensor make_result(Shape shape, std::vector<double> data, std::string op,
                   std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward_fn);

Tensor wrap_impl(std::shared_ptr<TensorImpl> impl);

void round_to_precision(std::span<double> values);

// Reverse-mode accumulation from a scalar loss. Gradients sum across
// consumers. Returns every reachable leaf that requires grad.
std::vector<Tensor> backward(const Tensor& loss);

}  // namespace csagan
