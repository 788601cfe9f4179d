#include "csagan/core/tensor.hpp"

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <unordered_set>

namespace csagan {

namespace {
std::atomic<Precision> g_precision{Precision::kF64};
}  // namespace

void set_precision(Precision p) { g_precision.store(p); }
Precision precision() { return g_precision.load(); }

const char* precision_name(Precision p) {
  return p == Precision::kF32 ? "f32" : "f64";
}

Precision parse_precision(const std::string& name) {
  if (name == "f32") return Precision::kF32;
  if (name == "f64") return Precision::kF64;
  throw std::invalid_argument("unknown precision '" + name +
                              "' (expected f32 or f64)");
}

Precision precision_from_env(Precision fallback) {
  const char* value = std::getenv("CSAGAN_PRECISION");
  if (value == nullptr || *value == '\0') return fallback;
  return parse_precision(value);
}

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t extent : shape) {
    if (extent < 0) throw DimensionError("negative extent in shape");
    n *= extent;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

void round_to_precision(std::span<double> values) {
  if (precision() != Precision::kF32) return;
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

Tensor wrap_impl(std::shared_ptr<TensorImpl> impl) {
  return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->op = "leaf";
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const int64_t n = shape_numel(shape);
  return from_data(std::move(shape),
                   std::vector<double>(static_cast<size_t>(n), value));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t = from_data(std::move(shape), std::move(data));
  t.impl_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("undefined tensor");
  return impl_->shape;
}

int64_t Tensor::size(int d) const {
  const Shape& s = shape();
  if (d < 0) d += static_cast<int>(s.size());
  if (d < 0 || d >= static_cast<int>(s.size())) {
    throw DimensionError("axis out of range for shape " + shape_str(s));
  }
  return s[static_cast<size_t>(d)];
}

int64_t Tensor::numel() const {
  return static_cast<int64_t>(impl_ ? impl_->data.size() : 0);
}

std::span<const double> Tensor::data() const {
  if (!impl_) throw std::logic_error("undefined tensor");
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!impl_) throw std::logic_error("undefined tensor");
  if (impl_->backward_fn) {
    throw std::logic_error("in-place write to a non-leaf tensor");
  }
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw DimensionError("index rank mismatch");
  int64_t flat = 0;
  size_t d = 0;
  for (int64_t i : index) {
    if (i < 0 || i >= s[d]) throw DimensionError("index out of range");
    flat = flat * s[d] + i;
    ++d;
  }
  return impl_->data[static_cast<size_t>(flat)];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!impl_) throw std::logic_error("undefined tensor");
  impl_->requires_grad = flag;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!impl_) throw std::logic_error("undefined tensor");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

bool Tensor::has_graph() const {
  return impl_ && static_cast<bool>(impl_->backward_fn);
}

const std::string& Tensor::op_name() const {
  if (!impl_) throw std::logic_error("undefined tensor");
  return impl_->op;
}

Tensor Tensor::detach() const {
  return from_data(shape(), impl_->data);
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.impl_->requires_grad = impl_->requires_grad && !impl_->backward_fn;
  return t;
}

Tensor make_result(Shape shape, std::vector<double> data, std::string op,
                   std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward_fn) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw DimensionError(op + ": result size mismatch");
  }
  round_to_precision(data);
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->op = std::move(op);
  bool needs_grad = false;
  for (const Tensor& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (needs_grad && backward_fn) {
    impl->requires_grad = true;
    impl->backward_fn = std::move(backward_fn);
    impl->parents.reserve(inputs.size());
    for (const Tensor& in : inputs) impl->parents.push_back(in.impl_ptr());
  }
  return Tensor(std::move(impl));
}

std::vector<Tensor> backward(const Tensor& loss) {
  if (!loss.defined()) throw std::logic_error("backward on undefined tensor");
  if (loss.numel() != 1) {
    throw DimensionError("backward requires a scalar loss, got shape " +
                         shape_str(loss.shape()));
  }
  if (!loss.has_graph()) {
    throw std::logic_error("backward on a tensor with no graph record");
  }

  // Iterative post-order DFS yields a topological order.
  std::vector<std::shared_ptr<TensorImpl>> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<std::shared_ptr<TensorImpl>, size_t>> stack;
  stack.emplace_back(loss.impl_ptr(), 0);
  visited.insert(loss.impl());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      std::shared_ptr<TensorImpl> parent = node->parents[next++];
      if (parent->requires_grad && visited.insert(parent.get()).second) {
        stack.emplace_back(std::move(parent), 0);
      }
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }

  loss.impl()->ensure_grad()[0] += 1.0;
  std::vector<Tensor> leaves;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl& node = **it;
    if (node.backward_fn) {
      if (!node.grad.empty()) node.backward_fn(node);
    } else {
      leaves.push_back(wrap_impl(*it));
    }
  }
  return leaves;
}

}  // namespace csagan
