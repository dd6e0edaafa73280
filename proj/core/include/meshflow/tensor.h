/*
Copyright 2026 The Meshflow Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#ifndef MESHFLOW_TENSOR_H_
#define MESHFLOW_TENSOR_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace meshflow {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Row-major dense f64 tensor. A rank-0 tensor (empty shape) is a scalar
// holding exactly one element; it only arises as the result of reducing a
// rank-1 tensor.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Zeros(const Shape& shape) { return Filled(shape, 0.0); }
  static Tensor Filled(const Shape& shape, double value);
  static Tensor Scalar(double value) { return Tensor({}, {value}); }

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t extent(int64_t axis) const { return shape_.at(axis); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  int64_t bytes() const { return numel() * static_cast<int64_t>(sizeof(double)); }

  std::span<const double> data() const { return data_; }
  std::span<double> mutable_data() { return data_; }
  double operator[](int64_t i) const { return data_[i]; }

  // Bit-exact equality of shape and values.
  bool operator==(const Tensor& other) const = default;

  std::string DebugString() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Largest |a - b| over all elements; throws on shape mismatch.
double MaxAbsDiff(const Tensor& a, const Tensor& b);
bool AllClose(const Tensor& a, const Tensor& b, double tol);

Tensor MatMul(const Tensor& a, const Tensor& b);
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Relu(const Tensor& a);
Tensor ReduceSum(const Tensor& t, int64_t axis);
Tensor Scale(const Tensor& t, double alpha);
Tensor ElementwiseMax(const Tensor& a, const Tensor& b);

// Contiguous range [begin, begin + length) along `axis`.
Tensor Slice(const Tensor& t, int64_t axis, int64_t begin, int64_t length);
Tensor Concat(std::span<const Tensor> parts, int64_t axis);
// Copies `patch` into `dst` at offset `begin` along `axis`.
void Embed(Tensor& dst, const Tensor& patch, int64_t axis, int64_t begin);

enum class OpType { kMatMul, kAdd, kRelu, kReduceSum, kIdentity, kSource };

struct OpKind {
  OpType type = OpType::kIdentity;
  int64_t axis = 0;  // ReduceSum only

  bool operator==(const OpKind&) const = default;
};

int Arity(OpType type);
const char* OpTypeName(OpType type);
// Accepts the names printed by OpTypeName.
bool ParseOpType(const std::string& name, OpType* out);
std::string OpKindToString(const OpKind& kind);

// Runs one kernel. Source has no kernel and is rejected here.
Tensor ApplyKernel(const OpKind& kind, std::span<const Tensor> inputs);
Shape InferKernelShape(const OpKind& kind, std::span<const Shape> inputs);
// Floating point operations of one kernel invocation on the given shapes.
double KernelFlops(const OpKind& kind, std::span<const Shape> inputs);

}  // namespace meshflow

#endif  // MESHFLOW_TENSOR_H_
