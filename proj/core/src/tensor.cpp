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
#include "meshflow/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "meshflow/error.h"

namespace meshflow {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kCycle: return "cycle";
    case ErrorCode::kConsistency: return "consistency";
    case ErrorCode::kCompile: return "compile";
    case ErrorCode::kRuntime: return "runtime";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kDeadlock: return "deadlock";
    case ErrorCode::kOutOfMemory: return "out-of-memory";
    case ErrorCode::kCapacity: return "capacity";
    case ErrorCode::kRouting: return "routing";
  }
  return "unknown";
}

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) { n *= d; }
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) { os << (i ? "," : "") << shape[i]; }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (int64_t d : shape_) {
    MF_CHECK(d >= 1, ErrorCode::kShape, "tensor extents must be positive, got ", ShapeToString(shape_));
  }
  MF_CHECK(static_cast<int64_t>(data_.size()) == NumElements(shape_), ErrorCode::kShape,
           "data length ", data_.size(), " does not match shape ", ShapeToString(shape_));
}

Tensor Tensor::Filled(const Shape& shape, double value) {
  return Tensor(shape, std::vector<double>(NumElements(shape), value));
}

std::string Tensor::DebugString() const {
  std::ostringstream os;
  os.precision(17);
  os << ShapeToString(shape_) << " {";
  for (size_t i = 0; i < data_.size(); ++i) { os << (i ? "," : "") << data_[i]; }
  os << "}";
  return os.str();
}

namespace {

void CheckSameShape(const Tensor& a, const Tensor& b, const char* what) {
  MF_CHECK(a.shape() == b.shape(), ErrorCode::kShape, what, ": shape mismatch ",
           ShapeToString(a.shape()), " vs ", ShapeToString(b.shape()));
}

// Splits a row-major index space into (outer, axis, inner) strides.
struct AxisView {
  int64_t outer = 1;
  int64_t extent = 1;
  int64_t inner = 1;
};

AxisView ViewAround(const Shape& shape, int64_t axis) {
  AxisView v;
  for (int64_t i = 0; i < axis; ++i) { v.outer *= shape[i]; }
  v.extent = shape[axis];
  for (int64_t i = axis + 1; i < static_cast<int64_t>(shape.size()); ++i) { v.inner *= shape[i]; }
  return v;
}

void CheckAxis(const Tensor& t, int64_t axis) {
  MF_CHECK(axis >= 0 && axis < t.rank(), ErrorCode::kShape, "axis ", axis,
           " out of range for rank ", t.rank());
}

}  // namespace

double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  CheckSameShape(a, b, "MaxAbsDiff");
  double worst = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    double d = a[i] == b[i] ? 0.0 : std::fabs(a[i] - b[i]);
    if (std::isnan(d)) { d = INFINITY; }
    worst = std::max(worst, d);
  }
  return worst;
}

bool AllClose(const Tensor& a, const Tensor& b, double tol) {
  return a.shape() == b.shape() && MaxAbsDiff(a, b) <= tol;
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  MF_CHECK(a.rank() == 2 && b.rank() == 2, ErrorCode::kShape, "matmul expects rank-2 operands, got ",
           ShapeToString(a.shape()), " and ", ShapeToString(b.shape()));
  MF_CHECK(a.extent(1) == b.extent(0), ErrorCode::kShape, "matmul inner dimension mismatch ",
           ShapeToString(a.shape()), " x ", ShapeToString(b.shape()));
  const int64_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  std::vector<double> out(m * n, 0.0);
  auto ad = a.data();
  auto bd = b.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double aip = ad[i * k + p];
      for (int64_t j = 0; j < n; ++j) { out[i * n + j] += aip * bd[p * n + j]; }
    }
  }
  return Tensor({m, n}, std::move(out));
}

Tensor Add(const Tensor& a, const Tensor& b) {
  CheckSameShape(a, b, "add");
  Tensor out = a;
  auto od = out.mutable_data();
  for (int64_t i = 0; i < out.numel(); ++i) { od[i] += b[i]; }
  return out;
}

Tensor ElementwiseMax(const Tensor& a, const Tensor& b) {
  CheckSameShape(a, b, "max");
  Tensor out = a;
  auto od = out.mutable_data();
  for (int64_t i = 0; i < out.numel(); ++i) { od[i] = std::max(od[i], b[i]); }
  return out;
}

Tensor Relu(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.mutable_data()) { v = v > 0.0 ? v : 0.0; }
  return out;
}

Tensor Scale(const Tensor& t, double alpha) {
  Tensor out = t;
  for (double& v : out.mutable_data()) { v *= alpha; }
  return out;
}

Tensor ReduceSum(const Tensor& t, int64_t axis) {
  CheckAxis(t, axis);
  AxisView v = ViewAround(t.shape(), axis);
  Shape out_shape = t.shape();
  out_shape.erase(out_shape.begin() + axis);
  std::vector<double> out(v.outer * v.inner, 0.0);
  auto td = t.data();
  for (int64_t o = 0; o < v.outer; ++o) {
    for (int64_t a = 0; a < v.extent; ++a) {
      const double* row = td.data() + (o * v.extent + a) * v.inner;
      for (int64_t i = 0; i < v.inner; ++i) { out[o * v.inner + i] += row[i]; }
    }
  }
  return Tensor(std::move(out_shape), std::move(out));
}

Tensor Slice(const Tensor& t, int64_t axis, int64_t begin, int64_t length) {
  CheckAxis(t, axis);
  MF_CHECK(begin >= 0 && length >= 1 && begin + length <= t.extent(axis), ErrorCode::kShape,
           "slice [", begin, ",", begin + length, ") out of range on axis ", axis, " of ",
           ShapeToString(t.shape()));
  AxisView v = ViewAround(t.shape(), axis);
  Shape out_shape = t.shape();
  out_shape[axis] = length;
  std::vector<double> out;
  out.reserve(v.outer * length * v.inner);
  auto td = t.data();
  for (int64_t o = 0; o < v.outer; ++o) {
    const double* src = td.data() + (o * v.extent + begin) * v.inner;
    out.insert(out.end(), src, src + length * v.inner);
  }
  return Tensor(std::move(out_shape), std::move(out));
}

Tensor Concat(std::span<const Tensor> parts, int64_t axis) {
  MF_CHECK(!parts.empty(), ErrorCode::kShape, "concat of zero tensors");
  const Tensor& first = parts.front();
  CheckAxis(first, axis);
  Shape out_shape = first.shape();
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    MF_CHECK(p.rank() == first.rank(), ErrorCode::kShape, "concat rank mismatch");
    for (int64_t d = 0; d < p.rank(); ++d) {
      MF_CHECK(d == axis || p.extent(d) == first.extent(d), ErrorCode::kShape,
               "concat shape mismatch ", ShapeToString(p.shape()), " vs ", ShapeToString(first.shape()));
    }
    out_shape[axis] += p.extent(axis);
  }
  Tensor out = Tensor::Zeros(out_shape);
  int64_t offset = 0;
  for (const Tensor& p : parts) {
    Embed(out, p, axis, offset);
    offset += p.extent(axis);
  }
  return out;
}

void Embed(Tensor& dst, const Tensor& patch, int64_t axis, int64_t begin) {
  CheckAxis(dst, axis);
  MF_CHECK(patch.rank() == dst.rank(), ErrorCode::kShape, "embed rank mismatch");
  for (int64_t d = 0; d < dst.rank(); ++d) {
    MF_CHECK(d == axis || patch.extent(d) == dst.extent(d), ErrorCode::kShape, "embed shape mismatch ",
             ShapeToString(patch.shape()), " into ", ShapeToString(dst.shape()));
  }
  MF_CHECK(begin >= 0 && begin + patch.extent(axis) <= dst.extent(axis), ErrorCode::kShape,
           "embed out of range");
  AxisView v = ViewAround(dst.shape(), axis);
  const int64_t len = patch.extent(axis);
  auto pd = patch.data();
  auto dd = dst.mutable_data();
  for (int64_t o = 0; o < v.outer; ++o) {
    std::copy(pd.begin() + o * len * v.inner, pd.begin() + (o + 1) * len * v.inner,
              dd.begin() + (o * v.extent + begin) * v.inner);
  }
}

int Arity(OpType type) {
  switch (type) {
    case OpType::kMatMul:
    case OpType::kAdd: return 2;
    case OpType::kRelu:
    case OpType::kReduceSum:
    case OpType::kIdentity: return 1;
    case OpType::kSource: return 0;
  }
  return 0;
}

const char* OpTypeName(OpType type) {
  switch (type) {
    case OpType::kMatMul: return "matmul";
    case OpType::kAdd: return "add";
    case OpType::kRelu: return "relu";
    case OpType::kReduceSum: return "reduce_sum";
    case OpType::kIdentity: return "identity";
    case OpType::kSource: return "source";
  }
  return "?";
}

bool ParseOpType(const std::string& name, OpType* out) {
  for (OpType t : {OpType::kMatMul, OpType::kAdd, OpType::kRelu, OpType::kReduceSum,
                   OpType::kIdentity, OpType::kSource}) {
    if (name == OpTypeName(t)) {
      *out = t;
      return true;
    }
  }
  return false;
}

std::string OpKindToString(const OpKind& kind) {
  std::string s = OpTypeName(kind.type);
  if (kind.type == OpType::kReduceSum) { s += "(" + std::to_string(kind.axis) + ")"; }
  return s;
}

Tensor ApplyKernel(const OpKind& kind, std::span<const Tensor> inputs) {
  MF_CHECK(static_cast<int>(inputs.size()) == Arity(kind.type), ErrorCode::kInvalidArgument,
           OpKindToString(kind), " expects ", Arity(kind.type), " inputs, got ", inputs.size());
  switch (kind.type) {
    case OpType::kMatMul: return MatMul(inputs[0], inputs[1]);
    case OpType::kAdd: return Add(inputs[0], inputs[1]);
    case OpType::kRelu: return Relu(inputs[0]);
    case OpType::kReduceSum: return ReduceSum(inputs[0], kind.axis);
    case OpType::kIdentity: return inputs[0];
    case OpType::kSource: break;
  }
  Throw(ErrorCode::kInvalidArgument, "source ops have no kernel");
}

Shape InferKernelShape(const OpKind& kind, std::span<const Shape> inputs) {
  MF_CHECK(static_cast<int>(inputs.size()) == Arity(kind.type), ErrorCode::kInvalidArgument,
           OpKindToString(kind), " expects ", Arity(kind.type), " inputs, got ", inputs.size());
  switch (kind.type) {
    case OpType::kMatMul: {
      const Shape& a = inputs[0];
      const Shape& b = inputs[1];
      MF_CHECK(a.size() == 2 && b.size() == 2 && a[1] == b[0], ErrorCode::kShape,
               "matmul shape conflict ", ShapeToString(a), " x ", ShapeToString(b));
      return {a[0], b[1]};
    }
    case OpType::kAdd:
      MF_CHECK(inputs[0] == inputs[1], ErrorCode::kShape, "add shape conflict ",
               ShapeToString(inputs[0]), " vs ", ShapeToString(inputs[1]));
      return inputs[0];
    case OpType::kRelu:
    case OpType::kIdentity: return inputs[0];
    case OpType::kReduceSum: {
      Shape s = inputs[0];
      MF_CHECK(kind.axis >= 0 && kind.axis < static_cast<int64_t>(s.size()), ErrorCode::kShape,
               "reduce_sum axis ", kind.axis, " out of range for ", ShapeToString(s));
      s.erase(s.begin() + kind.axis);
      return s;
    }
    case OpType::kSource: break;
  }
  Throw(ErrorCode::kInvalidArgument, "source ops have no kernel");
}

double KernelFlops(const OpKind& kind, std::span<const Shape> inputs) {
  switch (kind.type) {
    case OpType::kMatMul:
      return 2.0 * static_cast<double>(inputs[0][0]) * static_cast<double>(inputs[0][1]) *
             static_cast<double>(inputs[1][1]);
    case OpType::kAdd:
    case OpType::kRelu:
    case OpType::kReduceSum: return static_cast<double>(NumElements(inputs[0]));
    case OpType::kIdentity:
    case OpType::kSource: return 0.0;
  }
  return 0.0;
}

}  // namespace meshflow
