// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fusegraph/error.hpp"
#include "fusegraph/quant_params.hpp"
#include "fusegraph/tensor.hpp"

namespace fusegraph {

// Operator vocabulary. Fused and quantized kinds are produced only by the
// rewrite passes, never by model generators.
enum class OpKind : uint8_t {
  MatMul,
  Add,
  Sub,
  Mul,
  Div,
  Softmax,
  Transpose,
  Reshape,
  Concat,
  Split,
  Slice,
  Pad,
  ReduceMean,
  Sqrt,
  Pow,
  Relu,
  Sigmoid,
  Gather,
  Conv1D,
  LogSoftmax,
  LayerNorm,
  FusedAttention,
  FusedRelPosAttention,
  QMatMul,
  QAttention,
  QRelPosAttention,
};

const char* op_name(OpKind kind);
std::optional<OpKind> op_from_name(const std::string& name);
bool is_fused_kind(OpKind kind);
bool is_quantized_kind(OpKind kind);

// Attribute values: 64-bit scalar int, 64-bit float, or int list.
using Attr = std::variant<int64_t, double, std::vector<int64_t>>;
using AttrMap = std::map<std::string, Attr>;

struct Node {
  std::string id;
  OpKind kind = OpKind::MatMul;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  AttrMap attrs;

  bool has_attr(const std::string& key) const { return attrs.count(key) > 0; }
  int64_t attr_int(const std::string& key) const;
  int64_t attr_int_or(const std::string& key, int64_t fallback) const;
  double attr_float(const std::string& key) const;
  double attr_float_or(const std::string& key, double fallback) const;
  const std::vector<int64_t>& attr_ints(const std::string& key) const;
};

// One dimension of a static shape: a concrete extent or the single symbolic
// sequence length. Symbolic dims act as wildcards during inference; concrete
// extents are bound per run.
struct Dim {
  int64_t value = 0;
  bool symbolic = false;

  static Dim concrete(int64_t v) { return Dim{v, false}; }
  static Dim sym() { return Dim{0, true}; }
  bool operator==(const Dim& other) const {
    return symbolic == other.symbolic && (symbolic || value == other.value);
  }
  std::string to_string() const;
};

struct ValueInfo {
  std::string name;
  DType dtype = DType::F32;
  std::vector<Dim> dims;

  std::string to_string() const;
};

struct Graph {
  std::string name;
  std::vector<ValueInfo> inputs;
  std::vector<std::string> outputs;
  std::vector<Node> nodes;
  std::map<std::string, Tensor> initializers;
  // Quantization parameters for I8 initializers, keyed by initializer name.
  std::map<std::string, QuantParams> quant_params;
  // Filled by infer_shapes; not serialized (recomputable).
  std::map<std::string, ValueInfo> value_info;

  bool has_initializer(const std::string& name) const {
    return initializers.count(name) > 0;
  }
  const Tensor& initializer(const std::string& name) const;
  const ValueInfo* find_input(const std::string& name) const;
  // Producing node of a value, or nullptr for graph inputs / initializers.
  const Node* producer(const std::string& value) const;
};

// Structural checks: name resolution, single production, per-kind arity and
// attribute completeness, acyclicity. Returns every violation found.
std::vector<std::string> validate(const Graph& g);
// Throws FormatError carrying all diagnostics.
void validate_or_throw(const Graph& g);

// Annotates every value with (dtype, dims) in g.value_info and returns it.
// Requires a valid graph; throws ShapeError naming the offending node on
// inconsistent concrete dims. Idempotent.
const std::map<std::string, ValueInfo>& infer_shapes(Graph& g);

// Deterministic topological order: producers first, ties broken by node id.
std::vector<const Node*> topo_order(const Graph& g);

// Consumers of each value, in node-list order.
std::map<std::string, std::vector<const Node*>> build_consumers(const Graph& g);

// Structural equality ignoring value_info (node list, inputs/outputs, attrs,
// initializer bits, quant params).
bool graphs_identical(const Graph& a, const Graph& b);

}  // namespace fusegraph
