// SPDX-License-Identifier: Apache-2.0

#include "fusegraph/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>

namespace fusegraph {

namespace {

struct AttrReq {
  const char* key;
  size_t which;  // variant index: 0 int, 1 float, 2 ints
};

struct OpSpec {
  int min_in;
  int max_in;  // -1 = unbounded
  int n_out;   // -1 = determined by "parts" attr
  std::vector<AttrReq> attrs;
};

const OpSpec& op_spec(OpKind kind) {
  static const std::map<OpKind, OpSpec> table = {
      {OpKind::MatMul, {2, 2, 1, {}}},
      {OpKind::Add, {2, 2, 1, {}}},
      {OpKind::Sub, {2, 2, 1, {}}},
      {OpKind::Mul, {2, 2, 1, {}}},
      {OpKind::Div, {2, 2, 1, {}}},
      {OpKind::Softmax, {1, 1, 1, {}}},
      {OpKind::Transpose, {1, 1, 1, {{"perm", 2}}}},
      {OpKind::Reshape, {1, 1, 1, {{"shape", 2}}}},
      {OpKind::Concat, {1, -1, 1, {{"axis", 0}}}},
      {OpKind::Split, {1, 1, -1, {{"axis", 0}, {"parts", 0}}}},
      {OpKind::Slice, {1, 1, 1, {{"axis", 0}, {"start", 0}, {"end", 0}}}},
      {OpKind::Pad, {1, 1, 1, {{"pads_begin", 2}, {"pads_end", 2}}}},
      {OpKind::ReduceMean, {1, 1, 1, {{"axes", 2}, {"keepdims", 0}}}},
      {OpKind::Sqrt, {1, 1, 1, {}}},
      {OpKind::Pow, {2, 2, 1, {}}},
      {OpKind::Relu, {1, 1, 1, {}}},
      {OpKind::Sigmoid, {1, 1, 1, {}}},
      {OpKind::Gather, {2, 2, 1, {}}},
      {OpKind::Conv1D, {2, 3, 1, {{"pad", 0}, {"groups", 0}}}},
      {OpKind::LogSoftmax, {1, 1, 1, {}}},
      {OpKind::LayerNorm, {3, 3, 1, {{"eps", 1}}}},
      {OpKind::FusedAttention, {3, 3, 1, {{"heads", 0}}}},
      {OpKind::FusedRelPosAttention, {7, 7, 1, {{"heads", 0}}}},
      {OpKind::QMatMul, {2, 3, 1, {}}},
      {OpKind::QAttention, {3, 3, 1, {{"heads", 0}}}},
      {OpKind::QRelPosAttention, {7, 7, 1, {{"heads", 0}}}},
  };
  return table.at(kind);
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::MatMul: return "MatMul";
    case OpKind::Add: return "Add";
    case OpKind::Sub: return "Sub";
    case OpKind::Mul: return "Mul";
    case OpKind::Div: return "Div";
    case OpKind::Softmax: return "Softmax";
    case OpKind::Transpose: return "Transpose";
    case OpKind::Reshape: return "Reshape";
    case OpKind::Concat: return "Concat";
    case OpKind::Split: return "Split";
    case OpKind::Slice: return "Slice";
    case OpKind::Pad: return "Pad";
    case OpKind::ReduceMean: return "ReduceMean";
    case OpKind::Sqrt: return "Sqrt";
    case OpKind::Pow: return "Pow";
    case OpKind::Relu: return "Relu";
    case OpKind::Sigmoid: return "Sigmoid";
    case OpKind::Gather: return "Gather";
    case OpKind::Conv1D: return "Conv1D";
    case OpKind::LogSoftmax: return "LogSoftmax";
    case OpKind::LayerNorm: return "LayerNorm";
    case OpKind::FusedAttention: return "FusedAttention";
    case OpKind::FusedRelPosAttention: return "FusedRelPosAttention";
    case OpKind::QMatMul: return "QMatMul";
    case OpKind::QAttention: return "QAttention";
    case OpKind::QRelPosAttention: return "QRelPosAttention";
  }
  return "?";
}

std::optional<OpKind> op_from_name(const std::string& name) {
  static const std::map<std::string, OpKind> table = [] {
    std::map<std::string, OpKind> m;
    for (int i = 0; i <= static_cast<int>(OpKind::QRelPosAttention); ++i) {
      const auto k = static_cast<OpKind>(i);
      m.emplace(op_name(k), k);
    }
    return m;
  }();
  const auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

bool is_fused_kind(OpKind kind) {
  return kind == OpKind::LayerNorm || kind == OpKind::FusedAttention ||
         kind == OpKind::FusedRelPosAttention;
}

bool is_quantized_kind(OpKind kind) {
  return kind == OpKind::QMatMul || kind == OpKind::QAttention ||
         kind == OpKind::QRelPosAttention;
}

int64_t Node::attr_int(const std::string& key) const {
  const auto it = attrs.find(key);
  if (it == attrs.end() || !std::holds_alternative<int64_t>(it->second)) {
    throw ConfigError("node " + id + ": missing int attr '" + key + "'");
  }
  return std::get<int64_t>(it->second);
}

int64_t Node::attr_int_or(const std::string& key, int64_t fallback) const {
  const auto it = attrs.find(key);
  if (it == attrs.end()) return fallback;
  return attr_int(key);
}

double Node::attr_float(const std::string& key) const {
  const auto it = attrs.find(key);
  if (it == attrs.end() || !std::holds_alternative<double>(it->second)) {
    throw ConfigError("node " + id + ": missing float attr '" + key + "'");
  }
  return std::get<double>(it->second);
}

double Node::attr_float_or(const std::string& key, double fallback) const {
  const auto it = attrs.find(key);
  if (it == attrs.end()) return fallback;
  return attr_float(key);
}

const std::vector<int64_t>& Node::attr_ints(const std::string& key) const {
  const auto it = attrs.find(key);
  if (it == attrs.end() || !std::holds_alternative<std::vector<int64_t>>(it->second)) {
    throw ConfigError("node " + id + ": missing ints attr '" + key + "'");
  }
  return std::get<std::vector<int64_t>>(it->second);
}

std::string Dim::to_string() const {
  return symbolic ? "L" : std::to_string(value);
}

std::string ValueInfo::to_string() const {
  std::ostringstream os;
  os << name << ": " << dtype_name(dtype) << "(";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i > 0) os << ", ";
    os << dims[i].to_string();
  }
  os << ")";
  return os.str();
}

const Tensor& Graph::initializer(const std::string& name) const {
  const auto it = initializers.find(name);
  if (it == initializers.end()) {
    throw ExecError("graph " + this->name + ": initializer '" + name + "' missing");
  }
  return it->second;
}

const ValueInfo* Graph::find_input(const std::string& name) const {
  for (const ValueInfo& vi : inputs) {
    if (vi.name == name) return &vi;
  }
  return nullptr;
}

const Node* Graph::producer(const std::string& value) const {
  for (const Node& n : nodes) {
    for (const std::string& out : n.outputs) {
      if (out == value) return &n;
    }
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

std::vector<std::string> validate(const Graph& g) {
  std::vector<std::string> diags;
  std::set<std::string> node_ids;
  std::map<std::string, std::string> produced_by;  // value -> "input"/"init"/node id

  for (const ValueInfo& vi : g.inputs) {
    if (!produced_by.emplace(vi.name, "input").second) {
      diags.push_back("value " + vi.name + " produced more than once");
    }
  }
  for (const auto& [name, t] : g.initializers) {
    (void)t;
    if (!produced_by.emplace(name, "initializer").second) {
      diags.push_back("value " + name + " produced more than once");
    }
  }
  for (const Node& n : g.nodes) {
    if (!node_ids.insert(n.id).second) {
      diags.push_back("duplicate node id " + n.id);
    }
    for (const std::string& out : n.outputs) {
      if (!produced_by.emplace(out, n.id).second) {
        diags.push_back("value " + out + " produced more than once");
      }
    }
  }

  for (const Node& n : g.nodes) {
    const OpSpec& spec = op_spec(n.kind);
    const int nin = static_cast<int>(n.inputs.size());
    if (nin < spec.min_in || (spec.max_in >= 0 && nin > spec.max_in)) {
      diags.push_back("node " + n.id + " (" + op_name(n.kind) + "): takes " +
                      std::to_string(spec.min_in) +
                      (spec.max_in == spec.min_in
                           ? ""
                           : (spec.max_in < 0 ? "+" : ".." + std::to_string(spec.max_in))) +
                      " inputs, has " + std::to_string(nin));
    }
    int expect_out = spec.n_out;
    if (expect_out < 0) {
      expect_out = n.has_attr("parts") &&
                           std::holds_alternative<int64_t>(n.attrs.at("parts"))
                       ? static_cast<int>(std::get<int64_t>(n.attrs.at("parts")))
                       : -1;
    }
    if (expect_out >= 0 && static_cast<int>(n.outputs.size()) != expect_out) {
      diags.push_back("node " + n.id + " (" + op_name(n.kind) + "): produces " +
                      std::to_string(expect_out) + " outputs, declares " +
                      std::to_string(n.outputs.size()));
    }
    for (const AttrReq& req : spec.attrs) {
      const auto it = n.attrs.find(req.key);
      if (it == n.attrs.end() || it->second.index() != req.which) {
        diags.push_back("node " + n.id + " (" + op_name(n.kind) +
                        "): missing attr '" + req.key + "'");
      }
    }
    for (const std::string& in : n.inputs) {
      if (produced_by.count(in) == 0) {
        diags.push_back("unresolved value " + in + " (input of node " + n.id + ")");
      }
    }
  }

  for (const std::string& out : g.outputs) {
    if (produced_by.count(out) == 0) {
      diags.push_back("unresolved value " + out + " (graph output)");
    }
  }

  // Cycle detection: repeatedly strip sources, then sinks; whatever remains
  // lies on a cycle.
  {
    std::map<std::string, size_t> producer_node;  // value -> node index
    for (size_t i = 0; i < g.nodes.size(); ++i) {
      for (const std::string& out : g.nodes[i].outputs) producer_node[out] = i;
    }
    const size_t n = g.nodes.size();
    std::vector<std::set<size_t>> succ(n), pred(n);
    for (size_t i = 0; i < n; ++i) {
      for (const std::string& in : g.nodes[i].inputs) {
        const auto it = producer_node.find(in);
        if (it != producer_node.end() && it->second != i) {
          succ[it->second].insert(i);
          pred[i].insert(it->second);
        }
      }
    }
    std::vector<bool> alive(n, true);
    bool changed = true;
    while (changed) {
      changed = false;
      for (size_t i = 0; i < n; ++i) {
        if (!alive[i]) continue;
        size_t in_deg = 0, out_deg = 0;
        for (size_t p : pred[i]) in_deg += alive[p] ? 1 : 0;
        for (size_t s : succ[i]) out_deg += alive[s] ? 1 : 0;
        if (in_deg == 0 || out_deg == 0) {
          alive[i] = false;
          changed = true;
        }
      }
    }
    std::vector<std::string> cyc;
    for (size_t i = 0; i < n; ++i) {
      if (alive[i]) cyc.push_back(g.nodes[i].id);
    }
    if (!cyc.empty()) {
      std::sort(cyc.begin(), cyc.end());
      std::string msg = "cycle through ";
      for (size_t i = 0; i < cyc.size(); ++i) {
        if (i > 0) msg += ", ";
        msg += cyc[i];
      }
      diags.push_back(msg);
    }
  }

  return diags;
}

void validate_or_throw(const Graph& g) {
  const std::vector<std::string> diags = validate(g);
  if (diags.empty()) return;
  std::string msg = "graph " + g.name + " invalid:";
  for (const std::string& d : diags) msg += "\n  " + d;
  throw FormatError(msg);
}

// ---------------------------------------------------------------------------
// shape inference
// ---------------------------------------------------------------------------

namespace {

using Dims = std::vector<Dim>;

Dims concrete_dims(const Shape& s) {
  Dims d;
  d.reserve(s.dims().size());
  for (int64_t v : s.dims()) d.push_back(Dim::concrete(v));
  return d;
}

[[noreturn]] void fail(const Node& n, const std::string& what) {
  throw ShapeError("node " + n.id + " (" + op_name(n.kind) + "): " + what);
}

std::string dims_str(const Dims& d) {
  std::string s = "(";
  for (size_t i = 0; i < d.size(); ++i) {
    if (i > 0) s += ", ";
    s += d[i].to_string();
  }
  return s + ")";
}

// Unify two extents that must agree at runtime. Symbolic defers to the
// concrete side; concrete mismatch is a static error.
Dim unify(const Node& n, Dim a, Dim b) {
  if (a.symbolic) return b;
  if (b.symbolic) return a;
  if (a.value != b.value) {
    fail(n, "extent mismatch " + a.to_string() + " vs " + b.to_string());
  }
  return a;
}

Dims broadcast_dims(const Node& n, const Dims& a, const Dims& b) {
  const size_t rank = std::max(a.size(), b.size());
  Dims out(rank);
  for (size_t i = 0; i < rank; ++i) {
    const Dim ad = i < rank - a.size() ? Dim::concrete(1) : a[i - (rank - a.size())];
    const Dim bd = i < rank - b.size() ? Dim::concrete(1) : b[i - (rank - b.size())];
    if (ad.symbolic && bd.symbolic) {
      out[i] = Dim::sym();
    } else if (ad.symbolic || bd.symbolic) {
      const Dim conc = ad.symbolic ? bd : ad;
      out[i] = conc.value == 1 ? Dim::sym() : conc;
    } else if (ad.value == bd.value) {
      out[i] = ad;
    } else if (ad.value == 1 || bd.value == 1) {
      out[i] = Dim::concrete(std::max(ad.value, bd.value));
    } else {
      fail(n, "cannot broadcast " + dims_str(a) + " with " + dims_str(b));
    }
  }
  return out;
}

void require_f32(const Node& n, const ValueInfo& vi) {
  if (vi.dtype != DType::F32) {
    fail(n, "operand " + vi.name + " must be f32, is " + dtype_name(vi.dtype));
  }
}

}  // namespace

const std::map<std::string, ValueInfo>& infer_shapes(Graph& g) {
  g.value_info.clear();
  auto& info = g.value_info;
  for (const ValueInfo& vi : g.inputs) info[vi.name] = vi;
  for (const auto& [name, t] : g.initializers) {
    info[name] = ValueInfo{name, t.dtype(), concrete_dims(t.shape())};
  }

  auto in_info = [&](const Node& n, size_t slot) -> const ValueInfo& {
    const auto it = info.find(n.inputs[slot]);
    if (it == info.end()) fail(n, "input " + n.inputs[slot] + " has no shape");
    return it->second;
  };
  auto set_out = [&](const Node& n, size_t slot, DType dt, Dims dims) {
    info[n.outputs[slot]] = ValueInfo{n.outputs[slot], dt, std::move(dims)};
  };

  for (const Node* np : topo_order(g)) {
    const Node& n = *np;
    switch (n.kind) {
      case OpKind::MatMul: {
        const ValueInfo& a = in_info(n, 0);
        const ValueInfo& b = in_info(n, 1);
        require_f32(n, a);
        require_f32(n, b);
        if (a.dims.size() < 2 || b.dims.size() < 2) {
          fail(n, "operands must have rank >= 2");
        }
        unify(n, a.dims[a.dims.size() - 1], b.dims[b.dims.size() - 2]);
        Dims batch = broadcast_dims(n, Dims(a.dims.begin(), a.dims.end() - 2),
                                    Dims(b.dims.begin(), b.dims.end() - 2));
        batch.push_back(a.dims[a.dims.size() - 2]);
        batch.push_back(b.dims[b.dims.size() - 1]);
        set_out(n, 0, DType::F32, std::move(batch));
        break;
      }
      case OpKind::Add:
      case OpKind::Sub:
      case OpKind::Mul:
      case OpKind::Div:
      case OpKind::Pow: {
        const ValueInfo& a = in_info(n, 0);
        const ValueInfo& b = in_info(n, 1);
        require_f32(n, a);
        require_f32(n, b);
        set_out(n, 0, DType::F32, broadcast_dims(n, a.dims, b.dims));
        break;
      }
      case OpKind::Softmax:
      case OpKind::LogSoftmax: {
        const ValueInfo& a = in_info(n, 0);
        require_f32(n, a);
        if (a.dims.empty()) fail(n, "needs rank >= 1");
        const Dim last = a.dims.back();
        if (!last.symbolic && last.value == 0) fail(n, "empty last axis");
        set_out(n, 0, DType::F32, a.dims);
        break;
      }
      case OpKind::Sqrt:
      case OpKind::Relu:
      case OpKind::Sigmoid: {
        const ValueInfo& a = in_info(n, 0);
        require_f32(n, a);
        set_out(n, 0, DType::F32, a.dims);
        break;
      }
      case OpKind::Transpose: {
        const ValueInfo& a = in_info(n, 0);
        const auto& perm = n.attr_ints("perm");
        if (perm.size() != a.dims.size()) fail(n, "perm rank mismatch");
        std::vector<bool> seen(perm.size(), false);
        Dims out(perm.size());
        for (size_t i = 0; i < perm.size(); ++i) {
          const int64_t p = perm[i];
          if (p < 0 || p >= static_cast<int64_t>(perm.size()) || seen[static_cast<size_t>(p)]) {
            fail(n, "perm is not a permutation");
          }
          seen[static_cast<size_t>(p)] = true;
          out[i] = a.dims[static_cast<size_t>(p)];
        }
        set_out(n, 0, a.dtype, std::move(out));
        break;
      }
      case OpKind::Reshape: {
        const ValueInfo& a = in_info(n, 0);
        const auto& shape = n.attr_ints("shape");
        Dims out(shape.size());
        int infer_at = -1;
        bool any_sym = false;
        for (const Dim& d : a.dims) any_sym |= d.symbolic;
        int64_t known = 1;
        for (size_t i = 0; i < shape.size(); ++i) {
          if (shape[i] > 0) {
            out[i] = Dim::concrete(shape[i]);
            known *= shape[i];
          } else if (shape[i] == 0) {
            if (i >= a.dims.size()) fail(n, "shape entry 0 beyond input rank");
            out[i] = a.dims[i];
            if (!out[i].symbolic) known *= out[i].value;
          } else if (shape[i] == -1) {
            if (infer_at >= 0) fail(n, "more than one -1 in shape");
            infer_at = static_cast<int>(i);
          } else {
            fail(n, "invalid shape entry " + std::to_string(shape[i]));
          }
        }
        bool out_sym = false;
        for (const Dim& d : out) out_sym |= d.symbolic;
        if (infer_at >= 0) {
          if (any_sym || out_sym) {
            out[static_cast<size_t>(infer_at)] = Dim::sym();
          } else {
            int64_t total = 1;
            for (const Dim& d : a.dims) total *= d.value;
            if (known == 0 || total % known != 0) {
              fail(n, "cannot infer -1 extent");
            }
            out[static_cast<size_t>(infer_at)] = Dim::concrete(total / known);
          }
        } else if (!any_sym && !out_sym) {
          int64_t total = 1;
          for (const Dim& d : a.dims) total *= d.value;
          if (total != known) {
            fail(n, "reshape changes element count (" + std::to_string(total) +
                        " -> " + std::to_string(known) + ")");
          }
        }
        set_out(n, 0, a.dtype, std::move(out));
        break;
      }
      case OpKind::Concat: {
        const ValueInfo& first = in_info(n, 0);
        const size_t rank = first.dims.size();
        int64_t axis = n.attr_int("axis");
        if (axis < 0) axis += static_cast<int64_t>(rank);
        if (axis < 0 || axis >= static_cast<int64_t>(rank)) fail(n, "axis out of range");
        Dims out = first.dims;
        Dim total = first.dims[static_cast<size_t>(axis)];
        for (size_t i = 1; i < n.inputs.size(); ++i) {
          const ValueInfo& vi = in_info(n, i);
          if (vi.dims.size() != rank) fail(n, "rank mismatch among concat inputs");
          if (vi.dtype != first.dtype) fail(n, "dtype mismatch among concat inputs");
          for (size_t d = 0; d < rank; ++d) {
            if (static_cast<int64_t>(d) == axis) {
              const Dim e = vi.dims[d];
              if (total.symbolic || e.symbolic) {
                total = Dim::sym();
              } else {
                total = Dim::concrete(total.value + e.value);
              }
            } else {
              out[d] = unify(n, out[d], vi.dims[d]);
            }
          }
        }
        out[static_cast<size_t>(axis)] = total;
        set_out(n, 0, first.dtype, std::move(out));
        break;
      }
      case OpKind::Split: {
        const ValueInfo& a = in_info(n, 0);
        int64_t axis = n.attr_int("axis");
        const int64_t parts = n.attr_int("parts");
        if (axis < 0) axis += static_cast<int64_t>(a.dims.size());
        if (axis < 0 || axis >= static_cast<int64_t>(a.dims.size())) fail(n, "axis out of range");
        if (parts < 1) fail(n, "parts must be >= 1");
        Dim part = a.dims[static_cast<size_t>(axis)];
        if (!part.symbolic) {
          if (part.value % parts != 0) {
            fail(n, "axis extent " + std::to_string(part.value) +
                        " not divisible into " + std::to_string(parts));
          }
          part = Dim::concrete(part.value / parts);
        }
        for (size_t i = 0; i < n.outputs.size(); ++i) {
          Dims out = a.dims;
          out[static_cast<size_t>(axis)] = part;
          set_out(n, i, a.dtype, std::move(out));
        }
        break;
      }
      case OpKind::Slice: {
        const ValueInfo& a = in_info(n, 0);
        int64_t axis = n.attr_int("axis");
        const int64_t start = n.attr_int("start");
        const int64_t end = n.attr_int("end");
        if (axis < 0) axis += static_cast<int64_t>(a.dims.size());
        if (axis < 0 || axis >= static_cast<int64_t>(a.dims.size())) fail(n, "axis out of range");
        if (start < 0 || end < start) fail(n, "invalid bounds");
        const Dim extent = a.dims[static_cast<size_t>(axis)];
        if (!extent.symbolic && end > extent.value) {
          fail(n, "slice end " + std::to_string(end) + " beyond extent " +
                      std::to_string(extent.value));
        }
        Dims out = a.dims;
        out[static_cast<size_t>(axis)] = Dim::concrete(end - start);
        set_out(n, 0, a.dtype, std::move(out));
        break;
      }
      case OpKind::Pad: {
        const ValueInfo& a = in_info(n, 0);
        require_f32(n, a);
        const auto& pb = n.attr_ints("pads_begin");
        const auto& pe = n.attr_ints("pads_end");
        if (pb.size() != a.dims.size() || pe.size() != a.dims.size()) {
          fail(n, "pads rank mismatch");
        }
        Dims out = a.dims;
        for (size_t i = 0; i < out.size(); ++i) {
          if (pb[i] < 0 || pe[i] < 0) fail(n, "negative pad");
          if (!out[i].symbolic) {
            out[i] = Dim::concrete(out[i].value + pb[i] + pe[i]);
          } else if (pb[i] != 0 || pe[i] != 0) {
            out[i] = Dim::sym();
          }
        }
        set_out(n, 0, DType::F32, std::move(out));
        break;
      }
      case OpKind::ReduceMean: {
        const ValueInfo& a = in_info(n, 0);
        require_f32(n, a);
        const auto& axes = n.attr_ints("axes");
        const bool keep = n.attr_int("keepdims") != 0;
        const int64_t rank = static_cast<int64_t>(a.dims.size());
        std::vector<bool> red(a.dims.size(), false);
        for (int64_t ax : axes) {
          if (ax < 0) ax += rank;
          if (ax < 0 || ax >= rank) fail(n, "axis out of range");
          red[static_cast<size_t>(ax)] = true;
        }
        Dims out;
        for (size_t i = 0; i < a.dims.size(); ++i) {
          if (red[i]) {
            if (keep) out.push_back(Dim::concrete(1));
          } else {
            out.push_back(a.dims[i]);
          }
        }
        set_out(n, 0, DType::F32, std::move(out));
        break;
      }
      case OpKind::Gather: {
        const ValueInfo& table = in_info(n, 0);
        const ValueInfo& idx = in_info(n, 1);
        if (table.dims.empty()) fail(n, "table needs rank >= 1");
        if (idx.dtype != DType::I32 || idx.dims.size() != 1) {
          fail(n, "indices must be rank-1 i32");
        }
        Dims out;
        out.push_back(idx.dims[0]);
        for (size_t i = 1; i < table.dims.size(); ++i) out.push_back(table.dims[i]);
        set_out(n, 0, table.dtype, std::move(out));
        break;
      }
      case OpKind::Conv1D: {
        const ValueInfo& x = in_info(n, 0);
        const ValueInfo& w = in_info(n, 1);
        require_f32(n, x);
        require_f32(n, w);
        if (x.dims.size() != 2 || w.dims.size() != 3) {
          fail(n, "expects x (L, C_in) and w (C_out, C_in/groups, k)");
        }
        const int64_t pad = n.attr_int("pad");
        const int64_t groups = n.attr_int("groups");
        if (groups < 1) fail(n, "groups must be >= 1");
        if (!x.dims[1].symbolic && !w.dims[1].symbolic &&
            x.dims[1].value != w.dims[1].value * groups) {
          fail(n, "channel/group mismatch");
        }
        Dim rows = x.dims[0];
        if (!rows.symbolic) {
          const int64_t lout = rows.value + 2 * pad - w.dims[2].value + 1;
          if (lout < 0) fail(n, "output length negative");
          rows = Dim::concrete(lout);
        }
        set_out(n, 0, DType::F32, Dims{rows, w.dims[0]});
        break;
      }
      case OpKind::LayerNorm: {
        const ValueInfo& x = in_info(n, 0);
        const ValueInfo& gamma = in_info(n, 1);
        const ValueInfo& beta = in_info(n, 2);
        require_f32(n, x);
        if (x.dims.empty()) fail(n, "needs rank >= 1");
        const Dim last = x.dims.back();
        auto check_param = [&](const ValueInfo& p, const char* what) {
          if (p.dims.size() != 1) fail(n, std::string(what) + " must be rank 1");
          if (!last.symbolic && !p.dims[0].symbolic && p.dims[0].value != last.value) {
            fail(n, std::string(what) + " length " + p.dims[0].to_string() +
                        " != last axis " + last.to_string());
          }
        };
        check_param(gamma, "gamma");
        check_param(beta, "beta");
        if (n.attr_float("eps") <= 0.0) fail(n, "eps must be > 0");
        set_out(n, 0, DType::F32, x.dims);
        break;
      }
      case OpKind::FusedAttention:
      case OpKind::QAttention: {
        const ValueInfo& x = in_info(n, 0);
        const ValueInfo& w = in_info(n, 1);
        require_f32(n, x);
        if (x.dims.size() != 2) fail(n, "x must be (L, D)");
        const int64_t heads = n.attr_int("heads");
        const Dim d = x.dims[1];
        if (!d.symbolic && (heads < 1 || d.value % heads != 0)) {
          fail(n, "width " + d.to_string() + " not divisible by heads " +
                      std::to_string(heads));
        }
        if (n.kind == OpKind::QAttention && w.dtype != DType::I8) {
          fail(n, "packed weight must be i8");
        }
        if (n.kind == OpKind::FusedAttention && w.dtype != DType::F32) {
          fail(n, "packed weight must be f32");
        }
        if (!d.symbolic && w.dims.size() == 2 &&
            (w.dims[0].value != d.value || w.dims[1].value != 3 * d.value)) {
          fail(n, "packed weight must be (D, 3D)");
        }
        set_out(n, 0, DType::F32, x.dims);
        break;
      }
      case OpKind::FusedRelPosAttention:
      case OpKind::QRelPosAttention: {
        const ValueInfo& x = in_info(n, 0);
        require_f32(n, x);
        if (x.dims.size() != 2) fail(n, "x must be (L, D)");
        const int64_t heads = n.attr_int("heads");
        const Dim d = x.dims[1];
        if (!d.symbolic && (heads < 1 || d.value % heads != 0)) {
          fail(n, "width " + d.to_string() + " not divisible by heads " +
                      std::to_string(heads));
        }
        const ValueInfo& r_en = in_info(n, 6);
        if (!x.dims[0].symbolic && !r_en.dims[0].symbolic &&
            r_en.dims[0].value != 2 * x.dims[0].value - 1) {
          fail(n, "positional table rows " + r_en.dims[0].to_string() +
                      " != 2L-1 for L=" + x.dims[0].to_string());
        }
        set_out(n, 0, DType::F32, x.dims);
        break;
      }
      case OpKind::QMatMul: {
        const ValueInfo& x = in_info(n, 0);
        const ValueInfo& w = in_info(n, 1);
        require_f32(n, x);
        if (w.dtype != DType::I8) fail(n, "weight must be i8");
        if (x.dims.size() < 2 || w.dims.size() != 2) {
          fail(n, "expects x rank >= 2 and w (K, N)");
        }
        unify(n, x.dims[x.dims.size() - 1], w.dims[0]);
        Dims out = x.dims;
        out.back() = w.dims[1];
        set_out(n, 0, DType::F32, std::move(out));
        break;
      }
    }
  }
  return g.value_info;
}

// ---------------------------------------------------------------------------
// topo order
// ---------------------------------------------------------------------------

std::vector<const Node*> topo_order(const Graph& g) {
  const size_t n = g.nodes.size();
  std::map<std::string, size_t> producer_node;
  for (size_t i = 0; i < n; ++i) {
    for (const std::string& out : g.nodes[i].outputs) producer_node[out] = i;
  }
  std::vector<std::vector<size_t>> succ(n);
  std::vector<size_t> in_deg(n, 0);
  for (size_t i = 0; i < n; ++i) {
    std::set<size_t> preds;
    for (const std::string& in : g.nodes[i].inputs) {
      const auto it = producer_node.find(in);
      if (it != producer_node.end() && it->second != i) preds.insert(it->second);
    }
    for (size_t p : preds) {
      succ[p].push_back(i);
      in_deg[i]++;
    }
  }
  using Entry = std::pair<std::string, size_t>;  // (id, index), min-heap on id
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> ready;
  for (size_t i = 0; i < n; ++i) {
    if (in_deg[i] == 0) ready.emplace(g.nodes[i].id, i);
  }
  std::vector<const Node*> order;
  order.reserve(n);
  while (!ready.empty()) {
    const size_t i = ready.top().second;
    ready.pop();
    order.push_back(&g.nodes[i]);
    for (size_t s : succ[i]) {
      if (--in_deg[s] == 0) ready.emplace(g.nodes[s].id, s);
    }
  }
  if (order.size() != n) {
    throw FormatError("graph " + g.name + ": nodes do not form a DAG");
  }
  return order;
}

std::map<std::string, std::vector<const Node*>> build_consumers(const Graph& g) {
  std::map<std::string, std::vector<const Node*>> consumers;
  for (const Node& n : g.nodes) {
    std::set<std::string> seen;  // count a node once per distinct input value
    for (const std::string& in : n.inputs) {
      if (seen.insert(in).second) consumers[in].push_back(&n);
    }
  }
  return consumers;
}

bool graphs_identical(const Graph& a, const Graph& b) {
  if (a.name != b.name) return false;
  if (a.outputs != b.outputs) return false;
  if (a.inputs.size() != b.inputs.size()) return false;
  for (size_t i = 0; i < a.inputs.size(); ++i) {
    const ValueInfo& x = a.inputs[i];
    const ValueInfo& y = b.inputs[i];
    if (x.name != y.name || x.dtype != y.dtype || !(x.dims == y.dims)) return false;
  }
  if (a.nodes.size() != b.nodes.size()) return false;
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    const Node& x = a.nodes[i];
    const Node& y = b.nodes[i];
    if (x.id != y.id || x.kind != y.kind || x.inputs != y.inputs ||
        x.outputs != y.outputs || x.attrs != y.attrs) {
      return false;
    }
  }
  if (a.initializers.size() != b.initializers.size()) return false;
  for (const auto& [name, t] : a.initializers) {
    const auto it = b.initializers.find(name);
    if (it == b.initializers.end() || !t.bit_equal(it->second)) return false;
  }
  if (!(a.quant_params == b.quant_params)) return false;
  return true;
}

}  // namespace fusegraph
