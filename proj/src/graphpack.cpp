// SPDX-License-Identifier: Apache-2.0

#include "fusegraph/graphpack.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace fusegraph {

static_assert(std::endian::native == std::endian::little,
              "blob payloads are little-endian; big-endian hosts unsupported");

using json = nlohmann::json;

namespace {

constexpr int64_t align8(int64_t n) { return (n + 7) & ~int64_t{7}; }

json dims_to_json(const std::vector<Dim>& dims) {
  json arr = json::array();
  for (const Dim& d : dims) {
    if (d.symbolic) {
      arr.push_back("L");
    } else {
      arr.push_back(d.value);
    }
  }
  return arr;
}

std::vector<Dim> dims_from_json(const json& arr) {
  std::vector<Dim> dims;
  for (const json& d : arr) {
    if (d.is_string()) {
      if (d.get<std::string>() != "L") {
        throw FormatError("unknown symbolic dim '" + d.get<std::string>() + "'");
      }
      dims.push_back(Dim::sym());
    } else {
      dims.push_back(Dim::concrete(d.get<int64_t>()));
    }
  }
  return dims;
}

json attr_to_json(const Attr& a) {
  json j;
  if (std::holds_alternative<int64_t>(a)) {
    j["i"] = std::get<int64_t>(a);
  } else if (std::holds_alternative<double>(a)) {
    j["f"] = std::get<double>(a);
  } else {
    j["ints"] = std::get<std::vector<int64_t>>(a);
  }
  return j;
}

Attr attr_from_json(const json& j) {
  if (j.contains("i")) return j["i"].get<int64_t>();
  if (j.contains("f")) return j["f"].get<double>();
  if (j.contains("ints")) return j["ints"].get<std::vector<int64_t>>();
  throw FormatError("attribute without i/f/ints payload");
}

json quant_to_json(const QuantParams& qp) {
  return json{{"s", qp.s}, {"z", qp.z}, {"qmin", qp.qmin}, {"qmax", qp.qmax}};
}

QuantParams quant_from_json(const json& j) {
  QuantParams qp;
  qp.s = j.at("s").get<float>();
  qp.z = j.at("z").get<int32_t>();
  qp.qmin = j.at("qmin").get<int32_t>();
  qp.qmax = j.at("qmax").get<int32_t>();
  return qp;
}

}  // namespace

void save_graphpack(const std::vector<PackEntry>& entries, const StagedMeta& meta,
                    const std::string& path) {
  json manifest;
  manifest["format_version"] = kPackFormatVersion;

  // Lay out the blob: initializers in graph order, then sorted name order.
  int64_t blob_size = 0;
  json graphs = json::array();
  for (const PackEntry& entry : entries) {
    const Graph& g = entry.graph;
    json jg;
    jg["name"] = g.name;
    if (!entry.role.empty()) jg["role"] = entry.role;
    json jin = json::array();
    for (const ValueInfo& vi : g.inputs) {
      jin.push_back(json{{"name", vi.name},
                         {"dtype", dtype_name(vi.dtype)},
                         {"dims", dims_to_json(vi.dims)}});
    }
    jg["inputs"] = std::move(jin);
    jg["outputs"] = g.outputs;
    json jnodes = json::array();
    for (const Node& n : g.nodes) {
      json jn;
      jn["id"] = n.id;
      jn["kind"] = op_name(n.kind);
      jn["inputs"] = n.inputs;
      jn["outputs"] = n.outputs;
      if (!n.attrs.empty()) {
        json ja;
        for (const auto& [key, a] : n.attrs) ja[key] = attr_to_json(a);
        jn["attrs"] = std::move(ja);
      }
      jnodes.push_back(std::move(jn));
    }
    jg["nodes"] = std::move(jnodes);
    json jinit = json::array();
    for (const auto& [name, t] : g.initializers) {
      const int64_t offset = align8(blob_size);
      const int64_t length = t.byte_size();
      blob_size = offset + length;
      json jd;
      jd["name"] = name;
      jd["dtype"] = dtype_name(t.dtype());
      jd["shape"] = t.shape().dims();
      jd["offset"] = offset;
      jd["length"] = length;
      const auto qit = g.quant_params.find(name);
      if (qit != g.quant_params.end()) jd["quant"] = quant_to_json(qit->second);
      jinit.push_back(std::move(jd));
    }
    jg["initializers"] = std::move(jinit);
    graphs.push_back(std::move(jg));
  }
  manifest["graphs"] = std::move(graphs);
  manifest["blob_size"] = blob_size;
  if (meta.present) {
    manifest["staged"] = json{{"vocab_size", meta.vocab_size},
                              {"sos", meta.sos},
                              {"eos", meta.eos},
                              {"blank", meta.blank},
                              {"max_steps", meta.max_steps}};
  }

  const std::string text = manifest.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(kPackMagic, sizeof(kPackMagic));
  const uint64_t mlen = text.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const int64_t pad = align8(static_cast<int64_t>(text.size())) -
                      static_cast<int64_t>(text.size());
  const char zeros[8] = {};
  out.write(zeros, pad);

  int64_t cursor = 0;
  for (const PackEntry& entry : entries) {
    for (const auto& [name, t] : entry.graph.initializers) {
      (void)name;
      const int64_t offset = align8(cursor);
      out.write(zeros, offset - cursor);
      out.write(static_cast<const char*>(t.raw_data()),
                static_cast<std::streamsize>(t.byte_size()));
      cursor = offset + t.byte_size();
    }
  }
  if (!out) throw FormatError("write to " + path + " failed");
}

std::pair<std::vector<PackEntry>, StagedMeta> load_graphpack_entries(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + path);
  const int64_t file_size = static_cast<int64_t>(in.tellg());
  in.seekg(0);
  if (file_size < static_cast<int64_t>(sizeof(kPackMagic) + sizeof(uint64_t))) {
    throw FormatError(path + ": truncated header (" + std::to_string(file_size) +
                      " bytes)");
  }
  char magic[sizeof(kPackMagic)];
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kPackMagic, sizeof(magic)) != 0) {
    throw FormatError(path + ": not a graph pack (bad magic)");
  }
  uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  const int64_t header = static_cast<int64_t>(sizeof(kPackMagic) + sizeof(uint64_t));
  if (static_cast<int64_t>(mlen) > file_size - header) {
    throw FormatError(path + ": manifest length " + std::to_string(mlen) +
                      " exceeds file size " + std::to_string(file_size));
  }
  std::string text(mlen, '\0');
  in.read(text.data(), static_cast<std::streamsize>(mlen));

  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(path + ": manifest parse error: " + e.what());
  }

  const int64_t version = manifest.value("format_version", int64_t{-1});
  if (version != kPackFormatVersion) {
    throw FormatError(path + ": unsupported format version " +
                      std::to_string(version) + " (expected " +
                      std::to_string(kPackFormatVersion) + ")");
  }

  const int64_t blob_base = header + align8(static_cast<int64_t>(mlen));
  const int64_t blob_actual = file_size - blob_base;
  const int64_t blob_expected = manifest.value("blob_size", int64_t{0});
  if (blob_actual < blob_expected) {
    throw FormatError(path + ": blob truncated (expected " +
                      std::to_string(blob_expected) + " bytes, have " +
                      std::to_string(blob_actual) + ")");
  }

  std::vector<char> blob(static_cast<size_t>(blob_expected));
  in.seekg(blob_base);
  in.read(blob.data(), blob_expected);
  if (!in) throw FormatError(path + ": blob read failed");

  std::vector<PackEntry> entries;
  StagedMeta meta;
  try {
    for (const json& jg : manifest.at("graphs")) {
      PackEntry entry;
      entry.role = jg.value("role", std::string{});
      Graph& g = entry.graph;
      g.name = jg.at("name").get<std::string>();
      for (const json& ji : jg.at("inputs")) {
        ValueInfo vi;
        vi.name = ji.at("name").get<std::string>();
        vi.dtype = dtype_from_name(ji.at("dtype").get<std::string>());
        vi.dims = dims_from_json(ji.at("dims"));
        g.inputs.push_back(std::move(vi));
      }
      g.outputs = jg.at("outputs").get<std::vector<std::string>>();
      for (const json& jn : jg.at("nodes")) {
        Node n;
        n.id = jn.at("id").get<std::string>();
        const std::string kind = jn.at("kind").get<std::string>();
        const auto op = op_from_name(kind);
        if (!op) {
          throw FormatError(path + ": unknown operator kind '" + kind +
                            "' (newer format version?)");
        }
        n.kind = *op;
        n.inputs = jn.at("inputs").get<std::vector<std::string>>();
        n.outputs = jn.at("outputs").get<std::vector<std::string>>();
        if (jn.contains("attrs")) {
          for (const auto& [key, ja] : jn.at("attrs").items()) {
            n.attrs.emplace(key, attr_from_json(ja));
          }
        }
        g.nodes.push_back(std::move(n));
      }
      for (const json& jd : jg.at("initializers")) {
        const std::string name = jd.at("name").get<std::string>();
        const DType dt = dtype_from_name(jd.at("dtype").get<std::string>());
        const Shape shape(jd.at("shape").get<std::vector<int64_t>>());
        const int64_t offset = jd.at("offset").get<int64_t>();
        const int64_t length = jd.at("length").get<int64_t>();
        if (length != shape.numel() * dtype_size(dt)) {
          throw FormatError(path + ": initializer " + name + " length " +
                            std::to_string(length) + " != dtype*count " +
                            std::to_string(shape.numel() * dtype_size(dt)));
        }
        if (offset < 0 || length < 0 || offset + length > blob_expected) {
          throw FormatError(path + ": initializer " + name + " range [" +
                            std::to_string(offset) + ", " +
                            std::to_string(offset + length) +
                            ") outside blob of " + std::to_string(blob_expected) +
                            " bytes");
        }
        Tensor t = Tensor::zeros(dt, shape);
        std::memcpy(t.raw_data(), blob.data() + offset, static_cast<size_t>(length));
        g.initializers.emplace(name, std::move(t));
        if (jd.contains("quant")) {
          g.quant_params.emplace(name, quant_from_json(jd.at("quant")));
        }
      }
      entries.push_back(std::move(entry));
    }
    if (manifest.contains("staged")) {
      const json& js = manifest.at("staged");
      meta.present = true;
      meta.vocab_size = js.at("vocab_size").get<int64_t>();
      meta.sos = js.at("sos").get<int64_t>();
      meta.eos = js.at("eos").get<int64_t>();
      meta.blank = js.at("blank").get<int64_t>();
      meta.max_steps = js.at("max_steps").get<int64_t>();
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": manifest field error: " + e.what());
  }
  return {std::move(entries), meta};
}

void save_graphpack(const Graph& g, const std::string& path) {
  std::vector<PackEntry> entries;
  entries.push_back(PackEntry{"", g});
  save_graphpack(entries, StagedMeta{}, path);
}

Graph load_graphpack(const std::string& path) {
  auto [entries, meta] = load_graphpack_entries(path);
  (void)meta;
  if (entries.size() != 1) {
    throw FormatError(path + ": expected a single graph, found " +
                      std::to_string(entries.size()));
  }
  return std::move(entries[0].graph);
}

}  // namespace fusegraph
