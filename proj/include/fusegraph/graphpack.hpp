// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fusegraph/graph.hpp"

namespace fusegraph {

// One graph inside a pack, with an optional host-loop role annotation
// (encoder / decoder_step / ctc_posterior / ar_step / post_decoder).
struct PackEntry {
  std::string role;  // empty for standalone graphs
  Graph graph;
};

// Decode-time constants carried alongside staged models.
struct StagedMeta {
  bool present = false;
  int64_t vocab_size = 0;
  int64_t sos = -1;
  int64_t eos = -1;
  int64_t blank = -1;
  int64_t max_steps = 0;
};

// File layout: 8-byte magic, u64 little-endian manifest length, UTF-8 JSON
// manifest, zero padding to an 8-byte boundary, then the weight blob. Every
// initializer descriptor carries (offset, length) into the blob; offsets are
// 8-byte aligned. Manifest carries format_version (current = 1).
inline constexpr char kPackMagic[8] = {'G', 'P', 'A', 'C', 'K', '0', '1', '\n'};
inline constexpr int64_t kPackFormatVersion = 1;

void save_graphpack(const std::vector<PackEntry>& entries, const StagedMeta& meta,
                    const std::string& path);
std::pair<std::vector<PackEntry>, StagedMeta> load_graphpack_entries(
    const std::string& path);

// Single-graph convenience wrappers.
void save_graphpack(const Graph& g, const std::string& path);
Graph load_graphpack(const std::string& path);

}  // namespace fusegraph
