// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fusegraph/graph.hpp"
#include "fusegraph/tensor.hpp"

namespace fusegraph {

inline constexpr int64_t kBenchSchemaVersion = 1;

struct BenchOptions {
  int runs = 10;                 // timed runs; one extra warm-up is discarded
  double frame_shift_ms = 10.0;  // nominal audio seconds per input row
  int max_workers = 1;           // rewritten variants; baseline stays sequential
  int64_t frames = 0;            // 0 -> leading extent of the first input
};

// One graph variant under test. Byte and node counts are exact; timing
// fields depend on the machine.
struct BenchConfig {
  std::string name;
  int64_t node_count = 0;
  int64_t parameter_bytes = 0;
  int64_t peak_value_bytes = 0;
  int runs = 0;
  double rtf_mean = 0.0;
  double rtf_std = 0.0;  // sample standard deviation
  double median_seconds = 0.0;
  std::vector<double> wall_seconds;
};

struct BenchReport {
  int64_t frames = 0;
  double frame_shift_ms = 0.0;
  double audio_seconds = 0.0;
  int max_workers = 1;
  std::vector<BenchConfig> configs;  // baseline, fused, quantized, fused_quantized

  const BenchConfig& config(const std::string& name) const;
};

// Times the source graph against its fused, quantized, and fused+quantized
// rewrites on the same inputs: one warm-up, then opt.runs timed runs each.
// RTF = wall seconds / (frames * frame_shift).
BenchReport run_bench(const Graph& source,
                      const std::map<std::string, Tensor>& inputs,
                      const BenchOptions& opt);

std::string bench_report_json(const BenchReport& r);

}  // namespace fusegraph
