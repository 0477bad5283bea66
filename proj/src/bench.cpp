// SPDX-License-Identifier: Apache-2.0

#include "fusegraph/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include <nlohmann/json.hpp>

#include "fusegraph/error.hpp"
#include "fusegraph/executor.hpp"
#include "fusegraph/fusion.hpp"
#include "fusegraph/quantize.hpp"

namespace fusegraph {
namespace {

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

BenchConfig time_graph(std::string name, const Graph& g,
                       const std::map<std::string, Tensor>& inputs,
                       const WorkerPolicy& policy, int runs,
                       double audio_seconds) {
  BenchConfig cfg;
  cfg.name = std::move(name);
  cfg.node_count = static_cast<int64_t>(g.nodes.size());
  cfg.parameter_bytes = parameter_bytes(g);
  Session session(g, policy);
  (void)session.run(inputs);  // warm-up, discarded
  cfg.wall_seconds.reserve(static_cast<size_t>(runs));
  for (int i = 0; i < runs; ++i) {
    const auto [outputs, stats] = session.run(inputs);
    (void)outputs;
    cfg.wall_seconds.push_back(stats.total_seconds);
    cfg.peak_value_bytes = stats.peak_value_bytes;
  }
  cfg.runs = runs;
  std::vector<double> rtf(cfg.wall_seconds);
  for (double& r : rtf) r /= audio_seconds;
  cfg.rtf_mean = mean_of(rtf);
  cfg.rtf_std = sample_std(rtf, cfg.rtf_mean);
  cfg.median_seconds = median_of(cfg.wall_seconds);
  return cfg;
}

}  // namespace

const BenchConfig& BenchReport::config(const std::string& name) const {
  for (const BenchConfig& c : configs)
    if (c.name == name) return c;
  throw ConfigError("no bench configuration named '" + name + "'");
}

BenchReport run_bench(const Graph& source,
                      const std::map<std::string, Tensor>& inputs,
                      const BenchOptions& opt) {
  if (opt.runs < 2) throw ConfigError("bench needs at least 2 timed runs");
  if (!(opt.frame_shift_ms > 0.0))
    throw ConfigError("frame shift must be positive");
  if (opt.max_workers < 1) throw ConfigError("bench needs max_workers >= 1");

  int64_t frames = opt.frames;
  if (frames <= 0) {
    if (source.inputs.empty())
      throw ConfigError("cannot infer a frame count: graph has no inputs");
    const auto it = inputs.find(source.inputs.front().name);
    if (it == inputs.end())
      throw ConfigError("bench inputs are missing '" +
                        source.inputs.front().name + "'");
    frames = it->second.rank() >= 1 ? it->second.dim(0) : 1;
  }

  BenchReport rep;
  rep.frames = frames;
  rep.frame_shift_ms = opt.frame_shift_ms;
  rep.audio_seconds =
      static_cast<double>(frames) * opt.frame_shift_ms / 1000.0;
  rep.max_workers = opt.max_workers;

  const Graph fused = fusion_pipeline(source).first;
  const Graph quantized = quantize_graph(source).first;
  const Graph fused_quantized = quantize_graph(fused).first;
  const WorkerPolicy par = WorkerPolicy::parallel(opt.max_workers);

  rep.configs.push_back(time_graph("baseline", source, inputs,
                                   WorkerPolicy::sequential(), opt.runs,
                                   rep.audio_seconds));
  rep.configs.push_back(
      time_graph("fused", fused, inputs, par, opt.runs, rep.audio_seconds));
  rep.configs.push_back(time_graph("quantized", quantized, inputs, par,
                                   opt.runs, rep.audio_seconds));
  rep.configs.push_back(time_graph("fused_quantized", fused_quantized, inputs,
                                   par, opt.runs, rep.audio_seconds));
  return rep;
}

std::string bench_report_json(const BenchReport& r) {
  nlohmann::json j;
  j["schema_version"] = kBenchSchemaVersion;
  j["frames"] = r.frames;
  j["frame_shift_ms"] = r.frame_shift_ms;
  j["audio_seconds"] = r.audio_seconds;
  j["max_workers"] = r.max_workers;
  nlohmann::json arr = nlohmann::json::array();
  for (const BenchConfig& c : r.configs) {
    arr.push_back({{"name", c.name},
                   {"node_count", c.node_count},
                   {"parameter_bytes", c.parameter_bytes},
                   {"peak_value_bytes", c.peak_value_bytes},
                   {"runs", c.runs},
                   {"rtf_mean", c.rtf_mean},
                   {"rtf_std", c.rtf_std},
                   {"median_seconds", c.median_seconds}});
  }
  j["configs"] = std::move(arr);
  return j.dump(2);
}

}  // namespace fusegraph
