// SPDX-License-Identifier: Apache-2.0

#include "fusegraph/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace fusegraph {

namespace {

const std::set<std::string>& known_roles() {
  static const std::set<std::string> roles = {
      kRoleEncoder, kRoleDecoderStep, kRoleCtcPosterior, kRoleArStep,
      kRolePostDecoder};
  return roles;
}

// Zero tensor matching a declared signature with symbolic extents bound to 0.
Tensor empty_state(const ValueInfo& vi) {
  std::vector<int64_t> dims;
  dims.reserve(vi.dims.size());
  for (const Dim& d : vi.dims) dims.push_back(d.symbolic ? 0 : d.value);
  return Tensor::zeros(vi.dtype, Shape(std::move(dims)));
}

// Single-run helper for loop-free roles.
Tensor run_single(const Graph& g, const Tensor& input,
                  const WorkerPolicy& policy) {
  if (g.inputs.size() != 1)
    throw ConfigError("role graph '" + g.name + "' must take exactly one input");
  Session session(g, policy);
  auto [outputs, stats] = session.run({{g.inputs[0].name, input}});
  return outputs.at(g.outputs.at(0));
}

}  // namespace

const Graph& StagedModel::role(const std::string& name) const {
  auto it = roles.find(name);
  if (it == roles.end())
    throw ConfigError("staged model has no '" + name + "' role graph");
  return it->second;
}

void save_staged(const StagedModel& m, const std::string& path) {
  std::vector<PackEntry> entries;
  entries.reserve(m.roles.size());
  for (const auto& [role, graph] : m.roles) entries.push_back({role, graph});
  StagedMeta meta;
  meta.present = true;
  meta.vocab_size = m.vocab_size;
  meta.sos = m.sos;
  meta.eos = m.eos;
  meta.blank = m.blank;
  meta.max_steps = m.max_steps;
  save_graphpack(entries, meta, path);
}

StagedModel staged_from_entries(std::vector<PackEntry> entries,
                                const StagedMeta& meta) {
  if (!meta.present)
    throw FormatError("pack carries no decode constants; not a staged model");
  StagedModel m;
  for (PackEntry& e : entries) {
    if (e.role.empty())
      throw FormatError("staged pack entry '" + e.graph.name + "' has no role");
    if (known_roles().count(e.role) == 0)
      throw FormatError("unknown role '" + e.role + "' in staged pack");
    if (!m.roles.emplace(e.role, std::move(e.graph)).second)
      throw FormatError("duplicate role '" + e.role + "' in staged pack");
  }
  m.vocab_size = meta.vocab_size;
  m.sos = meta.sos;
  m.eos = meta.eos;
  m.blank = meta.blank;
  m.max_steps = meta.max_steps;
  return m;
}

StagedModel load_staged(const std::string& path) {
  auto [entries, meta] = load_graphpack_entries(path);
  return staged_from_entries(std::move(entries), meta);
}

Tensor encode(const StagedModel& m, const Tensor& features,
              const WorkerPolicy& policy) {
  return run_single(m.role(kRoleEncoder), features, policy);
}

Tensor ctc_posterior(const StagedModel& m, const Tensor& memory,
                     const WorkerPolicy& policy) {
  return run_single(m.role(kRoleCtcPosterior), memory, policy);
}

std::vector<BeamHypothesis> beam_search(const StagedModel& m,
                                        const Tensor& memory,
                                        const DecodeConfig& cfg,
                                        const WorkerPolicy& policy) {
  if (cfg.beam_width < 1) throw ConfigError("beam width must be >= 1");
  if (!(cfg.max_length_ratio > 0.0))
    throw ConfigError("max-length ratio must be positive");
  if (m.sos < 0 || m.eos < 0)
    throw ConfigError("staged model lacks sos/eos token ids");
  const Graph& step_graph = m.role(kRoleDecoderStep);
  if (step_graph.inputs.size() < 2)
    throw ConfigError("decoder_step must take (memory, token, cache...)");
  if (step_graph.outputs.size() != step_graph.inputs.size() - 1)
    throw ConfigError("decoder_step must emit log-probs plus one tensor per cache");
  if (memory.rank() < 1) throw ShapeError("memory must have a leading time axis");

  int64_t max_len = std::max<int64_t>(
      1, std::llround(cfg.max_length_ratio * static_cast<double>(memory.dim(0))));
  if (m.max_steps > 0) max_len = std::min(max_len, m.max_steps);

  Session session(step_graph, policy);
  const size_t cache_count = step_graph.inputs.size() - 2;

  BeamHypothesis root;
  root.tokens = {m.sos};
  root.state.reserve(cache_count);
  for (size_t i = 0; i < cache_count; ++i)
    root.state.push_back(empty_state(step_graph.inputs[i + 2]));

  std::vector<BeamHypothesis> live = {std::move(root)};
  std::vector<BeamHypothesis> done;

  for (int64_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<BeamHypothesis> pool;
    for (const BeamHypothesis& hyp : live) {
      std::map<std::string, Tensor> feed;
      feed.emplace(step_graph.inputs[0].name, memory);
      feed.emplace(step_graph.inputs[1].name,
                   Tensor::from_i32(Shape{1},
                                    {static_cast<int32_t>(hyp.tokens.back())}));
      for (size_t i = 0; i < cache_count; ++i)
        feed.emplace(step_graph.inputs[i + 2].name, hyp.state[i]);
      auto [outputs, stats] = session.run(feed);

      const Tensor& logp = outputs.at(step_graph.outputs[0]);
      if (!all_finite(logp))
        throw ExecError("decoder emitted non-finite log-probs at step " +
                        std::to_string(step));
      const int64_t vocab = logp.dim(logp.rank() - 1);
      if (m.vocab_size > 0 && vocab != m.vocab_size)
        throw ExecError("decoder emits " + std::to_string(vocab) +
                        " log-probs but the model declares vocab " +
                        std::to_string(m.vocab_size));

      std::vector<Tensor> next_state;
      next_state.reserve(cache_count);
      for (size_t i = 0; i < cache_count; ++i)
        next_state.push_back(outputs.at(step_graph.outputs[i + 1]));

      std::span<const float> row = logp.f32();
      std::vector<int64_t> order(static_cast<size_t>(vocab));
      for (int64_t t = 0; t < vocab; ++t) order[static_cast<size_t>(t)] = t;
      std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        const float pa = row[static_cast<size_t>(a)];
        const float pb = row[static_cast<size_t>(b)];
        return pa != pb ? pa > pb : a < b;
      });
      const int64_t take = std::min<int64_t>(cfg.beam_width, vocab);
      for (int64_t r = 0; r < take; ++r) {
        const int64_t tok = order[static_cast<size_t>(r)];
        BeamHypothesis cand;
        cand.tokens = hyp.tokens;
        cand.tokens.push_back(tok);
        cand.score = hyp.score + static_cast<double>(row[static_cast<size_t>(tok)]);
        cand.state = next_state;
        cand.finished = tok == m.eos;
        pool.push_back(std::move(cand));
      }
    }
    std::sort(pool.begin(), pool.end(),
              [](const BeamHypothesis& a, const BeamHypothesis& b) {
                return a.score != b.score ? a.score > b.score
                                          : a.tokens < b.tokens;
              });
    if (static_cast<int64_t>(pool.size()) > cfg.beam_width)
      pool.resize(static_cast<size_t>(cfg.beam_width));
    live.clear();
    for (BeamHypothesis& cand : pool) {
      if (cand.finished)
        done.push_back(std::move(cand));
      else
        live.push_back(std::move(cand));
    }
  }

  for (BeamHypothesis& hyp : live) done.push_back(std::move(hyp));
  auto ranking = [&](const BeamHypothesis& h) {
    return h.score +
           cfg.length_penalty * static_cast<double>(h.tokens.size() - 1);
  };
  std::sort(done.begin(), done.end(),
            [&](const BeamHypothesis& a, const BeamHypothesis& b) {
              const double ra = ranking(a);
              const double rb = ranking(b);
              return ra != rb ? ra > rb : a.tokens < b.tokens;
            });
  if (static_cast<int64_t>(done.size()) > cfg.beam_width)
    done.resize(static_cast<size_t>(cfg.beam_width));
  return done;
}

std::vector<int64_t> ctc_greedy_decode(const Tensor& posterior, int64_t blank) {
  if (posterior.rank() != 2 || posterior.dtype() != DType::F32)
    throw ShapeError("posterior must be a rank-2 F32 tensor");
  const int64_t frames = posterior.dim(0);
  const int64_t vocab = posterior.dim(1);
  std::span<const float> data = posterior.f32();
  std::vector<int64_t> out;
  int64_t prev = -1;
  for (int64_t t = 0; t < frames; ++t) {
    const float* row = data.data() + t * vocab;
    int64_t best = 0;
    for (int64_t j = 1; j < vocab; ++j)
      if (row[j] > row[best]) best = j;
    if (best == prev) continue;
    prev = best;
    if (best != blank) out.push_back(best);
  }
  return out;
}

TtsResult ar_tts_decode(const StagedModel& m, const Tensor& text_memory,
                        const DecodeConfig& cfg, const WorkerPolicy& policy) {
  if (!(cfg.stop_threshold > 0.0 && cfg.stop_threshold < 1.0))
    throw ConfigError("stop threshold must lie in (0, 1)");
  if (m.max_steps < 1)
    throw ConfigError("staged model needs a positive max_steps cap");
  const Graph& step_graph = m.role(kRoleArStep);
  if (step_graph.inputs.size() < 2)
    throw ConfigError("ar_step must take (memory, prev_frame, state...)");
  if (step_graph.outputs.size() != step_graph.inputs.size())
    throw ConfigError("ar_step must emit (frame, stop_prob) plus one tensor per state");

  Session session(step_graph, policy);
  const size_t state_count = step_graph.inputs.size() - 2;

  Tensor prev = empty_state(step_graph.inputs[1]);  // zero initial frame
  std::vector<Tensor> state;
  state.reserve(state_count);
  for (size_t i = 0; i < state_count; ++i)
    state.push_back(empty_state(step_graph.inputs[i + 2]));

  std::vector<Tensor> frames;
  TtsResult result;
  result.truncated = true;
  for (int64_t step = 0; step < m.max_steps; ++step) {
    std::map<std::string, Tensor> feed;
    feed.emplace(step_graph.inputs[0].name, text_memory);
    feed.emplace(step_graph.inputs[1].name, prev);
    for (size_t i = 0; i < state_count; ++i)
      feed.emplace(step_graph.inputs[i + 2].name, state[i]);
    auto [outputs, stats] = session.run(feed);

    Tensor frame = outputs.at(step_graph.outputs[0]);
    const Tensor& stop = outputs.at(step_graph.outputs[1]);
    if (stop.numel() != 1 || stop.dtype() != DType::F32)
      throw ExecError("ar_step stop head must emit a single F32 probability");
    for (size_t i = 0; i < state_count; ++i)
      state[i] = outputs.at(step_graph.outputs[i + 2]);

    const float stop_prob = stop.f32()[0];
    frames.push_back(frame);
    prev = std::move(frame);
    ++result.steps;
    if (static_cast<double>(stop_prob) > cfg.stop_threshold) {
      result.truncated = false;
      break;
    }
  }

  std::vector<const Tensor*> parts;
  parts.reserve(frames.size());
  for (const Tensor& f : frames) parts.push_back(&f);
  Tensor stacked = concat(parts, 0);
  result.frames = run_single(m.role(kRolePostDecoder), stacked, policy);
  return result;
}

}  // namespace fusegraph
