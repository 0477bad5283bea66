// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "fusegraph/executor.hpp"
#include "fusegraph/graphpack.hpp"

namespace fusegraph {

inline constexpr const char* kRoleEncoder = "encoder";
inline constexpr const char* kRoleDecoderStep = "decoder_step";
inline constexpr const char* kRoleCtcPosterior = "ctc_posterior";
inline constexpr const char* kRoleArStep = "ar_step";
inline constexpr const char* kRolePostDecoder = "post_decoder";

// A model partitioned into individually static graphs; every loop whose trip
// count depends on the input lives host-side in the functions below. Role
// graph signatures are positional:
//   encoder:       (features) -> (memory)
//   decoder_step:  (memory, token, cache...) -> (log-probs, cache'...)
//   ctc_posterior: (memory) -> (T x vocab log-probs)
//   ar_step:       (memory, prev_frame, state...) -> (frame, stop_prob, state'...)
//   post_decoder:  (frames) -> (frames')
// Cache/state tensors start with every symbolic extent at 0 and are re-bound
// per call, so prefixes are never re-run.
struct StagedModel {
  std::map<std::string, Graph> roles;
  int64_t vocab_size = 0;
  int64_t sos = -1;
  int64_t eos = -1;
  int64_t blank = -1;
  int64_t max_steps = 0;  // autoregressive-loop cap

  bool has_role(const std::string& name) const { return roles.count(name) > 0; }
  const Graph& role(const std::string& name) const;  // ConfigError when absent
};

// Pack round-trip. Staged packs carry one entry per role plus the decode
// constants; load rejects packs without them.
void save_staged(const StagedModel& m, const std::string& path);
StagedModel staged_from_entries(std::vector<PackEntry> entries,
                                const StagedMeta& meta);
StagedModel load_staged(const std::string& path);

struct BeamHypothesis {
  std::vector<int64_t> tokens;  // begins with sos
  double score = 0.0;           // accumulated next-token log-probs
  std::vector<Tensor> state;    // decoder caches after the last emitted token
  bool finished = false;        // last token == eos
};

struct DecodeConfig {
  int64_t beam_width = 1;
  // Emitted-token cap = max(1, round(ratio * memory rows)), additionally
  // clamped by StagedModel::max_steps when that is positive.
  double max_length_ratio = 1.0;
  double stop_threshold = 0.5;  // AR stop-prob cutoff, must lie in (0, 1)
  double length_penalty = 0.0;  // added per emitted token in the final ranking
};

// Single encoder run; no host loop.
Tensor encode(const StagedModel& m, const Tensor& features,
              const WorkerPolicy& policy = WorkerPolicy::sequential());

// Length-synchronous beam search. Each step runs decoder_step once per live
// hypothesis, pools the per-hypothesis top-beam_width continuations, keeps
// the best beam_width by accumulated score (ties: lexicographically smaller
// token sequence, hence lower token id), and retires hypotheses on eos.
// Returns up to beam_width hypotheses ranked by score plus
// length_penalty * emitted tokens.
std::vector<BeamHypothesis> beam_search(
    const StagedModel& m, const Tensor& memory, const DecodeConfig& cfg,
    const WorkerPolicy& policy = WorkerPolicy::sequential());

// Single posterior-graph run; rows are per-frame log-probs.
Tensor ctc_posterior(const StagedModel& m, const Tensor& memory,
                     const WorkerPolicy& policy = WorkerPolicy::sequential());

// Per-frame argmax, collapse consecutive repeats, drop blanks. Host-side.
std::vector<int64_t> ctc_greedy_decode(const Tensor& posterior, int64_t blank);

struct TtsResult {
  Tensor frames;           // post-decoder output over the concatenated frames
  int64_t steps = 0;       // autoregressive iterations taken
  bool truncated = false;  // stopped by the max_steps cap, not the stop head
};

// Zero initial frame, ar_step until stop-prob > cfg.stop_threshold or
// max_steps, then one post_decoder run on the frame concatenation.
TtsResult ar_tts_decode(const StagedModel& m, const Tensor& text_memory,
                        const DecodeConfig& cfg,
                        const WorkerPolicy& policy = WorkerPolicy::sequential());

}  // namespace fusegraph
