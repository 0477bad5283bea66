// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fusegraph/pipeline.hpp"

namespace fusegraph {

// splitmix64. Weight streams must be identical on every platform, which rules
// out the standard-library distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  float uniform(float lo, float hi) {
    const float u = static_cast<float>(next() >> 40) * 0x1p-24f;
    return lo + (hi - lo) * u;
  }
  std::vector<float> uniform_vec(int64_t n, float lo, float hi);
  int64_t below(int64_t n);  // uniform in [0, n)

 private:
  uint64_t state_;
};

enum class Architecture {
  TransformerEncoder,
  ConformerEncoder,
  EncoderDecoderAsr,
  ArTts,
};

const char* architecture_name(Architecture a);
std::optional<Architecture> architecture_from_name(const std::string& name);

// Synthetic stand-ins at desk scale; every graph they emit is primitive-only,
// with attention and layer-norm subgraphs in exactly the form the fusion
// matchers recognize.
struct ModelRecipe {
  Architecture architecture = Architecture::TransformerEncoder;
  int64_t blocks = 2;
  int64_t d_model = 64;
  int64_t heads = 4;
  int64_t seq_len = 32;  // concrete where a position table requires it
  int64_t vocab = 50;
  uint64_t seed = 1;
};

// ConfigError on bad fields (d_model % heads != 0, non-positive sizes, vocab
// too small for the special tokens).
void validate_recipe(const ModelRecipe& r);

// Sequence axis symbolic; blocks of layer-norm -> attention -> residual,
// layer-norm -> feed-forward -> residual.
Graph build_transformer_encoder(const ModelRecipe& r);

// Sequence axis pinned to seq_len; blocks add a relative-positional attention
// sublayer (shared sinusoidal table) and a depthwise convolution sublayer.
Graph build_conformer_encoder(const ModelRecipe& r);

// encoder + decoder_step (per-layer growing caches) + ctc_posterior, with
// blank = 0 and sos = eos = vocab - 1.
StagedModel build_asr_model(const ModelRecipe& r);

// encoder + ar_step (frame loop with growing history) + post_decoder
// (convolutional, deliberately unquantizable).
StagedModel build_tts_model(const ModelRecipe& r);

// Single-graph recipes save a plain pack; staged recipes a staged pack.
void generate_model_file(const ModelRecipe& r, const std::string& path);

// Seeded random tensors matching g's input signature; symbolic extents bind
// to default_len. I32 inputs draw below `vocab` when positive, else below the
// row count of the initializer table a Gather reads them with.
std::map<std::string, Tensor> make_random_inputs(const Graph& g, Rng& rng,
                                                 int64_t default_len,
                                                 int64_t vocab = 0);

}  // namespace fusegraph
