// SPDX-License-Identifier: Apache-2.0

#include "fusegraph/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fusegraph/bench.hpp"
#include "fusegraph/error.hpp"
#include "fusegraph/executor.hpp"
#include "fusegraph/fusion.hpp"
#include "fusegraph/graph.hpp"
#include "fusegraph/graphpack.hpp"
#include "fusegraph/pipeline.hpp"
#include "fusegraph/quantize.hpp"
#include "fusegraph/recipes.hpp"

namespace fusegraph {
namespace {

using nlohmann::json;

std::string shape_text(const std::vector<Dim>& dims) {
  std::string s = "[";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i != 0) s += ",";
    s += dims[i].symbolic ? "?" : std::to_string(dims[i].value);
  }
  return s + "]";
}

std::string entry_label(const PackEntry& e) {
  return e.role.empty() ? std::string("-") : e.role;
}

std::map<std::string, int64_t> op_histogram(const Graph& g) {
  std::map<std::string, int64_t> h;
  for (const Node& n : g.nodes) ++h[op_name(n.kind)];
  return h;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open '" + path + "' for writing");
  f << text;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

int cmd_generate(const ModelRecipe& recipe, const std::string& out_path,
                 std::ostream& out) {
  generate_model_file(recipe, out_path);
  const auto [entries, meta] = load_graphpack_entries(out_path);
  int64_t params = 0;
  int64_t nodes = 0;
  for (const PackEntry& e : entries) {
    params += parameter_bytes(e.graph);
    nodes += static_cast<int64_t>(e.graph.nodes.size());
  }
  out << "wrote " << out_path << ": "
      << architecture_name(recipe.architecture) << " entries=" << entries.size()
      << " nodes=" << nodes << " parameter_bytes=" << params << "\n";
  (void)meta;
  return kExitOk;
}

int cmd_inspect(const std::string& path, bool as_json, std::ostream& out) {
  const auto [entries, meta] = load_graphpack_entries(path);
  if (as_json) {
    json j;
    j["schema_version"] = 1;
    j["staged"] = meta.present;
    if (meta.present)
      j["meta"] = {{"vocab_size", meta.vocab_size}, {"sos", meta.sos},
                   {"eos", meta.eos},               {"blank", meta.blank},
                   {"max_steps", meta.max_steps}};
    json arr = json::array();
    for (const PackEntry& e : entries) {
      json inputs = json::array();
      for (const ValueInfo& vi : e.graph.inputs) {
        json dims = json::array();
        for (const Dim& d : vi.dims) {
          if (d.symbolic)
            dims.push_back("?");
          else
            dims.push_back(d.value);
        }
        inputs.push_back({{"name", vi.name},
                          {"dtype", dtype_name(vi.dtype)},
                          {"dims", std::move(dims)}});
      }
      arr.push_back({{"role", e.role},
                     {"name", e.graph.name},
                     {"nodes", e.graph.nodes.size()},
                     {"initializers", e.graph.initializers.size()},
                     {"parameter_bytes", parameter_bytes(e.graph)},
                     {"inputs", std::move(inputs)},
                     {"outputs", e.graph.outputs},
                     {"ops", op_histogram(e.graph)}});
    }
    j["entries"] = std::move(arr);
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << "pack " << path << ": entries=" << entries.size()
      << (meta.present ? " staged" : "") << "\n";
  if (meta.present)
    out << "  vocab_size=" << meta.vocab_size << " sos=" << meta.sos
        << " eos=" << meta.eos << " blank=" << meta.blank
        << " max_steps=" << meta.max_steps << "\n";
  for (const PackEntry& e : entries) {
    out << "entry [" << entry_label(e) << "] " << e.graph.name
        << ": nodes=" << e.graph.nodes.size()
        << " initializers=" << e.graph.initializers.size()
        << " parameter_bytes=" << parameter_bytes(e.graph) << "\n";
    out << "  inputs:";
    for (const ValueInfo& vi : e.graph.inputs)
      out << " " << vi.name << ":" << dtype_name(vi.dtype)
          << shape_text(vi.dims);
    out << "\n  outputs:";
    for (const std::string& o : e.graph.outputs) out << " " << o;
    out << "\n  ops:";
    for (const auto& [name, count] : op_histogram(e.graph))
      out << " " << name << "=" << count;
    out << "\n";
  }
  return kExitOk;
}

int cmd_optimize(const std::string& in_path, const std::string& out_path,
                 const std::vector<std::string>& rules,
                 const std::string& report_path, std::ostream& out) {
  auto [entries, meta] = load_graphpack_entries(in_path);
  const std::vector<std::string>& use =
      rules.empty() ? default_fusion_rules() : rules;
  json report_entries = json::array();
  int64_t total_matches = 0;
  for (PackEntry& e : entries) {
    auto [rewritten, reports] = fusion_pipeline(e.graph, use);
    e.graph = std::move(rewritten);
    json jrules = json::array();
    for (const FusionReport& r : reports) {
      total_matches += r.matches;
      out << "entry [" << entry_label(e) << "] rule " << r.rule
          << ": matches=" << r.matches << " nodes_removed=" << r.nodes_removed
          << " nodes_added=" << r.nodes_added << "\n";
      jrules.push_back({{"rule", r.rule},
                        {"matches", r.matches},
                        {"nodes_removed", r.nodes_removed},
                        {"nodes_added", r.nodes_added},
                        {"match_outputs", r.match_outputs},
                        {"diagnostics", r.diagnostics}});
    }
    report_entries.push_back({{"role", e.role},
                              {"name", e.graph.name},
                              {"rules", std::move(jrules)}});
  }
  save_graphpack(entries, meta, out_path);
  out << "wrote " << out_path << ": total_matches=" << total_matches << "\n";
  if (!report_path.empty()) {
    const json j = {{"schema_version", 1}, {"entries", report_entries}};
    write_text_file(report_path, j.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_quantize(const std::string& in_path, const std::string& out_path,
                 const std::string& report_path, std::ostream& out) {
  auto [entries, meta] = load_graphpack_entries(in_path);
  json report_entries = json::array();
  int64_t total_float = 0;
  int64_t total_quant = 0;
  for (PackEntry& e : entries) {
    auto [rewritten, rep] = quantize_graph(e.graph);
    e.graph = std::move(rewritten);
    total_float += rep.float_param_bytes;
    total_quant += rep.quant_param_bytes;
    out << "entry [" << entry_label(e)
        << "]: float_bytes=" << rep.float_param_bytes
        << " quant_bytes=" << rep.quant_param_bytes << " ratio=" << rep.ratio()
        << " nodes_quantized=" << rep.nodes_quantized
        << " skipped=" << rep.skipped.size() << "\n";
    json skipped = json::array();
    for (const auto& [node, reason] : rep.skipped)
      skipped.push_back({{"node", node}, {"reason", reason}});
    report_entries.push_back({{"role", e.role},
                              {"name", e.graph.name},
                              {"float_param_bytes", rep.float_param_bytes},
                              {"quant_param_bytes", rep.quant_param_bytes},
                              {"ratio", rep.ratio()},
                              {"nodes_quantized", rep.nodes_quantized},
                              {"skipped", std::move(skipped)}});
  }
  save_graphpack(entries, meta, out_path);
  const double total_ratio =
      total_float == 0 ? 1.0
                       : static_cast<double>(total_quant) /
                             static_cast<double>(total_float);
  out << "wrote " << out_path << ": total_ratio=" << total_ratio << "\n";
  if (!report_path.empty()) {
    const json j = {{"schema_version", 1},
                    {"total_float_bytes", total_float},
                    {"total_quant_bytes", total_quant},
                    {"total_ratio", total_ratio},
                    {"entries", report_entries}};
    write_text_file(report_path, j.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_verify(const std::string& path_a, const std::string& path_b,
               int trials, double tol, uint64_t seed, int64_t default_len,
               int workers, std::ostream& out) {
  if (trials < 1) throw ConfigError("verify needs --trials >= 1");
  if (!(tol >= 0.0)) throw ConfigError("verify needs --tol >= 0");
  auto [ea, ma] = load_graphpack_entries(path_a);
  auto [eb, mb] = load_graphpack_entries(path_b);
  (void)mb;
  if (ea.size() != eb.size())
    throw ConfigError("packs carry different entry counts");
  const WorkerPolicy policy = WorkerPolicy::parallel(workers);
  double max_abs = 0.0;
  double max_rel = 0.0;
  for (size_t k = 0; k < ea.size(); ++k) {
    if (ea[k].role != eb[k].role)
      throw ConfigError("entry " + std::to_string(k) + " roles differ: '" +
                        ea[k].role + "' vs '" + eb[k].role + "'");
    const Graph& ga = ea[k].graph;
    const Graph& gb = eb[k].graph;
    if (ga.inputs.size() != gb.inputs.size())
      throw ConfigError("entry [" + entry_label(ea[k]) +
                        "]: input signatures differ in arity");
    for (size_t i = 0; i < ga.inputs.size(); ++i) {
      const ValueInfo& va = ga.inputs[i];
      const ValueInfo& vb = gb.inputs[i];
      if (va.name != vb.name || va.dtype != vb.dtype || va.dims != vb.dims)
        throw ConfigError("entry [" + entry_label(ea[k]) + "]: input " +
                          std::to_string(i) + " signatures differ (" +
                          va.to_string() + " vs " + vb.to_string() + ")");
    }
    Session sa(ga, policy);
    Session sb(gb, policy);
    const int64_t vocab = ma.present ? ma.vocab_size : 0;
    for (int t = 0; t < trials; ++t) {
      Rng rng(seed + 0x9e3779b9ull * static_cast<uint64_t>(t) +
              0x1000003ull * static_cast<uint64_t>(k));
      const auto inputs = make_random_inputs(ga, rng, default_len, vocab);
      const auto [oa, stats_a] = sa.run(inputs);
      const auto [ob, stats_b] = sb.run(inputs);
      (void)stats_a;
      (void)stats_b;
      if (oa.size() != ob.size())
        throw ConfigError("entry [" + entry_label(ea[k]) +
                          "]: output arity differs");
      for (const auto& [name, ta] : oa) {
        const auto it = ob.find(name);
        if (it == ob.end())
          throw ConfigError("output '" + name + "' missing from " + path_b);
        const Tensor& tb = it->second;
        if (ta.dtype() != tb.dtype() || !(ta.shape() == tb.shape()))
          throw ConfigError("output '" + name + "' signature differs");
        if (ta.dtype() == DType::F32) {
          const auto a = ta.f32();
          const auto b = tb.f32();
          for (size_t i = 0; i < a.size(); ++i) {
            const double d = std::abs(static_cast<double>(a[i]) - b[i]);
            max_abs = std::max(max_abs, d);
            const double mag = std::max(
                {std::abs(static_cast<double>(a[i])),
                 std::abs(static_cast<double>(b[i])), 1e-12});
            max_rel = std::max(max_rel, d / mag);
          }
        } else if (!ta.bit_equal(tb)) {
          max_abs = std::max(max_abs, 1.0);
          max_rel = std::max(max_rel, 1.0);
        }
      }
    }
  }
  const bool pass = max_abs <= tol;
  out << "verify: trials=" << trials << " max_abs=" << max_abs
      << " max_rel=" << max_rel << " tol=" << tol << " -> "
      << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitVerifyFailed;
}

int cmd_bench(const std::string& path, int runs, double frame_shift_ms,
              int workers, bool as_json, uint64_t seed, int64_t default_len,
              std::ostream& out) {
  if (runs < 10) throw ConfigError("bench needs --runs >= 10");
  const auto [entries, meta] = load_graphpack_entries(path);
  const PackEntry* target = &entries.front();
  for (const PackEntry& e : entries)
    if (e.role == kRoleEncoder) target = &e;
  Rng rng(seed);
  const auto inputs = make_random_inputs(target->graph, rng, default_len,
                                         meta.present ? meta.vocab_size : 0);
  BenchOptions opt;
  opt.runs = runs;
  opt.frame_shift_ms = frame_shift_ms;
  opt.max_workers = workers;
  const BenchReport rep = run_bench(target->graph, inputs, opt);
  if (as_json) {
    out << bench_report_json(rep) << "\n";
    return kExitOk;
  }
  out << "bench " << path;
  if (!target->role.empty()) out << " [role " << target->role << "]";
  out << ": frames=" << rep.frames << " audio_s=" << rep.audio_seconds
      << " workers=" << rep.max_workers << " runs=" << runs << "\n";
  for (const BenchConfig& c : rep.configs)
    out << "  " << c.name << ": nodes=" << c.node_count
        << " parameter_bytes=" << c.parameter_bytes
        << " peak_bytes=" << c.peak_value_bytes << " rtf_mean=" << c.rtf_mean
        << " rtf_std=" << c.rtf_std << " median_s=" << c.median_seconds
        << "\n";
  return kExitOk;
}

int cmd_decode(const std::string& path, const std::string& mode, int64_t beam,
               uint64_t seed, int64_t len, int workers, double ratio,
               double stop_threshold, std::ostream& out) {
  const StagedModel m = load_staged(path);
  const WorkerPolicy policy = WorkerPolicy::parallel(workers);
  Rng rng(seed);
  const Graph& enc = m.role(kRoleEncoder);
  if (enc.inputs.size() != 1)
    throw ConfigError("encoder must take exactly one input");
  const auto feats = make_random_inputs(enc, rng, len);
  const auto t0 = std::chrono::steady_clock::now();
  const Tensor memory = encode(m, feats.at(enc.inputs.front().name), policy);
  if (mode == "asr") {
    DecodeConfig cfg;
    cfg.beam_width = beam;
    cfg.max_length_ratio = ratio;
    const auto hyps = beam_search(m, memory, cfg, policy);
    if (hyps.empty()) throw ExecError("beam search returned no hypotheses");
    out << "tokens:";
    for (int64_t tok : hyps.front().tokens) out << " " << tok;
    out << "\nscore=" << hyps.front().score << " hypotheses=" << hyps.size()
        << "\n";
    if (m.has_role(kRoleCtcPosterior)) {
      const Tensor post = ctc_posterior(m, memory, policy);
      out << "ctc_tokens:";
      for (int64_t tok : ctc_greedy_decode(post, m.blank)) out << " " << tok;
      out << "\n";
    }
  } else {
    DecodeConfig cfg;
    cfg.stop_threshold = stop_threshold;
    const TtsResult r = ar_tts_decode(m, memory, cfg, policy);
    out << "frames=" << r.frames.dim(0) << " steps=" << r.steps
        << " truncated=" << (r.truncated ? "true" : "false") << "\n";
  }
  out << "wall_s=" << elapsed_s(t0) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"static-graph fusion, quantization, and staged decoding"};
  app.name("fusegraph");
  app.require_subcommand(1);

  std::string arch = "transformer_encoder";
  ModelRecipe recipe;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("generate", "emit a seeded synthetic model pack");
  gen->add_option("--arch", arch, "model architecture")
      ->check(CLI::IsMember({"transformer_encoder", "conformer_encoder",
                             "encoder_decoder_asr", "ar_tts"}));
  gen->add_option("--blocks", recipe.blocks, "encoder block count");
  gen->add_option("--d-model", recipe.d_model, "model width");
  gen->add_option("--heads", recipe.heads, "attention head count");
  gen->add_option("--seq-len", recipe.seq_len, "pinned sequence length");
  gen->add_option("--vocab", recipe.vocab, "token vocabulary size");
  gen->add_option("--seed", recipe.seed, "weight seed");
  gen->add_option("-o,--out", gen_out, "output pack path")->required();

  std::string ins_path;
  bool ins_json = false;
  CLI::App* ins = app.add_subcommand("inspect", "describe a pack's graphs");
  ins->add_option("model", ins_path, "pack path")->required();
  ins->add_flag("--json", ins_json, "machine-readable output");

  std::string opt_in, opt_out, opt_report;
  std::vector<std::string> opt_rules;
  CLI::App* opt = app.add_subcommand("optimize", "fuse matched subgraphs");
  opt->add_option("model", opt_in, "input pack")->required();
  opt->add_option("-o,--out", opt_out, "output pack")->required();
  opt->add_option("--rules", opt_rules, "rule subset, in order")
      ->delimiter(',');
  opt->add_option("--report", opt_report, "write a JSON fusion report");

  std::string q_in, q_out, q_report;
  CLI::App* quant = app.add_subcommand("quantize", "8-bit weight rewrite");
  quant->add_option("model", q_in, "input pack")->required();
  quant->add_option("-o,--out", q_out, "output pack")->required();
  quant->add_option("--report", q_report, "write a JSON size report");

  std::string v_a, v_b;
  int v_trials = 8;
  double v_tol = 1e-5;
  uint64_t v_seed = 7;
  int64_t v_len = 16;
  int v_workers = 1;
  CLI::App* verify = app.add_subcommand(
      "verify", "compare two packs on seeded random inputs");
  verify->add_option("model_a", v_a, "first pack")->required();
  verify->add_option("model_b", v_b, "second pack")->required();
  verify->add_option("--trials", v_trials, "random input draws per entry");
  verify->add_option("--tol", v_tol, "max-abs failure threshold");
  verify->add_option("--seed", v_seed, "input seed");
  verify->add_option("--default-len", v_len, "extent bound to symbolic dims");
  verify->add_option("--workers", v_workers, "executor worker cap")
      ->envname("FUSEGRAPH_WORKERS");

  std::string b_path;
  int b_runs = 10;
  double b_shift = 10.0;
  int b_workers = 1;
  bool b_json = false;
  uint64_t b_seed = 7;
  int64_t b_len = 64;
  CLI::App* bench = app.add_subcommand(
      "bench", "time baseline/fused/quantized variants");
  bench->add_option("model", b_path, "pack path")->required();
  bench->add_option("--runs", b_runs, "timed runs (>= 10)");
  bench->add_option("--frame-shift-ms", b_shift, "audio seconds per row");
  bench->add_option("--workers", b_workers, "executor worker cap")
      ->envname("FUSEGRAPH_WORKERS");
  bench->add_flag("--json", b_json, "machine-readable report");
  bench->add_option("--seed", b_seed, "input seed");
  bench->add_option("--default-len", b_len, "extent bound to symbolic dims");

  std::string d_path, d_mode = "asr";
  int64_t d_beam = 1;
  uint64_t d_seed = 7;
  int64_t d_len = 16;
  int d_workers = 1;
  double d_ratio = 1.0;
  double d_stop = 0.5;
  CLI::App* dec = app.add_subcommand("decode", "run a staged model's host loop");
  dec->add_option("model", d_path, "staged pack path")->required();
  dec->add_option("--mode", d_mode, "asr or tts")
      ->check(CLI::IsMember({"asr", "tts"}));
  dec->add_option("--beam", d_beam, "beam width");
  dec->add_option("--seed", d_seed, "synthetic feature seed");
  dec->add_option("--len", d_len, "synthetic feature rows");
  dec->add_option("--workers", d_workers, "executor worker cap")
      ->envname("FUSEGRAPH_WORKERS");
  dec->add_option("--max-ratio", d_ratio, "emitted-token cap ratio");
  dec->add_option("--stop-threshold", d_stop, "AR stop-prob cutoff");

  try {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("fusegraph");
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (gen->parsed()) {
      const auto a = architecture_from_name(arch);
      if (!a) throw ConfigError("unknown architecture '" + arch + "'");
      recipe.architecture = *a;
      return cmd_generate(recipe, gen_out, out);
    }
    if (ins->parsed()) return cmd_inspect(ins_path, ins_json, out);
    if (opt->parsed())
      return cmd_optimize(opt_in, opt_out, opt_rules, opt_report, out);
    if (quant->parsed()) return cmd_quantize(q_in, q_out, q_report, out);
    if (verify->parsed())
      return cmd_verify(v_a, v_b, v_trials, v_tol, v_seed, v_len, v_workers,
                        out);
    if (bench->parsed())
      return cmd_bench(b_path, b_runs, b_shift, b_workers, b_json, b_seed,
                       b_len, out);
    if (dec->parsed())
      return cmd_decode(d_path, d_mode, d_beam, d_seed, d_len, d_workers,
                        d_ratio, d_stop, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  err << "error: no command given\n";
  return kExitBadInput;
}

}  // namespace fusegraph
