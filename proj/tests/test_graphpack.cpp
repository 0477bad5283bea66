// SPDX-License-Identifier: Apache-2.0
//
// Pack serialization: round trips, deterministic bytes, corruption handling.

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fusegraph/graphpack.hpp"
#include "fusegraph/recipes.hpp"

using namespace fusegraph;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// A graph exercising every initializer dtype: f32 weights, an i8 tensor with
// quant params, and an i32 index table input.
Graph mixed_dtype_graph() {
  Graph g;
  g.name = "mixed";
  g.inputs.push_back(
      ValueInfo{"idx", DType::I32, {Dim::concrete(2)}});
  g.initializers.emplace("table",
                         Tensor::from_f32({4, 3}, {0, 1, 2, 3, 4, 5,
                                                   6, 7, 8, 9, 10, 11}));
  g.initializers.emplace("q", Tensor::from_i8({3}, {-128, 0, 127}));
  g.quant_params.emplace("q", QuantParams{12.5f, -3});
  g.initializers.emplace("steps", Tensor::from_i32({3}, {7, -1, 100000}));
  g.nodes.push_back(Node{"gt", OpKind::Gather, {"table", "idx"}, {"rows"}, {}});
  g.outputs = {"rows"};
  return g;
}

}  // namespace

TEST_CASE("single graph round-trips exactly") {
  const auto path = tmp_path("fg_pack_single.gpk");
  const Graph g = mixed_dtype_graph();
  save_graphpack(g, path.string());
  const Graph back = load_graphpack(path.string());
  CHECK(graphs_identical(g, back));
  CHECK(back.quant_params.at("q").s == 12.5f);
  CHECK(back.quant_params.at("q").z == -3);
  std::filesystem::remove(path);
}

TEST_CASE("encoder weights survive a round trip bit-for-bit") {
  const auto path = tmp_path("fg_pack_encoder.gpk");
  const Graph g = build_transformer_encoder(
      ModelRecipe{Architecture::TransformerEncoder, 2, 32, 4, 8, 0, 11});
  save_graphpack(g, path.string());
  const Graph back = load_graphpack(path.string());
  CHECK(graphs_identical(g, back));
  std::filesystem::remove(path);
}

TEST_CASE("saving the same graph twice produces identical bytes") {
  const auto a = tmp_path("fg_pack_bytes_a.gpk");
  const auto b = tmp_path("fg_pack_bytes_b.gpk");
  const Graph g = build_transformer_encoder(
      ModelRecipe{Architecture::TransformerEncoder, 1, 16, 2, 8, 0, 4});
  save_graphpack(g, a.string());
  save_graphpack(g, b.string());
  CHECK(read_bytes(a) == read_bytes(b));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("staged entries keep roles, order, and meta") {
  const auto path = tmp_path("fg_pack_staged.gpk");
  std::vector<PackEntry> entries;
  entries.push_back({"encoder", mixed_dtype_graph()});
  Graph second = mixed_dtype_graph();
  second.name = "second";
  entries.push_back({"decoder_step", std::move(second)});

  StagedMeta meta;
  meta.present = true;
  meta.vocab_size = 50;
  meta.sos = 49;
  meta.eos = 49;
  meta.blank = 0;
  meta.max_steps = 64;
  save_graphpack(entries, meta, path.string());

  const auto [back, back_meta] = load_graphpack_entries(path.string());
  REQUIRE(back.size() == 2);
  CHECK(back[0].role == "encoder");
  CHECK(back[1].role == "decoder_step");
  CHECK(back[0].graph.name == "mixed");
  CHECK(back[1].graph.name == "second");
  CHECK(graphs_identical(entries[0].graph, back[0].graph));
  CHECK(back_meta.present);
  CHECK(back_meta.vocab_size == 50);
  CHECK(back_meta.sos == 49);
  CHECK(back_meta.eos == 49);
  CHECK(back_meta.blank == 0);
  CHECK(back_meta.max_steps == 64);
  std::filesystem::remove(path);
}

TEST_CASE("plain packs load with meta absent") {
  const auto path = tmp_path("fg_pack_plain_meta.gpk");
  save_graphpack(mixed_dtype_graph(), path.string());
  const auto [entries, meta] = load_graphpack_entries(path.string());
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].role.empty());
  CHECK(!meta.present);
  std::filesystem::remove(path);
}

TEST_CASE("manifest is valid JSON with aligned blob offsets") {
  const auto path = tmp_path("fg_pack_manifest.gpk");
  save_graphpack(mixed_dtype_graph(), path.string());
  const std::string bytes = read_bytes(path);
  REQUIRE(bytes.size() > 16);
  CHECK(std::memcmp(bytes.data(), kPackMagic, 8) == 0);

  uint64_t manifest_len = 0;
  for (int i = 7; i >= 0; --i)
    manifest_len = (manifest_len << 8) |
                   static_cast<unsigned char>(bytes[8 + static_cast<size_t>(i)]);
  REQUIRE(16 + manifest_len <= bytes.size());

  const auto manifest =
      nlohmann::json::parse(bytes.substr(16, manifest_len));
  CHECK(manifest.at("format_version").get<int64_t>() == kPackFormatVersion);
  REQUIRE(manifest.contains("graphs"));
  for (const auto& entry : manifest.at("graphs")) {
    for (const auto& init : entry.at("initializers")) {
      CHECK(init.at("offset").get<uint64_t>() % 8 == 0);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("corrupted files are rejected with FormatError") {
  const auto good_path = tmp_path("fg_pack_good.gpk");
  save_graphpack(mixed_dtype_graph(), good_path.string());
  const std::string good = read_bytes(good_path);
  const auto bad_path = tmp_path("fg_pack_bad.gpk");

  SUBCASE("flipped magic") {
    std::string bad = good;
    bad[0] = 'X';
    write_bytes(bad_path, bad);
    CHECK_THROWS_AS(load_graphpack(bad_path.string()), FormatError);
  }
  SUBCASE("truncated header") {
    write_bytes(bad_path, good.substr(0, 10));
    CHECK_THROWS_AS(load_graphpack(bad_path.string()), FormatError);
  }
  SUBCASE("truncated blob") {
    write_bytes(bad_path, good.substr(0, good.size() - 8));
    CHECK_THROWS_AS(load_graphpack(bad_path.string()), FormatError);
  }
  SUBCASE("manifest is not JSON") {
    std::string bad = good;
    bad[16] = '#';  // first manifest byte
    write_bytes(bad_path, bad);
    CHECK_THROWS_AS(load_graphpack(bad_path.string()), FormatError);
  }
  SUBCASE("unsupported format version") {
    // Rewrite the manifest with a bumped version, keeping lengths valid.
    uint64_t manifest_len = 0;
    for (int i = 7; i >= 0; --i)
      manifest_len =
          (manifest_len << 8) |
          static_cast<unsigned char>(good[8 + static_cast<size_t>(i)]);
    auto manifest = nlohmann::json::parse(good.substr(16, manifest_len));
    manifest["format_version"] = kPackFormatVersion + 1;
    std::string text = manifest.dump();
    std::string bad(good.substr(0, 8));
    for (int i = 0; i < 8; ++i)
      bad.push_back(static_cast<char>((text.size() >> (8 * i)) & 0xff));
    bad += text;
    while (bad.size() % 8 != 0) bad.push_back('\0');
    bad += good.substr(16 + ((manifest_len + 7) / 8) * 8);
    write_bytes(bad_path, bad);
    CHECK_THROWS_AS(load_graphpack(bad_path.string()), FormatError);
  }
  SUBCASE("initializer offset beyond blob") {
    uint64_t manifest_len = 0;
    for (int i = 7; i >= 0; --i)
      manifest_len =
          (manifest_len << 8) |
          static_cast<unsigned char>(good[8 + static_cast<size_t>(i)]);
    auto manifest = nlohmann::json::parse(good.substr(16, manifest_len));
    manifest["graphs"][0]["initializers"][0]["offset"] = 1 << 24;
    std::string text = manifest.dump();
    std::string bad(good.substr(0, 8));
    for (int i = 0; i < 8; ++i)
      bad.push_back(static_cast<char>((text.size() >> (8 * i)) & 0xff));
    bad += text;
    while (bad.size() % 8 != 0) bad.push_back('\0');
    const size_t old_blob_start = 16 + ((manifest_len + 7) / 8) * 8;
    bad += good.substr(old_blob_start);
    write_bytes(bad_path, bad);
    CHECK_THROWS_AS(load_graphpack(bad_path.string()), FormatError);
  }

  std::filesystem::remove(good_path);
  std::filesystem::remove(bad_path);
}

TEST_CASE("missing file raises FormatError") {
  CHECK_THROWS_AS(load_graphpack("/nonexistent/dir/model.gpk"), FormatError);
  CHECK_THROWS_AS(
      save_graphpack(mixed_dtype_graph(), "/nonexistent/dir/model.gpk"),
      FormatError);
}
