#include <fstream>

#include <json.hpp>

#include "activetest/data_model.hpp"
#include "test_util.hpp"

using namespace activetest;
using activetest::testing::code_of;
using activetest::testing::TempDir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<SampleRecord> three_samples() {
  std::vector<SampleRecord> s(3);
  for (int i = 0; i < 3; ++i) {
    s[i].id = "id" + std::to_string(i);
    s[i].text = "text " + std::to_string(i);
    s[i].prediction = std::int64_t{i % 2};
  }
  return s;
}

// Writes a 3-sample classification dataset; returns the manifest path.
std::filesystem::path small_dataset(const TempDir& dir, std::size_t emb_rows = 3) {
  write_samples(three_samples(), dir / "samples.jsonl");
  std::vector<float> v(emb_rows * 2, 0.5f);
  write_embeddings(EmbeddingStore(emb_rows, 2, v), dir / "emb.ateb");
  write_labels({{"id0", std::int64_t{0}}, {"id1", std::int64_t{1}}, {"id2", std::int64_t{1}}},
               dir / "labels.jsonl");
  nlohmann::json m{{"name", "small"},
                   {"task", "classification"},
                   {"n", 3},
                   {"classes", {"neg", "pos"}},
                   {"samples_path", "samples.jsonl"},
                   {"embeddings_path", "emb.ateb"},
                   {"labels_path", "labels.jsonl"}};
  std::ofstream(dir / "manifest.json") << m.dump();
  return dir / "manifest.json";
}

}  // namespace

TEST(Embeddings, RoundTripTwoByTwo) {
  TempDir dir;
  write_embeddings(EmbeddingStore(2, 2, {1, 2, 3, 4}), dir / "m.ateb");
  const auto back = read_embeddings(dir / "m.ateb");
  EXPECT_EQ(back.n(), 2u);
  EXPECT_EQ(back.d(), 2u);
  EXPECT_EQ(back.values(), (std::vector<float>{1, 2, 3, 4}));
  EXPECT_EQ(back.row(1)[0], 3.0f);
}

TEST(Embeddings, BadMagic) {
  TempDir dir;
  write_embeddings(EmbeddingStore(2, 2, {1, 2, 3, 4}), dir / "m.ateb");
  auto bytes = read_bytes(dir / "m.ateb");
  bytes.replace(0, 4, "XXXX");
  write_bytes(dir / "bad.ateb", bytes);
  EXPECT_EQ(code_of([&] { read_embeddings(dir / "bad.ateb"); }), ErrorCode::kBadMagic);
}

TEST(Embeddings, TruncatedPayload) {
  TempDir dir;
  write_embeddings(EmbeddingStore(2, 2, {1, 2, 3, 4}), dir / "m.ateb");
  auto bytes = read_bytes(dir / "m.ateb");
  bytes.resize(bytes.size() - 3);
  write_bytes(dir / "short.ateb", bytes);
  EXPECT_EQ(code_of([&] { read_embeddings(dir / "short.ateb"); }), ErrorCode::kTruncated);
}

TEST(Embeddings, RejectsNonFinite) {
  EXPECT_EQ(code_of([] { EmbeddingStore(1, 2, {1.0f, std::numeric_limits<float>::quiet_NaN()}); }),
            ErrorCode::kNonFinite);
}

TEST(Embeddings, HeaderOnly) {
  TempDir dir;
  write_embeddings(EmbeddingStore(3, 5, std::vector<float>(15, 0.0f)), dir / "m.ateb");
  const auto h = read_embeddings_header(dir / "m.ateb");
  EXPECT_EQ(h.n, 3u);
  EXPECT_EQ(h.d, 5u);
}

TEST(TokenEmbeddings, RoundTripVariableLength) {
  TempDir dir;
  TokenEmbeddingStore store(2, {{1, 2}, {3, 4, 5, 6, 7, 8}});
  write_token_embeddings(store, dir / "t.attk");
  const auto back = read_token_embeddings(dir / "t.attk");
  ASSERT_EQ(back.n(), 2u);
  EXPECT_EQ(back.token_count(0), 1u);
  EXPECT_EQ(back.token_count(1), 3u);
  EXPECT_EQ(back.tokens(1)[5], 8.0f);
}

TEST(TokenEmbeddings, RejectsRaggedRows) {
  EXPECT_EQ(code_of([] { TokenEmbeddingStore(2, {{1, 2, 3}}); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([] { TokenEmbeddingStore(2, {{}}); }), ErrorCode::kValidation);
}

TEST(Samples, JsonlRoundTrip) {
  TempDir dir;
  auto s = three_samples();
  s[1].language = "de";
  s[2].cost = 0.1;
  write_samples(s, dir / "s.jsonl");
  const auto back = read_samples(dir / "s.jsonl");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].language, std::optional<std::string>("de"));
  EXPECT_EQ(back[2].cost, std::optional<double>(0.1));
  EXPECT_EQ(std::get<std::int64_t>(back[1].prediction), 1);
}

TEST(Manifest, ConsistentCounts) {
  TempDir dir;
  const auto m = load_manifest(small_dataset(dir));
  EXPECT_EQ(m.n, 3u);
  EXPECT_EQ(m.classes.size(), 2u);
  EXPECT_TRUE(m.embeddings_path.is_absolute() || m.embeddings_path.has_parent_path());
}

TEST(Manifest, EmbeddingCountMismatch) {
  TempDir dir;
  const auto path = small_dataset(dir, 4);
  EXPECT_EQ(code_of([&] { load_manifest(path); }), ErrorCode::kCountMismatch);
}

TEST(Manifest, SummarizationWithClassesRejected) {
  TempDir dir;
  const auto path = small_dataset(dir);
  auto j = nlohmann::json::parse(read_bytes(path));
  j["task"] = "summarization";
  std::ofstream(path) << j.dump();
  EXPECT_EQ(code_of([&] { load_manifest(path); }), ErrorCode::kValidation);
}

TEST(Manifest, DuplicateIds) {
  TempDir dir;
  const auto path = small_dataset(dir);
  auto s = three_samples();
  s[2].id = "id0";
  write_samples(s, dir / "samples.jsonl");
  EXPECT_EQ(code_of([&] { load_manifest(path); }), ErrorCode::kDuplicateId);
}

TEST(Manifest, UnknownTask) {
  TempDir dir;
  const auto path = small_dataset(dir);
  auto j = nlohmann::json::parse(read_bytes(path));
  j["task"] = "translation";
  std::ofstream(path) << j.dump();
  EXPECT_EQ(code_of([&] { load_manifest(path); }), ErrorCode::kUnknownTask);
}

TEST(Dataset, LoadsLabels) {
  TempDir dir;
  const auto ds = load_dataset(small_dataset(dir));
  ASSERT_TRUE(ds.labels.has_value());
  EXPECT_EQ(std::get<std::int64_t>(ds.labels->at("id2")), 1);
  EXPECT_EQ(ds.class_count(), 2u);
}

TEST(Cost, OverrideWins) {
  SampleRecord s;
  s.cost = 0.10;
  s.language = "de";
  CostModel m;
  m.per_language["de"] = 0.05;
  EXPECT_DOUBLE_EQ(resolve_cost(s, m), 0.10);
}

TEST(Cost, LanguageEntry) {
  SampleRecord s;
  s.language = "de";
  CostModel m;
  m.per_language["de"] = 0.05;
  EXPECT_DOUBLE_EQ(resolve_cost(s, m), 0.05);
}

TEST(Cost, DefaultIsTwoCents) {
  SampleRecord s;
  EXPECT_DOUBLE_EQ(resolve_cost(s, CostModel{}), 0.02);
}

TEST(Oracle, RevealOncePerId) {
  LabelOracle oracle({{"a", std::int64_t{1}}, {"b", std::int64_t{0}}});
  EXPECT_EQ(std::get<std::int64_t>(oracle.reveal("a")), 1);
  EXPECT_EQ(code_of([&] { oracle.reveal("a"); }), ErrorCode::kState);
  EXPECT_EQ(code_of([&] { oracle.reveal("zzz"); }), ErrorCode::kUnknownId);
  EXPECT_EQ(oracle.access_log(), (std::vector<std::string>{"a"}));
  oracle.peek("b");
  EXPECT_EQ(oracle.access_log().size(), 1u);
}
