#include "activetest/data_model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "activetest/error.hpp"

namespace activetest {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kCountMismatch: return "count-mismatch";
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kUnknownTask: return "unknown-task";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kUnknownId: return "unknown-id";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kEmpty: return "empty";
    case ErrorCode::kBudgetExhausted: return "budget-exhausted";
    case ErrorCode::kUnsupportedMetric: return "unsupported-metric";
    case ErrorCode::kState: return "state";
    case ErrorCode::kDegenerateModel: return "degenerate-model";
  }
  return "unknown";
}

Task parse_task(const std::string& name) {
  if (name == "classification") return Task::kClassification;
  if (name == "ner") return Task::kNer;
  if (name == "pos") return Task::kPos;
  if (name == "summarization") return Task::kSummarization;
  throw Error(ErrorCode::kUnknownTask, "unknown task '" + name + "'");
}

std::string to_string(Task task) {
  switch (task) {
    case Task::kClassification: return "classification";
    case Task::kNer: return "ner";
    case Task::kPos: return "pos";
    case Task::kSummarization: return "summarization";
  }
  return "classification";
}

// ---------------------------------------------------------------------------
// Stores

EmbeddingStore::EmbeddingStore(std::size_t n, std::size_t d, std::vector<float> values)
    : n_(n), d_(d), values_(std::move(values)) {
  if (values_.size() != n_ * d_) {
    throw Error(ErrorCode::kCountMismatch, "embedding payload size does not match n*d");
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite embedding value");
  }
}

TokenEmbeddingStore::TokenEmbeddingStore(std::size_t d,
                                         std::vector<std::vector<float>> per_sample)
    : d_(d) {
  if (d_ == 0) throw Error(ErrorCode::kInvalidArgument, "token dimension must be positive");
  offsets_.reserve(per_sample.size() + 1);
  offsets_.push_back(0);
  std::size_t total = 0;
  for (const auto& m : per_sample) total += m.size();
  values_.reserve(total);
  for (const auto& m : per_sample) {
    if (m.empty() || m.size() % d_ != 0) {
      throw Error(ErrorCode::kValidation, "token matrix must hold T>=1 rows of width d");
    }
    for (float v : m) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite token value");
    }
    values_.insert(values_.end(), m.begin(), m.end());
    offsets_.push_back(values_.size());
  }
}

// ---------------------------------------------------------------------------
// Binary containers

namespace {

constexpr std::array<char, 4> kEmbeddingMagic{'A', 'T', 'E', 'B'};
constexpr std::array<char, 4> kTokenMagic{'A', 'T', 'T', 'K'};
constexpr std::uint32_t kContainerVersion = 1;

class LeWriter {
 public:
  explicit LeWriter(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    bytes(b, 8);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void finish(const fs::path& path) {
    out_.flush();
    if (!out_) throw Error(ErrorCode::kIo, "write failed for " + path.string());
  }

 private:
  std::ofstream out_;
};

class LeReader {
 public:
  explicit LeReader(const fs::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }
  void bytes(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error(ErrorCode::kTruncated, "truncated container " + path_.string());
    }
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  float f32() {
    const float v = std::bit_cast<float>(u32());
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFinite, "non-finite value in " + path_.string());
    }
    return v;
  }
  void floats(std::vector<float>& dst, std::size_t count) {
    const std::size_t start = dst.size();
    dst.resize(start + count);
    std::vector<unsigned char> raw(count * 4);
    bytes(reinterpret_cast<char*>(raw.data()), raw.size());
    for (std::size_t k = 0; k < count; ++k) {
      std::uint32_t bits = 0;
      for (int i = 3; i >= 0; --i) bits = (bits << 8) | raw[4 * k + i];
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNonFinite, "non-finite value in " + path_.string());
      }
      dst[start + k] = v;
    }
  }
  void magic(const std::array<char, 4>& expected) {
    std::array<char, 4> got{};
    bytes(got.data(), 4);
    if (got != expected) {
      throw Error(ErrorCode::kBadMagic, "bad magic in " + path_.string());
    }
  }

 private:
  std::ifstream in_;
  fs::path path_;
};

ContainerHeader read_header(LeReader& in, const std::array<char, 4>& magic) {
  in.magic(magic);
  const std::uint32_t version = in.u32();
  if (version != kContainerVersion) {
    throw Error(ErrorCode::kValidation, "unsupported container version " + std::to_string(version));
  }
  ContainerHeader h;
  h.n = in.u64();
  h.d = in.u64();
  return h;
}

}  // namespace

void write_embeddings(const EmbeddingStore& store, const fs::path& path) {
  LeWriter out(path);
  out.bytes(kEmbeddingMagic.data(), 4);
  out.u32(kContainerVersion);
  out.u64(store.n());
  out.u64(store.d());
  for (float v : store.values()) out.f32(v);
  out.finish(path);
}

EmbeddingStore read_embeddings(const fs::path& path) {
  LeReader in(path);
  const ContainerHeader h = read_header(in, kEmbeddingMagic);
  std::vector<float> values;
  values.reserve(h.n * h.d);
  in.floats(values, h.n * h.d);
  return EmbeddingStore(h.n, h.d, std::move(values));
}

ContainerHeader read_embeddings_header(const fs::path& path) {
  LeReader in(path);
  return read_header(in, kEmbeddingMagic);
}

void write_token_embeddings(const TokenEmbeddingStore& store, const fs::path& path) {
  LeWriter out(path);
  out.bytes(kTokenMagic.data(), 4);
  out.u32(kContainerVersion);
  out.u64(store.n());
  out.u64(store.d());
  for (std::size_t i = 0; i < store.n(); ++i) {
    out.u32(static_cast<std::uint32_t>(store.token_count(i)));
    for (float v : store.tokens(i)) out.f32(v);
  }
  out.finish(path);
}

TokenEmbeddingStore read_token_embeddings(const fs::path& path) {
  LeReader in(path);
  const ContainerHeader h = read_header(in, kTokenMagic);
  if (h.d == 0) throw Error(ErrorCode::kValidation, "token container with d=0");
  std::vector<std::vector<float>> per_sample(h.n);
  for (auto& m : per_sample) {
    const std::uint32_t t = in.u32();
    if (t == 0) throw Error(ErrorCode::kValidation, "token matrix with T=0");
    in.floats(m, static_cast<std::size_t>(t) * h.d);
  }
  return TokenEmbeddingStore(h.d, std::move(per_sample));
}

ContainerHeader read_token_embeddings_header(const fs::path& path) {
  LeReader in(path);
  return read_header(in, kTokenMagic);
}

// ---------------------------------------------------------------------------
// JSON Lines

namespace {

Label label_from_json(const json& j, const std::string& what) {
  if (j.is_number_integer()) {
    const auto v = j.get<std::int64_t>();
    if (v < 0) throw Error(ErrorCode::kValidation, what + " must be a nonnegative class index");
    return v;
  }
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorCode::kValidation, what + " must be an integer or a string");
}

json label_to_json(const Label& label) {
  return std::visit([](const auto& v) { return json(v); }, label);
}

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kValidation,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    fn(j, lineno);
  }
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

std::vector<SampleRecord> read_samples(const fs::path& path) {
  std::vector<SampleRecord> out;
  for_each_line(path, [&](const json& j, std::size_t lineno) {
    if (!j.is_object() || !j.contains("id") || !j.contains("prediction")) {
      throw Error(ErrorCode::kValidation, path.string() + ":" + std::to_string(lineno) +
                                              ": sample needs 'id' and 'prediction'");
    }
    SampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.text = opt_string(j, "text");
    r.language = opt_string(j, "language");
    r.prediction = label_from_json(j.at("prediction"), "prediction");
    r.reference = opt_string(j, "reference");
    if (auto it = j.find("cost"); it != j.end() && !it->is_null()) {
      r.cost = it->get<double>();
      if (!(*r.cost > 0.0) || !std::isfinite(*r.cost)) {
        throw Error(ErrorCode::kValidation, "sample '" + r.id + "' has non-positive cost");
      }
    }
    out.push_back(std::move(r));
  });
  return out;
}

void write_samples(const std::vector<SampleRecord>& samples, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  for (const auto& s : samples) {
    json j;
    j["id"] = s.id;
    if (s.text) j["text"] = *s.text;
    if (s.language) j["language"] = *s.language;
    j["prediction"] = label_to_json(s.prediction);
    if (s.reference) j["reference"] = *s.reference;
    if (s.cost) j["cost"] = *s.cost;
    out << j.dump() << '\n';
  }
}

std::map<std::string, Label> read_labels(const fs::path& path) {
  std::map<std::string, Label> out;
  for_each_line(path, [&](const json& j, std::size_t lineno) {
    if (!j.is_object() || !j.contains("id") || !j.contains("label")) {
      throw Error(ErrorCode::kValidation, path.string() + ":" + std::to_string(lineno) +
                                              ": label needs 'id' and 'label'");
    }
    auto id = j.at("id").get<std::string>();
    if (out.contains(id)) throw Error(ErrorCode::kDuplicateId, "duplicate label id '" + id + "'");
    out.emplace(std::move(id), label_from_json(j.at("label"), "label"));
  });
  return out;
}

void write_labels(const std::vector<std::pair<std::string, Label>>& labels,
                  const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  for (const auto& [id, label] : labels) {
    json j{{"id", id}, {"label", label_to_json(label)}};
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw Error(ErrorCode::kIo, "missing file " + p.string());
}

void require_count(const char* what, std::uint64_t got, std::size_t n) {
  if (got != n) {
    throw Error(ErrorCode::kCountMismatch, std::string(what) + " holds " + std::to_string(got) +
                                               " records, manifest n=" + std::to_string(n));
  }
}

void check_prediction(const SampleRecord& s, const DatasetManifest& m) {
  if (is_generation(m.task)) {
    if (!std::holds_alternative<std::string>(s.prediction)) {
      throw Error(ErrorCode::kValidation, "sample '" + s.id + "' needs a text prediction");
    }
    return;
  }
  const auto* cls = std::get_if<std::int64_t>(&s.prediction);
  if (cls == nullptr) {
    throw Error(ErrorCode::kValidation, "sample '" + s.id + "' needs a class prediction");
  }
  if (static_cast<std::size_t>(*cls) >= m.classes.size()) {
    throw Error(ErrorCode::kOutOfRange, "sample '" + s.id + "' predicts class " +
                                            std::to_string(*cls) + " outside the class list");
  }
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "missing manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kValidation, "manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw Error(ErrorCode::kValidation, "manifest must be a JSON object");

  const fs::path base = path.parent_path();
  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.task = parse_task(j.at("task").get<std::string>());
    m.n = j.at("n").get<std::size_t>();
    m.classes = j.value("classes", std::vector<std::string>{});
    m.samples_path = resolve(base, j.at("samples_path").get<std::string>());
    m.embeddings_path = resolve(base, j.at("embeddings_path").get<std::string>());
    if (auto it = j.find("token_embeddings_path"); it != j.end() && !it->is_null()) {
      m.token_embeddings_path = resolve(base, it->get<std::string>());
    }
    for (const auto& p : j.value("pass_embeddings_paths", std::vector<std::string>{})) {
      m.pass_embeddings_paths.push_back(resolve(base, p));
    }
    if (auto it = j.find("labels_path"); it != j.end() && !it->is_null()) {
      m.labels_path = resolve(base, it->get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidation, "manifest field error: " + std::string(e.what()));
  }

  if (is_generation(m.task) && !m.classes.empty()) {
    throw Error(ErrorCode::kValidation, "summarization manifests must not list classes");
  }
  if (!is_generation(m.task) && m.classes.empty()) {
    throw Error(ErrorCode::kValidation, "classification-style manifests need a class list");
  }

  require_file(m.samples_path);
  require_file(m.embeddings_path);
  require_count("embedding container", read_embeddings_header(m.embeddings_path).n, m.n);
  if (m.token_embeddings_path) {
    require_file(*m.token_embeddings_path);
    require_count("token container", read_token_embeddings_header(*m.token_embeddings_path).n,
                  m.n);
  }
  std::optional<std::uint64_t> pass_d;
  for (const auto& p : m.pass_embeddings_paths) {
    require_file(p);
    const auto h = read_embeddings_header(p);
    require_count("pass container", h.n, m.n);
    if (pass_d && *pass_d != h.d) {
      throw Error(ErrorCode::kCountMismatch, "pass containers disagree on dimension");
    }
    pass_d = h.d;
  }
  if (m.labels_path) require_file(*m.labels_path);

  // Sample-level checks: count, unique ids, prediction ranges.
  const auto samples = read_samples(m.samples_path);
  require_count("samples file", samples.size(), m.n);
  std::unordered_set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate sample id '" + s.id + "'");
    }
    check_prediction(s, m);
  }
  return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) { return fs::relative(p, base).generic_string(); };
  json j;
  j["name"] = m.name;
  j["task"] = to_string(m.task);
  j["n"] = m.n;
  j["classes"] = m.classes;
  j["samples_path"] = rel(m.samples_path);
  j["embeddings_path"] = rel(m.embeddings_path);
  if (m.token_embeddings_path) j["token_embeddings_path"] = rel(*m.token_embeddings_path);
  std::vector<std::string> passes;
  for (const auto& p : m.pass_embeddings_paths) passes.push_back(rel(p));
  j["pass_embeddings_paths"] = passes;
  if (m.labels_path) j["labels_path"] = rel(*m.labels_path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Oracle and costs

LabelOracle::LabelOracle(std::map<std::string, Label> labels) : labels_(std::move(labels)) {}

const Label& LabelOracle::reveal(const std::string& id) {
  auto it = labels_.find(id);
  if (it == labels_.end()) throw Error(ErrorCode::kUnknownId, "oracle has no label for '" + id + "'");
  if (!revealed_.insert(id).second) {
    throw Error(ErrorCode::kState, "label for '" + id + "' already revealed");
  }
  log_.push_back(id);
  return it->second;
}

const Label& LabelOracle::peek(const std::string& id) const {
  auto it = labels_.find(id);
  if (it == labels_.end()) throw Error(ErrorCode::kUnknownId, "oracle has no label for '" + id + "'");
  return it->second;
}

void CostModel::validate() const {
  if (!(default_cost > 0.0)) throw Error(ErrorCode::kValidation, "default cost must be positive");
  for (const auto& [lang, c] : per_language) {
    if (!(c > 0.0)) throw Error(ErrorCode::kValidation, "cost for '" + lang + "' must be positive");
  }
}

double resolve_cost(const SampleRecord& sample, const CostModel& model) {
  if (sample.cost) return *sample.cost;
  if (sample.language) {
    if (auto it = model.per_language.find(*sample.language); it != model.per_language.end()) {
      return it->second;
    }
  }
  return model.default_cost;
}

Dataset load_dataset(const fs::path& manifest_path) {
  Dataset ds;
  ds.manifest = load_manifest(manifest_path);
  ds.samples = read_samples(ds.manifest.samples_path);
  ds.embeddings = read_embeddings(ds.manifest.embeddings_path);
  if (ds.manifest.token_embeddings_path) {
    ds.tokens = read_token_embeddings(*ds.manifest.token_embeddings_path);
  }
  for (const auto& p : ds.manifest.pass_embeddings_paths) ds.passes.push_back(read_embeddings(p));
  if (ds.manifest.labels_path) {
    auto labels = read_labels(*ds.manifest.labels_path);
    require_count("labels file", labels.size(), ds.manifest.n);
    for (const auto& s : ds.samples) {
      auto it = labels.find(s.id);
      if (it == labels.end()) throw Error(ErrorCode::kUnknownId, "no label for '" + s.id + "'");
      if (!is_generation(ds.manifest.task)) {
        const auto* c = std::get_if<std::int64_t>(&it->second);
        if (c == nullptr || static_cast<std::size_t>(*c) >= ds.class_count()) {
          throw Error(ErrorCode::kOutOfRange, "label for '" + s.id + "' is not a valid class");
        }
      } else if (!std::holds_alternative<std::string>(it->second)) {
        throw Error(ErrorCode::kValidation, "summarization label for '" + s.id + "' must be text");
      }
    }
    ds.labels = std::move(labels);
  }
  return ds;
}

}  // namespace activetest
