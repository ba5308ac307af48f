#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

namespace activetest {

enum class Task { kClassification, kNer, kPos, kSummarization };

Task parse_task(const std::string& name);
std::string to_string(Task task);
inline bool is_generation(Task task) { return task == Task::kSummarization; }

/// Class index for classification-style tasks, free text for summarization.
using Label = std::variant<std::int64_t, std::string>;
using Prediction = Label;

struct SampleRecord {
  std::string id;
  std::optional<std::string> text;
  std::optional<std::string> language;
  Prediction prediction;
  std::optional<std::string> reference;
  std::optional<double> cost;
};

struct DatasetManifest {
  std::string name;
  Task task = Task::kClassification;
  std::size_t n = 0;
  std::vector<std::string> classes;
  std::filesystem::path samples_path;
  std::filesystem::path embeddings_path;
  std::optional<std::filesystem::path> token_embeddings_path;
  std::vector<std::filesystem::path> pass_embeddings_paths;
  std::optional<std::filesystem::path> labels_path;
};

/// Dense n x d float matrix, row-major; row i aligns with sample i.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::size_t n, std::size_t d, std::vector<float> values);

  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }
  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * d_, d_};
  }
  const std::vector<float>& values() const { return values_; }

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<float> values_;
};

/// Ragged per-sample token matrices, each T_i x d with T_i >= 1.
class TokenEmbeddingStore {
 public:
  TokenEmbeddingStore() = default;
  TokenEmbeddingStore(std::size_t d, std::vector<std::vector<float>> per_sample);

  std::size_t n() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t d() const { return d_; }
  std::size_t token_count(std::size_t i) const {
    return (offsets_[i + 1] - offsets_[i]) / d_;
  }
  /// Row-major T_i x d block for sample i.
  std::span<const float> tokens(std::size_t i) const {
    return {values_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

 private:
  std::size_t d_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<float> values_;
};

struct ContainerHeader {
  std::uint64_t n = 0;
  std::uint64_t d = 0;
};

// Binary containers. See README for the byte layout.
void write_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore read_embeddings(const std::filesystem::path& path);
ContainerHeader read_embeddings_header(const std::filesystem::path& path);

void write_token_embeddings(const TokenEmbeddingStore& store,
                            const std::filesystem::path& path);
TokenEmbeddingStore read_token_embeddings(const std::filesystem::path& path);
ContainerHeader read_token_embeddings_header(const std::filesystem::path& path);

// JSON Lines files.
std::vector<SampleRecord> read_samples(const std::filesystem::path& path);
void write_samples(const std::vector<SampleRecord>& samples,
                   const std::filesystem::path& path);
std::map<std::string, Label> read_labels(const std::filesystem::path& path);
void write_labels(const std::vector<std::pair<std::string, Label>>& labels,
                  const std::filesystem::path& path);

/// Parses and validates a manifest. Relative paths resolve against the
/// manifest's directory. Every referenced file must exist and agree on n.
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Reveals ground-truth labels in simulation mode, at most once per id.
class LabelOracle {
 public:
  explicit LabelOracle(std::map<std::string, Label> labels);

  const Label& reveal(const std::string& id);
  bool contains(const std::string& id) const { return labels_.contains(id); }
  const std::vector<std::string>& access_log() const { return log_; }
  /// Full-set lookup for harness-side scoring; does not touch the access log.
  const Label& peek(const std::string& id) const;
  std::size_t size() const { return labels_.size(); }

 private:
  std::map<std::string, Label> labels_;
  std::vector<std::string> log_;
  std::unordered_set<std::string> revealed_;
};

struct CostModel {
  double default_cost = 0.02;
  std::map<std::string, double> per_language;

  void validate() const;
};

/// Precedence: sample override, then language entry, then default.
double resolve_cost(const SampleRecord& sample, const CostModel& model);

/// Everything a run needs, loaded from a manifest.
struct Dataset {
  DatasetManifest manifest;
  std::vector<SampleRecord> samples;
  EmbeddingStore embeddings;
  std::optional<TokenEmbeddingStore> tokens;
  std::vector<EmbeddingStore> passes;
  std::optional<std::map<std::string, Label>> labels;

  std::size_t size() const { return samples.size(); }
  std::size_t class_count() const { return manifest.classes.size(); }
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace activetest
