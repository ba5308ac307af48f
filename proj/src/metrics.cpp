#include "activetest/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "activetest/error.hpp"

namespace activetest {

MetricKind MetricKind::parse(const std::string& name) {
  using K = Kind;
  if (name == "accuracy") return {K::kAccuracy, 1};
  if (name == "macro-precision" || name == "precision") return {K::kMacroPrecision, 1};
  if (name == "macro-recall" || name == "recall") return {K::kMacroRecall, 1};
  if (name == "macro-f1" || name == "f1") return {K::kMacroF1, 1};
  if (name.rfind("rouge-", 0) == 0) {
    const std::string tail = name.substr(6);
    int order = 0;
    try {
      std::size_t used = 0;
      order = std::stoi(tail, &used);
      if (used != tail.size()) order = 0;
    } catch (const std::exception&) {
      order = 0;
    }
    if (order < 1) throw Error(ErrorCode::kInvalidArgument, "bad ROUGE order in '" + name + "'");
    return {K::kRougeN, order};
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown metric '" + name + "'");
}

std::string MetricKind::name() const {
  switch (kind) {
    case Kind::kAccuracy: return "accuracy";
    case Kind::kMacroPrecision: return "macro-precision";
    case Kind::kMacroRecall: return "macro-recall";
    case Kind::kMacroF1: return "macro-f1";
    case Kind::kRougeN: return "rouge-" + std::to_string(order);
  }
  return "accuracy";
}

ConfusionCounts ConfusionCounts::from(std::span<const std::int64_t> predictions,
                                      std::span<const std::int64_t> labels,
                                      std::size_t class_count) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kCountMismatch, "predictions and labels differ in length");
  }
  ConfusionCounts c;
  c.tp.assign(class_count, 0);
  c.pi.assign(class_count, 0);
  c.ti.assign(class_count, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto p = predictions[i];
    const auto y = labels[i];
    if (p < 0 || y < 0 || static_cast<std::size_t>(p) >= class_count ||
        static_cast<std::size_t>(y) >= class_count) {
      throw Error(ErrorCode::kOutOfRange, "class index outside [0, class_count)");
    }
    ++c.pi[p];
    ++c.ti[y];
    if (p == y) ++c.tp[p];
  }
  return c;
}

double per_sample_accuracy(std::int64_t prediction, std::int64_t label, std::size_t class_count) {
  const auto in_range = [&](std::int64_t v) {
    return v >= 0 && static_cast<std::size_t>(v) < class_count;
  };
  if (!in_range(prediction) || !in_range(label)) {
    throw Error(ErrorCode::kOutOfRange, "class index outside [0, class_count)");
  }
  return prediction == label ? 1.0 : 0.0;
}

namespace {

// Returns the byte length of a whitespace code point at s[i], or 0.
std::size_t whitespace_length(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  if (c == 0xC2 && i + 1 < s.size()) {
    const auto c1 = static_cast<unsigned char>(s[i + 1]);
    if (c1 == 0x85 || c1 == 0xA0) return 2;  // NEL, NBSP
  }
  if (c == 0xE1 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x9A &&
      static_cast<unsigned char>(s[i + 2]) == 0x80) {
    return 3;  // U+1680
  }
  if (c == 0xE2 && i + 2 < s.size()) {
    const auto c1 = static_cast<unsigned char>(s[i + 1]);
    const auto c2 = static_cast<unsigned char>(s[i + 2]);
    if (c1 == 0x80 && ((c2 >= 0x80 && c2 <= 0x8A) || c2 == 0xA8 || c2 == 0xA9 || c2 == 0xAF)) {
      return 3;  // U+2000..200A, U+2028, U+2029, U+202F
    }
    if (c1 == 0x81 && c2 == 0x9F) return 3;  // U+205F
  }
  if (c == 0xE3 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
      static_cast<unsigned char>(s[i + 2]) == 0x80) {
    return 3;  // U+3000
  }
  return 0;
}

std::map<std::vector<std::string>, std::int64_t> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::map<std::vector<std::string>, std::int64_t> counts;
  const auto order = static_cast<std::size_t>(n);
  if (tokens.size() < order) return counts;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + order)];
  }
  return counts;
}

}  // namespace

std::vector<std::string> rouge_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    std::size_t b = 0;
    std::size_t e = current.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(current[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(current[e - 1]))) --e;
    if (e > b) tokens.push_back(current.substr(b, e - b));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    if (const std::size_t ws = whitespace_length(text, i); ws > 0) {
      flush();
      i += ws;
      continue;
    }
    const auto c = static_cast<unsigned char>(text[i]);
    current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    ++i;
  }
  flush();
  return tokens;
}

double rouge_n(std::string_view prediction, std::string_view reference, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "ROUGE order must be >= 1");
  const auto ref = ngram_counts(rouge_tokenize(reference), n);
  std::int64_t denom = 0;
  for (const auto& [g, c] : ref) denom += c;
  if (denom == 0) throw Error(ErrorCode::kEmpty, "reference has no n-grams");
  const auto pred = ngram_counts(rouge_tokenize(prediction), n);
  std::int64_t overlap = 0;
  for (const auto& [g, c] : ref) {
    if (auto it = pred.find(g); it != pred.end()) overlap += std::min(c, it->second);
  }
  return static_cast<double>(overlap) / static_cast<double>(denom);
}

namespace {

double ratio_or_zero(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double macro_precision(const ConfusionCounts& c) {
  if (c.tp.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < c.tp.size(); ++k) sum += ratio_or_zero(c.tp[k], c.pi[k]);
  return sum / static_cast<double>(c.tp.size());
}

double macro_recall(const ConfusionCounts& c) {
  if (c.tp.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < c.tp.size(); ++k) sum += ratio_or_zero(c.tp[k], c.ti[k]);
  return sum / static_cast<double>(c.tp.size());
}

double macro_f1(const ConfusionCounts& c) {
  if (c.tp.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < c.tp.size(); ++k) {
    const double p = ratio_or_zero(c.tp[k], c.pi[k]);
    const double r = ratio_or_zero(c.tp[k], c.ti[k]);
    if (p + r > 0.0) sum += 2.0 * p * r / (p + r);
  }
  return sum / static_cast<double>(c.tp.size());
}

double full_set_metric(MetricKind kind, std::span<const std::int64_t> predictions,
                       std::span<const std::int64_t> labels, std::size_t class_count) {
  if (labels.size() != predictions.size()) {
    throw Error(ErrorCode::kCountMismatch, "full-set metric needs a label for every sample");
  }
  if (predictions.empty()) throw Error(ErrorCode::kEmpty, "empty test set");
  const auto counts = ConfusionCounts::from(predictions, labels, class_count);
  switch (kind.kind) {
    case MetricKind::Kind::kAccuracy: {
      std::int64_t correct = 0;
      for (auto t : counts.tp) correct += t;
      return static_cast<double>(correct) / static_cast<double>(predictions.size());
    }
    case MetricKind::Kind::kMacroPrecision: return macro_precision(counts);
    case MetricKind::Kind::kMacroRecall: return macro_recall(counts);
    case MetricKind::Kind::kMacroF1: return macro_f1(counts);
    case MetricKind::Kind::kRougeN: break;
  }
  throw Error(ErrorCode::kUnsupportedMetric, "ROUGE needs text predictions");
}

double full_set_metric(MetricKind kind, std::span<const std::string> predictions,
                       std::span<const std::string> references) {
  if (kind.kind != MetricKind::Kind::kRougeN) {
    throw Error(ErrorCode::kUnsupportedMetric, kind.name() + " needs class predictions");
  }
  if (references.size() != predictions.size()) {
    throw Error(ErrorCode::kCountMismatch, "full-set metric needs a reference for every sample");
  }
  if (predictions.empty()) throw Error(ErrorCode::kEmpty, "empty test set");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    sum += rouge_n(predictions[i], references[i], kind.order);
  }
  return sum / static_cast<double>(predictions.size());
}

double per_sample_value(MetricKind kind, const Prediction& prediction, const Label& label,
                        std::size_t class_count) {
  if (kind.is_generation()) {
    const auto* p = std::get_if<std::string>(&prediction);
    const auto* y = std::get_if<std::string>(&label);
    if (p == nullptr || y == nullptr) {
      throw Error(ErrorCode::kValidation, "ROUGE needs text prediction and reference");
    }
    return rouge_n(*p, *y, kind.order);
  }
  const auto* p = std::get_if<std::int64_t>(&prediction);
  const auto* y = std::get_if<std::int64_t>(&label);
  if (p == nullptr || y == nullptr) {
    throw Error(ErrorCode::kValidation, "classification metrics need class indices");
  }
  return per_sample_accuracy(*p, *y, class_count);
}

}  // namespace activetest
