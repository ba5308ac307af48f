#include "activetest/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "activetest/error.hpp"
#include "activetest/rng.hpp"

namespace activetest {

namespace fs = std::filesystem;
using nlohmann::json;

double estimation_error(double full_metric, double estimate) {
  return std::abs(full_metric - estimate);
}

double auecc(std::span<const double> errors) {
  if (errors.empty()) throw Error(ErrorCode::kEmpty, "empty error curve");
  return std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
}

std::map<std::string, double> mae_vs_optimal(
    const std::map<std::string, std::vector<double>>& curves) {
  if (curves.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two curves");
  const std::size_t points = curves.begin()->second.size();
  if (points == 0) throw Error(ErrorCode::kEmpty, "empty curves");
  for (const auto& [name, c] : curves) {
    if (c.size() != points) throw Error(ErrorCode::kCountMismatch, "curves on different grids");
  }
  std::vector<double> optimal(points, std::numeric_limits<double>::infinity());
  for (const auto& [name, c] : curves) {
    for (std::size_t k = 0; k < points; ++k) optimal[k] = std::min(optimal[k], c[k]);
  }
  std::map<std::string, double> out;
  for (const auto& [name, c] : curves) {
    double sum = 0.0;
    for (std::size_t k = 0; k < points; ++k) sum += std::abs(c[k] - optimal[k]);
    out[name] = sum / static_cast<double>(points);
  }
  return out;
}

std::int64_t minority_class(std::span<const std::int64_t> labels, std::size_t class_count) {
  if (labels.empty()) throw Error(ErrorCode::kEmpty, "minority class needs labels");
  std::vector<std::size_t> counts(class_count, 0);
  for (auto y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
      throw Error(ErrorCode::kOutOfRange, "label outside the class range");
    }
    ++counts[y];
  }
  // Absent classes have no instances to retrieve; pick among present ones.
  std::int64_t best = -1;
  for (std::size_t c = 0; c < class_count; ++c) {
    if (counts[c] == 0) continue;
    if (best < 0 || counts[c] < counts[best]) best = static_cast<std::int64_t>(c);
  }
  return best;
}

MinorityMetrics minority_metrics(std::span<const std::size_t> selected,
                                 std::span<const std::int64_t> labels, std::size_t class_count) {
  if (selected.empty()) throw Error(ErrorCode::kEmpty, "empty selection");
  MinorityMetrics m;
  m.minority_class = minority_class(labels, class_count);
  const auto total = std::count(labels.begin(), labels.end(), m.minority_class);
  std::size_t hits = 0;
  for (auto i : selected) {
    if (i >= labels.size()) throw Error(ErrorCode::kOutOfRange, "selected index out of range");
    if (labels[i] == m.minority_class) ++hits;
  }
  m.precision = static_cast<double>(hits) / static_cast<double>(selected.size());
  m.recall = static_cast<double>(hits) / static_cast<double>(total);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic data

SynthSpec SynthSpec::from_json(const json& j) {
  SynthSpec s;
  s.name = j.value("name", s.name);
  s.task = parse_task(j.value("task", std::string("classification")));
  s.n = j.value("n", s.n);
  s.class_priors = j.value("class_priors", s.class_priors);
  s.predictor_accuracy = j.value("predictor_accuracy", s.predictor_accuracy);
  if (s.predictor_accuracy.size() == 1 && s.class_priors.size() > 1) {
    s.predictor_accuracy.assign(s.class_priors.size(), s.predictor_accuracy.front());
  }
  s.dim = j.value("dim", s.dim);
  s.center_scale = j.value("center_scale", s.center_scale);
  s.cluster_spread = j.value("cluster_spread", s.cluster_spread);
  s.confusion_pull = j.value("confusion_pull", s.confusion_pull);
  s.tokens_min = j.value("tokens_min", s.tokens_min);
  s.tokens_max = j.value("tokens_max", s.tokens_max);
  s.token_noise = j.value("token_noise", std::vector<double>(s.class_priors.size(), 1.0));
  s.passes = j.value("passes", s.passes);
  s.pass_noise = j.value("pass_noise", s.pass_noise);
  s.languages = j.value("languages", s.languages);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kValidation, m); };
  if (n == 0) fail("synthetic n must be positive");
  if (dim == 0) fail("synthetic dim must be positive");
  if (class_priors.empty()) fail("need at least one class prior");
  double sum = 0.0;
  for (double p : class_priors) {
    if (!(p >= 0.0)) fail("class priors must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("class priors must sum to 1");
  if (predictor_accuracy.size() != class_priors.size()) fail("need one accuracy per class");
  for (double a : predictor_accuracy) {
    if (!(a >= 0.0 && a <= 1.0)) fail("predictor accuracy must lie in [0, 1]");
  }
  if (task != Task::kSummarization && class_priors.size() < 2 &&
      predictor_accuracy.front() < 1.0) {
    fail("a single class cannot be mispredicted");
  }
  if (token_noise.size() != class_priors.size()) fail("need one token noise per class");
  if (tokens_min < 1 || tokens_max < tokens_min) fail("token length range invalid");
  if (!languages.empty()) {
    double ls = 0.0;
    for (const auto& [tag, f] : languages) {
      if (!(f > 0.0)) fail("language fractions must be positive");
      ls += f;
    }
    if (std::abs(ls - 1.0) > 1e-9) fail("language fractions must sum to 1");
  }
}

namespace {

std::vector<std::size_t> exact_counts(std::span<const double> fractions, std::size_t n) {
  std::vector<std::size_t> counts(fractions.size(), 0);
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    const double exact = fractions[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[k];
    rem.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[rem[k % rem.size()].second];
  return counts;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t k = v.size(); k > 1; --k) std::swap(v[k - 1], v[rng.index(k)]);
}

std::string random_words(Rng& rng, std::size_t count) {
  std::string s;
  for (std::size_t k = 0; k < count; ++k) {
    if (k) s += ' ';
    s += "w" + std::to_string(rng.index(50));
  }
  return s;
}

}  // namespace

Dataset make_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset ds;
  ds.manifest.name = spec.name;
  ds.manifest.task = spec.task;
  ds.manifest.n = spec.n;
  const bool generation = is_generation(spec.task);
  const std::size_t classes = spec.class_priors.size();
  if (!generation) {
    for (std::size_t c = 0; c < classes; ++c) ds.manifest.classes.push_back("class_" + std::to_string(c));
  }

  std::vector<std::int64_t> labels;
  const auto counts = exact_counts(spec.class_priors, spec.n);
  for (std::size_t c = 0; c < classes; ++c) labels.insert(labels.end(), counts[c], static_cast<std::int64_t>(c));
  shuffle(labels, rng);

  std::vector<std::string> langs;
  if (!spec.languages.empty()) {
    std::vector<double> fr;
    std::vector<std::string> tags;
    for (const auto& [tag, f] : spec.languages) {
      tags.push_back(tag);
      fr.push_back(f);
    }
    const auto lc = exact_counts(fr, spec.n);
    for (std::size_t k = 0; k < tags.size(); ++k) langs.insert(langs.end(), lc[k], tags[k]);
    shuffle(langs, rng);
  }

  std::vector<std::vector<double>> centers(classes, std::vector<double>(spec.dim));
  for (auto& c : centers) {
    for (auto& v : c) v = rng.normal(0.0, spec.center_scale);
  }

  std::vector<float> emb(spec.n * spec.dim);
  std::vector<std::vector<float>> tokens(spec.n);
  std::vector<std::pair<std::string, Label>> label_rows;
  ds.labels.emplace();
  for (std::size_t i = 0; i < spec.n; ++i) {
    SampleRecord r;
    r.id = "s" + std::to_string(i);
    if (!langs.empty()) r.language = langs[i];
    const auto y = labels[i];
    Label label;
    std::int64_t pred = y;
    if (generation) {
      Rng local(rng.fork_seed());
      const std::string ref = random_words(local, 8 + local.index(8));
      std::istringstream words(ref);
      std::string out;
      std::string w;
      while (words >> w) {
        if (!out.empty()) out += ' ';
        out += local.bernoulli(spec.predictor_accuracy.front()) ? w : "w" + std::to_string(local.index(50));
      }
      r.text = "document " + std::to_string(i);
      r.prediction = out;
      label = ref;
    } else {
      if (!rng.bernoulli(spec.predictor_accuracy[y])) {
        const auto other = static_cast<std::int64_t>(rng.index(classes - 1));
        pred = other >= y ? other + 1 : other;
      }
      r.text = "synthetic sample " + std::to_string(i);
      r.prediction = pred;
      label = y;
    }
    const auto& cy = centers[generation ? 0 : y];
    const auto& cp = centers[generation ? 0 : pred];
    const double pull = pred == y ? 0.0 : spec.confusion_pull;
    for (std::size_t k = 0; k < spec.dim; ++k) {
      const double base = cy[k] + pull * (cp[k] - cy[k]);
      emb[i * spec.dim + k] = static_cast<float>(base + rng.normal(0.0, spec.cluster_spread));
    }
    const std::size_t t = spec.tokens_min + rng.index(spec.tokens_max - spec.tokens_min + 1);
    const double noise = spec.token_noise[generation ? 0 : y];
    tokens[i].resize(t * spec.dim);
    for (std::size_t a = 0; a < t; ++a) {
      for (std::size_t k = 0; k < spec.dim; ++k) {
        tokens[i][a * spec.dim + k] =
            static_cast<float>(emb[i * spec.dim + k] + rng.normal(0.0, noise));
      }
    }
    ds.labels->emplace(r.id, label);
    ds.samples.push_back(std::move(r));
  }
  ds.embeddings = EmbeddingStore(spec.n, spec.dim, emb);
  ds.tokens = TokenEmbeddingStore(spec.dim, std::move(tokens));
  for (std::size_t t = 0; t < spec.passes; ++t) {
    std::vector<float> v = emb;
    for (auto& x : v) x = static_cast<float>(x + rng.normal(0.0, spec.pass_noise));
    ds.passes.emplace_back(spec.n, spec.dim, std::move(v));
  }
  return ds;
}

fs::path write_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  DatasetManifest m = ds.manifest;
  m.n = ds.size();
  m.samples_path = dir / "samples.jsonl";
  m.embeddings_path = dir / "embeddings.ateb";
  write_samples(ds.samples, m.samples_path);
  write_embeddings(ds.embeddings, m.embeddings_path);
  m.token_embeddings_path.reset();
  if (ds.tokens) {
    m.token_embeddings_path = dir / "tokens.attk";
    write_token_embeddings(*ds.tokens, *m.token_embeddings_path);
  }
  m.pass_embeddings_paths.clear();
  for (std::size_t t = 0; t < ds.passes.size(); ++t) {
    m.pass_embeddings_paths.push_back(dir / ("pass_" + std::to_string(t) + ".ateb"));
    write_embeddings(ds.passes[t], m.pass_embeddings_paths.back());
  }
  m.labels_path.reset();
  if (ds.labels) {
    m.labels_path = dir / "labels.jsonl";
    std::vector<std::pair<std::string, Label>> rows;
    for (const auto& s : ds.samples) rows.emplace_back(s.id, ds.labels->at(s.id));
    write_labels(rows, *m.labels_path);
  }
  const fs::path manifest = dir / "manifest.json";
  write_manifest(m, manifest);
  return manifest;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<std::size_t> default_budget_grid(std::size_t max_budget, std::size_t points) {
  if (max_budget == 0 || points == 0) throw Error(ErrorCode::kInvalidArgument, "empty budget grid");
  std::vector<std::size_t> grid;
  for (std::size_t k = 1; k <= points; ++k) {
    const std::size_t b = (max_budget * k + points - 1) / points;
    if (b > 0 && (grid.empty() || b > grid.back())) grid.push_back(b);
  }
  return grid;
}

SweepConfig SweepConfig::from_json(const json& j) {
  SweepConfig c;
  c.base = RunConfig::from_json(j.value("run", json::object()));
  c.dataset_name = j.value("dataset_name", std::string());
  for (const auto& s : j.value("strategies", std::vector<std::string>{"random"})) {
    c.strategies.push_back(parse_strategy(s));
  }
  if (j.contains("budgets")) {
    c.budgets = j.at("budgets").get<std::vector<std::size_t>>();
  } else {
    c.budgets = default_budget_grid(static_cast<std::size_t>(c.base.budget));
  }
  if (j.contains("seeds")) {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } else {
    c.seeds.resize(j.value("seed_count", std::size_t{10}));
    std::iota(c.seeds.begin(), c.seeds.end(), std::uint64_t{0});
  }
  c.threads = j.value("threads", std::size_t{1});
  if (c.strategies.empty() || c.budgets.empty() || c.seeds.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "sweep grid must be non-empty");
  }
  if (!std::is_sorted(c.budgets.begin(), c.budgets.end()) ||
      std::adjacent_find(c.budgets.begin(), c.budgets.end()) != c.budgets.end()) {
    throw Error(ErrorCode::kInvalidArgument, "budget grid must be strictly increasing");
  }
  return c;
}

SweepResult sweep(std::shared_ptr<const Dataset> dataset, const SweepConfig& config) {
  if (!dataset->labels) throw Error(ErrorCode::kValidation, "sweeps need oracle labels");
  const double full = full_metric(*dataset, config.base.metric);
  const bool classification = !is_generation(dataset->manifest.task);
  std::vector<std::int64_t> labels_full;
  if (classification) {
    for (const auto& s : dataset->samples) {
      labels_full.push_back(std::get<std::int64_t>(dataset->labels->at(s.id)));
    }
  }
  const std::string name =
      config.dataset_name.empty() ? dataset->manifest.name : config.dataset_name;

  struct Cell {
    StrategyKind strategy;
    std::size_t budget;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto s : config.strategies) {
    for (auto b : config.budgets) {
      for (auto seed : config.seeds) cells.push_back({s, b, seed});
    }
  }
  std::vector<SweepRow> rows(cells.size());
  auto run_cell = [&](std::size_t k) {
    const Cell& cell = cells[k];
    RunConfig rc = config.base;
    rc.strategy = cell.strategy;
    rc.budget = static_cast<double>(cell.budget);
    rc.budget_mode = BudgetMode::kCount;
    rc.seed = cell.seed;
    LabelOracle oracle(*dataset->labels);
    const auto t0 = std::chrono::steady_clock::now();
    const RunResult res = run(dataset, rc, oracle);
    const auto t1 = std::chrono::steady_clock::now();
    SweepRow row;
    row.dataset = name;
    row.strategy = to_string(cell.strategy);
    row.metric = rc.metric.name();
    row.budget = cell.budget;
    row.seed = cell.seed;
    if (res.report) {
      row.estimation_error = estimation_error(full, res.report->unbiased);
      row.gap = res.report->gap;
    } else {
      row.estimation_error = std::abs(full);
    }
    row.cost_spent = res.state.cost_spent;
    row.stopped_at = res.stopped_at;
    row.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (classification && !res.state.selected.empty()) {
      row.minority = minority_metrics(res.state.selected, labels_full, dataset->class_count());
    }
    rows[k] = std::move(row);
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, cells.size()));
  if (threads == 1) {
    for (std::size_t k = 0; k < cells.size(); ++k) run_cell(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t k = next++; k < cells.size(); k = next++) run_cell(k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return summarize(std::move(rows));
}

SweepResult summarize(std::vector<SweepRow> rows) {
  SweepResult out;
  std::map<std::string, std::map<std::size_t, std::vector<double>>> grouped;
  for (const auto& r : rows) {
    grouped[r.strategy][r.budget].push_back(r.estimation_error);
    out.wall_time_ms[r.strategy] += r.wall_time_ms;
  }
  std::map<std::string, std::vector<double>> means;
  for (const auto& [strategy, by_budget] : grouped) {
    RunCurve curve;
    for (const auto& [budget, errs] : by_budget) {
      const double mean = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
      double ss = 0.0;
      for (double e : errs) ss += (e - mean) * (e - mean);
      curve.budgets.push_back(budget);
      curve.mean.push_back(mean);
      curve.stddev.push_back(std::sqrt(ss / static_cast<double>(errs.size())));
      curve.per_seed.push_back(errs);
    }
    out.auecc[strategy] = auecc(curve.mean);
    means[strategy] = curve.mean;
    out.curves[strategy] = std::move(curve);
  }
  if (means.size() >= 2) {
    bool same_grid = true;
    for (const auto& [s, c] : out.curves) same_grid = same_grid && c.budgets == out.curves.begin()->second.budgets;
    if (same_grid) out.mae = mae_vs_optimal(means);
  }
  out.rows = std::move(rows);
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

std::string format_rows_csv(const std::vector<SweepRow>& rows, bool include_wall_time) {
  std::ostringstream out;
  std::string header = kReportHeader;
  if (!include_wall_time) header = header.substr(0, header.rfind(','));
  out << header << '\n';
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.strategy << ',' << r.metric << ',' << r.budget << ',' << r.seed
        << ',' << fmt(r.estimation_error) << ',' << fmt(r.gap) << ',' << fmt(r.cost_spent) << ','
        << (r.stopped_at ? std::to_string(*r.stopped_at) : std::string());
    if (include_wall_time) out << ',' << fmt(r.wall_time_ms);
    out << '\n';
  }
  return out.str();
}

std::vector<SweepRow> parse_rows_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kValidation, "empty report");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportHeader) throw Error(ErrorCode::kValidation, "unexpected report header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 10) throw Error(ErrorCode::kValidation, "report row needs 10 columns");
    SweepRow r;
    r.dataset = c[0];
    r.strategy = c[1];
    r.metric = c[2];
    r.budget = std::stoull(c[3]);
    r.seed = std::stoull(c[4]);
    r.estimation_error = std::stod(c[5]);
    r.gap = std::stod(c[6]);
    r.cost_spent = std::stod(c[7]);
    if (!c[8].empty()) r.stopped_at = std::stoull(c[8]);
    r.wall_time_ms = std::stod(c[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

json summary_json(const SweepResult& result) {
  json j;
  j["auecc"] = result.auecc;
  j["mae_vs_optimal"] = result.mae;
  json minority = json::object();
  std::map<std::string, std::map<std::size_t, std::array<double, 4>>> acc;
  for (const auto& r : result.rows) {
    if (!r.minority) continue;
    auto& a = acc[r.strategy][r.budget];
    a[0] += r.minority->precision;
    a[1] += r.minority->recall;
    a[2] += r.minority->f1;
    a[3] += 1.0;
  }
  for (const auto& [strategy, by_budget] : acc) {
    for (const auto& [budget, a] : by_budget) {
      minority[strategy][std::to_string(budget)] = {
          {"precision", a[0] / a[3]}, {"recall", a[1] / a[3]}, {"f1", a[2] / a[3]}};
    }
  }
  j["minority"] = minority;
  json curves = json::object();
  for (const auto& [strategy, c] : result.curves) {
    curves[strategy] = {{"budgets", c.budgets}, {"mean", c.mean}, {"std", c.stddev}};
  }
  j["curves"] = curves;
  j["wall_time_ms"] = result.wall_time_ms;
  j["weighting_regime"] = Engine::kWeightingRegime;
  return j;
}

void write_sweep_outputs(const SweepResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "runs.csv", std::ios::trunc);
    out << format_rows_csv(result.rows);
  }
  bool any_minority = false;
  for (const auto& r : result.rows) any_minority = any_minority || r.minority.has_value();
  if (any_minority) {
    std::ofstream out(dir / "minority.csv", std::ios::trunc);
    out << "dataset,strategy,budget,seed,minority_class,precision,recall,f1\n";
    for (const auto& r : result.rows) {
      if (!r.minority) continue;
      out << r.dataset << ',' << r.strategy << ',' << r.budget << ',' << r.seed << ','
          << r.minority->minority_class << ',' << fmt(r.minority->precision) << ','
          << fmt(r.minority->recall) << ',' << fmt(r.minority->f1) << '\n';
    }
  }
  std::ofstream out(dir / "summary.json", std::ios::trunc);
  out << summary_json(result).dump(2) << '\n';
}

}  // namespace activetest
