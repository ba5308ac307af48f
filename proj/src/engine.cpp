#include "activetest/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "activetest/attention.hpp"
#include "activetest/error.hpp"
#include "activetest/surrogate.hpp"

namespace activetest {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "run config must be a JSON object");
  RunConfig c;
  c.strategy = parse_strategy(get_or<std::string>(j, "strategy", "random"));
  c.budget = get_or<double>(j, "budget", c.budget);
  const auto mode = get_or<std::string>(j, "budget_mode", "count");
  if (mode == "count") {
    c.budget_mode = BudgetMode::kCount;
  } else if (mode == "cost") {
    c.budget_mode = BudgetMode::kCost;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "budget_mode must be 'count' or 'cost'");
  }
  c.stop.tau = get_or<double>(j, "tau", c.stop.tau);
  c.stop.enabled = get_or<bool>(j, "stop_enabled", c.stop.enabled);
  c.stop.b_min = get_or<std::size_t>(j, "b_min", c.stop.b_min);
  c.epsilon = get_or<double>(j, "epsilon", c.epsilon);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.metric = MetricKind::parse(get_or<std::string>(j, "metric", "accuracy"));
  if (auto it = j.find("language_prior"); it != j.end() && !it->is_null()) {
    c.language_prior = get_or<std::map<std::string, double>>(j, "language_prior", {});
  }
  c.surrogate_retrain_every = get_or<std::size_t>(j, "surrogate_retrain_every", 1);
  const auto selection = get_or<std::string>(j, "selection", "proportional");
  if (selection == "proportional") {
    c.selection = SelectionMode::kProportional;
  } else if (selection == "greedy") {
    c.selection = SelectionMode::kGreedy;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "selection must be 'proportional' or 'greedy'");
  }
  c.costs.default_cost = get_or<double>(j, "default_cost", c.costs.default_cost);
  c.costs.per_language = get_or<std::map<std::string, double>>(j, "language_costs", {});
  c.mc_passes = get_or<std::size_t>(j, "mc_passes", c.mc_passes);
  c.dropout_rate = get_or<double>(j, "dropout_rate", c.dropout_rate);
  c.attention_seed = get_or<std::uint64_t>(j, "attention_seed", c.attention_seed);
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["strategy"] = to_string(strategy);
  j["budget"] = budget;
  j["budget_mode"] = budget_mode == BudgetMode::kCount ? "count" : "cost";
  j["tau"] = stop.tau;
  j["stop_enabled"] = stop.enabled;
  j["b_min"] = stop.b_min;
  j["epsilon"] = epsilon;
  j["seed"] = seed;
  j["metric"] = metric.name();
  if (language_prior) j["language_prior"] = *language_prior;
  j["surrogate_retrain_every"] = surrogate_retrain_every;
  j["selection"] = selection == SelectionMode::kGreedy ? "greedy" : "proportional";
  j["default_cost"] = costs.default_cost;
  j["language_costs"] = costs.per_language;
  j["mc_passes"] = mc_passes;
  j["dropout_rate"] = dropout_rate;
  j["attention_seed"] = attention_seed;
  return j;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidArgument, m); };
  if (!(budget >= 0.0) || !std::isfinite(budget)) fail("budget must be a nonnegative number");
  if (stop.tau < 0.0) fail("tau must be nonnegative");
  if (stop.b_min < 1) fail("b_min must be at least 1");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("epsilon must lie in [0, 1]");
  if (surrogate_retrain_every < 1) fail("surrogate_retrain_every must be at least 1");
  if (mc_passes < 2) fail("mc_passes must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
  costs.validate();
  if (language_prior) {
    double sum = 0.0;
    for (const auto& [lang, p] : *language_prior) {
      if (!(p > 0.0)) fail("language prior for '" + lang + "' must be positive");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail("language prior must sum to 1");
  }
}

std::string to_string(EndReason reason) {
  switch (reason) {
    case EndReason::kStopped: return "stopped";
    case EndReason::kBudget: return "budget";
    case EndReason::kPoolEmpty: return "pool-empty";
  }
  return "budget";
}

// ---------------------------------------------------------------------------
// Strategies

class Strategy {
 public:
  virtual ~Strategy() = default;
  /// Nonnegative scores over the full set for the current state.
  virtual const std::vector<double>& scores(const ActiveState& state) = 0;
  /// Self-weighting designs record q = 1/|population| regardless of scores.
  virtual bool self_weighting() const { return false; }
  /// Pool candidates restricted to positive scores, drawn uniformly.
  virtual bool restrict_to_positive() const { return false; }
};

namespace {

class StaticScores final : public Strategy {
 public:
  explicit StaticScores(std::vector<double> s) : scores_(std::move(s)) {}
  const std::vector<double>& scores(const ActiveState&) override { return scores_; }

 private:
  std::vector<double> scores_;
};

class UniformStrategy final : public Strategy {
 public:
  explicit UniformStrategy(std::size_t n) : scores_(random_scores(n)) {}
  const std::vector<double>& scores(const ActiveState&) override { return scores_; }

 private:
  std::vector<double> scores_;
};

class StratifiedStrategy final : public Strategy {
 public:
  StratifiedStrategy(std::vector<std::int64_t> labels, std::size_t classes, std::size_t budget)
      : labels_(std::move(labels)),
        quota_(stratified_quota(labels_, classes, budget)),
        scores_(labels_.size(), 1.0) {}

  const std::vector<double>& scores(const ActiveState& state) override {
    std::vector<std::size_t> used(quota_.size(), 0);
    for (auto i : state.selected) ++used[labels_[i]];
    if (state.pending) ++used[labels_[state.pending->index]];
    bool any = false;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      scores_[i] = used[labels_[i]] < quota_[labels_[i]] ? 1.0 : 0.0;
      any = any || scores_[i] > 0.0;
    }
    // Quotas filled: plain uniform over what is left.
    if (!any) std::fill(scores_.begin(), scores_.end(), 1.0);
    return scores_;
  }
  bool self_weighting() const override { return true; }
  bool restrict_to_positive() const override { return true; }

 private:
  std::vector<std::int64_t> labels_;
  std::vector<std::size_t> quota_;
  std::vector<double> scores_;
};

class CoverageStrategy final : public Strategy {
 public:
  explicit CoverageStrategy(const EmbeddingStore& e) : embeddings_(e) {}
  const std::vector<double>& scores(const ActiveState& state) override {
    std::optional<std::size_t> last;
    if (!state.selected.empty()) last = state.selected.back();
    scores_ = coverage_scores(embeddings_, last);
    return scores_;
  }

 private:
  const EmbeddingStore& embeddings_;
  std::vector<double> scores_;
};

class SurrogateStrategy final : public Strategy {
 public:
  SurrogateStrategy(bool forest, const EmbeddingStore& e, std::size_t classes,
                    std::size_t retrain_every, std::uint64_t seed)
      : forest_(forest),
        embeddings_(e),
        classes_(classes),
        retrain_every_(retrain_every),
        seed_(seed),
        scores_(e.n(), 1.0) {}

  const std::vector<double>& scores(const ActiveState& state) override {
    const std::size_t labeled = state.selected.size();
    const std::size_t warmup = std::max<std::size_t>(5, classes_);
    if (labeled < warmup) return scores_;
    if (trained_at_ && labeled - *trained_at_ < retrain_every_) return scores_;
    retrain(state);
    trained_at_ = labeled;
    return scores_;
  }

 private:
  void retrain(const ActiveState& state) {
    const std::size_t d = embeddings_.d();
    std::vector<float> rows;
    rows.reserve(state.selected.size() * d);
    std::vector<std::int64_t> y;
    for (std::size_t k = 0; k < state.selected.size(); ++k) {
      const auto r = embeddings_.row(state.selected[k]);
      rows.insert(rows.end(), r.begin(), r.end());
      y.push_back(std::get<std::int64_t>(state.labels[k]));
    }
    const FeatureMatrix x{rows, state.selected.size(), d};
    const std::uint64_t seed = seed_ * 1000003ULL + state.selected.size();
    std::vector<std::vector<double>> dist(embeddings_.n());
    if (forest_) {
      const auto model = ForestModel::train(x, y, classes_, seed);
      for (std::size_t i = 0; i < embeddings_.n(); ++i) dist[i] = model.predict_proba(embeddings_.row(i));
    } else {
      try {
        const auto model = KernelSvmModel::train(x, y, classes_, seed);
        for (std::size_t i = 0; i < embeddings_.n(); ++i) dist[i] = model.predict_proba(embeddings_.row(i));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateModel) throw;
        std::fill(scores_.begin(), scores_.end(), 1.0);
        return;
      }
    }
    scores_ = entropy_scores(dist);
  }

  bool forest_;
  const EmbeddingStore& embeddings_;
  std::size_t classes_;
  std::size_t retrain_every_;
  std::uint64_t seed_;
  std::optional<std::size_t> trained_at_;
  std::vector<double> scores_;
};

std::vector<EmbeddingStore> stochastic_passes(const Dataset& ds, const RunConfig& c) {
  if (ds.passes.size() >= 2) return ds.passes;
  return dropout_passes(ds.embeddings, c.mc_passes, c.dropout_rate, c.seed ^ 0xD409u);
}

std::vector<std::int64_t> class_column(const std::vector<SampleRecord>& samples) {
  std::vector<std::int64_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(std::get<std::int64_t>(s.prediction));
  return out;
}

std::unique_ptr<Strategy> make_strategy(const Dataset& ds, const RunConfig& c,
                                        const std::map<std::string, Label>* oracle) {
  const std::size_t n = ds.size();
  const bool generation = is_generation(ds.manifest.task);
  auto need_classes = [&](const char* what) {
    if (generation) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(what) + " needs class labels; not available for summarization");
    }
  };
  switch (c.strategy) {
    case StrategyKind::kRandom:
      return std::make_unique<UniformStrategy>(n);
    case StrategyKind::kStratifiedRandom: {
      need_classes("stratified sampling");
      if (oracle == nullptr) {
        throw Error(ErrorCode::kInvalidArgument, "stratified sampling needs the full label set");
      }
      std::vector<std::int64_t> labels;
      for (const auto& s : ds.samples) labels.push_back(std::get<std::int64_t>(oracle->at(s.id)));
      const auto budget = c.budget_mode == BudgetMode::kCount
                              ? static_cast<std::size_t>(std::floor(c.budget))
                              : n;
      return std::make_unique<StratifiedStrategy>(std::move(labels), ds.class_count(),
                                                  std::min(budget, n));
    }
    case StrategyKind::kCoverage:
      return std::make_unique<CoverageStrategy>(ds.embeddings);
    case StrategyKind::kUncertaintyMi: {
      need_classes("uncertainty-mi");
      const auto passes = stochastic_passes(ds, c);
      return std::make_unique<StaticScores>(
          mi_scores(linear_probe_probabilities(passes, ds.class_count(), c.seed ^ 0x9808Eu)));
    }
    case StrategyKind::kUncertaintyGp:
      return std::make_unique<StaticScores>(gp_scores(stochastic_passes(ds, c)));
    case StrategyKind::kSurrogateRf:
    case StrategyKind::kSurrogateSvm:
      need_classes("surrogate strategies");
      return std::make_unique<SurrogateStrategy>(c.strategy == StrategyKind::kSurrogateRf,
                                                 ds.embeddings, ds.class_count(),
                                                 c.surrogate_retrain_every, c.seed);
    case StrategyKind::kAgreement: {
      if (!ds.tokens) {
        throw Error(ErrorCode::kInvalidArgument, "agreement needs a token-embedding container");
      }
      const auto layer = AttentionLayer::seeded(ds.tokens->d(), c.attention_seed);
      return std::make_unique<StaticScores>(agreement_scores(layer, *ds.tokens));
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unhandled strategy");
}

}  // namespace

// ---------------------------------------------------------------------------
// Engine

std::pair<std::string, double> draw_language(const std::map<std::string, double>& prior,
                                             const std::map<std::string, std::size_t>& pool_sizes,
                                             Rng& rng) {
  std::vector<std::string> tags;
  std::vector<double> weights;
  for (const auto& [lang, p] : prior) {
    auto it = pool_sizes.find(lang);
    if (it == pool_sizes.end() || it->second == 0) continue;
    tags.push_back(lang);
    weights.push_back(p);
  }
  if (tags.empty()) throw Error(ErrorCode::kEmpty, "every language pool is empty");
  double total = 0.0;
  for (double w : weights) total += w;
  const std::size_t k = rng.categorical(weights);
  return {tags[k], weights[k] / total};
}

Engine::Engine(std::shared_ptr<const Dataset> dataset, RunConfig config,
               const std::map<std::string, Label>* oracle_labels)
    : dataset_(std::move(dataset)), config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
  const Dataset& ds = *dataset_;
  if (ds.size() == 0) throw Error(ErrorCode::kEmpty, "dataset has no samples");
  const bool generation = is_generation(ds.manifest.task);
  if (config_.metric.is_generation() != generation) {
    throw Error(ErrorCode::kUnsupportedMetric,
                config_.metric.name() + " does not apply to task " + to_string(ds.manifest.task));
  }
  if (!config_.metric.has_unbiased_estimator()) {
    throw Error(ErrorCode::kUnsupportedMetric,
                "macro-f1 has no unbiased importance-weighted estimator; use it as a full-set metric only");
  }
  if (config_.metric.kind == MetricKind::Kind::kMacroRecall) {
    if (oracle_labels == nullptr) {
      throw Error(ErrorCode::kUnsupportedMetric,
                  "macro-recall needs true-instance counts over the full set, which an "
                  "interactive session does not have");
    }
    std::vector<std::int64_t> ti(ds.class_count(), 0);
    for (const auto& s : ds.samples) ++ti[std::get<std::int64_t>(oracle_labels->at(s.id))];
    true_instances_ = std::move(ti);
  }
  if (!generation) {
    predicted_instances_.assign(ds.class_count(), 0);
    for (auto p : class_column(ds.samples)) ++predicted_instances_[p];
  }

  taken_.assign(ds.size(), false);
  for (std::size_t i = 0; i < ds.size(); ++i) index_of_.emplace(ds.samples[i].id, i);
  if (config_.language_prior) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& lang = ds.samples[i].language;
      if (!lang || !config_.language_prior->contains(*lang)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "sample '" + ds.samples[i].id + "' has a language outside the prior");
      }
      by_language_[*lang].push_back(i);
    }
    for (const auto& [lang, p] : *config_.language_prior) {
      if (!by_language_.contains(lang)) {
        throw Error(ErrorCode::kInvalidArgument, "prior language '" + lang + "' not in dataset");
      }
    }
  }
  strategy_ = make_strategy(ds, config_, oracle_labels);
}

Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

double Engine::resolve(std::size_t index) const {
  return resolve_cost(dataset_->samples[index], config_.costs);
}

std::vector<std::size_t> Engine::pool_indices(const std::string* language) const {
  std::vector<std::size_t> pool;
  if (language != nullptr) {
    for (auto i : by_language_.at(*language)) {
      if (!taken_[i]) pool.push_back(i);
    }
    return pool;
  }
  for (std::size_t i = 0; i < taken_.size(); ++i) {
    if (!taken_[i]) pool.push_back(i);
  }
  return pool;
}

bool Engine::budget_allows_more() const {
  if (config_.budget_mode == BudgetMode::kCount) {
    return static_cast<double>(state_.selected.size() + 1) <= config_.budget + 1e-9;
  }
  double min_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < taken_.size(); ++i) {
    if (!taken_[i]) min_cost = std::min(min_cost, resolve(i));
  }
  return min_cost <= config_.budget - state_.cost_spent + 1e-12;
}

const Selection& Engine::step() {
  if (state_.pending) throw Error(ErrorCode::kState, "previous selection is still unlabeled");
  if (pool_size() == 0) throw Error(ErrorCode::kEmpty, "pool is empty");
  if (!budget_allows_more()) throw Error(ErrorCode::kBudgetExhausted, "budget exhausted");

  const auto& scores = strategy_->scores(state_);
  std::optional<std::string> language;
  double language_p = 1.0;
  if (config_.language_prior) {
    std::map<std::string, std::size_t> sizes;
    for (const auto& [lang, members] : by_language_) {
      sizes[lang] = static_cast<std::size_t>(
          std::count_if(members.begin(), members.end(), [&](std::size_t i) { return !taken_[i]; }));
    }
    auto [tag, p] = draw_language(*config_.language_prior, sizes, rng_);
    language = tag;
    language_p = p;
  }
  auto pool = pool_indices(language ? &*language : nullptr);
  if (strategy_->restrict_to_positive()) {
    std::vector<std::size_t> positive;
    for (auto i : pool) {
      if (scores[i] > 0.0) positive.push_back(i);
    }
    if (!positive.empty()) pool = std::move(positive);
  }

  const double eps = strategy_->restrict_to_positive() ? 0.0 : config_.epsilon;
  const auto probs = selection_distribution(scores, pool, eps);
  std::size_t k = 0;
  if (config_.selection == SelectionMode::kGreedy) {
    for (std::size_t t = 1; t < pool.size(); ++t) {
      if (scores[pool[t]] > scores[pool[k]]) k = t;
    }
  } else {
    k = rng_.categorical(probs);
  }
  const std::size_t index = pool[k];
  const double cost = resolve(index);
  if (config_.budget_mode == BudgetMode::kCost &&
      cost > config_.budget - state_.cost_spent + 1e-12) {
    throw Error(ErrorCode::kBudgetExhausted, "selected sample costs more than the remaining budget");
  }

  std::vector<std::size_t> population;
  if (language) {
    population = by_language_.at(*language);
  } else {
    population.resize(taken_.size());
    for (std::size_t i = 0; i < population.size(); ++i) population[i] = i;
  }
  double q = strategy_->self_weighting()
                 ? 1.0 / static_cast<double>(population.size())
                 : weighting_probability(scores, population, index, config_.epsilon);
  q *= language_p;

  Selection sel;
  sel.index = index;
  sel.id = dataset_->samples[index].id;
  sel.q = q;
  sel.q_pool = probs[k] * language_p;
  sel.cost = cost;
  sel.language = language;
  taken_[index] = true;
  state_.pending = std::move(sel);
  return *state_.pending;
}

void Engine::annotate(const std::string& id, const Label& label) {
  auto it = index_of_.find(id);
  if (it == index_of_.end()) throw Error(ErrorCode::kUnknownId, "unknown sample id '" + id + "'");
  if (!state_.pending || state_.pending->id != id) {
    throw Error(ErrorCode::kState, "sample '" + id + "' is not the pending selection");
  }
  const Dataset& ds = *dataset_;
  const auto& sample = ds.samples[it->second];
  if (!is_generation(ds.manifest.task)) {
    const auto* c = std::get_if<std::int64_t>(&label);
    if (c == nullptr || *c < 0 || static_cast<std::size_t>(*c) >= ds.class_count()) {
      throw Error(ErrorCode::kOutOfRange, "label outside the class range");
    }
  } else if (!std::holds_alternative<std::string>(label)) {
    throw Error(ErrorCode::kValidation, "summarization labels are reference texts");
  }
  const double value = per_sample_value(config_.metric, sample.prediction, label, ds.class_count());

  Selection sel = std::move(*state_.pending);
  state_.pending.reset();
  state_.selected.push_back(sel.index);
  state_.q.push_back(sel.q);
  state_.q_pool.push_back(sel.q_pool);
  state_.labels.push_back(label);
  state_.values.push_back(value);
  state_.cost_spent += sel.cost;
  ++state_.step;
}

std::pair<double, double> Engine::raw_and_unbiased() const {
  if (state_.selected.empty()) throw Error(ErrorCode::kEmpty, "no annotated samples yet");
  const std::size_t n = dataset_->size();
  const auto kind = config_.metric.kind;
  if (kind == MetricKind::Kind::kMacroPrecision || kind == MetricKind::Kind::kMacroRecall) {
    std::vector<ClassObservation> obs;
    obs.reserve(state_.selected.size());
    for (std::size_t k = 0; k < state_.selected.size(); ++k) {
      obs.push_back({std::get<std::int64_t>(dataset_->samples[state_.selected[k]].prediction),
                     std::get<std::int64_t>(state_.labels[k]), state_.q[k]});
    }
    if (kind == MetricKind::Kind::kMacroPrecision) {
      return {random_precision(obs, n, predicted_instances_),
              unbiased_precision(obs, n, predicted_instances_)};
    }
    return {random_recall(obs, n, *true_instances_), unbiased_recall(obs, n, *true_instances_)};
  }
  return {m_random(state_.values), ipw_estimate(weighted_observations(), n)};
}

std::vector<WeightedObservation> Engine::weighted_observations() const {
  std::vector<WeightedObservation> obs;
  obs.reserve(state_.selected.size());
  for (std::size_t k = 0; k < state_.selected.size(); ++k) {
    obs.push_back({state_.values[k], state_.q[k]});
  }
  return obs;
}

EstimateReport Engine::estimate() const {
  EstimateReport r;
  std::tie(r.raw, r.unbiased) = raw_and_unbiased();
  const auto kind = config_.metric.kind;
  if (kind != MetricKind::Kind::kMacroPrecision && kind != MetricKind::Kind::kMacroRecall &&
      state_.selected.size() >= 2) {
    r.variance = variance_estimate(weighted_observations(), dataset_->size());
  }
  r.gap = r.raw - r.unbiased;
  r.budget_count = state_.selected.size();
  r.budget_cost = state_.cost_spent;
  r.out_of_range = r.unbiased < 0.0 || r.unbiased > 1.0;
  r.stop = stop_for(r.gap);
  return r;
}

StopDecision Engine::check_stop() const {
  const auto [raw, unbiased] = raw_and_unbiased();
  StopDecision d;
  d.gap = raw - unbiased;
  d.stop = stop_for(d.gap);
  return d;
}

bool should_stop(const StopRule& rule, std::size_t step, double gap) {
  return rule.enabled && step >= rule.b_min && std::abs(gap) < rule.tau;
}

bool Engine::stop_for(double gap) const {
  return should_stop(config_.stop, state_.selected.size(), gap);
}

// ---------------------------------------------------------------------------
// Oracle-mode loop

RunResult run(std::shared_ptr<const Dataset> dataset, const RunConfig& config,
              LabelOracle& oracle) {
  const auto* labels = dataset->labels ? &*dataset->labels : nullptr;
  Engine engine(dataset, config, labels);
  RunResult result;
  while (true) {
    try {
      engine.step();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kBudgetExhausted) {
        result.end = EndReason::kBudget;
        break;
      }
      if (e.code() == ErrorCode::kEmpty) {
        result.end = EndReason::kPoolEmpty;
        break;
      }
      throw;
    }
    const Selection sel = *engine.state().pending;
    engine.annotate(sel.id, oracle.reveal(sel.id));
    const auto report = engine.estimate();
    TraceRow row;
    row.step = engine.state().step;
    row.id = sel.id;
    row.index = sel.index;
    row.q = sel.q;
    row.q_pool = sel.q_pool;
    row.cost = sel.cost;
    row.raw = report.raw;
    row.unbiased = report.unbiased;
    row.gap = report.gap;
    row.stop = report.stop;
    result.trace.push_back(row);
    result.report = report;
    if (report.stop) {
      result.end = EndReason::kStopped;
      result.stopped_at = engine.state().step;
      break;
    }
  }
  result.state = engine.state();
  return result;
}

double full_metric(const Dataset& ds, MetricKind kind) {
  if (!ds.labels) throw Error(ErrorCode::kValidation, "full-set metric needs the label file");
  if (kind.is_generation()) {
    std::vector<std::string> preds;
    std::vector<std::string> refs;
    for (const auto& s : ds.samples) {
      preds.push_back(std::get<std::string>(s.prediction));
      refs.push_back(std::get<std::string>(ds.labels->at(s.id)));
    }
    return full_set_metric(kind, preds, refs);
  }
  std::vector<std::int64_t> preds;
  std::vector<std::int64_t> labels;
  for (const auto& s : ds.samples) {
    preds.push_back(std::get<std::int64_t>(s.prediction));
    labels.push_back(std::get<std::int64_t>(ds.labels->at(s.id)));
  }
  return full_set_metric(kind, preds, labels, ds.class_count());
}

}  // namespace activetest
