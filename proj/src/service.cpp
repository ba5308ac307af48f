#include "activetest/service.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>

#include <httplib.h>

#include "activetest/error.hpp"
#include "activetest/rng.hpp"

namespace activetest {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::kRunning: return "running";
    case SessionStatus::kStopped: return "stopped";
    case SessionStatus::kExhausted: return "exhausted";
  }
  return "unknown";
}

namespace {

Response error_response(int status, const std::string& code, const std::string& message) {
  return {status, json{{"error", code}, {"message", message}}};
}

Response from_error(const Error& e, int fallback) {
  int status = fallback;
  switch (e.code()) {
    case ErrorCode::kUnknownId:
    case ErrorCode::kState: status = 409; break;
    case ErrorCode::kOutOfRange:
    case ErrorCode::kValidation: status = 422; break;
    default: break;
  }
  return error_response(status, to_string(e.code()), e.what());
}

}  // namespace

// ---------------------------------------------------------------------------
// Session

Session::Session(std::string id, std::string dataset_ref, std::shared_ptr<const Dataset> dataset,
                 RunConfig config)
    : id_(std::move(id)),
      dataset_ref_(std::move(dataset_ref)),
      dataset_(dataset),
      engine_(std::move(dataset), std::move(config), nullptr) {
  advance();
}

void Session::advance() {
  if (engine_.has_estimate() && engine_.check_stop().stop) {
    status_ = SessionStatus::kStopped;
    return;
  }
  if (engine_.pool_size() == 0 || !engine_.budget_allows_more()) {
    status_ = SessionStatus::kExhausted;
    return;
  }
  try {
    engine_.step();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kBudgetExhausted && e.code() != ErrorCode::kEmpty) throw;
    status_ = SessionStatus::kExhausted;
  }
}

json Session::sample_payload() const {
  const auto& sel = *engine_.state().pending;
  const auto& sample = dataset_->samples[sel.index];
  json j{{"session_id", id_},
         {"id", sel.id},
         {"step", engine_.state().step + 1},
         {"text", sample.text ? json(*sample.text) : json(nullptr)},
         {"language", sample.language ? json(*sample.language) : json(nullptr)},
         {"cost", sel.cost}};
  if (is_generation(dataset_->manifest.task)) {
    j["label_kind"] = "free-text reference expected";
  } else {
    j["label_kind"] = "class";
    j["classes"] = dataset_->manifest.classes;
  }
  return j;
}

json Session::report_json(const EstimateReport& r) const {
  return json{{"available", true},
              {"raw", r.raw},
              {"unbiased", r.unbiased},
              {"gap", r.gap},
              {"budget_count", r.budget_count},
              {"budget_cost", r.budget_cost},
              {"variance", r.variance ? json(*r.variance) : json(nullptr)},
              {"stop", r.stop},
              {"out_of_range", r.out_of_range},
              {"tau", engine_.config().stop.tau},
              {"weighting_regime", Engine::kWeightingRegime},
              {"status", to_string(status_)}};
}

Response Session::next() {
  std::lock_guard lock(mu_);
  if (status_ != SessionStatus::kRunning) {
    return error_response(409, "state", "session is " + to_string(status_));
  }
  return {200, sample_payload()};
}

Response Session::submit(const json& body) {
  std::lock_guard lock(mu_);
  if (!body.is_object() || !body.contains("id") || !body.at("id").is_string() ||
      !body.contains("label")) {
    return error_response(400, "invalid-argument", "body needs a string 'id' and a 'label'");
  }
  if (status_ != SessionStatus::kRunning) {
    return error_response(409, "state", "session is " + to_string(status_));
  }
  const std::string id = body.at("id").get<std::string>();
  if (id != engine_.state().pending->id) {
    return error_response(409, "state", "sample '" + id + "' is not the pending selection");
  }
  const json& raw = body.at("label");
  Label label;
  if (is_generation(dataset_->manifest.task)) {
    if (!raw.is_string()) return error_response(422, "validation", "expected a reference text");
    label = raw.get<std::string>();
  } else if (raw.is_number_integer()) {
    label = raw.get<std::int64_t>();
  } else if (raw.is_string()) {
    const auto& classes = dataset_->manifest.classes;
    auto it = std::find(classes.begin(), classes.end(), raw.get<std::string>());
    if (it == classes.end()) return error_response(422, "out-of-range", "unknown class name");
    label = static_cast<std::int64_t>(it - classes.begin());
  } else {
    return error_response(422, "validation", "label must be a class index or class name");
  }
  try {
    engine_.annotate(id, label);
  } catch (const Error& e) {
    return from_error(e, 422);
  }
  advance();
  return {200, report_json(engine_.estimate())};
}

Response Session::estimate() const {
  std::lock_guard lock(mu_);
  if (!engine_.has_estimate()) {
    return {200, json{{"available", false},
                      {"reason", "no labeled samples yet"},
                      {"status", to_string(status_)}}};
  }
  return {200, report_json(engine_.estimate())};
}

Response Session::status() const {
  std::lock_guard lock(mu_);
  const auto& cfg = engine_.config();
  return {200, json{{"session_id", id_},
                    {"dataset", dataset_ref_},
                    {"status", to_string(status_)},
                    {"step", engine_.state().step},
                    {"cost_spent", engine_.state().cost_spent},
                    {"budget", cfg.budget},
                    {"budget_mode", cfg.budget_mode == BudgetMode::kCount ? "count" : "cost"},
                    {"strategy", to_string(cfg.strategy)},
                    {"metric", cfg.metric.name()}}};
}

// ---------------------------------------------------------------------------
// SessionManager

SessionManager::SessionManager(ServiceOptions options) : options_(std::move(options)) {
  if (options_.trace_dir) fs::create_directories(*options_.trace_dir);
}

std::shared_ptr<const Dataset> SessionManager::dataset_for(const std::string& ref) {
  {
    std::lock_guard lock(mu_);
    auto it = datasets_.find(ref);
    if (it != datasets_.end()) return it->second;
  }
  const fs::path rel(ref);
  if (ref.empty() || rel.is_absolute()) throw Error(ErrorCode::kIo, "dataset not found");
  for (const auto& part : rel) {
    if (part == "..") throw Error(ErrorCode::kIo, "dataset not found");
  }
  fs::path path = options_.data_dir / rel;
  if (fs::is_directory(path)) path /= "manifest.json";
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::kIo, "dataset '" + ref + "' not found");
  auto ds = std::make_shared<Dataset>(load_dataset(path));
  // Interactive sessions never see ground truth.
  ds->labels.reset();
  std::lock_guard lock(mu_);
  return datasets_.emplace(ref, std::move(ds)).first->second;
}

std::string SessionManager::new_id() {
  std::lock_guard lock(mu_);
  while (true) {
    Rng rng(options_.id_seed * 0x9E3779B97F4A7C15ull + counter_++);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, rng.next_u64());
    if (!sessions_.contains(buf)) return buf;
  }
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void SessionManager::append(const std::string& id, const json& command) {
  if (!options_.trace_dir) return;
  std::lock_guard lock(trace_mu_);
  std::ofstream out(*options_.trace_dir / (id + ".jsonl"), std::ios::app);
  out << command.dump() << '\n';
}

Response SessionManager::create(const json& body) {
  return create_with_id(body, new_id(), true);
}

Response SessionManager::create_with_id(const json& body, const std::string& id, bool log) {
  if (!body.is_object() || !body.contains("dataset") || !body.at("dataset").is_string()) {
    return error_response(400, "invalid-argument", "body needs a string 'dataset'");
  }
  const std::string ref = body.at("dataset").get<std::string>();
  RunConfig config;
  try {
    config = RunConfig::from_json(body.value("config", json::object()));
  } catch (const Error& e) {
    return error_response(400, to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(400, "invalid-argument", e.what());
  }
  std::shared_ptr<const Dataset> ds;
  try {
    ds = dataset_for(ref);
  } catch (const Error& e) {
    return error_response(404, to_string(e.code()), e.what());
  }
  std::shared_ptr<Session> session;
  try {
    session = std::make_shared<Session>(id, ref, ds, config);
  } catch (const Error& e) {
    return error_response(400, to_string(e.code()), e.what());
  }
  {
    std::lock_guard lock(mu_);
    sessions_[id] = session;
  }
  if (log) {
    append(id, json{{"op", "create"}, {"session_id", id}, {"dataset", ref},
                    {"config", config.to_json()}});
  }
  return {201, json{{"session_id", id}}};
}

Response SessionManager::next(const std::string& id) {
  auto s = find(id);
  if (!s) return error_response(404, "unknown-id", "no such session");
  append(id, json{{"op", "next"}});
  return s->next();
}

Response SessionManager::submit(const std::string& id, const json& body) {
  auto s = find(id);
  if (!s) return error_response(404, "unknown-id", "no such session");
  append(id, json{{"op", "label"}, {"body", body}});
  return s->submit(body);
}

Response SessionManager::estimate(const std::string& id) {
  auto s = find(id);
  if (!s) return error_response(404, "unknown-id", "no such session");
  return s->estimate();
}

Response SessionManager::status(const std::string& id) {
  auto s = find(id);
  if (!s) return error_response(404, "unknown-id", "no such session");
  return s->status();
}

std::vector<Response> SessionManager::replay_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open trace " + path.string());
  std::vector<Response> out;
  std::string line;
  std::string id;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json cmd = json::parse(line);
    const std::string op = cmd.at("op").get<std::string>();
    if (op == "create") {
      id = cmd.at("session_id").get<std::string>();
      out.push_back(create_with_id(cmd, id, false));
    } else if (id.empty()) {
      throw Error(ErrorCode::kValidation, "trace does not start with create");
    } else if (op == "next") {
      auto s = find(id);
      out.push_back(s ? s->next() : error_response(404, "unknown-id", "no such session"));
    } else if (op == "label") {
      auto s = find(id);
      out.push_back(s ? s->submit(cmd.at("body"))
                      : error_response(404, "unknown-id", "no such session"));
    } else {
      throw Error(ErrorCode::kValidation, "unknown trace op '" + op + "'");
    }
  }
  return out;
}

std::size_t SessionManager::replay() {
  if (!options_.trace_dir || !fs::is_directory(*options_.trace_dir)) return 0;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(*options_.trace_dir)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::size_t restored = 0;
  for (const auto& f : files) {
    const auto responses = replay_file(f);
    if (!responses.empty() && responses.front().status == 201) ++restored;
  }
  return restored;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void send(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  try {
    return json::parse(req.body.empty() ? std::string("{}") : req.body);
  } catch (const json::exception& e) {
    send(res, error_response(400, "invalid-argument", std::string("malformed JSON: ") + e.what()));
    return std::nullopt;
  }
}

}  // namespace

void install_routes(httplib::Server& server, SessionManager& manager) {
  server.Post("/v1/sessions", [&manager](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) send(res, manager.create(*body));
  });
  server.Get(R"(/v1/sessions/([^/]+)/next)",
             [&manager](const httplib::Request& req, httplib::Response& res) {
               send(res, manager.next(req.matches[1]));
             });
  server.Post(R"(/v1/sessions/([^/]+)/labels)",
              [&manager](const httplib::Request& req, httplib::Response& res) {
                if (auto body = parse_body(req, res)) send(res, manager.submit(req.matches[1], *body));
              });
  server.Get(R"(/v1/sessions/([^/]+)/estimate)",
             [&manager](const httplib::Request& req, httplib::Response& res) {
               send(res, manager.estimate(req.matches[1]));
             });
  server.Get(R"(/v1/sessions/([^/]+)/status)",
             [&manager](const httplib::Request& req, httplib::Response& res) {
               send(res, manager.status(req.matches[1]));
             });
  server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
          if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        send(res, error_response(500, "internal", what));
      });
}

}  // namespace activetest
