#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "activetest/engine.hpp"

namespace httplib {
class Server;
}

namespace activetest {

enum class SessionStatus { kRunning, kStopped, kExhausted };
std::string to_string(SessionStatus status);

/// HTTP status plus JSON body. Handlers never throw.
struct Response {
  int status = 200;
  nlohmann::json body;
};

/// One interactive annotation session. Every public call takes the session
/// mutex, so commands against one session are applied one at a time.
class Session {
 public:
  Session(std::string id, std::string dataset_ref, std::shared_ptr<const Dataset> dataset,
          RunConfig config);

  const std::string& id() const { return id_; }
  Response next();
  Response submit(const nlohmann::json& body);
  Response estimate() const;
  Response status() const;

 private:
  nlohmann::json sample_payload() const;
  nlohmann::json report_json(const EstimateReport& r) const;
  void advance();

  std::string id_;
  std::string dataset_ref_;
  std::shared_ptr<const Dataset> dataset_;
  Engine engine_;
  SessionStatus status_ = SessionStatus::kRunning;
  mutable std::mutex mu_;
};

struct ServiceOptions {
  std::filesystem::path data_dir = ".";
  /// Append-only command traces, one file per session. Empty disables them.
  std::optional<std::filesystem::path> trace_dir;
  std::uint64_t id_seed = 0;
};

/// Session registry. Datasets are loaded once per reference and shared.
class SessionManager {
 public:
  explicit SessionManager(ServiceOptions options);

  Response create(const nlohmann::json& body);
  Response next(const std::string& id);
  Response submit(const std::string& id, const nlohmann::json& body);
  Response estimate(const std::string& id);
  Response status(const std::string& id);

  /// Rebuilds sessions from every trace file in the trace directory.
  /// Returns the number of sessions restored.
  std::size_t replay();

  /// Replays one trace file and returns the response to each command, in
  /// order. Used to check that responses are a function of the trace.
  std::vector<Response> replay_file(const std::filesystem::path& path);

 private:
  std::shared_ptr<const Dataset> dataset_for(const std::string& ref);
  std::shared_ptr<Session> find(const std::string& id);
  Response create_with_id(const nlohmann::json& body, const std::string& id, bool log);
  void append(const std::string& id, const nlohmann::json& command);
  std::string new_id();

  ServiceOptions options_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
  std::uint64_t counter_ = 0;
  std::mutex trace_mu_;
};

/// Registers the /v1 routes on `server`.
void install_routes(httplib::Server& server, SessionManager& manager);

}  // namespace activetest
