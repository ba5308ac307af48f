#include <thread>

#include <httplib.h>

#include "activetest/harness.hpp"
#include "activetest/service.hpp"
#include "test_util.hpp"

using namespace activetest;
using activetest::testing::TempDir;
using nlohmann::json;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SynthSpec s;
    s.name = "planted";
    s.n = 120;
    s.dim = 4;
    s.seed = 8;
    write_dataset(make_synthetic(s), dir_ / "planted");
  }

  ServiceOptions options(bool traced = false) {
    ServiceOptions o;
    o.data_dir = dir_.path();
    if (traced) o.trace_dir = dir_ / "traces";
    return o;
  }

  static json session_body(json config = json::object()) {
    return {{"dataset", "planted"}, {"config", std::move(config)}};
  }

  TempDir dir_;
};

// Labels the pending sample with its class index `label`.
Response label_pending(SessionManager& m, const std::string& id, std::int64_t label = 0) {
  const auto next = m.next(id);
  return m.submit(id, {{"id", next.body.at("id")}, {"label", label}});
}

}  // namespace

TEST_F(ServiceTest, CreateReturnsSessionId) {
  SessionManager m(options());
  const auto r = m.create(session_body());
  EXPECT_EQ(r.status, 201);
  EXPECT_TRUE(r.body.at("session_id").is_string());
}

TEST_F(ServiceTest, CreateErrors) {
  SessionManager m(options());
  EXPECT_EQ(m.create(session_body({{"strategy", "bald"}})).status, 400);
  const auto recall = m.create(session_body({{"metric", "macro-recall"}}));
  EXPECT_EQ(recall.status, 400);
  EXPECT_NE(recall.body.at("message").get<std::string>().find("true-instance counts"), std::string::npos);
  EXPECT_EQ(m.create({{"dataset", "missing"}}).status, 404);
  EXPECT_EQ(m.create({{"dataset", "../etc"}}).status, 404);
  EXPECT_EQ(m.create(json::object()).status, 400);
}

TEST_F(ServiceTest, NextIsIdempotent) {
  SessionManager m(options());
  const auto id = m.create(session_body()).body.at("session_id").get<std::string>();
  const auto a = m.next(id);
  const auto b = m.next(id);
  EXPECT_EQ(a.status, 200);
  EXPECT_EQ(a.body, b.body);
  EXPECT_EQ(a.body.at("classes").size(), 2u);
  EXPECT_EQ(m.next("nope").status, 404);
}

TEST_F(ServiceTest, SubmitErrors) {
  SessionManager m(options());
  const auto id = m.create(session_body()).body.at("session_id").get<std::string>();
  const auto pending = m.next(id).body.at("id").get<std::string>();
  EXPECT_EQ(m.submit(id, {{"id", "not-pending"}, {"label", 0}}).status, 409);
  EXPECT_EQ(m.submit(id, {{"id", pending}, {"label", 7}}).status, 422);
  EXPECT_EQ(m.submit(id, {{"id", pending}, {"label", "no-such-class"}}).status, 422);
  EXPECT_EQ(m.next(id).body.at("id"), pending);
  const auto ok = m.submit(id, {{"id", pending}, {"label", "class_1"}});
  EXPECT_EQ(ok.status, 200);
  EXPECT_TRUE(ok.body.contains("gap"));
  EXPECT_TRUE(ok.body.contains("stop"));
  EXPECT_EQ(m.submit(id, {{"id", pending}, {"label", 0}}).status, 409);
}

TEST_F(ServiceTest, EstimateAndStatus) {
  SessionManager m(options());
  const auto id = m.create(session_body({{"default_cost", 0.5}})).body.at("session_id").get<std::string>();
  const auto before = m.estimate(id);
  EXPECT_EQ(before.status, 200);
  EXPECT_EQ(before.body.at("available"), false);
  for (int k = 0; k < 3; ++k) ASSERT_EQ(label_pending(m, id).status, 200);
  const auto st = m.status(id).body;
  EXPECT_EQ(st.at("step"), 3);
  EXPECT_DOUBLE_EQ(st.at("cost_spent").get<double>(), 1.5);
  EXPECT_EQ(m.estimate(id).body.at("budget_count"), 3);
  EXPECT_EQ(m.status("nope").status, 404);
}

TEST_F(ServiceTest, StopsWhenGapBelowTau) {
  SessionManager m(options());
  // Random selection records uniform q, so the gap is zero and the rule
  // fires as soon as the minimum count is reached.
  const auto id = m.create(session_body({{"b_min", 5}})).body.at("session_id").get<std::string>();
  Response last;
  for (int k = 0; k < 5; ++k) last = label_pending(m, id);
  EXPECT_EQ(last.body.at("stop"), true);
  EXPECT_EQ(last.body.at("status"), "stopped");
  EXPECT_EQ(m.status(id).body.at("status"), "stopped");
  EXPECT_EQ(m.next(id).status, 409);
}

TEST_F(ServiceTest, BudgetExhaustion) {
  SessionManager m(options());
  const auto id = m.create(session_body({{"budget", 2}, {"stop_enabled", false}}))
                      .body.at("session_id").get<std::string>();
  label_pending(m, id);
  label_pending(m, id);
  EXPECT_EQ(m.status(id).body.at("status"), "exhausted");
  EXPECT_EQ(m.next(id).status, 409);
}

TEST_F(ServiceTest, ConcurrentSubmitsConsumeOnce) {
  SessionManager m(options());
  const auto id = m.create(session_body({{"stop_enabled", false}})).body.at("session_id").get<std::string>();
  const auto pending = m.next(id).body.at("id");
  std::vector<int> codes(8);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] { codes[t] = m.submit(id, {{"id", pending}, {"label", 1}}).status; });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(std::count(codes.begin(), codes.end(), 200), 1);
  EXPECT_EQ(std::count(codes.begin(), codes.end(), 409), 7);
  EXPECT_EQ(m.status(id).body.at("step"), 1);
}

TEST_F(ServiceTest, TraceReplayReproducesResponses) {
  std::vector<Response> live;
  std::string id;
  {
    SessionManager m(options(true));
    const auto created = m.create(session_body({{"strategy", "coverage"}, {"seed", 4}}));
    live.push_back(created);
    id = created.body.at("session_id").get<std::string>();
    for (int k = 0; k < 6; ++k) {
      live.push_back(m.next(id));
      live.push_back(m.submit(id, {{"id", live.back().body.at("id")}, {"label", k % 2}}));
    }
    live.push_back(m.submit(id, {{"id", "stale"}, {"label", 0}}));
  }
  SessionManager fresh(options());
  const auto replayed = fresh.replay_file(dir_ / "traces" / (id + ".jsonl"));
  ASSERT_EQ(replayed.size(), live.size());
  for (std::size_t k = 0; k < live.size(); ++k) {
    EXPECT_EQ(replayed[k].status, live[k].status) << k;
    EXPECT_EQ(replayed[k].body, live[k].body) << k;
  }

  SessionManager restored(options(true));
  EXPECT_EQ(restored.replay(), 1u);
  EXPECT_EQ(restored.status(id).body.at("step"), 6);
}

TEST_F(ServiceTest, HttpRoutes) {
  SessionManager m(options());
  httplib::Server server;
  install_routes(server, m);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread runner([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/v1/sessions", session_body().dump(), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const auto id = json::parse(created->body).at("session_id").get<std::string>();
  auto next = client.Get("/v1/sessions/" + id + "/next");
  ASSERT_TRUE(next);
  EXPECT_EQ(next->status, 200);
  const auto sample = json::parse(next->body);
  auto labeled = client.Post("/v1/sessions/" + id + "/labels",
                             json{{"id", sample.at("id")}, {"label", 0}}.dump(), "application/json");
  EXPECT_EQ(labeled->status, 200);
  auto est = client.Get("/v1/sessions/" + id + "/estimate");
  EXPECT_EQ(json::parse(est->body), m.estimate(id).body);
  auto st = client.Get("/v1/sessions/" + id + "/status");
  EXPECT_EQ(json::parse(st->body).at("step"), 1);
  auto bad = client.Post("/v1/sessions", "{not json", "application/json");
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(client.Get("/v1/sessions/unknown/status")->status, 404);

  server.stop();
  runner.join();
}
