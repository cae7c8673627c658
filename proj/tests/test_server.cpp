#include <thread>

#include "bibi/error.hpp"
#include "bibi/server.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "support.hpp"

using namespace bibi;
using namespace bibi::testing;
using nlohmann::json;

namespace {

// Store plus a live server on an ephemeral port.
struct Fixture {
  TempDir dir;
  RoundStore store{dir.path()};
  httplib::Server server;
  std::thread thread;
  int port = 0;

  Fixture() {
    install_routes(server, store);
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~Fixture() {
    server.stop();
    thread.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_connection_timeout(5);
    return c;
  }

  void open_break() {
    InitOptions o;
    o.round_id = "r";
    o.train = data_path("reviews.jsonl");
    o.dev = o.starter = data_path("sample_starter.jsonl");
    store.init_round(o);
    const auto dev = ingest_sentiment(data_path("sample_starter.jsonl"));
    std::string tsv;
    for (const auto& item : dev.items) tsv += "Secret\t" + item.id + "\t+1\n";
    store.submit_dev_predictions("r", "Secret", tsv, "Public");
  }
};

std::string osu_pair() {
  const std::string all = read_text(data_path("sample_pairs.jsonl"));
  const auto start = all.find("{\"pair_id\": \"OSU-2\"");
  return all.substr(start, all.find('\n', start) - start + 1);
}

}  // namespace

TEST_CASE("read-only routes") {
  Fixture f;
  auto c = f.client();

  auto res = c.Get("/rounds");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body) == json::array());

  f.open_break();
  res = c.Get("/rounds");
  REQUIRE(res);
  const auto list = json::parse(res->body);
  REQUIRE(list.size() == 1);
  CHECK(list[0] == json{{"round_id", "r"}, {"task", "sentiment"}, {"phase", "BUILD"}});

  res = c.Get("/rounds/r");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body.find("Secret") == std::string::npos);
  CHECK(json::parse(res->body).at("phase") == "BUILD");

  res = c.Get("/rounds/r/dev-predictions");
  REQUIRE(res);
  CHECK(res->status == 409);
  CHECK(json::parse(res->body).contains("error"));

  res = c.Get("/rounds/r/starter");
  REQUIRE(res);
  CHECK(res->body == read_text(data_path("sample_starter.jsonl")));

  f.store.advance_phase("r");
  res = c.Get("/rounds/r/dev-predictions");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body.rfind("Public\tsst-1\t+1", 0) == 0);

  res = c.Get("/rounds/r/report");
  REQUIRE(res);
  CHECK(res->status == 404);
  res = c.Get("/rounds/missing");
  REQUIRE(res);
  CHECK(res->status == 404);
  res = c.Get("/rounds/missing/starter");
  REQUIRE(res);
  CHECK(res->status == 404);
}

TEST_CASE("probe") {
  Fixture f;
  f.open_break();
  auto c = f.client();
  auto res = c.Post("/rounds/r/probe", osu_pair(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 409);  // still BUILD

  f.store.advance_phase("r");
  res = c.Post("/rounds/r/probe", osu_pair(), "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  auto body = json::parse(res->body);
  CHECK(body.at("valid") == true);
  CHECK(body.at("edit_cost").get<int>() >= 1);
  REQUIRE(body.at("predictions").size() == 1);
  CHECK(body["predictions"][0].at("baseline") == "Bag-of-ngrams");

  // short form used by the editor
  const json short_form{{"original_id", "sst-1"},
                        {"original", "Through elliptical and seemingly oblique methods, he forges moments of staggering emotional power"},
                        {"modified", "Through elliptical and seemingly oblique methods, he forges moments of staggering emotional pain"},
                        {"labels", {{"original", 1}, {"modified", 1}}}};
  res = c.Post("/rounds/r/probe", short_form.dump(), "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  body = json::parse(res->body);
  CHECK(body.at("valid") == true);
  CHECK(body.at("edit_cost") == 1);

  const json bad{{"original_id", "sst-1"}, {"original", "nothing like it"}, {"modified", "nothing like that"},
                 {"labels", {{"original", 1}, {"modified", 1}}}};
  res = c.Post("/rounds/r/probe", bad.dump(), "application/json");
  REQUIRE(res);
  body = json::parse(res->body);
  CHECK(body.at("valid") == false);
  CHECK(body.at("violations").at(0).at("code") == "NOT_FROM_STARTER");

  res = c.Post("/rounds/r/probe", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(f.store.accepted_pairs("r").empty());
}

TEST_CASE("pair submission") {
  Fixture f;
  f.open_break();
  f.store.advance_phase("r");
  auto c = f.client();

  SUBCASE("JSONL body") {
    auto res = c.Post("/rounds/r/pairs?team=OSU", osu_pair(), "application/x-ndjson");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = json::parse(res->body);
    CHECK(body.at("accepted") == 1);
    CHECK(body.at("entries").at(0).at("pair_id") == "OSU-2");
    CHECK(f.store.accepted_pairs("r").at("OSU").size() == 1);
  }
  SUBCASE("JSON array body") {
    const json arr = json::array({json::parse(osu_pair())});
    auto res = c.Post("/rounds/r/pairs?team=OSU", arr.dump(), "application/json");
    REQUIRE(res);
    CHECK(json::parse(res->body).at("accepted") == 1);
  }
  SUBCASE("missing team") {
    auto res = c.Post("/rounds/r/pairs", osu_pair(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
  }
  SUBCASE("team tokens") {
    f.store.register_team("r", "OSU", "s3cret");
    auto res = c.Post("/rounds/r/pairs?team=OSU", osu_pair(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 403);
    res = c.Post("/rounds/r/pairs?team=OSU", httplib::Headers{{"X-Team-Token", "wrong"}}, osu_pair(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 403);
    res = c.Post("/rounds/r/pairs?team=OSU", httplib::Headers{{"X-Team-Token", "s3cret"}}, osu_pair(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(f.store.accepted_pairs("r").at("OSU").size() == 1);
  }
  SUBCASE("closed for submissions during SCORE") {
    c.Post("/rounds/r/pairs?team=OSU", osu_pair(), "application/json");
    f.store.advance_phase("r");
    auto res = c.Post("/rounds/r/pairs?team=OSU", osu_pair(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 409);
    res = c.Post("/rounds/r/probe", osu_pair(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 409);
  }
  SUBCASE("unknown round") {
    auto res = c.Post("/rounds/nope/pairs?team=OSU", osu_pair(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 404);
  }
}

TEST_CASE("report route after scoring") {
  Fixture f;
  sample_round(f.store, "t4");
  const auto out = f.store.score_round("t4");
  auto res = f.client().Get("/rounds/t4/report");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body == out.json);
}

TEST_CASE("parse_bind_address") {
  CHECK(parse_bind_address("127.0.0.1:8080") == std::pair<std::string, int>{"127.0.0.1", 8080});
  CHECK(parse_bind_address(":9000") == std::pair<std::string, int>{"0.0.0.0", 9000});
  CHECK(parse_bind_address("7000") == std::pair<std::string, int>{"127.0.0.1", 7000});
  CHECK_THROWS_AS(parse_bind_address("host:port"), bibi::Error);
  CHECK_THROWS_AS(parse_bind_address("host:99999"), bibi::Error);
}
