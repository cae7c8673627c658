#include "bibi/server.hpp"

#include <exception>
#include <functional>

#include "bibi/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace bibi {

using json = nlohmann::json;

namespace {

json violations_json(const std::vector<Violation>& violations) {
  json out = json::array();
  for (const auto& v : violations) out.push_back({{"code", std::string(to_string(v.code))}, {"detail", v.detail}});
  return out;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

// Runs a handler and maps the harness exceptions onto status codes.
httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const PhaseError& e) {
      send_error(res, 409, e.what());
    } catch (const Error& e) {
      send_error(res, 400, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("bad JSON: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

std::string round_param(const httplib::Request& req) {
  const std::string id = req.matches[1];
  check_identifier("round id", id);
  return id;
}

// Accepts a full pair object, or the short probe form
// {original_id, original, modified, labels: {original, modified}}.
MinimalPair probe_candidate(const json& body, Task task) {
  json pair = body;
  if (!pair.contains("pair_id")) pair["pair_id"] = "probe";
  if (!pair.contains("task")) pair["task"] = std::string(to_string(task));
  if (!pair.contains("original_id")) pair["original_id"] = "";
  if (auto it = body.find("labels"); it != body.end() && it->is_object()) {
    if (!pair.contains("gold_original")) pair["gold_original"] = it->value("original", json());
    if (!pair.contains("gold_modified")) pair["gold_modified"] = it->value("modified", json());
  }
  for (const char* key : {"gold_original", "gold_modified"}) {
    if (!pair.contains(key) || pair[key].is_null()) pair[key] = task == Task::Sentiment ? json(0) : json::array();
  }
  PairSet set = parse_pair_json(pair.dump(), "probe", PairCheck::Lenient);
  return set.pairs.front();
}

DependencyParse parse_from_text(const std::string& text, const std::string& side) {
  const std::string content = text.rfind("#id", 0) == 0 ? text : "#id " + side + "\n" + text;
  ParseTable table = parse_parses(content, side + " parse");
  if (table.parses.size() != 1) throw DomainError(side + " parse must contain exactly one sentence");
  return table.parses.begin()->second;
}

}  // namespace

std::string probe_json(const ProbeResult& result) {
  json predictions = json::array();
  for (const auto& p : result.predictions) {
    predictions.push_back({{"baseline", p.baseline},
                           {"original", p.original},
                           {"modified", p.modified},
                           {"correct_original", p.correct_original},
                           {"correct_modified", p.correct_modified},
                           {"breaks", p.breaks}});
  }
  return json{{"valid", result.validation.ok()},
              {"violations", violations_json(result.validation.violations)},
              {"edit_cost", result.validation.edit_cost},
              {"predictions", predictions}}
      .dump(2);
}

std::string submission_json(const SubmissionReport& report) {
  json entries = json::array();
  for (const auto& e : report.entries) {
    json j{{"pair_id", e.pair_id},
           {"team", e.team},
           {"accepted", e.accepted},
           {"edit_cost", e.edit_cost},
           {"violations", violations_json(e.violations)}};
    if (!e.error.empty()) j["error"] = e.error;
    entries.push_back(j);
  }
  return json{{"accepted", report.accepted}, {"empty_effective", report.empty_effective()}, {"entries", entries}}
      .dump(2);
}

void install_routes(httplib::Server& server, RoundStore& store) {
  server.Get("/rounds", guarded([&store](const httplib::Request&, httplib::Response& res) {
               json out = json::array();
               for (const auto& r : store.list()) {
                 out.push_back({{"round_id", r.round_id},
                                {"task", std::string(to_string(r.task))},
                                {"phase", std::string(to_string(r.phase))}});
               }
               send_json(res, 200, out);
             }));

  server.Get(R"(/rounds/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
               res.set_content(to_json(store.load(round_param(req)), false) + "\n", "application/json");
             }));

  server.Get(R"(/rounds/([^/]+)/dev-predictions)",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               const std::string id = round_param(req);
               auto tsv = store.published_dev_predictions(id);
               if (!tsv) throw PhaseError("dev predictions are published when BREAK opens");
               res.set_content(*tsv, "text/tab-separated-values");
             }));

  server.Get(R"(/rounds/([^/]+)/starter)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
               res.set_content(store.starter_jsonl(round_param(req)), "application/x-ndjson");
             }));

  server.Get(R"(/rounds/([^/]+)/report)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
               const std::string id = round_param(req);
               auto report = store.report_json(id);
               if (!report) throw NotFoundError("round \"" + id + "\" has not been scored");
               res.set_content(*report, "application/json");
             }));

  server.Post(R"(/rounds/([^/]+)/probe)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const std::string id = round_param(req);
                const Round round = store.load(id);
                if (round.phase != Phase::Break) throw PhaseError("probing is available during BREAK only");
                const json body = json::parse(req.body);
                if (!body.is_object()) throw DomainError("probe body must be a JSON object");
                const MinimalPair candidate = probe_candidate(body, round.task);
                std::map<std::string, DependencyParse> parses;
                if (auto it = body.find("parses"); it != body.end() && it->is_object()) {
                  for (const char* side : {"original", "modified"}) {
                    if (it->contains(side)) parses[side] = parse_from_text((*it)[side].get<std::string>(), side);
                  }
                }
                res.set_content(probe_json(store.probe(id, candidate, parses)) + "\n", "application/json");
              }));

  server.Post(R"(/rounds/([^/]+)/pairs)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const std::string id = round_param(req);
                const Round round = store.load(id);
                if (round.phase != Phase::Break) {
                  throw PhaseError("pair submission requires phase BREAK, round \"" + id + "\" is in " +
                                   std::string(to_string(round.phase)));
                }
                const std::string team = req.get_param_value("team");
                if (team.empty()) throw DomainError("missing ?team= parameter");
                if (const TeamEntry* t = round.find_team(team); t != nullptr && !t->token.empty()) {
                  if (req.get_header_value("X-Team-Token") != t->token) {
                    send_error(res, 403, "bad or missing X-Team-Token for team \"" + team + "\"");
                    return;
                  }
                }
                // A JSON array or object body is a pair list; anything else is JSONL.
                const auto first = req.body.find_first_not_of(" \t\r\n");
                const bool array = first != std::string::npos && req.body[first] == '[';
                const PairSet pairs = array ? parse_pair_json(req.body, "request body", PairCheck::Lenient)
                                            : parse_pairs(req.body, "request body", PairCheck::Lenient);
                const SubmissionReport report = store.submit_pairs(id, team, pairs, req.body);
                res.set_content(submission_json(report) + "\n", "application/json");
              }));
}

std::pair<std::string, int> parse_bind_address(const std::string& bind) {
  const auto colon = bind.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : bind.substr(0, colon);
  const std::string port_text = colon == std::string::npos ? bind : bind.substr(colon + 1);
  if (host.empty()) host = "0.0.0.0";
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw DomainError("bad bind address \"" + bind + "\" (expected host:port)");
  }
  if (port < 0 || port > 65535) throw DomainError("port out of range in \"" + bind + "\"");
  return {host, port};
}

void serve(RoundStore& store, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, store);
  if (!server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  server.listen_after_bind();
}

}  // namespace bibi
