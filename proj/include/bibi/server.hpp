#pragma once

// HTTP front end over a RoundStore. JSON bodies; errors come back as
// {"error": "..."} with 400 (bad input), 403 (bad team token), 404 (unknown
// round or resource) or 409 (wrong phase).

#include <string>

#include "bibi/harness.hpp"

namespace httplib {
class Server;
}

namespace bibi {

// Registers every route on `server`. The store must outlive the server.
void install_routes(httplib::Server& server, RoundStore& store);

// Blocks until the server stops. Throws Error if the address cannot be bound.
void serve(RoundStore& store, const std::string& host, int port);

// "host:port" or ":port" or "port".
std::pair<std::string, int> parse_bind_address(const std::string& bind);

// JSON bodies shared by the CLI and the HTTP API.
std::string probe_json(const ProbeResult& result);
std::string submission_json(const SubmissionReport& report);

}  // namespace bibi
