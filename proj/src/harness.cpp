#include "bibi/harness.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <memory>
#include <mutex>
#include <set>

#include "bibi/baselines.hpp"
#include "bibi/error.hpp"
#include "json.hpp"

namespace bibi {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kManifest = "round.json";

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Exclusive lock on one round: an in-process mutex plus an flock on a
// per-round lock file, so concurrent CLI processes serialize too.
class RoundLock {
 public:
  RoundLock(const fs::path& root, std::string_view round_id) : guard_(mutex_for(root / round_id)) {
    const fs::path dir = root / ".locks";
    fs::create_directories(dir);
    const fs::path file = dir / (std::string(round_id) + ".lock");
    fd_ = ::open(file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot open lock file " + file.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error("cannot lock " + file.string());
    }
  }
  ~RoundLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  RoundLock(const RoundLock&) = delete;
  RoundLock& operator=(const RoundLock&) = delete;

 private:
  static std::mutex& mutex_for(const fs::path& key) {
    static std::mutex registry_mutex;
    static std::map<std::string, std::unique_ptr<std::mutex>> registry;
    std::lock_guard<std::mutex> lock(registry_mutex);
    auto& slot = registry[fs::absolute(key).lexically_normal().string()];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
  }

  std::unique_lock<std::mutex> guard_;
  int fd_ = -1;
};

// ---------------------------------------------------------------------------
// Manifest encoding

json manifest_json(const Round& r, bool internal) {
  json systems = json::array();
  for (const auto& s : r.systems) {
    json j = internal ? json{{"name", s.name}, {"alias", s.alias}, {"test_submitted", s.test_submitted}}
                      : json{{"name", s.display_name()}, {"test_submitted", s.test_submitted}};
    j["dev_accuracy"] = s.dev_accuracy ? json(*s.dev_accuracy) : json(nullptr);
    systems.push_back(j);
  }
  json teams = json::array();
  for (const auto& t : r.teams) {
    json j{{"name", t.name}, {"submitted", t.submitted}, {"accepted", t.accepted}};
    if (internal) j["token"] = t.token;
    teams.push_back(j);
  }
  json datasets = json::object();
  for (const auto& [key, d] : r.datasets) datasets[key] = {{"file", d.file}, {"sha256", d.sha256}, {"items", d.items}};
  json history = json::array();
  for (const auto& h : r.history) history.push_back({{"phase", std::string(to_string(h.phase))}, {"at", h.at}});
  return json{{"round_id", r.round_id},
              {"task", std::string(to_string(r.task))},
              {"phase", std::string(to_string(r.phase))},
              {"config",
               {{"min_dev_coverage", r.config.min_dev_coverage},
                {"max_edit_cost", r.config.max_edit_cost},
                {"majority_threshold", r.config.majority_threshold}}},
              {"datasets", datasets},
              {"systems", systems},
              {"teams", teams},
              {"baselines", r.baselines},
              {"history", history}};
}

Round round_from_json(const json& j) {
  Round r;
  r.round_id = j.at("round_id").get<std::string>();
  r.task = parse_task(j.at("task").get<std::string>());
  r.phase = parse_phase(j.at("phase").get<std::string>());
  const json& c = j.at("config");
  r.config.min_dev_coverage = c.at("min_dev_coverage").get<double>();
  r.config.max_edit_cost = c.at("max_edit_cost").get<std::size_t>();
  r.config.majority_threshold = c.at("majority_threshold").get<double>();
  for (const auto& [key, d] : j.at("datasets").items()) {
    r.datasets[key] = {d.at("file").get<std::string>(), d.at("sha256").get<std::string>(),
                       d.at("items").get<std::size_t>()};
  }
  for (const auto& s : j.at("systems")) {
    SystemEntry e;
    e.name = s.at("name").get<std::string>();
    e.alias = s.value("alias", std::string{});
    e.test_submitted = s.value("test_submitted", false);
    if (!s.at("dev_accuracy").is_null()) e.dev_accuracy = s.at("dev_accuracy").get<double>();
    r.systems.push_back(std::move(e));
  }
  for (const auto& t : j.at("teams")) {
    r.teams.push_back({t.at("name").get<std::string>(), t.value("token", std::string{}),
                       t.value("submitted", std::size_t{0}), t.value("accepted", std::size_t{0})});
  }
  r.baselines = j.value("baselines", std::vector<std::string>{});
  for (const auto& h : j.at("history")) {
    r.history.push_back({parse_phase(h.at("phase").get<std::string>()), h.at("at").get<std::string>()});
  }
  return r;
}

void save_round(const fs::path& dir, const Round& r) { write_atomic(dir / kManifest, manifest_json(r, true).dump(2) + "\n"); }

void require_phase(const Round& r, Phase expected, std::string_view action) {
  if (r.phase != expected) {
    throw PhaseError(std::string(action) + " requires phase " + std::string(to_string(expected)) + ", round \"" +
                     r.round_id + "\" is in " + std::string(to_string(r.phase)));
  }
}

void transition(Round& r, Phase next) {
  r.phase = next;
  r.history.push_back({next, now_iso()});
}

SystemEntry* find_system_mut(Round& r, std::string_view name) {
  for (auto& s : r.systems) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

TeamEntry& team_entry(Round& r, std::string_view name) {
  for (auto& t : r.teams) {
    if (t.name == name) return t;
  }
  r.teams.push_back({std::string(name), {}, 0, 0});
  return r.teams.back();
}

std::optional<std::string> read_if_exists(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  return read_file(p);
}

StarterPool load_starter(const fs::path& dir, Task task) {
  const fs::path p = dir / "data" / "starter.jsonl";
  if (task == Task::Sentiment) return StarterPool(ingest_sentiment(p));
  return StarterPool(ingest_qasrl(p));
}

// Rows of a submitted prediction file must all belong to `system`.
PredictionTable parse_system_predictions(std::string_view tsv, Task task, std::string_view system,
                                         const std::string& source) {
  PredictionTable table = parse_predictions(tsv, task, source);
  for (const auto& [key, value] : table.entries()) {
    if (key.system != system) {
      throw Error("prediction file contains rows for \"" + key.system + "\", expected only \"" +
                  std::string(system) + "\"");
    }
  }
  return table;
}

std::vector<std::string> team_files(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string join_limited(const std::vector<std::string>& ids, std::size_t limit) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) {
    if (i > 0) out += ", ";
    out += ids[i];
  }
  if (ids.size() > limit) out += ", ... (" + std::to_string(ids.size() - limit) + " more)";
  return out;
}

std::string prediction_payload(const PredictionValue& v) {
  if (const auto* p = std::get_if<Polarity>(&v)) return format_polarity(*p);
  return std::get<std::string>(v);
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Build: return "BUILD";
    case Phase::Break: return "BREAK";
    case Phase::Score: return "SCORE";
    case Phase::Closed: return "CLOSED";
  }
  return "BUILD";
}

Phase parse_phase(std::string_view name) {
  if (name == "BUILD") return Phase::Build;
  if (name == "BREAK") return Phase::Break;
  if (name == "SCORE") return Phase::Score;
  if (name == "CLOSED") return Phase::Closed;
  throw DomainError("unknown phase \"" + std::string(name) + "\"");
}

const SystemEntry* Round::find_system(std::string_view name) const {
  for (const auto& s : systems) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const TeamEntry* Round::find_team(std::string_view name) const {
  for (const auto& t : teams) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string to_json(const Round& round, bool internal) { return manifest_json(round, internal).dump(2); }

bool legal_history(const std::vector<PhaseTransition>& history) {
  if (history.empty() || history.size() > 4) return false;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (static_cast<std::size_t>(history[i].phase) != i) return false;
  }
  return true;
}

void write_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned long> counter{0};
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()) +
                                             "." + std::to_string(counter++));
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (f == nullptr) throw Error("cannot write " + tmp.string());
  const bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size() && std::fflush(f) == 0 &&
                  ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  if (!ok) {
    fs::remove(tmp);
    throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  static const char* kHex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

void check_identifier(std::string_view what, std::string_view name) {
  const bool ok = !name.empty() && name.size() <= 128 && name.front() != '.' &&
                  std::all_of(name.begin(), name.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
                  });
  if (!ok) throw DomainError(std::string(what) + " \"" + std::string(name) + "\" must match [A-Za-z0-9._-]+");
}

std::string to_jsonl(const SubmissionReport& report) {
  std::string out;
  for (const auto& e : report.entries) {
    json violations = json::array();
    for (const auto& v : e.violations) violations.push_back({{"code", std::string(to_string(v.code))}, {"detail", v.detail}});
    json j{{"pair_id", e.pair_id},
           {"team", e.team},
           {"violations", violations},
           {"edit_cost", e.edit_cost},
           {"accepted", e.accepted}};
    if (!e.error.empty()) j["error"] = e.error;
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

RoundStore::RoundStore(fs::path root) : root_(std::move(root)) {}

fs::path RoundStore::default_root() {
  if (const char* env = std::getenv("BIBI_STORE"); env != nullptr && *env != '\0') return env;
  return "bibi-store";
}

fs::path RoundStore::round_dir(std::string_view round_id) const { return root_ / round_id; }

bool RoundStore::exists(std::string_view round_id) const { return fs::exists(round_dir(round_id) / kManifest); }

Round RoundStore::load(std::string_view round_id) const {
  check_identifier("round id", round_id);
  const fs::path p = round_dir(round_id) / kManifest;
  if (!fs::exists(p)) throw NotFoundError("no round \"" + std::string(round_id) + "\"");
  const json j = json::parse(read_file(p), nullptr, false);
  if (j.is_discarded()) throw IngestError(p.string(), 0, "corrupt round manifest");
  try {
    return round_from_json(j);
  } catch (const json::exception& e) {
    throw IngestError(p.string(), 0, std::string("corrupt round manifest: ") + e.what());
  }
}

std::vector<Round> RoundStore::list() const {
  std::vector<Round> out;
  if (!fs::exists(root_)) return out;
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root_)) {
    const std::string name = e.path().filename().string();
    if (e.is_directory() && name.front() != '.' && fs::exists(e.path() / kManifest)) ids.push_back(name);
  }
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) out.push_back(load(id));
  return out;
}

Round RoundStore::init_round(const InitOptions& o) {
  check_identifier("round id", o.round_id);
  for (const auto* p : {&o.train, &o.dev, &o.starter}) {
    if (!fs::exists(*p)) throw Error("missing data file: " + p->string());
  }
  if (o.train_parses && !fs::exists(*o.train_parses)) throw Error("missing data file: " + o.train_parses->string());
  if (o.baseline_model && !fs::exists(*o.baseline_model)) {
    throw Error("missing model file: " + o.baseline_model->string());
  }

  const std::string train_text = read_file(o.train);
  const std::string dev_text = read_file(o.dev);
  const std::string starter_text = read_file(o.starter);

  Round round;
  round.round_id = o.round_id;
  round.task = o.task;
  round.config = o.config;
  std::vector<std::pair<std::string, ModelFile>> models;

  auto info = [](const std::string& file, const std::string& text, std::size_t items) {
    return DatasetInfo{file, sha256_hex(text), items};
  };
  if (o.task == Task::Sentiment) {
    const auto train = parse_sentiment(train_text, o.train.string());
    const auto dev = parse_sentiment(dev_text, o.dev.string());
    const auto starter = parse_sentiment(starter_text, o.starter.string());
    round.datasets["train"] = info("data/train.jsonl", train_text, train.items.size());
    round.datasets["dev"] = info("data/dev.jsonl", dev_text, dev.items.size());
    round.datasets["starter"] = info("data/starter.jsonl", starter_text, starter.items.size());
    if (o.baseline_model) {
      models.emplace_back("Bag-of-ngrams", load_model(*o.baseline_model));
    } else if (o.train_baseline) {
      models.emplace_back("Bag-of-ngrams", ModelFile{Task::Sentiment, train_sentiment(train), {}});
    }
  } else {
    const auto train = parse_qasrl(train_text, o.train.string());
    const auto dev = parse_qasrl(dev_text, o.dev.string());
    const auto starter = parse_qasrl(starter_text, o.starter.string());
    round.datasets["train"] = info("data/train.jsonl", train_text, train.items.size());
    round.datasets["dev"] = info("data/dev.jsonl", dev_text, dev.items.size());
    round.datasets["starter"] = info("data/starter.jsonl", starter_text, starter.items.size());
    if (o.baseline_model) {
      models.emplace_back("QA-SRL-baseline", load_model(*o.baseline_model));
    } else if (o.train_baseline && o.train_parses) {
      const auto parses = ingest_parses(*o.train_parses);
      auto trained = train_qasrl(train, parses);
      models.emplace_back("QA-SRL-baseline", ModelFile{Task::Qasrl, trained.model.linear, trained.model.config});
    }
  }
  for (const auto& [name, m] : models) {
    if (m.task != o.task) throw Error("baseline model is for task " + std::string(to_string(m.task)));
    round.baselines.push_back(name);
  }
  transition(round, Phase::Build);

  RoundLock lock(root_, o.round_id);
  const fs::path dir = round_dir(o.round_id);
  if (fs::exists(dir)) {
    if (!o.force) throw Error("round \"" + o.round_id + "\" already exists (use --force to replace it)");
  }
  // Assemble in a hidden staging directory, then swap it in.
  const fs::path staging = root_ / ("." + o.round_id + ".staging." + std::to_string(::getpid()));
  fs::remove_all(staging);
  write_atomic(staging / "data" / "train.jsonl", train_text);
  write_atomic(staging / "data" / "dev.jsonl", dev_text);
  write_atomic(staging / "data" / "starter.jsonl", starter_text);
  if (o.train_parses) write_atomic(staging / "data" / "train_parses.conll", read_file(*o.train_parses));
  for (const auto& [name, m] : models) write_atomic(staging / "models" / (name + ".json"), serialize_model(m));
  save_round(staging, round);
  if (fs::exists(dir)) {
    const fs::path old = root_ / ("." + o.round_id + ".old." + std::to_string(::getpid()));
    fs::rename(dir, old);
    fs::rename(staging, dir);
    fs::remove_all(old);
  } else {
    fs::rename(staging, dir);
  }
  return round;
}

SystemEntry RoundStore::submit_dev_predictions(std::string_view round_id, std::string_view system,
                                               std::string_view tsv, std::string_view alias) {
  check_identifier("system name", system);
  if (!alias.empty()) check_identifier("alias", alias);
  RoundLock lock(root_, round_id);
  Round round = load(round_id);
  require_phase(round, Phase::Build, "dev prediction submission");
  const fs::path dir = round_dir(round_id);
  const PredictionTable table = parse_system_predictions(tsv, round.task, system, std::string(system) + " dev predictions");

  std::vector<std::string> expected;
  double accuracy = 0.0;
  if (round.task == Task::Sentiment) {
    const auto gold = ingest_sentiment(dir / "data" / "dev.jsonl");
    for (const auto& item : gold.items) {
      if (!item.excluded()) expected.push_back(item.id);
    }
    accuracy = dev_accuracy(system, table, gold);
  } else {
    const auto gold = ingest_qasrl(dir / "data" / "dev.jsonl");
    for (const auto& item : gold.items) expected.push_back(item.id);
    accuracy = dev_accuracy(system, table, gold);
  }
  std::vector<std::string> missing;
  for (const auto& id : expected) {
    if (table.find(system, ItemRef::dev(id)) == nullptr) missing.push_back(id);
  }
  const double coverage =
      expected.empty() ? 1.0 : 1.0 - static_cast<double>(missing.size()) / static_cast<double>(expected.size());
  if (coverage < round.config.min_dev_coverage) {
    throw Error("dev predictions for \"" + std::string(system) + "\" cover " + std::to_string(coverage * 100.0) +
                "% of dev items, below the required " + std::to_string(round.config.min_dev_coverage * 100.0) +
                "%; missing: " + join_limited(missing, 50));
  }

  write_atomic(dir / "dev" / (std::string(system) + ".tsv"), to_tsv(table));
  SystemEntry* entry = find_system_mut(round, system);
  if (entry == nullptr) {
    round.systems.push_back({std::string(system), {}, {}, false});
    entry = &round.systems.back();
  }
  entry->dev_accuracy = accuracy;
  if (!alias.empty()) entry->alias = std::string(alias);
  for (const auto& other : round.systems) {
    if (&other != entry && other.display_name() == entry->display_name()) {
      throw Error("system name or alias \"" + entry->display_name() + "\" already in use");
    }
  }
  const SystemEntry result = *entry;
  save_round(dir, round);
  return result;
}

Round RoundStore::advance_phase(std::string_view round_id) {
  RoundLock lock(root_, round_id);
  Round round = load(round_id);
  const fs::path dir = round_dir(round_id);
  switch (round.phase) {
    case Phase::Build: {
      std::string published;
      std::vector<const SystemEntry*> ready;
      for (const auto& s : round.systems) {
        if (s.dev_accuracy) ready.push_back(&s);
      }
      if (ready.empty()) throw PhaseError("cannot open BREAK: no system has submitted dev predictions");
      std::sort(ready.begin(), ready.end(),
                [](const auto* a, const auto* b) { return a->display_name() < b->display_name(); });
      for (const auto* s : ready) {
        const auto table = ingest_predictions(dir / "dev" / (s->name + ".tsv"), round.task);
        PredictionTable renamed(round.task);
        for (const auto& [key, value] : table.entries()) renamed.insert(s->display_name(), key.ref, value);
        published += to_tsv(renamed);
      }
      const fs::path out = dir / "published" / "dev-predictions.tsv";
      write_atomic(out, published);
      fs::permissions(out, fs::perms::owner_read | fs::perms::group_read | fs::perms::others_read);
      transition(round, Phase::Break);
      break;
    }
    case Phase::Break: {
      bool any = false;
      for (const auto& t : round.teams) any = any || t.accepted > 0;
      if (!any) throw PhaseError("cannot open SCORE: no validated minimal pairs have been submitted");
      transition(round, Phase::Score);
      break;
    }
    case Phase::Score:
      transition(round, Phase::Closed);
      break;
    case Phase::Closed:
      throw PhaseError("round \"" + round.round_id + "\" is CLOSED");
  }
  save_round(dir, round);
  return round;
}

TeamEntry RoundStore::register_team(std::string_view round_id, std::string_view team, std::string_view token) {
  check_identifier("team name", team);
  RoundLock lock(root_, round_id);
  Round round = load(round_id);
  if (round.phase == Phase::Closed) throw PhaseError("round \"" + round.round_id + "\" is CLOSED");
  TeamEntry& entry = team_entry(round, team);
  entry.token = std::string(token);
  const TeamEntry result = entry;
  save_round(round_dir(round_id), round);
  return result;
}

SubmissionReport RoundStore::submit_pairs(std::string_view round_id, std::string_view team, std::string_view jsonl) {
  const PairSet pairs = parse_pairs(jsonl, "pair submission", PairCheck::Lenient);
  return submit_pairs(round_id, team, pairs, jsonl);
}

SubmissionReport RoundStore::submit_pairs(std::string_view round_id, std::string_view team, const PairSet& pairs,
                                          std::string_view raw) {
  if (!team.empty()) check_identifier("team name", team);
  RoundLock lock(root_, round_id);
  Round round = load(round_id);
  require_phase(round, Phase::Break, "pair submission");
  const fs::path dir = round_dir(round_id);
  const StarterPool starter = load_starter(dir, round.task);
  const ValidationConfig config{round.config.max_edit_cost};

  std::set<std::string> taken;
  TeamPairs existing = accepted_pairs(round_id);
  for (const auto& [t, list] : existing) {
    for (const auto& p : list) taken.insert(p.pair_id);
  }

  SubmissionReport report;
  std::map<std::string, std::vector<MinimalPair>> accepted_by_team;
  for (MinimalPair pair : pairs.pairs) {
    PairReportEntry entry;
    entry.pair_id = pair.pair_id;
    if (pair.team.empty()) pair.team = std::string(team);
    entry.team = pair.team;
    if (!team.empty() && pair.team != team) {
      entry.error = "pair names team \"" + pair.team + "\" but was submitted by \"" + std::string(team) + "\"";
    } else if (pair.team.empty()) {
      entry.error = "pair has no team";
    } else {
      try {
        check_identifier("team name", pair.team);
      } catch (const DomainError& e) {
        entry.error = e.what();
      }
    }
    if (entry.error.empty() && taken.count(pair.pair_id) != 0) {
      entry.error = "duplicate pair_id \"" + pair.pair_id + "\"";
    }
    const ValidationResult v = validate_pair(pair, starter, config);
    entry.violations = v.violations;
    entry.edit_cost = v.edit_cost;
    entry.accepted = entry.error.empty() && v.ok();
    if (entry.accepted) {
      taken.insert(pair.pair_id);
      accepted_by_team[pair.team].push_back(pair);
      ++report.accepted;
    }
    report.entries.push_back(std::move(entry));
  }

  const std::size_t seq = fs::exists(dir / "submissions")
                              ? static_cast<std::size_t>(std::distance(fs::directory_iterator(dir / "submissions"),
                                                                       fs::directory_iterator{}))
                              : 0;
  char name[32];
  std::snprintf(name, sizeof name, "%06zu.jsonl", seq + 1);
  write_atomic(dir / "submissions" / name, raw);

  std::map<std::string, SubmissionReport> by_team;
  for (const auto& e : report.entries) {
    const std::string t = e.team.empty() || e.team.front() == '.' ? std::string("_unassigned") : e.team;
    by_team[t].entries.push_back(e);
  }
  for (const auto& [t, sub] : by_team) {
    bool valid_name = true;
    try {
      check_identifier("team name", t);
    } catch (const DomainError&) {
      valid_name = false;
    }
    if (!valid_name) continue;
    const fs::path vfile = dir / "validation" / (t + ".jsonl");
    write_atomic(vfile, read_if_exists(vfile).value_or("") + to_jsonl(sub));
    TeamEntry& te = team_entry(round, t);
    te.submitted += sub.entries.size();
  }
  for (const auto& [t, list] : accepted_by_team) {
    const fs::path pfile = dir / "pairs" / (t + ".jsonl");
    std::string content = read_if_exists(pfile).value_or("");
    for (const auto& p : list) content += to_jsonl(p) + "\n";
    write_atomic(pfile, content);
    team_entry(round, t).accepted += list.size();
  }
  save_round(dir, round);
  return report;
}

void RoundStore::submit_test_predictions(std::string_view round_id, std::string_view system, std::string_view tsv) {
  check_identifier("system name", system);
  RoundLock lock(root_, round_id);
  Round round = load(round_id);
  require_phase(round, Phase::Score, "test prediction submission");
  SystemEntry* entry = find_system_mut(round, system);
  if (entry == nullptr || !entry->dev_accuracy) {
    throw NotFoundError("system \"" + std::string(system) + "\" is not registered in round \"" + round.round_id + "\"");
  }
  const PredictionTable table =
      parse_system_predictions(tsv, round.task, system, std::string(system) + " test predictions");
  const fs::path dir = round_dir(round_id);
  write_atomic(dir / "test" / (std::string(system) + ".tsv"), to_tsv(table));
  entry->test_submitted = true;
  save_round(dir, round);
}

std::vector<AdjudicationResult> RoundStore::submit_external_labels(std::string_view round_id,
                                                                   std::string_view jsonl) {
  RoundLock lock(root_, round_id);
  Round round = load(round_id);
  if (round.phase != Phase::Break && round.phase != Phase::Score) {
    throw PhaseError("external labels are accepted during BREAK and SCORE only");
  }
  const fs::path dir = round_dir(round_id);
  const fs::path raw_file = dir / "labels" / "external.jsonl";
  const std::string all_labels = read_if_exists(raw_file).value_or("") + std::string(jsonl) +
                                 (jsonl.empty() || jsonl.back() == '\n' ? "" : "\n");
  const auto labels = parse_external_labels(all_labels, raw_file.string());

  std::vector<AdjudicationResult> results;
  std::string adjudication;
  std::map<std::string, SubmissionReport> disputes;
  for (const auto& [team, pairs] : accepted_pairs(round_id)) {
    for (const auto& pair : pairs) {
      for (auto& r : adjudicate(pair, labels, round.config.majority_threshold)) {
        const bool contested = r.status == AdjudicationStatus::Contested;
        adjudication += json{{"pair_id", r.pair_id},
                             {"side", r.side == Side::Original ? "original" : "modified"},
                             {"breaker_label", r.breaker_label},
                             {"external_labels", r.external_labels},
                             {"status", contested ? "CONTESTED" : "CONFIRMED"}}
                            .dump() +
                        "\n";
        if (contested) {
          PairReportEntry e;
          e.pair_id = pair.pair_id;
          e.team = team;
          e.accepted = true;
          e.violations.push_back({ViolationCode::LabelDisputed, std::string(r.side == Side::Original ? "original" : "modified") +
                                                                    " label " + r.breaker_label +
                                                                    " not confirmed by external labels"});
          disputes[team].entries.push_back(std::move(e));
        }
        results.push_back(std::move(r));
      }
    }
  }
  write_atomic(raw_file, all_labels);
  write_atomic(dir / "labels" / "adjudication.jsonl", adjudication);
  for (const auto& [team, sub] : disputes) {
    const fs::path vfile = dir / "validation" / (team + ".jsonl");
    write_atomic(vfile, read_if_exists(vfile).value_or("") + to_jsonl(sub));
  }
  return results;
}

ScoreOutcome RoundStore::score_round(std::string_view round_id, const ScoreOptions& options) {
  RoundLock lock(root_, round_id);
  Round round = load(round_id);
  require_phase(round, Phase::Score, "scoring");
  const fs::path dir = round_dir(round_id);

  TeamPairs pairs = accepted_pairs(round_id);
  ScoreOutcome outcome;
  if (options.exclude_contested) {
    std::set<std::string> contested;
    if (auto text = read_if_exists(dir / "labels" / "adjudication.jsonl")) {
      std::size_t pos = 0;
      while (pos < text->size()) {
        std::size_t nl = text->find('\n', pos);
        if (nl == std::string::npos) nl = text->size();
        const json j = json::parse(std::string_view(*text).substr(pos, nl - pos), nullptr, false);
        if (j.is_object() && j.value("status", "") == "CONTESTED") contested.insert(j.value("pair_id", ""));
        pos = nl + 1;
      }
    }
    for (auto& [team, list] : pairs) {
      std::erase_if(list, [&](const MinimalPair& p) { return contested.count(p.pair_id) != 0; });
    }
    std::erase_if(pairs, [](const auto& kv) { return kv.second.empty(); });
  }
  std::size_t total = 0;
  for (const auto& [team, list] : pairs) total += list.size();
  if (total == 0) throw Error("round \"" + round.round_id + "\" has no pairs to score");

  PredictionTable test(round.task);
  std::vector<SystemRecord> systems;
  for (const auto& s : round.systems) {
    if (!s.dev_accuracy) continue;
    systems.push_back({s.display_name(), s.dev_accuracy});
    const fs::path file = dir / "test" / (s.name + ".tsv");
    if (!fs::exists(file)) {
      outcome.warnings.push_back("no test predictions from \"" + s.display_name() + "\"; all items count as wrong");
      continue;
    }
    const PredictionTable table = ingest_predictions(file, round.task);
    for (const auto& [key, value] : table.entries()) {
      test.insert(s.display_name(), key.ref, value);
    }
  }
  outcome.report = leaderboard(round.task, systems, pairs, test);
  outcome.report.warnings.insert(outcome.report.warnings.begin(), outcome.warnings.begin(), outcome.warnings.end());
  outcome.warnings = outcome.report.warnings;
  outcome.json = to_json(outcome.report);
  write_atomic(dir / "report.json", outcome.json);
  write_atomic(dir / "report.txt", render_text(outcome.report));
  if (!options.keep_open) {
    transition(round, Phase::Closed);
    save_round(dir, round);
  }
  return outcome;
}

ProbeResult RoundStore::probe(std::string_view round_id, const MinimalPair& candidate,
                              const std::map<std::string, DependencyParse>& parses) const {
  const Round round = load(round_id);
  const fs::path dir = round_dir(round_id);
  ProbeResult result;
  result.validation = validate_pair(candidate, load_starter(dir, round.task), {round.config.max_edit_cost});
  const bool labels_ok = std::none_of(result.validation.violations.begin(), result.validation.violations.end(),
                                      [](const Violation& v) { return v.code == ViolationCode::LabelOutOfDomain; });
  if (candidate.task != round.task) return result;

  for (const auto& name : round.baselines) {
    const fs::path file = dir / "models" / (name + ".json");
    if (!fs::exists(file)) continue;
    const ModelFile model = load_model(file);
    BaselineVerdict verdict;
    verdict.baseline = name;
    PredictionValue orig, mod;
    if (round.task == Task::Sentiment) {
      orig = predict_sentiment(model.linear, candidate.original.text).polarity;
      mod = predict_sentiment(model.linear, candidate.modified.text).polarity;
    } else {
      auto parse_for = [&](const char* key) -> const DependencyParse* {
        auto it = parses.find(key);
        return it == parses.end() ? nullptr : &it->second;
      };
      const auto* po = parse_for("original");
      const auto* pm = parse_for("modified");
      if (po == nullptr || pm == nullptr) continue;
      const QasrlModel qm{model.linear, model.qasrl};
      auto as_item = [](const PairSide& s) {
        return QasrlItem{"probe", s.text, s.predicate_index, s.predicate, s.question, s.answers};
      };
      orig = predict_qasrl(qm, as_item(candidate.original), *po).answer;
      mod = predict_qasrl(qm, as_item(candidate.modified), *pm).answer;
    }
    verdict.original = prediction_payload(orig);
    verdict.modified = prediction_payload(mod);
    if (labels_ok) {
      verdict.correct_original = side_correct(candidate, Side::Original, &orig);
      verdict.correct_modified = side_correct(candidate, Side::Modified, &mod);
      verdict.breaks = pair_breaks(verdict.correct_original, verdict.correct_modified);
    }
    result.predictions.push_back(std::move(verdict));
  }
  return result;
}

std::string RoundStore::starter_jsonl(std::string_view round_id) const {
  load(round_id);
  return read_file(round_dir(round_id) / "data" / "starter.jsonl");
}

std::optional<std::string> RoundStore::published_dev_predictions(std::string_view round_id) const {
  load(round_id);
  return read_if_exists(round_dir(round_id) / "published" / "dev-predictions.tsv");
}

std::optional<std::string> RoundStore::report_json(std::string_view round_id) const {
  load(round_id);
  return read_if_exists(round_dir(round_id) / "report.json");
}

TeamPairs RoundStore::accepted_pairs(std::string_view round_id) const {
  const fs::path pdir = round_dir(round_id) / "pairs";
  TeamPairs out;
  for (const auto& team : team_files(pdir)) {
    const fs::path file = pdir / (team + ".jsonl");
    out[team] = parse_pairs(read_file(file), file.string(), PairCheck::Lenient).pairs;
  }
  return out;
}

std::string RoundStore::validation_reports(std::string_view round_id) const {
  const fs::path vdir = round_dir(round_id) / "validation";
  std::string out;
  for (const auto& team : team_files(vdir)) out += read_file(vdir / (team + ".jsonl"));
  return out;
}

}  // namespace bibi
