#include "bibi/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bibi/error.hpp"
#include "bibi/text.hpp"
#include "json.hpp"

namespace bibi {

using json = nlohmann::json;

namespace {

// Iterates non-blank lines, handing each to `fn(line, line_no)`.
template <typename Fn>
void for_each_line(std::string_view content, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line, line_no);
    if (nl == content.size()) break;
    pos = nl + 1;
  }
}

json parse_json_line(std::string_view line, const std::string& source, std::size_t line_no) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw IngestError(source, line_no, "malformed JSON");
  if (!j.is_object()) throw IngestError(source, line_no, "expected a JSON object");
  return j;
}

const json& require(const json& obj, const char* key, const std::string& source, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw IngestError(source, line_no, std::string("missing required field \"") + key + "\"");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& source,
                           std::size_t line_no) {
  const json& v = require(obj, key, source, line_no);
  if (!v.is_string()) {
    throw IngestError(source, line_no, std::string("field \"") + key + "\" must be a string");
  }
  return v.get<std::string>();
}

double require_number(const json& obj, const char* key, const std::string& source, std::size_t line_no) {
  const json& v = require(obj, key, source, line_no);
  if (!v.is_number()) {
    throw IngestError(source, line_no, std::string("field \"") + key + "\" must be a number");
  }
  return v.get<double>();
}

std::size_t require_index(const json& obj, const char* key, const std::string& source, std::size_t line_no) {
  const json& v = require(obj, key, source, line_no);
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::size_t>(v.get<long long>());
  throw IngestError(source, line_no, std::string("field \"") + key + "\" must be a non-negative integer");
}

SentimentValue checked_value(double v, const std::string& source, std::size_t line_no) {
  try {
    return SentimentValue(v);
  } catch (const DomainError& e) {
    throw IngestError(source, line_no, e.what());
  }
}

template <typename Item>
void add_item(Dataset<Item>& ds, Item item, const std::string& source, std::size_t line_no) {
  if (item.id.empty()) throw IngestError(source, line_no, "empty id");
  if (ds.index.count(item.id) != 0) {
    throw IngestError(source, line_no, "duplicate id \"" + item.id + "\"");
  }
  ds.index.emplace(item.id, ds.items.size());
  ds.items.push_back(std::move(item));
}

bool contains(std::string_view hay, std::string_view needle) {
  return !needle.empty() && hay.find(needle) != std::string_view::npos;
}

std::vector<std::string> parse_answers(const json& v, const char* key, const std::string& source,
                                       std::size_t line_no) {
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
  } else if (v.is_array()) {
    for (const auto& a : v) {
      if (!a.is_string()) {
        throw IngestError(source, line_no, std::string("field \"") + key + "\" must hold strings");
      }
      out.push_back(a.get<std::string>());
    }
  } else {
    throw IngestError(source, line_no, std::string("field \"") + key + "\" must be a string or a list");
  }
  return out;
}

int parse_label(const json& v, const char* key, const std::string& source, std::size_t line_no) {
  if (v.is_number_integer() || v.is_number_unsigned()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 1e6) return static_cast<int>(d);
  }
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (!s.empty() && s.front() == '+') s.erase(0, 1);
    try {
      std::size_t used = 0;
      const int value = std::stoi(s, &used);
      if (used == s.size()) return value;
    } catch (const std::exception&) {
    }
  }
  throw IngestError(source, line_no, std::string("field \"") + key + "\" is not an integer label");
}

PairSide parse_side(const json& payload, const json& gold, Task task, const char* payload_key,
                    const char* gold_key, const std::string& source, std::size_t line_no) {
  PairSide side;
  if (task == Task::Sentiment) {
    if (payload.is_string()) {
      side.text = payload.get<std::string>();
    } else if (payload.is_object()) {
      side.text = require_string(payload, "text", source, line_no);
    } else {
      throw IngestError(source, line_no, std::string("field \"") + payload_key + "\" must be text or an object");
    }
    side.label = parse_label(gold, gold_key, source, line_no);
  } else {
    if (!payload.is_object()) {
      throw IngestError(source, line_no, std::string("field \"") + payload_key + "\" must be an object");
    }
    side.text = require_string(payload, "sentence", source, line_no);
    side.question = require_string(payload, "question", source, line_no);
    side.predicate = require_string(payload, "predicate", source, line_no);
    side.predicate_index = require_index(payload, "pred_index", source, line_no);
    side.answers = parse_answers(gold, gold_key, source, line_no);
  }
  return side;
}

json side_to_json(const PairSide& side, Task task) {
  if (task == Task::Sentiment) return side.text;
  return json{{"sentence", side.text},
              {"pred_index", side.predicate_index},
              {"predicate", side.predicate},
              {"question", side.question}};
}

json gold_to_json(const PairSide& side, Task task) {
  if (task == Task::Sentiment) return side.label;
  return side.answers;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Task task) { return task == Task::Sentiment ? "sentiment" : "qasrl"; }

Task parse_task(std::string_view name) {
  if (name == "sentiment") return Task::Sentiment;
  if (name == "qasrl") return Task::Qasrl;
  throw DomainError("unknown task \"" + std::string(name) + "\"");
}

int to_int(Polarity p) { return static_cast<int>(p); }

Polarity polarity_from_int(int v) {
  if (v < -1 || v > 1) throw DomainError("polarity must be -1, 0 or +1, got " + std::to_string(v));
  return static_cast<Polarity>(v);
}

std::string format_polarity(Polarity p) {
  switch (p) {
    case Polarity::Negative: return "-1";
    case Polarity::Neutral: return "0";
    case Polarity::Positive: return "+1";
  }
  return "0";
}

std::optional<Polarity> parse_polarity(std::string_view s) {
  if (s == "+1" || s == "1") return Polarity::Positive;
  if (s == "-1") return Polarity::Negative;
  if (s == "0") return Polarity::Neutral;
  return std::nullopt;
}

SentimentValue::SentimentValue(double v) : value_(v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    std::ostringstream msg;
    msg << "sentiment value " << v << " outside [0, 1]";
    throw DomainError(msg.str());
  }
}

Polarity map_sentiment_value(SentimentValue v) {
  if (v.value() < 0.4) return Polarity::Negative;
  if (v.value() > 0.6) return Polarity::Positive;
  return Polarity::Neutral;
}

Polarity map_sentiment_value(double v) { return map_sentiment_value(SentimentValue(v)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(path.string(), 0, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Sentiment

SentimentDataset parse_sentiment(std::string_view content, const std::string& source) {
  SentimentDataset ds;
  for_each_line(content, [&](std::string_view line, std::size_t line_no) {
    const json j = parse_json_line(line, source, line_no);
    LabeledSentence s;
    s.id = require_string(j, "id", source, line_no);
    s.text = require_string(j, "text", source, line_no);
    s.value = checked_value(require_number(j, "value", source, line_no), source, line_no);
    s.polarity = map_sentiment_value(s.value);
    if (auto it = j.find("phrases"); it != j.end() && !it->is_null()) {
      if (!it->is_array()) throw IngestError(source, line_no, "field \"phrases\" must be a list");
      for (const auto& ph : *it) {
        if (!ph.is_array() || ph.size() != 2 || !ph[0].is_string() || !ph[1].is_number()) {
          throw IngestError(source, line_no, "phrase entries must be [text, value]");
        }
        s.phrases.push_back({ph[0].get<std::string>(), checked_value(ph[1].get<double>(), source, line_no)});
      }
    }
    add_item(ds, std::move(s), source, line_no);
  });
  if (ds.items.empty()) ds.warnings.push_back(source + ": no sentiment items");
  return ds;
}

SentimentDataset ingest_sentiment(const std::filesystem::path& path) {
  return parse_sentiment(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// QA-SRL

std::string check_qasrl_item(const QasrlItem& item) {
  const auto tokens = tokenize(item.sentence);
  if (item.predicate_index >= tokens.size()) {
    return "predicate index " + std::to_string(item.predicate_index) + " out of range (" +
           std::to_string(tokens.size()) + " tokens)";
  }
  if (tokens[item.predicate_index] != item.predicate) {
    return "predicate \"" + item.predicate + "\" does not match token \"" + tokens[item.predicate_index] +
           "\" at index " + std::to_string(item.predicate_index);
  }
  if (item.answers.empty()) return "no gold answers";
  for (const auto& a : item.answers) {
    if (!contains(item.sentence, a)) return "answer \"" + a + "\" is not a substring of the sentence";
  }
  return {};
}

QasrlDataset parse_qasrl(std::string_view content, const std::string& source) {
  QasrlDataset ds;
  for_each_line(content, [&](std::string_view line, std::size_t line_no) {
    const json j = parse_json_line(line, source, line_no);
    QasrlItem item;
    item.id = require_string(j, "id", source, line_no);
    item.sentence = require_string(j, "sentence", source, line_no);
    item.predicate_index = require_index(j, "pred_index", source, line_no);
    item.predicate = require_string(j, "predicate", source, line_no);
    item.question = require_string(j, "question", source, line_no);
    item.answers = parse_answers(require(j, "answers", source, line_no), "answers", source, line_no);
    if (auto problem = check_qasrl_item(item); !problem.empty()) {
      throw IngestError(source, line_no, "item \"" + item.id + "\" rejected: " + problem);
    }
    add_item(ds, std::move(item), source, line_no);
  });
  if (ds.items.empty()) ds.warnings.push_back(source + ": no QA-SRL items");
  return ds;
}

QasrlDataset ingest_qasrl(const std::filesystem::path& path) {
  return parse_qasrl(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Dependency parses

std::optional<std::size_t> DependencyParse::head_of(std::size_t i) const {
  const std::size_t h = tokens.at(i).head;
  if (h == 0) return std::nullopt;
  return h - 1;
}

std::vector<std::size_t> DependencyParse::children_of(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (tokens[k].head == i + 1) out.push_back(k);
  }
  return out;
}

std::string check_tree(const DependencyParse& parse) {
  const std::size_t n = parse.size();
  if (n == 0) return "empty parse";
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t h = parse.tokens[i].head;
    if (h > n) return "head " + std::to_string(h) + " of token " + std::to_string(i + 1) + " out of range";
    if (h == i + 1) return "token " + std::to_string(i + 1) + " heads itself";
    if (h == 0) ++roots;
  }
  if (roots != 1) return "expected exactly one root, found " + std::to_string(roots);
  // Every token must reach the root within n steps.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cur = i + 1;
    std::size_t steps = 0;
    while (cur != 0) {
      cur = parse.tokens[cur - 1].head;
      if (++steps > n) return "cycle through token " + std::to_string(i + 1);
    }
  }
  return {};
}

ParseTable parse_parses(std::string_view content, const std::string& source,
                        const std::vector<std::string>& known_ids) {
  ParseTable table;
  std::optional<std::string> id;
  DependencyParse current;
  std::size_t block_line = 0;

  auto finish = [&]() {
    if (!id) return;
    if (auto problem = check_tree(current); !problem.empty()) {
      throw IngestError(source, block_line, "parse \"" + *id + "\" rejected: " + problem);
    }
    if (table.parses.count(*id) != 0) throw IngestError(source, block_line, "duplicate parse id \"" + *id + "\"");
    if (!known_ids.empty() && std::find(known_ids.begin(), known_ids.end(), *id) == known_ids.end()) {
      table.warnings.push_back("parse for unknown item id \"" + *id + "\"");
    }
    table.parses.emplace(*id, std::move(current));
    current = {};
    id.reset();
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      finish();
    } else if (line.rfind("#id", 0) == 0) {
      finish();
      std::string_view rest = line.substr(3);
      const auto start = rest.find_first_not_of(" \t");
      if (start == std::string_view::npos) throw IngestError(source, line_no, "empty parse id");
      id = std::string(rest.substr(start));
      block_line = line_no;
    } else if (line.front() == '#') {
      // comment
    } else {
      if (!id) throw IngestError(source, line_no, "token line before \"#id\" header");
      std::vector<std::string> cols;
      std::size_t c = 0;
      while (true) {
        const std::size_t tab = line.find('\t', c);
        cols.emplace_back(line.substr(c, tab == std::string_view::npos ? std::string_view::npos : tab - c));
        if (tab == std::string_view::npos) break;
        c = tab + 1;
      }
      if (cols.size() < 4) throw IngestError(source, line_no, "expected 4 tab-separated columns");
      std::size_t index = 0;
      std::size_t head = 0;
      try {
        std::size_t used = 0;
        index = std::stoul(cols[0], &used);
        if (used != cols[0].size()) throw std::invalid_argument("index");
        head = std::stoul(cols[2], &used);
        if (used != cols[2].size()) throw std::invalid_argument("head");
      } catch (const std::exception&) {
        throw IngestError(source, line_no, "non-numeric index or head column");
      }
      if (index != current.tokens.size() + 1) {
        throw IngestError(source, line_no, "token index " + std::to_string(index) + " out of sequence");
      }
      current.tokens.push_back({cols[1], head, cols[3]});
    }
    if (nl == content.size()) break;
    pos = nl + 1;
  }
  finish();
  return table;
}

ParseTable ingest_parses(const std::filesystem::path& path, const std::vector<std::string>& known_ids) {
  return parse_parses(read_file(path), path.string(), known_ids);
}

// ---------------------------------------------------------------------------
// Minimal pairs

std::string check_pair(const MinimalPair& pair) {
  if (pair.task == Task::Sentiment) {
    for (const PairSide* s : {&pair.original, &pair.modified}) {
      if (s->label != -1 && s->label != 1) {
        return "sentiment label " + std::to_string(s->label) + " outside {-1, +1}";
      }
    }
    return {};
  }
  if (pair.original.question != pair.modified.question) return "question changed between sides";
  if (pair.original.answers.empty() || pair.modified.answers.empty()) return "missing gold answers";
  return {};
}

namespace {

MinimalPair pair_from_json(const json& j, const std::string& source, std::size_t line_no) {
  MinimalPair p;
  p.pair_id = require_string(j, "pair_id", source, line_no);
  if (p.pair_id.empty()) throw IngestError(source, line_no, "empty pair_id");
  if (auto it = j.find("team"); it != j.end() && it->is_string()) p.team = it->get<std::string>();
  const std::string task = require_string(j, "task", source, line_no);
  try {
    p.task = parse_task(task);
  } catch (const DomainError&) {
    throw IngestError(source, line_no, "unknown task tag \"" + task + "\"");
  }
  p.original_id = require_string(j, "original_id", source, line_no);
  p.original = parse_side(require(j, "original", source, line_no), require(j, "gold_original", source, line_no),
                          p.task, "original", "gold_original", source, line_no);
  p.modified = parse_side(require(j, "modified", source, line_no), require(j, "gold_modified", source, line_no),
                          p.task, "modified", "gold_modified", source, line_no);
  if (auto it = j.find("rationale"); it != j.end() && it->is_string()) p.rationale = it->get<std::string>();
  return p;
}

void add_pair(PairSet& set, MinimalPair p, PairCheck check, const std::string& source, std::size_t line_no) {
  if (check == PairCheck::Strict) {
    if (auto problem = check_pair(p); !problem.empty()) {
      throw IngestError(source, line_no, "pair \"" + p.pair_id + "\" rejected: " + problem);
    }
    for (const auto& existing : set.pairs) {
      if (existing.pair_id == p.pair_id) throw IngestError(source, line_no, "duplicate pair_id \"" + p.pair_id + "\"");
    }
  }
  set.pairs.push_back(std::move(p));
}

}  // namespace

PairSet parse_pairs(std::string_view content, const std::string& source, PairCheck check) {
  PairSet set;
  for_each_line(content, [&](std::string_view line, std::size_t line_no) {
    add_pair(set, pair_from_json(parse_json_line(line, source, line_no), source, line_no), check, source,
             line_no);
  });
  if (set.pairs.empty()) set.warnings.push_back(source + ": no pairs");
  return set;
}

PairSet ingest_pairs(const std::filesystem::path& path, PairCheck check) {
  return parse_pairs(read_file(path), path.string(), check);
}

PairSet parse_pair_json(std::string_view json_text, const std::string& source, PairCheck check) {
  const json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw IngestError(source, 0, "malformed JSON");
  PairSet set;
  if (j.is_array()) {
    std::size_t k = 0;
    for (const auto& item : j) {
      ++k;
      if (!item.is_object()) throw IngestError(source, k, "expected a JSON object");
      add_pair(set, pair_from_json(item, source, k), check, source, k);
    }
  } else if (j.is_object()) {
    add_pair(set, pair_from_json(j, source, 1), check, source, 1);
  } else {
    throw IngestError(source, 0, "expected a pair object or a list of pairs");
  }
  return set;
}

std::string to_jsonl(const MinimalPair& pair) {
  json j{{"pair_id", pair.pair_id},
         {"team", pair.team},
         {"task", std::string(to_string(pair.task))},
         {"original_id", pair.original_id},
         {"original", side_to_json(pair.original, pair.task)},
         {"modified", side_to_json(pair.modified, pair.task)},
         {"gold_original", gold_to_json(pair.original, pair.task)},
         {"gold_modified", gold_to_json(pair.modified, pair.task)}};
  if (pair.rationale) j["rationale"] = *pair.rationale;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Predictions

ItemRef ItemRef::parse(std::string_view s) {
  auto ends_with = [&](std::string_view suffix) {
    return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
  };
  if (ends_with(":orig")) return pair_side(std::string(s.substr(0, s.size() - 5)), Side::Original);
  if (ends_with(":mod")) return pair_side(std::string(s.substr(0, s.size() - 4)), Side::Modified);
  return dev(std::string(s));
}

std::string ItemRef::str() const {
  switch (kind) {
    case RefKind::Original: return id + ":orig";
    case RefKind::Modified: return id + ":mod";
    case RefKind::Dev: break;
  }
  return id;
}

void PredictionTable::insert(std::string system, ItemRef ref, PredictionValue value) {
  PredictionKey key{std::move(system), std::move(ref)};
  if (entries_.count(key) != 0) {
    throw Error("duplicate prediction for (" + key.system + ", " + key.ref.str() + ")");
  }
  entries_.emplace(std::move(key), std::move(value));
}

const PredictionValue* PredictionTable::find(std::string_view system, const ItemRef& ref) const {
  auto it = entries_.find(PredictionKey{std::string(system), ref});
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> PredictionTable::systems() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : entries_) {
    if (out.empty() || out.back() != key.system) out.push_back(key.system);
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PredictionTable parse_predictions(std::string_view content, Task task, const std::string& source) {
  PredictionTable table(task);
  for_each_line(content, [&](std::string_view line, std::size_t line_no) {
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw IngestError(source, line_no, "expected system<TAB>item_ref<TAB>payload");
    const std::string system(line.substr(0, t1));
    const std::string_view ref = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string_view payload = line.substr(t2 + 1);
    if (system.empty() || ref.empty()) throw IngestError(source, line_no, "empty system or item_ref");
    PredictionValue value;
    if (task == Task::Sentiment) {
      auto p = parse_polarity(payload);
      if (!p) throw IngestError(source, line_no, "unparseable sentiment payload \"" + std::string(payload) + "\"");
      value = *p;
    } else {
      value = std::string(payload);
    }
    try {
      table.insert(system, ItemRef::parse(ref), std::move(value));
    } catch (const Error& e) {
      throw IngestError(source, line_no, e.what());
    }
  });
  return table;
}

PredictionTable ingest_predictions(const std::filesystem::path& path, Task task) {
  return parse_predictions(read_file(path), task, path.string());
}

std::string to_tsv(const PredictionTable& table) {
  std::string out;
  for (const auto& [key, value] : table.entries()) {
    out += key.system;
    out += '\t';
    out += key.ref.str();
    out += '\t';
    if (const auto* p = std::get_if<Polarity>(&value)) {
      out += format_polarity(*p);
    } else {
      out += std::get<std::string>(value);
    }
    out += '\n';
  }
  return out;
}

}  // namespace bibi
