#pragma once

// Data model for both shared-task tracks and readers for every input format:
// training / dev / starter items, CoNLL-style parses, minimal pairs and
// prediction files.

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bibi {

enum class Task { Sentiment, Qasrl };

std::string_view to_string(Task task);
// Accepts "sentiment" and "qasrl"; throws DomainError otherwise.
Task parse_task(std::string_view name);

// Serialized as -1 / 0 / +1.
enum class Polarity : int { Negative = -1, Neutral = 0, Positive = 1 };

int to_int(Polarity p);
Polarity polarity_from_int(int v);  // throws DomainError outside {-1, 0, 1}
std::string format_polarity(Polarity p);  // "-1", "0", "+1"
std::optional<Polarity> parse_polarity(std::string_view s);

// Raw treebank sentiment score, guaranteed to lie in [0, 1].
class SentimentValue {
 public:
  explicit SentimentValue(double v);  // throws DomainError
  double value() const { return value_; }
  bool operator==(const SentimentValue&) const = default;

 private:
  double value_;
};

// Bands: [0, 0.4) negative, [0.4, 0.6] neutral, (0.6, 1] positive.
Polarity map_sentiment_value(SentimentValue v);
Polarity map_sentiment_value(double v);

struct Phrase {
  std::string text;
  SentimentValue value;
  bool operator==(const Phrase&) const = default;
};

struct LabeledSentence {
  std::string id;
  std::string text;
  SentimentValue value{0.0};
  Polarity polarity = Polarity::Neutral;
  std::vector<Phrase> phrases;

  // Neutral-band sentences are kept in the dataset but never trained on.
  bool excluded() const { return polarity == Polarity::Neutral; }
  bool operator==(const LabeledSentence&) const = default;
};

struct QasrlItem {
  std::string id;
  std::string sentence;
  std::size_t predicate_index = 0;  // 0-based, harness tokenizer
  std::string predicate;
  std::string question;
  std::vector<std::string> answers;

  bool operator==(const QasrlItem&) const = default;
};

template <typename Item>
struct Dataset {
  std::vector<Item> items;
  std::vector<std::string> warnings;

  const Item* find(std::string_view id) const {
    auto it = index.find(id);
    return it == index.end() ? nullptr : &items[it->second];
  }
  bool operator==(const Dataset& other) const { return items == other.items; }

  std::map<std::string, std::size_t, std::less<>> index;
};

using SentimentDataset = Dataset<LabeledSentence>;
using QasrlDataset = Dataset<QasrlItem>;

SentimentDataset parse_sentiment(std::string_view content, const std::string& source = {});
SentimentDataset ingest_sentiment(const std::filesystem::path& path);

// Checks the QasrlItem invariants; returns an empty string when they hold.
std::string check_qasrl_item(const QasrlItem& item);
QasrlDataset parse_qasrl(std::string_view content, const std::string& source = {});
QasrlDataset ingest_qasrl(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dependency parses

struct DepToken {
  std::string form;
  std::size_t head = 0;  // 1-based; 0 is the artificial root
  std::string relation;
  bool operator==(const DepToken&) const = default;
};

struct DependencyParse {
  std::vector<DepToken> tokens;

  std::size_t size() const { return tokens.size(); }
  // 0-based head of token `i`, or nullopt for the root token.
  std::optional<std::size_t> head_of(std::size_t i) const;
  std::vector<std::size_t> children_of(std::size_t i) const;
  bool operator==(const DependencyParse&) const = default;
};

// Empty string iff the parse is a single-rooted tree with in-range heads.
std::string check_tree(const DependencyParse& parse);

struct ParseTable {
  std::map<std::string, DependencyParse, std::less<>> parses;
  std::vector<std::string> warnings;

  const DependencyParse* find(std::string_view id) const {
    auto it = parses.find(id);
    return it == parses.end() ? nullptr : &it->second;
  }
};

// `known_ids`, when non-empty, produces a warning for every parse whose id is
// not in the list (the parse is kept regardless).
ParseTable parse_parses(std::string_view content, const std::string& source = {},
                        const std::vector<std::string>& known_ids = {});
ParseTable ingest_parses(const std::filesystem::path& path,
                         const std::vector<std::string>& known_ids = {});

// ---------------------------------------------------------------------------
// Minimal pairs

enum class Side { Original, Modified };

// One side of a minimal pair. `text` is the sentence for both tasks.
// Sentiment sides carry the breaker's raw integer label; QA-SRL sides carry
// the question frame and the gold answers.
struct PairSide {
  std::string text;
  int label = 0;
  std::string question;
  std::string predicate;
  std::size_t predicate_index = 0;
  std::vector<std::string> answers;

  bool operator==(const PairSide&) const = default;
};

struct MinimalPair {
  std::string pair_id;
  std::string team;
  Task task = Task::Sentiment;
  std::string original_id;
  PairSide original;
  PairSide modified;
  std::optional<std::string> rationale;

  const PairSide& side(Side s) const { return s == Side::Original ? original : modified; }
  bool operator==(const MinimalPair&) const = default;
};

// Checks the label-domain and question-preservation rules. Empty iff valid.
std::string check_pair(const MinimalPair& pair);

enum class PairCheck {
  Strict,   // rule violations abort ingestion
  Lenient,  // rule violations are left for the validation module to report
};

struct PairSet {
  std::vector<MinimalPair> pairs;
  std::vector<std::string> warnings;
};

PairSet parse_pairs(std::string_view content, const std::string& source = {},
                    PairCheck check = PairCheck::Strict);
PairSet ingest_pairs(const std::filesystem::path& path, PairCheck check = PairCheck::Strict);
PairSet parse_pair_json(std::string_view json_text, const std::string& source = {},
                        PairCheck check = PairCheck::Lenient);

// Canonical single-line JSON encoding, readable by parse_pairs.
std::string to_jsonl(const MinimalPair& pair);

// ---------------------------------------------------------------------------
// Predictions

enum class RefKind { Dev, Original, Modified };

struct ItemRef {
  std::string id;
  RefKind kind = RefKind::Dev;

  static ItemRef dev(std::string id) { return {std::move(id), RefKind::Dev}; }
  static ItemRef pair_side(std::string pair_id, Side side) {
    return {std::move(pair_id), side == Side::Original ? RefKind::Original : RefKind::Modified};
  }
  // "<pair_id>:orig", "<pair_id>:mod", or a bare dev item id.
  static ItemRef parse(std::string_view s);
  std::string str() const;

  auto operator<=>(const ItemRef&) const = default;
};

using PredictionValue = std::variant<Polarity, std::string>;

struct PredictionKey {
  std::string system;
  ItemRef ref;
  auto operator<=>(const PredictionKey&) const = default;
};

class PredictionTable {
 public:
  explicit PredictionTable(Task task = Task::Sentiment) : task_(task) {}

  Task task() const { return task_; }
  // Throws Error on a duplicate (system, ref) key.
  void insert(std::string system, ItemRef ref, PredictionValue value);
  const PredictionValue* find(std::string_view system, const ItemRef& ref) const;
  std::vector<std::string> systems() const;
  std::size_t size() const { return entries_.size(); }
  const std::map<PredictionKey, PredictionValue>& entries() const { return entries_; }

  bool operator==(const PredictionTable&) const = default;

 private:
  Task task_;
  std::map<PredictionKey, PredictionValue> entries_;
};

PredictionTable parse_predictions(std::string_view content, Task task, const std::string& source = {});
PredictionTable ingest_predictions(const std::filesystem::path& path, Task task);
std::string to_tsv(const PredictionTable& table);

// Reads a whole file; throws IngestError naming the path on failure.
std::string read_file(const std::filesystem::path& path);

}  // namespace bibi
