#pragma once

// Correctness judgments, the pair-level break criterion, breaker scores
// (dev-accuracy-weighted break fractions) and builder metrics.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bibi/corpus.hpp"

namespace bibi {

// A QA-SRL answer counts as correct when it overlaps a gold answer in at
// least this fraction of characters.
inline constexpr double kAnswerOverlapThreshold = 0.75;

// Half-open byte range [begin, end) in a sentence.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const CharSpan&) const = default;
};

// NEUTRAL predictions are never correct; a NEUTRAL gold label is a DomainError.
bool sentiment_correct(Polarity predicted, Polarity gold);

// |pred ∩ gold| / max(|pred|, |gold|). Empty spans are a DomainError.
double answer_overlap(CharSpan predicted, CharSpan gold);
// Strings are anchored at their first occurrence in `sentence`; a string that
// does not occur throws NotFoundError.
double answer_overlap(std::string_view predicted, std::string_view gold, std::string_view sentence);

// Best overlap against any gold answer reaches kAnswerOverlapThreshold.
// Predictions that are empty or absent from the sentence are simply wrong.
bool qasrl_correct(std::string_view predicted, std::span<const std::string> gold_answers,
                   std::string_view sentence);
bool qasrl_correct(std::string_view predicted, const QasrlItem& item);

// A pair breaks a system when exactly one of its sides is predicted correctly.
constexpr bool pair_breaks(bool correct_original, bool correct_modified) {
  return correct_original != correct_modified;
}

struct BreakRecord {
  std::string system;
  std::string team;
  std::string pair_id;
  bool correct_original = false;
  bool correct_modified = false;
  bool missing_original = false;
  bool missing_modified = false;
  bool breaks = false;

  bool operator==(const BreakRecord&) const = default;
};

// Correctness of one side; a missing prediction is incorrect.
bool side_correct(const MinimalPair& pair, Side side, const PredictionValue* predicted);

std::vector<BreakRecord> break_stats(std::string_view system, const PredictionTable& predictions,
                                     std::span<const MinimalPair> pairs);

struct SystemRecord {
  std::string system;
  std::optional<double> dev_accuracy;  // acc_i(dev), in [0, 1]
};

struct SystemBreaks {
  std::string system;
  double dev_accuracy = 0.0;
  std::size_t break_count = 0;
  std::size_t pair_count = 0;
  double weighted_term = 0.0;  // dev_accuracy * break_count / pair_count
};

struct BreakerScore {
  std::string team;
  std::vector<SystemBreaks> per_system;
  double score = 0.0;  // x100
};

// score = 100/N * sum_i acc_i(dev) * break(i, j) / |D_j|, from per-system
// counts. `weighted_term` of the input rows is recomputed.
BreakerScore breaker_score_from_counts(std::string team, std::vector<SystemBreaks> rows);
BreakerScore breaker_score(std::string team, std::span<const MinimalPair> team_pairs,
                           std::span<const SystemRecord> systems, const PredictionTable& predictions);

struct F1Scores {
  double macro = 0.0;     // mean F1 over the polar classes that occur
  double micro = 0.0;
  double positive = 0.0;  // F1 of the POSITIVE class
};

// One scored item (either side of a pair).
struct ItemOutcome {
  Polarity gold = Polarity::Positive;  // sentiment only
  std::optional<Polarity> predicted;   // sentiment only; nullopt when missing
  bool correct = false;
};

// Sentiment: per-class F1 over {NEGATIVE, POSITIVE}; NEUTRAL or missing
// predictions count as misses of the gold class. QA-SRL: each item is a binary
// outcome, so every variant equals accuracy.
F1Scores f1_scores(Task task, std::span<const ItemOutcome> outcomes);

using TeamPairs = std::map<std::string, std::vector<MinimalPair>>;

struct TeamF1 {
  std::string team;
  F1Scores f1;
  std::size_t items = 0;
};

struct BuilderScore {
  std::string system;
  double avg_f1 = 0.0;            // unweighted mean of per-team macro F1
  double avg_f1_micro = 0.0;
  double avg_f1_positive = 0.0;
  F1Scores pooled;                // over every item of every team at once
  double percent_broken = 0.0;    // 0..100
  std::size_t break_count = 0;
  std::size_t pair_count = 0;
  std::vector<TeamF1> per_team;
  std::vector<std::string> warnings;
};

BuilderScore builder_metrics(std::string system, const PredictionTable& predictions, const TeamPairs& pairs);

// Dev accuracy of `system` against gold. Sentiment ignores neutral-band dev
// items; missing predictions count as wrong.
double dev_accuracy(std::string_view system, const PredictionTable& predictions, const SentimentDataset& gold);
double dev_accuracy(std::string_view system, const PredictionTable& predictions, const QasrlDataset& gold);

struct ScoreReport {
  Task task = Task::Sentiment;
  std::vector<BuilderScore> builders;  // sorted by avg_f1 desc
  std::vector<BreakerScore> breakers;  // sorted by score desc
  std::map<std::string, std::map<std::string, double>> matrix;  // system -> team -> % broken
  std::vector<BreakRecord> records;
  std::vector<std::string> warnings;
};

// Every listed system must carry a dev accuracy.
ScoreReport leaderboard(Task task, std::span<const SystemRecord> systems, const TeamPairs& pairs,
                        const PredictionTable& test_predictions);

template <typename GoldDataset>
ScoreReport leaderboard(Task task, std::span<const std::string> systems, const TeamPairs& pairs,
                        const PredictionTable& test_predictions, const PredictionTable& dev_predictions,
                        const GoldDataset& dev_gold) {
  std::vector<SystemRecord> records;
  for (const auto& s : systems) records.push_back({s, dev_accuracy(s, dev_predictions, dev_gold)});
  return leaderboard(task, records, pairs, test_predictions);
}

// JSON document; percentages and breaker scores rounded to 2 decimals and F1
// values, accuracies and weighted terms to 4. Output is deterministic.
std::string to_json(const ScoreReport& report);
// Plain-text builder and breaker tables plus the break matrix.
std::string render_text(const ScoreReport& report);

}  // namespace bibi
