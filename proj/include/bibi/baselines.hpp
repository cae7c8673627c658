#pragma once

// Organizer reference systems: a hashed bag-of-ngrams logistic-regression
// sentiment classifier and a dependency-neighborhood logistic-regression
// QA-SRL answer selector.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bibi/corpus.hpp"

namespace bibi {

// 64-bit FNV-1a. Feature strings are hashed with this and masked to the
// (power-of-two) dimension.
std::uint64_t feature_hash(std::string_view s);

struct SparseVector {
  std::uint32_t dimension = 0;
  // Strictly increasing indices, no zero values.
  std::vector<std::pair<std::uint32_t, double>> entries;

  double dot(std::span<const double> dense) const;
  bool operator==(const SparseVector&) const = default;
};

// Hashes named count features into a SparseVector; collisions add up.
SparseVector hash_features(const std::map<std::string, double>& named, std::uint32_t dimension);

bool is_power_of_two(std::uint32_t v);

// Token n-grams for 1 <= n <= n_max, rendered "tok1_tok2_...", with counts.
std::map<std::string, double> ngram_features(std::span<const std::string> tokens, int n_max);
SparseVector featurize_ngrams(std::string_view text, int n_max, std::uint32_t dimension);

// All subsequences of n_min..n_max tokens whose consecutive positions are at
// most max_skip + 1 apart, rendered "tok1_tok2_..." (gap sizes elided), with
// occurrence counts.
std::map<std::string, int> skipgram_features(std::span<const std::string> tokens, int n_min = 1, int n_max = 5,
                                             int max_skip = 4);

struct TrainConfig {
  double learning_rate = 0.5;  // decays as lr / sqrt(t)
  int epochs = 10;
  double l2 = 1e-6;
  std::uint64_t seed = 1;
  int n_max = 3;
  std::uint32_t dimension = 1u << 18;
  double dead_zone = 0.0;  // tau: NEUTRAL when |p - 0.5| <= tau (tau > 0)
};

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  TrainConfig config;
  std::vector<double> epoch_losses;  // regularized objective after each epoch

  double margin(const SparseVector& x) const { return x.dot(weights) + bias; }
  double final_loss() const { return epoch_losses.empty() ? 0.0 : epoch_losses.back(); }
};

struct Example {
  SparseVector x;
  double y = 0.0;  // 0 or 1
};

double sigmoid(double z);

// mean_i logloss(w.x_i + b, y_i) + l2/2 * |w|^2 (bias not regularized)
double logistic_objective(const LinearModel& model, std::span<const Example> examples, double l2);

struct Gradient {
  std::vector<double> weights;
  double bias = 0.0;
};
Gradient logistic_gradient(const LinearModel& model, std::span<const Example> examples, double l2);

// Seeded SGD over shuffled epochs; single-threaded and bit-reproducible.
LinearModel train_logistic(std::span<const Example> examples, const TrainConfig& config);

// Trains on the polar items only. Throws DomainError unless both classes occur.
LinearModel train_sentiment(const SentimentDataset& dataset, const TrainConfig& config = {});

struct SentimentPrediction {
  Polarity polarity = Polarity::Positive;
  double score = 0.5;  // sigmoid(w.x + b)
};

// POSITIVE above 0.5 + tau, NEGATIVE below 0.5 - tau, NEUTRAL in between;
// with tau = 0 a score of exactly 0.5 is POSITIVE.
SentimentPrediction predict_sentiment(const LinearModel& model, std::string_view text);

// ---------------------------------------------------------------------------
// QA-SRL

struct QasrlConfig {
  TrainConfig train{.learning_rate = 0.5, .epochs = 10, .l2 = 1e-6, .seed = 1, .n_max = 5,
                    .dimension = 1u << 18, .dead_zone = 0.0};
  std::size_t hops = 2;
  bool expand_subtrees = true;
  int skip_n_max = 5;
  int max_skip = 4;
  bool sentence_skipgrams = false;  // also skip-grams of the candidate's sentence window
};

struct CandidateSpan {
  std::size_t begin = 0;  // token range [begin, end)
  std::size_t end = 0;
  std::size_t head = 0;      // token the span was grown from
  std::size_t distance = 0;  // tree distance to the predicate (1 or 2)
  // Relations along the predicate -> head path; "^rel" marks a step up to a
  // head (named by the relation of the token being left).
  std::vector<std::string> relations;

  std::string path() const;
  bool operator==(const CandidateSpan&) const = default;
};

// Tokens within `hops` undirected steps of the predicate, each grown to the
// contiguous run of its subtree (seen from the predicate, so an ancestor's
// span never covers the predicate's own branch). Sorted by (begin, end).
std::vector<CandidateSpan> candidate_spans(const DependencyParse& parse, std::size_t predicate_index,
                                           std::size_t hops = 2, bool expand_subtrees = true);

// First question token after the wh-word that is not an auxiliary or punctuation.
std::string question_verb(std::string_view question);

std::map<std::string, double> qasrl_feature_names(const QasrlItem& item, const CandidateSpan& candidate,
                                                  const DependencyParse& parse, const QasrlConfig& config = {});
SparseVector qasrl_features(const QasrlItem& item, const CandidateSpan& candidate, const DependencyParse& parse,
                            const QasrlConfig& config = {});

// Byte range of a candidate's tokens in the item sentence; nullopt when the
// parse and the harness tokenization disagree.
std::optional<std::pair<std::size_t, std::size_t>> candidate_char_span(const QasrlItem& item,
                                                                       const CandidateSpan& candidate,
                                                                       const DependencyParse& parse);

struct QasrlModel {
  LinearModel linear;
  QasrlConfig config;
};

struct QasrlTraining {
  QasrlModel model;
  std::size_t examples = 0;
  std::size_t positives = 0;
  std::vector<std::string> warnings;
};

// Candidates overlapping a gold answer by >= 75% are positive examples.
// Items without a usable parse are skipped with a warning.
QasrlTraining train_qasrl(const QasrlDataset& dataset, const ParseTable& parses, const QasrlConfig& config = {});

struct QasrlPrediction {
  std::string answer;
  double score = 0.0;
  bool no_candidates = false;
};

// Highest-scoring candidate; ties go to the earliest start, then the shortest span.
QasrlPrediction predict_qasrl(const QasrlModel& model, const QasrlItem& item, const DependencyParse& parse);

// ---------------------------------------------------------------------------
// Model files

struct ModelFile {
  Task task = Task::Sentiment;
  LinearModel linear;
  QasrlConfig qasrl;  // only meaningful for QA-SRL models
};

std::string serialize_model(const ModelFile& model);
ModelFile deserialize_model(std::string_view text, const std::string& source = {});
void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace bibi
