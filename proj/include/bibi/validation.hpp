#pragma once

// Minimal-pair construction rules and label adjudication.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bibi/corpus.hpp"

namespace bibi {

enum class EditKind { Insert, Delete, Substitute };

struct EditOp {
  EditKind kind = EditKind::Substitute;
  // Index into the sequence as it stands when this op is applied; ops are
  // applied in order, left to right.
  std::size_t pos = 0;
  std::string old_token;  // Delete, Substitute
  std::string new_token;  // Insert, Substitute

  bool operator==(const EditOp&) const = default;
};

struct EditScript {
  std::vector<EditOp> ops;
  std::size_t cost() const { return ops.size(); }
};

// Minimum-cost token edit script (unit costs). Among optimal scripts, the
// earliest edits win and a substitution is preferred to a delete/insert
// pair. Throws DomainError if either side tokenizes to nothing.
EditScript token_diff(std::string_view original, std::string_view modified);
EditScript token_diff(std::span<const std::string> original, std::span<const std::string> modified);
// Edit distance without the non-empty precondition.
std::size_t token_distance(std::span<const std::string> a, std::span<const std::string> b);
std::vector<std::string> apply_script(std::span<const std::string> tokens, const EditScript& script);

enum class ViolationCode {
  NotFromStarter,
  QuestionChanged,
  AnswerNotSubstring,
  EditTooLarge,
  LabelOutOfDomain,
  LabelDisputed,
};

std::string_view to_string(ViolationCode code);  // e.g. "NOT_FROM_STARTER"

struct Violation {
  ViolationCode code;
  std::string detail;
  bool operator==(const Violation&) const = default;
};

// Starter items the originals of submitted pairs must be drawn from.
class StarterPool {
 public:
  struct Entry {
    std::string text;
    std::string question;
    std::string predicate;
    std::size_t predicate_index = 0;
  };

  StarterPool() = default;
  explicit StarterPool(const SentimentDataset& ds);
  explicit StarterPool(const QasrlDataset& ds);

  Task task() const { return task_; }
  const Entry* find(std::string_view id) const;
  std::size_t size() const { return entries_.size(); }

 private:
  Task task_ = Task::Sentiment;
  std::map<std::string, Entry, std::less<>> entries_;
};

struct ValidationConfig {
  std::size_t max_edit_cost = 6;
};

struct ValidationResult {
  std::vector<Violation> violations;  // sorted by code, at most one per code
  std::size_t edit_cost = 0;
  bool ok() const { return violations.empty(); }
};

ValidationResult validate_pair(const MinimalPair& pair, const StarterPool& starter,
                               const ValidationConfig& config = {});

enum class AdjudicationStatus { Confirmed, Contested };

struct AdjudicationResult {
  std::string pair_id;
  Side side = Side::Original;
  std::string breaker_label;
  std::vector<std::string> external_labels;
  AdjudicationStatus status = AdjudicationStatus::Contested;
};

// Crowd labels for one side of a pair. Sentiment labels are "-1"/"+1"
// strings; QA-SRL labels are answer strings.
struct ExternalLabels {
  std::string pair_id;
  Side side = Side::Original;
  std::vector<std::string> labels;
};

// Reads the external-labels JSONL format: {"pair_id", "side", "labels"}.
std::vector<ExternalLabels> parse_external_labels(std::string_view content, const std::string& source = {});

// CONFIRMED iff strictly more than `majority_threshold` of the external labels
// agree with the breaker's label (a tie at one half is CONTESTED). QA-SRL
// labels agree when they overlap a breaker answer by the scoring threshold.
// Sides without external labels are not adjudicated; an empty label list
// given for a side is an error.
std::vector<AdjudicationResult> adjudicate(const MinimalPair& pair, std::span<const ExternalLabels> external,
                                           double majority_threshold = 0.5);

}  // namespace bibi
