#pragma once

// Round lifecycle (build -> break -> score -> closed) persisted as a plain
// directory tree:
//
//   <store>/<round_id>/
//     round.json                  manifest (phase, systems, teams, history)
//     data/{train,dev,starter}.jsonl, data/train_parses.conll
//     models/<baseline>.json      organizer baselines used by probes
//     dev/<system>.tsv            dev predictions (BUILD only)
//     published/dev-predictions.tsv   frozen copy made when BREAK opens
//     submissions/<n>.jsonl       raw pair submissions
//     pairs/<team>.jsonl          accepted pairs (the test set)
//     validation/<team>.jsonl     per-pair validation reports
//     labels/{external,adjudication}.jsonl
//     test/<system>.tsv           test predictions (SCORE only)
//     report.json, report.txt
//
// Every file is written by atomic replace and all mutations of a round run
// under an exclusive per-round lock.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bibi/corpus.hpp"
#include "bibi/scoring.hpp"
#include "bibi/validation.hpp"

namespace bibi {

enum class Phase { Build, Break, Score, Closed };

std::string_view to_string(Phase phase);  // "BUILD", "BREAK", "SCORE", "CLOSED"
Phase parse_phase(std::string_view name);

struct SystemEntry {
  std::string name;
  std::string alias;  // public name in published files and reports, if set
  std::optional<double> dev_accuracy;
  bool test_submitted = false;

  const std::string& display_name() const { return alias.empty() ? name : alias; }
};

struct TeamEntry {
  std::string name;
  std::string token;  // optional shared secret for HTTP submissions
  std::size_t submitted = 0;
  std::size_t accepted = 0;
};

struct PhaseTransition {
  Phase phase = Phase::Build;
  std::string at;  // ISO-8601 UTC
};

struct DatasetInfo {
  std::string file;  // relative to the round directory
  std::string sha256;
  std::size_t items = 0;
};

struct RoundConfig {
  double min_dev_coverage = 0.95;
  std::size_t max_edit_cost = 6;
  double majority_threshold = 0.5;
};

struct Round {
  std::string round_id;
  Task task = Task::Sentiment;
  Phase phase = Phase::Build;
  RoundConfig config;
  std::map<std::string, DatasetInfo> datasets;  // "train", "dev", "starter"
  std::vector<SystemEntry> systems;
  std::vector<TeamEntry> teams;
  std::vector<std::string> baselines;
  std::vector<PhaseTransition> history;

  const SystemEntry* find_system(std::string_view name) const;
  const TeamEntry* find_team(std::string_view name) const;
};

// Manifest JSON. The public form drops team tokens and shows systems under
// their display names only.
std::string to_json(const Round& round, bool internal = false);

// True iff the phases of `history` are exactly a prefix of BUILD, BREAK, SCORE, CLOSED.
bool legal_history(const std::vector<PhaseTransition>& history);

struct InitOptions {
  std::string round_id;
  Task task = Task::Sentiment;
  std::filesystem::path train;
  std::filesystem::path dev;
  std::filesystem::path starter;
  std::optional<std::filesystem::path> train_parses;  // QA-SRL baseline training
  std::optional<std::filesystem::path> baseline_model;
  bool train_baseline = true;
  bool force = false;
  RoundConfig config;
};

struct PairReportEntry {
  std::string pair_id;
  std::string team;
  std::vector<Violation> violations;
  std::size_t edit_cost = 0;
  bool accepted = false;
  std::string error;  // rejection outside the violation codes (duplicate id, team mismatch)
};

struct SubmissionReport {
  std::vector<PairReportEntry> entries;
  std::size_t accepted = 0;
  bool empty_effective() const { return accepted == 0; }
};

// One JSON object per line: {"pair_id", "violations": [{"code", "detail"}], "edit_cost", ...}.
std::string to_jsonl(const SubmissionReport& report);

struct ScoreOptions {
  bool exclude_contested = false;
  bool keep_open = false;
};

struct ScoreOutcome {
  ScoreReport report;
  std::string json;  // exact bytes written to report.json
  std::vector<std::string> warnings;
};

struct BaselineVerdict {
  std::string baseline;
  std::string original;  // prediction payloads
  std::string modified;
  bool correct_original = false;
  bool correct_modified = false;
  bool breaks = false;
};

struct ProbeResult {
  ValidationResult validation;
  std::vector<BaselineVerdict> predictions;
};

class RoundStore {
 public:
  explicit RoundStore(std::filesystem::path root);

  // BIBI_STORE if set, otherwise ./bibi-store.
  static std::filesystem::path default_root();

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path round_dir(std::string_view round_id) const;

  bool exists(std::string_view round_id) const;
  Round load(std::string_view round_id) const;  // NotFoundError
  std::vector<Round> list() const;

  Round init_round(const InitOptions& options);
  SystemEntry submit_dev_predictions(std::string_view round_id, std::string_view system, std::string_view tsv,
                                     std::string_view alias = {});
  Round advance_phase(std::string_view round_id);
  TeamEntry register_team(std::string_view round_id, std::string_view team, std::string_view token);
  // `team` may be empty, in which case every pair names its own team.
  SubmissionReport submit_pairs(std::string_view round_id, std::string_view team, std::string_view jsonl);
  SubmissionReport submit_pairs(std::string_view round_id, std::string_view team, const PairSet& pairs,
                                std::string_view raw);
  void submit_test_predictions(std::string_view round_id, std::string_view system, std::string_view tsv);
  std::vector<AdjudicationResult> submit_external_labels(std::string_view round_id, std::string_view jsonl);
  ScoreOutcome score_round(std::string_view round_id, const ScoreOptions& options = {});

  ProbeResult probe(std::string_view round_id, const MinimalPair& candidate,
                    const std::map<std::string, DependencyParse>& parses = {}) const;

  // Readers.
  std::string starter_jsonl(std::string_view round_id) const;
  std::optional<std::string> published_dev_predictions(std::string_view round_id) const;
  std::optional<std::string> report_json(std::string_view round_id) const;
  TeamPairs accepted_pairs(std::string_view round_id) const;
  std::string validation_reports(std::string_view round_id) const;

 private:
  std::filesystem::path root_;
};

// Writes `content` to a sibling temp file, fsyncs and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);

// Rejects names that are unsafe as file names ([A-Za-z0-9._-], not starting with '.').
void check_identifier(std::string_view what, std::string_view name);

}  // namespace bibi
