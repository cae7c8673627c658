#include "bibi/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bibi/error.hpp"
#include "json.hpp"

namespace bibi {

using json = nlohmann::json;

bool sentiment_correct(Polarity predicted, Polarity gold) {
  if (gold == Polarity::Neutral) throw DomainError("gold sentiment label must be -1 or +1");
  return predicted == gold;
}

double answer_overlap(CharSpan predicted, CharSpan gold) {
  if (predicted.end <= predicted.begin || gold.end <= gold.begin) throw DomainError("empty answer span");
  const std::size_t lo = std::max(predicted.begin, gold.begin);
  const std::size_t hi = std::min(predicted.end, gold.end);
  const std::size_t inter = hi > lo ? hi - lo : 0;
  return static_cast<double>(inter) / static_cast<double>(std::max(predicted.size(), gold.size()));
}

namespace {

CharSpan anchor(std::string_view text, std::string_view sentence) {
  if (text.empty()) throw DomainError("empty answer span");
  const std::size_t at = sentence.find(text);
  if (at == std::string_view::npos) throw NotFoundError("\"" + std::string(text) + "\" does not occur in the sentence");
  return {at, at + text.size()};
}

double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

}  // namespace

double answer_overlap(std::string_view predicted, std::string_view gold, std::string_view sentence) {
  return answer_overlap(anchor(predicted, sentence), anchor(gold, sentence));
}

bool qasrl_correct(std::string_view predicted, std::span<const std::string> gold_answers,
                   std::string_view sentence) {
  if (gold_answers.empty()) throw DomainError("QA-SRL item has no gold answers");
  if (predicted.empty() || sentence.find(predicted) == std::string_view::npos) return false;
  double best = 0.0;
  for (const auto& gold : gold_answers) best = std::max(best, answer_overlap(predicted, gold, sentence));
  return best >= kAnswerOverlapThreshold;
}

bool qasrl_correct(std::string_view predicted, const QasrlItem& item) {
  return qasrl_correct(predicted, item.answers, item.sentence);
}

bool side_correct(const MinimalPair& pair, Side side, const PredictionValue* predicted) {
  if (predicted == nullptr) return false;
  const PairSide& s = pair.side(side);
  if (pair.task == Task::Sentiment) {
    const auto* p = std::get_if<Polarity>(predicted);
    return p != nullptr && sentiment_correct(*p, polarity_from_int(s.label));
  }
  const auto* answer = std::get_if<std::string>(predicted);
  return answer != nullptr && qasrl_correct(*answer, s.answers, s.text);
}

std::vector<BreakRecord> break_stats(std::string_view system, const PredictionTable& predictions,
                                     std::span<const MinimalPair> pairs) {
  std::vector<BreakRecord> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    const auto* orig = predictions.find(system, ItemRef::pair_side(pair.pair_id, Side::Original));
    const auto* mod = predictions.find(system, ItemRef::pair_side(pair.pair_id, Side::Modified));
    BreakRecord r;
    r.system = std::string(system);
    r.team = pair.team;
    r.pair_id = pair.pair_id;
    r.missing_original = orig == nullptr;
    r.missing_modified = mod == nullptr;
    r.correct_original = side_correct(pair, Side::Original, orig);
    r.correct_modified = side_correct(pair, Side::Modified, mod);
    r.breaks = pair_breaks(r.correct_original, r.correct_modified);
    out.push_back(std::move(r));
  }
  return out;
}

BreakerScore breaker_score_from_counts(std::string team, std::vector<SystemBreaks> rows) {
  if (rows.empty()) throw DomainError("breaker score needs at least one system");
  const std::size_t pair_count = rows.front().pair_count;
  if (pair_count == 0) throw DomainError("team \"" + team + "\" has no pairs");
  double sum = 0.0;
  for (auto& row : rows) {
    if (row.pair_count != pair_count) throw DomainError("pair counts differ across systems for \"" + team + "\"");
    if (!(row.dev_accuracy >= 0.0 && row.dev_accuracy <= 1.0)) {
      throw DomainError("dev accuracy of \"" + row.system + "\" outside [0, 1]");
    }
    if (row.break_count > pair_count) throw DomainError("break count exceeds pair count");
    row.weighted_term =
        row.dev_accuracy * static_cast<double>(row.break_count) / static_cast<double>(pair_count);
    sum += row.weighted_term;
  }
  BreakerScore out;
  out.team = std::move(team);
  out.score = 100.0 * sum / static_cast<double>(rows.size());
  out.per_system = std::move(rows);
  return out;
}

BreakerScore breaker_score(std::string team, std::span<const MinimalPair> team_pairs,
                           std::span<const SystemRecord> systems, const PredictionTable& predictions) {
  if (team_pairs.empty()) throw DomainError("team \"" + team + "\" has no pairs");
  std::vector<SystemBreaks> rows;
  for (const auto& sys : systems) {
    if (!sys.dev_accuracy) throw Error("system \"" + sys.system + "\" has no dev accuracy");
    SystemBreaks row;
    row.system = sys.system;
    row.dev_accuracy = *sys.dev_accuracy;
    row.pair_count = team_pairs.size();
    for (const auto& r : break_stats(sys.system, predictions, team_pairs)) row.break_count += r.breaks ? 1 : 0;
    rows.push_back(std::move(row));
  }
  return breaker_score_from_counts(std::move(team), std::move(rows));
}

// ---------------------------------------------------------------------------

F1Scores f1_scores(Task task, std::span<const ItemOutcome> outcomes) {
  F1Scores out;
  if (outcomes.empty()) return out;
  if (task == Task::Qasrl) {
    std::size_t correct = 0;
    for (const auto& o : outcomes) correct += o.correct ? 1 : 0;
    const double acc = static_cast<double>(correct) / static_cast<double>(outcomes.size());
    return {acc, acc, acc};
  }
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  auto counts_for = [&](Polarity cls) {
    Counts c;
    for (const auto& o : outcomes) {
      const bool predicted_cls = o.predicted && *o.predicted == cls;
      if (o.gold == cls && predicted_cls) ++c.tp;
      if (o.gold != cls && predicted_cls) ++c.fp;
      if (o.gold == cls && !predicted_cls) ++c.fn;
    }
    return c;
  };
  auto f1 = [](const Counts& c) -> std::optional<double> {
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return std::nullopt;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
  };
  const Counts neg = counts_for(Polarity::Negative);
  const Counts pos = counts_for(Polarity::Positive);
  const auto f_neg = f1(neg);
  const auto f_pos = f1(pos);
  double sum = 0.0;
  int defined = 0;
  for (const auto& f : {f_neg, f_pos}) {
    if (f) {
      sum += *f;
      ++defined;
    }
  }
  out.macro = defined > 0 ? sum / defined : 0.0;
  out.micro = f1({neg.tp + pos.tp, neg.fp + pos.fp, neg.fn + pos.fn}).value_or(0.0);
  // No positive gold and no positive predictions: nothing was got wrong.
  out.positive = f_pos.value_or(1.0);
  return out;
}

namespace {

std::vector<ItemOutcome> outcomes_for(std::string_view system, const PredictionTable& predictions,
                                      std::span<const MinimalPair> pairs) {
  std::vector<ItemOutcome> out;
  for (const auto& pair : pairs) {
    for (Side side : {Side::Original, Side::Modified}) {
      const auto* pred = predictions.find(system, ItemRef::pair_side(pair.pair_id, side));
      ItemOutcome o;
      o.correct = side_correct(pair, side, pred);
      if (pair.task == Task::Sentiment) {
        o.gold = polarity_from_int(pair.side(side).label);
        if (pred != nullptr) {
          if (const auto* p = std::get_if<Polarity>(pred)) o.predicted = *p;
        }
      }
      out.push_back(o);
    }
  }
  return out;
}

}  // namespace

BuilderScore builder_metrics(std::string system, const PredictionTable& predictions, const TeamPairs& pairs) {
  BuilderScore out;
  out.system = std::move(system);
  std::vector<ItemOutcome> pooled;
  Task task = predictions.task();
  double sum_macro = 0.0, sum_micro = 0.0, sum_pos = 0.0;
  for (const auto& [team, team_pairs] : pairs) {
    if (team_pairs.empty()) {
      out.warnings.push_back("team \"" + team + "\" has no items; excluded from average F1");
      continue;
    }
    task = team_pairs.front().task;
    const auto outcomes = outcomes_for(out.system, predictions, team_pairs);
    pooled.insert(pooled.end(), outcomes.begin(), outcomes.end());
    TeamF1 t{team, f1_scores(task, outcomes), outcomes.size()};
    sum_macro += t.f1.macro;
    sum_micro += t.f1.micro;
    sum_pos += t.f1.positive;
    out.per_team.push_back(std::move(t));
    for (const auto& r : break_stats(out.system, predictions, team_pairs)) out.break_count += r.breaks ? 1 : 0;
    out.pair_count += team_pairs.size();
  }
  if (!out.per_team.empty()) {
    const double n = static_cast<double>(out.per_team.size());
    out.avg_f1 = sum_macro / n;
    out.avg_f1_micro = sum_micro / n;
    out.avg_f1_positive = sum_pos / n;
  }
  out.pooled = f1_scores(task, pooled);
  if (out.pair_count > 0) {
    out.percent_broken = 100.0 * static_cast<double>(out.break_count) / static_cast<double>(out.pair_count);
  }
  return out;
}

double dev_accuracy(std::string_view system, const PredictionTable& predictions, const SentimentDataset& gold) {
  std::size_t total = 0, correct = 0;
  for (const auto& item : gold.items) {
    if (item.excluded()) continue;
    ++total;
    const auto* pred = predictions.find(system, ItemRef::dev(item.id));
    if (pred == nullptr) continue;
    if (const auto* p = std::get_if<Polarity>(pred); p && sentiment_correct(*p, item.polarity)) ++correct;
  }
  if (total == 0) throw DomainError("dev set has no polar items");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double dev_accuracy(std::string_view system, const PredictionTable& predictions, const QasrlDataset& gold) {
  if (gold.items.empty()) throw DomainError("dev set is empty");
  std::size_t correct = 0;
  for (const auto& item : gold.items) {
    const auto* pred = predictions.find(system, ItemRef::dev(item.id));
    if (pred == nullptr) continue;
    if (const auto* a = std::get_if<std::string>(pred); a && qasrl_correct(*a, item)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(gold.items.size());
}

ScoreReport leaderboard(Task task, std::span<const SystemRecord> systems, const TeamPairs& pairs,
                        const PredictionTable& test_predictions) {
  ScoreReport report;
  report.task = task;

  std::vector<SystemRecord> sorted(systems.begin(), systems.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.system < b.system; });

  for (const auto& sys : sorted) {
    auto builder = builder_metrics(sys.system, test_predictions, pairs);
    for (auto& w : builder.warnings) report.warnings.push_back(sys.system + ": " + w);
    report.builders.push_back(std::move(builder));
    for (const auto& [team, team_pairs] : pairs) {
      auto records = break_stats(sys.system, test_predictions, team_pairs);
      std::size_t breaks = 0;
      for (const auto& r : records) {
        breaks += r.breaks ? 1 : 0;
        if (r.missing_original || r.missing_modified) {
          report.warnings.push_back("missing prediction: " + sys.system + " on " + r.pair_id);
        }
      }
      report.matrix[sys.system][team] =
          team_pairs.empty() ? 0.0 : 100.0 * static_cast<double>(breaks) / static_cast<double>(team_pairs.size());
      report.records.insert(report.records.end(), records.begin(), records.end());
    }
  }
  for (const auto& [team, team_pairs] : pairs) {
    if (team_pairs.empty()) continue;
    report.breakers.push_back(breaker_score(team, team_pairs, sorted, test_predictions));
  }

  std::stable_sort(report.builders.begin(), report.builders.end(),
                   [](const auto& a, const auto& b) { return a.avg_f1 > b.avg_f1; });
  std::stable_sort(report.breakers.begin(), report.breakers.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json f1_json(const F1Scores& f) {
  return json{{"macro", round_to(f.macro, 4)}, {"micro", round_to(f.micro, 4)}, {"positive", round_to(f.positive, 4)}};
}

}  // namespace

std::string to_json(const ScoreReport& report) {
  json builders = json::array();
  for (const auto& b : report.builders) {
    json per_team = json::array();
    for (const auto& t : b.per_team) {
      per_team.push_back({{"team", t.team}, {"f1", f1_json(t.f1)}, {"items", t.items}});
    }
    builders.push_back({{"system", b.system},
                        {"avg_f1", round_to(b.avg_f1, 4)},
                        {"avg_f1_micro", round_to(b.avg_f1_micro, 4)},
                        {"avg_f1_positive", round_to(b.avg_f1_positive, 4)},
                        {"pooled_f1", f1_json(b.pooled)},
                        {"percent_broken", round_to(b.percent_broken, 2)},
                        {"break_count", b.break_count},
                        {"pair_count", b.pair_count},
                        {"per_team", per_team}});
  }
  json breakers = json::array();
  for (const auto& br : report.breakers) {
    json per_system = json::array();
    for (const auto& s : br.per_system) {
      per_system.push_back({{"system", s.system},
                            {"dev_accuracy", round_to(s.dev_accuracy, 4)},
                            {"break_count", s.break_count},
                            {"pair_count", s.pair_count},
                            {"weighted_term", round_to(s.weighted_term, 4)}});
    }
    breakers.push_back({{"team", br.team}, {"score", round_to(br.score, 2)}, {"per_system", per_system}});
  }
  json matrix = json::object();
  for (const auto& [system, row] : report.matrix) {
    for (const auto& [team, pct] : row) matrix[system][team] = round_to(pct, 2);
  }
  json records = json::array();
  for (const auto& r : report.records) {
    records.push_back({{"system", r.system},
                       {"team", r.team},
                       {"pair_id", r.pair_id},
                       {"correct_original", r.correct_original},
                       {"correct_modified", r.correct_modified},
                       {"missing_original", r.missing_original},
                       {"missing_modified", r.missing_modified},
                       {"breaks", r.breaks}});
  }
  json doc{{"task", std::string(to_string(report.task))},
           {"f1_convention",
            report.task == Task::Sentiment
                ? "macro F1 over {negative, positive} per team, unweighted mean over teams"
                : "per-item correctness (>= 75% character overlap), mean over teams"},
           {"builders", builders},
           {"breakers", breakers},
           {"matrix", matrix},
           {"records", records},
           {"warnings", report.warnings}};
  return doc.dump(2) + "\n";
}

std::string render_text(const ScoreReport& report) {
  std::string out;
  char buf[256];
  out += "Builder scores\n";
  std::snprintf(buf, sizeof buf, "%-24s %10s %20s\n", "System", "average F1", "% broken test cases");
  out += buf;
  for (const auto& b : report.builders) {
    std::snprintf(buf, sizeof buf, "%-24s %10.3f %20.2f\n", b.system.c_str(), b.avg_f1, b.percent_broken);
    out += buf;
  }
  out += "\nBreaker scores\n";
  std::snprintf(buf, sizeof buf, "%-24s %10s\n", "Breaker", "score");
  out += buf;
  for (const auto& br : report.breakers) {
    std::snprintf(buf, sizeof buf, "%-24s %10.2f\n", br.team.c_str(), br.score);
    out += buf;
  }
  out += "\nBreaking percentages (system x team)\n";
  std::vector<std::string> teams;
  for (const auto& [system, row] : report.matrix) {
    for (const auto& [team, pct] : row) {
      if (std::find(teams.begin(), teams.end(), team) == teams.end()) teams.push_back(team);
    }
  }
  std::sort(teams.begin(), teams.end());
  std::snprintf(buf, sizeof buf, "%-24s", "");
  out += buf;
  for (const auto& t : teams) {
    std::snprintf(buf, sizeof buf, " %12s", t.c_str());
    out += buf;
  }
  out += "\n";
  for (const auto& [system, row] : report.matrix) {
    std::snprintf(buf, sizeof buf, "%-24s", system.c_str());
    out += buf;
    for (const auto& t : teams) {
      auto it = row.find(t);
      std::snprintf(buf, sizeof buf, " %12.2f", it == row.end() ? 0.0 : it->second);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace bibi
