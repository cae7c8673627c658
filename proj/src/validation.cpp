#include "bibi/validation.hpp"

#include <algorithm>

#include "bibi/error.hpp"
#include "bibi/scoring.hpp"
#include "bibi/text.hpp"
#include "json.hpp"

namespace bibi {

using json = nlohmann::json;

namespace {

// D[i][j] = edit distance between a[i..] and b[j..], stored row-major.
std::vector<std::size_t> suffix_distances(std::span<const std::string> a, std::span<const std::string> b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, m) = n - i;
  for (std::size_t j = 0; j <= m; ++j) at(n, j) = m - j;
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      const std::size_t diag = at(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
      at(i, j) = std::min({diag, at(i + 1, j) + 1, at(i, j + 1) + 1});
    }
  }
  return d;
}

}  // namespace

std::size_t token_distance(std::span<const std::string> a, std::span<const std::string> b) {
  return suffix_distances(a, b).front();
}

EditScript token_diff(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) throw DomainError("token_diff needs non-empty token sequences");
  const std::size_t n = a.size(), m = b.size();
  const auto d = suffix_distances(a, b);
  auto at = [&](std::size_t i, std::size_t j) { return d[i * (m + 1) + j]; };

  EditScript script;
  std::size_t i = 0, j = 0;
  // The working sequence is b[0..j) + a[i..), so every op lands at index j.
  while (i < n || j < m) {
    const std::size_t here = at(i, j);
    // Edits are taken as early as possible: substitute, delete, insert, and
    // only then a free match.
    if (i < n && j < m && a[i] != b[j] && at(i + 1, j + 1) + 1 == here) {
      script.ops.push_back({EditKind::Substitute, j, a[i], b[j]});
      ++i;
      ++j;
    } else if (i < n && at(i + 1, j) + 1 == here) {
      script.ops.push_back({EditKind::Delete, j, a[i], {}});
      ++i;
    } else if (j < m && at(i, j + 1) + 1 == here) {
      script.ops.push_back({EditKind::Insert, j, {}, b[j]});
      ++j;
    } else {
      ++i;
      ++j;
    }
  }
  return script;
}

EditScript token_diff(std::string_view original, std::string_view modified) {
  const auto a = tokenize(original);
  const auto b = tokenize(modified);
  return token_diff(a, b);
}

std::vector<std::string> apply_script(std::span<const std::string> tokens, const EditScript& script) {
  std::vector<std::string> out(tokens.begin(), tokens.end());
  for (const auto& op : script.ops) {
    switch (op.kind) {
      case EditKind::Insert:
        if (op.pos > out.size()) throw DomainError("insert position out of range");
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(op.pos), op.new_token);
        break;
      case EditKind::Delete:
        if (op.pos >= out.size()) throw DomainError("delete position out of range");
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(op.pos));
        break;
      case EditKind::Substitute:
        if (op.pos >= out.size()) throw DomainError("substitute position out of range");
        out[op.pos] = op.new_token;
        break;
    }
  }
  return out;
}

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::NotFromStarter: return "NOT_FROM_STARTER";
    case ViolationCode::QuestionChanged: return "QUESTION_CHANGED";
    case ViolationCode::AnswerNotSubstring: return "ANSWER_NOT_SUBSTRING";
    case ViolationCode::EditTooLarge: return "EDIT_TOO_LARGE";
    case ViolationCode::LabelOutOfDomain: return "LABEL_OUT_OF_DOMAIN";
    case ViolationCode::LabelDisputed: return "LABEL_DISPUTED";
  }
  return "UNKNOWN";
}

// ---------------------------------------------------------------------------

StarterPool::StarterPool(const SentimentDataset& ds) : task_(Task::Sentiment) {
  for (const auto& item : ds.items) entries_.emplace(item.id, Entry{item.text, {}, {}, 0});
}

StarterPool::StarterPool(const QasrlDataset& ds) : task_(Task::Qasrl) {
  for (const auto& item : ds.items) {
    entries_.emplace(item.id, Entry{item.sentence, item.question, item.predicate, item.predicate_index});
  }
}

const StarterPool::Entry* StarterPool::find(std::string_view id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

ValidationResult validate_pair(const MinimalPair& pair, const StarterPool& starter, const ValidationConfig& config) {
  ValidationResult result;
  auto add = [&](ViolationCode code, std::string detail) {
    for (const auto& v : result.violations) {
      if (v.code == code) return;
    }
    result.violations.push_back({code, std::move(detail)});
  };

  const auto* entry = starter.find(pair.original_id);
  if (entry == nullptr) {
    add(ViolationCode::NotFromStarter, "unknown starter item \"" + pair.original_id + "\"");
  } else if (starter.task() != pair.task) {
    add(ViolationCode::NotFromStarter, "starter item belongs to the other task");
  } else if (trim_trailing_newline(pair.original.text) != trim_trailing_newline(entry->text)) {
    add(ViolationCode::NotFromStarter, "original differs from starter item \"" + pair.original_id + "\"");
  } else if (pair.task == Task::Qasrl &&
             (pair.original.question != entry->question || pair.original.predicate != entry->predicate ||
              pair.original.predicate_index != entry->predicate_index)) {
    add(ViolationCode::NotFromStarter, "original question frame differs from starter item \"" + pair.original_id + "\"");
  }

  if (pair.task == Task::Qasrl) {
    if (pair.original.question != pair.modified.question) {
      add(ViolationCode::QuestionChanged,
          "\"" + pair.original.question + "\" became \"" + pair.modified.question + "\"");
    }
    for (Side side : {Side::Original, Side::Modified}) {
      const PairSide& s = pair.side(side);
      for (const auto& answer : s.answers) {
        if (answer.empty() || s.text.find(answer) == std::string::npos) {
          add(ViolationCode::AnswerNotSubstring,
              std::string(side == Side::Original ? "original" : "modified") + " answer \"" + answer +
                  "\" is not a substring of its sentence");
        }
      }
      if (s.answers.empty()) add(ViolationCode::LabelOutOfDomain, "no gold answers");
    }
  } else {
    for (Side side : {Side::Original, Side::Modified}) {
      const int label = pair.side(side).label;
      if (label != -1 && label != 1) {
        add(ViolationCode::LabelOutOfDomain, "label " + std::to_string(label) + " outside {-1, +1}");
      }
    }
  }

  const auto a = tokenize(pair.original.text);
  const auto b = tokenize(pair.modified.text);
  result.edit_cost = token_distance(a, b);
  if (result.edit_cost > config.max_edit_cost) {
    add(ViolationCode::EditTooLarge, std::to_string(result.edit_cost) + " token edits exceed the limit of " +
                                         std::to_string(config.max_edit_cost));
  }

  std::sort(result.violations.begin(), result.violations.end(),
            [](const Violation& x, const Violation& y) { return x.code < y.code; });
  return result;
}

// ---------------------------------------------------------------------------

std::vector<ExternalLabels> parse_external_labels(std::string_view content, const std::string& source) {
  std::vector<ExternalLabels> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw IngestError(source, line_no, "malformed JSON");
    ExternalLabels e;
    if (!j.contains("pair_id") || !j["pair_id"].is_string()) throw IngestError(source, line_no, "missing pair_id");
    e.pair_id = j["pair_id"].get<std::string>();
    const std::string side = j.value("side", std::string{});
    if (side == "original" || side == "orig") {
      e.side = Side::Original;
    } else if (side == "modified" || side == "mod") {
      e.side = Side::Modified;
    } else {
      throw IngestError(source, line_no, "side must be \"original\" or \"modified\"");
    }
    if (!j.contains("labels") || !j["labels"].is_array()) throw IngestError(source, line_no, "missing labels list");
    for (const auto& l : j["labels"]) {
      if (l.is_string()) {
        e.labels.push_back(l.get<std::string>());
      } else if (l.is_number_integer()) {
        const int v = l.get<int>();
        e.labels.push_back(v > 0 ? "+" + std::to_string(v) : std::to_string(v));
      } else {
        throw IngestError(source, line_no, "labels must be strings or integers");
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<AdjudicationResult> adjudicate(const MinimalPair& pair, std::span<const ExternalLabels> external,
                                           double majority_threshold) {
  std::vector<AdjudicationResult> out;
  for (Side side : {Side::Original, Side::Modified}) {
    bool seen = false;
    std::vector<std::string> labels;
    for (const auto& e : external) {
      if (e.pair_id != pair.pair_id || e.side != side) continue;
      seen = true;
      labels.insert(labels.end(), e.labels.begin(), e.labels.end());
    }
    if (!seen) continue;
    if (labels.empty()) {
      throw DomainError("empty external label list for pair \"" + pair.pair_id + "\"");
    }
    const PairSide& s = pair.side(side);
    AdjudicationResult r;
    r.pair_id = pair.pair_id;
    r.side = side;
    r.external_labels = labels;
    std::size_t agree = 0;
    if (pair.task == Task::Sentiment) {
      r.breaker_label = s.label > 0 ? "+" + std::to_string(s.label) : std::to_string(s.label);
      for (const auto& l : labels) {
        const auto p = parse_polarity(l);
        if (p && to_int(*p) == s.label) ++agree;
      }
    } else {
      r.breaker_label = s.answers.empty() ? std::string{} : s.answers.front();
      for (const auto& l : labels) {
        if (!s.answers.empty() && qasrl_correct(l, s.answers, s.text)) ++agree;
      }
    }
    const double fraction = static_cast<double>(agree) / static_cast<double>(labels.size());
    r.status = fraction > majority_threshold ? AdjudicationStatus::Confirmed : AdjudicationStatus::Contested;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace bibi
