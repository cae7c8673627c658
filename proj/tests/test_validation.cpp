#include <random>

#include "bibi/error.hpp"
#include "bibi/text.hpp"
#include "bibi/validation.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bibi;
using namespace bibi::testing;

namespace {

// Prefix-table Levenshtein distance over tokens, written independently of
// the library's suffix table.
std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t min_len) {
  static const std::vector<std::string> vocab{"a", "b", "c", "d", "the", "movie", "good", "bad"};
  const std::size_t len = min_len + rng() % 9;
  std::vector<std::string> out;
  for (std::size_t k = 0; k < len; ++k) out.push_back(vocab[rng() % vocab.size()]);
  return out;
}

std::string join(const std::vector<std::string>& t) {
  std::string s;
  for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
  return s;
}

std::vector<ViolationCode> codes(const ValidationResult& r) {
  std::vector<ViolationCode> out;
  for (const auto& v : r.violations) out.push_back(v.code);
  return out;
}

QasrlDataset terry_starter() {
  return parse_qasrl(
      R"({"id":"q1","sentence":"Terry fed Parker.","pred_index":1,"predicate":"fed","question":"Who fed Parker?","answers":["Terry"]})"
      "\n");
}

MinimalPair terry_pair() {
  MinimalPair p;
  p.pair_id = "q-pair";
  p.team = "UMass";
  p.task = Task::Qasrl;
  p.original_id = "q1";
  p.original = {"Terry fed Parker.", 0, "Who fed Parker?", "fed", 1, {"Terry"}};
  p.modified = {"Terry quickly fed Parker.", 0, "Who fed Parker?", "fed", 2, {"Terry"}};
  return p;
}

}  // namespace

TEST_CASE("token_diff examples") {
  SUBCASE("I love this movie") {
    const auto s = token_diff("I love this movie!", "I'm mad for this movie!");
    REQUIRE(s.cost() == 3);
    CHECK(s.ops[0] == EditOp{EditKind::Substitute, 0, "I", "I'm"});
    CHECK(s.ops[1] == EditOp{EditKind::Substitute, 1, "love", "mad"});
    CHECK(s.ops[2] == EditOp{EditKind::Insert, 2, "", "for"});
  }
  SUBCASE("identical strings") {
    CHECK(token_diff("same text here", "same text here").cost() == 0);
  }
  SUBCASE("emotional power to emotional pain") {
    const auto s = token_diff(
        "Through elliptical and seemingly oblique methods, he forges moments of staggering emotional power",
        "Through elliptical and seemingly oblique methods, he forges moments of staggering emotional pain");
    REQUIRE(s.cost() == 1);
    CHECK(s.ops[0].kind == EditKind::Substitute);
    CHECK(s.ops[0].old_token == "power");
    CHECK(s.ops[0].new_token == "pain");
  }
  SUBCASE("substitution preferred over delete plus insert") {
    const auto s = token_diff("a b c", "a x c");
    REQUIRE(s.cost() == 1);
    CHECK(s.ops[0].kind == EditKind::Substitute);
  }
  SUBCASE("leftmost among equal-cost alignments") {
    const auto s = token_diff("a a", "a");
    REQUIRE(s.cost() == 1);
    CHECK(s.ops[0] == EditOp{EditKind::Delete, 0, "a", ""});
  }
  SUBCASE("empty sides are a domain error") {
    CHECK_THROWS_AS(token_diff("", "a"), DomainError);
    CHECK_THROWS_AS(token_diff("a", "  "), DomainError);
  }
}

TEST_CASE("token_diff round trip on 1000 fuzzed pairs") {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 1000; ++k) {
    const auto a = random_tokens(rng, 1), b = random_tokens(rng, 1);
    const auto script = token_diff(join(a), join(b));
    CHECK(apply_script(a, script) == b);
    CHECK(script.cost() == levenshtein(a, b));
  }
}

TEST_CASE("token distance is a metric") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 500; ++k) {
    const auto a = random_tokens(rng, 0), b = random_tokens(rng, 0), c = random_tokens(rng, 0);
    const auto ab = token_distance(a, b), ba = token_distance(b, a);
    CHECK(ab == ba);
    CHECK((ab == 0) == (a == b));
    CHECK(token_distance(a, c) <= ab + token_distance(b, c));
    CHECK(token_distance(a, a) == 0);
  }
}

TEST_CASE("apply_script rejects out-of-range positions") {
  const std::vector<std::string> t{"a"};
  EditScript bad;
  bad.ops.push_back({EditKind::Delete, 3, "x", ""});
  CHECK_THROWS_AS(apply_script(t, bad), DomainError);
}

TEST_CASE("Sample pairs validate under the default config") {
  const StarterPool starter(ingest_sentiment(data_path("sample_starter.jsonl")));
  const auto pairs = ingest_pairs(data_path("sample_pairs.jsonl")).pairs;
  const std::map<std::string, std::size_t> expected_cost{{"Utrecht-1", 1}, {"Utrecht-2", 1},   {"OSU-1", 4},
                                                         {"OSU-2", 1},     {"Melbourne-1", 2}, {"Melbourne-2", 4},
                                                         {"VTeX-1", 1}};
  for (const auto& p : pairs) {
    const auto r = validate_pair(p, starter);
    CHECK_MESSAGE(r.ok(), p.pair_id);
    CHECK(r.edit_cost == expected_cost.at(p.pair_id));
  }
}

TEST_CASE("validate_pair violations") {
  const StarterPool sentiment(ingest_sentiment(data_path("sample_starter.jsonl")));
  const auto utrecht = ingest_pairs(data_path("sample_pairs.jsonl")).pairs.at(0);

  SUBCASE("changed question is the only violation") {
    const StarterPool starter(terry_starter());
    MinimalPair p = terry_pair();
    CHECK(validate_pair(p, starter).ok());
    p.modified.question = "Who fed someone?";
    CHECK(codes(validate_pair(p, starter)) == std::vector<ViolationCode>{ViolationCode::QuestionChanged});
  }
  SUBCASE("unknown starter id is the only violation") {
    MinimalPair p = utrecht;
    p.original_id = "sst-999";
    CHECK(codes(validate_pair(p, sentiment)) == std::vector<ViolationCode>{ViolationCode::NotFromStarter});
  }
  SUBCASE("altered original is NOT_FROM_STARTER") {
    MinimalPair p = utrecht;
    p.original.text += "!";
    p.modified.text += "!";
    CHECK(codes(validate_pair(p, sentiment)) == std::vector<ViolationCode>{ViolationCode::NotFromStarter});
  }
  SUBCASE("one trailing newline is ignored") {
    MinimalPair p = utrecht;
    p.original.text += "\n";
    CHECK(validate_pair(p, sentiment).ok());
  }
  SUBCASE("pair from the other task is NOT_FROM_STARTER") {
    const StarterPool qasrl(terry_starter());
    MinimalPair p = utrecht;
    p.original_id = "q1";
    CHECK(codes(validate_pair(p, qasrl)).front() == ViolationCode::NotFromStarter);
  }
  SUBCASE("fifteen token edits exceed the default limit") {
    MinimalPair p = utrecht;
    p.modified.text = "Nothing in this sentence survives from the first at all , not even one word";
    const auto r = validate_pair(p, sentiment);
    CHECK(r.edit_cost == 15);
    CHECK(codes(r) == std::vector<ViolationCode>{ViolationCode::EditTooLarge});
    CHECK(validate_pair(p, sentiment, ValidationConfig{15}).ok());
  }
  SUBCASE("label outside the binary domain") {
    MinimalPair p = utrecht;
    p.modified.label = 0;
    CHECK(codes(validate_pair(p, sentiment)) == std::vector<ViolationCode>{ViolationCode::LabelOutOfDomain});
  }
  SUBCASE("answer missing from the modified sentence") {
    const StarterPool starter(terry_starter());
    MinimalPair p = terry_pair();
    p.modified.text = "Parker was fed.";
    p.modified.predicate_index = 2;
    const auto c = codes(validate_pair(p, starter));
    CHECK(std::count(c.begin(), c.end(), ViolationCode::AnswerNotSubstring) == 1);
  }
  SUBCASE("several problems come back sorted, one per code") {
    MinimalPair p = utrecht;
    p.original_id = "missing";
    p.modified.label = 5;
    p.modified.text = "one two three four five six seven eight nine ten eleven twelve thirteen fourteen fifteen sixteen";
    const auto r = validate_pair(p, sentiment);
    CHECK(codes(r) == std::vector<ViolationCode>{ViolationCode::NotFromStarter, ViolationCode::EditTooLarge,
                                                 ViolationCode::LabelOutOfDomain});
    CHECK(codes(validate_pair(p, sentiment)) == codes(r));
  }
  SUBCASE("UCD QA-SRL pair validates") {
    const StarterPool starter(ingest_qasrl(data_path("ucd.jsonl")));
    const auto p = ingest_pairs(data_path("ucd_pair.jsonl")).pairs.at(0);
    const auto r = validate_pair(p, starter);
    CHECK(r.ok());
    CHECK(r.edit_cost == 3);
  }
}

TEST_CASE("violation code names") {
  CHECK(to_string(ViolationCode::NotFromStarter) == "NOT_FROM_STARTER");
  CHECK(to_string(ViolationCode::QuestionChanged) == "QUESTION_CHANGED");
  CHECK(to_string(ViolationCode::AnswerNotSubstring) == "ANSWER_NOT_SUBSTRING");
  CHECK(to_string(ViolationCode::EditTooLarge) == "EDIT_TOO_LARGE");
  CHECK(to_string(ViolationCode::LabelOutOfDomain) == "LABEL_OUT_OF_DOMAIN");
  CHECK(to_string(ViolationCode::LabelDisputed) == "LABEL_DISPUTED");
}

TEST_CASE("adjudicate") {
  const auto pair = ingest_pairs(data_path("sample_pairs.jsonl")).pairs.at(0);  // +1 / +1
  auto status_for = [&](std::vector<std::string> labels) {
    std::vector<ExternalLabels> ext{{pair.pair_id, Side::Modified, std::move(labels)}};
    const auto r = adjudicate(pair, ext);
    REQUIRE(r.size() == 1);
    CHECK(r[0].side == Side::Modified);
    CHECK(r[0].breaker_label == "+1");
    return r[0].status;
  };
  CHECK(status_for({"+1", "+1", "-1"}) == AdjudicationStatus::Confirmed);
  CHECK(status_for({"-1", "-1", "+1"}) == AdjudicationStatus::Contested);
  CHECK(status_for({"+1", "-1"}) == AdjudicationStatus::Contested);
  CHECK(status_for({"1"}) == AdjudicationStatus::Confirmed);
  CHECK(status_for({"0", "0", "+1"}) == AdjudicationStatus::Contested);

  SUBCASE("sides without labels are skipped, empty lists are an error") {
    CHECK(adjudicate(pair, std::vector<ExternalLabels>{}).empty());
    std::vector<ExternalLabels> empty{{pair.pair_id, Side::Original, {}}};
    CHECK_THROWS_AS(adjudicate(pair, empty), DomainError);
  }
  SUBCASE("labels for other pairs are ignored") {
    std::vector<ExternalLabels> other{{"someone-else", Side::Original, {"-1"}}};
    CHECK(adjudicate(pair, other).empty());
  }
  SUBCASE("QA-SRL labels agree by overlap") {
    const auto q = ingest_pairs(data_path("ucd_pair.jsonl")).pairs.at(0);
    std::vector<ExternalLabels> ext{{q.pair_id, Side::Modified, {"UCD", "UCD", "they"}},
                                    {q.pair_id, Side::Original, {"St Vincents", "UCD"}}};
    const auto r = adjudicate(q, ext);
    REQUIRE(r.size() == 2);
    CHECK(r[0].side == Side::Original);
    CHECK(r[0].status == AdjudicationStatus::Contested);
    CHECK(r[1].status == AdjudicationStatus::Confirmed);
  }
}

TEST_CASE("parse_external_labels") {
  const auto labels = parse_external_labels(
      "{\"pair_id\":\"a\",\"side\":\"original\",\"labels\":[\"+1\",-1,1]}\n"
      "{\"pair_id\":\"a\",\"side\":\"mod\",\"labels\":[\"UCD\"]}\n");
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].labels == std::vector<std::string>{"+1", "-1", "+1"});
  CHECK(labels[1].side == Side::Modified);
  CHECK_THROWS_AS(parse_external_labels("{\"pair_id\":\"a\",\"side\":\"left\",\"labels\":[]}"), IngestError);
  CHECK_THROWS_AS(parse_external_labels("{\"side\":\"original\",\"labels\":[]}"), IngestError);
  CHECK_THROWS_AS(parse_external_labels("{\"pair_id\":\"a\",\"side\":\"original\",\"labels\":[true]}"), IngestError);
}
