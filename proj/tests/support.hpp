#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <random>
#include <string>
#include <vector>

#include "bibi/baselines.hpp"
#include "bibi/corpus.hpp"
#include "bibi/harness.hpp"
#include "bibi/scoring.hpp"

namespace bibi::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(BIBI_TEST_DATA_DIR) / name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("bibi-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline const std::vector<std::string>& sample_systems() {
  static const std::vector<std::string> systems{"Strawman", "PCNN", "Bag-of-ngrams", "SCNN", "DCNN", "RNTN"};
  return systems;
}

inline const std::vector<std::string>& sample_pair_ids() {
  static const std::vector<std::string> ids{"Utrecht-1",   "Utrecht-2",   "OSU-1", "OSU-2",
                                            "Melbourne-1", "Melbourne-2", "VTeX-1"};
  return ids;
}

// Break matrix counted by hand from the sample prediction table, rows in
// sample_pair_ids() order, columns in sample_systems() order.
inline const std::vector<std::vector<bool>>& sample_break_matrix() {
  static const std::vector<std::vector<bool>> m{
      {true, false, true, false, false, false},   // Utrecht 1
      {false, false, true, true, true, true},     // Utrecht 2
      {true, true, true, true, true, true},       // OSU 1
      {true, true, true, false, true, false},     // OSU 2
      {true, false, false, false, false, true},   // Melbourne 1
      {true, true, false, true, true, false},     // Melbourne 2
      {false, false, true, false, true, true},    // VTeX 1
  };
  return m;
}

inline TeamPairs group_by_team(const std::vector<MinimalPair>& pairs) {
  TeamPairs out;
  for (const auto& p : pairs) out[p.team].push_back(p);
  return out;
}

// Two-class corpus where one sentiment word decides the label and the rest
// is shared filler.
inline SentimentDataset separable_corpus(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> pos{"good", "great", "excellent", "wonderful"};
  static const std::vector<std::string> neg{"bad", "awful", "terrible", "boring"};
  static const std::vector<std::string> filler{"the", "movie", "plot", "was", "really", "acting",
                                               "film", "quite", "story", "and", "cast", "overall"};
  std::mt19937_64 rng(seed);
  SentimentDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = i % 2 == 0;
    std::vector<std::string> words;
    const std::size_t len = 3 + rng() % 5;
    for (std::size_t k = 0; k < len; ++k) words.push_back(filler[rng() % filler.size()]);
    const auto& cue = positive ? pos : neg;
    words.insert(words.begin() + static_cast<long>(rng() % (words.size() + 1)), cue[rng() % cue.size()]);
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    LabeledSentence s;
    s.id = "syn-" + std::to_string(seed) + "-" + std::to_string(i);
    s.text = text;
    s.value = SentimentValue(positive ? 0.9 : 0.1);
    s.polarity = positive ? Polarity::Positive : Polarity::Negative;
    ds.index.emplace(s.id, ds.items.size());
    ds.items.push_back(std::move(s));
  }
  return ds;
}

struct ToyQasrlCorpus {
  QasrlDataset items;
  ParseTable parses;
};

// Agent-question corpus: every gold answer is the full subtree of the
// predicate's nsubj dependent. Subjects, objects and adjuncts vary so the
// answer's position and length are not fixed.
inline ToyQasrlCorpus nsubj_toy_corpus(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> names{"Alice", "Bob", "Carla", "Dmitri", "Emma", "Farid", "Grace", "Hiro"};
  static const std::vector<std::string> adjs{"tall", "young", "old", "quiet", "clever"};
  static const std::vector<std::string> nouns{"farmer", "teacher", "pilot", "doctor", "child", "sailor"};
  static const std::vector<std::string> verbs{"chased", "painted", "found", "carried", "opened", "watched",
                                              "cleaned", "sold"};
  static const std::vector<std::string> objects{"ball", "fence", "boat", "door", "letter", "car"};
  static const std::vector<std::string> places{"park", "harbor", "garden", "city", "morning"};
  std::mt19937_64 rng(seed);
  auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };

  ToyQasrlCorpus out;
  for (std::size_t i = 0; i < n; ++i) {
    DependencyParse parse;
    auto add = [&](std::string form, std::size_t head, std::string rel) {
      parse.tokens.push_back({std::move(form), head, std::move(rel)});
      return parse.tokens.size();  // 1-based index of the new token
    };
    // Token heads are patched once the verb's index is known.
    const bool fronted = rng() % 3 == 0;
    std::vector<std::size_t> to_verb;
    if (fronted) {
      to_verb.push_back(add("Yesterday", 0, "tmod"));
      to_verb.push_back(add(",", 0, "punct"));
    }
    std::string answer;
    std::size_t subj_head = 0;
    const int style = static_cast<int>(rng() % 3);
    if (style == 0) {
      subj_head = add(pick(names), 0, "nsubj");
      answer = parse.tokens.back().form;
    } else {
      const bool with_adj = style == 2;
      std::string det = fronted ? "the" : "The";
      const std::size_t d = add(det, 0, "det");
      std::size_t a = 0;
      if (with_adj) a = add(pick(adjs), 0, "amod");
      subj_head = add(pick(nouns), 0, "nsubj");
      parse.tokens[d - 1].head = subj_head;
      if (a != 0) parse.tokens[a - 1].head = subj_head;
      answer = det + (with_adj ? " " + parse.tokens[a - 1].form : "") + " " + parse.tokens[subj_head - 1].form;
    }
    to_verb.push_back(subj_head);
    const std::string verb = pick(verbs);
    const std::size_t v = add(verb, 0, "root");
    const std::size_t od = add("the", v, "det");
    const std::size_t o = add(pick(objects), v, "dobj");
    parse.tokens[od - 1].head = o;
    if (rng() % 2 == 0) {
      const std::size_t p = add("in", v, "prep");
      const std::size_t pd = add("the", 0, "det");
      const std::size_t pn = add(pick(places), p, "pobj");
      parse.tokens[pd - 1].head = pn;
    }
    add(".", v, "punct");
    for (std::size_t t : to_verb) parse.tokens[t - 1].head = v;

    std::string sentence;
    for (std::size_t k = 0; k < parse.tokens.size(); ++k) {
      const std::string& f = parse.tokens[k].form;
      const bool glue = f == "," || f == ".";
      if (k > 0 && !glue) sentence += ' ';
      sentence += f;
    }
    QasrlItem item;
    item.id = "toy-" + std::to_string(i);
    item.sentence = sentence;
    item.predicate_index = v - 1;
    item.predicate = verb;
    item.question = "Who " + verb + " something?";
    item.answers = {answer};
    out.items.index.emplace(item.id, out.items.items.size());
    out.items.items.push_back(item);
    out.parses.parses.emplace(item.id, parse);
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Rows of the sample prediction file that belong to `system`.
inline std::string sample_rows(const std::string& system) {
  std::istringstream in(read_text(data_path("sample_predictions.tsv")));
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind(system + "\t", 0) == 0) out += line + "\n";
  }
  return out;
}

// Sentiment round over the sample pairs, left in SCORE with every system's
// test predictions submitted. Dev is the starter file; system k gets the first
// k + 1 dev items right and the rest wrong.
inline void sample_round(RoundStore& store, const std::string& round_id) {
  InitOptions init;
  init.round_id = round_id;
  init.train = data_path("reviews.jsonl");
  init.dev = data_path("sample_starter.jsonl");
  init.starter = data_path("sample_starter.jsonl");
  store.init_round(init);
  const auto dev = ingest_sentiment(data_path("sample_starter.jsonl"));
  const auto& systems = sample_systems();
  for (std::size_t k = 0; k < systems.size(); ++k) {
    std::string tsv;
    for (std::size_t i = 0; i < dev.items.size(); ++i) {
      const bool pos = dev.items[i].polarity == Polarity::Positive;
      const bool right = i <= k;
      tsv += systems[k] + "\t" + dev.items[i].id + "\t" + ((pos == right) ? "+1" : "-1") + "\n";
    }
    store.submit_dev_predictions(round_id, systems[k], tsv);
  }
  store.advance_phase(round_id);
  store.submit_pairs(round_id, "", read_text(data_path("sample_pairs.jsonl")));
  store.advance_phase(round_id);
  for (const auto& s : systems) store.submit_test_predictions(round_id, s, sample_rows(s));
}

// Round whose breaker scores must come out Utrecht > OSU > Melbourne > VTeX.
// Two systems: "Alpha" with dev accuracy 1.0 and "Beta" with 0.5. Each team
// flips the polarity of four starter sentences with one substitution; a pair
// breaks a system when it predicts the original label on both sides. Break
// counts (Alpha, Beta) out of 4: Utrecht (3, 2), OSU (2, 3), Melbourne (1, 4),
// VTeX (0, 1), giving 50, 43.75, 37.5 and 6.25.
inline void ordering_round(RoundStore& store, const std::filesystem::path& dir, const std::string& round_id) {
  const std::vector<std::string> teams{"Utrecht", "OSU", "Melbourne", "VTeX"};
  const std::vector<std::pair<int, int>> breaks{{3, 2}, {2, 3}, {1, 4}, {0, 1}};
  const std::size_t per_team = 4;
  std::string starter;
  for (std::size_t i = 0; i < teams.size() * per_team; ++i) {
    const bool pos = i % 2 == 0;
    starter += "{\"id\": \"s" + std::to_string(i) + "\", \"text\": \"the film number " + std::to_string(i) +
               " was " + (pos ? "great" : "awful") + "\", \"value\": " + (pos ? "0.9" : "0.1") + "}\n";
  }
  write_text(dir / "starter.jsonl", starter);

  InitOptions init;
  init.round_id = round_id;
  init.train = init.dev = init.starter = dir / "starter.jsonl";
  store.init_round(init);

  const auto dev = ingest_sentiment(dir / "starter.jsonl");
  std::string alpha, beta;
  for (std::size_t i = 0; i < dev.items.size(); ++i) {
    const std::string gold = dev.items[i].polarity == Polarity::Positive ? "+1" : "-1";
    const std::string flip = gold == "+1" ? "-1" : "+1";
    alpha += "Alpha\t" + dev.items[i].id + "\t" + gold + "\n";
    beta += "Beta\t" + dev.items[i].id + "\t" + (i % 2 == 0 ? gold : flip) + "\n";
  }
  store.submit_dev_predictions(round_id, "Alpha", alpha);
  store.submit_dev_predictions(round_id, "Beta", beta);
  store.advance_phase(round_id);

  std::string test_alpha, test_beta;
  for (std::size_t t = 0; t < teams.size(); ++t) {
    std::string jsonl;
    for (std::size_t k = 0; k < per_team; ++k) {
      const std::size_t i = t * per_team + k;
      const bool pos = i % 2 == 0;
      const std::string id = teams[t] + "-" + std::to_string(k + 1);
      const std::string base = "the film number " + std::to_string(i) + " was ";
      const std::string orig_label = pos ? "1" : "-1", mod_label = pos ? "-1" : "1";
      jsonl += "{\"pair_id\": \"" + id + "\", \"team\": \"" + teams[t] + "\", \"task\": \"sentiment\", \"original_id\": \"s" +
               std::to_string(i) + "\", \"original\": \"" + base + (pos ? "great" : "awful") + "\", \"modified\": \"" + base +
               (pos ? "awful" : "great") + "\", \"gold_original\": " + orig_label + ", \"gold_modified\": " + mod_label + "}\n";
      auto rows = [&](const std::string& system, bool broken) {
        const std::string o = pos ? "+1" : "-1", m = pos ? "-1" : "+1";
        return system + "\t" + id + ":orig\t" + o + "\n" + system + "\t" + id + ":mod\t" + (broken ? o : m) + "\n";
      };
      test_alpha += rows("Alpha", static_cast<int>(k) < breaks[t].first);
      test_beta += rows("Beta", static_cast<int>(k) < breaks[t].second);
    }
    store.submit_pairs(round_id, teams[t], jsonl);
  }
  store.advance_phase(round_id);
  store.submit_test_predictions(round_id, "Alpha", test_alpha);
  store.submit_test_predictions(round_id, "Beta", test_beta);
}

}  // namespace bibi::testing
