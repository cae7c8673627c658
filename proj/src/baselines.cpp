#include "bibi/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <queue>
#include <random>

#include "bibi/error.hpp"
#include "bibi/scoring.hpp"
#include "bibi/text.hpp"
#include "json.hpp"

namespace bibi {

using json = nlohmann::json;

std::uint64_t feature_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

double SparseVector::dot(std::span<const double> dense) const {
  double sum = 0.0;
  for (const auto& [i, v] : entries) sum += dense[i] * v;
  return sum;
}

SparseVector hash_features(const std::map<std::string, double>& named, std::uint32_t dimension) {
  if (!is_power_of_two(dimension)) throw DomainError("feature dimension must be a power of two");
  std::map<std::uint32_t, double> acc;
  for (const auto& [name, value] : named) {
    acc[static_cast<std::uint32_t>(feature_hash(name) & (dimension - 1))] += value;
  }
  SparseVector out;
  out.dimension = dimension;
  for (const auto& [i, v] : acc) {
    if (v != 0.0) out.entries.emplace_back(i, v);
  }
  return out;
}

std::map<std::string, double> ngram_features(std::span<const std::string> tokens, int n_max) {
  if (n_max < 1) throw DomainError("n_max must be at least 1");
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string gram;
    for (std::size_t n = 1; n <= static_cast<std::size_t>(n_max) && i + n <= tokens.size(); ++n) {
      if (n > 1) gram += '_';
      gram += tokens[i + n - 1];
      out[gram] += 1.0;
    }
  }
  return out;
}

SparseVector featurize_ngrams(std::string_view text, int n_max, std::uint32_t dimension) {
  const auto tokens = tokenize(text);
  return hash_features(ngram_features(tokens, n_max), dimension);
}

std::map<std::string, int> skipgram_features(std::span<const std::string> tokens, int n_min, int n_max,
                                             int max_skip) {
  std::map<std::string, int> out;
  if (n_min < 1 || n_max < n_min || max_skip < 0) return out;
  const std::size_t n = tokens.size();
  std::function<void(std::size_t, int, const std::string&)> extend = [&](std::size_t last, int len,
                                                                         const std::string& gram) {
    if (len >= n_min) ++out[gram];
    if (len == n_max) return;
    for (std::size_t next = last + 1; next < n && next <= last + 1 + static_cast<std::size_t>(max_skip); ++next) {
      extend(next, len + 1, gram + "_" + tokens[next]);
    }
  };
  for (std::size_t start = 0; start < n; ++start) extend(start, 1, tokens[start]);
  return out;
}

// ---------------------------------------------------------------------------
// Logistic regression

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double log_loss(double margin, double y) { return y > 0.5 ? softplus(-margin) : softplus(margin); }

}  // namespace

double logistic_objective(const LinearModel& model, std::span<const Example> examples, double l2) {
  double loss = 0.0;
  for (const auto& ex : examples) loss += log_loss(model.margin(ex.x), ex.y);
  if (!examples.empty()) loss /= static_cast<double>(examples.size());
  double sq = 0.0;
  for (double w : model.weights) sq += w * w;
  return loss + 0.5 * l2 * sq;
}

Gradient logistic_gradient(const LinearModel& model, std::span<const Example> examples, double l2) {
  Gradient g;
  g.weights.assign(model.weights.size(), 0.0);
  const double inv_n = examples.empty() ? 0.0 : 1.0 / static_cast<double>(examples.size());
  for (const auto& ex : examples) {
    const double r = (sigmoid(model.margin(ex.x)) - ex.y) * inv_n;
    for (const auto& [i, v] : ex.x.entries) g.weights[i] += r * v;
    g.bias += r;
  }
  for (std::size_t i = 0; i < g.weights.size(); ++i) g.weights[i] += l2 * model.weights[i];
  return g;
}

LinearModel train_logistic(std::span<const Example> examples, const TrainConfig& config) {
  if (!is_power_of_two(config.dimension)) throw DomainError("feature dimension must be a power of two");
  if (config.epochs < 0 || config.learning_rate <= 0.0 || config.l2 < 0.0) {
    throw DomainError("invalid training configuration");
  }
  LinearModel model;
  model.config = config;
  model.weights.assign(config.dimension, 0.0);

  // Weights are kept as scale * stored so the L2 shrink is O(1) per step.
  std::vector<double> stored(config.dimension, 0.0);
  double scale = 1.0;
  double bias = 0.0;
  auto materialize = [&]() {
    for (std::size_t i = 0; i < stored.size(); ++i) model.weights[i] = stored[i] * scale;
    model.bias = bias;
  };

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(config.seed);
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with raw engine output, so the permutation does not depend
    // on the standard library's distribution implementation.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t idx : order) {
      const Example& ex = examples[idx];
      ++step;
      const double lr = config.learning_rate / std::sqrt(static_cast<double>(step));
      double margin = bias;
      for (const auto& [i, v] : ex.x.entries) margin += stored[i] * scale * v;
      const double g = sigmoid(margin) - ex.y;

      scale *= 1.0 - lr * config.l2;
      if (scale < 1e-9) {
        for (double& w : stored) w *= scale;
        scale = 1.0;
      }
      for (const auto& [i, v] : ex.x.entries) stored[i] -= lr * g * v / scale;
      bias -= lr * g;
    }
    materialize();
    model.epoch_losses.push_back(logistic_objective(model, examples, config.l2));
  }
  materialize();
  return model;
}

LinearModel train_sentiment(const SentimentDataset& dataset, const TrainConfig& config) {
  std::vector<Example> examples;
  bool has_pos = false, has_neg = false;
  for (const auto& item : dataset.items) {
    if (item.excluded()) continue;
    const bool pos = item.polarity == Polarity::Positive;
    has_pos |= pos;
    has_neg |= !pos;
    examples.push_back({featurize_ngrams(item.text, config.n_max, config.dimension), pos ? 1.0 : 0.0});
  }
  if (!has_pos || !has_neg) throw DomainError("sentiment training data needs both polar classes");
  return train_logistic(examples, config);
}

SentimentPrediction predict_sentiment(const LinearModel& model, std::string_view text) {
  const auto x = featurize_ngrams(text, model.config.n_max, model.config.dimension);
  SentimentPrediction out;
  out.score = sigmoid(model.margin(x));
  const double tau = model.config.dead_zone;
  if (out.score < 0.5 - tau) {
    out.polarity = Polarity::Negative;
  } else if (out.score > 0.5 + tau || (tau == 0.0 && out.score >= 0.5)) {
    out.polarity = Polarity::Positive;
  } else {
    out.polarity = Polarity::Neutral;
  }
  return out;
}

// ---------------------------------------------------------------------------
// QA-SRL

std::string CandidateSpan::path() const {
  std::string out;
  for (const auto& r : relations) {
    if (!out.empty()) out += '/';
    out += r;
  }
  return out;
}

std::vector<CandidateSpan> candidate_spans(const DependencyParse& parse, std::size_t predicate_index,
                                           std::size_t hops, bool expand_subtrees) {
  const std::size_t n = parse.size();
  if (predicate_index >= n) throw DomainError("predicate index out of range");

  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (auto h = parse.head_of(k)) children[*h].push_back(k);
  }

  struct Visit {
    std::size_t distance = 0;
    std::size_t parent = 0;  // BFS predecessor
    std::vector<std::string> relations;
    bool seen = false;
  };
  std::vector<Visit> visit(n);
  visit[predicate_index].seen = true;
  std::queue<std::size_t> frontier;
  frontier.push(predicate_index);
  std::vector<std::size_t> reached;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    if (visit[u].distance == hops) continue;
    std::vector<std::pair<std::size_t, std::string>> next;
    if (auto h = parse.head_of(u)) next.emplace_back(*h, "^" + parse.tokens[u].relation);
    for (std::size_t c : children[u]) next.emplace_back(c, parse.tokens[c].relation);
    std::sort(next.begin(), next.end());
    for (auto& [v, rel] : next) {
      if (visit[v].seen) continue;
      visit[v].seen = true;
      visit[v].distance = visit[u].distance + 1;
      visit[v].parent = u;
      visit[v].relations = visit[u].relations;
      visit[v].relations.push_back(rel);
      reached.push_back(v);
      frontier.push(v);
    }
  }

  // For an ancestor of the predicate, the child leading back down to it.
  auto blocked_child = [&](std::size_t v) -> std::optional<std::size_t> {
    std::size_t cur = predicate_index;
    while (auto h = parse.head_of(cur)) {
      if (*h == v) return cur;
      cur = *h;
    }
    return std::nullopt;
  };

  std::vector<CandidateSpan> out;
  for (std::size_t v : reached) {
    CandidateSpan c;
    c.head = v;
    c.distance = visit[v].distance;
    c.relations = visit[v].relations;
    c.begin = v;
    c.end = v + 1;
    if (expand_subtrees) {
      const auto blocked = blocked_child(v);
      auto in_subtree = [&](std::size_t k) {
        std::size_t cur = k;
        while (true) {
          if (cur == v) return true;
          if (blocked && cur == *blocked) return false;
          auto h = parse.head_of(cur);
          if (!h) return false;
          cur = *h;
        }
      };
      while (c.begin > 0 && in_subtree(c.begin - 1)) --c.begin;
      while (c.end < n && in_subtree(c.end)) ++c.end;
    }
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const CandidateSpan& o) {
      return o.begin == c.begin && o.end == c.end;
    });
    if (!duplicate) out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const CandidateSpan& a, const CandidateSpan& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
  });
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_punct_token(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  });
}

}  // namespace

std::string question_verb(std::string_view question) {
  static const std::vector<std::string> kAuxiliaries = {"is",    "are",    "was",   "were",   "do",  "does",
                                                        "did",   "has",    "have",  "had",    "will", "would",
                                                        "can",   "could",  "should", "may",   "might"};
  const auto tokens = tokenize(question);
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (is_punct_token(tokens[i])) continue;
    if (std::find(kAuxiliaries.begin(), kAuxiliaries.end(), lower(tokens[i])) != kAuxiliaries.end()) continue;
    return tokens[i];
  }
  return {};
}

std::map<std::string, double> qasrl_feature_names(const QasrlItem& item, const CandidateSpan& candidate,
                                                  const DependencyParse& parse, const QasrlConfig& config) {
  std::map<std::string, double> f;
  const std::string path = candidate.path();
  const auto qtokens = tokenize(item.question);
  const std::string wh = qtokens.empty() ? std::string{} : lower(qtokens.front());
  const std::string qverb = question_verb(item.question);

  f["pred=" + item.predicate] += 1.0;
  f["qverb=" + qverb] += 1.0;
  f["qstr=" + item.question] += 1.0;
  f["wh=" + wh] += 1.0;
  for (const auto& rel : candidate.relations) f["rel=" + rel] += 1.0;
  f["path=" + path] += 1.0;
  f["wh&path=" + wh + "|" + path] += 1.0;
  f["qverb&path=" + qverb + "|" + path] += 1.0;
  f["pred&path=" + item.predicate + "|" + path] += 1.0;
  for (const auto& [gram, count] : skipgram_features(qtokens, 1, config.skip_n_max, config.max_skip)) {
    f["sg=" + path + "|" + gram] += count;
  }
  if (config.sentence_skipgrams) {
    std::vector<std::string> window;
    const std::size_t lo = candidate.begin >= 2 ? candidate.begin - 2 : 0;
    const std::size_t hi = std::min(parse.size(), candidate.end + 2);
    for (std::size_t k = lo; k < hi; ++k) window.push_back(parse.tokens[k].form);
    for (const auto& [gram, count] : skipgram_features(window, 1, config.skip_n_max, config.max_skip)) {
      f["ssg=" + gram] += count;
    }
  }
  return f;
}

SparseVector qasrl_features(const QasrlItem& item, const CandidateSpan& candidate, const DependencyParse& parse,
                            const QasrlConfig& config) {
  return hash_features(qasrl_feature_names(item, candidate, parse, config), config.train.dimension);
}

std::optional<std::pair<std::size_t, std::size_t>> candidate_char_span(const QasrlItem& item,
                                                                       const CandidateSpan& candidate,
                                                                       const DependencyParse& parse) {
  const auto tokens = tokenize_with_offsets(item.sentence);
  if (tokens.size() != parse.size() || candidate.end > tokens.size() || candidate.begin >= candidate.end) {
    return std::nullopt;
  }
  return std::make_pair(tokens[candidate.begin].begin, tokens[candidate.end - 1].end);
}

namespace {

std::string parse_mismatch(const QasrlItem& item, const DependencyParse& parse) {
  const auto tokens = tokenize(item.sentence);
  if (tokens.size() != parse.size()) {
    return "parse of \"" + item.id + "\" has " + std::to_string(parse.size()) + " tokens, sentence has " +
           std::to_string(tokens.size());
  }
  if (item.predicate_index >= parse.size()) return "predicate index out of range for \"" + item.id + "\"";
  return {};
}

}  // namespace

QasrlTraining train_qasrl(const QasrlDataset& dataset, const ParseTable& parses, const QasrlConfig& config) {
  QasrlTraining out;
  std::vector<Example> examples;
  for (const auto& item : dataset.items) {
    const auto* parse = parses.find(item.id);
    if (parse == nullptr) {
      out.warnings.push_back("no parse for \"" + item.id + "\"; skipped");
      continue;
    }
    if (auto problem = parse_mismatch(item, *parse); !problem.empty()) {
      out.warnings.push_back(problem + "; skipped");
      continue;
    }
    for (const auto& cand : candidate_spans(*parse, item.predicate_index, config.hops, config.expand_subtrees)) {
      const auto span = candidate_char_span(item, cand, *parse);
      if (!span) continue;
      double best = 0.0;
      for (const auto& answer : item.answers) {
        const std::size_t at = item.sentence.find(answer);
        if (answer.empty() || at == std::string::npos) continue;
        best = std::max(best, answer_overlap(CharSpan{span->first, span->second}, CharSpan{at, at + answer.size()}));
      }
      const bool positive = best >= kAnswerOverlapThreshold;
      out.positives += positive ? 1 : 0;
      examples.push_back({qasrl_features(item, cand, *parse, config), positive ? 1.0 : 0.0});
    }
  }
  out.examples = examples.size();
  if (out.positives == 0) throw DomainError("QA-SRL training produced no positive examples");
  out.model.config = config;
  out.model.linear = train_logistic(examples, config.train);
  return out;
}

QasrlPrediction predict_qasrl(const QasrlModel& model, const QasrlItem& item, const DependencyParse& parse) {
  QasrlPrediction out;
  if (!parse_mismatch(item, parse).empty()) {
    out.no_candidates = true;
    return out;
  }
  const auto candidates =
      candidate_spans(parse, item.predicate_index, model.config.hops, model.config.expand_subtrees);
  bool found = false;
  for (const auto& cand : candidates) {
    const auto span = candidate_char_span(item, cand, parse);
    if (!span) continue;
    const double score = sigmoid(model.linear.margin(qasrl_features(item, cand, parse, model.config)));
    // Candidates arrive sorted by (begin, end), so strict > keeps the
    // earliest, then shortest, among equal scores.
    if (!found || score > out.score) {
      found = true;
      out.score = score;
      out.answer = item.sentence.substr(span->first, span->second - span->first);
    }
  }
  out.no_candidates = !found;
  return out;
}

// ---------------------------------------------------------------------------
// Model files

namespace {

constexpr int kModelFormatVersion = 1;

json train_config_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate}, {"epochs", c.epochs},   {"l2", c.l2},
              {"seed", c.seed},                   {"n_max", c.n_max},     {"dimension", c.dimension},
              {"dead_zone", c.dead_zone}};
}

TrainConfig train_config_from(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.l2 = j.at("l2").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.n_max = j.at("n_max").get<int>();
  c.dimension = j.at("dimension").get<std::uint32_t>();
  c.dead_zone = j.at("dead_zone").get<double>();
  return c;
}

}  // namespace

std::string serialize_model(const ModelFile& model) {
  json weights = json::array();
  for (std::size_t i = 0; i < model.linear.weights.size(); ++i) {
    if (model.linear.weights[i] != 0.0) weights.push_back(json::array({i, model.linear.weights[i]}));
  }
  json j{{"format", "bibi-model"},
         {"version", kModelFormatVersion},
         {"task", std::string(to_string(model.task))},
         {"config", train_config_json(model.linear.config)},
         {"bias", model.linear.bias},
         {"epoch_losses", model.linear.epoch_losses},
         {"weights", weights}};
  if (model.task == Task::Qasrl) {
    const auto& q = model.qasrl;
    j["qasrl"] = {{"hops", q.hops},         {"expand_subtrees", q.expand_subtrees},
                  {"skip_n_max", q.skip_n_max}, {"max_skip", q.max_skip},
                  {"sentence_skipgrams", q.sentence_skipgrams}};
  }
  return j.dump() + "\n";
}

ModelFile deserialize_model(std::string_view text, const std::string& source) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("format", "") != "bibi-model") {
    throw IngestError(source, 0, "not a bibi model file");
  }
  if (j.value("version", 0) != kModelFormatVersion) throw IngestError(source, 0, "unsupported model version");
  try {
    ModelFile m;
    m.task = parse_task(j.at("task").get<std::string>());
    m.linear.config = train_config_from(j.at("config"));
    if (!is_power_of_two(m.linear.config.dimension)) throw DomainError("dimension is not a power of two");
    m.linear.bias = j.at("bias").get<double>();
    m.linear.epoch_losses = j.value("epoch_losses", std::vector<double>{});
    m.linear.weights.assign(m.linear.config.dimension, 0.0);
    for (const auto& w : j.at("weights")) {
      const auto i = w.at(0).get<std::size_t>();
      if (i >= m.linear.weights.size()) throw DomainError("weight index out of range");
      m.linear.weights[i] = w.at(1).get<double>();
    }
    if (m.task == Task::Qasrl) {
      const json& q = j.at("qasrl");
      m.qasrl.train = m.linear.config;
      m.qasrl.hops = q.at("hops").get<std::size_t>();
      m.qasrl.expand_subtrees = q.at("expand_subtrees").get<bool>();
      m.qasrl.skip_n_max = q.at("skip_n_max").get<int>();
      m.qasrl.max_skip = q.at("max_skip").get<int>();
      m.qasrl.sentence_skipgrams = q.at("sentence_skipgrams").get<bool>();
    }
    return m;
  } catch (const json::exception& e) {
    throw IngestError(source, 0, std::string("bad model file: ") + e.what());
  } catch (const DomainError& e) {
    throw IngestError(source, 0, std::string("bad model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model file " + path.string());
  out << serialize_model(model);
  if (!out) throw Error("failed writing model file " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path), path.string()); }

}  // namespace bibi
