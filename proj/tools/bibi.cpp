// bibi: command-line front end for build-it-break-it rounds.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bibi/baselines.hpp"
#include "bibi/error.hpp"
#include "bibi/harness.hpp"
#include "bibi/server.hpp"

namespace fs = std::filesystem;
using namespace bibi;

namespace {

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  write_atomic(path, content);
}

std::string read_input(const std::string& path) {
  if (path == "-") return std::string(std::istreambuf_iterator<char>(std::cin), {});
  return read_file(path);
}

bool looks_like_pairs(const std::string& content) {
  const auto nl = content.find('\n');
  return content.substr(0, nl).find("\"pair_id\"") != std::string::npos;
}

std::string default_system(Task task) { return task == Task::Sentiment ? "Bag-of-ngrams" : "QA-SRL-baseline"; }

// Predictions for either a dataset file (dev ids) or a pair file (<pair_id>:orig / :mod).
PredictionTable run_predict(const ModelFile& model, const std::string& input_path, const std::string& system,
                            const std::optional<std::string>& parses_path) {
  const std::string content = read_input(input_path);
  PredictionTable out(model.task);
  std::optional<ParseTable> parses;
  if (parses_path) parses = ingest_parses(*parses_path);
  auto parse_for = [&](const std::string& id) -> const DependencyParse* {
    return parses ? parses->find(id) : nullptr;
  };
  const QasrlModel qmodel{model.linear, model.qasrl};
  auto predict_item = [&](const QasrlItem& item, const std::string& parse_id) -> std::string {
    const DependencyParse* parse = parse_for(parse_id);
    if (parse == nullptr) {
      std::cerr << "warning: no parse for \"" << parse_id << "\"; predicting an empty answer\n";
      return {};
    }
    return predict_qasrl(qmodel, item, *parse).answer;
  };
  if (model.task == Task::Qasrl && !parses) throw Error("QA-SRL prediction needs --parses");

  if (looks_like_pairs(content)) {
    for (const auto& pair : parse_pairs(content, input_path, PairCheck::Lenient).pairs) {
      for (Side side : {Side::Original, Side::Modified}) {
        const ItemRef ref = ItemRef::pair_side(pair.pair_id, side);
        const PairSide& s = pair.side(side);
        if (model.task == Task::Sentiment) {
          out.insert(system, ref, predict_sentiment(model.linear, s.text).polarity);
        } else {
          const QasrlItem item{ref.str(), s.text, s.predicate_index, s.predicate, s.question, s.answers};
          out.insert(system, ref, predict_item(item, ref.str()));
        }
      }
    }
  } else if (model.task == Task::Sentiment) {
    for (const auto& item : parse_sentiment(content, input_path).items) {
      out.insert(system, ItemRef::dev(item.id), predict_sentiment(model.linear, item.text).polarity);
    }
  } else {
    for (const auto& item : parse_qasrl(content, input_path).items) {
      out.insert(system, ItemRef::dev(item.id), predict_item(item, item.id));
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build-it-break-it shared task harness"};
  app.require_subcommand(1);
  std::string store_dir = RoundStore::default_root().string();
  app.add_option("--store", store_dir, "Round store directory (default: $BIBI_STORE or ./bibi-store)");

  std::string round_id, system, alias, preds, team, pairs_file, labels_file, token;

  // init
  auto* init = app.add_subcommand("init", "Create a round in BUILD phase");
  InitOptions init_opts;
  std::string task_name, train_parses, baseline_model;
  bool no_baseline = false;
  init->add_option("--task", task_name, "sentiment | qasrl")->required();
  init->add_option("--train", init_opts.train, "Training data")->required();
  init->add_option("--dev", init_opts.dev, "Blind dev data")->required();
  init->add_option("--starter", init_opts.starter, "Starter set for breakers")->required();
  init->add_option("--round", init_opts.round_id, "Round id")->required();
  init->add_option("--train-parses", train_parses, "Dependency parses of the QA-SRL training data");
  init->add_option("--baseline-model", baseline_model, "Use this model file instead of training a baseline");
  init->add_flag("--no-baseline", no_baseline, "Do not train an organizer baseline");
  init->add_flag("--force", init_opts.force, "Replace an existing round");
  init->add_option("--min-dev-coverage", init_opts.config.min_dev_coverage, "Required dev coverage (0..1]");
  init->add_option("--max-edit-cost", init_opts.config.max_edit_cost, "Largest accepted token edit distance");
  init->add_option("--majority", init_opts.config.majority_threshold, "External label agreement threshold");

  auto* dev_submit = app.add_subcommand("dev-submit", "Submit a system's dev predictions (BUILD)");
  dev_submit->add_option("--round", round_id)->required();
  dev_submit->add_option("--system", system)->required();
  dev_submit->add_option("--preds", preds, "Predictions TSV")->required();
  dev_submit->add_option("--alias", alias, "Public name shown to breakers and in reports");

  auto* advance = app.add_subcommand("advance", "Move the round to its next phase");
  advance->add_option("--round", round_id)->required();

  auto* team_add = app.add_subcommand("team-add", "Register a breaker team and its HTTP token");
  team_add->add_option("--round", round_id)->required();
  team_add->add_option("--team", team)->required();
  team_add->add_option("--token", token, "Shared secret for HTTP pair submission");

  auto* pairs_submit = app.add_subcommand("pairs-submit", "Submit minimal pairs (BREAK)");
  pairs_submit->add_option("--round", round_id)->required();
  pairs_submit->add_option("--team", team)->required();
  pairs_submit->add_option("--pairs", pairs_file, "Pairs JSONL")->required();

  auto* labels_submit = app.add_subcommand("labels-submit", "Submit external labels for adjudication");
  labels_submit->add_option("--round", round_id)->required();
  labels_submit->add_option("--labels", labels_file, "External labels JSONL")->required();

  auto* export_test = app.add_subcommand("export-test", "Write the accepted pairs (the test set) as JSONL");
  std::string export_out = "-";
  export_test->add_option("--round", round_id)->required();
  export_test->add_option("--out", export_out);

  auto* test_submit = app.add_subcommand("test-submit", "Submit a system's test predictions (SCORE)");
  test_submit->add_option("--round", round_id)->required();
  test_submit->add_option("--system", system)->required();
  test_submit->add_option("--preds", preds, "Predictions TSV")->required();

  auto* score = app.add_subcommand("score", "Score the round and write report.json / report.txt");
  ScoreOptions score_opts;
  score->add_option("--round", round_id)->required();
  score->add_flag("--exclude-contested", score_opts.exclude_contested, "Drop pairs contested by external labels");
  score->add_flag("--keep-open", score_opts.keep_open, "Stay in SCORE instead of closing the round");

  auto* status = app.add_subcommand("status", "Show one round, or list all rounds");
  status->add_option("--round", round_id);

  auto* train = app.add_subcommand("train", "Train an organizer baseline");
  std::string data_file, model_out, parses_file;
  std::uint64_t seed = 1;
  train->add_option("--task", task_name, "sentiment | qasrl")->required();
  train->add_option("--data", data_file)->required();
  train->add_option("--out", model_out)->required();
  train->add_option("--seed", seed);
  train->add_option("--parses", parses_file, "Dependency parses (QA-SRL)");

  auto* predict = app.add_subcommand("predict", "Predict with a trained baseline; writes predictions TSV");
  std::string model_file, input_file, predict_out = "-";
  predict->add_option("--model", model_file)->required();
  predict->add_option("--input", input_file, "Dataset JSONL or pairs JSONL")->required();
  predict->add_option("--out", predict_out);
  predict->add_option("--system", system, "System name in the output");
  predict->add_option("--parses", parses_file, "Dependency parses keyed by item id (QA-SRL)");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  std::string bind = "127.0.0.1:8080";
  serve_cmd->add_option("--bind", bind, "host:port");

  CLI11_PARSE(app, argc, argv);

  try {
    RoundStore store(store_dir);
    if (init->parsed()) {
      init_opts.task = parse_task(task_name);
      if (!train_parses.empty()) init_opts.train_parses = fs::path(train_parses);
      if (!baseline_model.empty()) init_opts.baseline_model = fs::path(baseline_model);
      init_opts.train_baseline = !no_baseline;
      const Round r = store.init_round(init_opts);
      std::cout << "round " << r.round_id << " created in " << to_string(r.phase) << "\n";
      for (const auto& b : r.baselines) std::cout << "baseline " << b << "\n";
    } else if (dev_submit->parsed()) {
      const SystemEntry e = store.submit_dev_predictions(round_id, system, read_input(preds), alias);
      std::cout << "system " << e.name << " dev accuracy " << *e.dev_accuracy << "\n";
    } else if (advance->parsed()) {
      const Round r = store.advance_phase(round_id);
      std::cout << "round " << r.round_id << " is now " << to_string(r.phase) << "\n";
    } else if (team_add->parsed()) {
      store.register_team(round_id, team, token);
      std::cout << "team " << team << " registered\n";
    } else if (pairs_submit->parsed()) {
      const SubmissionReport report = store.submit_pairs(round_id, team, read_input(pairs_file));
      std::cout << to_jsonl(report);
      std::cerr << report.accepted << " of " << report.entries.size() << " pairs accepted\n";
      if (report.empty_effective()) {
        std::cerr << "warning: no pair in this submission was accepted\n";
        return 2;
      }
    } else if (labels_submit->parsed()) {
      const auto results = store.submit_external_labels(round_id, read_input(labels_file));
      std::size_t contested = 0;
      for (const auto& r : results) contested += r.status == AdjudicationStatus::Contested ? 1 : 0;
      std::cout << results.size() << " sides adjudicated, " << contested << " contested\n";
    } else if (export_test->parsed()) {
      std::string out;
      for (const auto& [t, list] : store.accepted_pairs(round_id)) {
        for (const auto& p : list) out += to_jsonl(p) + "\n";
      }
      write_output(export_out, out);
    } else if (test_submit->parsed()) {
      store.submit_test_predictions(round_id, system, read_input(preds));
      std::cout << "test predictions recorded for " << system << "\n";
    } else if (score->parsed()) {
      const ScoreOutcome outcome = store.score_round(round_id, score_opts);
      for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << render_text(outcome.report);
    } else if (status->parsed()) {
      if (!round_id.empty()) {
        std::cout << to_json(store.load(round_id), false) << "\n";
      } else {
        for (const auto& r : store.list()) {
          std::cout << r.round_id << "\t" << to_string(r.task) << "\t" << to_string(r.phase) << "\n";
        }
      }
    } else if (train->parsed()) {
      const Task task = parse_task(task_name);
      ModelFile model;
      model.task = task;
      if (task == Task::Sentiment) {
        TrainConfig config;
        config.seed = seed;
        model.linear = train_sentiment(ingest_sentiment(data_file), config);
      } else {
        if (parses_file.empty()) throw Error("QA-SRL training needs --parses");
        QasrlConfig config;
        config.train.seed = seed;
        auto trained = train_qasrl(ingest_qasrl(data_file), ingest_parses(parses_file), config);
        for (const auto& w : trained.warnings) std::cerr << "warning: " << w << "\n";
        model.linear = trained.model.linear;
        model.qasrl = trained.model.config;
      }
      save_model(model_out, model);
      std::cout << "model written to " << model_out << " (final loss " << model.linear.final_loss() << ")\n";
    } else if (predict->parsed()) {
      const ModelFile model = load_model(model_file);
      const std::optional<std::string> parses =
          parses_file.empty() ? std::nullopt : std::optional<std::string>(parses_file);
      const PredictionTable table =
          run_predict(model, input_file, system.empty() ? default_system(model.task) : system, parses);
      write_output(predict_out, to_tsv(table));
    } else if (serve_cmd->parsed()) {
      const auto [host, port] = parse_bind_address(bind);
      std::cerr << "serving " << store.root() << " on " << host << ":" << port << "\n";
      serve(store, host, port);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
