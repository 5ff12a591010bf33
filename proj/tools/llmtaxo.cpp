// llmtaxo: staged claim-taxonomy pipeline driver.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "llmtaxo/error.hpp"
#include "llmtaxo/pipeline.hpp"
#include "llmtaxo/util.hpp"

namespace fs = std::filesystem;
using namespace llmtaxo;

namespace {

struct Overrides {
  std::string config;
  std::string input;
  std::optional<double> threshold;
  std::optional<std::size_t> min_cluster_size;
  std::optional<std::size_t> max_cluster_size;
  std::optional<std::uint64_t> seed;
  bool ablation = false;
  bool mock = false;
  std::string scorer, embedder, llm, judge;
  std::string out;
};

pipeline::RunConfig resolve_config(const Overrides& o) {
  pipeline::RunConfig cfg = o.config.empty() ? pipeline::config_from_json(nlohmann::json::object(), fs::current_path())
                                             : pipeline::load_config(o.config);
  if (!o.input.empty()) {
    cfg.input = fs::absolute(o.input);
    if (cfg.input.extension() == ".csv") cfg.format = corpus::Format::csv;
  }
  if (o.threshold) cfg.threshold = *o.threshold;
  if (o.min_cluster_size) cfg.hdbscan.min_cluster_size = *o.min_cluster_size;
  if (o.max_cluster_size) cfg.hdbscan.max_cluster_size = *o.max_cluster_size;
  if (o.seed) cfg.seed = *o.seed;
  if (o.ablation) cfg.ablation = true;
  for (auto [endpoint, p] : {std::pair{&o.scorer, &cfg.scorer}, {&o.embedder, &cfg.embedder}, {&o.llm, &cfg.llm},
                             {&o.judge, &cfg.judge}}) {
    if (endpoint->empty()) continue;
    p->kind = "remote";
    p->endpoint = *endpoint;
  }
  if (!o.out.empty()) cfg.out = fs::absolute(o.out);
  pipeline::apply_env_overrides(cfg);
  if (o.mock) pipeline::force_mock(cfg);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build a three-level topic taxonomy from social-media claims"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--input", o.input, "Input posts (.jsonl or .csv)");
  app.add_option("--threshold", o.threshold, "Check-worthiness threshold (inclusive)");
  app.add_option("--min-cluster-size", o.min_cluster_size, "HDBSCAN minimum cluster size");
  app.add_option("--max-cluster-size", o.max_cluster_size, "HDBSCAN maximum cluster size");
  app.add_option("--seed", o.seed, "RNG seed for sampling");
  app.add_flag("--ablation", o.ablation, "Generate topics without the seed taxonomy");
  app.add_option("--provider-scorer", o.scorer, "Remote claim-scorer endpoint");
  app.add_option("--provider-embedder", o.embedder, "Remote embeddings endpoint");
  app.add_option("--provider-llm", o.llm, "Remote chat endpoint for topic generation");
  app.add_option("--provider-judge", o.judge, "Remote chat endpoint for evaluation");
  app.add_flag("--mock", o.mock, "Use offline providers for every stage");
  app.add_option("--out", o.out, "Run directory");
  app.fallthrough();

  auto* annotate = app.add_subcommand("annotate", "Propose topics for a seeded sample of distinct claims");
  bool review = false, finalize = false;
  annotate->add_flag("--review", review, "Review pending proposals interactively");
  annotate->add_flag("--finalize", finalize, "Write examples.json from reviewed rows");

  struct Stage {
    const char* name;
    const char* help;
  };
  for (auto s : {Stage{"ingest", "Read raw posts"}, Stage{"detect", "Score posts and keep check-worthy claims"},
                 Stage{"embed", "Embed claims"}, Stage{"cluster", "Cluster claim embeddings"},
                 Stage{"distinct", "Pick one representative claim per cluster"},
                 Stage{"generate", "Generate topics per distinct claim"},
                 Stage{"consolidate", "Build and merge the taxonomy"},
                 Stage{"evaluate", "Judge the taxonomy and sampled claim-topic pairs"},
                 Stage{"ablate", "Compare topic counts with and without the seed taxonomy"},
                 Stage{"run", "Run every stage from ingest to evaluate"}})
    app.add_subcommand(s.name, s.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorClass::config);
  }

  try {
    pipeline::Runner runner(resolve_config(o));
    auto* sub = app.get_subcommands().front();
    const auto name = sub->get_name();
    if (name == "ingest") runner.ingest();
    else if (name == "detect") runner.detect();
    else if (name == "embed") runner.embed();
    else if (name == "cluster") runner.cluster();
    else if (name == "distinct") runner.distinct();
    else if (name == "annotate") {
      if (review) runner.review(std::cin, std::cout);
      else if (finalize) runner.finalize_annotation();
      else runner.annotate();
    } else if (name == "generate") runner.generate();
    else if (name == "consolidate") runner.consolidate();
    else if (name == "evaluate") {
      runner.evaluate();
      std::cout << read_file(runner.artifact(pipeline::artifacts::evaluation_table));
    } else if (name == "ablate") std::cout << pipeline::ablation_to_table(runner.ablate());
    else if (name == "run") runner.run();
    std::cerr << name << ": done (" << runner.config().out.string() << ")\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
