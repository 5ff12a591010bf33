#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmtaxo/clustering.hpp"
#include "llmtaxo/corpus.hpp"
#include "llmtaxo/embedding.hpp"
#include "llmtaxo/error.hpp"
#include "llmtaxo/evaluation.hpp"
#include "llmtaxo/generation.hpp"
#include "llmtaxo/pipeline.hpp"
#include "llmtaxo/taxonomy.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace llmtaxo;

namespace {

using Vectors = std::vector<std::vector<double>>;

clustering::HdbscanParams make_params(std::size_t min_cluster_size, std::optional<std::size_t> min_samples,
                                      std::optional<std::size_t> max_cluster_size, const std::string& metric) {
  clustering::HdbscanParams p;
  p.min_cluster_size = min_cluster_size;
  p.min_samples = min_samples;
  p.max_cluster_size = max_cluster_size;
  p.metric = embedding::metric_from_string(metric);
  p.validate();
  return p;
}

std::string run_stage(const std::string& config_path, const std::string& stage, const std::string& out, bool mock) {
  auto cfg = pipeline::load_config(config_path);
  if (!out.empty()) cfg.out = out;
  pipeline::apply_env_overrides(cfg);
  if (mock) pipeline::force_mock(cfg);
  cfg.validate();
  pipeline::Runner runner(cfg);
  if (stage == "ingest") runner.ingest();
  else if (stage == "detect") runner.detect();
  else if (stage == "embed") runner.embed();
  else if (stage == "cluster") runner.cluster();
  else if (stage == "distinct") runner.distinct();
  else if (stage == "annotate") runner.annotate();
  else if (stage == "generate") runner.generate();
  else if (stage == "consolidate") runner.consolidate();
  else if (stage == "evaluate") runner.evaluate();
  else if (stage == "ablate") runner.ablate();
  else if (stage == "run") runner.run();
  else throw ConfigError("unknown stage \"" + stage + "\"");
  return runner.manifest().dump();
}

}  // namespace

PYBIND11_MODULE(_llmtaxo, m) {
  m.doc() = "Claim clustering and topic-taxonomy pipeline";

  static py::handle error_type = py::exception<Error>(m, "Error").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = e.code();
      exc.attr("exit_code") = e.exit_code();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  // clustering
  m.def(
      "mutual_reachability",
      [](const Vectors& vectors, std::size_t min_samples, const std::string& metric) {
        auto d = clustering::mutual_reachability(vectors, min_samples, embedding::metric_from_string(metric));
        Vectors out(d.size(), std::vector<double>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i)
          for (std::size_t j = 0; j < d.size(); ++j) out[i][j] = d(i, j);
        return out;
      },
      py::arg("vectors"), py::arg("min_samples"), py::arg("metric") = "euclidean");

  m.def(
      "build_mst",
      [](const Vectors& weights) {
        const auto n = weights.size();
        std::vector<double> flat;
        for (const auto& row : weights) {
          if (row.size() != n) throw std::invalid_argument("weights must be square");
          flat.insert(flat.end(), row.begin(), row.end());
        }
        std::vector<std::tuple<std::size_t, std::size_t, double>> out;
        for (const auto& e : clustering::build_mst(clustering::DistanceMatrix(n, std::move(flat))))
          out.emplace_back(e.u, e.v, e.weight);
        return out;
      },
      py::arg("weights"), "Minimum spanning tree edges (u, v, weight) sorted by (weight, u, v).");

  m.def(
      "hdbscan",
      [](const Vectors& vectors, std::size_t min_cluster_size, std::optional<std::size_t> min_samples,
         std::optional<std::size_t> max_cluster_size, const std::string& metric) {
        auto c = clustering::hdbscan(vectors, make_params(min_cluster_size, min_samples, max_cluster_size, metric));
        py::list clusters;
        for (const auto& s : c.clusters)
          clusters.append(py::dict(py::arg("label") = s.label, py::arg("size") = s.size,
                                   py::arg("representative") = s.representative,
                                   py::arg("stability") = s.stability));
        return py::make_tuple(c.labels, clusters);
      },
      py::arg("vectors"), py::arg("min_cluster_size") = 3, py::arg("min_samples") = py::none(),
      py::arg("max_cluster_size") = py::none(), py::arg("metric") = "euclidean",
      "Returns (labels, clusters). Noise is -1.");

  m.def(
      "silhouette",
      [](const Vectors& vectors, const std::vector<int>& labels, const std::string& metric) {
        return clustering::silhouette(vectors, labels, embedding::metric_from_string(metric));
      },
      py::arg("vectors"), py::arg("labels"), py::arg("metric") = "euclidean");

  // corpus and embedding
  m.def("heuristic_score", &corpus::heuristic_score, py::arg("text"));
  m.def(
      "hash_embed",
      [](const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed, double jitter) {
        return embedding::HashEmbedder(dim, seed, jitter).embed(texts);
      },
      py::arg("texts"), py::arg("dim") = 128, py::arg("seed") = 0, py::arg("jitter") = 0.02);

  // taxonomy
  m.def(
      "_consolidate",
      [](const std::string& triples_json, std::size_t broad_min, std::size_t medium_min, std::size_t detailed_min,
         bool merge) {
        std::vector<taxonomy::TopicTriple> triples;
        for (const auto& t : json::parse(triples_json)) triples.push_back(taxonomy::triple_from_json(t));
        auto tax = taxonomy::consolidate(triples);
        if (merge) tax = taxonomy::merge_infrequent(tax, {broad_min, medium_min, detailed_min});
        return taxonomy::to_json(tax);
      },
      py::arg("triples_json"), py::arg("broad_min"), py::arg("medium_min"), py::arg("detailed_min"),
      py::arg("merge"));

  // generation
  m.def(
      "_build_prompt",
      [](const std::string& examples_json, const std::string& claim, bool with_seed) {
        generation::PromptSpec spec;
        spec.examples = taxonomy::examples_from_json(examples_json);
        if (with_seed) spec.seed = taxonomy::SeedTaxonomy(spec.examples);
        spec.target = corpus::Claim{"target", claim, "target", 1.0};
        return generation::build_prompt(spec);
      },
      py::arg("examples_json"), py::arg("claim"), py::arg("with_seed") = true);
  m.def(
      "_parse_response",
      [](const std::string& raw) {
        auto parsed = generation::parse_response(raw);
        json flags = json::array();
        for (const auto& f : parsed.flags)
          flags.push_back({{"kind", generation::to_string(f.kind)},
                           {"level", f.level ? json(taxonomy::to_string(*f.level)) : json(nullptr)}});
        return json{{"topics", taxonomy::triple_to_json(parsed.triple)}, {"flags", flags}}.dump();
      },
      py::arg("raw"));

  // evaluation
  m.def(
      "_aggregate",
      [](const std::string& scores_jsonl) {
        return evaluation::report_to_json(evaluation::aggregate(evaluation::scores_from_jsonl(scores_jsonl))).dump();
      },
      py::arg("scores_jsonl"));

  // pipeline
  m.def("_run_stage", &run_stage, py::arg("config"), py::arg("stage"), py::arg("out") = "",
        py::arg("mock") = false, py::call_guard<py::gil_scoped_release>());
}
