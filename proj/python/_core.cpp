#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "causalkg/corpus.hpp"
#include "causalkg/encode.hpp"
#include "causalkg/error.hpp"
#include "causalkg/evalkit.hpp"
#include "causalkg/extraction.hpp"
#include "causalkg/kgstore.hpp"
#include "causalkg/pipeline.hpp"

namespace py = pybind11;
using namespace causalkg;

namespace {

using TripleTuple = std::tuple<std::string, std::string, std::string>;

std::vector<TripleTuple> extract(const std::string& sentence) {
  std::vector<TripleTuple> out;
  for (const auto& t : rule_extract(sentence, RelationLexicon::builtin())) out.emplace_back(t.subject, t.relation, t.object);
  return out;
}

// (subject, relation, object, tweet, timestamp) rows.
TemporalGraph graph_from_rows(const std::vector<std::tuple<std::string, std::string, std::string, TweetId, Timestamp>>& rows) {
  std::vector<Triple> triples;
  triples.reserve(rows.size());
  for (const auto& [s, r, o, id, ts] : rows) triples.push_back(Triple::make(s, r, o, id, ts));
  return build_graph(triples);
}

std::string report_from_scores(const std::filesystem::path& path) { return report_json(build_report(read_scores_csv(path))); }

std::string stage_json(const std::string& stage, const PipelineConfig& cfg, const std::string& query,
                       const std::filesystem::path& cases, const std::string& mode, bool explain,
                       const std::filesystem::path& scores) {
  const StageArgs args{query, cases, mode, explain, scores};
  if (stage == "all") return run_all(cfg, args).dump();
  return run_stage(parse_stage(stage), cfg, args).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Temporal causal knowledge graph and retrieval pipeline";

  static py::exception<Error> error_type(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      exc.attr("code") = e.code();
      exc.attr("exit_code") = e.exit_code();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("clean_text", &clean_text, py::arg("text"));
  m.def(
      "preprocess_text", [](const std::string& t) { return preprocess_text(t, ContractionDictionary::builtin()); },
      py::arg("text"));
  m.def("normalize_timestamp", &normalize_timestamp, py::arg("raw"));
  m.def("format_timestamp", &format_timestamp, py::arg("ts"));
  m.def("extract", &extract, py::arg("sentence"));

  py::class_<TemporalGraph>(m, "TemporalGraph")
      .def_property_readonly("node_count", &TemporalGraph::node_count)
      .def_property_readonly("edge_count", &TemporalGraph::edge_count)
      .def("has_node", [](const TemporalGraph& g, const std::string& name) { return g.find_node(name).has_value(); })
      .def("occurrences",
           [](const TemporalGraph& g, const std::string& s, const std::string& r, const std::string& o) {
             std::vector<std::pair<Timestamp, TweetId>> out;
             const auto a = g.find_node(s);
             const auto b = g.find_node(o);
             if (!a || !b) return out;
             if (const auto e = g.find_edge(*a, r, *b)) {
               for (const auto& occ : g.edge(*e).occurrences) out.emplace_back(occ.timestamp, occ.tweet);
             }
             return out;
           })
      .def("__eq__", [](const TemporalGraph& a, const TemporalGraph& b) { return a == b; })
      .def_static("load", &TemporalGraph::load, py::arg("directory"));
  m.def("build_graph", &graph_from_rows, py::arg("rows"));

  py::class_<LocalEncoder>(m, "LocalEncoder")
      .def(py::init<std::size_t, std::uint64_t>(), py::arg("dim") = 256, py::arg("seed") = 0x6b67)
      .def("encode", &LocalEncoder::encode, py::arg("text"))
      .def_property_readonly("dim", &LocalEncoder::dim)
      .def_property_readonly("fingerprint", &LocalEncoder::fingerprint);
  m.def(
      "cosine_sim", [](const Vector& a, const Vector& b) { return cosine_sim(a, b); }, py::arg("a"), py::arg("b"));

  m.def("bleu", &bleu, py::arg("candidate"), py::arg("reference"));
  m.def("jaccard", &jaccard, py::arg("candidate"), py::arg("reference"));
  m.def(
      "encoding_similarity",
      [](const std::string& c, const std::string& r, const LocalEncoder& enc) { return encoding_similarity(c, r, enc); },
      py::arg("candidate"), py::arg("reference"), py::arg("encoder"));
  m.def("report_from_scores", &report_from_scores, py::arg("path"));

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def_property_readonly("artifact_dir", [](const PipelineConfig& c) { return c.artifact_dir; })
      .def_property_readonly("json", [](const PipelineConfig& c) { return c.doc.dump(); });
  m.def("load_config", &load_config, py::arg("path"), py::arg("overrides") = std::vector<std::string>{});
  m.def("run_stage", &stage_json, py::arg("stage"), py::arg("config"), py::arg("query") = "",
        py::arg("cases") = std::filesystem::path(), py::arg("mode") = "both", py::arg("explain") = false,
        py::arg("scores") = std::filesystem::path(), py::call_guard<py::gil_scoped_release>());
}
