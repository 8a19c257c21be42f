#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ctxforge/analysis.hpp"
#include "ctxforge/answer_parsing.hpp"
#include "ctxforge/corpus.hpp"
#include "ctxforge/embedding.hpp"
#include "ctxforge/window_planner.hpp"
#include "ctxforge/workflow.hpp"

namespace py = pybind11;
using namespace ctxforge;

namespace {

py::array_t<double> to_array(const Vector& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Vector from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d array");
  return Vector(a.data(), a.data() + a.size());
}

std::vector<TurnWindow> windows(int n, int max_window, int stride) {
  return plan_windows(n, max_window, stride).windows;
}

py::dict parse(const std::string& answer, int start, int end, const std::string& dialogue_json,
               const std::string& language) {
  const auto dialogue = dialogue_from_json(dialogue_json);
  ParseOptions opts;
  opts.target_language = language;
  const auto out = parse_answer(answer, TurnWindow{start, end}, dialogue, opts, CategoryRegistry::defaults());
  py::dict d;
  d["ok"] = out.ok();
  if (out.ok()) {
    py::list rows;
    for (const auto& a : out.annotations()) {
      py::dict row;
      row["turn"] = a.turn_index;
      row["intention"] = a.intention;
      row["emotion"] = a.emotion;
      row["emotion_in_vocabulary"] = a.emotion_in_vocabulary;
      row["style"] = a.style;
      row["style_in_vocabulary"] = a.style_in_vocabulary;
      rows.append(row);
    }
    d["annotations"] = rows;
  } else {
    d["failure"] = std::string(to_string(out.failure().kind));
    d["detail"] = out.failure().detail;
  }
  return d;
}

py::array_t<double> aggregate(const std::vector<std::string>& words,
                              const py::array_t<double, py::array::c_style | py::array::forcecast>& vectors) {
  if (vectors.ndim() != 2 || static_cast<std::size_t>(vectors.shape(0)) != words.size()) {
    throw std::invalid_argument("vectors must be a (len(words), dim) array");
  }
  const auto dim = static_cast<std::size_t>(vectors.shape(1));
  std::vector<WordEmbedding> cands;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const double* row = vectors.data() + i * dim;
    cands.push_back({words[i], Vector(row, row + dim)});
  }
  return to_array(aggregate_slot(cands));
}

std::vector<std::string> records_json(const std::string& path) {
  std::vector<std::string> out;
  for (const auto& r : RecordStore(path).all()) out.push_back(record_to_json(r));
  return out;
}

py::dict annotate_mock(const std::string& dialogues_path, const std::string& script_path,
                       const std::string& records_path, int workers) {
  const auto dialogues = load_dialogues(dialogues_path);
  const auto tmpl = PromptTemplate::builtin();
  const auto reg = CategoryRegistry::defaults();
  GatewayConfig cfg;
  cfg.min_request_interval_ms = 0;
  Gateway gateway(cfg, mock_backend(MockBackend::load_script(script_path)), std::make_shared<ManualClock>());
  RecordStore store(records_path);
  PipelineDeps deps{tmpl, reg, gateway, ParseOptions{}, kDefaultMaxWindow, kDefaultStride, &store, 0};
  RetryPolicy policy;
  policy.backoff_ms = {};
  CorpusRunSummary s;
  {
    py::gil_scoped_release release;
    CorpusRunOptions options;
    options.workers = workers;
    s = annotate_corpus(dialogues, deps, policy, options);
  }
  py::dict d;
  d["dialogues"] = s.dialogues;
  d["skipped"] = s.skipped;
  d["records"] = s.records;
  d["accepted"] = s.accepted;
  d["failed"] = s.failed;
  d["aborted"] = s.aborted;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ctxforge native core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<StoreError>(m, "StoreError", PyExc_OSError);

  m.attr("WORD_EMBEDDING_DIM") = kWordEmbeddingDim;
  m.attr("FEATURE_DIM") = kFeatureDim;

  py::class_<TurnWindow>(m, "TurnWindow")
      .def(py::init<int, int>(), py::arg("start"), py::arg("end"))
      .def_readonly("start", &TurnWindow::start)
      .def_readonly("end", &TurnWindow::end)
      .def("__len__", [](const TurnWindow& w) { return w.end - w.start + 1; })
      .def("__eq__", [](const TurnWindow& a, const TurnWindow& b) { return a == b; })
      .def("__iter__", [](const TurnWindow& w) { return py::iter(py::make_tuple(w.start, w.end)); })
      .def("__repr__", [](const TurnWindow& w) { return "TurnWindow(" + w.label() + ")"; });

  m.def("plan_windows", &windows, py::arg("n"), py::arg("max_window") = kDefaultMaxWindow,
        py::arg("stride") = kDefaultStride);

  m.def("_parse_answer", &parse, py::arg("answer"), py::arg("start"), py::arg("end"), py::arg("dialogue_json"),
        py::arg("language") = "ja");
  m.def("_normalize_dialogue", [](const std::string& j) { return dialogue_to_json(dialogue_from_json(j)); });
  m.def("_load_dialogues", [](const std::string& path) {
    std::vector<std::string> out;
    for (const auto& d : load_dialogues(path)) out.push_back(dialogue_to_json(d));
    return out;
  });
  m.def("_records_json", &records_json, py::arg("path"));
  m.def("_annotate_mock", &annotate_mock, py::arg("dialogues_path"), py::arg("script_path"),
        py::arg("records_path"), py::arg("workers") = 1);

  m.def("canonicalize_word", &canonicalize_word, py::arg("word"));
  m.def("stub_embedding", [](const std::string& w, std::size_t dim) { return to_array(stub_embedder(w, dim)); },
        py::arg("word"), py::arg("dim") = kWordEmbeddingDim);
  m.def("aggregate_slot", &aggregate, py::arg("words"), py::arg("vectors"));
  m.def("compose_context",
        [](const py::array_t<double>& i, const py::array_t<double>& e, const py::array_t<double>& s) {
          const auto a = from_array(i), b = from_array(e), c = from_array(s);
          return to_array(compose_context(a, b, c));
        });

  py::class_<ProjectionWeights>(m, "ProjectionWeights")
      .def_static("from_seed", &ProjectionWeights::from_seed, py::arg("seed"), py::arg("out_dim") = kFeatureDim,
                  py::arg("in_dim") = kWordEmbeddingDim)
      .def_readonly("seed", &ProjectionWeights::seed)
      .def_readonly("in_dim", &ProjectionWeights::in_dim)
      .def_readonly("out_dim", &ProjectionWeights::out_dim)
      .def_property_readonly("matrix",
                             [](const ProjectionWeights& w) {
                               py::array_t<double> a({w.out_dim, w.in_dim});
                               std::copy(w.matrix.begin(), w.matrix.end(), a.mutable_data());
                               return a;
                             })
      .def_property_readonly("bias", [](const ProjectionWeights& w) { return to_array(w.bias); })
      .def("project", [](const ProjectionWeights& w, const py::array_t<double>& v) {
        return to_array(project(from_array(v), w));
      });
}
