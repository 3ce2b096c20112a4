#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "json.hpp"

#include "fwfm/cli.h"
#include "fwfm/corpus.h"
#include "fwfm/errors.h"
#include "fwfm/eval.h"
#include "fwfm/fieldstats.h"
#include "fwfm/models.h"
#include "fwfm/synth.h"
#include "fwfm/train.h"

namespace py = pybind11;
using namespace fwfm;

namespace {

// Python containers cross the boundary as JSON text; the C++ side already
// validates JSON configs and specs.
nlohmann::json to_json(const py::object& obj) {
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::json::parse(text);
}

py::object from_json(const nlohmann::json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

Role parse_role(const std::string& name) {
  if (name == "train") return Role::kTrain;
  if (name == "validation") return Role::kValidation;
  if (name == "test") return Role::kTest;
  throw ConfigError("unknown role '" + name + "'");
}

ModelKind parse_kind(const std::string& name) {
  const auto kind = parse_model_kind(name);
  if (!kind) throw ConfigError("unknown model '" + name + "'");
  return *kind;
}

py::array_t<double> matrix_array(const FieldPairMatrix& m) {
  py::array_t<double> out({m.n(), m.n()});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t a = 0; a < m.n(); ++a)
    for (std::size_t b = 0; b < m.n(); ++b) view(a, b) = m.at(a, b);
  return out;
}

py::array_t<double> vector_array(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Field-weighted factorization machines for sparse categorical data";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", base.ptr());
  py::register_exception<DivergedError>(m, "DivergedError", base.ptr());

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def_property_readonly("positives", &Dataset::positives)
      .def_property_readonly("n_fields", [](const Dataset& d) { return d.schema.n_fields(); })
      .def_property_readonly("n_features", [](const Dataset& d) { return d.schema.n_features(); })
      .def_property_readonly("field_names", [](const Dataset& d) { return d.schema.field_names(); })
      .def_property_readonly("role", [](const Dataset& d) { return std::string(role_name(d.role)); })
      .def_property_readonly("labels", [](const Dataset& d) {
        const auto y = labels_of(d);
        return py::array_t<int>(static_cast<py::ssize_t>(y.size()), y.data());
      })
      .def("save", [](const Dataset& d, const std::string& path) { write_libffm(path, d); }, py::arg("path"));

  m.def("load_libffm",
        [](const std::string& path, const std::string& role) { return load_libffm(path, parse_role(role)); },
        py::arg("path"), py::arg("role") = "train", "Read a libffm file with a fresh schema.");
  m.def("load_libffm_like",
        [](const std::string& path, const Dataset& like, const std::string& role) {
          return load_libffm(path, like.schema, parse_role(role));
        },
        py::arg("path"), py::arg("like"), py::arg("role") = "validation",
        "Read a libffm file against an existing schema; unseen tokens become NULL.");
  m.def("split",
        [](const Dataset& d, std::array<unsigned, 3> ratios, std::uint64_t seed) {
          auto s = split_dataset(d, ratios, seed);
          return py::make_tuple(std::move(s.train), std::move(s.validation), std::move(s.test));
        },
        py::arg("data"), py::arg("ratios") = std::array<unsigned, 3>{60, 20, 20}, py::arg("seed") = 1);
  m.def("downsample_negatives", &downsample_negatives, py::arg("train"), py::arg("keep_rate"), py::arg("seed") = 1);

  py::class_<FrequencyFilter>(m, "FrequencyFilter")
      .def_static("fit", &FrequencyFilter::fit, py::arg("train"), py::arg("tau"))
      .def("apply", py::overload_cast<const Dataset&>(&FrequencyFilter::apply, py::const_), py::arg("data"));

  py::class_<ModelParams>(m, "Model")
      .def_property_readonly("kind", [](const ModelParams& p) { return std::string(model_name(p.kind)); })
      .def_property_readonly("k", [](const ModelParams& p) { return p.dims.k; })
      .def_property_readonly("n_fields", [](const ModelParams& p) { return p.dims.n_fields; })
      .def_property_readonly("parameter_count", [](const ModelParams& p) { return parameter_count(p); })
      .def("predict", [](const ModelParams& p, const Dataset& d) { return vector_array(predict_all(p, d)); },
           py::arg("data"), "Click probabilities for every instance.")
      .def("evaluate",
           [](const ModelParams& p, const Dataset& d) {
             const auto r = evaluate(p, d);
             py::dict out;
             out["auc"] = r.auc;
             out["logloss"] = r.logloss;
             out["n"] = r.n;
             return out;
           },
           py::arg("data"))
      .def("r", [](const ModelParams& p) { return matrix_array(r_weights(p)); },
           "Field-pair weights of an FwFM as an n x n array.")
      .def("save", [](const ModelParams& p, const std::string& path) { save_snapshot(p, path); }, py::arg("path"))
      .def("to_bytes", [](const ModelParams& p) { return py::bytes(serialize_snapshot(p)); })
      .def_static("load", &load_snapshot, py::arg("path"))
      .def_static("from_bytes", [](const py::bytes& b) { return deserialize_snapshot(std::string(b)); });

  m.def("train",
        [](const std::string& model, const Dataset& train_data, const Dataset& valid_data, const py::dict& config) {
          const auto cfg = config_from_json(to_json(config));
          TrainResult result;
          {
            py::gil_scoped_release release;
            result = train(parse_kind(model), train_data, valid_data, cfg);
          }
          return py::make_tuple(std::move(result.params), from_json(result.report.to_json()));
        },
        py::arg("model"), py::arg("train"), py::arg("valid"), py::arg("config") = py::dict(),
        "Train a model; returns (model, report). config keys follow the CLI's JSON config.");

  m.def("auc", [](const std::vector<double>& s, const std::vector<int>& y) { return auc(s, y); }, py::arg("scores"),
        py::arg("labels"));
  m.def("logloss", [](const std::vector<double>& p, const std::vector<int>& y) { return logloss(p, y); },
        py::arg("probabilities"), py::arg("labels"));

  m.def("mutual_information", [](const Dataset& d) { return matrix_array(mutual_information(d)); }, py::arg("data"));
  m.def("learned_strength",
        [](const ModelParams& p, const Dataset& d) { return matrix_array(learned_strength(p, d)); },
        py::arg("model"), py::arg("train"));
  m.def("strength_without_r",
        [](const ModelParams& p, const Dataset& d) { return matrix_array(strength_without_r(p, d)); },
        py::arg("model"), py::arg("train"));
  m.def("pearson_upper",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> a,
           py::array_t<double, py::array::c_style | py::array::forcecast> b) {
          if (a.ndim() != 2 || b.ndim() != 2 || a.shape(0) != a.shape(1) || a.shape(0) != b.shape(0) ||
              b.shape(0) != b.shape(1))
            throw ConfigError("pearson_upper needs two square matrices of the same size");
          const auto n = static_cast<std::size_t>(a.shape(0));
          FieldPairMatrix x(n, PairStat::kMutualInformation), y(n, PairStat::kMutualInformation);
          auto av = a.unchecked<2>();
          auto bv = b.unchecked<2>();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
              x.set(i, j, av(i, j));
              y.set(i, j, bv(i, j));
            }
          return pearson(x, y);
        },
        py::arg("a"), py::arg("b"), "Pearson correlation over the strict upper triangles.");

  py::class_<SynthSpec>(m, "PlantedSpec")
      .def_property_readonly("r_star", [](const SynthSpec& s) { return matrix_array(s.r_star); })
      .def_property_readonly("n_fields", &SynthSpec::n_fields)
      .def_readwrite("n_samples", &SynthSpec::n_samples)
      .def_readwrite("seed", &SynthSpec::seed)
      .def("generate", &generate)
      .def("to_dict", [](const SynthSpec& s) { return from_json(s.to_json()); })
      .def_static("from_dict", [](const py::dict& d) { return SynthSpec::from_json(to_json(d)); });

  m.def("make_planted",
        [](std::size_t n_fields, std::size_t features_per_field, std::size_t k, std::vector<double> levels,
           double embedding_scale, double bias, double label_noise, double zipf_s, std::size_t n_samples,
           std::uint64_t seed) {
          PlantOptions o;
          o.n_fields = n_fields;
          o.features_per_field = features_per_field;
          o.k = k;
          o.levels = std::move(levels);
          o.embedding_scale = embedding_scale;
          o.bias = bias;
          o.label_noise = label_noise;
          o.zipf_s = zipf_s;
          o.n_samples = n_samples;
          o.seed = seed;
          return make_planted_spec(o);
        },
        py::kw_only(), py::arg("n_fields") = 8, py::arg("features_per_field") = 16, py::arg("k") = 4,
        py::arg("levels") = std::vector<double>{0.0, 0.5, 1.5}, py::arg("embedding_scale") = 1.0,
        py::arg("bias") = 0.0, py::arg("label_noise") = 0.0, py::arg("zipf_s") = 0.0,
        py::arg("n_samples") = 100000, py::arg("seed") = 1);

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int code = cli::run(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line tool in-process; returns (exit code, stdout, stderr).");
}
