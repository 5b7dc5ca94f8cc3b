#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hirsute/cli.hpp"
#include "hirsute/errors.hpp"
#include "hirsute/maskops.hpp"
#include "hirsute/metrics.hpp"
#include "hirsute/pairs.hpp"
#include "hirsute/protocol.hpp"
#include "hirsute/scoring.hpp"
#include "hirsute/synthgen.hpp"

namespace py = pybind11;
using namespace hirsute;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

LabelMask to_mask(const U8Array& a) {
  if (a.ndim() != 2) throw UsageError("mask must be a 2-D array");
  const auto h = static_cast<std::size_t>(a.shape(0));
  const auto w = static_cast<std::size_t>(a.shape(1));
  std::vector<std::uint8_t> labels(a.data(), a.data() + w * h);
  return LabelMask(w, h, std::move(labels));
}

ScoreSet complete_set(const F64Array& a, TailSide side) {
  std::span<const double> s(a.data(), static_cast<std::size_t>(a.size()));
  return ScoreSet::from_scores(s, side, 1.0);
}

py::dict rate_dict(const Rate& r) {
  py::dict d;
  d["value"] = r.defined ? py::object(py::float_(r.value)) : py::object(py::none());
  d["errors"] = r.errors;
  d["count"] = r.count;
  return d;
}

RatioClassScheme scheme(double cl_upper, double large_lower, double xlarge_lower) {
  RatioClassScheme s{cl_upper, large_lower, xlarge_lower};
  s.validate();
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Facial-hair aware face verification evaluation";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_RuntimeError);

  m.def("facial_hair_ratio",
        [](const U8Array& mask, bool count_shadow) {
          return facial_hair_ratio(to_mask(mask), count_shadow);
        },
        py::arg("mask"), py::arg("count_shadow") = false);

  m.def("iou",
        [](const U8Array& pred, const U8Array& gt, int class_id) {
          if (class_id < 0 || class_id > 2) throw UsageError("class_id must be 0, 1 or 2");
          const auto r = iou(to_mask(pred), to_mask(gt), static_cast<Label>(class_id));
          return py::make_tuple(r.intersection, r.union_count,
                                r.iou ? py::object(py::float_(*r.iou)) : py::object(py::none()));
        },
        py::arg("pred"), py::arg("gt"), py::arg("class_id") = 1,
        "(intersection, union, iou or None)");

  m.def("mask_for_ratio",
        [](double ratio, std::size_t width, std::size_t height) {
          const auto mask = mask_for_ratio(ratio, width, height);
          U8Array out({height, width});
          std::copy(mask.labels().begin(), mask.labels().end(), out.mutable_data());
          return out;
        },
        py::arg("ratio"), py::arg("width"), py::arg("height"));

  m.def("classify",
        [](double ratio, double cl_upper, double large_lower, double xlarge_lower) {
          std::vector<std::string> names;
          for (const auto c : classify(ratio, scheme(cl_upper, large_lower, xlarge_lower)).members()) {
            names.emplace_back(class_name(c));
          }
          return names;
        },
        py::arg("ratio"), py::arg("cl_upper") = 0.001, py::arg("large_lower") = 0.10,
        py::arg("xlarge_lower") = 0.15);

  m.def("categorize_pair",
        [](double ra, double rb, const std::string& category) {
          return categorize_pair(ra, rb, std::string_view(category));
        },
        py::arg("ratio_a"), py::arg("ratio_b"), py::arg("category"));

  m.def("fmr_at",
        [](const F64Array& impostor, double t) {
          return rate_dict(fmr_at(complete_set(impostor, TailSide::kHigh), t));
        },
        py::arg("impostor"), py::arg("threshold"));
  m.def("fnmr_at",
        [](const F64Array& genuine, double t) {
          return rate_dict(fnmr_at(complete_set(genuine, TailSide::kLow), t));
        },
        py::arg("genuine"), py::arg("threshold"));

  m.def("threshold_for_fmr",
        [](const F64Array& impostor, double target) {
          const auto r = threshold_for_fmr(complete_set(impostor, TailSide::kHigh), target);
          py::dict d;
          d["threshold"] = r.threshold;
          d["fmr"] = rate_dict(r.fmr);
          d["reachable"] = r.reachable;
          return d;
        },
        py::arg("impostor"), py::arg("target"));

  m.def("eer",
        [](const F64Array& impostor, const F64Array& genuine) {
          const auto r = eer(complete_set(impostor, TailSide::kHigh),
                             complete_set(genuine, TailSide::kLow));
          py::dict d;
          d["eer"] = r.rate;
          d["threshold"] = r.threshold;
          d["fmr"] = r.fmr;
          d["fnmr"] = r.fnmr;
          d["separated"] = r.separated;
          return d;
        },
        py::arg("impostor"), py::arg("genuine"));

  m.def("inequity_ratio",
        [](const std::map<std::string, double>& fmrs) {
          const auto r = inequity_ratio(fmrs);
          py::dict d;
          d["ratio"] = r.ratio ? py::object(py::float_(*r.ratio)) : py::object(py::none());
          d["max_group"] = r.max_group;
          d["min_group"] = r.min_group;
          d["excluded_zero_fmr"] = r.excluded_zero_fmr;
          return d;
        },
        py::arg("fmrs"));

  m.def("split_subjects",
        [](const std::vector<std::string>& subjects, std::uint64_t seed, std::size_t index) {
          const auto s = split_subjects(subjects, seed, index);
          return py::make_tuple(s.validation, s.test);
        },
        py::arg("subjects"), py::arg("seed"), py::arg("index"));

  m.def("synth",
        [](std::size_t n_subjects, std::size_t images_per_subject, std::size_t dim,
           double beta, std::uint64_t seed) {
          GenConfig cfg;
          cfg.n_subjects = n_subjects;
          cfg.images_per_subject = images_per_subject;
          cfg.dim = dim;
          cfg.hair_axis_strength = beta;
          cfg.seed = seed;
          const auto data = generate(cfg);
          py::list records;
          for (const auto& r : data.dataset.records()) {
            py::dict d;
            d["image_id"] = r.image_id;
            d["subject_id"] = r.subject_id;
            d["demographic"] = r.demographic;
            d["facial_hair_ratio"] = *r.facial_hair_ratio;
            records.append(d);
          }
          py::array_t<float> emb({data.embeddings.count(), data.embeddings.dim()});
          std::copy(data.embeddings.values().begin(), data.embeddings.values().end(),
                    emb.mutable_data());
          return py::make_tuple(records, emb);
        },
        py::arg("n_subjects") = 100, py::arg("images_per_subject") = 3,
        py::arg("dim") = 64, py::arg("beta") = 0.0, py::arg("seed") = 0);

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          py::gil_scoped_release release;
          return cli::run(args);
        },
        py::arg("args"), "Run a hirsute subcommand; returns the exit code.");
}
