#include "lrgda/classifiers.hpp"
#include "lrgda/hopdc.hpp"
#include "lrgda/lr_rgda.hpp"
#include "lrgda/rng.hpp"
#include "lrgda/serialize.hpp"
#include "lrgda/simulator.hpp"
#include "lrgda/stats.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace lrgda;

namespace {

FeatureMatrix labeled(const RowMatrix& x, const std::vector<ClassId>& labels)
{
    FeatureMatrix m(x, labels);
    m.validate();
    return m;
}

} // namespace

PYBIND11_MODULE(_lrgda, m)
{
    m.doc() = "Native core of the lrgda package";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<StatsSource>(m, "StatsSource");

    py::class_<StatsRegistry, StatsSource>(m, "StatsRegistry")
        .def(py::init<Index>(), py::arg("dim"))
        .def("accumulate",
             [](StatsRegistry& r, const RowMatrix& x, const std::vector<ClassId>& labels) {
                 r.accumulate(labeled(x, labels));
             },
             py::arg("features"), py::arg("labels"))
        .def_property_readonly("dim", &StatsRegistry::dim)
        .def_property_readonly("class_ids", &StatsRegistry::class_ids)
        .def("__len__", &StatsRegistry::num_classes)
        .def("mean", [](const StatsRegistry& r, ClassId id) -> Vector { return r.stats(id).mu; })
        .def("covariance", [](const StatsRegistry& r, ClassId id) -> Matrix { return r.stats(id).sigma; })
        .def("count", [](const StatsRegistry& r, ClassId id) { return r.stats(id).count; })
        .def("average_covariance", [](const StatsRegistry& r) { return average_covariance(r); })
        .def("to_bytes", [](const StatsRegistry& r) { return py::bytes(encode_stats(r)); })
        .def_static("from_bytes", [](const py::bytes& b) { return decode_stats(std::string(b)); });

    py::class_<RegularizationParams>(m, "RegularizationParams")
        .def(py::init<>())
        .def(py::init([](double a1, double a2, double a3, Index rank) {
                 RegularizationParams p;
                 p.alpha1 = a1;
                 p.alpha2 = a2;
                 p.alpha3 = a3;
                 p.rank = rank;
                 return p;
             }),
             py::arg("alpha1") = 0.2, py::arg("alpha2") = 2.0, py::arg("alpha3") = 0.5, py::arg("rank") = 64)
        .def_readwrite("alpha1", &RegularizationParams::alpha1)
        .def_readwrite("alpha2", &RegularizationParams::alpha2)
        .def_readwrite("alpha3", &RegularizationParams::alpha3)
        .def_readwrite("rank", &RegularizationParams::rank)
        .def_readwrite("priors", &RegularizationParams::priors);

    py::class_<HopdcConfig>(m, "HopdcConfig")
        .def(py::init<>())
        .def_readwrite("tau", &HopdcConfig::tau)
        .def_readwrite("top_k", &HopdcConfig::top_k)
        .def_readwrite("m_samples", &HopdcConfig::m_samples)
        .def_readwrite("seed", &HopdcConfig::seed);

    py::class_<LinearClassifier>(m, "LinearClassifier")
        .def_readonly("class_ids", &LinearClassifier::class_ids)
        .def_readonly("W", &LinearClassifier::W)
        .def_readonly("b", &LinearClassifier::b)
        .def("scores", [](const LinearClassifier& c, const RowMatrix& x) { return c.scores(x); })
        .def("predict", [](const LinearClassifier& c, const RowMatrix& x) { return argmax_rows(c.scores(x)); });

    py::class_<RgdaClassifier>(m, "RgdaClassifier")
        .def_readonly("class_ids", &RgdaClassifier::class_ids)
        .def_readonly("log_det", &RgdaClassifier::log_det)
        .def("scores", [](const RgdaClassifier& c, const RowMatrix& x, int threads) { return c.scores(x, threads); },
             py::arg("x"), py::arg("threads") = 1)
        .def("predict", [](const RgdaClassifier& c, const RowMatrix& x) { return argmax_rows(c.scores(x)); });

    py::class_<LrRgdaClassifier>(m, "LrRgdaClassifier")
        .def_readonly("class_ids", &LrRgdaClassifier::class_ids)
        .def_readonly("rank", &LrRgdaClassifier::rank)
        .def("scores", [](const LrRgdaClassifier& c, const RowMatrix& x, int threads) { return c.scores(x, threads); },
             py::arg("x"), py::arg("threads") = 1)
        .def("predict", [](const LrRgdaClassifier& c, const RowMatrix& x) { return argmax_rows(c.scores(x)); })
        .def("flops_per_sample", [](const LrRgdaClassifier& c, const RowMatrix& x) {
            FlopCounter fc;
            c.scores(x, 1, &fc);
            return static_cast<double>(fc.multiply_adds) / static_cast<double>(x.rows());
        });

    m.def("build_lda",
          [](const StatsRegistry& r, const RegularizationParams& p, double gamma) { return build_lda(r, p, gamma); },
          py::arg("registry"), py::arg("params") = RegularizationParams{}, py::arg("gamma") = kDefaultLdaGamma);
    m.def("build_rgda", &build_rgda, py::arg("registry"), py::arg("params") = RegularizationParams{},
          py::arg("threads") = 1);
    m.def("build_lr_rgda",
          [](const StatsRegistry& r, const RegularizationParams& p, bool randomized, std::uint64_t seed) {
              LrBuildOptions opt;
              opt.svd.randomized = randomized;
              opt.svd.seed = seed;
              return build_lr_rgda(r, p, opt);
          },
          py::arg("registry"), py::arg("params") = RegularizationParams{}, py::arg("randomized_svd") = false,
          py::arg("seed") = 0);

    m.def("regularize_covariance",
          [](const Matrix& sc, const Matrix& avg, const RegularizationParams& p) {
              return regularize_covariance(sc, avg, p);
          });
    m.def("low_rank_factor", [](const Matrix& s, double a1, Index r) { return low_rank_factor(s, a1, r); },
          py::arg("sigma"), py::arg("alpha1"), py::arg("rank"));
    m.def("woodbury_inverse",
          [](const Matrix& b_inv, const Matrix& u) {
              auto w = woodbury_inverse(b_inv, u);
              return py::make_tuple(w.inverse, w.m_inv, w.m);
          },
          "Returns (inverse, M^-1, M) for B + U U^T given B^-1.");
    m.def("log_det_lemma", &log_det_lemma);

    m.def("topk_softmax", &topk_softmax, py::arg("scores"), py::arg("tau"), py::arg("k"));
    m.def("estimate_drift",
          [](const RowMatrix& f_old, const RowMatrix& f_new, const RowMatrix& z, const HopdcConfig& cfg) {
              return estimate_drift(build_anchor_bank(f_old, f_new), z, cfg);
          },
          py::arg("f_old"), py::arg("f_new"), py::arg("z"), py::arg("cfg") = HopdcConfig{});
    m.def("hopfield_energy", &hopfield_energy, py::arg("z"), py::arg("keys"), py::arg("beta"));
    m.def("hopfield_update", &hopfield_update, py::arg("z"), py::arg("keys"), py::arg("beta"));

    m.def("storage_layout",
          [](const std::string& kind, std::uint64_t c, std::uint64_t d, std::uint64_t r) {
              const StorageReport rep = storage_layout(parse_kind(kind), c, d, r);
              py::dict out;
              for (const auto& b : rep.blocks)
                  out[py::str(b.name)] = b.bytes;
              out["per_class_bytes"] = rep.per_class_bytes();
              out["shared_bytes"] = rep.shared_bytes();
              out["total_bytes"] = rep.total_bytes();
              return out;
          },
          py::arg("kind"), py::arg("classes"), py::arg("dim"), py::arg("rank") = 0);

    m.def("simulate",
          [](const std::map<std::string, std::string>& spec, const std::string& classifier, bool hopdc,
             std::uint64_t seed, std::size_t seeds) {
              PipelineConfig cfg;
              cfg.classifier = parse_kind(classifier);
              cfg.hopdc = hopdc;
              return report_json(simulate(stream_spec_from_map(spec), cfg, seed, seeds));
          },
          py::arg("spec") = std::map<std::string, std::string>{}, py::arg("classifier") = "lrrgda",
          py::arg("hopdc") = true, py::arg("seed") = 0, py::arg("seeds") = 1,
          "Runs the incremental pipeline and returns the JSON report text.");

    m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("purpose"), py::arg("index") = 0);
}
