#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <limits>
#include <optional>
#include <string>

#include "qadc/bench.hpp"
#include "qadc/synthetic.hpp"

namespace py = pybind11;
using namespace qadc;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Dataset to_dataset(const FloatArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto d = static_cast<std::size_t>(a.shape(1));
  Dataset ds(d, n);
  std::copy_n(a.data(), n * d, ds.data.begin());
  return ds;
}

py::array_t<float> to_array(const Dataset& ds) {
  py::array_t<float> out({ds.count, ds.dim});
  std::copy(ds.data.begin(), ds.data.end(), out.mutable_data());
  return out;
}

py::array_t<std::int32_t> to_array(const GroundTruth& gt) {
  py::array_t<std::int32_t> out({gt.count, gt.depth});
  std::copy(gt.ids.begin(), gt.ids.end(), out.mutable_data());
  return out;
}

GroundTruth to_groundtruth(const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  GroundTruth gt;
  gt.count = static_cast<std::size_t>(a.shape(0));
  gt.depth = static_cast<std::size_t>(a.shape(1));
  gt.ids.assign(a.data(), a.data() + gt.count * gt.depth);
  return gt;
}

Layout parse_layout(const std::string& name) {
  if (name == "standard") return Layout::standard;
  if (name == "transposed16") return Layout::transposed16;
  throw std::invalid_argument("unknown layout '" + name + "' (expected standard or transposed16)");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Product quantization search with Quick ADC scans.";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("read_fvecs", [](const std::filesystem::path& p, std::optional<std::size_t> limit) {
    return to_array(read_fvecs(p, limit));
  }, py::arg("path"), py::arg("limit") = py::none());
  m.def("read_bvecs", [](const std::filesystem::path& p, std::optional<std::size_t> limit) {
    return to_array(read_bvecs(p, limit));
  }, py::arg("path"), py::arg("limit") = py::none());
  m.def("read_ivecs", [](const std::filesystem::path& p, std::optional<std::size_t> limit) {
    return to_array(read_ivecs(p, limit));
  }, py::arg("path"), py::arg("limit") = py::none());
  m.def("write_fvecs", [](const std::filesystem::path& p, const FloatArray& a) {
    write_fvecs(p, to_dataset(a));
  }, py::arg("path"), py::arg("vectors"));
  m.def("write_ivecs", [](const std::filesystem::path& p,
                          const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& a) {
    write_ivecs(p, to_groundtruth(a));
  }, py::arg("path"), py::arg("ids"));

  py::class_<ProductQuantizer>(m, "ProductQuantizer")
      .def_property_readonly("d", &ProductQuantizer::d)
      .def_property_readonly("m", &ProductQuantizer::m)
      .def_property_readonly("b", &ProductQuantizer::b)
      .def_property_readonly("code_size", &ProductQuantizer::code_size)
      .def_property_readonly("has_rotation", &ProductQuantizer::has_rotation)
      .def("encode", [](const ProductQuantizer& pq, const FloatArray& x) {
        const auto ds = to_dataset(x);
        const auto codes = pq.encode_all(ds);
        py::array_t<std::uint8_t> out({ds.count, pq.code_size()});
        std::copy(codes.begin(), codes.end(), out.mutable_data());
        return out;
      }, py::arg("vectors"))
      .def("decode", [](const ProductQuantizer& pq, const ByteArray& codes) {
        if (codes.ndim() != 2 || static_cast<std::size_t>(codes.shape(1)) != pq.code_size()) {
          throw std::invalid_argument("codes must have shape (n, code_size)");
        }
        const auto n = static_cast<std::size_t>(codes.shape(0));
        Dataset out(pq.d(), n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto rec = pq.decode({codes.data() + i * pq.code_size(), pq.code_size()});
          std::copy(rec.begin(), rec.end(), out.row(i).begin());
        }
        return to_array(out);
      }, py::arg("codes"))
      .def("reconstruction_error", [](const ProductQuantizer& pq, const FloatArray& x) {
        return reconstruction_error(pq, to_dataset(x));
      })
      .def("save", [](const ProductQuantizer& pq, const std::filesystem::path& p) { save_model(pq, p); })
      .def_static("load", &load_model);

  m.def("train_pq", [](const FloatArray& learn, std::size_t m_, std::size_t b, std::size_t iters,
                       std::uint64_t seed, bool opq, std::size_t opq_iters) {
    const auto ds = to_dataset(learn);
    const PqTrainParams p{m_, b, iters, seed};
    py::gil_scoped_release release;
    return opq ? train_opq(ds, {p, opq_iters}) : train_pq(ds, p);
  }, py::arg("learn"), py::arg("m") = 16, py::arg("b") = 4, py::arg("iters") = 25,
     py::arg("seed") = 1234, py::arg("opq") = false, py::arg("opq_iters") = 20);

  m.def("train_coarse", [](const FloatArray& learn, std::size_t K, std::size_t iters, std::uint64_t seed) {
    const auto cb = train_coarse(to_dataset(learn), K, {iters, seed});
    return to_array(Dataset(cb.dim, cb.centroids));
  }, py::arg("learn"), py::arg("K"), py::arg("iters") = 25, py::arg("seed") = 1234);

  m.def("residuals", [](const FloatArray& coarse, const FloatArray& x) {
    const auto c = to_dataset(coarse);
    return to_array(compute_residuals(Codebook{c.count, c.dim, c.data}, to_dataset(x)));
  }, py::arg("coarse"), py::arg("vectors"));

  py::class_<IvfIndex>(m, "Index")
      .def_readonly("d", &IvfIndex::d)
      .def_readonly("m", &IvfIndex::m)
      .def_property_readonly("exhaustive", &IvfIndex::exhaustive)
      .def_property_readonly("layout", [](const IvfIndex& i) {
        return i.layout == Layout::standard ? "standard" : "transposed16";
      })
      .def_property_readonly("list_count", &IvfIndex::list_count)
      .def("list_size", &IvfIndex::list_size)
      .def("__len__", &IvfIndex::size)
      .def("with_layout", [](const IvfIndex& i, const std::string& l) { return i.with_layout(parse_layout(l)); })
      .def("save", [](const IvfIndex& i, const std::filesystem::path& p) { save_index(i, p); })
      .def_static("load", &load_index);

  m.def("build_index", [](const ProductQuantizer& pq, const FloatArray& base,
                          std::optional<FloatArray> coarse, const std::string& layout) {
    const auto ds = to_dataset(base);
    const Layout l = parse_layout(layout);
    if (!coarse) return build_exhaustive(pq, ds, l);
    const auto c = to_dataset(*coarse);
    return build_index(pq, Codebook{c.count, c.dim, c.data}, ds, l);
  }, py::arg("pq"), py::arg("base"), py::arg("coarse") = py::none(), py::arg("layout") = "standard");

  m.def("search", [](const ProductQuantizer& pq, const IvfIndex& index, const FloatArray& queries,
                     std::size_t R, std::size_t ma, const std::string& method, std::size_t init,
                     std::optional<std::string> kernel) {
    const auto qs = to_dataset(queries);
    SearchParams p;
    p.R = R;
    p.ma = ma;
    p.init = init;
    p.method = parse_method(method);
    if (kernel) p.kernel = parse_kernel(*kernel);
    py::array_t<std::int64_t> ids({qs.count, R});
    py::array_t<float> dist({qs.count, R});
    auto* id_out = ids.mutable_data();
    auto* dist_out = dist.mutable_data();
    {
      py::gil_scoped_release release;
      const Searcher searcher(pq, index);
      for (std::size_t q = 0; q < qs.count; ++q) {
        const auto res = searcher.search(qs.row(q), p);
        for (std::size_t i = 0; i < R; ++i) {
          const bool have = i < res.neighbors.size();
          id_out[q * R + i] = have ? static_cast<std::int64_t>(res.neighbors[i].id) : -1;
          dist_out[q * R + i] =
              have ? res.neighbors[i].distance : std::numeric_limits<float>::infinity();
        }
      }
    }
    return py::make_tuple(ids, dist);
  }, py::arg("pq"), py::arg("index"), py::arg("queries"), py::arg("R") = 100, py::arg("ma") = 1,
     py::arg("method") = "adc", py::arg("init") = 200, py::arg("kernel") = py::none());

  m.def("recall_at", [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& ids,
                        const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& gt,
                        std::size_t r) {
    if (ids.ndim() != 2) throw std::invalid_argument("ids must be 2-d");
    std::vector<std::vector<std::uint64_t>> rows(static_cast<std::size_t>(ids.shape(0)));
    const auto width = static_cast<std::size_t>(ids.shape(1));
    for (std::size_t q = 0; q < rows.size(); ++q) {
      for (std::size_t i = 0; i < width; ++i) {
        const auto v = ids.data()[q * width + i];
        if (v >= 0) rows[q].push_back(static_cast<std::uint64_t>(v));
      }
    }
    return recall_at(rows, to_groundtruth(gt), r);
  }, py::arg("ids"), py::arg("groundtruth"), py::arg("r"));

  m.def("exact_groundtruth", [](const FloatArray& base, const FloatArray& queries, std::size_t depth) {
    return to_array(exact_groundtruth(to_dataset(base), to_dataset(queries), depth));
  }, py::arg("base"), py::arg("queries"), py::arg("depth") = 100);

  m.def("generate_synthetic", [](std::size_t dim, std::size_t base, std::size_t learn,
                                 std::size_t queries, std::uint64_t seed) {
    SyntheticParams p;
    p.dim = dim;
    p.base = base;
    p.learn = learn;
    p.queries = queries;
    p.seed = seed;
    const auto data = generate_synthetic(p);
    py::dict out;
    out["base"] = to_array(data.base);
    out["learn"] = to_array(data.learn);
    out["queries"] = to_array(data.queries);
    out["groundtruth"] = to_array(data.groundtruth);
    return out;
  }, py::arg("dim") = 128, py::arg("base") = 10000, py::arg("learn") = 70000,
     py::arg("queries") = 1000, py::arg("seed") = 7);

  m.def("best_kernel", [] { return std::string(kernel_name(best_kernel())); });
  m.def("kernel_available", [](const std::string& k) { return kernel_available(parse_kernel(k)); });
}
