#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wcd/corpus.hpp"
#include "wcd/hashing.hpp"
#include "wcd/models.hpp"
#include "wcd/murmur3.hpp"
#include "wcd/pyramid.hpp"
#include "wcd/tokenizer.hpp"

namespace py = pybind11;
using namespace wcd;

namespace {

TokenStream tokenize_bytes(const py::bytes& data) {
  std::string s = data;
  return tokenize(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

Variant parse_variant(const std::string& name) {
  auto v = variant_from_name(name);
  if (!v) throw py::value_error("unknown variant: " + name);
  return *v;
}

// Thin scoring handle over a loaded model's float inference path.
struct Scorer {
  Model model;
  InferenceModel inference;

  explicit Scorer(const std::string& path)
      : model(load_model(path)), inference(to_inference(model)) {}

  Eigen::RowVectorXf score(const py::bytes& data) {
    Eigen::MatrixXf feats =
        features_for_variant(model.tag, tokenize_bytes(data));
    return inference.forward(feats).row(0);
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "hierarchical web-content detector core";

  m.def("murmur3_32",
        [](const py::bytes& data, uint32_t seed) {
          std::string s = data;
          return murmur3_x86_32(s.data(), s.size(), seed);
        },
        py::arg("data"), py::arg("seed") = 0);

  m.def("tokenize", [](const py::bytes& data) {
    TokenStream ts = tokenize_bytes(data);
    py::list out;
    for (const auto& t : ts.tokens) out.append(py::bytes(t));
    return out;
  });

  m.def("chunk_bags", [](const py::bytes& data) {
    TokenStream ts = tokenize_bytes(data);
    return bag_chunks(ts, plan_chunks(ts.tokens.size())).counts;
  });

  m.def("flat_bag", [](const py::bytes& data) {
    Eigen::VectorXf v = bag_flat(tokenize_bytes(data)).counts;
    return v;
  });

  m.def("features",
        [](const py::bytes& data, const std::string& variant) {
          return features_for_variant(parse_variant(variant),
                                      tokenize_bytes(data));
        },
        py::arg("data"), py::arg("variant") = "proposed");

  m.def("pyramid", [](const Eigen::MatrixXf& leaves) {
    return build_pyramid(leaves).nodes;
  });

  m.def("param_count", [](const std::string& variant) {
    return param_count(parse_variant(variant), ModelDims{});
  });

  m.def("sha256_hex", [](const py::bytes& data) {
    std::string s = data;
    return sha256_hex(std::vector<uint8_t>(s.begin(), s.end()));
  });

  py::class_<Scorer>(m, "Scorer")
      .def(py::init<const std::string&>(), py::arg("model_path"))
      .def_property_readonly(
          "variant", [](const Scorer& s) { return variant_name(s.model.tag); })
      .def("score", &Scorer::score, py::arg("data"),
           "All head probabilities; index 0 is the malicious decision.");

  m.attr("hash_variant_id") = kHashVariantId;
  m.attr("chunks") = kChunks;
  m.attr("chunk_bins") = kChunkBins;
  m.attr("flat_bins") = kFlatBins;
}
