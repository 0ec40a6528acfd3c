// Python view of the core library: numerics, codec addressing, surrogate
// gradients, analysis statistics and the float decoder.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lngram/analysis.hpp"
#include "lngram/checkpoint.hpp"
#include "lngram/corpus.hpp"
#include "lngram/eval.hpp"
#include "lngram/gradcheck.hpp"

namespace py = pybind11;
using namespace lngram;

namespace {

using MatD = Matrix<double>;
using VecD = Vector<double>;

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

}  // namespace

PYBIND11_MODULE(_lngram, m) {
  m.doc() = "Exact n-gram memory branch for decoder language models";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", m.attr("Error"));
  py::register_exception<LoadError>(m, "LoadError", m.attr("Error"));

  m.def("rmsnorm", [](const VecD& x, double eps) { return rmsnorm(x, eps); }, py::arg("x"), py::arg("eps") = kDefaultRmsEps);
  m.def("softmax_temp", [](const VecD& s, double tau) { return softmax_temp(s, tau); }, py::arg("scores"),
        py::arg("tau") = 1.0);
  m.def("kl_divergence", &kl_divergence, py::arg("p"), py::arg("q"));
  m.def("depthwise_causal_conv",
        [](const MatD& v, const MatD& k, int dilation, Eigen::Index seq_len) {
          return depthwise_causal_conv(v, k, dilation, seq_len);
        },
        py::arg("v"), py::arg("kernels"), py::arg("dilation"), py::arg("seq_len") = -1);

  m.def("compute_address",
        [](int route, const std::vector<Symbol>& window, std::uint32_t symbols) {
          return compute_address(route, window, symbols).value;
        },
        py::arg("route"), py::arg("window"), py::arg("symbols"), "window is ordered oldest first");
  m.def("local_symbol_probs", [](const VecD& z, double tau) { return local_symbol_probs(z, tau); }, py::arg("z"),
        py::arg("tau") = 1.0);
  m.def("expected_retrieval", [](const VecD& z, double tau, const MatD& e) { return expected_retrieval(z, tau, e); },
        py::arg("z"), py::arg("tau"), py::arg("counterfactuals"));
  m.def("exact_surrogate_grad",
        [](const VecD& z, double tau, const VecD& g, const MatD& e) { return exact_surrogate_grad(z, tau, g, e); },
        py::arg("z"), py::arg("tau"), py::arg("upstream"), py::arg("counterfactuals"));
  m.def("onebit_surrogate_grad",
        [](const VecD& z, double tau, double lambda, const VecD& g, const MatD& e0, const MatD& e1) {
          return onebit_surrogate_grad(z, tau, lambda, g, e0, e1);
        },
        py::arg("z"), py::arg("tau"), py::arg("scale"), py::arg("upstream"), py::arg("forced_zero"),
        py::arg("forced_one"));

  m.def("linear_cka", &linear_cka, py::arg("x"), py::arg("y"));
  m.def(
      "soft_alignment",
      [](const Eigen::MatrixXd& s, int k) {
        const auto a = soft_alignment(s, k);
        return py::make_tuple(a.aligned, a.gain);
      },
      py::arg("similarity"), py::arg("k") = 3, "returns (aligned 1-based layer index, gain)");
  m.def(
      "paired_bootstrap",
      [](const std::vector<int>& a, const std::vector<int>& b, int trials, std::uint64_t seed) {
        const auto e = paired_bootstrap(a, b, trials, seed);
        py::dict d;
        d["n"] = e.n;
        d["delta"] = e.delta;
        d["ci_low"] = e.ci_low;
        d["ci_high"] = e.ci_high;
        d["p"] = e.p;
        return d;
      },
      py::arg("correct_a"), py::arg("correct_b"), py::arg("trials") = 10000, py::arg("seed") = 1);
  m.def("holm_bonferroni", &holm_bonferroni, py::arg("p"));

  m.def(
      "gradcheck",
      [](int cases, std::uint64_t seed) {
        GradcheckConfig c;
        c.cases = cases;
        c.seed = seed;
        const auto r = run_gradcheck(c);
        py::dict d;
        d["surrogate_max_rel"] = r.surrogate_max_rel;
        d["onebit_max_abs"] = r.onebit_max_abs;
        d["main_path_max_rel"] = r.main_path_max_rel;
        d["passed"] = r.passed();
        return d;
      },
      py::arg("cases") = 100, py::arg("seed") = 1);

  m.def(
      "gen_corpus",
      [](std::uint64_t seed, std::int64_t train_bytes, std::int64_t val_bytes, double entity_frequency) {
        CorpusSpec s;
        s.seed = seed;
        s.train_bytes = train_bytes;
        s.val_bytes = val_bytes;
        s.entity_frequency = entity_frequency;
        const Corpus c = gen_corpus(s);
        return py::make_tuple(to_bytes(c.train), to_bytes(c.val), c.entities);
      },
      py::arg("seed") = 1, py::arg("train_bytes") = 2'000'000, py::arg("val_bytes") = 200'000,
      py::arg("entity_frequency") = 0.002, "returns (train, val, entity names)");

  py::enum_<FusionMode>(m, "FusionMode")
      .value("single_table", FusionMode::single_table)
      .value("multi_table", FusionMode::multi_table);

  py::class_<LngramConfig>(m, "LngramConfig")
      .def(py::init<>())
      .def_readwrite("bits", &LngramConfig::bits)
      .def_readwrite("orders", &LngramConfig::orders)
      .def_readwrite("mem_dim", &LngramConfig::mem_dim)
      .def_readwrite("subtables", &LngramConfig::subtables)
      .def_readwrite("mode", &LngramConfig::mode)
      .def_readwrite("fusion_temperature", &LngramConfig::fusion_temperature)
      .def_readwrite("conv_width", &LngramConfig::conv_width)
      .def_readwrite("table_row_padding", &LngramConfig::table_row_padding);

  py::class_<DecoderConfig>(m, "DecoderConfig")
      .def(py::init<>())
      .def_readwrite("layers", &DecoderConfig::layers)
      .def_readwrite("dim", &DecoderConfig::dim)
      .def_readwrite("heads", &DecoderConfig::heads)
      .def_readwrite("ffn_dim", &DecoderConfig::ffn_dim)
      .def_readwrite("vocab", &DecoderConfig::vocab)
      .def_readwrite("max_seq", &DecoderConfig::max_seq)
      .def_readwrite("insert_layers", &DecoderConfig::insert_layers)
      .def_readwrite("lngram_enabled", &DecoderConfig::lngram_enabled)
      .def_readwrite("lngram", &DecoderConfig::lngram)
      .def("validate", [](DecoderConfig& c) {
        c.lngram.dim = c.dim;
        c.validate();
      })
      .def("describe", &DecoderConfig::describe)
      .def("hash", &DecoderConfig::hash)
      .def("matched_baseline", [](const DecoderConfig& c) { return matched_baseline(c); });

  py::class_<Decoder<float>>(m, "Decoder")
      .def(py::init([](DecoderConfig c, std::uint64_t seed) {
             c.lngram.dim = c.dim;
             return Decoder<float>(c, seed);
           }),
           py::arg("config"), py::arg("seed") = 1)
      .def_static(
          "load",
          [](const std::string& path, DecoderConfig c) {
            c.lngram.dim = c.dim;
            return load_checkpoint(path, c);
          },
          py::arg("path"), py::arg("config"))
      .def("save", [](const Decoder<float>& d, const std::string& path) { save_checkpoint(path, d); })
      .def(
          "forward_logits",
          [](const Decoder<float>& d, const std::vector<int>& tokens, int seq_len) {
            py::gil_scoped_release release;
            return d.forward_logits(tokens, seq_len);
          },
          py::arg("tokens"), py::arg("seq_len") = -1)
      .def(
          "hidden_states",
          [](const Decoder<float>& d, const std::vector<int>& tokens, int seq_len) {
            return d.forward_with_hidden(tokens, seq_len).hidden;
          },
          py::arg("tokens"), py::arg("seq_len") = -1)
      .def(
          "perplexity",
          [](const Decoder<float>& d, const py::bytes& data, int seq_len) {
            const auto bytes = from_bytes(data);
            return eval_ppl(d, bytes, seq_len).perplexity;
          },
          py::arg("data"), py::arg("seq_len") = 64)
      .def("parameter_counts", [](const Decoder<float>& d) {
        const auto c = d.parameter_counts();
        py::dict out;
        out["backbone"] = c.backbone;
        out["table"] = c.table;
        out["readout"] = c.readout;
        out["codec"] = c.codec;
        out["total"] = c.total();
        return out;
      });
}
