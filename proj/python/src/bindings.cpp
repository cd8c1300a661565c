#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <span>

#include "flyhash/corpus.hpp"
#include "flyhash/error.hpp"
#include "flyhash/eval.hpp"
#include "flyhash/model.hpp"
#include "flyhash/rng.hpp"
#include "flyhash/trainer.hpp"

namespace py = pybind11;
using namespace flyhash;

namespace {

std::vector<std::uint32_t> as_indices(const EncodedSample& s) { return s.active_indices; }

py::array_t<float> weights_array(const WeightMatrix& W) {
  const auto rows = W.to_row_major();
  py::array_t<float> a({W.units(), W.inputs()});
  std::copy(rows.begin(), rows.end(), a.mutable_data());
  return a;
}

WeightMatrix weights_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2 || a.shape(1) % 2 != 0)
    throw Error(ErrorCode::kDimensionMismatch, "weights must be K x 2*N_voc");
  const auto K = static_cast<std::size_t>(a.shape(0));
  const auto inputs = static_cast<std::size_t>(a.shape(1));
  return WeightMatrix::from_row_major(K, inputs / 2, {a.data(), K * inputs});
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse binary word embeddings trained with a winner-take-all network";

  // message carries the stable code name, e.g. "nothing_to_train: ..."
  static auto& error = py::register_exception<Error>(m, "FlyhashError", PyExc_RuntimeError);
  py::register_local_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(error_code_name(e.code())) + ": " + e.what()).c_str());
    }
  });

  // corpus
  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<std::vector<std::string>, std::vector<std::uint64_t>>(), py::arg("tokens"),
           py::arg("counts"))
      .def("__len__", &Vocabulary::size)
      .def_property_readonly("tokens", &Vocabulary::tokens)
      .def_property_readonly("counts", &Vocabulary::counts)
      .def("token", &Vocabulary::token)
      .def("find", [](const Vocabulary& v, const std::string& t) { return v.find(t); })
      .def("__eq__", &Vocabulary::operator==);

  m.def("tokenize", &tokenize, py::arg("line"));
  m.def("split_sentences", &split_sentences, py::arg("text"));
  m.def("build_vocabulary",
        [](const std::vector<std::string>& tokens, std::size_t n_voc) { return build_vocabulary(tokens, n_voc); },
        py::arg("tokens"), py::arg("n_voc"));
  m.def("encode_wgram",
        [](std::vector<WordId> context, WordId target, std::size_t n_voc) {
          return as_indices(encode_wgram({std::move(context), target, 0}, n_voc));
        },
        py::arg("context_ids"), py::arg("target_id"), py::arg("n_voc"));
  m.def("occurrence_probabilities", [](const Vocabulary& v) { return occurrence_probabilities(v).p; });
  m.def("shuffle_epoch", &shuffle_epoch, py::arg("sample_count"), py::arg("epoch"), py::arg("seed"));

  // model
  py::class_<Model>(m, "Model")
      .def(py::init([](py::array_t<float> weights, const Vocabulary& vocab, std::uint32_t w,
                       std::uint64_t seed, std::uint32_t epochs) {
             return Model{weights_from_array(std::move(weights)), vocab,
                          {w, seed, epochs, kPrngXoshiro256ss}};
           }),
           py::arg("weights"), py::arg("vocab"), py::arg("w") = 11, py::arg("seed") = 0,
           py::arg("epochs_trained") = 0)
      .def_static("load", &load_model_file, py::arg("path"))
      .def_static("from_bytes", [](py::bytes b) { return load_model(std::string(b)); })
      .def("save", [](const Model& mo, const std::filesystem::path& p) { save_model_file(p, mo); }, py::arg("path"))
      .def("to_bytes", [](const Model& mo) { return py::bytes(save_model(mo)); })
      .def_property_readonly("weights", [](const Model& mo) { return weights_array(mo.weights); })
      .def_property_readonly("vocab", [](const Model& mo) { return mo.vocab; })
      .def_property_readonly("K", [](const Model& mo) { return mo.weights.units(); })
      .def_property_readonly("w", [](const Model& mo) { return mo.header.w; })
      .def_property_readonly("seed", [](const Model& mo) { return mo.header.seed; })
      .def_property_readonly("epochs_trained", [](const Model& mo) { return mo.header.epochs_trained; })
      .def("activations",
           [](const Model& mo, const std::vector<std::uint32_t>& active) { return activations(mo.weights, active); },
           py::arg("active_indices"))
      .def("hash",
           [](const Model& mo, const std::vector<std::uint32_t>& active, std::size_t k) {
             return hash(mo.weights, active, k).active_units;
           },
           py::arg("active_indices"), py::arg("k"))
      .def("static_embedding",
           [](const Model& mo, const std::string& word, std::size_t k) {
             const auto id = mo.vocab.find(word);
             if (!id) throw Error(ErrorCode::kIdOutOfRange, "'" + word + "' is not in the vocabulary");
             return static_embedding(mo.weights, *id, k).active_units;
           },
           py::arg("word"), py::arg("k"))
      .def("context_embedding",
           [](const Model& mo, const std::vector<std::string>& sentence, std::size_t index, std::size_t k,
              std::optional<std::uint32_t> w) {
             Embedder e(mo);
             const auto g = e.query_wgram(sentence, index, w.value_or(mo.header.w));
             if (!g) throw Error(ErrorCode::kIdOutOfRange, "target word is not in the vocabulary");
             return context_embedding(mo.weights, *g, k).active_units;
           },
           py::arg("sentence"), py::arg("index"), py::arg("k"), py::arg("w") = py::none())
      .def("nearest_neighbors",
           [](const Model& mo, const std::vector<std::string>& sentence, std::size_t index, std::size_t q,
              std::size_t k, std::optional<std::uint32_t> w) {
             Embedder e(mo);
             const auto g = e.query_wgram(sentence, index, w.value_or(mo.header.w));
             if (!g) throw Error(ErrorCode::kIdOutOfRange, "target word is not in the vocabulary");
             std::vector<std::pair<std::string, double>> out;
             for (const auto& n : e.nearest_neighbors(*g, q, k)) out.emplace_back(mo.vocab.token(n.word), n.similarity);
             return out;
           },
           py::arg("sentence"), py::arg("index"), py::arg("q"), py::arg("k"), py::arg("w") = py::none())
      .def("kc_word_distribution",
           [](const Model& mo, UnitId unit, const std::string& block) {
             return kc_word_distribution(mo.weights, unit, block == "context" ? Block::kContext : Block::kTarget);
           },
           py::arg("unit"), py::arg("block") = "target");

  m.def("init_weights",
        [](std::size_t K, std::size_t n_voc, std::uint64_t seed) { return weights_array(init_weights(K, n_voc, seed)); },
        py::arg("K"), py::arg("n_voc"), py::arg("seed"));
  m.def("energy",
        [](py::array_t<float> W, const std::vector<std::vector<std::uint32_t>>& samples, std::vector<double> p) {
          SampleSet s;
          for (const auto& x : samples) s.push_back(std::span<const std::uint32_t>(x));
          return energy(weights_from_array(std::move(W)), s, ProbabilityVector{std::move(p)});
        },
        py::arg("weights"), py::arg("samples"), py::arg("p"));
  m.def("update_delta",
        [](py::array_t<float> W, const std::vector<std::uint32_t>& active, std::vector<double> p, double lr) {
          const auto d = update_delta(weights_from_array(std::move(W)), active, ProbabilityVector{std::move(p)}, lr);
          return py::make_tuple(d.unit, d.overlap, d.row);
        },
        py::arg("weights"), py::arg("active_indices"), py::arg("p"), py::arg("lr"));

  // trainer
  py::class_<EpochReport>(m, "EpochReport")
      .def_readonly("epoch", &EpochReport::epoch)
      .def_readonly("energy", &EpochReport::energy)
      .def_readonly("samples_per_sec", &EpochReport::samples_per_sec)
      .def_readonly("seconds", &EpochReport::seconds)
      .def_readonly("lr", &EpochReport::lr)
      .def("__repr__", &EpochReport::to_json);

  m.def("learning_rate",
        [](std::uint32_t epoch, double lr0, std::uint32_t epochs) {
          TrainingConfig c;
          c.lr0 = lr0;
          c.epochs = epochs;
          return learning_rate(epoch, c);
        },
        py::arg("epoch"), py::arg("lr0"), py::arg("epochs"));

  m.def("train",
        [](const std::vector<std::string>& lines, std::uint32_t K, std::uint32_t w, std::uint32_t n_voc,
           std::uint32_t epochs, double lr0, std::uint32_t batch, std::uint64_t seed, std::uint32_t workers,
           const std::string& scaling) {
          TrainingConfig cfg;
          cfg.units = K;
          cfg.w = w;
          cfg.epochs = epochs;
          cfg.lr0 = lr0;
          cfg.minibatch = batch;
          cfg.seed = seed;
          cfg.workers = workers;
          if (scaling == "max-norm") cfg.scaling = UpdateScaling::kMaxNorm;
          else if (scaling != "raw") throw Error(ErrorCode::kConfig, "scaling must be raw or max-norm");
          cfg.validate();
          TrainResult r;
          TrainingData data;
          {
            py::gil_scoped_release release;
            data = prepare_training_data(lines, n_voc, w);
            cfg.n_voc = static_cast<std::uint32_t>(data.vocab.size());
            r = train(data.samples, data.p, cfg);
          }
          Model mo{std::move(r.weights), data.vocab, {w, seed, epochs, kPrngXoshiro256ss}};
          return py::make_tuple(std::move(mo), r.reports);
        },
        py::arg("lines"), py::arg("K") = 400, py::arg("w") = 11, py::arg("n_voc") = 20000, py::arg("epochs") = 15,
        py::arg("lr0") = 3e-4, py::arg("batch") = 10000, py::arg("seed") = 0, py::arg("workers") = 1,
        py::arg("scaling") = "raw",
        "Train on sentence-per-line text. Returns (Model, [EpochReport]).");

  // eval
  m.def("binary_similarity",
        [](const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) { return binary_similarity(a, b); },
        py::arg("a"), py::arg("b"));
  m.def("spearman",
        [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); }, py::arg("x"),
        py::arg("y"));
  m.def("evaluate_wordsim",
        [](const Model& mo, const std::vector<std::tuple<std::string, std::string, double>>& pairs, std::size_t k) {
          std::vector<WordPairRecord> recs;
          for (const auto& [a, b, s] : pairs) recs.push_back({a, b, s});
          Embedder e(mo);
          const auto r = evaluate_wordsim(e, recs, k);
          return py::dict(py::arg("rho") = r.rho, py::arg("coverage") = r.coverage, py::arg("scored") = r.scored);
        },
        py::arg("model"), py::arg("pairs"), py::arg("k"));
  m.def("agglomerative_cluster",
        [](const std::vector<BinaryCode>& codes, std::size_t clusters) { return agglomerative_cluster(codes, clusters); },
        py::arg("codes"), py::arg("clusters"));
  m.def("cluster_quality",
        [](const std::vector<BinaryCode>& codes, const std::vector<std::uint32_t>& assignment) {
          const auto q = cluster_quality(codes, assignment);
          return py::dict(py::arg("intra") = q.intra, py::arg("inter") = q.inter,
                          py::arg("intra_mean") = q.intra_mean, py::arg("intra_std") = q.intra_std,
                          py::arg("inter_mean") = q.inter_mean, py::arg("inter_std") = q.inter_std);
        },
        py::arg("codes"), py::arg("assignment"));
  m.def("cluster_vocabulary",
        [](const Model& mo, std::size_t clusters, std::size_t k, std::size_t max_words) {
          Embedder e(mo);
          const auto r = cluster_vocabulary(e, clusters, k, max_words);
          std::vector<std::string> words;
          for (auto id : r.words) words.push_back(mo.vocab.token(id));
          return py::dict(py::arg("words") = words, py::arg("assignment") = r.assignment,
                          py::arg("intra_mean") = r.quality.intra_mean,
                          py::arg("inter_mean") = r.quality.inter_mean);
        },
        py::arg("model"), py::arg("clusters") = 200, py::arg("k") = 32, py::arg("max_words") = 2000);
  m.def("binarize_topk",
        [](const std::vector<std::vector<double>>& v, std::size_t k) { return binarize_topk(v, k); },
        py::arg("vectors"), py::arg("k"));
}
