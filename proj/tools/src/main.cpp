#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "flyhash/corpus.hpp"
#include "flyhash/error.hpp"
#include "flyhash/eval.hpp"
#include "flyhash/model.hpp"
#include "flyhash/rng.hpp"
#include "flyhash/trainer.hpp"
#include "manifest.hpp"

#ifndef FLYHASH_VERSION
#define FLYHASH_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace flyhash::cli {
namespace {

std::uint32_t default_workers() {
  if (const char* env = std::getenv("FLYHASH_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::uint32_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared by every subcommand: the manifest under construction and where the
// command's report goes.
struct Run {
  RunManifest manifest;
  std::string output;  // empty: report to stdout, no manifest
  bool table = false;

  /// Writes `report` to the output file (plus manifest) or prints it.
  void emit(const json& report, const std::string& table_text = {}) {
    const std::string text = table && !table_text.empty() ? table_text : report.dump(2) + "\n";
    if (output.empty()) {
      std::cout << text;
      return;
    }
    write_text(output, text);
    manifest.add_artifact(output);
    finish(output);
  }

  void finish(const fs::path& primary) { manifest.write(manifest_path_for(primary)); }
};

Model load(Run& run, const std::string& path) {
  run.manifest.add_input(path);
  return load_model_file(path);
}

/// Query w-gram from either --word or --context/--target-index.
WGram make_query(Embedder& emb, const std::string& word, const std::string& context,
                 std::optional<std::size_t> target_index, std::uint32_t w) {
  std::vector<std::string> sentence;
  std::size_t idx = 0;
  if (!word.empty()) {
    sentence = {word};
    w = 0;
  } else {
    std::istringstream ss(context);
    for (std::string t; ss >> t;) sentence.push_back(t);
    if (!target_index) throw Error(ErrorCode::kConfig, "--context needs --target-index");
    idx = *target_index;
    if (idx >= sentence.size())
      throw Error(ErrorCode::kIdOutOfRange, "target index " + std::to_string(idx) +
                                                " outside a sentence of " +
                                                std::to_string(sentence.size()) + " tokens");
  }
  auto g = emb.query_wgram(sentence, idx, w);
  if (!g) throw Error(ErrorCode::kIdOutOfRange, "target word '" + sentence[idx] + "' is not in the vocabulary");
  return *g;
}

json units_json(const std::vector<UnitId>& units) {
  json a = json::array();
  for (auto u : units) a.push_back(u);
  return a;
}

// ---------------------------------------------------------------- commands

struct PreprocessOpts {
  std::vector<std::string> inputs;
  std::string output;
};

void cmd_preprocess(Run& run, const PreprocessOpts& o) {
  std::string out;
  std::size_t lines = 0;
  for (const auto& in : o.inputs) {
    run.manifest.add_input(in);
    for (const auto& s : split_sentences(read_text(in))) {
      out += s;
      out.push_back('\n');
      ++lines;
    }
  }
  if (lines == 0)
    std::cerr << json{{"warning", "empty_output"}, {"message", "no sentences found in input"}}.dump() << '\n';
  write_text(o.output, out);
  run.manifest.config = {{"inputs", o.inputs}, {"output", o.output}};
  run.manifest.add_artifact(o.output);
  run.finish(o.output);
  std::cout << json{{"sentences", lines}, {"output", o.output}}.dump() << '\n';
}

struct VocabOpts {
  std::string corpus;
  std::uint32_t n_voc = 20000;
  std::string output;
};

void cmd_vocab(Run& run, const VocabOpts& o) {
  run.manifest.add_input(o.corpus);
  TokenCounts counts;
  for (const auto& line : read_lines(o.corpus)) count_tokens(tokenize(line), counts);
  const auto vocab = vocabulary_from_counts(counts, o.n_voc);
  save_vocabulary(o.output, vocab);
  run.manifest.config = {{"corpus", o.corpus}, {"vocab_size", o.n_voc}, {"output", o.output}};
  run.manifest.add_artifact(o.output);
  run.finish(o.output);
  std::cout << json{{"tokens", vocab.size()}, {"distinct_in_corpus", counts.size()}, {"output", o.output}}.dump()
            << '\n';
}

struct TrainOpts {
  std::string corpus;
  std::string vocab;
  std::string output;
  std::string resume;
  std::string sample_cache;
  std::string metrics;
  std::string scaling = "raw";
  bool checkpoints = true;
  TrainingConfig cfg;
};

SampleSet load_or_encode(const TrainOpts& o, const std::vector<std::string>& lines,
                         const Vocabulary& vocab) {
  if (o.sample_cache.empty()) return encode_corpus(lines, vocab, o.cfg.w);
  std::ostringstream vb;
  write_vocabulary(vb, vocab);
  const std::string key = sha256_bytes(sha256_file(o.corpus) + "\n" + sha256_bytes(vb.str()) + "\n" +
                                       std::to_string(o.cfg.w));
  const fs::path key_path = o.sample_cache + ".key";
  if (fs::exists(o.sample_cache) && fs::exists(key_path) && read_text(key_path) == key) {
    auto cache = deserialize_samples(read_text(o.sample_cache));
    if (cache.n_voc == vocab.size() && cache.w == o.cfg.w) return std::move(cache.samples);
  }
  SampleCache cache{static_cast<std::uint32_t>(vocab.size()), o.cfg.w, encode_corpus(lines, vocab, o.cfg.w)};
  write_text(o.sample_cache, serialize_samples(cache));
  write_text(key_path, key);
  return std::move(cache.samples);
}

fs::path checkpoint_path(const fs::path& out, std::uint32_t epochs_done) {
  char buf[32];
  std::snprintf(buf, sizeof buf, ".epoch%02u.flyw", static_cast<unsigned>(epochs_done));
  return out.parent_path() / (out.stem().string() + buf);
}

void cmd_train(Run& run, TrainOpts o) {
  if (o.scaling == "raw") o.cfg.scaling = UpdateScaling::kRaw;
  else if (o.scaling == "max-norm") o.cfg.scaling = UpdateScaling::kMaxNorm;
  else throw Error(ErrorCode::kConfig, "--scaling must be raw or max-norm");
  o.cfg.validate();

  run.manifest.add_input(o.corpus);
  const auto lines = read_lines(o.corpus);
  Vocabulary vocab;
  if (!o.vocab.empty()) {
    run.manifest.add_input(o.vocab);
    vocab = load_vocabulary(o.vocab);
  } else {
    TokenCounts counts;
    for (const auto& line : lines) count_tokens(tokenize(line), counts);
    vocab = vocabulary_from_counts(counts, o.cfg.n_voc);
  }
  o.cfg.n_voc = static_cast<std::uint32_t>(vocab.size());
  const auto p = occurrence_probabilities(vocab);
  const auto samples = load_or_encode(o, lines, vocab);
  if (samples.empty()) throw Error(ErrorCode::kEmptyCorpus, "empty corpus: no w-grams");

  WeightMatrix W;
  std::uint32_t first_epoch = 0;
  if (!o.resume.empty()) {
    Model m = load(run, o.resume);
    if (m.weights.units() != o.cfg.units || !(m.vocab == vocab) || m.header.w != o.cfg.w)
      throw Error(ErrorCode::kDimensionMismatch, "checkpoint does not match K, w or vocabulary");
    if (m.header.seed != o.cfg.seed)
      throw Error(ErrorCode::kConfig, "checkpoint was trained with seed " + std::to_string(m.header.seed));
    first_epoch = m.header.epochs_trained;
    if (first_epoch >= o.cfg.epochs) throw Error(ErrorCode::kNothingToTrain, "nothing to train");
    W = std::move(m.weights);
  } else {
    W = init_weights(o.cfg.units, o.cfg.n_voc, o.cfg.seed);
  }

  run.manifest.seed = o.cfg.seed;
  run.manifest.config = {{"corpus", o.corpus},       {"vocab", o.vocab},
                         {"resume", o.resume},       {"K", o.cfg.units},
                         {"w", o.cfg.w},             {"vocab_size", o.cfg.n_voc},
                         {"epochs", o.cfg.epochs},   {"lr0", o.cfg.lr0},
                         {"batch", o.cfg.minibatch}, {"seed", o.cfg.seed},
                         {"workers", o.cfg.workers}, {"probe_size", o.cfg.probe_size},
                         {"scaling", o.scaling},     {"checkpoints", o.checkpoints}};

  std::ofstream metrics;
  if (!o.metrics.empty()) {
    metrics.open(o.metrics, std::ios::trunc);
    if (!metrics) throw Error(ErrorCode::kIo, "cannot write " + o.metrics);
  }
  const ModelHeader base{o.cfg.w, o.cfg.seed, 0, kPrngXoshiro256ss};
  std::vector<fs::path> written;
  Trainer trainer(o.cfg, samples, p);
  trainer.run(W, first_epoch, [&](const EpochReport& r, const WeightMatrix& weights) {
    const std::string line = r.to_json();
    std::cout << line << std::endl;
    if (metrics) metrics << line << '\n' << std::flush;
    if (o.checkpoints) {
      ModelHeader h = base;
      h.epochs_trained = r.epoch + 1;
      const auto path = checkpoint_path(o.output, r.epoch + 1);
      save_model_file(path, {weights, vocab, h});
      written.push_back(path);
    }
  });
  ModelHeader h = base;
  h.epochs_trained = o.cfg.epochs;
  save_model_file(o.output, {std::move(W), vocab, h});
  run.manifest.add_artifact(o.output);
  for (const auto& c : written) run.manifest.add_artifact(c);
  if (!o.metrics.empty()) run.manifest.add_artifact(o.metrics, false);
  run.finish(o.output);
}

struct QueryOpts {
  std::string model;
  std::string word;
  std::string context;
  std::optional<std::size_t> target_index;
  std::optional<std::uint32_t> w;
  std::size_t k = 32;
};

void cmd_embed(Run& run, const QueryOpts& o, bool as_json) {
  const Model m = load(run, o.model);
  Embedder emb(m);
  const auto g = make_query(emb, o.word, o.context, o.target_index, o.w.value_or(m.header.w));
  const auto h = context_embedding(m.weights, g, o.k);
  run.manifest.config = {{"model", o.model}, {"word", o.word}, {"context", o.context},
                         {"k", o.k},         {"w", g.w}};
  std::string line;
  for (std::size_t i = 0; i < h.active_units.size(); ++i)
    line += (i ? " " : "") + std::to_string(h.active_units[i]);
  if (!as_json && run.output.empty()) {
    std::cout << line << '\n';
    return;
  }
  run.emit({{"target", m.vocab.token(g.target_id)}, {"k", o.k}, {"units", units_json(h.active_units)}});
}

void cmd_neighbors(Run& run, const QueryOpts& o, std::size_t q) {
  const Model m = load(run, o.model);
  Embedder emb(m);
  const auto g = make_query(emb, o.word, o.context, o.target_index, o.w.value_or(m.header.w));
  const auto nn = emb.nearest_neighbors(g, q, o.k);
  run.manifest.config = {{"model", o.model}, {"word", o.word}, {"context", o.context},
                         {"q", q},           {"k", o.k},       {"w", g.w}};
  json list = json::array();
  std::string table;
  for (std::size_t i = 0; i < nn.size(); ++i) {
    list.push_back({{"token", m.vocab.token(nn[i].word)}, {"similarity", nn[i].similarity}});
    char buf[256];
    std::snprintf(buf, sizeof buf, "%3zu  %-24s %.4f\n", i + 1, m.vocab.token(nn[i].word).c_str(),
                  nn[i].similarity);
    table += buf;
  }
  run.emit({{"target", m.vocab.token(g.target_id)}, {"neighbors", list}}, table);
}

void cmd_eval_sim(Run& run, const std::string& model, const std::string& pairs, std::size_t k) {
  const Model m = load(run, model);
  run.manifest.add_input(pairs);
  Embedder emb(m);
  const auto records = read_word_pairs(pairs);
  const auto r = evaluate_wordsim(emb, records, k);
  run.manifest.config = {{"model", model}, {"pairs", pairs}, {"k", k}};
  char buf[128];
  std::snprintf(buf, sizeof buf, "spearman %.4f  coverage %.3f (%zu/%zu)\n", r.rho, r.coverage,
                r.scored, records.size());
  run.emit({{"metric", "spearman"},
            {"rho", r.rho},
            {"coverage", r.coverage},
            {"scored", r.scored},
            {"total", records.size()},
            {"config", {{"k", k}}}},
           buf);
}

json config_json(const DisambiguationConfig& c) {
  return {{"theta", c.theta}, {"alpha", c.alpha}, {"q", c.q}, {"k", c.k}, {"w", c.w}};
}

struct GridOpts {
  std::string model;
  std::string pairs;
  std::size_t folds = 5;
  std::vector<double> thetas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint32_t> qs{10};
  std::vector<std::uint32_t> ks{32};
  std::vector<std::uint32_t> ws;
};

void cmd_eval_context(Run& run, const GridOpts& o, ContextTask task) {
  const Model m = load(run, o.model);
  run.manifest.add_input(o.pairs);
  Embedder emb(m);
  const auto records = read_context_pairs(o.pairs);
  TuningGrid grid;
  grid.thetas = o.thetas;
  grid.alphas = o.alphas;
  grid.qs = o.qs;
  grid.ks = o.ks;
  grid.ws = o.ws.empty() ? std::vector<std::uint32_t>{m.header.w} : o.ws;
  const auto cv = cross_validate(task, emb, records, o.folds, grid);
  run.manifest.config = {{"model", o.model},   {"pairs", o.pairs},   {"folds", o.folds},
                         {"thetas", grid.thetas}, {"alphas", grid.alphas}, {"qs", grid.qs},
                         {"ks", grid.ks},      {"ws", grid.ws}};
  json folds = json::array();
  std::string table;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const auto& x = cv.folds[f];
    folds.push_back({{"fold", f},
                     {"config", config_json(x.config)},
                     {"dev_metric", x.dev_metric},
                     {"test_metric", x.test_metric},
                     {"test_scored", x.test_scored}});
    char buf[200];
    std::snprintf(buf, sizeof buf, "fold %zu  dev %.4f  test %.4f  theta %.2f alpha %.2f q %u k %u w %u\n", f,
                  x.dev_metric, x.test_metric, x.config.theta, x.config.alpha, x.config.q, x.config.k,
                  x.config.w);
    table += buf;
  }
  const char* metric = task == ContextTask::kWic ? "accuracy" : "spearman";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s %.4f +- %.4f\n", metric, cv.mean, cv.stddev);
  table += buf;
  run.emit({{"metric", metric},
            {"mean", cv.mean},
            {"std", cv.stddev},
            {"records", records.size()},
            {"folds", folds}},
           table);
}

struct ClusterOpts {
  std::string model;
  std::size_t clusters = 200;
  std::size_t k = 32;
  std::size_t words = 2000;
  std::string output;
};

void cmd_cluster(Run& run, const ClusterOpts& o) {
  const Model m = load(run, o.model);
  Embedder emb(m);
  const auto c = cluster_vocabulary(emb, o.clusters, o.k, o.words);
  std::string assign;
  for (std::size_t i = 0; i < c.words.size(); ++i)
    assign += m.vocab.token(c.words[i]) + "\t" + std::to_string(c.assignment[i]) + "\n";
  write_text(o.output, assign);

  std::vector<std::size_t> sizes(c.quality.intra.size(), 0);
  for (auto a : c.assignment) ++sizes[a];
  json per = json::array();
  for (std::size_t j = 0; j < sizes.size(); ++j)
    per.push_back({{"cluster", j}, {"size", sizes[j]}, {"intra", c.quality.intra[j]}, {"inter", c.quality.inter[j]}});
  const json report{{"clusters", o.clusters},
                    {"words", c.words.size()},
                    {"k", o.k},
                    {"intra_mean", c.quality.intra_mean},
                    {"intra_std", c.quality.intra_std},
                    {"inter_mean", c.quality.inter_mean},
                    {"inter_std", c.quality.inter_std},
                    {"per_cluster", per}};
  const fs::path report_path = o.output + ".quality.json";
  write_text(report_path, report.dump(2) + "\n");
  run.manifest.config = {{"model", o.model}, {"clusters", o.clusters}, {"k", o.k}, {"words", o.words},
                         {"output", o.output}};
  run.manifest.add_artifact(o.output);
  run.manifest.add_artifact(report_path);
  run.finish(o.output);
  if (run.table) {
    std::printf("intra %.4f +- %.4f   inter %.4f +- %.4f   (%zu clusters, %zu words)\n", c.quality.intra_mean,
                c.quality.intra_std, c.quality.inter_mean, c.quality.inter_std, sizes.size(), c.words.size());
  } else {
    json brief = report;
    brief.erase("per_cluster");
    std::cout << brief.dump(2) << '\n';
  }
}

struct ProbeOpts {
  std::string model;
  std::optional<UnitId> unit;
  std::string query;
  std::optional<std::size_t> target_index;
  std::optional<std::uint32_t> w;
  std::size_t top_m = 10;
  std::size_t units = 4;
  std::string block = "target";
};

json unit_words(const Model& m, UnitId unit, std::size_t top_m, Block block) {
  const auto dist = kc_word_distribution(m.weights, unit, block);
  std::vector<WordId> order(dist.size());
  for (WordId i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t n = std::min(top_m, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](WordId a, WordId b) { return dist[a] > dist[b] || (dist[a] == dist[b] && a < b); });
  json words = json::array();
  for (std::size_t i = 0; i < n; ++i) words.push_back({{"token", m.vocab.token(order[i])}, {"p", dist[order[i]]}});
  return words;
}

void cmd_probe_kc(Run& run, const ProbeOpts& o) {
  const Model m = load(run, o.model);
  Block block;
  if (o.block == "target") block = Block::kTarget;
  else if (o.block == "context") block = Block::kContext;
  else throw Error(ErrorCode::kConfig, "--block must be target or context");
  std::vector<UnitId> units;
  json query = nullptr;
  if (o.unit) {
    if (*o.unit >= m.weights.units())
      throw Error(ErrorCode::kIdOutOfRange, "unit " + std::to_string(*o.unit) + " >= K");
    units.push_back(*o.unit);
  } else {
    Embedder emb(m);
    std::vector<std::string> toks;
    std::istringstream ss(o.query);
    for (std::string t; ss >> t;) toks.push_back(t);
    const std::size_t idx = o.target_index.value_or(toks.size() / 2);
    const auto g = make_query(emb, "", o.query, idx, o.w.value_or(m.header.w));
    const auto acts = activations(m.weights, encode_wgram(g, m.vocab.size()).active_indices);
    std::vector<UnitId> order(acts.size());
    for (UnitId i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](UnitId a, UnitId b) { return acts[a] > acts[b]; });
    order.resize(std::min(o.units, order.size()));
    units = order;
    query = {{"sentence", o.query}, {"target", m.vocab.token(g.target_id)}};
  }
  json out = json::array();
  std::string table;
  for (auto u : units) {
    const auto words = unit_words(m, u, o.top_m, block);
    out.push_back({{"unit", u}, {"words", words}});
    table += "unit " + std::to_string(u) + ":";
    for (const auto& w : words) table += " " + w["token"].get<std::string>();
    table += "\n";
  }
  run.manifest.config = {{"model", o.model}, {"query", o.query}, {"top_m", o.top_m}, {"block", o.block}};
  run.emit({{"query", query}, {"block", o.block}, {"units", out}}, table);
}

struct BenchOpts {
  std::string corpus;
  std::vector<std::uint32_t> units{200, 400};
  std::vector<std::uint32_t> vocab_sizes{1000, 2000};
  std::vector<std::size_t> samples{50000, 100000};
  std::uint32_t repeats = 3;
  TrainingConfig cfg;
};

void cmd_bench(Run& run, BenchOpts o) {
  run.manifest.add_input(o.corpus);
  const auto lines = read_lines(o.corpus);
  std::vector<ScalingPoint> grid;
  for (auto K : o.units)
    for (auto n : o.vocab_sizes)
      for (auto s : o.samples) grid.push_back({K, n, s});
  o.cfg.epochs = 1;
  const auto rows = benchmark_scaling(lines, o.cfg, grid, o.repeats);
  json table_json = json::array();
  std::string table = "     K    N_voc    samples   s/epoch\n";
  for (const auto& r : rows) {
    table_json.push_back({{"K", r.point.units},
                          {"n_voc", r.point.n_voc},
                          {"samples", r.point.samples},
                          {"seconds_per_epoch", r.seconds_per_epoch}});
    char buf[128];
    std::snprintf(buf, sizeof buf, "%6u %8u %10zu %9.4f\n", r.point.units, r.point.n_voc, r.point.samples,
                  r.seconds_per_epoch);
    table += buf;
  }
  run.manifest.config = {{"corpus", o.corpus}, {"units", o.units},   {"vocab_sizes", o.vocab_sizes},
                         {"samples", o.samples}, {"w", o.cfg.w},      {"batch", o.cfg.minibatch},
                         {"lr0", o.cfg.lr0},   {"repeats", o.repeats}, {"workers", o.cfg.workers}};
  run.manifest.seed = o.cfg.seed;
  // Timings are measurements, not reproducible artifacts.
  if (!run.output.empty()) {
    write_text(run.output, table_json.dump(2) + "\n");
    run.manifest.add_artifact(run.output, false);
    run.finish(run.output);
  }
  if (run.table) std::cout << table;
  else std::cout << table_json.dump(2) << '\n';
}

int run_args(const std::vector<std::string>& args);

void cmd_replay(const std::string& manifest_path, bool force) {
  const auto m = RunManifest::read(manifest_path);
  const fs::path here = fs::current_path();
  fs::current_path(m.cwd);
  json inputs = json::array();
  bool changed = false;
  for (const auto& [path, digest] : m.inputs) {
    const bool same = fs::exists(path) && sha256_file(path) == digest;
    changed |= !same;
    inputs.push_back({{"path", path}, {"unchanged", same}});
  }
  if (changed && !force) {
    fs::current_path(here);
    throw Error(ErrorCode::kChecksumMismatch, "inputs changed since the manifest was written (use --force)");
  }
  const int rc = run_args(m.argv);
  json artifacts = json::array();
  bool ok = rc == 0;
  for (const auto& [path, digest] : m.artifacts) {
    if (digest.empty()) {
      artifacts.push_back({{"path", path}, {"match", nullptr}});
      continue;
    }
    const bool match = fs::exists(path) && sha256_file(path) == digest;
    ok &= match;
    artifacts.push_back({{"path", path}, {"match", match}});
  }
  fs::current_path(here);
  std::cout << json{{"replayed", m.command}, {"reproduced", ok}, {"inputs", inputs}, {"artifacts", artifacts}}.dump(2)
            << '\n';
  if (!ok) throw Error(ErrorCode::kChecksumMismatch, "replay did not reproduce every artifact");
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
}

// ---------------------------------------------------------------- wiring

int run_args(const std::vector<std::string>& args) {
  CLI::App app{"Sparse binary word embeddings from a winner-take-all network", "flyhash"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FLYHASH_VERSION);

  Run run;
  run.manifest.version = FLYHASH_VERSION;
  run.manifest.argv = args;
  run.manifest.cwd = fs::current_path().string();

  const std::uint32_t workers = default_workers();
  auto add_output = [&](CLI::App* sub, const char* what) {
    sub->add_option("-o,--output", run.output, what);
    sub->add_flag("--table", run.table, "Human-readable table instead of JSON");
  };
  auto add_training_flags = [](CLI::App* sub, TrainingConfig& cfg) {
    sub->add_option("--K", cfg.units, "Number of Kenyon cells (hidden units)")->capture_default_str();
    sub->add_option("--w", cfg.w, "Window size, odd and >= 3")->capture_default_str();
    sub->add_option("--lr0", cfg.lr0, "Initial learning rate")->capture_default_str();
    sub->add_option("--batch", cfg.minibatch, "Minibatch size")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Seed for every random draw")->capture_default_str();
    sub->add_option("--workers", cfg.workers, "Worker threads (default: FLYHASH_WORKERS or all cores)")
        ->capture_default_str();
  };

  PreprocessOpts pre;
  auto* s_pre = app.add_subcommand("preprocess", "Split raw text files into one sentence per line");
  s_pre->add_option("inputs", pre.inputs, "Raw text files")->required()->check(CLI::ExistingFile);
  s_pre->add_option("-o,--output", pre.output, "Sentence-per-line output")->required();

  VocabOpts voc;
  auto* s_voc = app.add_subcommand("vocab", "Build a vocabulary file from a corpus");
  s_voc->add_option("corpus", voc.corpus, "Sentence-per-line corpus")->required()->check(CLI::ExistingFile);
  s_voc->add_option("--vocab-size", voc.n_voc, "Number of most frequent words kept")->capture_default_str();
  s_voc->add_option("-o,--output", voc.output, "Vocabulary file")->required();

  TrainOpts tr;
  tr.cfg.workers = workers;
  auto* s_tr = app.add_subcommand("train", "Train a model");
  s_tr->add_option("corpus", tr.corpus, "Sentence-per-line corpus")->required()->check(CLI::ExistingFile);
  s_tr->add_option("--vocab", tr.vocab, "Vocabulary file (default: built from the corpus)")
      ->check(CLI::ExistingFile);
  s_tr->add_option("--vocab-size", tr.cfg.n_voc, "Vocabulary size when building from the corpus")
      ->capture_default_str();
  s_tr->add_option("--epochs", tr.cfg.epochs, "Total number of epochs")->capture_default_str();
  add_training_flags(s_tr, tr.cfg);
  s_tr->add_option("--probe-size", tr.cfg.probe_size, "Samples in the energy probe set")->capture_default_str();
  s_tr->add_option("--scaling", tr.scaling, "Update scaling: raw or max-norm")->capture_default_str();
  s_tr->add_option("--resume", tr.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  s_tr->add_option("--sample-cache", tr.sample_cache, "Encoded w-gram cache file (created if stale)");
  s_tr->add_option("--metrics", tr.metrics, "Also write per-epoch JSON lines here");
  s_tr->add_flag("!--no-checkpoints", tr.checkpoints, "Skip per-epoch checkpoint files");
  s_tr->add_option("-o,--output", tr.output, "Model file")->required();

  QueryOpts q;
  bool embed_json = false;
  std::size_t q_count = 10;
  auto add_query = [&](CLI::App* sub) {
    sub->add_option("model", q.model, "Model file")->required()->check(CLI::ExistingFile);
    auto* word = sub->add_option("--word", q.word, "Single word (static embedding)");
    auto* ctx = sub->add_option("--context", q.context, "Sentence for a context-dependent query");
    word->excludes(ctx);
    sub->add_option("--target-index", q.target_index, "Position of the target in --context");
    sub->add_option("--w", q.w, "Context window (default: the model's training window)");
    sub->add_option("-k,--hash-length", q.k, "Hash length")->capture_default_str();
  };
  auto* s_emb = app.add_subcommand("embed", "Print the hash of a word or a word in context");
  add_query(s_emb);
  s_emb->add_flag("--json", embed_json, "JSON output");
  s_emb->add_option("-o,--output", run.output, "Write a JSON report here");
  auto* s_nn = app.add_subcommand("neighbors", "Nearest vocabulary words in hash space");
  add_query(s_nn);
  s_nn->add_option("-q,--count", q_count, "Number of neighbours")->capture_default_str();
  add_output(s_nn, "Write the report here");

  std::string sim_model, sim_pairs;
  std::size_t sim_k = 32;
  auto* s_sim = app.add_subcommand("eval-sim", "Word-similarity evaluation (Spearman)");
  s_sim->add_option("model", sim_model, "Model file")->required()->check(CLI::ExistingFile);
  s_sim->add_option("pairs", sim_pairs, "word1<TAB>word2<TAB>score file")->required()->check(CLI::ExistingFile);
  s_sim->add_option("-k,--hash-length", sim_k, "Hash length")->capture_default_str();
  add_output(s_sim, "Write the report here");

  GridOpts grid;
  auto add_grid = [&](CLI::App* sub) {
    sub->add_option("model", grid.model, "Model file")->required()->check(CLI::ExistingFile);
    sub->add_option("pairs", grid.pairs, "sentence1<TAB>idx1<TAB>sentence2<TAB>idx2<TAB>label file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--folds", grid.folds, "Cross-validation folds")->capture_default_str();
    sub->add_option("--thetas", grid.thetas, "Threshold grid")->delimiter(',')->capture_default_str();
    sub->add_option("--alphas", grid.alphas, "Alpha grid")->delimiter(',')->capture_default_str();
    sub->add_option("--qs", grid.qs, "Neighbour-count grid")->delimiter(',')->capture_default_str();
    sub->add_option("--hash-lengths", grid.ks, "Hash-length grid")->delimiter(',')->capture_default_str();
    sub->add_option("--windows", grid.ws, "Window grid (default: the model's window)")->delimiter(',');
    add_output(sub, "Write the report here");
  };
  auto* s_wic = app.add_subcommand("eval-wic", "Word-in-context accuracy with cross-validated tuning");
  add_grid(s_wic);
  auto* s_scws = app.add_subcommand("eval-scws", "Contextual similarity (Spearman) with cross-validated tuning");
  add_grid(s_scws);

  ClusterOpts cl;
  auto* s_cl = app.add_subcommand("cluster", "Complete-link clustering of static word hashes");
  s_cl->add_option("model", cl.model, "Model file")->required()->check(CLI::ExistingFile);
  s_cl->add_option("-C,--clusters", cl.clusters, "Number of clusters")->capture_default_str();
  s_cl->add_option("-k,--hash-length", cl.k, "Hash length")->capture_default_str();
  s_cl->add_option("--words", cl.words, "Cluster the most frequent N words")->capture_default_str();
  s_cl->add_option("-o,--output", cl.output, "Assignment file (token<TAB>cluster)")->required();
  s_cl->add_flag("--table", run.table, "Human-readable summary instead of JSON");

  ProbeOpts pr;
  auto* s_pr = app.add_subcommand("probe-kc", "Words most associated with Kenyon cells");
  s_pr->add_option("model", pr.model, "Model file")->required()->check(CLI::ExistingFile);
  auto* unit = s_pr->add_option("--unit", pr.unit, "Unit index");
  auto* query = s_pr->add_option("--query", pr.query, "Sentence; probes its top activated units");
  unit->excludes(query);
  s_pr->add_option("--target-index", pr.target_index, "Target position in --query (default: middle)");
  s_pr->add_option("--w", pr.w, "Context window (default: the model's training window)");
  s_pr->add_option("--top-m", pr.top_m, "Words per unit")->capture_default_str();
  s_pr->add_option("--units", pr.units, "Units shown for --query")->capture_default_str();
  s_pr->add_option("--block", pr.block, "Weight block: target or context")->capture_default_str();
  add_output(s_pr, "Write the report here");

  BenchOpts be;
  be.cfg.workers = workers;
  be.cfg.lr0 = 1e-7;
  auto* s_be = app.add_subcommand("bench", "Time one training epoch over a grid of K, N_voc and sample count");
  s_be->add_option("corpus", be.corpus, "Sentence-per-line corpus")->required()->check(CLI::ExistingFile);
  s_be->add_option("--units", be.units, "K values")->delimiter(',')->capture_default_str();
  s_be->add_option("--vocab-sizes", be.vocab_sizes, "N_voc values")->delimiter(',')->capture_default_str();
  s_be->add_option("--samples", be.samples, "Sample counts")->delimiter(',')->capture_default_str();
  s_be->add_option("--repeats", be.repeats, "Timed repeats per point (minimum kept)")->capture_default_str();
  add_training_flags(s_be, be.cfg);
  add_output(s_be, "Write the JSON table here");

  std::string replay_path;
  bool replay_force = false;
  auto* s_rep = app.add_subcommand("replay", "Re-run a command from its manifest and verify the artifacts");
  s_rep->add_option("manifest", replay_path, "*.manifest.json")->required()->check(CLI::ExistingFile);
  s_rep->add_flag("--force", replay_force, "Run even if inputs changed");

  std::vector<const char*> argv{"flyhash"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*s_pre) {
      run.manifest.command = "preprocess";
      cmd_preprocess(run, pre);
    } else if (*s_voc) {
      run.manifest.command = "vocab";
      cmd_vocab(run, voc);
    } else if (*s_tr) {
      run.manifest.command = "train";
      cmd_train(run, tr);
    } else if (*s_emb) {
      run.manifest.command = "embed";
      cmd_embed(run, q, embed_json);
    } else if (*s_nn) {
      run.manifest.command = "neighbors";
      cmd_neighbors(run, q, q_count);
    } else if (*s_sim) {
      run.manifest.command = "eval-sim";
      cmd_eval_sim(run, sim_model, sim_pairs, sim_k);
    } else if (*s_wic) {
      run.manifest.command = "eval-wic";
      cmd_eval_context(run, grid, ContextTask::kWic);
    } else if (*s_scws) {
      run.manifest.command = "eval-scws";
      cmd_eval_context(run, grid, ContextTask::kScws);
    } else if (*s_cl) {
      run.manifest.command = "cluster";
      cmd_cluster(run, cl);
    } else if (*s_pr) {
      run.manifest.command = "probe-kc";
      cmd_probe_kc(run, pr);
    } else if (*s_be) {
      run.manifest.command = "bench";
      cmd_bench(run, be);
    } else if (*s_rep) {
      cmd_replay(replay_path, replay_force);
    }
  } catch (const Error& e) {
    print_error(std::string(error_code_name(e.code())), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace flyhash::cli

int main(int argc, char** argv) {
  return flyhash::cli::run_args(std::vector<std::string>(argv + 1, argv + argc));
}
