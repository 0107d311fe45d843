// wcd: featurize / gen-corpus / train / eval / score / bench front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "wcd/corpus.hpp"
#include "wcd/evaluation.hpp"
#include "wcd/hashing.hpp"
#include "wcd/models.hpp"
#include "wcd/training.hpp"

namespace fs = std::filesystem;
using namespace wcd;

namespace {

// Raised for bad data (as opposed to bad flags or internal bugs).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<uint8_t> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Expands directories (non-recursively sorted for determinism) into files.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& raw : inputs) {
    fs::path p(raw);
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file()) files.push_back(e.path());
    } else {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::array<uint8_t, 32> hash_bytes(const std::vector<uint8_t>& content) {
  std::string hex = sha256_hex(content);
  std::array<uint8_t, 32> out{};
  for (int i = 0; i < 32; i++)
    out[i] = static_cast<uint8_t>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
  return out;
}

// Runs fn(i) for i in [0, n) across `jobs` threads; output slots keep the
// result order independent of the schedule.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (int i = 0; i < n; i++) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; t++)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

int cmd_featurize(const std::vector<std::string>& inputs,
                  const std::string& out, int jobs) {
  std::vector<fs::path> files = expand_inputs(inputs);
  if (files.empty()) {
    std::cerr << "warning: no input files\n";
    write_feature_cache(out, {});
    return 0;
  }
  std::vector<FeatureCacheRecord> records(files.size());
  std::vector<size_t> token_counts(files.size());
  std::vector<char> ok(files.size(), 0);
  parallel_for(static_cast<int>(files.size()), jobs, [&](int i) {
    std::vector<uint8_t> content;
    try {
      content = read_file(files[i]);
    } catch (const DataError&) {
      return;  // reported below, in order
    }
    TokenStream ts = tokenize(content);
    records[i].doc_hash = hash_bytes(content);
    records[i].bags = bag_chunks(ts, plan_chunks(ts.tokens.size()));
    token_counts[i] = ts.tokens.size();
    ok[i] = 1;
  });
  std::vector<FeatureCacheRecord> kept;
  for (size_t i = 0; i < files.size(); i++) {
    if (!ok[i]) {
      std::cerr << "warning: skipped unreadable " << files[i].string() << "\n";
      continue;
    }
    std::cout << files[i].string() << "\t" << token_counts[i] << " tokens\n";
    kept.push_back(std::move(records[i]));
  }
  if (kept.empty()) throw DataError("no input file could be read");
  write_feature_cache(out, kept);
  return 0;
}

int cmd_gen_corpus(const std::string& out, const std::string& spec_path,
                   uint64_t seed, int n_documents) {
  SyntheticSpec spec;
  if (!spec_path.empty()) spec = load_synthetic_spec(spec_path);
  if (seed != 0) spec.seed = seed;
  if (n_documents > 0) spec.n_documents = n_documents;
  Manifest m = generate_synthetic(spec);
  write_corpus(m, out);
  int n_mal = 0;
  for (const auto& r : m.records)
    if (r.label == Label::kMalicious) n_mal++;
  std::cout << "wrote " << m.records.size() << " documents (" << n_mal
            << " malicious) to " << out << "\n";
  return 0;
}

// Chronological tail of the train split held out for early stopping.
void split_validation(const Manifest& m, std::vector<int>& train,
                      std::vector<int>& val, double val_fraction) {
  std::stable_sort(train.begin(), train.end(), [&](int a, int b) {
    return m.records[a].first_seen < m.records[b].first_seen;
  });
  size_t n_val = static_cast<size_t>(train.size() * val_fraction);
  n_val = std::max<size_t>(1, std::min(n_val, train.size() - 1));
  val.assign(train.end() - n_val, train.end());
  train.resize(train.size() - n_val);
}

void require_both_classes(const Manifest& m, const std::vector<int>& idx,
                          const std::string& what) {
  bool pos = false, neg = false;
  for (int i : idx)
    (m.records[i].label == Label::kMalicious ? pos : neg) = true;
  if (!pos || !neg)
    throw DataError(what + " split does not contain both classes");
}

int cmd_train(const std::string& manifest_path, int64_t cutoff,
              const std::string& variant_name_str, uint64_t seed,
              const std::string& out, int epochs, int patience, int batch,
              int jobs, double val_fraction) {
  auto variant = variant_from_name(variant_name_str);
  if (!variant) throw DataError("unknown variant: " + variant_name_str);
  std::vector<std::string> warnings;
  Manifest m = load_manifest(manifest_path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  TimeSplit split = time_split(m, cutoff, kTwoMonthsSeconds);
  for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
  if (split.train.empty()) throw DataError("empty train split");
  std::vector<int> train_idx = split.train, val_idx;
  split_validation(m, train_idx, val_idx, val_fraction);
  require_both_classes(m, train_idx, "train");
  require_both_classes(m, val_idx, "validation");

  ModelDims dims;
  auto registry = tag_registry(m, dims.heads);
  Dataset train_set =
      build_dataset(*variant, m, train_idx, registry, dims.heads, jobs);
  Dataset val_set =
      build_dataset(*variant, m, val_idx, registry, dims.heads, jobs);

  TrainConfig cfg;
  cfg.seed = seed;
  cfg.max_epochs = epochs;
  cfg.patience = patience;
  cfg.batch_size = batch;

  if (*variant == Variant::kLrBot) {
    LrBotResult r = train_lr_bot({}, dims, train_set, val_set, cfg);
    save_model(out, r.model);
    std::cout << "lr_bot grid pick: l1=" << r.l1 << " l2=" << r.l2
              << " val_auc=" << r.best_val_auc << "\n";
  } else {
    TrainResult r = train(*variant, dims, train_set, val_set, cfg);
    save_model(out, r.model);
    write_history(out + ".history.jsonl", r.history);
    std::cout << "best epoch " << r.best_epoch
              << " val_auc=" << r.best_val_auc << "\n";
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& manifest_path,
             int64_t cutoff, double fpr, const std::string& out, int jobs) {
  Model m = load_model(model_path);
  InferenceModel im = to_inference(m);
  Manifest manifest = load_manifest(manifest_path);
  TimeSplit split = time_split(manifest, cutoff, kTwoMonthsSeconds);
  if (split.test.empty()) throw DataError("empty test split");
  require_both_classes(manifest, split.test, "test");
  auto registry = tag_registry(manifest, m.dims.heads);
  Dataset test_set =
      build_dataset(m.tag, manifest, split.test, registry, m.dims.heads, jobs);
  std::vector<double> scores = score_dataset(im, test_set);
  std::vector<ScoredPoint> points;
  for (int i = 0; i < test_set.size(); i++)
    points.push_back({scores[i], test_set.labels(i, 0) > 0.5 ? 1 : 0,
                      test_set.tags[i]});
  RocResult r = roc(points);
  DrAtFprResult dr = dr_at_fpr(points, fpr);
  auto families = family_report(points, dr.threshold);

  fs::create_directories(out);
  write_roc((fs::path(out) / "roc.txt").string(), r);
  nlohmann::json fam = nlohmann::json::array();
  for (const auto& row : families)
    fam.push_back({{"family", row.family},
                   {"detection_rate", row.detection_rate},
                   {"prevalence_pct", row.prevalence_pct}});
  nlohmann::json report{{"version", 1},
                        {"model", model_path},
                        {"variant", variant_name(m.tag)},
                        {"test_documents", test_set.size()},
                        {"auc", r.auc},
                        {"fpr_target", fpr},
                        {"detection_rate", dr.detection_rate},
                        {"threshold", dr.threshold},
                        {"realized_fpr", dr.realized_fpr},
                        {"low_resolution", dr.low_resolution},
                        {"families", fam}};
  std::ofstream rep(fs::path(out) / "report.json");
  rep << report.dump(2) << "\n";
  std::cout << "auc=" << r.auc << " dr@" << fpr << "=" << dr.detection_rate
            << "\n";
  return 0;
}

int cmd_score(const std::string& model_path,
              const std::vector<std::string>& inputs, int jobs, int top_k) {
  Model m = load_model(model_path);
  InferenceModel im = to_inference(m);
  std::vector<fs::path> files = expand_inputs(inputs);
  if (files.empty()) throw DataError("no input files");
  std::vector<Eigen::RowVectorXf> probs(files.size());
  parallel_for(static_cast<int>(files.size()), jobs, [&](int i) {
    std::vector<uint8_t> content = read_file(files[i]);
    Eigen::MatrixXf feats = features_for_variant(m.tag, tokenize(content));
    probs[i] = im.forward(feats).row(0);
  });
  for (size_t i = 0; i < files.size(); i++) {
    std::cout << files[i].string() << "\tmalicious=" << probs[i](0);
    std::vector<int> order;
    for (int h = 1; h < probs[i].size(); h++) order.push_back(h);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return probs[i](a) > probs[i](b); });
    for (int k = 0; k < top_k && k < static_cast<int>(order.size()); k++)
      std::cout << "\thead" << order[k] << "=" << probs[i](order[k]);
    std::cout << "\n";
  }
  return 0;
}

int cmd_bench(const std::string& model_path, const std::string& manifest_path,
              int batch, const std::string& hardware, const std::string& out) {
  Model m = load_model(model_path);
  InferenceModel im = to_inference(m);
  Manifest manifest = load_manifest(manifest_path);
  std::vector<std::vector<uint8_t>> docs;
  for (const auto& rec : manifest.records)
    docs.push_back(read_content(manifest, rec));
  if (docs.empty()) throw DataError("empty corpus");
  BenchReport r = bench_throughput(im, docs, batch);
  r.hardware = hardware;
  if (!out.empty()) write_bench_report(out, r);
  std::cout << r.pages_per_sec << " pages/sec wall, " << r.pages_per_cpu_sec
            << " pages/sec of CPU (batch " << batch << ", p50 " << r.p50_ms
            << " ms, p99 " << r.p99_ms << " ms)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical web-content malware detector"};
  app.require_subcommand(1);

  std::vector<std::string> inputs;
  std::string out, spec_path, manifest_path, model_path, variant = "proposed";
  std::string hardware = "unspecified";
  uint64_t seed = 1;
  int64_t cutoff = 0;
  int jobs = 1, n_documents = 0, epochs = 200, patience = 10, batch = 64;
  int top_k = 3;
  double fpr = 0.001, val_fraction = 0.2;

  auto* feat = app.add_subcommand("featurize", "write a feature cache");
  feat->add_option("inputs", inputs, "files or directories")->required();
  feat->add_option("--out", out, "cache path")->required();
  feat->add_option("--jobs", jobs);

  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--spec", spec_path, "JSON spec overriding the defaults");
  gen->add_option("--seed", seed);
  gen->add_option("--documents", n_documents);

  auto* tr = app.add_subcommand("train", "train one model variant");
  tr->add_option("--manifest", manifest_path)->required();
  tr->add_option("--cutoff", cutoff, "train/test boundary (epoch seconds)")
      ->required();
  tr->add_option("--variant", variant,
                 "proposed|flat_sequential|flattened_ff|ff_bot|lr_bot");
  tr->add_option("--seed", seed);
  tr->add_option("--out", out, "model file")->required();
  tr->add_option("--epochs", epochs);
  tr->add_option("--patience", patience);
  tr->add_option("--batch", batch);
  tr->add_option("--jobs", jobs);
  tr->add_option("--val-fraction", val_fraction);

  auto* ev = app.add_subcommand("eval", "evaluate a model on the test window");
  ev->add_option("--model", model_path)->required();
  ev->add_option("--manifest", manifest_path)->required();
  ev->add_option("--cutoff", cutoff)->required();
  ev->add_option("--fpr", fpr, "false-positive-rate target");
  ev->add_option("--out", out, "report directory")->required();
  ev->add_option("--jobs", jobs);

  auto* sc = app.add_subcommand("score", "score documents");
  sc->add_option("--model", model_path)->required();
  sc->add_option("inputs", inputs, "files or directories")->required();
  sc->add_option("--jobs", jobs);
  sc->add_option("--top", top_k, "tag heads to print");

  auto* be = app.add_subcommand("bench", "measure scoring throughput");
  be->add_option("--model", model_path)->required();
  be->add_option("--manifest", manifest_path)->required();
  be->add_option("--batch", batch);
  be->add_option("--hardware", hardware, "descriptor recorded in the report");
  be->add_option("--out", out, "report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (feat->parsed()) return cmd_featurize(inputs, out, jobs);
    if (gen->parsed()) return cmd_gen_corpus(out, spec_path, seed, n_documents);
    if (tr->parsed())
      return cmd_train(manifest_path, cutoff, variant, seed, out, epochs,
                       patience, batch, jobs, val_fraction);
    if (ev->parsed())
      return cmd_eval(model_path, manifest_path, cutoff, fpr, out, jobs);
    if (sc->parsed()) return cmd_score(model_path, inputs, jobs, top_k);
    if (be->parsed())
      return cmd_bench(model_path, manifest_path, batch, hardware, out);
  } catch (const std::runtime_error& e) {
    // bad files/formats/splits surface as runtime_error from the library
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (...) {
    std::cerr << "internal error\n";
    return 3;
  }
  return 1;
}
