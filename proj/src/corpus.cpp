#include "wcd/corpus.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace wcd {

namespace fs = std::filesystem;

Label label_from_detections(int detection_count) {
  if (detection_count < 0)
    throw std::invalid_argument("detection count must be non-negative");
  if (detection_count == 0) return Label::kBenign;
  if (detection_count <= 2) return Label::kIndeterminate;
  return Label::kMalicious;
}

TimeSplit time_split(const Manifest& manifest, int64_t cutoff,
                     int64_t horizon_seconds) {
  TimeSplit split;
  for (int i = 0; i < static_cast<int>(manifest.records.size()); i++) {
    const auto& rec = manifest.records[i];
    if (rec.label == Label::kIndeterminate) continue;
    if (rec.first_seen < cutoff)
      split.train.push_back(i);
    else if (rec.first_seen < cutoff + horizon_seconds)
      split.test.push_back(i);
  }
  if (split.train.empty()) split.warnings.push_back("empty train split");
  if (split.test.empty()) split.warnings.push_back("empty test split");
  return split;
}

std::string sha256_hex(const std::vector<uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                  nullptr))
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; i++) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Manifest load_manifest(const std::string& path,
                       std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  Manifest manifest;
  manifest.base_dir = fs::path(path).parent_path().string();
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    line_no++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("hash,", 0) == 0) continue;  // header row
    }
    auto fields = split_on(line, ',');
    if (fields.size() != 5)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 5 fields, got " +
                               std::to_string(fields.size()));
    DocumentRecord rec;
    rec.sha256_hex = fields[0];
    rec.path = fields[1];
    if (rec.sha256_hex.size() != 64 ||
        rec.sha256_hex.find_first_not_of("0123456789abcdef") !=
            std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed content hash");
    try {
      rec.first_seen = std::stoll(fields[2]);
      rec.detection_count = std::stoi(fields[3]);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed numeric field");
    }
    rec.label = label_from_detections(rec.detection_count);
    if (!fields[4].empty())
      for (auto& tag : split_on(fields[4], ';'))
        if (!tag.empty()) rec.tags.push_back(tag);
    if (!seen.insert(rec.sha256_hex).second) {
      if (warnings)
        warnings->push_back(path + ":" + std::to_string(line_no) +
                            ": duplicate hash " + rec.sha256_hex +
                            " dropped (earlier record kept)");
      continue;
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void save_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << "hash,path,first_seen,detection_count,tags\n";
  for (const auto& rec : manifest.records) {
    out << rec.sha256_hex << ',' << rec.path << ',' << rec.first_seen << ','
        << rec.detection_count << ',';
    for (size_t i = 0; i < rec.tags.size(); i++) {
      if (i) out << ';';
      out << rec.tags[i];
    }
    out << '\n';
  }
}

std::vector<uint8_t> read_content(const Manifest& manifest,
                                  const DocumentRecord& rec) {
  if (!rec.content.empty() || rec.path.empty()) return rec.content;
  fs::path p = fs::path(rec.path);
  if (p.is_relative() && !manifest.base_dir.empty())
    p = fs::path(manifest.base_dir) / p;
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw std::runtime_error("missing content file for " + rec.sha256_hex +
                             ": " + p.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>());
}

namespace {

// Random word of letters, length biased toward short tokens but covering
// all eight length buckets.
std::string random_word(nn::Rng& rng) {
  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz";
  size_t len = 1 + rng.uniform_int(4) + rng.uniform_int(4) + rng.uniform_int(4) +
               (rng.uniform() < 0.1 ? rng.uniform_int(12) : 0);
  std::string w;
  for (size_t i = 0; i < len; i++) w.push_back(alphabet[rng.uniform_int(26)]);
  return w;
}

double lognormal(nn::Rng& rng, double mu, double sigma) {
  // Box-Muller on two uniforms from the shared engine.
  double u1 = std::max(rng.uniform(), 1e-12);
  double u2 = rng.uniform();
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  return std::exp(mu + sigma * z);
}

const char* kSeparators[] = {" ", "\n", "><", "=\"", "\" ", "> <", "; ",
                             " </", "('", "')"};

}  // namespace

Manifest generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_documents < 1 || spec.families < 1 ||
      spec.malicious_fraction < 0.0 || spec.malicious_fraction > 1.0)
    throw std::invalid_argument("invalid synthetic spec");
  nn::Rng rng(spec.seed);

  // Vocabularies. A fixed HTML scaffold pool keeps the tokenizer exercised
  // on realistic markup; the rest is random words.
  std::vector<std::string> benign_vocab = {
      "html", "head", "body", "div",    "span",  "href",  "class", "style",
      "script", "src", "img",  "table", "tr",    "td",    "li",    "ul",
      "meta",   "http", "https", "www", "com",   "title", "link",  "rel",
      "stylesheet", "text", "css", "javascript", "function", "var", "id",
      "width", "height", "input", "form", "button", "charset", "utf",  "8"};
  while (static_cast<int>(benign_vocab.size()) < spec.benign_vocab)
    benign_vocab.push_back(random_word(rng));

  // Family trigger vocabularies: half fresh words, half borrowed from the
  // benign vocabulary so presence alone is not separating.
  std::vector<std::string> family_names;
  std::vector<std::vector<std::string>> family_tokens(spec.families);
  for (int f = 0; f < spec.families; f++) {
    family_names.push_back("family_" + std::to_string(f));
    // Dispersed families borrow every token from the benign vocabulary:
    // only the joint elevation of the whole set over a wide window marks
    // them, which single-token or single-chunk views cannot resolve.
    bool all_borrowed = f < spec.dispersed_families;
    for (int i = 0; i < spec.tokens_per_family; i++) {
      if (!all_borrowed && i % 2 == 0)
        family_tokens[f].push_back(random_word(rng));
      else
        family_tokens[f].push_back(
            benign_vocab[rng.uniform_int(benign_vocab.size())]);
    }
  }
  // Pool of all trigger tokens for the benign background rate.
  std::vector<std::string> trigger_pool;
  for (const auto& toks : family_tokens)
    trigger_pool.insert(trigger_pool.end(), toks.begin(), toks.end());

  auto draw_background = [&]() -> const std::string& {
    if (!trigger_pool.empty() && rng.uniform() < spec.trigger_background_rate)
      return trigger_pool[rng.uniform_int(trigger_pool.size())];
    return benign_vocab[rng.uniform_int(benign_vocab.size())];
  };

  Manifest manifest;
  for (int d = 0; d < spec.n_documents; d++) {
    int n_tokens = static_cast<int>(
        lognormal(rng, spec.log_len_mu, spec.log_len_sigma));
    n_tokens = std::clamp(n_tokens, spec.min_tokens, spec.max_tokens);
    bool malicious = rng.uniform() < spec.malicious_fraction;

    std::vector<std::string> tokens(n_tokens);
    for (int i = 0; i < n_tokens; i++) tokens[i] = draw_background();

    DocumentRecord rec;
    if (malicious) {
      int family = static_cast<int>(rng.uniform_int(spec.families));
      int want = spec.snippet_min +
                 static_cast<int>(rng.uniform_int(
                     static_cast<uint64_t>(spec.snippet_max - spec.snippet_min + 1)));
      int cap = std::max(
          1, static_cast<int>(spec.snippet_cap_fraction * n_tokens));
      int snippet_len = std::min(want, cap);
      bool dispersed = family < spec.dispersed_families;
      if (snippet_len > 0 && !family_tokens[family].empty()) {
        // window the snippet occupies, in tokens
        int window = dispersed
                         ? std::min(n_tokens, std::max(snippet_len, n_tokens / 4))
                         : snippet_len;
        int start = static_cast<int>(
            rng.uniform_int(static_cast<uint64_t>(n_tokens - window + 1)));
        // choose snippet_len distinct-ish slots inside the window
        for (int i = 0; i < snippet_len; i++) {
          int pos = dispersed
                        ? start + static_cast<int>(rng.uniform_int(window))
                        : start + i;
          tokens[pos] =
              family_tokens[family][rng.uniform_int(family_tokens[family].size())];
        }
      }
      rec.detection_count = 3 + static_cast<int>(rng.uniform_int(5));
      rec.tags.push_back(family_names[family]);
    } else {
      rec.detection_count = 0;
    }
    rec.label = label_from_detections(rec.detection_count);

    // Render to bytes: light HTML scaffolding around separator-joined tokens.
    std::string content = "<html><body ";
    for (int i = 0; i < n_tokens; i++) {
      content += tokens[i];
      content += kSeparators[rng.uniform_int(std::size(kSeparators))];
    }
    content += "></body></html>";
    rec.content.assign(content.begin(), content.end());
    rec.sha256_hex = sha256_hex(rec.content);
    rec.first_seen = spec.time_start + static_cast<int64_t>(d) * spec.time_step;
    rec.path = "pages/" + rec.sha256_hex.substr(0, 16) + ".html";
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void write_corpus(const Manifest& manifest, const std::string& dir) {
  fs::create_directories(dir);
  Manifest on_disk = manifest;
  for (auto& rec : on_disk.records) {
    fs::path p = fs::path(dir) / rec.path;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out.write(reinterpret_cast<const char*>(rec.content.data()),
              static_cast<std::streamsize>(rec.content.size()));
  }
  save_manifest((fs::path(dir) / "manifest.csv").string(), on_disk);
}

SyntheticSpec load_synthetic_spec(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open spec: " + json_path);
  nlohmann::json j = nlohmann::json::parse(in);
  SyntheticSpec spec;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("n_documents", spec.n_documents);
  get("malicious_fraction", spec.malicious_fraction);
  get("log_len_mu", spec.log_len_mu);
  get("log_len_sigma", spec.log_len_sigma);
  get("min_tokens", spec.min_tokens);
  get("max_tokens", spec.max_tokens);
  get("snippet_min", spec.snippet_min);
  get("snippet_max", spec.snippet_max);
  get("snippet_cap_fraction", spec.snippet_cap_fraction);
  get("benign_vocab", spec.benign_vocab);
  get("tokens_per_family", spec.tokens_per_family);
  get("families", spec.families);
  get("dispersed_families", spec.dispersed_families);
  get("trigger_background_rate", spec.trigger_background_rate);
  get("seed", spec.seed);
  get("time_start", spec.time_start);
  get("time_step", spec.time_step);
  return spec;
}

}  // namespace wcd
