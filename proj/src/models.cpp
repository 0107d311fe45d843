#include "wcd/models.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "wcd/murmur3.hpp"

namespace wcd {

using nn::Mat;
using nn::Vec;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kProposed: return "proposed";
    case Variant::kFlatSequential: return "flat_sequential";
    case Variant::kFlattenedFf: return "flattened_ff";
    case Variant::kFfBot: return "ff_bot";
    case Variant::kLrBot: return "lr_bot";
  }
  return "unknown";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  for (Variant v : {Variant::kProposed, Variant::kFlatSequential,
                    Variant::kFlattenedFf, Variant::kFfBot, Variant::kLrBot})
    if (variant_name(v) == name) return v;
  return std::nullopt;
}

int Model::rows_per_doc() const {
  switch (tag) {
    case Variant::kProposed: return 2 * dims.leaves - 1;
    case Variant::kFlatSequential: return dims.leaves;
    default: return 1;
  }
}

int Model::input_dim() const {
  return inspector.empty() ? dims.flat_dim : dims.feature_dim;
}

std::vector<nn::Tensor*> Model::params() {
  std::vector<nn::Tensor*> out;
  auto add_block = [&](Block& b) {
    out.push_back(&b.ln.gain);
    out.push_back(&b.ln.shift);
    out.push_back(&b.fc.W);
    out.push_back(&b.fc.b);
  };
  for (auto& b : inspector) add_block(b);
  for (auto& b : trunk) add_block(b);
  out.push_back(&head.W);
  out.push_back(&head.b);
  return out;
}

void Model::zero_grad() {
  for (nn::Tensor* t : params()) t->zero_grad();
}

namespace {

Block make_block(const std::string& name, int in, int out, double dropout,
                 nn::Rng& rng) {
  Block b;
  b.ln = nn::LayerNorm(name + ".ln", in);
  b.fc = nn::Dense(name + ".fc", in, out);
  b.dropout_rate = dropout;
  nn::init_dense(b.fc, rng);
  return b;
}

}  // namespace

Model make_model(Variant v, const ModelDims& dims, nn::Rng& rng) {
  Model m;
  m.tag = v;
  m.dims = dims;
  const double dr = dims.dropout;
  switch (v) {
    case Variant::kProposed:
    case Variant::kFlatSequential:
      m.inspector.push_back(
          make_block("inspector.0", dims.feature_dim, dims.hidden, dr, rng));
      m.inspector.push_back(
          make_block("inspector.1", dims.hidden, dims.hidden, dr, rng));
      m.trunk.push_back(
          make_block("master.0", dims.hidden, dims.hidden, dr, rng));
      m.trunk.push_back(
          make_block("master.1", dims.hidden, dims.hidden, dr, rng));
      m.head = nn::Dense("head", dims.hidden, dims.heads);
      break;
    case Variant::kFlattenedFf:
    case Variant::kFfBot:
      m.trunk.push_back(
          make_block("trunk.0", dims.flat_dim, dims.hidden, dr, rng));
      m.trunk.push_back(
          make_block("trunk.1", dims.hidden, dims.hidden, dr, rng));
      m.trunk.push_back(
          make_block("master.0", dims.hidden, dims.hidden, dr, rng));
      m.trunk.push_back(
          make_block("master.1", dims.hidden, dims.hidden, dr, rng));
      m.head = nn::Dense("head", dims.hidden, dims.heads);
      break;
    case Variant::kLrBot:
      m.head = nn::Dense("head", dims.flat_dim, dims.heads);
      break;
  }
  nn::init_dense(m.head, rng);
  return m;
}

size_t param_count(const Model& m) {
  size_t n = 0;
  for (const nn::Tensor* t : const_cast<Model&>(m).params())
    n += static_cast<size_t>(t->value.size());
  return n;
}

size_t param_count(Variant v, const ModelDims& d) {
  auto block = [](size_t in, size_t out) { return 2 * in + in * out + out; };
  switch (v) {
    case Variant::kProposed:
    case Variant::kFlatSequential:
      return block(d.feature_dim, d.hidden) + 3 * block(d.hidden, d.hidden) +
             static_cast<size_t>(d.hidden) * d.heads + d.heads;
    case Variant::kFlattenedFf:
    case Variant::kFfBot:
      return block(d.flat_dim, d.hidden) + 3 * block(d.hidden, d.hidden) +
             static_cast<size_t>(d.hidden) * d.heads + d.heads;
    case Variant::kLrBot:
      return static_cast<size_t>(d.flat_dim) * d.heads + d.heads;
  }
  return 0;
}

Mat block_forward(const Mat& x, Block& blk, Mode mode, nn::Rng* rng,
                  BlockCache* cache) {
  BlockCache local;
  BlockCache& c = cache ? *cache : local;
  Mat h = nn::layer_norm_forward(x, blk.ln, &c.ln);
  if (mode == Mode::kTrain && blk.dropout_rate > 0.0) {
    if (c.mask.size() != 0 && c.mask.rows() == h.rows() &&
        c.mask.cols() == h.cols()) {
      h = h.cwiseProduct(c.mask);
    } else {
      if (!rng)
        throw std::invalid_argument("block_forward: training needs an rng");
      h = nn::dropout_forward_train(h, blk.dropout_rate, *rng, &c.mask);
    }
  }
  c.fc_input = h;
  c.pre_relu = nn::dense_forward(h, blk.fc);
  return nn::relu(c.pre_relu);
}

Mat block_backward(const Mat& dy, Block& blk, BlockCache& cache) {
  Mat dz = (cache.pre_relu.array() > 0.0).select(dy, 0.0);
  Mat dd = nn::dense_backward(cache.fc_input, dz, blk.fc);
  if (cache.mask.size() != 0) dd = dd.cwiseProduct(cache.mask);
  return nn::layer_norm_backward(dd, cache.ln, blk.ln);
}

Mat model_forward(Model& m, const Mat& X, Mode mode, nn::Rng* rng,
                  ForwardCache* cache) {
  const int R = m.rows_per_doc();
  if (X.rows() % R != 0 || X.cols() != m.input_dim())
    throw std::invalid_argument("model_forward: input shape mismatch");
  const int docs = static_cast<int>(X.rows()) / R;

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  if (c.inspector.size() != m.inspector.size())
    c.inspector.resize(m.inspector.size());
  if (c.trunk.size() != m.trunk.size()) c.trunk.resize(m.trunk.size());

  Mat h = X;
  if (!m.inspector.empty()) {
    for (size_t i = 0; i < m.inspector.size(); i++)
      h = block_forward(h, m.inspector[i], mode, rng, &c.inspector[i]);
    // Element-wise max over each document's node rows; ties go to the
    // lowest node index so gradient routing is deterministic.
    Mat pooled(docs, h.cols());
    c.argmax.resize(docs, h.cols());
    for (int d = 0; d < docs; d++) {
      for (Eigen::Index j = 0; j < h.cols(); j++) {
        double best = h(d * R, j);
        int best_r = 0;
        for (int r = 1; r < R; r++) {
          double v = h(d * R + r, j);
          if (v > best) {
            best = v;
            best_r = r;
          }
        }
        pooled(d, j) = best;
        c.argmax(d, j) = best_r;
      }
    }
    h = std::move(pooled);
  }
  for (size_t i = 0; i < m.trunk.size(); i++)
    h = block_forward(h, m.trunk[i], mode, rng, &c.trunk[i]);
  c.head_input = h;
  Mat probs = nn::sigmoid(nn::dense_forward(h, m.head));
  c.probs = probs;
  return probs;
}

double masked_bce_loss(const Mat& probs, const Mat& labels, const Mat& mask) {
  if (probs.rows() != labels.rows() || probs.cols() != labels.cols() ||
      mask.rows() != probs.rows() || mask.cols() != probs.cols())
    throw std::invalid_argument("masked_bce_loss: shape mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); i++) {
    double row_sum = 0.0;
    int known = 0;
    for (Eigen::Index j = 0; j < probs.cols(); j++) {
      if (mask(i, j) != 0.0) {
        row_sum += nn::bce_loss(probs(i, j), labels(i, j));
        known++;
      }
    }
    if (known == 0)
      throw std::invalid_argument("masked_bce_loss: all heads masked");
    total += row_sum / known;
  }
  return total / static_cast<double>(probs.rows());
}

void model_backward(Model& m, ForwardCache& c, const Mat& labels,
                    const Mat& mask) {
  const Mat& probs = c.probs;
  const int docs = static_cast<int>(probs.rows());
  Mat dlogits(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); i++) {
    double known = mask.row(i).sum();
    if (known == 0.0)
      throw std::invalid_argument("model_backward: all heads masked");
    for (Eigen::Index j = 0; j < probs.cols(); j++) {
      dlogits(i, j) = mask(i, j) == 0.0
                          ? 0.0
                          : (probs(i, j) - labels(i, j)) / (known * docs);
    }
  }
  Mat dh = nn::dense_backward(c.head_input, dlogits, m.head);
  for (size_t i = m.trunk.size(); i-- > 0;)
    dh = block_backward(dh, m.trunk[i], c.trunk[i]);
  if (!m.inspector.empty()) {
    const int R = m.rows_per_doc();
    Mat dnodes = Mat::Zero(static_cast<Eigen::Index>(docs) * R, dh.cols());
    for (int d = 0; d < docs; d++)
      for (Eigen::Index j = 0; j < dh.cols(); j++)
        dnodes(d * R + c.argmax(d, j), j) = dh(d, j);
    for (size_t i = m.inspector.size(); i-- > 0;)
      dnodes = block_backward(dnodes, m.inspector[i], c.inspector[i]);
  }
}

std::pair<Vec, Eigen::VectorXi> inspector_forward(const Mat& nodes, Model& m,
                                                  Mode mode, nn::Rng* rng) {
  if (m.inspector.empty())
    throw std::invalid_argument("inspector_forward: variant has no inspector");
  Mat h = nodes;
  for (auto& blk : m.inspector) h = block_forward(h, blk, mode, rng, nullptr);
  Vec pooled(h.cols());
  Eigen::VectorXi arg(h.cols());
  for (Eigen::Index j = 0; j < h.cols(); j++) {
    Eigen::Index r;
    pooled(j) = h.col(j).maxCoeff(&r);
    // maxCoeff returns the first maximal index, matching lowest-node ties.
    arg(j) = static_cast<int>(r);
  }
  return {pooled, arg};
}

Vec master_forward(const Vec& pooled, Model& m, Mode mode, nn::Rng* rng) {
  Mat h = pooled.transpose();
  for (auto& blk : m.trunk) h = block_forward(h, blk, mode, rng, nullptr);
  Mat probs = nn::sigmoid(nn::dense_forward(h, m.head));
  return probs.row(0).transpose();
}

int InferenceModel::rows_per_doc() const {
  switch (tag) {
    case Variant::kProposed: return 2 * dims.leaves - 1;
    case Variant::kFlatSequential: return dims.leaves;
    default: return 1;
  }
}

namespace {

Eigen::MatrixXf fblock_forward(const Eigen::MatrixXf& x,
                               const InferenceModel::FBlock& b) {
  const float n = static_cast<float>(x.cols());
  Eigen::VectorXf mean = x.rowwise().mean();
  Eigen::MatrixXf centered = x.colwise() - mean;
  Eigen::VectorXf invstd =
      (centered.array().square().rowwise().sum() / n + b.eps).rsqrt();
  Eigen::MatrixXf h = centered.array().colwise() * invstd.array();
  h = (h.array().rowwise() * b.gain.array()).rowwise() + b.shift.array();
  Eigen::MatrixXf y = h * b.W.transpose();
  y.rowwise() += b.b;
  return y.cwiseMax(0.f);
}

InferenceModel::FBlock cast_block(const Block& blk) {
  InferenceModel::FBlock f;
  f.gain = blk.ln.gain.value.row(0).cast<float>();
  f.shift = blk.ln.shift.value.row(0).cast<float>();
  f.W = blk.fc.W.value.cast<float>();
  f.b = blk.fc.b.value.row(0).cast<float>();
  f.eps = static_cast<float>(blk.ln.eps);
  return f;
}

}  // namespace

Eigen::MatrixXf InferenceModel::forward(const Eigen::MatrixXf& X) const {
  const int R = rows_per_doc();
  if (X.rows() % R != 0)
    throw std::invalid_argument("InferenceModel: input rows not a multiple of node count");
  const int docs = static_cast<int>(X.rows()) / R;
  Eigen::MatrixXf h = X;
  for (const auto& b : inspector) h = fblock_forward(h, b);
  if (!inspector.empty()) {
    Eigen::MatrixXf pooled(docs, h.cols());
    for (int d = 0; d < docs; d++)
      pooled.row(d) = h.middleRows(static_cast<Eigen::Index>(d) * R, R)
                          .colwise()
                          .maxCoeff();
    h = std::move(pooled);
  }
  for (const auto& b : trunk) h = fblock_forward(h, b);
  Eigen::MatrixXf logits = h * head_W.transpose();
  logits.rowwise() += head_b;
  return ((-logits.array()).exp() + 1.f).inverse().matrix();
}

InferenceModel to_inference(const Model& m) {
  InferenceModel im;
  im.tag = m.tag;
  im.dims = m.dims;
  for (const auto& b : m.inspector) im.inspector.push_back(cast_block(b));
  for (const auto& b : m.trunk) im.trunk.push_back(cast_block(b));
  im.head_W = m.head.W.value.cast<float>();
  im.head_b = m.head.b.value.row(0).cast<float>();
  return im;
}

Eigen::MatrixXf features_for_variant(Variant v, const TokenStream& stream) {
  switch (v) {
    case Variant::kProposed: {
      ChunkedBags bags = bag_chunks(stream, plan_chunks(stream.tokens.size()));
      return build_pyramid(bags).nodes;
    }
    case Variant::kFlatSequential:
      return bag_chunks(stream, plan_chunks(stream.tokens.size())).counts;
    case Variant::kFlattenedFf: {
      ChunkedBags bags = bag_chunks(stream, plan_chunks(stream.tokens.size()));
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
          rm = bags.counts;
      return Eigen::Map<Eigen::MatrixXf>(rm.data(), 1, rm.size());
    }
    case Variant::kFfBot:
    case Variant::kLrBot:
      return bag_flat(stream).counts.transpose();
  }
  throw std::invalid_argument("features_for_variant: unknown variant");
}

namespace {

constexpr char kModelMagic[8] = {'W', 'C', 'D', 'M', 'D', 'L', '\0', '\0'};
constexpr uint32_t kModelVersion = 1;
constexpr size_t kHashIdField = 32;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void save_model(const std::string& path, Model& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(kModelMagic, sizeof(kModelMagic));
  write_u32(out, kModelVersion);
  write_u32(out, static_cast<uint32_t>(m.tag));
  write_u32(out, static_cast<uint32_t>(m.dims.feature_dim));
  write_u32(out, static_cast<uint32_t>(m.dims.flat_dim));
  write_u32(out, static_cast<uint32_t>(m.dims.hidden));
  write_u32(out, static_cast<uint32_t>(m.dims.heads));
  write_u32(out, static_cast<uint32_t>(m.dims.leaves));
  double dropout = m.dims.dropout;
  out.write(reinterpret_cast<const char*>(&dropout), 8);
  char hash_id[kHashIdField] = {};
  std::strncpy(hash_id, kHashVariantId, kHashIdField - 1);
  out.write(hash_id, kHashIdField);
  auto params = m.params();
  write_u32(out, static_cast<uint32_t>(params.size()));
  for (const nn::Tensor* t : params) {
    write_u32(out, static_cast<uint32_t>(t->name.size()));
    out.write(t->name.data(), static_cast<std::streamsize>(t->name.size()));
    write_u32(out, static_cast<uint32_t>(t->value.rows()));
    write_u32(out, static_cast<uint32_t>(t->value.cols()));
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm =
        t->value.cast<float>();
    out.write(reinterpret_cast<const char*>(rm.data()),
              static_cast<std::streamsize>(sizeof(float) * rm.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a model file: " + path);
  if (read_u32(in) != kModelVersion)
    throw std::runtime_error("unsupported model format version");
  uint32_t tag = read_u32(in);
  if (tag > static_cast<uint32_t>(Variant::kLrBot))
    throw std::runtime_error("unknown model variant tag");
  ModelDims dims;
  dims.feature_dim = static_cast<int>(read_u32(in));
  dims.flat_dim = static_cast<int>(read_u32(in));
  dims.hidden = static_cast<int>(read_u32(in));
  dims.heads = static_cast<int>(read_u32(in));
  dims.leaves = static_cast<int>(read_u32(in));
  in.read(reinterpret_cast<char*>(&dims.dropout), 8);
  char hash_id[kHashIdField + 1] = {};
  in.read(hash_id, kHashIdField);
  if (std::string(hash_id) != kHashVariantId)
    throw std::runtime_error("model hash-variant mismatch: file has '" +
                             std::string(hash_id) + "', build uses '" +
                             kHashVariantId + "'");
  nn::Rng rng(0);
  Model m = make_model(static_cast<Variant>(tag), dims, rng);
  auto params = m.params();
  uint32_t count = read_u32(in);
  if (count != params.size())
    throw std::runtime_error("model tensor count mismatch");
  for (nn::Tensor* t : params) {
    uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t rows = read_u32(in);
    uint32_t cols = read_u32(in);
    if (name != t->name || rows != t->value.rows() || cols != t->value.cols())
      throw std::runtime_error("model tensor mismatch at " + t->name);
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
        rows, cols);
    in.read(reinterpret_cast<char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(float) * rm.size()));
    t->value = rm.cast<double>();
  }
  if (!in) throw std::runtime_error("truncated model file: " + path);
  return m;
}

}  // namespace wcd
