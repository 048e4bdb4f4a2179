#include "adapterlab/model.hpp"

#include <cmath>
#include <filesystem>
#include <map>

#include "adapterlab/checkpoint.hpp"
#include "adapterlab/error.hpp"
#include "adapterlab/ops.hpp"
#include "json_io.hpp"

namespace adapterlab {

namespace fs = std::filesystem;

namespace {

constexpr double kMaskedScore = -1e9;

Tensor normal_tensor(Shape shape, double std, Rng& rng) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.normal(0.0, std);
  return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace

TokenBatch TokenBatch::pad(std::span<const std::vector<int>> sequences, int pad_id) {
  if (sequences.empty()) throw InvalidArgument("TokenBatch::pad: no sequences");
  TokenBatch b;
  b.batch = sequences.size();
  for (const auto& s : sequences) b.seq = std::max(b.seq, s.size());
  if (b.seq == 0) throw InvalidArgument("TokenBatch::pad: all sequences are empty");
  b.ids.assign(b.batch * b.seq, pad_id);
  b.mask.assign(b.batch * b.seq, 0);
  for (std::size_t i = 0; i < b.batch; ++i) {
    for (std::size_t t = 0; t < sequences[i].size(); ++t) {
      b.ids[i * b.seq + t] = sequences[i][t];
      b.mask[i * b.seq + t] = 1;
    }
  }
  return b;
}

LinearHead LinearHead::clone() const {
  return {weight.defined() ? weight.clone() : Tensor(), bias.clone()};
}

EncoderModel::EncoderModel(ModelConfig config, LabelSpace labels)
    : config_(std::move(config)), labels_(std::move(labels)) {}

EncoderModel EncoderModel::create(const ModelConfig& config, const LabelSpace& labels, std::uint64_t seed) {
  config.validate();
  EncoderModel m(config, labels);
  Rng rng(seed);
  const std::size_t d = config.d_model, f = config.ffn_dim, v = config.vocab_size;
  const double s = config.init_std;
  m.token_embedding_ = normal_tensor({v, d}, s, rng);
  m.position_embedding_ = normal_tensor({config.max_seq_len, d}, config.position_init_std, rng);
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    EncoderLayer l;
    l.wq = normal_tensor({d, d}, s, rng);
    l.bq = Tensor::zeros({d});
    l.wk = normal_tensor({d, d}, s, rng);
    l.wv = normal_tensor({d, d}, s, rng);
    l.bv = Tensor::zeros({d});
    l.wo = normal_tensor({d, d}, s, rng);
    l.bo = Tensor::zeros({d});
    l.ln1_gamma = Tensor::full({d}, 1.0);
    l.ln1_beta = Tensor::zeros({d});
    l.ffn_w1 = normal_tensor({d, f}, s, rng);
    l.ffn_b1 = Tensor::zeros({f});
    l.ffn_w2 = normal_tensor({f, d}, s, rng);
    l.ffn_b2 = Tensor::zeros({d});
    l.ln2_gamma = Tensor::full({d}, 1.0);
    l.ln2_beta = Tensor::zeros({d});
    m.layers_.push_back(std::move(l));
  }
  if (!config.tie_mlm_head) m.mlm_head_.weight = normal_tensor({d, v}, s, rng);
  m.mlm_head_.bias = Tensor::zeros({v});
  m.classifier_.weight = normal_tensor({d, labels.size()}, s, rng);
  m.classifier_.bias = Tensor::zeros({labels.size()});
  return m;
}

Tensor EncoderModel::attention(const EncoderLayer& l, const Tensor& x, const Tensor& mask_bias,
                               std::size_t batch, std::size_t seq) const {
  const std::size_t d = config_.d_model, h = config_.n_heads, dh = d / h;
  auto split = [&](const Tensor& t) {
    // [B, T, d] -> [B, H, T, dh]
    return transpose(reshape(t, {batch, seq, h, dh}), 1, 2);
  };
  Tensor q = split(add(matmul(x, l.wq), l.bq));
  // No key bias: it shifts every score of a query by the same amount, which
  // softmax cancels.
  Tensor k = split(matmul(x, l.wk));
  Tensor v = split(add(matmul(x, l.wv), l.bv));
  Tensor scores = add(scale(matmul(q, transpose(k, 2, 3)), 1.0 / std::sqrt(static_cast<double>(dh))), mask_bias);
  Tensor ctx = matmul(softmax(scores), v);
  Tensor merged = reshape(transpose(ctx, 1, 2), {batch, seq, d});
  return add(matmul(merged, l.wo), l.bo);
}

Tensor EncoderModel::encode(const TokenBatch& tokens, const AdapterStack& stack, Rng* dropout_rng) const {
  const std::size_t B = tokens.batch, T = tokens.seq;
  if (B == 0 || T == 0) throw InvalidArgument("encode: empty batch");
  if (tokens.ids.size() != B * T || tokens.mask.size() != B * T) {
    throw ShapeError("encode: ids/mask sizes do not match batch " + std::to_string(B) + " x seq " + std::to_string(T));
  }
  if (T > config_.max_seq_len) {
    throw InvalidArgument("encode: sequence length " + std::to_string(T) + " exceeds max_seq_len " +
                          std::to_string(config_.max_seq_len));
  }
  for (int id : tokens.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw InvalidArgument("encode: token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(config_.vocab_size));
    }
  }
  if (stack.language()) stack.language()->adapter.check_compatible(config_);
  if (stack.task()) stack.task()->adapter.check_compatible(config_);

  const double rate = dropout_rng ? config_.dropout : 0.0;
  auto drop = [&](const Tensor& t) { return rate > 0.0 ? dropout(t, rate, *dropout_rng) : t; };

  std::vector<std::size_t> positions(T);
  for (std::size_t t = 0; t < T; ++t) positions[t] = t;
  Tensor x = add(embedding(token_embedding_, tokens.ids, {B, T}), index_rows(position_embedding_, positions));
  x = drop(x);

  std::vector<double> bias(B * T);
  for (std::size_t i = 0; i < B * T; ++i) bias[i] = tokens.mask[i] ? 0.0 : kMaskedScore;
  const Tensor mask_bias = Tensor::from_data({B, 1, 1, T}, std::move(bias));

  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const EncoderLayer& l = layers_[li];
    x = layer_norm(add(x, drop(attention(l, x, mask_bias, B, T))), l.ln1_gamma, l.ln1_beta);
    Tensor ffn = add(matmul(gelu(add(matmul(x, l.ffn_w1), l.ffn_b1)), l.ffn_w2), l.ffn_b2);
    ffn = stack.apply(li, drop(ffn));
    x = layer_norm(add(x, ffn), l.ln2_gamma, l.ln2_beta);
  }
  return x;
}

Tensor EncoderModel::mlm_logits(const Tensor& hidden) const {
  if (hidden.rank() != 3 || hidden.dim(-1) != config_.d_model) {
    throw ShapeError("mlm_logits: hidden must be [batch, seq, " + std::to_string(config_.d_model) + "], got " +
                     shape_str(hidden.shape()));
  }
  const Tensor w = config_.tie_mlm_head ? transpose(token_embedding_, 0, 1) : mlm_head_.weight;
  return add(matmul(hidden, w), mlm_head_.bias);
}

Tensor EncoderModel::mlm_logits_at(const Tensor& hidden, std::span<const std::size_t> flat_positions) const {
  if (hidden.rank() != 3 || hidden.dim(-1) != config_.d_model) {
    throw ShapeError("mlm_logits_at: hidden must be [batch, seq, d_model], got " + shape_str(hidden.shape()));
  }
  const Tensor rows = index_rows(reshape(hidden, {hidden.dim(0) * hidden.dim(1), config_.d_model}), flat_positions);
  const Tensor w = config_.tie_mlm_head ? transpose(token_embedding_, 0, 1) : mlm_head_.weight;
  return add(matmul(rows, w), mlm_head_.bias);
}

Tensor EncoderModel::classify_logits(const Tensor& hidden, std::span<const std::uint8_t> mask) const {
  if (hidden.rank() != 3 || hidden.dim(-1) != config_.d_model) {
    throw ShapeError("classify_logits: hidden must be [batch, seq, d_model], got " + shape_str(hidden.shape()));
  }
  if (config_.pooling == Pooling::kCls) {
    return add(matmul(select(hidden, 1, 0), classifier_.weight), classifier_.bias);
  }
  const std::size_t B = hidden.dim(0), T = hidden.dim(1);
  if (mask.size() != B * T) {
    throw ShapeError("classify_logits: mean pooling needs a mask of " + std::to_string(B * T) + " entries, got " +
                     std::to_string(mask.size()));
  }
  std::vector<double> w(B * T, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t n = 0;
    for (std::size_t t = 0; t < T; ++t) n += mask[b * T + t] ? 1 : 0;
    if (n == 0) throw InvalidArgument("classify_logits: sequence " + std::to_string(b) + " has no tokens");
    for (std::size_t t = 0; t < T; ++t) w[b * T + t] = mask[b * T + t] ? 1.0 / static_cast<double>(n) : 0.0;
  }
  const Tensor pooled = reshape(matmul(Tensor::from_data({B, 1, T}, std::move(w)), hidden), {B, config_.d_model});
  return add(matmul(pooled, classifier_.weight), classifier_.bias);
}

EncoderModel EncoderModel::with_mlm_head(LinearHead head) const {
  if (head.bias.shape() != mlm_head_.bias.shape() ||
      (head.weight.defined() != mlm_head_.weight.defined()) ||
      (head.weight.defined() && head.weight.shape() != mlm_head_.weight.shape())) {
    throw ShapeError("with_mlm_head: head shape does not match the model");
  }
  EncoderModel m = *this;
  m.mlm_head_ = std::move(head);
  return m;
}

EncoderModel EncoderModel::with_classifier(LinearHead head) const {
  if (!head.weight.defined() || head.weight.shape() != classifier_.weight.shape() ||
      head.bias.shape() != classifier_.bias.shape()) {
    throw ShapeError("with_classifier: head shape does not match the model");
  }
  EncoderModel m = *this;
  m.classifier_ = std::move(head);
  return m;
}

std::vector<NamedTensor> EncoderModel::base_tensors() const {
  std::vector<NamedTensor> out{{"embed.token", token_embedding_}, {"embed.position", position_embedding_}};
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const EncoderLayer& l = layers_[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    out.push_back({p + "attn.wq", l.wq});
    out.push_back({p + "attn.bq", l.bq});
    out.push_back({p + "attn.wk", l.wk});
    out.push_back({p + "attn.wv", l.wv});
    out.push_back({p + "attn.bv", l.bv});
    out.push_back({p + "attn.wo", l.wo});
    out.push_back({p + "attn.bo", l.bo});
    out.push_back({p + "ln1.gamma", l.ln1_gamma});
    out.push_back({p + "ln1.beta", l.ln1_beta});
    out.push_back({p + "ffn.w1", l.ffn_w1});
    out.push_back({p + "ffn.b1", l.ffn_b1});
    out.push_back({p + "ffn.w2", l.ffn_w2});
    out.push_back({p + "ffn.b2", l.ffn_b2});
    out.push_back({p + "ln2.gamma", l.ln2_gamma});
    out.push_back({p + "ln2.beta", l.ln2_beta});
  }
  return out;
}

std::vector<NamedTensor> EncoderModel::mlm_head_tensors() const {
  std::vector<NamedTensor> out;
  if (mlm_head_.weight.defined()) out.push_back({"head.mlm.weight", mlm_head_.weight});
  out.push_back({"head.mlm.bias", mlm_head_.bias});
  return out;
}

std::vector<NamedTensor> EncoderModel::classifier_tensors() const {
  return {{"head.cls.weight", classifier_.weight}, {"head.cls.bias", classifier_.bias}};
}

std::vector<NamedTensor> EncoderModel::all_tensors() const {
  auto out = base_tensors();
  for (auto& t : mlm_head_tensors()) out.push_back(std::move(t));
  for (auto& t : classifier_tensors()) out.push_back(std::move(t));
  return out;
}

EncoderModel EncoderModel::clone() const {
  EncoderModel m(config_, labels_);
  m.token_embedding_ = token_embedding_.clone();
  m.position_embedding_ = position_embedding_.clone();
  for (const auto& l : layers_) {
    m.layers_.push_back({l.wq.clone(), l.bq.clone(), l.wk.clone(), l.wv.clone(), l.bv.clone(),
                         l.wo.clone(), l.bo.clone(), l.ln1_gamma.clone(), l.ln1_beta.clone(), l.ffn_w1.clone(),
                         l.ffn_b1.clone(), l.ffn_w2.clone(), l.ffn_b2.clone(), l.ln2_gamma.clone(),
                         l.ln2_beta.clone()});
  }
  m.mlm_head_ = mlm_head_.clone();
  m.classifier_ = classifier_.clone();
  return m;
}

void EncoderModel::save(const fs::path& dir) const {
  const auto tensors = all_tensors();
  save_tensor_dir(dir, tensors);
  detail::ordered_json cfg;
  cfg["model"] = detail::to_json(config_);
  cfg["labels"] = detail::to_json(labels_);
  detail::write_json_file(dir / "config.json", cfg);
}

EncoderModel EncoderModel::load(const fs::path& dir) {
  const auto cfg_path = dir / "config.json";
  const auto cfg = detail::read_json_file(cfg_path);
  ModelConfig config;
  std::optional<LabelSpace> labels;
  try {
    if (!cfg.is_object() || !cfg.contains("model")) throw ConfigError("model: missing");
    if (!cfg.contains("labels")) throw ConfigError("labels: missing");
    config = detail::model_config_from_json(cfg["model"], "model");
    config.validate();
    labels = detail::label_space_from_json(cfg["labels"], "labels");
  } catch (const ConfigError& e) {
    throw CheckpointError(cfg_path.string() + ": field '" + e.what() + "'");
  }
  EncoderModel m = create(config, *labels, 0);
  auto loaded = load_tensor_dir(dir);
  std::map<std::string, Tensor> by_name;
  for (auto& t : loaded) by_name.emplace(t.name, t.tensor);
  const std::string where = (dir / "manifest.json").string();
  auto expected = m.all_tensors();
  if (by_name.size() != expected.size()) {
    throw CheckpointError(where + ": field 'tensors': expected " + std::to_string(expected.size()) + " tensors, found " +
                          std::to_string(by_name.size()));
  }
  for (auto& [name, t] : expected) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError(where + ": field 'tensors." + name + "': missing");
    if (it->second.shape() != t.shape()) {
      throw CheckpointError(where + ": field 'tensors." + name + ".shape': expected " + shape_str(t.shape()) +
                            ", found " + shape_str(it->second.shape()));
    }
    auto dst = t.mutable_data();
    auto src = it->second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return m;
}

ParamReport param_report(const EncoderModel& model, const AdapterStack& stack) {
  ParamReport r;
  for (const auto& t : model.all_tensors()) {
    r.base_params += t.tensor.numel();
    if (t.tensor.requires_grad()) r.trainable_params += t.tensor.numel();
  }
  for (const auto* slot : {&stack.language(), &stack.task()}) {
    if (!*slot) continue;
    for (const auto& t : (*slot)->adapter.named_tensors()) {
      r.adapter_params += t.tensor.numel();
      if (t.tensor.requires_grad()) r.trainable_params += t.tensor.numel();
    }
  }
  return r;
}

}  // namespace adapterlab
