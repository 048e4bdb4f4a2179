#include <cmath>
#include <cstring>

#include "adapterlab/error.hpp"
#include "adapterlab/grad_check.hpp"
#include "adapterlab/model.hpp"
#include "adapterlab/ops.hpp"
#include "adapterlab/training.hpp"
#include "doctest.h"
#include "support/temp_dir.hpp"

using namespace adapterlab;

namespace {

ModelConfig small_config(std::size_t vocab = 11) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.ffn_dim = 12;
  c.max_seq_len = 8;
  return c;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<std::vector<int>> random_sequences(Rng& rng, std::size_t n, std::size_t vocab, std::size_t max_len) {
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> s{1};
    const std::size_t len = 1 + rng.uniform_int(max_len - 1);
    while (s.size() < len) s.push_back(static_cast<int>(4 + rng.uniform_int(vocab - 4)));
    out.push_back(std::move(s));
  }
  return out;
}

// Plain-double restatement of one post-LN layer for a single token.
std::vector<double> vec_mat(const std::vector<double>& x, std::span<const double> w, std::size_t cols) {
  std::vector<double> y(cols, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) y[j] += x[i] * w[i * cols + j];
  }
  return y;
}

std::vector<double> plus(std::vector<double> a, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

std::vector<double> norm(const std::vector<double>& x, std::span<const double> g, std::span<const double> b) {
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(x.size());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mu) / std::sqrt(var + 1e-5) * g[i] + b[i];
  return y;
}

double gelu_ref(double x) { return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x))); }

}  // namespace

TEST_CASE("label spaces") {
  CHECK(LabelSpace::six_emotions().names() ==
        std::vector<std::string>{"anger", "disgust", "fear", "joy", "sadness", "surprise"});
  CHECK(LabelSpace::five_emotions().names() == std::vector<std::string>{"anger", "fear", "joy", "sadness", "surprise"});
  CHECK_THROWS_AS(LabelSpace({"joy", "joy"}), ConfigError);
}

TEST_CASE("config invariants") {
  ModelConfig c = small_config();
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.max_seq_len = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("single token through one layer matches a hand-computed forward pass") {
  ModelConfig c;
  c.vocab_size = 5;
  c.d_model = 2;
  c.n_layers = 1;
  c.n_heads = 1;
  c.ffn_dim = 3;
  c.max_seq_len = 2;
  EncoderModel m = EncoderModel::create(c, LabelSpace::six_emotions(), 0);
  auto set = [](Tensor& t, std::vector<double> v) {
    auto d = t.mutable_data();
    REQUIRE(d.size() == v.size());
    std::copy(v.begin(), v.end(), d.begin());
  };
  set(m.token_embedding(), {0, 0, 0, 0, 0, 0, 0.5, -1.0, 0, 0});
  set(m.position_embedding(), {0.1, 0.2, 0, 0});
  EncoderLayer& l = m.layers()[0];
  set(l.wq, {1, 2, 3, 4});
  set(l.bq, {0.3, -0.3});
  set(l.wk, {-1, 0.5, 0.25, 2});
  set(l.wv, {0.5, -0.5, 1.5, 1.0});
  set(l.bv, {0.1, 0.0});
  set(l.wo, {1.0, 0.2, -0.3, 0.7});
  set(l.bo, {0.0, 0.05});
  set(l.ln1_gamma, {1.5, 0.5});
  set(l.ln1_beta, {0.1, -0.1});
  set(l.ffn_w1, {0.2, -0.4, 0.6, 0.8, 1.0, -1.2});
  set(l.ffn_b1, {0.01, 0.02, 0.03});
  set(l.ffn_w2, {0.3, -0.2, 0.1, 0.4, -0.5, 0.6});
  set(l.ffn_b2, {0.0, -0.1});
  set(l.ln2_gamma, {0.9, 1.1});
  set(l.ln2_beta, {0.0, 0.2});

  // One token: attention weight is exactly 1, so the sublayer is x Wv + bv then Wo + bo.
  const std::vector<double> x{0.5 + 0.1, -1.0 + 0.2};
  const auto attn = plus(vec_mat(plus(vec_mat(x, l.wv.data(), 2), l.bv.data()), l.wo.data(), 2), l.bo.data());
  const auto h1 = norm(plus(x, attn), l.ln1_gamma.data(), l.ln1_beta.data());
  auto inner = plus(vec_mat(h1, l.ffn_w1.data(), 3), l.ffn_b1.data());
  for (double& v : inner) v = gelu_ref(v);
  const auto ffn = plus(vec_mat(inner, l.ffn_w2.data(), 2), l.ffn_b2.data());
  const auto expected = norm(plus(h1, ffn), l.ln2_gamma.data(), l.ln2_beta.data());

  std::vector<std::vector<int>> seq{{3}};
  Tensor h = m.encode(TokenBatch::pad(seq, 0), AdapterStack{});
  REQUIRE(h.shape() == Shape{1, 1, 2});
  CHECK(h.data()[0] == doctest::Approx(expected[0]).epsilon(1e-12));
  CHECK(h.data()[1] == doctest::Approx(expected[1]).epsilon(1e-12));
}

TEST_CASE("fresh adapters leave encoder outputs bitwise unchanged") {
  const ModelConfig c = small_config();
  EncoderModel m = EncoderModel::create(c, LabelSpace::six_emotions(), 4);
  Rng rng(8);
  const auto seqs = random_sequences(rng, 6, c.vocab_size, c.max_seq_len);
  const auto batch = TokenBatch::pad(seqs, 0);
  const Tensor plain = m.encode(batch, AdapterStack{});
  const auto la = make_adapter(AdapterRole::kLanguage, "aa", c, BottleneckSpec::dimension(3), 1);
  const auto ta = make_adapter(AdapterRole::kTask, "emotion", c, BottleneckSpec::dimension(5), 2);
  for (const AdapterStack& s : {AdapterStack::language_pretraining(la), AdapterStack::task_only(ta),
                                AdapterStack::language_task(la, ta)}) {
    CHECK(bitwise_equal(m.encode(batch, s).data(), plain.data()));
  }
}

TEST_CASE("pad content does not reach real positions") {
  const ModelConfig c = small_config();
  EncoderModel m = EncoderModel::create(c, LabelSpace::six_emotions(), 5);
  TokenBatch b = TokenBatch::pad(std::vector<std::vector<int>>{{1, 4, 5, 6, 7}, {1, 8}}, 0);
  const Tensor before = m.encode(b, AdapterStack{});
  for (std::size_t t = 2; t < b.seq; ++t) b.ids[b.seq + t] = static_cast<int>(4 + t);
  const Tensor after = m.encode(b, AdapterStack{});
  const std::size_t d = c.d_model;
  for (std::size_t i = 0; i < b.batch * b.seq; ++i) {
    if (!b.mask[i]) continue;
    CHECK(bitwise_equal(before.data().subspan(i * d, d), after.data().subspan(i * d, d)));
  }
}

TEST_CASE("encode rejects out-of-range ids and over-long sequences") {
  const ModelConfig c = small_config();
  EncoderModel m = EncoderModel::create(c, LabelSpace::six_emotions(), 5);
  CHECK_THROWS_AS(m.encode(TokenBatch::pad(std::vector<std::vector<int>>{{1, 11}}, 0), AdapterStack{}),
                  InvalidArgument);
  CHECK_THROWS_AS(m.encode(TokenBatch::pad(std::vector<std::vector<int>>{std::vector<int>(9, 4)}, 0), AdapterStack{}),
                  InvalidArgument);
}

TEST_CASE("head shapes and zero classifier") {
  ModelConfig c = small_config();
  EncoderModel m = EncoderModel::create(c, LabelSpace::six_emotions(), 2);
  const auto b = TokenBatch::pad(std::vector<std::vector<int>>{{1, 4, 5, 6, 7}, {1, 8, 9, 10, 4}}, 0);
  const Tensor h = m.encode(b, AdapterStack{});
  CHECK(m.mlm_logits(h).shape() == Shape{2, 5, 11});
  LinearHead zero{Tensor::zeros({c.d_model, 6}), Tensor::zeros({6})};
  const Tensor logits = m.with_classifier(zero).classify_logits(h);
  CHECK(logits.shape() == Shape{2, 6});
  const Tensor probs = sigmoid(logits);
  for (double v : probs.data()) CHECK(v == 0.5);
}

TEST_CASE("changing a content token changes the pooled logits") {
  ModelConfig c = small_config();
  for (Pooling p : {Pooling::kCls, Pooling::kMean}) {
    c.pooling = p;
    EncoderModel m = EncoderModel::create(c, LabelSpace::six_emotions(), 3);
    auto b = TokenBatch::pad(std::vector<std::vector<int>>{{1, 4, 5, 6}}, 0);
    const auto a = m.classify_logits(m.encode(b, AdapterStack{}), b.mask);
    b.ids[2] = 9;
    const auto z = m.classify_logits(m.encode(b, AdapterStack{}), b.mask);
    CHECK_FALSE(bitwise_equal(a.data(), z.data()));
  }
}

TEST_CASE("same seed gives the same model") {
  const ModelConfig c = small_config();
  const auto a = EncoderModel::create(c, LabelSpace::six_emotions(), 9).all_tensors();
  const auto b = EncoderModel::create(c, LabelSpace::six_emotions(), 9).all_tensors();
  const auto d = EncoderModel::create(c, LabelSpace::six_emotions(), 10).all_tensors();
  REQUIRE(a.size() == b.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(bitwise_equal(a[i].tensor.data(), b[i].tensor.data()));
    any_diff = any_diff || !bitwise_equal(a[i].tensor.data(), d[i].tensor.data());
  }
  CHECK(any_diff);
}

TEST_CASE("base parameter count closed form") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    ModelConfig c;
    c.n_heads = 1 + rng.uniform_int(3);
    c.d_model = c.n_heads * (1 + rng.uniform_int(8));
    c.n_layers = 1 + rng.uniform_int(3);
    c.ffn_dim = 1 + rng.uniform_int(20);
    c.vocab_size = 5 + rng.uniform_int(30);
    c.max_seq_len = 2 + rng.uniform_int(10);
    c.tie_mlm_head = trial % 2 == 0;
    const std::size_t d = c.d_model, f = c.ffn_dim, v = c.vocab_size, L = 6;
    const std::size_t layer = 4 * d * d + 2 * d * f + 8 * d + f;
    const std::size_t expected = v * d + c.max_seq_len * d + c.n_layers * layer + (c.tie_mlm_head ? 0 : d * v) + v +
                                 d * L + L;
    const auto m = EncoderModel::create(c, LabelSpace::six_emotions(), 1);
    CHECK(param_report(m, AdapterStack{}).base_params == expected);
    CHECK(param_report(m, AdapterStack{}).adapter_params == 0);
  }
}

TEST_CASE("tied MLM head uses the token embedding") {
  ModelConfig c = small_config();
  c.tie_mlm_head = true;
  EncoderModel m = EncoderModel::create(c, LabelSpace::six_emotions(), 1);
  CHECK_FALSE(m.mlm_head().weight.defined());
  const auto b = TokenBatch::pad(std::vector<std::vector<int>>{{1, 4}}, 0);
  const Tensor h = m.encode(b, AdapterStack{});
  const Tensor expected = add(matmul(h, transpose(m.token_embedding(), 0, 1)), m.mlm_head().bias);
  CHECK(bitwise_equal(m.mlm_logits(h).data(), expected.data()));
}

TEST_CASE("model checkpoint round trip is bitwise") {
  testing::TempDir tmp;
  ModelConfig c = small_config();
  c.pooling = Pooling::kMean;
  const EncoderModel m = EncoderModel::create(c, LabelSpace::five_emotions(), 12);
  m.save(tmp.path() / "model");
  const EncoderModel r = EncoderModel::load(tmp.path() / "model");
  CHECK(r.config() == c);
  CHECK(r.labels() == m.labels());
  const auto a = m.all_tensors(), b = r.all_tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].tensor.shape() == b[i].tensor.shape());
    CHECK(bitwise_equal(a[i].tensor.data(), b[i].tensor.data()));
  }
}

TEST_CASE("model load rejects a truncated weights file") {
  testing::TempDir tmp;
  const EncoderModel m = EncoderModel::create(small_config(), LabelSpace::six_emotions(), 12);
  m.save(tmp.path() / "model");
  const auto w = tmp.path() / "model" / "weights.bin";
  const std::string bytes = testing::read_file(w);
  testing::write_file(w, bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(EncoderModel::load(tmp.path() / "model"), CheckpointError);
}

TEST_CASE("encoder with adapters and BCE loss passes the finite-difference check") {
  ModelConfig c = small_config(12);
  c.d_model = 16;
  c.ffn_dim = 24;
  c.init_std = 0.3;
  const auto model = EncoderModel::create(c, LabelSpace::six_emotions(), 3);
  const auto la = make_adapter(AdapterRole::kLanguage, "la", c, BottleneckSpec::dimension(4), 5);
  const auto ta = make_adapter(AdapterRole::kTask, "ta", c, BottleneckSpec::dimension(4), 6);
  // Fresh up weights are zero, which would hide the down path from the check.
  Rng rng(9);
  for (const auto& v : {la.named_tensors(), ta.named_tensors()}) {
    for (const auto& t : v) {
      Tensor h = t.tensor;
      for (double& x : h.mutable_data()) x = rng.normal(0.0, 0.3);
    }
  }
  const AdapterStack stack = AdapterStack::language_task(la, ta);
  const std::vector<std::vector<int>> seqs{{1, 5, 6, 7, 8}, {1, 9, 10, 4}};
  const TokenBatch tb = TokenBatch::pad(seqs, kPadId);
  const std::vector<std::vector<std::uint8_t>> y{{1, 0, 0, 1, 0, 0}, {0, 1, 1, 0, 0, 1}};
  std::vector<NamedTensor> params = model.all_tensors();
  for (const auto& v : {la.qualified_tensors(), ta.qualified_tensors()}) params.insert(params.end(), v.begin(), v.end());
  const CheckReport r = grad_check(params, [&] {
    return bce_multilabel_loss(model.classify_logits(model.encode(tb, stack), tb.mask), y);
  });
  INFO("max rel " << r.max_rel_error);
  CHECK(r.pass);
}
