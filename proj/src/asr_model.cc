// src/asr_model.cc
//
// Copyright 2026 The ftgan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ftgan/asr_model.h"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "ftgan/ctc.h"
#include "ftgan/errors.h"
#include "ftgan/shapes.h"

namespace ftgan {

namespace {

constexpr double kMaskValue = -1e30;
constexpr double kNormEps = 1e-12;

std::string layer_name(const char* stack, int i, const char* part) {
  return std::string(stack) + "." + std::to_string(i) + "." + part;
}

Matrix onehot_rows(const TokenSequence& ids, int vocab) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(ids.size()), vocab);
  for (size_t i = 0; i < ids.size(); ++i) m(static_cast<Eigen::Index>(i), ids[i]) = 1.0;
  return m;
}

void check_content(const TokenSequence& targets, int vocab, const std::string& where) {
  for (int t : targets)
    if (t < Vocab::kFirstContent || t >= vocab)
      throw std::invalid_argument(where + ": reserved or out-of-range id " + std::to_string(t) +
                                  " inside the target span");
}

}  // namespace

AsrConfig AsrConfig::small(int vocab_size, int feature_dim) {
  AsrConfig c;
  c.encoder_layers = 12;
  c.decoder_layers = 6;
  c.d_ff = 2048;
  c.d_att = 256;
  c.heads = 4;
  c.conv_channels = 256;
  c.vocab_size = vocab_size;
  c.feature_dim = feature_dim;
  return c;
}

AsrConfig AsrConfig::large(int vocab_size, int feature_dim) {
  AsrConfig c = small(vocab_size, feature_dim);
  c.d_att = 512;
  c.heads = 8;
  c.conv_channels = 512;
  return c;
}

void validate(const AsrConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("asr: " + what);
  };
  require(c.encoder_layers >= 0 && c.decoder_layers >= 0, "layer counts must be non-negative");
  require(c.d_att > 0 && c.d_ff > 0 && c.heads > 0 && c.conv_channels > 0,
          "widths must be positive");
  require(c.d_att % c.heads == 0, "d_att must be divisible by heads");
  require(c.vocab_size > Vocab::kFirstContent, "vocab_size must exceed the reserved ids");
  require(c.feature_dim >= 7, "feature_dim must be at least 7");
  require(c.dropout >= 0.0 && c.dropout < 1.0, "dropout must be in [0, 1)");
  require(c.label_smoothing >= 0.0 && c.label_smoothing < 1.0,
          "label_smoothing must be in [0, 1)");
  require(c.soft_output == "teacher_forced",
          "soft_output '" + c.soft_output + "' is not implemented (only teacher_forced)");
}

Json to_json(const AsrConfig& c) {
  return Json{{"encoder_layers", c.encoder_layers}, {"decoder_layers", c.decoder_layers},
              {"d_att", c.d_att},                   {"d_ff", c.d_ff},
              {"heads", c.heads},                   {"vocab_size", c.vocab_size},
              {"feature_dim", c.feature_dim},       {"conv_channels", c.conv_channels},
              {"dropout", c.dropout},               {"label_smoothing", c.label_smoothing},
              {"soft_output", c.soft_output}};
}

AsrConfig asr_config_from_json(const Json& j) {
  const std::string where = "asr";
  check_keys(j,
             {"encoder_layers", "decoder_layers", "d_att", "d_ff", "heads", "vocab_size",
              "feature_dim", "conv_channels", "dropout", "label_smoothing", "soft_output"},
             where);
  AsrConfig c;
  read_opt(j, "encoder_layers", c.encoder_layers, where);
  read_opt(j, "decoder_layers", c.decoder_layers, where);
  read_opt(j, "d_att", c.d_att, where);
  read_opt(j, "d_ff", c.d_ff, where);
  read_opt(j, "heads", c.heads, where);
  read_opt(j, "vocab_size", c.vocab_size, where);
  read_opt(j, "feature_dim", c.feature_dim, where);
  read_opt(j, "conv_channels", c.conv_channels, where);
  read_opt(j, "dropout", c.dropout, where);
  read_opt(j, "label_smoothing", c.label_smoothing, where);
  read_opt(j, "soft_output", c.soft_output, where);
  return c;
}

Matrix positional_encoding(int rows, int dim) {
  Matrix pe(rows, dim);
  for (int pos = 0; pos < rows; ++pos) {
    for (int i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / dim);
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
    }
  }
  return pe;
}

AsrModel::AsrModel(AsrConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  validate(cfg_);
  init_params(seed);
}

AsrModel::AsrModel(AsrConfig cfg, const ParamSet& params) : cfg_(std::move(cfg)) {
  validate(cfg_);
  init_params(0);
  params_.assign(params);
}

void AsrModel::init_params(uint64_t seed) {
  std::mt19937_64 rng = make_rng({seed, 0x6173726dULL});
  const int d = cfg_.d_att, ff = cfg_.d_ff, V = cfg_.vocab_size, C = cfg_.conv_channels;
  const int f2 = conv3s2_length(conv3s2_length(cfg_.feature_dim));
  auto lin = [&](const std::string& name, int in, int out) {
    params_.add(name + ".w", xavier_uniform(in, out, rng));
    params_.add(name + ".b", Matrix::Zero(1, out));
  };
  auto ln = [&](const std::string& name) {
    params_.add(name + ".g", Matrix::Ones(1, d));
    params_.add(name + ".b", Matrix::Zero(1, d));
  };
  auto attn = [&](const std::string& name) {
    for (const char* part : {".q", ".k", ".v", ".o"}) lin(name + part, d, d);
  };
  auto ffn = [&](const std::string& name) {
    lin(name + ".w1", d, ff);
    lin(name + ".w2", ff, d);
  };

  lin("subsample.conv1", 9, C);
  lin("subsample.conv2", 9 * C, C);
  lin("subsample.out", f2 * C, d);
  for (int i = 0; i < cfg_.encoder_layers; ++i) {
    ln(layer_name("encoder", i, "norm1"));
    attn(layer_name("encoder", i, "self_attn"));
    ln(layer_name("encoder", i, "norm2"));
    ffn(layer_name("encoder", i, "ff"));
  }
  if (cfg_.encoder_layers > 0) ln("encoder.after_norm");
  params_.add("decoder.embed", normal_matrix(V, d, 1.0 / std::sqrt(d), rng));
  for (int i = 0; i < cfg_.decoder_layers; ++i) {
    ln(layer_name("decoder", i, "norm1"));
    attn(layer_name("decoder", i, "self_attn"));
    ln(layer_name("decoder", i, "norm2"));
    attn(layer_name("decoder", i, "src_attn"));
    ln(layer_name("decoder", i, "norm3"));
    ffn(layer_name("decoder", i, "ff"));
  }
  if (cfg_.decoder_layers > 0) ln("decoder.after_norm");
  lin("decoder.out", d, V);
  lin("ctc", d, V);
}

ag::Var AsrModel::dropout(const ag::Var& x, const ForwardContext& ctx) const {
  if (!ctx.train || cfg_.dropout <= 0.0) return x;
  if (!ctx.rng) throw std::logic_error("AsrModel: training forward without an rng");
  const double keep = 1.0 - cfg_.dropout;
  std::bernoulli_distribution coin(keep);
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = coin(*ctx.rng) ? 1.0 / keep : 0.0;
  return ag::mul(x, ag::constant(std::move(mask)));
}

ag::Var AsrModel::norm(const std::string& prefix, const ag::Var& x) const {
  return ag::layer_norm_rows(x, p(prefix + ".g"), p(prefix + ".b"), kNormEps);
}

ag::Var AsrModel::subsample(const ag::Var& features, const ForwardContext& ctx) const {
  (void)ctx;
  const int T = static_cast<int>(features.rows());
  const int F = static_cast<int>(features.cols());
  if (F != cfg_.feature_dim) throw std::invalid_argument("subsample: feature_dim mismatch");
  const int n_sub = subsample_length(T);
  const int C = cfg_.conv_channels;
  const int t1 = conv3s2_length(T), f1 = conv3s2_length(F);
  const int t2 = n_sub, f2 = conv3s2_length(f1);

  auto idx1 = std::make_shared<std::vector<int>>();
  idx1->reserve(static_cast<size_t>(t1 * f1 * 9));
  for (int t = 0; t < t1; ++t)
    for (int f = 0; f < f1; ++f)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) idx1->push_back((2 * t + i) * F + (2 * f + j));
  ag::Var h1 = ag::relu(ag::linear(ag::gather(features, idx1, t1 * f1, 9),
                                   p("subsample.conv1.w"), p("subsample.conv1.b")));

  auto idx2 = std::make_shared<std::vector<int>>();
  idx2->reserve(static_cast<size_t>(t2 * f2 * 9 * C));
  for (int t = 0; t < t2; ++t)
    for (int f = 0; f < f2; ++f)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          for (int c = 0; c < C; ++c) idx2->push_back(((2 * t + i) * f1 + (2 * f + j)) * C + c);
  ag::Var h2 = ag::relu(ag::linear(ag::gather(h1, idx2, t2 * f2, 9 * C),
                                   p("subsample.conv2.w"), p("subsample.conv2.b")));

  ag::Var x = ag::linear(ag::reshape(h2, t2, f2 * C), p("subsample.out.w"), p("subsample.out.b"));
  return ag::add(x, ag::constant(positional_encoding(t2, cfg_.d_att)));
}

ag::Var AsrModel::attention(const std::string& prefix, const ag::Var& query,
                            const ag::Var& memory, int memory_valid, bool causal,
                            const ForwardContext& ctx) const {
  (void)ctx;
  const int heads = cfg_.heads;
  const int dk = cfg_.d_att / heads;
  const Eigen::Index nq = query.rows(), nk = memory.rows();
  ag::Var q = ag::linear(query, p(prefix + ".q.w"), p(prefix + ".q.b"));
  ag::Var k = ag::linear(memory, p(prefix + ".k.w"), p(prefix + ".k.b"));
  ag::Var v = ag::linear(memory, p(prefix + ".v.w"), p(prefix + ".v.b"));

  ag::Var mask;
  if (causal || memory_valid < nk) {
    Matrix m = Matrix::Zero(nq, nk);
    for (Eigen::Index i = 0; i < nq; ++i)
      for (Eigen::Index j = 0; j < nk; ++j)
        if ((causal && j > i) || j >= memory_valid) m(i, j) = kMaskValue;
    mask = ag::constant(std::move(m));
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<ag::Var> ctx_heads;
  for (int h = 0; h < heads; ++h) {
    ag::Var qh = ag::slice_cols(q, h * dk, dk);
    ag::Var kh = ag::slice_cols(k, h * dk, dk);
    ag::Var vh = ag::slice_cols(v, h * dk, dk);
    ag::Var scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_scale);
    if (mask.defined()) scores = ag::add(scores, mask);
    ctx_heads.push_back(ag::matmul(ag::softmax_rows(scores), vh));
  }
  ag::Var joined = heads == 1 ? ctx_heads.front() : ag::concat_cols(ctx_heads);
  return ag::linear(joined, p(prefix + ".o.w"), p(prefix + ".o.b"));
}

ag::Var AsrModel::feed_forward(const std::string& prefix, const ag::Var& x,
                               const ForwardContext& ctx) const {
  ag::Var h = ag::relu(ag::linear(x, p(prefix + ".w1.w"), p(prefix + ".w1.b")));
  h = dropout(h, ctx);
  return ag::linear(h, p(prefix + ".w2.w"), p(prefix + ".w2.b"));
}

ag::Var AsrModel::encode(const ag::Var& x0, int valid, const ForwardContext& ctx) const {
  if (x0.cols() != cfg_.d_att) throw std::invalid_argument("encode: width mismatch");
  ag::Var x = x0;
  for (int i = 0; i < cfg_.encoder_layers; ++i) {
    ag::Var h = norm(layer_name("encoder", i, "norm1"), x);
    x = ag::add(x, dropout(attention(layer_name("encoder", i, "self_attn"), h, h, valid, false, ctx),
                           ctx));
    h = norm(layer_name("encoder", i, "norm2"), x);
    x = ag::add(x, dropout(feed_forward(layer_name("encoder", i, "ff"), h, ctx), ctx));
  }
  if (cfg_.encoder_layers > 0) x = norm("encoder.after_norm", x);
  return x;
}

EncoderOutput AsrModel::encode_features(const Matrix& features, const ForwardContext& ctx) const {
  ag::Var x0 = subsample(ag::constant(features), ctx);
  EncoderOutput out;
  out.n_sub = static_cast<int>(x0.rows());
  out.encoded = encode(dropout(x0, ctx), out.n_sub, ctx);
  return out;
}

ag::Var AsrModel::decoder_log_posteriors(const TokenSequence& prefix, const EncoderOutput& enc,
                                         const ForwardContext& ctx) const {
  TokenSequence input;
  input.reserve(prefix.size() + 1);
  input.push_back(Vocab::kSos);
  input.insert(input.end(), prefix.begin(), prefix.end());
  const int n = static_cast<int>(input.size());
  const int d = cfg_.d_att;

  ag::Var x = ag::matmul(ag::constant(onehot_rows(input, cfg_.vocab_size)), p("decoder.embed"));
  x = ag::add(ag::scale(x, std::sqrt(static_cast<double>(d))),
              ag::constant(positional_encoding(n, d)));
  x = dropout(x, ctx);
  for (int i = 0; i < cfg_.decoder_layers; ++i) {
    ag::Var h = norm(layer_name("decoder", i, "norm1"), x);
    x = ag::add(x, dropout(attention(layer_name("decoder", i, "self_attn"), h, h, n, true, ctx),
                           ctx));
    h = norm(layer_name("decoder", i, "norm2"), x);
    x = ag::add(x, dropout(attention(layer_name("decoder", i, "src_attn"), h, enc.encoded,
                                     enc.n_sub, false, ctx),
                           ctx));
    h = norm(layer_name("decoder", i, "norm3"), x);
    x = ag::add(x, dropout(feed_forward(layer_name("decoder", i, "ff"), h, ctx), ctx));
  }
  if (cfg_.decoder_layers > 0) x = norm("decoder.after_norm", x);
  return ag::log_softmax_rows(ag::linear(x, p("decoder.out.w"), p("decoder.out.b")));
}

ag::Var AsrModel::ctc_log_posteriors(const EncoderOutput& enc) const {
  ag::Var valid = enc.n_sub < enc.encoded.rows() ? ag::slice_rows(enc.encoded, 0, enc.n_sub)
                                                 : enc.encoded;
  return ag::log_softmax_rows(ag::linear(valid, p("ctc.w"), p("ctc.b")));
}

ag::Var decoder_posteriors(const AsrModel& model, const TokenSequence& targets,
                           const EncoderOutput& enc, const ForwardContext& ctx) {
  check_content(targets, model.config().vocab_size, "decoder_posteriors");
  return ag::exp(model.decoder_log_posteriors(targets, enc, ctx));
}

std::vector<ItemForward> forward_batch(const AsrModel& model, const Batch& batch,
                                       const ForwardContext& ctx) {
  std::vector<ItemForward> out;
  out.reserve(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    const TokenSequence targets = batch.item_targets(i);
    check_content(targets, model.config().vocab_size, "item " + batch.ids[i]);
    ItemForward f;
    f.enc = model.encode_features(batch.item_features(i), ctx);
    f.decoder_log_probs = model.decoder_log_posteriors(targets, f.enc, ctx);
    f.ctc_log_probs = model.ctc_log_posteriors(f.enc);
    out.push_back(std::move(f));
  }
  return out;
}

ag::Var smoothed_cross_entropy(const ag::Var& log_probs, const TokenSequence& targets,
                               double smoothing) {
  const Eigen::Index V = log_probs.cols();
  if (static_cast<Eigen::Index>(targets.size()) != log_probs.rows())
    throw std::invalid_argument("smoothed_cross_entropy: row count mismatch");
  const double off = V > 1 ? smoothing / static_cast<double>(V - 1) : 0.0;
  Matrix q = Matrix::Constant(log_probs.rows(), V, off);
  for (size_t i = 0; i < targets.size(); ++i) q(static_cast<Eigen::Index>(i), targets[i]) = 1.0 - smoothing;
  return ag::neg(ag::sum(ag::mul(ag::constant(std::move(q)), log_probs)));
}

AsrLoss asr_loss(const AsrModel& model, const Batch& batch, const std::vector<ItemForward>& fwd,
                 double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("asr_loss: alpha outside [0, 1]");
  if (fwd.size() != batch.size()) throw std::invalid_argument("asr_loss: forward/batch mismatch");
  std::vector<ag::Var> ce_terms, ctc_terms;
  for (size_t i = 0; i < batch.size(); ++i) {
    TokenSequence targets = batch.item_targets(i);
    if (ctc_min_frames(targets) > fwd[i].enc.n_sub)
      throw InfeasibleError("item " + batch.ids[i] + ": " + std::to_string(fwd[i].enc.n_sub) +
                            " encoder frames cannot emit " + std::to_string(targets.size()) +
                            " tokens under CTC");
    ctc_terms.push_back(ctc_loss_op(fwd[i].ctc_log_probs, targets));
    targets.push_back(Vocab::kEos);
    ce_terms.push_back(smoothed_cross_entropy(fwd[i].decoder_log_probs, targets,
                                              model.config().label_smoothing));
  }
  const double m = static_cast<double>(batch.size());
  ag::Var ce_sum = ag::sum(ag::concat_rows(ce_terms));
  ag::Var ctc_sum = ag::sum(ag::concat_rows(ctc_terms));
  AsrLoss loss;
  loss.ce_mean = ce_sum.scalar() / m;
  loss.ctc_mean = ctc_sum.scalar() / m;
  loss.s2s = ag::scale(ce_sum, (1.0 - alpha) / m);
  loss.ctc = ag::scale(ctc_sum, alpha / m);
  loss.total = ag::add(loss.s2s, loss.ctc);
  return loss;
}

AsrLoss asr_loss(const AsrModel& model, const Batch& batch, double alpha,
                 const ForwardContext& ctx) {
  return asr_loss(model, batch, forward_batch(model, batch, ctx), alpha);
}

std::vector<ag::Var> soft_output(const std::vector<ItemForward>& fwd, const Batch& batch) {
  std::vector<ag::Var> out;
  out.reserve(fwd.size());
  for (size_t i = 0; i < fwd.size(); ++i)
    out.push_back(ag::exp(ag::slice_rows(fwd[i].decoder_log_probs, 0, batch.target_lengths[i])));
  return out;
}

std::vector<ag::Var> soft_output(const AsrModel& model, const Batch& batch,
                                 const ForwardContext& ctx) {
  return soft_output(forward_batch(model, batch, ctx), batch);
}

double accuracy_from_posteriors(const std::vector<Matrix>& posteriors,
                                const std::vector<TokenSequence>& references) {
  if (posteriors.size() != references.size())
    throw std::invalid_argument("accuracy: posterior/reference count mismatch");
  size_t hits = 0, total = 0;
  for (size_t i = 0; i < posteriors.size(); ++i) {
    const Matrix& p = posteriors[i];
    if (p.rows() < static_cast<Eigen::Index>(references[i].size()))
      throw std::invalid_argument("accuracy: fewer posterior rows than reference tokens");
    for (size_t t = 0; t < references[i].size(); ++t) {
      Eigen::Index best = 0;
      p.row(static_cast<Eigen::Index>(t)).maxCoeff(&best);
      hits += static_cast<int>(best) == references[i][t];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

double validation_accuracy(const AsrModel& model, const Batch& batch) {
  ag::NoGradGuard no_grad;
  std::vector<ItemForward> fwd = forward_batch(model, batch, ForwardContext::eval());
  std::vector<Matrix> post;
  std::vector<TokenSequence> refs;
  for (size_t i = 0; i < batch.size(); ++i) {
    post.push_back(fwd[i].decoder_log_probs.value());
    TokenSequence r = batch.item_targets(i);
    r.push_back(Vocab::kEos);
    refs.push_back(std::move(r));
  }
  return accuracy_from_posteriors(post, refs);
}

}  // namespace ftgan
