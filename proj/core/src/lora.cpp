#include "persona/lora.hpp"

#include <cmath>
#include <limits>

#include "persona/errors.hpp"

namespace persona {

namespace {

constexpr double kLnEps = 1e-5;

// ---------------------------------------------------------------------------
// forward caches
// ---------------------------------------------------------------------------

struct ProjCache {
  MatrixXd dropped;  // adapter-path input after dropout (== input without it)
  MatrixXd mask;     // dropout scale mask; empty when inactive
  MatrixXd mid;      // dropped * A
};

struct AttnCache {
  MatrixXd q, k, v;             // post-projection, n x d
  std::vector<MatrixXd> probs;  // per head, nq x nk
  MatrixXd concat;              // pre-Wo
  ProjCache pq, pk, pv;
};

struct LnCache {
  MatrixXd xhat;
  VectorXd inv_std;
};

struct FfCache {
  MatrixXd input;  // x fed to the block
  MatrixXd pre;    // x*w1 + b1, pre-ReLU
};

struct EncLayerCache {
  LnCache ln1, ln2;
  AttnCache attn;
  FfCache ff;
};

struct DecLayerCache {
  LnCache ln1, ln2, ln3;
  AttnCache self_attn, cross_attn;
  FfCache ff;
};

struct SeqCache {
  std::vector<EncLayerCache> enc;
  std::vector<DecLayerCache> dec;
  LnCache enc_final, dec_final;
  MatrixXd memory;
  MatrixXd dec_out;
};

struct BlockAdapters {
  const LoraPair* q = nullptr;
  const LoraPair* k = nullptr;
  const LoraPair* v = nullptr;
};

BlockAdapters find_block_adapters(const std::map<std::string, LoraPair>& adapters,
                                  const std::string& block) {
  BlockAdapters out;
  auto lookup = [&](const char* suffix) -> const LoraPair* {
    auto it = adapters.find(block + suffix);
    return it == adapters.end() ? nullptr : &it->second;
  };
  out.q = lookup(".q");
  out.k = lookup(".k");
  out.v = lookup(".v");
  return out;
}

// ---------------------------------------------------------------------------
// forward ops
// ---------------------------------------------------------------------------

MatrixXd positional_encoding(Eigen::Index n, int d) {
  MatrixXd pe(n, d);
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    for (int i = 0; i < d; i += 2) {
      double rate = std::exp(-std::log(10000.0) * static_cast<double>(i) / d);
      double angle = static_cast<double>(pos) * rate;
      pe(pos, i) = std::sin(angle);
      if (i + 1 < d) pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

MatrixXd embed_sequence(const MatrixXd& table, std::span<const int> ids, int d) {
  MatrixXd x(static_cast<Eigen::Index>(ids.size()), d);
  for (size_t t = 0; t < ids.size(); ++t) {
    x.row(static_cast<Eigen::Index>(t)) = table.row(ids[t]);
  }
  x += positional_encoding(x.rows(), d);
  return x;
}

// y = x*W0 (+ scaling * dropout(x)*A*B). The base term is computed by the
// same expression with or without an adapter, keeping fresh B = 0 adapters
// bitwise transparent.
MatrixXd project(const MatrixXd& x, const MatrixXd& w0, const LoraPair* lora,
                 double scaling, double dropout, Rng* dropout_rng,
                 ProjCache* cache) {
  MatrixXd y = x * w0;
  if (!lora) return y;

  MatrixXd dropped;
  MatrixXd mask;
  if (dropout_rng && dropout > 0.0) {
    double keep = 1.0 - dropout;
    mask = MatrixXd(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        mask(r, c) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
      }
    }
    dropped = x.cwiseProduct(mask);
  } else {
    dropped = x;
  }
  MatrixXd mid = dropped * lora->a;
  y.noalias() += scaling * (mid * lora->b);
  if (cache) {
    cache->dropped = std::move(dropped);
    cache->mask = std::move(mask);
    cache->mid = std::move(mid);
  }
  return y;
}

MatrixXd layer_norm(const LayerNormParams& ln, const MatrixXd& x, LnCache* cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  MatrixXd xhat(n, d);
  VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    double mean = x.row(r).mean();
    double var = (x.row(r).array() - mean).square().mean();
    double inv = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(r) = ((x.row(r).array() - mean) * inv).matrix();
    inv_std(r) = inv;
  }
  MatrixXd y = ((xhat.array().rowwise() * ln.gain.transpose().array()).rowwise() +
                ln.bias.transpose().array())
                   .matrix();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

void softmax_rows_inplace(MatrixXd& scores) {
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    double m = scores.row(r).maxCoeff();
    scores.row(r) = (scores.row(r).array() - m).exp().matrix();
    scores.row(r) /= scores.row(r).sum();
  }
}

struct AttnParams {
  const AttentionBlock* block;
  BlockAdapters adapters;
  double scaling;
  double dropout;
  int num_heads;
};

MatrixXd attention(const AttnParams& p, const MatrixXd& q_in, const MatrixXd& kv_in,
                   bool causal, Rng* dropout_rng, AttnCache* cache) {
  AttnCache local;
  AttnCache& c = cache ? *cache : local;

  c.q = project(q_in, p.block->wq, p.adapters.q, p.scaling, p.dropout, dropout_rng,
                cache ? &c.pq : nullptr);
  c.k = project(kv_in, p.block->wk, p.adapters.k, p.scaling, p.dropout, dropout_rng,
                cache ? &c.pk : nullptr);
  c.v = project(kv_in, p.block->wv, p.adapters.v, p.scaling, p.dropout, dropout_rng,
                cache ? &c.pv : nullptr);

  const Eigen::Index nq = c.q.rows();
  const Eigen::Index nk = c.k.rows();
  const int d = static_cast<int>(c.q.cols());
  const int dh = d / p.num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  c.concat = MatrixXd(nq, d);
  c.probs.resize(static_cast<size_t>(p.num_heads));
  for (int h = 0; h < p.num_heads; ++h) {
    auto qh = c.q.middleCols(h * dh, dh);
    auto kh = c.k.middleCols(h * dh, dh);
    auto vh = c.v.middleCols(h * dh, dh);
    MatrixXd scores = (qh * kh.transpose()) * scale;
    if (causal) {
      for (Eigen::Index r = 0; r < nq; ++r) {
        for (Eigen::Index col = r + 1; col < nk; ++col) {
          scores(r, col) = -std::numeric_limits<double>::infinity();
        }
      }
    }
    softmax_rows_inplace(scores);
    c.concat.middleCols(h * dh, dh) = scores * vh;
    c.probs[static_cast<size_t>(h)] = std::move(scores);
  }
  return c.concat * p.block->wo;
}

MatrixXd feed_forward(const FeedForwardBlock& ff, const MatrixXd& x, FfCache* cache) {
  MatrixXd pre = (x * ff.w1).rowwise() + ff.b1.transpose();
  MatrixXd act = pre.cwiseMax(0.0);
  MatrixXd y = (act * ff.w2).rowwise() + ff.b2.transpose();
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
  }
  return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// AdaptedModel
// ---------------------------------------------------------------------------

MatrixXd merge_weights(const MatrixXd& w0, const MatrixXd& a, const MatrixXd& b,
                       double alpha, int rank, bool use_alpha_scaling) {
  if (a.rows() != w0.rows() || b.cols() != w0.cols() || a.cols() != rank ||
      b.rows() != rank) {
    throw ConfigError("merge_weights: incompatible shapes");
  }
  double scaling = use_alpha_scaling ? alpha / static_cast<double>(rank) : 1.0;
  return w0 + scaling * (a * b);
}

AdaptedModel::AdaptedModel(const ToyModel& base) : base_(&base) {}

AdaptedModel::AdaptedModel(const ToyModel& base, const LoraConfig& cfg, uint64_t seed)
    : base_(&base), config_(cfg) {
  if (cfg.rank < 1) throw ConfigError("LoRA rank must be >= 1");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
    throw ConfigError("LoRA dropout must lie in [0, 1)");
  }
  if (cfg.targets.empty()) throw ConfigError("LoRA target set is empty");
  for (const auto& t : cfg.targets) {
    if (t != "query" && t != "key" && t != "value") {
      throw ConfigError("unknown LoRA target '" + t +
                        "' (expected query, key or value)");
    }
  }

  const int d = base.config.d_model;
  Rng rng(splitmix64(seed ^ 0x6c6f7261ULL));
  // A ~ N(0, 0.02), B = 0: the adapted model equals the base at step 0.
  for (const auto& block : base.attention_block_names()) {
    for (const char* proj : {"q", "k", "v"}) {
      const char* full = proj[0] == 'q' ? "query" : (proj[0] == 'k' ? "key" : "value");
      if (!config_.targets.count(full)) continue;
      LoraPair pair;
      pair.a = MatrixXd(d, config_.rank);
      for (Eigen::Index r = 0; r < pair.a.rows(); ++r) {
        for (Eigen::Index c = 0; c < pair.a.cols(); ++c) {
          pair.a(r, c) = rng.gaussian(0.0, 0.02);
        }
      }
      pair.b = MatrixXd::Zero(config_.rank, d);
      adapters_.emplace(block + "." + proj, std::move(pair));
    }
  }
}

AdaptedModel::AdaptedModel(const ToyModel& base, const LoraAdapter& artifact)
    : base_(&base) {
  config_.rank = static_cast<int>(artifact.rank);
  config_.alpha = static_cast<double>(artifact.alpha);
  config_.dropout = 0.0;  // inference path; dropout is train-only
  config_.targets.clear();

  const int d = base.config.d_model;
  auto known_blocks = base.attention_block_names();
  for (const auto& target : artifact.targets) {
    auto dot = target.name.rfind('.');
    if (dot == std::string::npos) {
      throw BackendError("malformed adapter target name: " + target.name);
    }
    std::string block = target.name.substr(0, dot);
    std::string proj = target.name.substr(dot + 1);
    bool block_known = false;
    for (const auto& b : known_blocks) {
      if (b == block) {
        block_known = true;
        break;
      }
    }
    if (!block_known || (proj != "q" && proj != "k" && proj != "v")) {
      throw BackendError("adapter target " + target.name +
                         " does not exist in the base model");
    }
    if (static_cast<int>(target.d) != d || static_cast<int>(target.k) != d) {
      throw BackendError("adapter target " + target.name +
                         " has dimensions for a different base model");
    }
    config_.targets.insert(proj == "q" ? "query" : (proj == "k" ? "key" : "value"));
    LoraPair pair;
    pair.a = target.a.cast<double>();
    pair.b = target.b.cast<double>();
    adapters_.emplace(target.name, std::move(pair));
  }
}

size_t AdaptedModel::trainable_param_count() const {
  size_t count = 0;
  for (const auto& [name, pair] : adapters_) {
    (void)name;
    count += static_cast<size_t>(pair.a.size()) + static_cast<size_t>(pair.b.size());
  }
  return count;
}

LoraAdapter AdaptedModel::export_adapter(std::string user_id) {
  LoraAdapter artifact;
  artifact.user_id = std::move(user_id);
  artifact.base_fingerprint = base_->fingerprint();
  artifact.rank = static_cast<uint32_t>(config_.rank);
  artifact.alpha = static_cast<float>(config_.alpha);
  for (auto& [name, pair] : adapters_) {
    AdapterTarget t;
    t.name = name;
    t.d = static_cast<uint32_t>(pair.a.rows());
    t.k = static_cast<uint32_t>(pair.b.cols());
    t.a = pair.a.cast<float>();
    t.b = pair.b.cast<float>();
    // Snap the live matrices to the serialized precision so adapter-form
    // and reloaded-form forwards agree bitwise.
    pair.a = t.a.cast<double>();
    pair.b = t.b.cast<double>();
    artifact.targets.push_back(std::move(t));
  }
  return artifact;
}

std::map<std::string, LoraPair> AdaptedModel::zero_gradients() const {
  std::map<std::string, LoraPair> grads;
  for (const auto& [name, pair] : adapters_) {
    LoraPair g;
    g.a = MatrixXd::Zero(pair.a.rows(), pair.a.cols());
    g.b = MatrixXd::Zero(pair.b.rows(), pair.b.cols());
    grads.emplace(name, std::move(g));
  }
  return grads;
}

namespace {

// Shared forward over encoder + teacher-forced decoder. Caches are written
// only when `cache` is non-null (training / gradient checks).
struct ForwardContext {
  const ToyModel* base;
  const std::map<std::string, LoraPair>* adapters;
  double scaling;
  double dropout;
  Rng* dropout_rng;
};

MatrixXd run_encoder(const ForwardContext& ctx, std::span<const int> enc_ids,
                     SeqCache* cache) {
  const auto& base = *ctx.base;
  MatrixXd x = embed_sequence(base.enc_embed, enc_ids, base.config.d_model);
  if (cache) cache->enc.resize(base.encoder.size());
  for (size_t i = 0; i < base.encoder.size(); ++i) {
    const EncoderLayer& layer = base.encoder[i];
    EncLayerCache* lc = cache ? &cache->enc[i] : nullptr;
    std::string block = "enc." + std::to_string(i) + ".self";
    AttnParams params{&layer.attn, find_block_adapters(*ctx.adapters, block),
                      ctx.scaling, ctx.dropout, base.config.num_heads};
    MatrixXd normed = layer_norm(layer.ln1, x, lc ? &lc->ln1 : nullptr);
    x += attention(params, normed, normed, /*causal=*/false, ctx.dropout_rng,
                   lc ? &lc->attn : nullptr);
    MatrixXd ff_in = layer_norm(layer.ln2, x, lc ? &lc->ln2 : nullptr);
    x += feed_forward(layer.ff, ff_in, lc ? &lc->ff : nullptr);
  }
  MatrixXd memory = layer_norm(base.enc_final_ln, x, cache ? &cache->enc_final : nullptr);
  if (cache) cache->memory = memory;
  return memory;
}

MatrixXd run_decoder(const ForwardContext& ctx, const MatrixXd& memory,
                     std::span<const int> dec_input_ids, SeqCache* cache) {
  const auto& base = *ctx.base;
  MatrixXd x = embed_sequence(base.dec_embed, dec_input_ids, base.config.d_model);
  if (cache) cache->dec.resize(base.decoder.size());
  for (size_t i = 0; i < base.decoder.size(); ++i) {
    const DecoderLayer& layer = base.decoder[i];
    DecLayerCache* lc = cache ? &cache->dec[i] : nullptr;
    std::string self_block = "dec." + std::to_string(i) + ".self";
    std::string cross_block = "dec." + std::to_string(i) + ".cross";

    AttnParams self_params{&layer.self_attn,
                           find_block_adapters(*ctx.adapters, self_block),
                           ctx.scaling, ctx.dropout, base.config.num_heads};
    MatrixXd normed = layer_norm(layer.ln1, x, lc ? &lc->ln1 : nullptr);
    x += attention(self_params, normed, normed, /*causal=*/true, ctx.dropout_rng,
                   lc ? &lc->self_attn : nullptr);

    AttnParams cross_params{&layer.cross_attn,
                            find_block_adapters(*ctx.adapters, cross_block),
                            ctx.scaling, ctx.dropout, base.config.num_heads};
    MatrixXd cross_in = layer_norm(layer.ln2, x, lc ? &lc->ln2 : nullptr);
    x += attention(cross_params, cross_in, memory, /*causal=*/false,
                   ctx.dropout_rng, lc ? &lc->cross_attn : nullptr);

    MatrixXd ff_in = layer_norm(layer.ln3, x, lc ? &lc->ln3 : nullptr);
    x += feed_forward(layer.ff, ff_in, lc ? &lc->ff : nullptr);
  }
  MatrixXd out = layer_norm(base.dec_final_ln, x, cache ? &cache->dec_final : nullptr);
  if (cache) cache->dec_out = out;
  return out;
}

// ---------------------------------------------------------------------------
// backward ops
// ---------------------------------------------------------------------------

MatrixXd layer_norm_backward(const LayerNormParams& ln, const LnCache& cache,
                             const MatrixXd& dy) {
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  MatrixXd dyg = (dy.array().rowwise() * ln.gain.transpose().array()).matrix();
  MatrixXd dx(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    double m1 = dyg.row(r).mean();
    double m2 = (dyg.row(r).array() * cache.xhat.row(r).array()).mean();
    dx.row(r) = (cache.inv_std(r) *
                 (dyg.row(r).array() - m1 - cache.xhat.row(r).array() * m2))
                    .matrix();
  }
  return dx;
}

MatrixXd project_backward(const ProjCache& cache, const MatrixXd& w0,
                          const LoraPair* lora, double scaling, const MatrixXd& dy,
                          const std::string& key,
                          std::map<std::string, LoraPair>& grads) {
  MatrixXd dx = dy * w0.transpose();
  if (lora) {
    auto& g = grads.at(key);
    g.b.noalias() += scaling * (cache.mid.transpose() * dy);
    MatrixXd dmid = scaling * (dy * lora->b.transpose());
    g.a.noalias() += cache.dropped.transpose() * dmid;
    MatrixXd dlora = dmid * lora->a.transpose();
    if (cache.mask.size() > 0) dlora = dlora.cwiseProduct(cache.mask);
    dx += dlora;
  }
  return dx;
}

struct AttnBackwardResult {
  MatrixXd d_q_in;
  MatrixXd d_kv_in;
};

AttnBackwardResult attention_backward(const AttnParams& p, const std::string& block,
                                      const AttnCache& cache, const MatrixXd& dy,
                                      std::map<std::string, LoraPair>& grads) {
  const Eigen::Index nq = cache.q.rows();
  const Eigen::Index nk = cache.k.rows();
  const int d = static_cast<int>(cache.q.cols());
  const int dh = d / p.num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  MatrixXd dconcat = dy * p.block->wo.transpose();
  MatrixXd dq = MatrixXd::Zero(nq, d);
  MatrixXd dk = MatrixXd::Zero(nk, d);
  MatrixXd dv = MatrixXd::Zero(nk, d);

  for (int h = 0; h < p.num_heads; ++h) {
    auto qh = cache.q.middleCols(h * dh, dh);
    auto kh = cache.k.middleCols(h * dh, dh);
    auto vh = cache.v.middleCols(h * dh, dh);
    const MatrixXd& probs = cache.probs[static_cast<size_t>(h)];
    MatrixXd dout = dconcat.middleCols(h * dh, dh);

    MatrixXd dprobs = dout * vh.transpose();
    dv.middleCols(h * dh, dh) = probs.transpose() * dout;

    // softmax backward per row: dS = P o (dP - sum(dP o P))
    MatrixXd dscores(nq, nk);
    for (Eigen::Index r = 0; r < nq; ++r) {
      double dot = (dprobs.row(r).array() * probs.row(r).array()).sum();
      dscores.row(r) =
          (probs.row(r).array() * (dprobs.row(r).array() - dot)).matrix();
    }
    dq.middleCols(h * dh, dh) = (dscores * kh) * scale;
    dk.middleCols(h * dh, dh) = (dscores.transpose() * qh) * scale;
  }

  AttnBackwardResult out;
  out.d_q_in = project_backward(cache.pq, p.block->wq, p.adapters.q, p.scaling, dq,
                                block + ".q", grads);
  out.d_kv_in = project_backward(cache.pk, p.block->wk, p.adapters.k, p.scaling, dk,
                                 block + ".k", grads);
  out.d_kv_in += project_backward(cache.pv, p.block->wv, p.adapters.v, p.scaling, dv,
                                  block + ".v", grads);
  return out;
}

MatrixXd feed_forward_backward(const FeedForwardBlock& ff, const FfCache& cache,
                               const MatrixXd& dy) {
  MatrixXd dact = dy * ff.w2.transpose();
  MatrixXd dpre =
      (cache.pre.array() > 0.0).select(dact, MatrixXd::Zero(dact.rows(), dact.cols()));
  return dpre * ff.w1.transpose();
}

void run_backward(const ForwardContext& ctx, const SeqCache& cache,
                  const MatrixXd& dlogits, std::map<std::string, LoraPair>& grads) {
  const auto& base = *ctx.base;

  MatrixXd dx = dlogits * base.w_out.transpose();
  dx = layer_norm_backward(base.dec_final_ln, cache.dec_final, dx);

  MatrixXd dmemory = MatrixXd::Zero(cache.memory.rows(), cache.memory.cols());
  for (size_t i = base.decoder.size(); i-- > 0;) {
    const DecoderLayer& layer = base.decoder[i];
    const DecLayerCache& lc = cache.dec[i];
    std::string self_block = "dec." + std::to_string(i) + ".self";
    std::string cross_block = "dec." + std::to_string(i) + ".cross";

    // ff sub-block
    MatrixXd d_ff_in = feed_forward_backward(layer.ff, lc.ff, dx);
    dx += layer_norm_backward(layer.ln3, lc.ln3, d_ff_in);

    // cross attention
    AttnParams cross_params{&layer.cross_attn,
                            find_block_adapters(*ctx.adapters, cross_block),
                            ctx.scaling, ctx.dropout, base.config.num_heads};
    AttnBackwardResult cross =
        attention_backward(cross_params, cross_block, lc.cross_attn, dx, grads);
    dmemory += cross.d_kv_in;
    dx += layer_norm_backward(layer.ln2, lc.ln2, cross.d_q_in);

    // causal self attention
    AttnParams self_params{&layer.self_attn,
                           find_block_adapters(*ctx.adapters, self_block),
                           ctx.scaling, ctx.dropout, base.config.num_heads};
    AttnBackwardResult self =
        attention_backward(self_params, self_block, lc.self_attn, dx, grads);
    dx += layer_norm_backward(layer.ln1, lc.ln1, self.d_q_in + self.d_kv_in);
  }

  // memory gradient flows through the encoder stack
  MatrixXd de = layer_norm_backward(base.enc_final_ln, cache.enc_final, dmemory);
  for (size_t i = base.encoder.size(); i-- > 0;) {
    const EncoderLayer& layer = base.encoder[i];
    const EncLayerCache& lc = cache.enc[i];
    std::string block = "enc." + std::to_string(i) + ".self";

    MatrixXd d_ff_in = feed_forward_backward(layer.ff, lc.ff, de);
    de += layer_norm_backward(layer.ln2, lc.ln2, d_ff_in);

    AttnParams params{&layer.attn, find_block_adapters(*ctx.adapters, block),
                      ctx.scaling, ctx.dropout, base.config.num_heads};
    AttnBackwardResult attn =
        attention_backward(params, block, lc.attn, de, grads);
    de += layer_norm_backward(layer.ln1, lc.ln1, attn.d_q_in + attn.d_kv_in);
  }
}

double cross_entropy_rows(const MatrixXd& logits, std::span<const int> labels,
                          MatrixXd* dlogits) {
  double loss = 0.0;
  if (dlogits) *dlogits = MatrixXd::Zero(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    int label = labels[static_cast<size_t>(t)];
    double m = logits.row(t).maxCoeff();
    Eigen::RowVectorXd shifted = (logits.row(t).array() - m).exp().matrix();
    double z = shifted.sum();
    loss += std::log(z) + m - logits(t, label);
    if (dlogits) {
      dlogits->row(t) = shifted / z;
      (*dlogits)(t, label) -= 1.0;
    }
  }
  return loss;
}

}  // namespace

MatrixXd AdaptedModel::encode(std::span<const int> enc_ids) const {
  ForwardContext ctx{base_, &adapters_, config_.scaling(), 0.0, nullptr};
  return run_encoder(ctx, enc_ids, nullptr);
}

MatrixXd AdaptedModel::decoder_logits(const MatrixXd& memory,
                                      std::span<const int> dec_input_ids) const {
  ForwardContext ctx{base_, &adapters_, config_.scaling(), 0.0, nullptr};
  MatrixXd out = run_decoder(ctx, memory, dec_input_ids, nullptr);
  return out * base_->w_out;
}

VectorXd AdaptedModel::next_token_log_probs(const MatrixXd& memory,
                                            std::span<const int> emitted) const {
  std::vector<int> dec_input;
  dec_input.reserve(emitted.size() + 1);
  dec_input.push_back(WordTokenizer::kBos);
  dec_input.insert(dec_input.end(), emitted.begin(), emitted.end());
  MatrixXd logits = decoder_logits(memory, dec_input);
  VectorXd row = logits.row(logits.rows() - 1).transpose();
  double m = row.maxCoeff();
  double lse = m + std::log((row.array() - m).exp().sum());
  return (row.array() - lse).matrix();
}

double AdaptedModel::batch_loss(std::span<const EncodedPair> pairs) const {
  ForwardContext ctx{base_, &adapters_, config_.scaling(), 0.0, nullptr};
  double loss_sum = 0.0;
  size_t tokens = 0;
  for (const auto& pair : pairs) {
    MatrixXd memory = run_encoder(ctx, pair.input_ids, nullptr);
    std::vector<int> dec_input;
    dec_input.reserve(pair.target_ids.size());
    dec_input.push_back(WordTokenizer::kBos);
    dec_input.insert(dec_input.end(), pair.target_ids.begin(),
                     pair.target_ids.end() - 1);
    MatrixXd logits = run_decoder(ctx, memory, dec_input, nullptr) * base_->w_out;
    loss_sum += cross_entropy_rows(logits, pair.target_ids, nullptr);
    tokens += pair.target_ids.size();
  }
  if (tokens == 0) throw DataError("batch_loss: no target tokens");
  return loss_sum / static_cast<double>(tokens);
}

AdaptedModel::BackwardResult AdaptedModel::accumulate_gradients(
    std::span<const EncodedPair> pairs, std::map<std::string, LoraPair>& grads,
    Rng* dropout_rng) const {
  ForwardContext ctx{base_, &adapters_, config_.scaling(), config_.dropout,
                     dropout_rng};
  BackwardResult result;
  for (const auto& pair : pairs) {
    SeqCache cache;
    MatrixXd memory = run_encoder(ctx, pair.input_ids, &cache);
    std::vector<int> dec_input;
    dec_input.reserve(pair.target_ids.size());
    dec_input.push_back(WordTokenizer::kBos);
    dec_input.insert(dec_input.end(), pair.target_ids.begin(),
                     pair.target_ids.end() - 1);
    MatrixXd logits = run_decoder(ctx, memory, dec_input, &cache) * base_->w_out;

    MatrixXd dlogits;
    result.loss_sum += cross_entropy_rows(logits, pair.target_ids, &dlogits);
    result.tokens += pair.target_ids.size();
    run_backward(ctx, cache, dlogits, grads);
  }
  return result;
}

AdaptedModel attach_adapters(const ToyModel& base, const LoraConfig& cfg,
                             uint64_t seed) {
  return AdaptedModel(base, cfg, seed);
}

ToyModel merge_into_base(const AdaptedModel& model) {
  ToyModel merged = model.base();
  double scaling = model.config().scaling();
  for (const auto& [name, pair] : model.adapters()) {
    auto dot = name.rfind('.');
    std::string block = name.substr(0, dot);
    std::string proj = name.substr(dot + 1);

    AttentionBlock* attn = nullptr;
    if (block.rfind("enc.", 0) == 0) {
      size_t idx = std::stoul(block.substr(4));
      attn = &merged.encoder[idx].attn;
    } else {
      size_t idx = std::stoul(block.substr(4));
      bool cross = block.find(".cross") != std::string::npos;
      attn = cross ? &merged.decoder[idx].cross_attn : &merged.decoder[idx].self_attn;
    }
    MatrixXd* w0 = proj == "q" ? &attn->wq : (proj == "k" ? &attn->wk : &attn->wv);
    w0->noalias() += scaling * (pair.a * pair.b);
  }
  return merged;
}

std::vector<EncodedPair> encode_pairs(const ToyModel& base,
                                      std::span<const TrainingPair> pairs) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    EncodedPair e;
    e.input_ids = base.encode_input(pair.input);
    e.target_ids = base.encode_target(pair.target);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace persona
