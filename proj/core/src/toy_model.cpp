#include "persona/toy_model.hpp"

#include <cmath>

#include "persona/errors.hpp"
#include "persona/rng.hpp"
#include "persona/tokenize.hpp"

namespace persona {

WordTokenizer WordTokenizer::build(std::span<const TrainingPair> pairs) {
  WordTokenizer tok;
  for (const auto& pair : pairs) {
    for (const auto& text : {pair.input, pair.target}) {
      for (auto& word : alnum_tokens(text)) {
        if (tok.ids_.emplace(word, static_cast<int>(tok.words_.size()) + 4).second) {
          tok.words_.push_back(word);
        }
      }
    }
  }
  return tok;
}

WordTokenizer WordTokenizer::from_words(std::vector<std::string> words) {
  WordTokenizer tok;
  tok.words_ = std::move(words);
  for (size_t i = 0; i < tok.words_.size(); ++i) {
    tok.ids_.emplace(tok.words_[i], static_cast<int>(i) + 4);
  }
  return tok;
}

std::vector<int> WordTokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  for (auto& word : alnum_tokens(text)) {
    auto it = ids_.find(word);
    out.push_back(it == ids_.end() ? kUnk : it->second);
  }
  return out;
}

std::string WordTokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 4) continue;
    size_t idx = static_cast<size_t>(id - 4);
    if (idx >= words_.size()) continue;
    if (!out.empty()) out.push_back(' ');
    out += words_[idx];
  }
  return out;
}

namespace {

void fill_gaussian(MatrixXd& m, Rng& rng, double stddev) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.gaussian(0.0, stddev);
    }
  }
}

LayerNormParams make_ln(int d) {
  LayerNormParams ln;
  ln.gain = VectorXd::Ones(d);
  ln.bias = VectorXd::Zero(d);
  return ln;
}

AttentionBlock make_attention(int d, Rng& rng) {
  AttentionBlock block;
  double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  block.wq = MatrixXd(d, d);
  block.wk = MatrixXd(d, d);
  block.wv = MatrixXd(d, d);
  block.wo = MatrixXd(d, d);
  fill_gaussian(block.wq, rng, stddev);
  fill_gaussian(block.wk, rng, stddev);
  fill_gaussian(block.wv, rng, stddev);
  fill_gaussian(block.wo, rng, stddev);
  return block;
}

FeedForwardBlock make_ff(int d, int ff_dim, Rng& rng) {
  FeedForwardBlock ff;
  ff.w1 = MatrixXd(d, ff_dim);
  ff.w2 = MatrixXd(ff_dim, d);
  fill_gaussian(ff.w1, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  fill_gaussian(ff.w2, rng, 1.0 / std::sqrt(static_cast<double>(ff_dim)));
  ff.b1 = VectorXd::Zero(ff_dim);
  ff.b2 = VectorXd::Zero(d);
  return ff;
}

void hash_matrix(Sha256Stream& h, std::string_view name, const MatrixXd& m) {
  h.update_text(name);
  h.update_u32(static_cast<uint32_t>(m.rows()));
  h.update_u32(static_cast<uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      h.update_f64(m(r, c));
    }
  }
}

void hash_vector(Sha256Stream& h, std::string_view name, const VectorXd& v) {
  h.update_text(name);
  h.update_u32(static_cast<uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) h.update_f64(v(i));
}

void hash_ln(Sha256Stream& h, std::string_view name, const LayerNormParams& ln) {
  hash_vector(h, std::string(name) + ".gain", ln.gain);
  hash_vector(h, std::string(name) + ".bias", ln.bias);
}

void hash_attention(Sha256Stream& h, const std::string& name, const AttentionBlock& a) {
  hash_matrix(h, name + ".wq", a.wq);
  hash_matrix(h, name + ".wk", a.wk);
  hash_matrix(h, name + ".wv", a.wv);
  hash_matrix(h, name + ".wo", a.wo);
}

void hash_ff(Sha256Stream& h, const std::string& name, const FeedForwardBlock& ff) {
  hash_matrix(h, name + ".w1", ff.w1);
  hash_vector(h, name + ".b1", ff.b1);
  hash_matrix(h, name + ".w2", ff.w2);
  hash_vector(h, name + ".b2", ff.b2);
}

}  // namespace

ToyModel ToyModel::create(ToyModelConfig cfg, WordTokenizer tok, uint64_t seed) {
  cfg.vocab_size = tok.vocab_size();
  if (cfg.d_model < 1 || cfg.num_heads < 1 || cfg.d_model % cfg.num_heads != 0) {
    throw ConfigError("d_model must be a positive multiple of num_heads");
  }
  if (cfg.encoder_layers < 1 || cfg.decoder_layers < 1) {
    throw ConfigError("encoder and decoder need at least one layer");
  }
  if (cfg.max_input_len < 2 || cfg.max_output_len < 1) {
    throw ConfigError("sequence length caps too small");
  }

  ToyModel model;
  model.config = cfg;
  model.tokenizer = std::move(tok);

  Rng rng(splitmix64(seed ^ 0x746f796d6f64656cULL));
  const int d = cfg.d_model;
  const int v = cfg.vocab_size;

  model.enc_embed = MatrixXd(v, d);
  model.dec_embed = MatrixXd(v, d);
  model.w_out = MatrixXd(d, v);
  fill_gaussian(model.enc_embed, rng, 1.0);
  fill_gaussian(model.dec_embed, rng, 1.0);
  fill_gaussian(model.w_out, rng, 1.0 / std::sqrt(static_cast<double>(d)));

  model.encoder.reserve(static_cast<size_t>(cfg.encoder_layers));
  for (int i = 0; i < cfg.encoder_layers; ++i) {
    EncoderLayer layer;
    layer.ln1 = make_ln(d);
    layer.ln2 = make_ln(d);
    layer.attn = make_attention(d, rng);
    layer.ff = make_ff(d, cfg.ff_dim, rng);
    model.encoder.push_back(std::move(layer));
  }
  model.decoder.reserve(static_cast<size_t>(cfg.decoder_layers));
  for (int i = 0; i < cfg.decoder_layers; ++i) {
    DecoderLayer layer;
    layer.ln1 = make_ln(d);
    layer.ln2 = make_ln(d);
    layer.ln3 = make_ln(d);
    layer.self_attn = make_attention(d, rng);
    layer.cross_attn = make_attention(d, rng);
    layer.ff = make_ff(d, cfg.ff_dim, rng);
    model.decoder.push_back(std::move(layer));
  }
  model.enc_final_ln = make_ln(d);
  model.dec_final_ln = make_ln(d);
  return model;
}

Fingerprint ToyModel::fingerprint() const {
  Sha256Stream h;
  h.update_text("toy-model-v1");
  h.update_u32(static_cast<uint32_t>(config.vocab_size));
  h.update_u32(static_cast<uint32_t>(config.d_model));
  h.update_u32(static_cast<uint32_t>(config.num_heads));
  h.update_u32(static_cast<uint32_t>(config.ff_dim));
  h.update_u32(static_cast<uint32_t>(config.encoder_layers));
  h.update_u32(static_cast<uint32_t>(config.decoder_layers));
  for (const auto& word : tokenizer.words()) {
    h.update_u32(static_cast<uint32_t>(word.size()));
    h.update_text(word);
  }
  hash_matrix(h, "enc_embed", enc_embed);
  hash_matrix(h, "dec_embed", dec_embed);
  hash_matrix(h, "w_out", w_out);
  for (size_t i = 0; i < encoder.size(); ++i) {
    std::string base = "enc." + std::to_string(i);
    hash_ln(h, base + ".ln1", encoder[i].ln1);
    hash_ln(h, base + ".ln2", encoder[i].ln2);
    hash_attention(h, base + ".self", encoder[i].attn);
    hash_ff(h, base + ".ff", encoder[i].ff);
  }
  for (size_t i = 0; i < decoder.size(); ++i) {
    std::string base = "dec." + std::to_string(i);
    hash_ln(h, base + ".ln1", decoder[i].ln1);
    hash_ln(h, base + ".ln2", decoder[i].ln2);
    hash_ln(h, base + ".ln3", decoder[i].ln3);
    hash_attention(h, base + ".self", decoder[i].self_attn);
    hash_attention(h, base + ".cross", decoder[i].cross_attn);
    hash_ff(h, base + ".ff", decoder[i].ff);
  }
  hash_ln(h, "enc_final_ln", enc_final_ln);
  hash_ln(h, "dec_final_ln", dec_final_ln);
  return h.finish();
}

std::vector<int> ToyModel::encode_input(std::string_view text) const {
  std::vector<int> ids = tokenizer.encode(text);
  size_t cap = static_cast<size_t>(config.max_input_len - 1);
  if (ids.size() > cap) ids.resize(cap);
  ids.push_back(WordTokenizer::kEos);
  return ids;
}

std::vector<int> ToyModel::encode_target(std::string_view text) const {
  std::vector<int> ids = tokenizer.encode(text);
  size_t cap = static_cast<size_t>(config.max_output_len - 1);
  if (ids.size() > cap) ids.resize(cap);
  ids.push_back(WordTokenizer::kEos);
  return ids;
}

std::vector<std::string> ToyModel::attention_block_names() const {
  std::vector<std::string> names;
  for (size_t i = 0; i < encoder.size(); ++i) {
    names.push_back("enc." + std::to_string(i) + ".self");
  }
  for (size_t i = 0; i < decoder.size(); ++i) {
    names.push_back("dec." + std::to_string(i) + ".self");
    names.push_back("dec." + std::to_string(i) + ".cross");
  }
  return names;
}

}  // namespace persona
