#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "persona/checksum.hpp"
#include "persona/convert.hpp"

namespace persona {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Word-level tokenizer over a user's training pairs. Vocabulary order is
// specials followed by first occurrence, so it is stable across runs.
class WordTokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  static WordTokenizer build(std::span<const TrainingPair> pairs);
  static WordTokenizer from_words(std::vector<std::string> words);

  int vocab_size() const { return static_cast<int>(words_.size()) + 4; }
  std::vector<int> encode(std::string_view text) const;  // no BOS/EOS added
  std::string decode(std::span<const int> ids) const;    // specials skipped
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

// Desk-scale stand-in for the serving LLM: a small encoder-decoder
// transformer with pre-layer-norm blocks and sinusoidal positions, run in
// fp64 so adapter gradients can be checked against finite differences.
struct ToyModelConfig {
  int vocab_size = 0;  // filled from the tokenizer
  int d_model = 64;
  int num_heads = 4;
  int ff_dim = 128;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int max_input_len = 64;
  int max_output_len = 16;
};

struct AttentionBlock {
  MatrixXd wq, wk, wv, wo;  // each d_model x d_model
};

struct LayerNormParams {
  VectorXd gain, bias;
};

struct FeedForwardBlock {
  MatrixXd w1;  // d_model x ff_dim
  VectorXd b1;
  MatrixXd w2;  // ff_dim x d_model
  VectorXd b2;
};

struct EncoderLayer {
  LayerNormParams ln1, ln2;
  AttentionBlock attn;
  FeedForwardBlock ff;
};

struct DecoderLayer {
  LayerNormParams ln1, ln2, ln3;
  AttentionBlock self_attn, cross_attn;
  FeedForwardBlock ff;
};

struct ToyModel {
  ToyModelConfig config;
  WordTokenizer tokenizer;
  std::string owner;  // user id when the model is user-specific; may be empty

  MatrixXd enc_embed;  // vocab x d_model
  MatrixXd dec_embed;  // vocab x d_model
  MatrixXd w_out;      // d_model x vocab
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;
  LayerNormParams enc_final_ln, dec_final_ln;

  // Deterministic init from the seed; throws ConfigError on a bad config.
  static ToyModel create(ToyModelConfig cfg, WordTokenizer tok, uint64_t seed);

  // SHA-256 over the vocabulary, config and every weight, in a fixed order.
  Fingerprint fingerprint() const;

  // Encoder ids for a prompt: tokens head-truncated to max_input_len - 1,
  // EOS appended. Decoder targets analogously against max_output_len.
  std::vector<int> encode_input(std::string_view text) const;
  std::vector<int> encode_target(std::string_view text) const;

  // Names of every attention projection an adapter may target, model order.
  std::vector<std::string> attention_block_names() const;
};

}  // namespace persona
