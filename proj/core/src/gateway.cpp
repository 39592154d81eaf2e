#include "persona/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "persona/errors.hpp"
#include "persona/privacy.hpp"
#include "persona/tokenize.hpp"

namespace persona {

void DecodeConfig::validate() const {
  if (beam_width < 1) throw ConfigError("beam width must be >= 1");
  if (max_input_tokens < 1 || max_output_tokens < 1) {
    throw ConfigError("token limits must be >= 1");
  }
}

namespace {

struct Hypothesis {
  std::vector<int> tokens;  // emitted tokens, EOS excluded
  double cum_log_prob = 0.0;
  int emissions = 0;  // tokens.size(), +1 once EOS was emitted
};

bool lex_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

double normalized_score(const Hypothesis& h, double exponent) {
  double len = std::max(1.0, static_cast<double>(h.emissions));
  return h.cum_log_prob / std::pow(len, exponent);
}

}  // namespace

std::vector<int> beam_decode(const Seq2SeqScorer& scorer, const DecodeConfig& cfg) {
  cfg.validate();
  const int vocab = scorer.vocab_size();
  const int eos = scorer.eos_id();

  std::vector<Hypothesis> live = {Hypothesis{}};
  std::vector<Hypothesis> finished;

  for (int step = 0; step < cfg.max_output_tokens && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    candidates.reserve(live.size() * static_cast<size_t>(vocab));
    for (const auto& hyp : live) {
      VectorXd log_probs = scorer.next_log_probs(hyp.tokens);
      for (int tok = 0; tok < vocab; ++tok) {
        Hypothesis next = hyp;
        next.tokens.push_back(tok);
        next.cum_log_prob += log_probs(tok);
        next.emissions += 1;
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Hypothesis& a, const Hypothesis& b) {
                if (a.cum_log_prob != b.cum_log_prob) {
                  return a.cum_log_prob > b.cum_log_prob;
                }
                return lex_less(a.tokens, b.tokens);
              });

    // Each of the top beam_width candidates consumes a slot whether it
    // finished or stays live; beam 1 therefore stops exactly where greedy
    // stops instead of exploring past an argmax EOS.
    live.clear();
    int taken = 0;
    for (auto& cand : candidates) {
      if (taken >= cfg.beam_width) break;
      ++taken;
      if (cand.tokens.back() == eos) {
        cand.tokens.pop_back();  // score keeps the EOS emission
        finished.push_back(std::move(cand));
      } else {
        live.push_back(std::move(cand));
      }
    }
  }

  std::vector<Hypothesis> pool = std::move(finished);
  pool.insert(pool.end(), live.begin(), live.end());
  if (pool.empty()) return {};

  const Hypothesis* best = &pool.front();
  double best_score = normalized_score(*best, cfg.length_norm_exponent);
  for (const auto& hyp : pool) {
    double score = normalized_score(hyp, cfg.length_norm_exponent);
    if (score > best_score ||
        (score == best_score && lex_less(hyp.tokens, best->tokens))) {
      best = &hyp;
      best_score = score;
    }
  }
  return best->tokens;
}

ToyScorer::ToyScorer(const AdaptedModel& model, std::span<const int> enc_ids)
    : model_(&model), memory_(model.encode(enc_ids)) {}

int ToyScorer::vocab_size() const { return model_->base().config.vocab_size; }

VectorXd ToyScorer::next_log_probs(std::span<const int> emitted) const {
  return model_->next_token_log_probs(memory_, emitted);
}

MockScript::MockScript(std::map<std::string, std::string> responses)
    : responses_(std::move(responses)) {
  if (!responses_.count("*")) {
    throw ConfigError("mock script must define a \"*\" default response");
  }
}

MockScript MockScript::from_json(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("mock script is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("mock script must be a JSON object");
  std::map<std::string, std::string> responses;
  for (const auto& [key, value] : doc.items()) {
    responses[key] = value.get<std::string>();
  }
  return MockScript(std::move(responses));
}

MockScript MockScript::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open mock script: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const std::string& MockScript::respond(std::string_view prompt) const {
  const std::string* best = nullptr;
  size_t best_len = 0;
  for (const auto& [key, value] : responses_) {
    if (key == "*") continue;
    if (key.size() <= prompt.size() && prompt.substr(0, key.size()) == key) {
      if (!best || key.size() > best_len) {
        best = &value;
        best_len = key.size();
      }
    }
  }
  if (best) return *best;
  return responses_.at("*");
}

ModelHandle ModelHandle::mock(MockScript script) {
  ModelHandle handle;
  handle.backend_ = Backend::Mock;
  handle.mock_ = std::move(script);
  return handle;
}

ModelHandle ModelHandle::remote(RemoteConfig cfg) {
  ModelHandle handle;
  handle.backend_ = Backend::Remote;
  handle.remote_ = std::move(cfg);
  return handle;
}

ModelHandle ModelHandle::toy(std::shared_ptr<const ToyModel> base,
                             std::optional<LoraAdapter> adapter) {
  if (!base) throw ConfigError("toy handle needs a base model");
  ModelHandle handle;
  handle.backend_ = Backend::Toy;
  handle.toy_base_ = std::move(base);
  if (adapter) {
    if (adapter->base_fingerprint != handle.toy_base_->fingerprint()) {
      throw BackendError("adapter for user '" + adapter->user_id +
                         "' does not match the serving base model");
    }
    handle.toy_model_ =
        std::make_shared<AdaptedModel>(*handle.toy_base_, *adapter);
    handle.adapter_ = std::move(adapter);
  } else {
    handle.toy_model_ = std::make_shared<AdaptedModel>(*handle.toy_base_);
  }
  return handle;
}

std::string_view ModelHandle::backend_name() const {
  switch (backend_) {
    case Backend::Mock: return "mock";
    case Backend::Remote: return "remote";
    case Backend::Toy: return "toy";
  }
  return "?";
}

bool ModelHandle::personalized() const { return adapter_.has_value(); }

GenerationResult ModelHandle::generate(std::string_view prompt,
                                       const DecodeConfig& cfg) const {
  cfg.validate();
  if (prompt.empty()) throw ConfigError("prompt must be non-empty");

  // Last-resort safety net; the prompting module's budget is the real guard.
  std::string_view clipped =
      head_tokens(prompt, static_cast<size_t>(cfg.max_input_tokens));

  auto start = std::chrono::steady_clock::now();
  GenerationResult result;
  result.backend = std::string(backend_name());

  // Scripted and remote texts are clipped to the output budget so every
  // backend honors the same token-count contract.
  auto clip_output = [&](std::string text) {
    std::string_view kept =
        head_tokens(text, static_cast<size_t>(cfg.max_output_tokens));
    result.text = std::string(kept);
    result.token_count = static_cast<int>(count_whitespace_tokens(result.text));
  };

  switch (backend_) {
    case Backend::Mock: {
      clip_output(mock_->respond(clipped));
      break;
    }
    case Backend::Remote: {
      GenerationResult remote = remote_generate(*remote_, clipped, cfg);
      clip_output(std::move(remote.text));
      break;
    }
    case Backend::Toy: {
      if (!toy_base_->owner.empty()) privacy::on_access(toy_base_->owner);
      if (adapter_) privacy::on_access(adapter_->user_id);
      std::vector<int> enc_ids = toy_base_->encode_input(clipped);
      ToyScorer scorer(*toy_model_, enc_ids);
      DecodeConfig decode = cfg;
      decode.max_output_tokens =
          std::min(cfg.max_output_tokens, toy_base_->config.max_output_len);
      std::vector<int> out = beam_decode(scorer, decode);
      result.text = toy_base_->tokenizer.decode(out);
      result.token_count = static_cast<int>(out.size());
      break;
    }
  }

  auto end = std::chrono::steady_clock::now();
  result.latency_ms =
      std::chrono::duration<double, std::milli>(end - start).count();
  return result;
}

std::vector<double> RemoteEmbedder::embed(std::string_view text) const {
  return remote_embed(cfg_, text);
}

}  // namespace persona
