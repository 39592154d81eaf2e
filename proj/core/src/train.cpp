#include "persona/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "persona/errors.hpp"

namespace persona {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
    throw ConfigError("warmup fraction must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
  if (batch_size < 1 || micro_batch_size < 1) {
    throw ConfigError("batch sizes must be >= 1");
  }
}

double scheduled_learning_rate(const TrainConfig& cfg, int step, int total_steps) {
  int warmup = static_cast<int>(
      std::ceil(cfg.warmup_fraction * static_cast<double>(total_steps)));
  if (warmup > 0 && step < warmup) {
    return cfg.learning_rate * static_cast<double>(step + 1) /
           static_cast<double>(warmup);
  }
  int decay_span = total_steps - warmup;
  if (decay_span <= 0) return cfg.learning_rate;
  return cfg.learning_rate * static_cast<double>(total_steps - step) /
         static_cast<double>(decay_span);
}

namespace {

struct AdamState {
  MatrixXd m, v;
};

struct AdamOptimizer {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  int t = 0;
  std::map<std::string, AdamState> state_a, state_b;

  void init(const std::map<std::string, LoraPair>& params) {
    for (const auto& [name, pair] : params) {
      state_a[name] = {MatrixXd::Zero(pair.a.rows(), pair.a.cols()),
                       MatrixXd::Zero(pair.a.rows(), pair.a.cols())};
      state_b[name] = {MatrixXd::Zero(pair.b.rows(), pair.b.cols()),
                       MatrixXd::Zero(pair.b.rows(), pair.b.cols())};
    }
  }

  void update_matrix(MatrixXd& param, const MatrixXd& grad, AdamState& s, double lr) {
    s.m = beta1 * s.m + (1.0 - beta1) * grad;
    s.v = beta2 * s.v + (1.0 - beta2) * grad.cwiseProduct(grad);
    double bc1 = 1.0 - std::pow(beta1, t);
    double bc2 = 1.0 - std::pow(beta2, t);
    MatrixXd mhat = s.m / bc1;
    MatrixXd vhat = s.v / bc2;
    param -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    if (weight_decay > 0.0) param -= lr * weight_decay * param;
  }

  void step(std::map<std::string, LoraPair>& params,
            const std::map<std::string, LoraPair>& grads, double lr) {
    ++t;
    for (auto& [name, pair] : params) {
      const LoraPair& g = grads.at(name);
      update_matrix(pair.a, g.a, state_a.at(name), lr);
      update_matrix(pair.b, g.b, state_b.at(name), lr);
    }
  }
};

}  // namespace

TrainResult train_user_adapter(const ToyModel& base,
                               std::span<const TrainingPair> pairs,
                               const LoraConfig& lora, const TrainConfig& train,
                               std::string user_id) {
  train.validate();
  if (pairs.empty()) throw DataError("cannot train an adapter on an empty pair list");

  std::vector<EncodedPair> encoded = encode_pairs(base, pairs);

  AdaptedModel model(base, lora, splitmix64(train.seed ^ 0x696e6974ULL));
  Rng order_rng(splitmix64(train.seed ^ 0x736875666cULL));
  Rng dropout_rng(splitmix64(train.seed ^ 0x64726f70ULL));

  const int n = static_cast<int>(encoded.size());
  const int steps_per_epoch = (n + train.batch_size - 1) / train.batch_size;
  const int total_steps = train.epochs * steps_per_epoch;

  AdamOptimizer adam;
  adam.weight_decay = train.weight_decay;
  adam.init(model.adapters());

  TrainResult result;
  result.epoch_mean_loss.reserve(static_cast<size_t>(train.epochs));

  std::vector<int> order(encoded.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  int step_index = 0;
  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    if (train.shuffle) order_rng.shuffle(order);

    double epoch_loss_sum = 0.0;
    size_t epoch_tokens = 0;

    for (int begin = 0; begin < n; begin += train.batch_size) {
      int end = std::min(n, begin + train.batch_size);
      auto grads = model.zero_gradients();
      double batch_loss_sum = 0.0;
      size_t batch_tokens = 0;

      for (int micro_begin = begin; micro_begin < end;
           micro_begin += train.micro_batch_size) {
        int micro_end = std::min(end, micro_begin + train.micro_batch_size);
        std::vector<EncodedPair> micro;
        micro.reserve(static_cast<size_t>(micro_end - micro_begin));
        for (int i = micro_begin; i < micro_end; ++i) {
          micro.push_back(encoded[static_cast<size_t>(order[static_cast<size_t>(i)])]);
        }
        auto partial = model.accumulate_gradients(micro, grads, &dropout_rng);
        batch_loss_sum += partial.loss_sum;
        batch_tokens += partial.tokens;
      }

      double mean_loss = batch_loss_sum / static_cast<double>(batch_tokens);
      if (!std::isfinite(mean_loss)) {
        throw BackendError("training diverged (non-finite loss) at epoch " +
                           std::to_string(epoch + 1) + ", step " +
                           std::to_string(step_index + 1));
      }

      double inv_tokens = 1.0 / static_cast<double>(batch_tokens);
      for (auto& [name, g] : grads) {
        (void)name;
        g.a *= inv_tokens;
        g.b *= inv_tokens;
      }

      double lr = scheduled_learning_rate(train, step_index, total_steps);
      adam.step(model.adapters(), grads, lr);
      ++step_index;

      epoch_loss_sum += batch_loss_sum;
      epoch_tokens += batch_tokens;
    }

    result.epoch_mean_loss.push_back(epoch_loss_sum /
                                     static_cast<double>(epoch_tokens));
  }

  result.optimizer_steps = step_index;
  result.adapter = model.export_adapter(std::move(user_id));
  return result;
}

}  // namespace persona
