// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Run with no arguments for the
// full suite or with criterion names to select a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common/bm25_oracle.hpp"
#include "common/golden_fixtures.hpp"
#include "persona/adapter_store.hpp"
#include "persona/analysis.hpp"
#include "persona/experiment.hpp"
#include "persona/gateway.hpp"
#include "persona/metrics.hpp"
#include "persona/privacy.hpp"
#include "persona/prompting.hpp"
#include "persona/train.hpp"

using namespace persona;
using namespace persona::testing;

namespace {

const std::string kDataDir = PERSONA_TEST_DATA_DIR;
namespace fs = std::filesystem;

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool condition, const std::string& message) {
    if (!condition && ok) {
      ok = false;
      detail = message;
    }
  }
};

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("persona_acceptance_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// shared fixtures
// ---------------------------------------------------------------------------

ProfileEntry entry_of(std::string id,
                      std::vector<std::pair<std::string, std::string>> fields) {
  ProfileEntry e;
  e.entry_id = std::move(id);
  e.fields = std::move(fields);
  return e;
}

// 20 synthetic headline users with profiles of varying size.
Dataset twenty_user_fixture(uint64_t seed) {
  std::vector<std::string> subjects = {"council", "mayor",  "storm", "river",
                                       "market",  "team",   "school", "bridge",
                                       "museum",  "harbor"};
  std::vector<std::string> verbs = {"approves", "rejects", "floods", "wins",
                                    "opens",    "closes",  "delays", "funds"};
  std::vector<std::string> objects = {"budget", "plan",   "valley", "season",
                                      "tunnel", "road",   "festival", "wing"};
  Rng gen(seed);
  Dataset dataset;
  dataset.task = TaskId::LaMP4;
  for (int u = 0; u < 20; ++u) {
    UserRecord record;
    record.user_id = "user-" + std::to_string(u);
    std::string s = subjects[gen.uniform_int(subjects.size())];
    std::string v = verbs[gen.uniform_int(verbs.size())];
    std::string o = objects[gen.uniform_int(objects.size())];
    record.input = "Generate a headline for the following article: the " + s +
                   " " + v + " the " + o + " this week";
    record.gold = s + " " + v + " " + o;
    size_t profile_size = 3 + gen.uniform_int(6);
    for (size_t p = 0; p < profile_size; ++p) {
      std::string ps = subjects[gen.uniform_int(subjects.size())];
      std::string pv = verbs[gen.uniform_int(verbs.size())];
      std::string po = objects[gen.uniform_int(objects.size())];
      ProfileEntry entry = entry_of(
          record.user_id + "-p" + std::to_string(p),
          {{"text", "the " + ps + " " + pv + " the " + po + " again"},
           {"title", ps + " " + pv + " " + po}});
      if (gen.bernoulli(0.5)) {
        int year = 2015 + static_cast<int>(gen.uniform_int(8));
        int month = 1 + static_cast<int>(gen.uniform_int(12));
        int day = 1 + static_cast<int>(gen.uniform_int(28));
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        entry.date = parse_timestamp(buf);
      }
      record.profile.push_back(std::move(entry));
    }
    dataset.records.push_back(std::move(record));
  }
  return dataset;
}

RunConfig small_toy_run(TaskId task) {
  RunConfig cfg;
  cfg.task = task;
  cfg.backend = BackendKind::Toy;
  cfg.toy.d_model = 16;
  cfg.toy.num_heads = 2;
  cfg.toy.ff_dim = 32;
  cfg.toy.encoder_layers = 1;
  cfg.toy.decoder_layers = 1;
  cfg.toy.max_input_len = 32;
  cfg.toy.max_output_len = 6;
  cfg.train.epochs = 2;
  cfg.train.learning_rate = 5e-3;
  cfg.lora.rank = 2;
  cfg.decode.beam_width = 2;
  cfg.decode.max_input_tokens = 256;
  cfg.decode.max_output_tokens = 6;
  cfg.seed = 20240809;
  return cfg;
}

std::string write_default_mock_script(const fs::path& dir, const Dataset& dataset) {
  nlohmann::json script;
  script["*"] = "headline";
  for (const auto& record : dataset.records) script[record.input] = record.gold;
  fs::path path = dir / "mock_script.json";
  std::ofstream out(path);
  out << script.dump();
  return path.string();
}

// Pre-populates `store_dir` with fresh (B = 0) adapters matching the
// per-user base models the run configuration will build.
void populate_identity_adapters(const RunConfig& cfg, const Dataset& dataset,
                                const std::string& store_dir) {
  AdapterStore store(store_dir);
  for (const auto& record : dataset.records) {
    Rng convert_rng(derive_seed(cfg.seed, record.user_id, 0xC04E5645));
    TrainingSet set =
        build_user_training_set(cfg.task, record.profile, convert_rng);
    WordTokenizer tok = WordTokenizer::build(set.pairs);
    ToyModel base = ToyModel::create(
        cfg.toy, std::move(tok), derive_seed(cfg.seed, record.user_id, 0xBA5E));
    AdaptedModel fresh(base, cfg.lora, 1);
    store.save_adapter(fresh.export_adapter(record.user_id));
  }
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

Check template_fidelity() {
  Check check;
  for (TaskId task : kAllTasks) {
    auto fixture = golden_fixture(task);
    std::string ppep = render_ppep(task, fixture.entries[0]);
    std::string golden_ppep =
        read_file_exact(kDataDir + "/golden/" + golden_basename(task, "ppep"));
    check.require(ppep == golden_ppep,
                  std::string(task_name(task)) + " PPEP differs from golden file");

    std::vector<RankedEntry> ranked;
    for (size_t i = 0; i < fixture.entries.size(); ++i) {
      ranked.push_back({static_cast<int>(i), &fixture.entries[i]});
    }
    PersonalizedPrompt prompt = aggregate_prompt(task, fixture.input, ranked, 512);
    std::string golden_aip =
        read_file_exact(kDataDir + "/golden/" + golden_basename(task, "aip"));
    check.require(prompt.text == golden_aip,
                  std::string(task_name(task)) + " AIP differs from golden file");
  }
  return check;
}

Check convert_fidelity() {
  Check check;
  Rng rng(1);

  auto expect = [&](TaskId task, ProfileEntry entry, const std::string& input,
                    const std::string& target) {
    TrainingPair pair = convert_profile_entry(task, entry, rng);
    check.require(pair.input == input,
                  std::string(task_name(task)) + " generated input differs");
    check.require(pair.target == target,
                  std::string(task_name(task)) + " generated output differs");
  };

  expect(TaskId::LaMP1, entry_of("e", {{"title", "T"}, {"abstract", "A"}}),
         "Write an abstract for this title: T", "A");
  expect(TaskId::LaMP2, entry_of("e", {{"description", "D"}, {"tag", "comedy"}}),
         "Which tag does this movie relate to among the following tags? Just "
         "answer with the tag name without further explanation. tags: [sci-fi, "
         "based on a book, comedy, action, twist ending, dystopia, dark comedy, "
         "classic, psychology, fantasy, romance, thought-provoking, social "
         "commentary, violence, true story] description: D",
         "comedy");
  expect(TaskId::LaMP3, entry_of("e", {{"review", "Great phone"}, {"score", "5"}}),
         "What is the score of the following review on a scale of 1 to 5? just "
         "answer with 1, 2, 3, 4, or 5 without further explanation. review: "
         "Great phone",
         "5");
  expect(TaskId::LaMP4, entry_of("e", {{"article", "X body"}, {"title", "X head"}}),
         "Generate a headline for the following article: X body", "X head");
  expect(TaskId::LaMP5, entry_of("e", {{"abstract", "A"}, {"title", "T"}}),
         "Generate a title for the following abstract of a paper: A", "T");
  expect(TaskId::LaMP6, entry_of("e", {{"email", "E"}, {"title", "S"}}),
         "Generate a subject for the following email: E", "S");

  // LaMP-7 completion pairs over 10,000 seeded random tweets.
  constexpr std::string_view kPreamble = "Complete the following tweet: ";
  Rng gen(777);
  for (int i = 0; i < 10000; ++i) {
    size_t n = 2 + gen.uniform_int(60);
    std::string tweet;
    for (size_t t = 0; t < n; ++t) {
      if (t) tweet += " ";
      tweet += "w" + std::to_string(gen.uniform_int(5000));
    }
    Rng seeded(static_cast<uint64_t>(i));
    TrainingPair pair = convert_profile_entry(
        TaskId::LaMP7, entry_of("e", {{"tweet", tweet}}), seeded);
    if (pair.input.substr(0, kPreamble.size()) != kPreamble) {
      check.require(false, "LaMP-7 preamble missing");
      break;
    }
    std::string prefix = pair.input.substr(kPreamble.size());
    std::string reconstructed = prefix + " " + pair.target;
    if (reconstructed != tweet) {
      check.require(false, "LaMP-7 reconstruction failed at tweet " +
                               std::to_string(i));
      break;
    }
    size_t prefix_tokens = count_whitespace_tokens(prefix);
    double fraction =
        static_cast<double>(prefix_tokens) / static_cast<double>(n);
    if (fraction < 0.10 ||
        fraction > 0.20 + 1.0 / static_cast<double>(n) + 1e-12) {
      check.require(false, "LaMP-7 split fraction out of bounds at tweet " +
                               std::to_string(i));
      break;
    }
  }
  return check;
}

Check bm25_oracle_criterion() {
  Check check;
  Rng gen(271828);
  std::vector<std::string> lexicon = {"red",  "blue",  "cat",  "dog",  "run",
                                      "walk", "sun",   "rain", "code", "tree",
                                      "light", "dark", "fast", "slow"};
  for (int trial = 0; trial < 1000; ++trial) {
    size_t doc_count = 1 + gen.uniform_int(20);
    std::vector<std::string> docs;
    for (size_t d = 0; d < doc_count; ++d) {
      size_t len = 1 + gen.uniform_int(12);
      std::string doc;
      for (size_t t = 0; t < len; ++t) {
        if (t) doc += " ";
        doc += lexicon[gen.uniform_int(lexicon.size())];
      }
      docs.push_back(doc);
    }
    size_t query_len = 1 + gen.uniform_int(6);
    std::string query;
    for (size_t t = 0; t < query_len; ++t) {
      if (t) query += " ";
      query += lexicon[gen.uniform_int(lexicon.size())];
    }

    std::vector<ProfileEntry> profile;
    for (size_t d = 0; d < docs.size(); ++d) {
      profile.push_back(entry_of("e" + std::to_string(d), {{"text", docs[d]}}));
    }
    ProfileIndex index = build_index(profile, TaskId::LaMP7);
    RankedList ranked = retrieve_bm25(index, query, static_cast<int>(doc_count));
    auto oracle = bm25_oracle(docs, query);
    auto expected_order = bm25_oracle_ranking(oracle);

    for (size_t i = 0; i < doc_count; ++i) {
      if (ranked.entries[i].index != expected_order[i]) {
        check.require(false, "ranking differs from oracle at trial " +
                                 std::to_string(trial));
        return check;
      }
      double expected =
          oracle[static_cast<size_t>(expected_order[i])];
      if (std::abs(ranked.entries[i].score - expected) > 1e-9) {
        check.require(false, "score differs from oracle at trial " +
                                 std::to_string(trial));
        return check;
      }
    }
  }
  return check;
}

Check lora_identity_gradient() {
  Check check;

  ToyModelConfig toy;
  toy.d_model = 16;
  toy.num_heads = 2;
  toy.ff_dim = 32;
  toy.encoder_layers = 2;
  toy.decoder_layers = 2;
  toy.max_input_len = 16;
  toy.max_output_len = 8;
  WordTokenizer tok = WordTokenizer::from_words(
      {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
       "iota", "kappa"});
  ToyModel base = ToyModel::create(toy, tok, 2025);

  // Identity at init: bitwise-equal logits on 100 random inputs.
  AdaptedModel plain(base);
  LoraConfig lora;
  lora.rank = 4;
  AdaptedModel fresh(base, lora, 7);
  Rng gen(8);
  for (int trial = 0; trial < 100; ++trial) {
    size_t len = 1 + gen.uniform_int(8);
    std::vector<int> enc_ids, dec_ids{WordTokenizer::kBos};
    for (size_t i = 0; i < len; ++i) {
      enc_ids.push_back(4 + static_cast<int>(gen.uniform_int(10)));
      dec_ids.push_back(4 + static_cast<int>(gen.uniform_int(10)));
    }
    MatrixXd a = plain.decoder_logits(plain.encode(enc_ids), dec_ids);
    MatrixXd b = fresh.decoder_logits(fresh.encode(enc_ids), dec_ids);
    if (a.rows() != b.rows() ||
        std::memcmp(a.data(), b.data(),
                    sizeof(double) * static_cast<size_t>(a.size())) != 0) {
      check.require(false,
                    "fresh-adapter logits not bitwise equal at input " +
                        std::to_string(trial));
      return check;
    }
  }

  // Analytic gradients vs central finite differences on a 2-layer model.
  ToyModelConfig grad_cfg = toy;
  grad_cfg.d_model = 8;
  grad_cfg.ff_dim = 16;
  ToyModel grad_base = ToyModel::create(grad_cfg, tok, 31337);
  LoraConfig grad_lora;
  grad_lora.rank = 2;
  grad_lora.dropout = 0.0;
  AdaptedModel model(grad_base, grad_lora, 17);
  Rng weights(18);
  for (auto& [name, pair] : model.adapters()) {
    (void)name;
    for (Eigen::Index r = 0; r < pair.a.rows(); ++r) {
      for (Eigen::Index c = 0; c < pair.a.cols(); ++c) {
        pair.a(r, c) = weights.gaussian(0.0, 0.1);
      }
    }
    for (Eigen::Index r = 0; r < pair.b.rows(); ++r) {
      for (Eigen::Index c = 0; c < pair.b.cols(); ++c) {
        pair.b(r, c) = weights.gaussian(0.0, 0.1);
      }
    }
  }
  std::vector<EncodedPair> batch = {
      {{4, 5, 6, WordTokenizer::kEos}, {7, 8, WordTokenizer::kEos}},
      {{9, 10, WordTokenizer::kEos}, {11, 4, 5, WordTokenizer::kEos}},
  };
  auto grads = model.zero_gradients();
  auto result = model.accumulate_gradients(batch, grads, nullptr);
  double inv_tokens = 1.0 / static_cast<double>(result.tokens);
  for (auto& [name, g] : grads) {
    (void)name;
    g.a *= inv_tokens;
    g.b *= inv_tokens;
  }

  const double h = 1e-5;
  size_t checked = 0;
  for (auto& [name, pair] : model.adapters()) {
    auto fd_matrix = [&](MatrixXd& param, const MatrixXd& analytic) {
      for (Eigen::Index r = 0; r < param.rows(); ++r) {
        for (Eigen::Index c = 0; c < param.cols(); ++c) {
          double saved = param(r, c);
          param(r, c) = saved + h;
          double up = model.batch_loss(batch);
          param(r, c) = saved - h;
          double down = model.batch_loss(batch);
          param(r, c) = saved;
          double fd = (up - down) / (2 * h);
          double a = analytic(r, c);
          double scale = std::max({std::abs(a), std::abs(fd), 1e-6});
          ++checked;
          if (std::abs(a - fd) / scale >= 1e-4) {
            check.require(false, "gradient mismatch in " + name);
          }
        }
      }
    };
    fd_matrix(pair.a, grads.at(name).a);
    fd_matrix(pair.b, grads.at(name).b);
    if (!check.ok) return check;
  }
  check.require(checked > 0, "no gradient entries checked");
  check.detail = std::to_string(checked) + " entries";
  return check;
}

Check merge_param_count() {
  Check check;
  Rng gen(2718);
  for (int trial = 0; trial < 20; ++trial) {
    int heads = 1 + static_cast<int>(gen.uniform_int(3));
    int d = heads * (2 + static_cast<int>(gen.uniform_int(5)));
    ToyModelConfig toy;
    toy.d_model = d;
    toy.num_heads = heads;
    toy.ff_dim = 2 * d;
    toy.encoder_layers = 1 + static_cast<int>(gen.uniform_int(2));
    toy.decoder_layers = 1 + static_cast<int>(gen.uniform_int(2));
    toy.max_input_len = 16;
    toy.max_output_len = 8;
    WordTokenizer tok = WordTokenizer::from_words(
        {"one", "two", "three", "four", "five", "six"});
    ToyModel base = ToyModel::create(toy, tok, 5000 + trial);

    LoraConfig lora;
    lora.rank = 1 + static_cast<int>(gen.uniform_int(8));
    lora.targets.clear();
    const char* all[] = {"query", "key", "value"};
    size_t take = 1 + gen.uniform_int(3);
    for (size_t i = 0; i < take; ++i) lora.targets.insert(all[i]);

    AdaptedModel model(base, lora, 7777 + trial);
    // r * (d + k) summed over adapted matrices (square projections here).
    size_t blocks = static_cast<size_t>(toy.encoder_layers) +
                    2 * static_cast<size_t>(toy.decoder_layers);
    size_t expected = blocks * lora.targets.size() *
                      static_cast<size_t>(lora.rank) * (2 * static_cast<size_t>(d));
    check.require(model.trainable_param_count() == expected,
                  "parameter count differs at trial " + std::to_string(trial));

    // Merge equivalence on a live adapter.
    for (auto& [name, pair] : model.adapters()) {
      (void)name;
      for (Eigen::Index r = 0; r < pair.b.rows(); ++r) {
        for (Eigen::Index c = 0; c < pair.b.cols(); ++c) {
          pair.b(r, c) = gen.gaussian(0.0, 0.05);
        }
      }
    }
    ToyModel merged = merge_into_base(model);
    AdaptedModel merged_plain(merged);
    std::vector<int> enc_ids = {4, 5, 6};
    std::vector<int> dec_ids = {WordTokenizer::kBos, 5, 6};
    MatrixXd a = model.decoder_logits(model.encode(enc_ids), dec_ids);
    MatrixXd b = merged_plain.decoder_logits(merged_plain.encode(enc_ids), dec_ids);
    double max_diff = (a - b).cwiseAbs().maxCoeff();
    check.require(max_diff < 1e-6, "merged forward differs by " +
                                       std::to_string(max_diff) + " at trial " +
                                       std::to_string(trial));
    if (!check.ok) return check;
  }
  return check;
}

Check training_effectiveness() {
  Check check;

  // Synthetic user whose every headline ends with the marker word "zonk".
  Rng gen(12345);
  std::vector<std::string> subjects = {"council", "mayor", "storm", "river",
                                       "market",  "team",  "school", "bridge"};
  std::vector<std::string> verbs = {"approves", "rejects", "floods", "wins",
                                    "opens",    "closes",  "delays"};
  std::vector<std::string> objects = {"budget", "plan", "valley", "season",
                                      "museum", "road", "festival"};
  auto make_pairs = [&](int count, Rng& source) {
    std::vector<TrainingPair> pairs;
    for (int i = 0; i < count; ++i) {
      std::string s = subjects[source.uniform_int(subjects.size())];
      std::string v = verbs[source.uniform_int(verbs.size())];
      std::string o = objects[source.uniform_int(objects.size())];
      TrainingPair pair;
      pair.input = "Generate a headline for the following article: the " + s +
                   " " + v + " the " + o + " this week";
      pair.target = s + " " + v + " " + o + " zonk";
      pair.source_entry_id = "p" + std::to_string(i);
      pairs.push_back(pair);
    }
    return pairs;
  };
  auto pairs = make_pairs(24, gen);

  WordTokenizer tok = WordTokenizer::build(pairs);
  ToyModelConfig toy;
  toy.d_model = 64;
  toy.num_heads = 4;
  toy.ff_dim = 128;
  toy.encoder_layers = 2;
  toy.decoder_layers = 2;
  toy.max_input_len = 32;
  toy.max_output_len = 8;
  ToyModel base = ToyModel::create(toy, tok, 12346);

  LoraConfig lora;
  lora.rank = 8;
  TrainConfig train;
  train.epochs = 50;
  train.learning_rate = 5e-3;  // toy-scale step size
  train.seed = 12347;

  TrainResult result = train_user_adapter(base, pairs, lora, train, "style-user");
  double first = result.epoch_mean_loss.front();
  double last = result.epoch_mean_loss.back();
  check.require(last < 0.5 * first,
                "loss ratio " + std::to_string(last / first) + " not below 0.5");

  // Held-out inputs, unseen during training.
  Rng held_gen(99999);
  auto held_out = make_pairs(20, held_gen);
  auto shared_base = std::make_shared<ToyModel>(base);
  ModelHandle plain = ModelHandle::toy(shared_base);
  ModelHandle adapted = ModelHandle::toy(shared_base, result.adapter);
  DecodeConfig decode;
  decode.beam_width = 4;
  decode.max_output_tokens = 8;

  auto suffix_match_rate = [&](const ModelHandle& handle) {
    int matches = 0;
    for (const auto& pair : held_out) {
      GenerationResult generation = handle.generate(pair.input, decode);
      auto tokens = whitespace_tokens(generation.text);
      if (!tokens.empty() && tokens.back() == "zonk") ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(held_out.size());
  };

  double base_rate = suffix_match_rate(plain);
  double adapted_rate = suffix_match_rate(adapted);
  check.require(base_rate <= 0.20, "base suffix-match rate " +
                                       std::to_string(base_rate) + " above 0.20");
  check.require(adapted_rate >= 0.80, "adapted suffix-match rate " +
                                          std::to_string(adapted_rate) +
                                          " below 0.80");
  std::ostringstream detail;
  detail << "loss " << first << " -> " << last << ", match " << base_rate
         << " -> " << adapted_rate;
  check.detail = detail.str();
  return check;
}

Check mode_degeneracy() {
  Check check;
  Dataset dataset = twenty_user_fixture(4242);

  RunConfig rag_cfg = small_toy_run(TaskId::LaMP4);
  rag_cfg.mode = RunMode::Rag;
  EvalReport rag_report = run_task(rag_cfg, dataset);

  auto store_dir = fresh_dir("degeneracy_store");
  populate_identity_adapters(rag_cfg, dataset, store_dir.string());
  RunConfig peft_cfg = rag_cfg;
  peft_cfg.mode = RunMode::PeftRag;
  peft_cfg.store_dir = store_dir.string();
  EvalReport peft_report = run_task(peft_cfg, dataset);

  for (size_t i = 0; i < dataset.records.size(); ++i) {
    if (peft_report.users[i].prediction != rag_report.users[i].prediction) {
      check.require(false, "peft-rag(B=0) differs from rag for user " +
                               rag_report.users[i].user_id);
      return check;
    }
  }

  // rag over an empty profile equals mode none, byte for byte.
  Dataset lonely;
  lonely.task = TaskId::LaMP4;
  for (int i = 0; i < 3; ++i) {
    UserRecord record;
    record.user_id = "lonely-" + std::to_string(i);
    record.input =
        "Generate a headline for the following article: quiet day number " +
        std::to_string(i);
    record.gold = "quiet day";
    lonely.records.push_back(record);
  }
  RunConfig none_cfg = small_toy_run(TaskId::LaMP4);
  none_cfg.mode = RunMode::None;
  EvalReport none_report = run_task(none_cfg, lonely);
  RunConfig rag_empty_cfg = small_toy_run(TaskId::LaMP4);
  rag_empty_cfg.mode = RunMode::Rag;
  EvalReport rag_empty_report = run_task(rag_empty_cfg, lonely);
  for (size_t i = 0; i < lonely.records.size(); ++i) {
    if (none_report.users[i].prediction != rag_empty_report.users[i].prediction) {
      check.require(false, "rag(empty profile) differs from none for user " +
                               lonely.records[i].user_id);
      return check;
    }
  }
  return check;
}

Check metric_oracle() {
  Check check;
  std::ifstream in(kDataDir + "/metric_oracle.json");
  check.require(in.good(), "metric oracle table missing");
  if (!check.ok) return check;
  nlohmann::json oracle = nlohmann::json::parse(in);

  size_t cases = 0;
  for (const auto& pair : oracle["rouge"]) {
    std::string pred = pair["pred"].get<std::string>();
    std::string gold = pair["gold"].get<std::string>();
    double r1 = rouge(pred, gold, RougeVariant::Rouge1).value;
    double rl = rouge(pred, gold, RougeVariant::RougeL).value;
    check.require(std::abs(r1 - pair["rouge1"].get<double>()) < 1e-9,
                  "rouge1 mismatch on \"" + pred + "\"");
    check.require(std::abs(rl - pair["rougeL"].get<double>()) < 1e-9,
                  "rougeL mismatch on \"" + pred + "\"");
    ++cases;
  }
  for (const auto& c : oracle["accuracy"]) {
    auto preds = c["preds"].get<std::vector<std::string>>();
    auto golds = c["golds"].get<std::vector<std::string>>();
    check.require(std::abs(accuracy(preds, golds).value -
                           c["expected"].get<double>()) < 1e-9,
                  "accuracy mismatch");
    ++cases;
  }
  for (const auto& c : oracle["macro_f1"]) {
    auto preds = c["preds"].get<std::vector<std::string>>();
    auto golds = c["golds"].get<std::vector<std::string>>();
    auto labels = c["labels"].get<std::vector<std::string>>();
    check.require(std::abs(macro_f1(preds, golds, labels).value -
                           c["expected"].get<double>()) < 1e-9,
                  "macro f1 mismatch");
    ++cases;
  }
  for (const auto& c : oracle["ordinal"]) {
    auto preds = c["preds"].get<std::vector<std::string>>();
    auto golds = c["golds"].get<std::vector<std::string>>();
    std::vector<double> p, g;
    for (const auto& s : preds) p.push_back(parse_rating(s));
    for (const auto& s : golds) g.push_back(parse_rating(s));
    auto [mae, rmse] = mae_rmse(p, g);
    check.require(std::abs(mae.value - c["mae"].get<double>()) < 1e-9,
                  "mae mismatch");
    check.require(std::abs(rmse.value - c["rmse"].get<double>()) < 1e-9,
                  "rmse mismatch");
    ++cases;
  }
  check.require(cases >= 30, "fewer than 30 oracle cases");

  // The two worked values, asserted explicitly.
  check.require(std::abs(rouge("the cat", "the cat sat", RougeVariant::Rouge1).value -
                         0.8) < 1e-9,
                "worked rouge value differs");
  std::vector<double> p = {1, 3}, g = {2, 1};
  check.require(std::abs(mae_rmse(p, g).second.value - 1.5811388300841898) < 1e-9,
                "worked rmse value differs");
  check.detail = std::to_string(cases) + " cases";
  return check;
}

Check storage_arithmetic() {
  Check check;
  std::vector<uint64_t> sizes(8, 55'000'000ull);  // synthetic 55 MB adapters
  std::vector<uint64_t> counts = {1'000'000ull};
  StorageReport report = storage_report_from_sizes(sizes, counts, 45e9);

  check.require(report.mean_bytes == 55e6, "mean adapter size not 55 MB");
  check.require(report.projections.size() == 1 &&
                    report.projections[0].second == 55e12,
                "55 MB x 1e6 users must equal 55 TB exactly");
  check.require(report.baseline_projections.size() == 1 &&
                    report.baseline_projections[0].second == 45e15,
                "45 GB x 1e6 users must equal 45,000 TB exactly");

  StorageReport empty = storage_report_from_sizes({}, counts);
  check.require(empty.user_count == 0 && empty.total_bytes == 0 &&
                    empty.projections[0].second == 0.0,
                "empty store must project zeros");
  return check;
}

Check rq3_analysis() {
  Check check;

  auto report_with = [](const std::vector<size_t>& sizes,
                        const std::vector<double>& values) {
    EvalReport report;
    report.config.task = "LaMP-2";
    for (size_t i = 0; i < sizes.size(); ++i) {
      PerUserResult user;
      user.user_id = "u" + std::to_string(i);
      user.profile_size = sizes[i];
      user.metrics["accuracy"] = values[i];
      report.users.push_back(std::move(user));
    }
    return report;
  };

  // Planted positive dependence, n = 200.
  {
    Rng gen(4242);
    std::vector<size_t> sizes;
    std::vector<double> personalized, baseline;
    for (int i = 0; i < 200; ++i) {
      size_t size = 1 + gen.uniform_int(100);
      sizes.push_back(size);
      baseline.push_back(0.5);
      double p_gain = 0.15 + 0.7 * (static_cast<double>(size) / 100.0);
      personalized.push_back(gen.uniform() < p_gain ? 1.0 : 0.0);
    }
    CorrelationReport result = profile_size_analysis(
        report_with(sizes, personalized), report_with(sizes, baseline),
        "accuracy");
    check.require(result.pearson_r > 0.0, "planted dependence gave r <= 0");
    check.require(result.ci_low > 0.0, "planted dependence CI includes 0");
  }

  // Independence: the 95% CI covers 0 in at least 90 of 100 seeded reps.
  {
    int covering = 0;
    for (int rep = 0; rep < 100; ++rep) {
      Rng gen(9000 + rep);
      std::vector<size_t> sizes;
      std::vector<double> personalized, baseline;
      for (int i = 0; i < 200; ++i) {
        sizes.push_back(1 + gen.uniform_int(100));
        baseline.push_back(0.5);
        personalized.push_back(gen.uniform() < 0.5 ? 1.0 : 0.0);
      }
      CorrelationReport result = profile_size_analysis(
          report_with(sizes, personalized), report_with(sizes, baseline),
          "accuracy");
      if (result.ci_low <= 0.0 && 0.0 <= result.ci_high) ++covering;
    }
    check.require(covering >= 90, "CI covered 0 in only " +
                                      std::to_string(covering) + "/100 reps");
    check.detail = "coverage " + std::to_string(covering) + "/100";
  }

  // Ties are excluded from the fit.
  {
    EvalReport p = report_with({5, 6, 7, 8}, {1.0, 0.5, 1.0, 0.0});
    EvalReport b = report_with({5, 6, 7, 8}, {0.5, 0.5, 0.5, 0.5});
    CorrelationReport result = profile_size_analysis(p, b, "accuracy");
    check.require(result.n == 3 && result.excluded_ties == 1,
                  "tie exclusion mismatch");
  }
  return check;
}

Check privacy_boundary() {
  Check check;
  Dataset dataset = twenty_user_fixture(31415);
  auto dir = fresh_dir("privacy");
  std::string script = write_default_mock_script(dir, dataset);
  auto store_dir = fresh_dir("privacy_store");

  privacy::reset_stats();
  for (RunMode mode :
       {RunMode::None, RunMode::Rag, RunMode::Peft, RunMode::PeftRag}) {
    RunConfig cfg = small_toy_run(TaskId::LaMP4);
    cfg.mode = mode;
    cfg.workers = 4;
    if (mode == RunMode::Peft || mode == RunMode::PeftRag) {
      cfg.store_dir = store_dir.string();
    }
    run_task(cfg, dataset);
  }
  auto stats = privacy::stats();
  check.require(stats.checked > 0, "instrumentation recorded no accesses");
  if (stats.violations != 0) {
    std::string sample = stats.samples.empty() ? "" : (": " + stats.samples[0]);
    check.require(false, std::to_string(stats.violations) +
                             " cross-user accesses" + sample);
  }
  check.detail = std::to_string(stats.checked) + " accesses checked";
  privacy::reset_stats();
  return check;
}

Check determinism() {
  Check check;
  Dataset dataset = twenty_user_fixture(2020);
  auto dir = fresh_dir("determinism");
  std::string script = write_default_mock_script(dir, dataset);

  // Mock backend, rag mode.
  {
    RunConfig cfg = small_toy_run(TaskId::LaMP4);
    cfg.backend = BackendKind::Mock;
    cfg.mock_script_path = script;
    cfg.mode = RunMode::Rag;
    cfg.workers = 1;
    std::string serial = run_task(cfg, dataset).to_json();
    cfg.workers = 4;
    std::string parallel = run_task(cfg, dataset).to_json();
    std::string repeat = run_task(cfg, dataset).to_json();
    check.require(serial == parallel, "mock run differs across worker counts");
    check.require(parallel == repeat, "mock run differs across repetitions");
  }

  // Toy backend, peft-rag mode with a shared adapter store.
  {
    auto store_dir = fresh_dir("determinism_store");
    RunConfig cfg = small_toy_run(TaskId::LaMP4);
    cfg.mode = RunMode::PeftRag;
    cfg.store_dir = store_dir.string();
    cfg.workers = 4;
    std::string first = run_task(cfg, dataset).to_json();   // trains adapters
    cfg.workers = 1;
    std::string second = run_task(cfg, dataset).to_json();  // loads adapters
    std::string third = run_task(cfg, dataset).to_json();
    check.require(first == second, "toy run differs across worker counts");
    check.require(second == third, "toy run differs across repetitions");
  }
  return check;
}

// ---------------------------------------------------------------------------

struct Criterion {
  const char* name;
  std::function<Check()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria = {
      {"template-fidelity", template_fidelity},
      {"convert-fidelity", convert_fidelity},
      {"bm25-oracle", bm25_oracle_criterion},
      {"lora-identity-gradient", lora_identity_gradient},
      {"merge-param-count", merge_param_count},
      {"training-effectiveness", training_effectiveness},
      {"mode-degeneracy", mode_degeneracy},
      {"metric-oracle", metric_oracle},
      {"storage-arithmetic", storage_arithmetic},
      {"rq3-analysis", rq3_analysis},
      {"privacy-boundary", privacy_boundary},
      {"determinism", determinism},
  };

  std::set<std::string> selected;
  for (int i = 1; i < argc; ++i) selected.insert(argv[i]);
  if (!selected.empty()) {
    for (const auto& name : selected) {
      bool known = false;
      for (const auto& criterion : criteria) {
        if (name == criterion.name) known = true;
      }
      if (!known) {
        std::fprintf(stderr, "unknown criterion: %s\n", name.c_str());
        return 2;
      }
    }
  }

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!selected.empty() && !selected.count(criterion.name)) continue;
    auto start = std::chrono::steady_clock::now();
    Check check;
    try {
      check = criterion.run();
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail = std::string("exception: ") + e.what();
    }
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] %-24s (%.2fs)%s%s\n", check.ok ? "PASS" : "FAIL",
                criterion.name, seconds, check.detail.empty() ? "" : " ",
                check.detail.c_str());
    std::fflush(stdout);
    if (!check.ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
