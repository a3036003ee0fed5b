#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemapper/config.hpp"
#include "stylemapper/inference.hpp"
#include "stylemapper/losses.hpp"

namespace stylemapper {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  std::size_t max_iters = 10000;
  std::size_t log_every = 1;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::size_t validate_every = 0;    // 0 disables validation
  std::size_t patience = 25;         // validation rounds without improvement before stopping
  LossWeights weights;
  std::vector<Family> excluded_families;
  bool fixed_style_ablation = false;
  std::uint64_t seed = 0;
  std::size_t image_size = 64;
  ModelConfig model;

  std::vector<Family> included_families() const {
    std::vector<Family> out;
    for (auto f : kTrainingFamilies) {
      if (std::find(excluded_families.begin(), excluded_families.end(), f) == excluded_families.end()) out.push_back(f);
    }
    return out;
  }

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(lr > 0)) throw std::invalid_argument("lr must be > 0");
    if (log_every < 1) throw std::invalid_argument("log_every must be >= 1");
    weights.validate();
    for (auto f : excluded_families) {
      if (f == Family::Exp) throw std::invalid_argument("exp is not a training family");
    }
    if (included_families().empty()) throw std::invalid_argument("excluded_families must leave at least one family");
  }

  ad::AdamConfig adam() const { return {lr, beta1, beta2, 1e-8, weight_decay}; }

  // Reads every TrainConfig key present in `kv`.
  void read(const KeyValueConfig& kv) {
    kv.read("lr", lr);
    kv.read("beta1", beta1);
    kv.read("beta2", beta2);
    kv.read("weight_decay", weight_decay);
    kv.read("max_iters", max_iters);
    kv.read("log_every", log_every);
    kv.read("checkpoint_every", checkpoint_every);
    kv.read("validate_every", validate_every);
    kv.read("patience", patience);
    kv.read("lambda_recon", weights.recon);
    kv.read("lambda_same_s", weights.same_s);
    kv.read("lambda_same_c", weights.same_c);
    kv.read("lambda_cross", weights.cross);
    if (kv.has("excluded_families")) {
      excluded_families.clear();
      for (const auto& name : kv.list("excluded_families")) excluded_families.push_back(parse_family(name));
    }
    kv.read("fixed_style_ablation", fixed_style_ablation);
    kv.read("seed", seed);
    kv.read("image_size", image_size);
    kv.read("width", model.width);
    kv.read("n_res", model.n_res);
    kv.read("n_style_down", model.n_style_down);
    kv.read("mlp_hidden", model.mlp_hidden);
    kv.read("up_kernel", model.up_kernel);
  }
};

struct LogRow {
  std::size_t step = 0;
  LossBreakdown loss;
  std::string family;
};

inline void write_log_header(std::ostream& os) { os << LossBreakdown::csv_header() << "\n"; }

inline void write_log_row(std::ostream& os, const LogRow& row) {
  char buf[64];
  os << row.step;
  std::snprintf(buf, sizeof buf, ",%.9g", row.loss.total);
  os << buf;
  for (double v : row.loss.terms()) {
    std::snprintf(buf, sizeof buf, ",%.9g", v);
    os << buf;
  }
  os << "\n";
}

struct ValidationRecord {
  std::size_t step = 0;
  double mae = 0;
};

struct TrainResult {
  StyleMapper<float> model;
  std::vector<LogRow> log;
  std::vector<ValidationRecord> validation;
  std::size_t steps_run = 0;
  bool stopped_early = false;
};

// Optional side channels of a training run.
struct TrainHooks {
  std::ostream* log_csv = nullptr;            // receives the CSV training log
  std::string checkpoint_dir;                 // periodic + final checkpoints when non-empty
  std::vector<TransformSpec> validation_targets;  // defaults to fixed versions of the included families
  // Observes every sampled batch before its update (used to audit exclusion).
  std::function<void(std::size_t, const QuadBatch&)> on_batch;
};

// Mean over target specs and validation images of MAE(transferred, T(x)), with the
// target code taken as the most representative code of T(validation split).
template <StyleTransferModel M>
double validate(const M& model, const std::vector<Image>& validation, const std::vector<TransformSpec>& target_specs) {
  if (validation.empty()) throw std::invalid_argument("validation split is empty");
  if (target_specs.empty()) throw std::invalid_argument("no validation target styles");
  double acc = 0.0;
  for (const auto& spec : target_specs) {
    const auto truth = apply_transform_all(spec, validation);
    const auto code = most_representative_code(encode_styles(model, truth));
    acc += mean_abs_error(transfer_all(model, validation, code), truth);
  }
  return acc / static_cast<double>(target_specs.size());
}

// Seeded sampler of (x1, x2, T) tuples; the sequence depends only on the seed, the
// training set size and the family pool.
class BatchSampler {
 public:
  BatchSampler(const std::vector<Image>& train, const TrainConfig& cfg)
      : train_(train), pool_(cfg.included_families()), fixed_(cfg.fixed_style_ablation), rng_(cfg.seed) {
    if (train.size() < 2) throw std::invalid_argument("training needs at least 2 images");
  }

  QuadBatch next() {
    std::uniform_int_distribution<std::size_t> pick(0, train_.size() - 1);
    const std::size_t i = pick(rng_);
    std::size_t j = pick(rng_);
    std::size_t guard = 0;
    while (j == i || train_[j] == train_[i]) {
      j = pick(rng_);
      if (++guard > 100000) throw std::invalid_argument("training split has no two distinct images");
    }
    const Family f = sample_family(pool_, rng_);
    const TransformSpec spec = fixed_ ? fixed_transform(f) : sample_transform(f, rng_);
    return QuadBatch::make(train_[i], train_[j], spec);
  }

 private:
  const std::vector<Image>& train_;
  std::vector<Family> pool_;
  bool fixed_;
  std::mt19937_64 rng_;
};

// Stops after `patience` consecutive validation rounds without a new best.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Records one validation score; returns true when training should stop.
  bool update(double score) {
    if (score < best_) {
      best_ = score;
      stale_ = 0;
      return false;
    }
    return ++stale_ >= patience_;
  }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

inline std::vector<TransformSpec> default_validation_targets(const TrainConfig& cfg) {
  std::vector<TransformSpec> out;
  for (auto f : cfg.included_families()) out.push_back(fixed_transform(f));
  return out;
}

inline TrainResult train(const std::vector<Image>& train_set, const std::vector<Image>& validation_set,
                         const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  cfg.validate();
  for (const auto& img : train_set) {
    if (img.width() != train_set.front().width() || img.height() != train_set.front().height()) {
      throw std::invalid_argument("training images must share one size");
    }
  }
  BatchSampler sampler(train_set, cfg);
  TrainResult result{StyleMapper<float>(cfg.model, cfg.seed ^ 0x5DEECE66DULL), {}, {}, 0, false};
  auto& model = result.model;
  ad::AdamState adam;
  const auto adam_cfg = cfg.adam();
  const auto targets = hooks.validation_targets.empty() ? default_validation_targets(cfg) : hooks.validation_targets;
  const auto excluded = cfg.excluded_families;

  if (hooks.log_csv) write_log_header(*hooks.log_csv);
  if (!hooks.checkpoint_dir.empty()) std::filesystem::create_directories(hooks.checkpoint_dir);

  EarlyStopping stopper(cfg.patience);

  for (std::size_t step = 1; step <= cfg.max_iters; ++step) {
    const QuadBatch batch = sampler.next();
    if (std::find(excluded.begin(), excluded.end(), batch.spec.family) != excluded.end()) {
      throw std::logic_error("sampled an excluded transform family");
    }
    if (hooks.on_batch) hooks.on_batch(step, batch);

    model.params().zero_grad();
    auto loss = total_loss(model, batch, cfg.weights);
    if (!std::isfinite(loss.breakdown.total)) {
      const auto terms = loss.breakdown.terms();
      std::string bad;
      for (std::size_t k = 0; k < terms.size(); ++k) {
        if (!std::isfinite(terms[k])) bad += std::string(bad.empty() ? "" : ", ") + LossBreakdown::term_name(k);
      }
      throw std::runtime_error("non-finite loss at step " + std::to_string(step) + " in term(s): " + bad);
    }
    ad::backward(loss.total);
    ad::adam_step(model.params(), adam, adam_cfg);
    if (!model.params().all_finite()) throw std::runtime_error("non-finite parameters after step " + std::to_string(step));
    result.steps_run = step;

    if (step % cfg.log_every == 0) {
      LogRow row{step, loss.breakdown, std::string(family_name(batch.spec.family))};
      if (hooks.log_csv) write_log_row(*hooks.log_csv, row);
      result.log.push_back(std::move(row));
    }
    if (!hooks.checkpoint_dir.empty() && cfg.checkpoint_every && step % cfg.checkpoint_every == 0) {
      model.save(hooks.checkpoint_dir + "/step_" + std::to_string(step) + ".ckpt");
    }
    if (cfg.validate_every && step % cfg.validate_every == 0 && !validation_set.empty()) {
      const double v = validate(model, validation_set, targets);
      result.validation.push_back({step, v});
      if (stopper.update(v)) {
        result.stopped_early = true;
        break;
      }
    }
  }
  if (!hooks.checkpoint_dir.empty()) model.save(hooks.checkpoint_dir + "/final.ckpt");
  return result;
}

}  // namespace stylemapper
