// Training: Adam with bias correction, the lr0 * decay^epoch schedule, batch
// construction from the mixing pipeline, and the four regimes — pretrain-sid,
// pretrain-se (MSE to the clean spectrogram), joint, and frozen-sid (cascade
// loss with SID parameters held fixed).

#pragma once

#include <iostream>
#include <sstream>

#include "msa/noise_mix.hpp"
#include "msa/se_net.hpp"
#include "msa/sid_net.hpp"

namespace msa {

inline const std::vector<std::string>& train_regimes() {
  static const std::vector<std::string> r = {"pretrain-sid", "pretrain-se",
                                             "joint", "frozen-sid"};
  return r;
}

struct TrainConfig {
  std::string regime = "joint";
  double lr0 = 1e-3;
  double lr_decay = 0.9;  // per epoch, no floor
  std::size_t epochs = 30;
  std::size_t batch_size = 8;

  void validate() const {
    const auto& rs = train_regimes();
    if (std::find(rs.begin(), rs.end(), regime) == rs.end())
      throw std::invalid_argument("TrainConfig: unknown regime '" + regime + "'");
    if (lr0 <= 0.0 || lr_decay <= 0.0 || epochs == 0 || batch_size == 0)
      throw std::invalid_argument("TrainConfig: non-positive hyperparameter");
  }
};

inline double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr0 * std::pow(cfg.lr_decay, double(epoch));
}

template <typename T>
struct ModelBundle {
  bool has_se = false;
  SENetParams<T> se;
  SIDNetParams<T> sid;
};

// Named trainable tensors, in a fixed visitation order.
template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> named_params(
    ModelBundle<T>& model) {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  auto grab = [&out](const std::string& name, Tensor<T>& t) {
    out.emplace_back(name, t);
  };
  if (model.has_se) model.se.visit("se", grab);
  model.sid.visit("sid", grab);
  return out;
}

template <typename T>
class Adam {
 public:
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  // Applies one bias-corrected update; `scale` divides the accumulated
  // gradients (batch averaging).  Aborts on any non-finite gradient.
  void step(std::vector<std::pair<std::string, Tensor<T>>>& params, double lr,
            double scale = 1.0) {
    if (m_.empty()) {
      for (const auto& [name, p] : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
    }
    if (m_.size() != params.size())
      throw std::invalid_argument("Adam: parameter list changed size");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, double(t_));
    const double c2 = 1.0 - std::pow(beta2, double(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& [name, p] = params[i];
      auto& g = p.grad();
      auto& w = p.data();
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = double(g[j]) / scale;
        if (!std::isfinite(gj))
          throw std::runtime_error("Adam: non-finite gradient in " + name +
                                   "[" + std::to_string(j) + "] at step " +
                                   std::to_string(t_));
        m_[i][j] = beta1 * m_[i][j] + (1.0 - beta1) * gj;
        v_[i][j] = beta2 * v_[i][j] + (1.0 - beta2) * gj * gj;
        w[j] -= T(lr * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + eps));
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

template <typename T>
struct BatchItem {
  Tensor<T> noisy;
  Tensor<T> clean;
  std::size_t label = 0;
  // provenance of the draw, for auditing and deterministic re-mixing
  std::string category;
  std::string noise_id;
  int snr_db = 0;
};

// Loads a split of the corpus plus the matching noise split into memory and
// emits shuffled epochs of (noisy, clean, label) spectrogram triples: random
// segment, random category, random SNR off the 5-level grid.
template <typename T>
class BatchBuilder {
 public:
  BatchBuilder(const std::string& corpus_dir,
               const std::vector<UtteranceRecord>& utts,
               const std::string& noise_dir,
               const std::vector<NoiseRecord>& noises, const std::string& split,
               SpectrogramConfig cfg)
      : cfg_(cfg), labels_(speaker_index(utts)) {
    for (const auto& u : utts) {
      if (u.split != split) continue;
      clean_.push_back(load_wav(corpus_dir + "/" + u.path));
      clean_ids_.push_back(u.path);
      clean_labels_.push_back(labels_.at(u.speaker));
    }
    if (clean_.empty())
      throw std::invalid_argument("BatchBuilder: no '" + split +
                                  "' utterances in manifest");
    for (const auto& cat : noise_categories()) noise_by_cat_[cat];
    for (const auto& n : noises) {
      if (n.split != split) continue;
      noise_by_cat_.at(n.category).push_back(noise_.size());
      noise_.push_back(load_wav(noise_dir + "/" + n.path));
      noise_ids_.push_back(n.path);
    }
    for (const auto& [cat, idx] : noise_by_cat_)
      if (idx.empty())
        throw std::invalid_argument("BatchBuilder: noise category '" + cat +
                                    "' has no '" + split + "' entries");
  }

  std::size_t num_speakers() const { return labels_.size(); }
  std::size_t num_utterances() const { return clean_.size(); }
  const std::map<std::string, std::size_t>& speaker_labels() const {
    return labels_;
  }

  // One item from utterance `u`; all randomness comes from `rng`.
  BatchItem<T> make_item(std::size_t u, Rng& rng) const {
    const Waveform seg = sample_segment(clean_[u], cfg_.segment_seconds, rng);
    const auto& cats = noise_categories();
    std::uniform_int_distribution<std::size_t> pick_cat(0, cats.size() - 1);
    const std::string cat = cats[pick_cat(rng)];
    const auto& pool = noise_by_cat_.at(cat);
    std::uniform_int_distribution<std::size_t> pick_noise(0, pool.size() - 1);
    const std::size_t noise_idx = pool[pick_noise(rng)];
    const auto& grid = snr_grid();
    std::uniform_int_distribution<std::size_t> pick_snr(0, grid.size() - 1);
    const int snr = grid[pick_snr(rng)];
    const auto mix = mix_at_snr(seg, noise_[noise_idx], snr, rng);
    BatchItem<T> item;
    item.noisy = stft_magnitude<T>(mix.mixed, cfg_);
    item.clean = stft_magnitude<T>(seg, cfg_);
    item.label = clean_labels_[u];
    item.category = cat;
    item.noise_id = noise_ids_[noise_idx];
    item.snr_db = snr;
    return item;
  }

  // Shuffled utterance order for one epoch.
  std::vector<std::size_t> epoch_order(Rng& rng) const {
    std::vector<std::size_t> order(clean_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    return order;
  }

  const std::vector<std::string>& noise_ids() const { return noise_ids_; }
  const std::vector<std::string>& utterance_ids() const { return clean_ids_; }
  const SpectrogramConfig& frontend() const { return cfg_; }

 private:
  SpectrogramConfig cfg_;
  std::map<std::string, std::size_t> labels_;
  std::vector<Waveform> clean_;
  std::vector<std::string> clean_ids_;
  std::vector<std::size_t> clean_labels_;
  std::vector<Waveform> noise_;
  std::vector<std::string> noise_ids_;
  std::map<std::string, std::vector<std::size_t>> noise_by_cat_;
};

namespace detail {

template <typename T>
Tensor<T> regime_loss(Tape<T>& tape, const TrainConfig& cfg,
                      ModelBundle<T>& model, const BatchItem<T>& item) {
  if (cfg.regime == "pretrain-sid")
    return softmax_cross_entropy(tape, forward_logits(tape, item.noisy, model.sid),
                                 item.label);
  if (cfg.regime == "pretrain-se") {
    auto mask = forward_mask(tape, item.noisy, model.se);
    return mse_loss(tape, enhance(tape, item.noisy, mask), item.clean);
  }
  // joint / frozen-sid: classification loss through the cascade
  auto mask = forward_mask(tape, item.noisy, model.se);
  auto enhanced = enhance(tape, item.noisy, mask);
  return softmax_cross_entropy(tape, forward_logits(tape, enhanced, model.sid),
                               item.label);
}

}  // namespace detail

struct TrainResult {
  std::size_t steps = 0;
  double final_loss = 0.0;
  std::vector<std::string> log_lines;  // "step epoch lr loss"
};

template <typename T>
TrainResult train(ModelBundle<T>& model, const BatchBuilder<T>& data,
                  const TrainConfig& cfg, std::uint64_t seed,
                  std::ostream* log = nullptr) {
  cfg.validate();
  const bool needs_se = cfg.regime != "pretrain-sid";
  if (needs_se && !model.has_se)
    throw std::invalid_argument("train: regime '" + cfg.regime +
                                "' requires SE parameters in the bundle");
  if (model.sid.num_speakers() != data.num_speakers() &&
      cfg.regime != "pretrain-se")
    throw std::invalid_argument("train: classifier width does not match corpus");

  // Trainable set per regime; frozen-sid drops SID from the optimizer and
  // marks its tensors non-differentiable so no gradient is ever written.
  std::vector<std::pair<std::string, Tensor<T>>> trainable;
  auto grab = [&trainable](const std::string& name, Tensor<T>& t) {
    trainable.emplace_back(name, t);
  };
  if (needs_se) model.se.visit("se", grab);
  if (cfg.regime == "pretrain-sid" || cfg.regime == "joint")
    model.sid.visit("sid", grab);
  if (cfg.regime == "frozen-sid" || cfg.regime == "pretrain-se")
    model.sid.visit("sid", [](const std::string&, Tensor<T>& t) {
      t.set_requires_grad(false);
    });

  Adam<T> opt;
  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    auto rng = derive_rng(seed, "epoch", std::uint64_t(epoch));
    const auto order = data.epoch_order(rng);
    std::size_t i = 0;
    while (i < order.size()) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - i);
      for (auto& [name, p] : trainable) p.zero_grad();
      double loss_sum = 0.0;
      for (std::size_t k = 0; k < n; ++k, ++i) {
        auto item = data.make_item(order[i], rng);
        Tape<T> tape;
        auto loss = detail::regime_loss(tape, cfg, model, item);
        loss_sum += double(loss[0]);
        tape.backward(loss);
      }
      opt.step(trainable, lr, double(n));
      result.final_loss = loss_sum / double(n);
      ++result.steps;
      std::ostringstream line;
      line << result.steps << ' ' << epoch << ' ' << lr << ' '
           << result.final_loss;
      result.log_lines.push_back(line.str());
      if (log) *log << line.str() << '\n';
    }
  }
  // leave the bundle differentiable for subsequent phases
  if (cfg.regime == "frozen-sid" || cfg.regime == "pretrain-se")
    model.sid.visit("sid", [](const std::string&, Tensor<T>& t) {
      t.set_requires_grad(true);
    });
  return result;
}

}  // namespace msa
