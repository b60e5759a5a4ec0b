// Experiment driver: JSON config with a stable provenance hash, the model
// variants (SID, SE+SID, and the attention/frozen combinations), and the
// pipeline stages behind the CLI subcommands — prepare, mix, train, evaluate,
// score, fuse, report.  Every stage is deterministic under the config seed and
// emits artifacts stamped with the config hash.

#pragma once

#include <filesystem>
#include <iomanip>

#include <json.hpp>

#include "msa/checkpoint.hpp"
#include "msa/metrics.hpp"
#include "msa/toy_corpus.hpp"
#include "msa/train.hpp"

namespace msa {

// Error with a machine-parsable code, surfaced by the CLI as
// "error <CODE>: message".
struct PipelineError : std::runtime_error {
  std::string code;
  PipelineError(std::string c, const std::string& msg)
      : std::runtime_error(msg), code(std::move(c)) {}
};

inline const std::vector<std::string>& model_variants() {
  static const std::vector<std::string> v = {
      "SID",       "SE+SID",       "SE-MS+SID",
      "SE+SID-MS", "SE-MS+SID-MS", "frozen-sid"};
  return v;
}

struct VariantSpec {
  bool has_se = false;
  bool se_ms = false;
  bool sid_ms = false;
  bool frozen = false;
};

inline VariantSpec variant_spec(const std::string& name) {
  if (name == "SID") return {false, false, false, false};
  if (name == "SE+SID") return {true, false, false, false};
  if (name == "SE-MS+SID") return {true, true, false, false};
  if (name == "SE+SID-MS") return {true, false, true, false};
  if (name == "SE-MS+SID-MS") return {true, true, true, false};
  if (name == "frozen-sid") return {true, false, false, true};
  throw PipelineError("E_CONFIG", "unknown variant '" + name + "'");
}

struct ExperimentConfig {
  std::string corpus_dir = "data/corpus";
  std::string noise_dir = "data/noise";
  std::string output_dir = "out";
  std::string variant = "SE-MS+SID";
  std::uint64_t seed = 7;

  SpectrogramConfig frontend;  // paper defaults: 25/10 ms, 512-point, 3 s

  // toy corpus generation
  std::size_t speakers = 8;
  std::size_t utts_per_speaker = 8;
  double utt_seconds = 4.0;
  std::size_t noise_per_category = 2;
  double noise_seconds = 3.0;

  // training
  double lr0 = 1e-3;
  double lr_decay = 0.9;
  std::size_t epochs_pretrain = 2;
  std::size_t epochs_final = 8;
  std::size_t batch_size = 8;

  // model widths; empty vectors mean the full paper-scale tables
  std::size_t se_blocks = 0;     // 0 -> Table 1 layout
  std::size_t se_channels = 48;
  std::vector<std::size_t> sid_channels;  // per block, stride 2 each; empty -> Table 2
  std::size_t embedding_dim = 512;

  // evaluation
  std::size_t n_trials = 200;
  std::string fuse_a = "SE-MS+SID";
  std::string fuse_b = "SE+SID-MS";

  // Canonical form used for hashing; `variant` is deliberately excluded so one
  // run's artifacts across variants share a hash and can be merged by report.
  nlohmann::json canonical() const {
    nlohmann::json j;
    j["corpus_dir"] = corpus_dir;
    j["noise_dir"] = noise_dir;
    j["seed"] = seed;
    j["frontend"] = {{"window_ms", frontend.window_ms},
                     {"hop_ms", frontend.hop_ms},
                     {"fft_size", frontend.fft_size},
                     {"segment_seconds", frontend.segment_seconds}};
    j["corpus"] = {{"speakers", speakers},
                   {"utts_per_speaker", utts_per_speaker},
                   {"utt_seconds", utt_seconds},
                   {"noise_per_category", noise_per_category},
                   {"noise_seconds", noise_seconds}};
    j["train"] = {{"lr0", lr0},
                  {"lr_decay", lr_decay},
                  {"epochs_pretrain", epochs_pretrain},
                  {"epochs_final", epochs_final},
                  {"batch_size", batch_size}};
    j["model"] = {{"se_blocks", se_blocks},
                  {"se_channels", se_channels},
                  {"sid_channels", sid_channels},
                  {"embedding_dim", embedding_dim}};
    j["eval"] = {{"n_trials", n_trials}, {"fuse_a", fuse_a}, {"fuse_b", fuse_b}};
    return j;
  }

  std::string hash() const { return hex64(fnv1a64(canonical().dump())); }

  void validate() const {
    frontend.validate(16000);
    variant_spec(variant);
    variant_spec(fuse_a);
    variant_spec(fuse_b);
    if (speakers < 2 || utts_per_speaker < 2)
      throw PipelineError("E_CONFIG", "corpus needs >= 2 speakers and utts");
    if (lr0 <= 0 || lr_decay <= 0 || batch_size == 0 || epochs_final == 0)
      throw PipelineError("E_CONFIG", "bad training hyperparameters");
    if (n_trials < 10) throw PipelineError("E_CONFIG", "n_trials too small");
  }
};

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw PipelineError("E_MISSING_ARTIFACT", "config not found: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw PipelineError("E_CONFIG", std::string("config parse: ") + e.what());
  }
  ExperimentConfig c;
  c.corpus_dir = j.value("corpus_dir", c.corpus_dir);
  c.noise_dir = j.value("noise_dir", c.noise_dir);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.variant = j.value("variant", c.variant);
  c.seed = j.value("seed", c.seed);
  if (j.contains("frontend")) {
    const auto& fj = j["frontend"];
    c.frontend.window_ms = fj.value("window_ms", c.frontend.window_ms);
    c.frontend.hop_ms = fj.value("hop_ms", c.frontend.hop_ms);
    c.frontend.fft_size = fj.value("fft_size", c.frontend.fft_size);
    c.frontend.segment_seconds =
        fj.value("segment_seconds", c.frontend.segment_seconds);
  }
  if (j.contains("corpus")) {
    const auto& cj = j["corpus"];
    c.speakers = cj.value("speakers", c.speakers);
    c.utts_per_speaker = cj.value("utts_per_speaker", c.utts_per_speaker);
    c.utt_seconds = cj.value("utt_seconds", c.utt_seconds);
    c.noise_per_category = cj.value("noise_per_category", c.noise_per_category);
    c.noise_seconds = cj.value("noise_seconds", c.noise_seconds);
  }
  if (j.contains("train")) {
    const auto& tj = j["train"];
    c.lr0 = tj.value("lr0", c.lr0);
    c.lr_decay = tj.value("lr_decay", c.lr_decay);
    c.epochs_pretrain = tj.value("epochs_pretrain", c.epochs_pretrain);
    c.epochs_final = tj.value("epochs_final", c.epochs_final);
    c.batch_size = tj.value("batch_size", c.batch_size);
  }
  if (j.contains("model")) {
    const auto& mj = j["model"];
    c.se_blocks = mj.value("se_blocks", c.se_blocks);
    c.se_channels = mj.value("se_channels", c.se_channels);
    c.sid_channels = mj.value("sid_channels", c.sid_channels);
    c.embedding_dim = mj.value("embedding_dim", c.embedding_dim);
  }
  if (j.contains("eval")) {
    const auto& ej = j["eval"];
    c.n_trials = ej.value("n_trials", c.n_trials);
    c.fuse_a = ej.value("fuse_a", c.fuse_a);
    c.fuse_b = ej.value("fuse_b", c.fuse_b);
  }
  c.validate();
  return c;
}

inline SENetConfig se_config_from(const ExperimentConfig& cfg) {
  if (cfg.se_blocks == 0) return SENetConfig::default_config();
  SENetConfig c;
  for (std::size_t i = 0; i + 1 < cfg.se_blocks; ++i)
    c.blocks.push_back({5, 5, cfg.se_channels, 1, std::size_t(1) << (i % 4)});
  c.blocks.push_back({1, 1, 1, 1, 1});
  return c;
}

inline SIDNetConfig sid_config_from(const ExperimentConfig& cfg) {
  if (cfg.sid_channels.empty()) {
    auto c = SIDNetConfig::default_config();
    c.embedding_dim = cfg.embedding_dim;
    return c;
  }
  SIDNetConfig c;
  for (std::size_t ch : cfg.sid_channels)
    c.blocks.push_back({{{3, 3, ch, 2}, {3, 3, ch, 1}}});
  c.embedding_dim = cfg.embedding_dim;
  return c;
}

// Spectrogram extents implied by the frontend settings.
inline std::pair<std::size_t, std::size_t> spectrogram_extents(
    const SpectrogramConfig& f) {
  const std::size_t sr = 16000;
  const std::size_t n = std::size_t(f.segment_seconds * double(sr));
  const std::size_t hop = f.hop_samples(sr);
  return {(n + hop - 1) / hop, f.bins()};
}

template <typename T = float>
ModelBundle<T> init_model(const ExperimentConfig& cfg,
                          const std::string& variant, std::uint64_t seed) {
  const auto vs = variant_spec(variant);
  const auto [in_t, in_f] = spectrogram_extents(cfg.frontend);
  auto rng = derive_rng(seed, "init", variant);
  ModelBundle<T> m;
  m.has_se = vs.has_se;
  if (vs.has_se) m.se = SENetParams<T>::init(se_config_from(cfg), vs.se_ms, rng);
  m.sid = SIDNetParams<T>::init(sid_config_from(cfg), cfg.speakers, in_t, in_f,
                                vs.sid_ms, rng);
  return m;
}

// ---------------------------------------------------------------------------
// Artifact paths

struct Paths {
  std::filesystem::path out;
  explicit Paths(const ExperimentConfig& cfg) : out(cfg.output_dir) {}
  std::filesystem::path mix_manifest() const { return out / "mix_manifest.txt"; }
  std::filesystem::path checkpoint(const std::string& v) const {
    return out / "checkpoints" / (v + ".ckpt");
  }
  std::filesystem::path train_log(const std::string& v) const {
    return out / "logs" / (v + ".log");
  }
  std::filesystem::path identification_csv(const std::string& v) const {
    return out / "results" / ("identification_" + v + ".csv");
  }
  std::filesystem::path verification_csv(const std::string& v) const {
    return out / "results" / ("verification_" + v + ".csv");
  }
  std::filesystem::path score_file(const std::string& v, const std::string& cat,
                                   int snr) const {
    return out / "results" / ("scores_" + v) /
           (cat + "_" + std::to_string(snr) + ".txt");
  }
  std::filesystem::path fusion_csv() const { return out / "results" / "fusion.csv"; }
  std::filesystem::path report_csv() const { return out / "results" / "report.csv"; }
};

struct Condition {
  std::string category;  // "original" or a noise category
  int snr_db = 0;        // ignored for "original"
};

// 3 categories x 5 SNRs plus the clean condition: 16 rows.
inline std::vector<Condition> evaluation_grid() {
  std::vector<Condition> grid;
  grid.push_back({"original", 0});
  for (const auto& cat : noise_categories())
    for (int snr : snr_grid()) grid.push_back({cat, snr});
  return grid;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Round-trip-exact double formatting for score files; fusion endpoints must
// recover the original doubles bit for bit.
inline std::string fmt_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_lines(const std::filesystem::path& p,
                        const std::vector<std::string>& lines) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw PipelineError("E_IO", "cannot write " + p.string());
  for (const auto& l : lines) f << l << '\n';
}

inline std::vector<std::string> read_lines(const std::filesystem::path& p,
                                           const std::string& what) {
  std::ifstream f(p);
  if (!f)
    throw PipelineError("E_MISSING_ARTIFACT", what + " not found: " + p.string());
  std::vector<std::string> lines;
  std::string l;
  while (std::getline(f, l)) lines.push_back(l);
  return lines;
}

// Every CSV starts with "# config <hash>".
inline std::string csv_header(const ExperimentConfig& cfg) {
  return "# config " + cfg.hash();
}

inline void check_header(const std::vector<std::string>& lines,
                         const ExperimentConfig& cfg, const std::string& what) {
  if (lines.empty() || lines[0] != csv_header(cfg))
    throw PipelineError("E_VARIANT_MISMATCH",
                        what + " was produced under a different config");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages

inline void run_prepare(const ExperimentConfig& cfg) {
  generate_corpus(cfg.corpus_dir, cfg.speakers, cfg.utts_per_speaker,
                  cfg.utt_seconds, cfg.seed);
  generate_noise_bank(cfg.noise_dir, cfg.noise_per_category, cfg.noise_seconds,
                      cfg.seed);
}

inline std::vector<UtteranceRecord> load_corpus_or_die(
    const ExperimentConfig& cfg) {
  const auto p = cfg.corpus_dir + "/corpus_manifest.txt";
  if (!std::filesystem::exists(p))
    throw PipelineError("E_MISSING_ARTIFACT", "corpus manifest not found: " + p);
  return load_dataset_manifest(p);
}

inline std::vector<NoiseRecord> load_noise_or_die(const ExperimentConfig& cfg) {
  const auto p = cfg.noise_dir + "/noise_manifest.txt";
  if (!std::filesystem::exists(p))
    throw PipelineError("E_MISSING_ARTIFACT", "noise manifest not found: " + p);
  return load_noise_manifest(p);
}

// Enumerates the deterministic evaluation mixes: every test utterance under
// every noisy grid condition, with a per-row seed and a fixed noise pick.
inline void run_mix(const ExperimentConfig& cfg) {
  const auto utts = load_corpus_or_die(cfg);
  const auto noises = load_noise_or_die(cfg);
  std::map<std::string, std::vector<std::string>> test_noise;
  for (const auto& n : noises)
    if (n.split == "test") test_noise[n.category].push_back(n.path);
  for (const auto& cat : noise_categories())
    if (test_noise[cat].empty())
      throw PipelineError("E_CONFIG", "no test noise in category " + cat);

  std::vector<MixRecord> recs;
  for (const auto& u : utts) {
    if (u.split != "test") continue;
    for (const auto& cat : noise_categories()) {
      for (int snr : snr_grid()) {
        const std::uint64_t row_seed = mix_seed(
            mix_seed(mix_seed(mix_seed(cfg.seed, "evalmix"), u.path), cat),
            std::uint64_t(snr));
        auto pick_rng = derive_rng(row_seed, "pick");
        const auto& pool = test_noise.at(cat);
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        recs.push_back({u.path, pool[pick(pick_rng)], cat, snr, row_seed});
      }
    }
  }
  Paths paths(cfg);
  std::filesystem::create_directories(paths.out);
  save_mix_manifest(paths.mix_manifest().string(), recs);
}

// Three-phase schedule: SE and SID pretraining (when the variant has an SE
// front end) followed by joint or frozen-sid fine-tuning.
inline TrainResult run_train(const ExperimentConfig& cfg,
                             const std::string& variant, std::ostream* log) {
  const auto vs = variant_spec(variant);
  const auto utts = load_corpus_or_die(cfg);
  const auto noises = load_noise_or_die(cfg);
  BatchBuilder<float> data(cfg.corpus_dir, utts, cfg.noise_dir, noises, "train",
                           cfg.frontend);
  auto model = init_model<float>(cfg, variant, cfg.seed);

  TrainConfig tc;
  tc.lr0 = cfg.lr0;
  tc.lr_decay = cfg.lr_decay;
  tc.batch_size = cfg.batch_size;

  TrainResult last;
  if (vs.has_se) {
    tc.epochs = cfg.epochs_pretrain;
    tc.regime = "pretrain-se";
    train(model, data, tc, mix_seed(cfg.seed, "pretrain-se"), log);
    tc.regime = "pretrain-sid";
    train(model, data, tc, mix_seed(cfg.seed, "pretrain-sid"), log);
    tc.epochs = cfg.epochs_final;
    tc.regime = vs.frozen ? "frozen-sid" : "joint";
    last = train(model, data, tc, mix_seed(cfg.seed, "finetune"), log);
  } else {
    tc.epochs = cfg.epochs_pretrain + cfg.epochs_final;
    tc.regime = "pretrain-sid";
    last = train(model, data, tc, mix_seed(cfg.seed, "finetune"), log);
  }

  Checkpoint ck;
  ck.config_hash = cfg.hash();
  ck.variant = variant;
  if (model.has_se) ck.add_params("se", model.se);
  ck.add_params("sid", model.sid);
  Paths paths(cfg);
  std::filesystem::create_directories(paths.checkpoint(variant).parent_path());
  save_checkpoint(paths.checkpoint(variant).string(), ck);
  return last;
}

template <typename T = float>
ModelBundle<T> load_model(const ExperimentConfig& cfg,
                          const std::string& variant) {
  Paths paths(cfg);
  const auto p = paths.checkpoint(variant);
  if (!std::filesystem::exists(p))
    throw PipelineError("E_MISSING_ARTIFACT",
                        "checkpoint not found: " + p.string());
  const auto ck = load_checkpoint(p.string());
  if (ck.config_hash != cfg.hash())
    throw PipelineError("E_VARIANT_MISMATCH",
                        "checkpoint " + p.string() + " has config hash " +
                            ck.config_hash + ", expected " + cfg.hash());
  if (ck.variant != variant)
    throw PipelineError("E_VARIANT_MISMATCH",
                        "checkpoint " + p.string() + " holds variant '" +
                            ck.variant + "', expected '" + variant + "'");
  auto model = init_model<T>(cfg, variant, cfg.seed);
  if (model.has_se) ck.restore_params("se", model.se);
  ck.restore_params("sid", model.sid);
  return model;
}

struct EvalOutput {
  // per condition: logits per test utterance, labels, embeddings
  std::vector<Condition> conditions;
  std::vector<std::vector<std::vector<double>>> logits;
  std::vector<std::vector<std::vector<float>>> embeddings;
  std::vector<std::size_t> labels;
  std::vector<std::string> utt_paths;
};

// Forward every test utterance through the variant under every grid condition.
// Mixing follows the mix manifest rows (seeded), so all variants see the same
// noisy inputs.
template <typename T = float>
EvalOutput run_forward_grid(const ExperimentConfig& cfg,
                            const std::string& variant) {
  const auto utts = load_corpus_or_die(cfg);
  const auto noises = load_noise_or_die(cfg);
  Paths paths(cfg);
  if (!std::filesystem::exists(paths.mix_manifest()))
    throw PipelineError("E_MISSING_ARTIFACT",
                        "mix manifest not found: " +
                            paths.mix_manifest().string() + " (run mix first)");
  const auto mixes = load_mix_manifest(paths.mix_manifest().string());
  auto model = load_model<T>(cfg, variant);
  const auto idx = speaker_index(utts);

  std::map<std::string, const UtteranceRecord*> by_path;
  for (const auto& u : utts) by_path[u.path] = &u;
  std::map<std::string, Waveform> noise_cache;

  EvalOutput out;
  out.conditions = evaluation_grid();
  for (const auto& u : utts) {
    if (u.split != "test") continue;
    out.utt_paths.push_back(u.path);
    out.labels.push_back(idx.at(u.speaker));
  }
  std::map<std::pair<std::string, int>, std::map<std::string, const MixRecord*>>
      mix_rows;  // (category, snr) -> utt path -> row
  for (const auto& m : mixes) mix_rows[{m.category, m.snr_db}][m.clean_path] = &m;

  auto forward_one = [&](const Waveform& seg) {
    Tape<T> tape(false);
    auto spec = stft_magnitude<T>(seg, cfg.frontend);
    Tensor<T> input = spec;
    if (model.has_se) {
      auto mask = forward_mask(tape, spec, model.se);
      input = enhance(tape, spec, mask);
    }
    auto emb = sid_embedding_forward(tape, input, model.sid);
    auto logits = fully_connected(tape, emb, model.sid.cls_w, model.sid.cls_b);
    std::vector<double> l(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) l[i] = double(logits[i]);
    return std::make_pair(l, emb.data());
  };

  std::map<std::string, Waveform> clean_cache;
  for (const auto& cond : out.conditions) {
    std::vector<std::vector<double>> logits;
    std::vector<std::vector<float>> embeddings;
    for (const auto& path : out.utt_paths) {
      auto& clean = clean_cache[path];
      if (clean.samples.empty())
        clean = load_wav(cfg.corpus_dir + "/" + path);
      Waveform seg;
      if (cond.category == "original") {
        auto rng = derive_rng(cfg.seed, "evalclean", path);
        seg = sample_segment(clean, cfg.frontend.segment_seconds, rng);
      } else {
        const auto it = mix_rows[{cond.category, cond.snr_db}].find(path);
        if (it == mix_rows[{cond.category, cond.snr_db}].end())
          throw PipelineError("E_MISSING_ARTIFACT",
                              "mix manifest lacks row for " + path);
        const MixRecord& row = *it->second;
        auto& noise = noise_cache[row.noise_path];
        if (noise.samples.empty())
          noise = load_wav(cfg.noise_dir + "/" + row.noise_path);
        auto rng = derive_rng(row.seed, "mix");
        seg = sample_segment(clean, cfg.frontend.segment_seconds, rng);
        seg = mix_at_snr(seg, noise, double(row.snr_db), rng).mixed;
      }
      auto [l, e] = forward_one(seg);
      if constexpr (std::is_same_v<T, float>) {
        embeddings.push_back(e);
      } else {
        std::vector<float> ef(e.begin(), e.end());
        embeddings.push_back(std::move(ef));
      }
      logits.push_back(std::move(l));
    }
    out.logits.push_back(std::move(logits));
    out.embeddings.push_back(std::move(embeddings));
  }
  return out;
}

inline std::string condition_label(const Condition& c) {
  return c.category == "original" ? "original,-"
                                  : c.category + "," + std::to_string(c.snr_db);
}

// Identification CSV: noise,snr,variant,top1,top5.
inline void run_evaluate(const ExperimentConfig& cfg,
                         const std::string& variant) {
  const auto out = run_forward_grid<float>(cfg, variant);
  const std::size_t k5 = std::min<std::size_t>(5, cfg.speakers);
  std::vector<std::string> lines{detail::csv_header(cfg),
                                 "noise,snr,variant,top1,top5"};
  for (std::size_t c = 0; c < out.conditions.size(); ++c) {
    const double t1 = topk_accuracy(out.logits[c], out.labels, 1);
    const double t5 = topk_accuracy(out.logits[c], out.labels, k5);
    lines.push_back(condition_label(out.conditions[c]) + "," + variant + "," +
                    detail::fmt(t1) + "," + detail::fmt(t5));
  }
  Paths paths(cfg);
  detail::write_lines(paths.identification_csv(variant), lines);
}

// Verification: cosine scores over a fixed trial list per condition, plus the
// EER/DCF CSV.  Score files carry one line per trial.
inline void run_score(const ExperimentConfig& cfg, const std::string& variant) {
  const auto utts = load_corpus_or_die(cfg);
  std::vector<UtteranceRecord> test_utts;
  for (const auto& u : utts)
    if (u.split == "test") test_utts.push_back(u);
  auto trial_rng = derive_rng(cfg.seed, "trials");
  const auto trials = build_trials(test_utts, trial_rng, cfg.n_trials);

  const auto out = run_forward_grid<float>(cfg, variant);
  std::map<std::string, std::size_t> utt_pos;
  for (std::size_t i = 0; i < out.utt_paths.size(); ++i)
    utt_pos[out.utt_paths[i]] = i;

  Paths paths(cfg);
  std::vector<std::string> lines{detail::csv_header(cfg),
                                 "noise,snr,variant,eer,dcf"};
  for (std::size_t c = 0; c < out.conditions.size(); ++c) {
    ScoreSet s;
    s.trials = trials;
    std::vector<std::string> score_lines;
    for (const auto& t : trials) {
      const auto& ea = out.embeddings[c][utt_pos.at(t.enrol)];
      const auto& eb = out.embeddings[c][utt_pos.at(t.test)];
      const double sc = cosine_similarity(ea, eb);
      s.scores.push_back(sc);
      score_lines.push_back(t.enrol + " " + t.test + " " +
                            detail::fmt_exact(sc) + " " +
                            (t.is_target ? "1" : "0"));
    }
    const auto& cond = out.conditions[c];
    detail::write_lines(
        paths.score_file(variant, cond.category,
                         cond.category == "original" ? 0 : cond.snr_db),
        score_lines);
    lines.push_back(condition_label(cond) + "," + variant + "," +
                    detail::fmt(compute_eer(s)) + "," +
                    detail::fmt(avg_min_dcf(s)));
  }
  detail::write_lines(paths.verification_csv(variant), lines);
}

// Alpha sweep over the two configured variants' verification scores.
inline void run_fuse(const ExperimentConfig& cfg) {
  Paths paths(cfg);
  const auto utts = load_corpus_or_die(cfg);
  std::vector<UtteranceRecord> test_utts;
  for (const auto& u : utts)
    if (u.split == "test") test_utts.push_back(u);
  auto trial_rng = derive_rng(cfg.seed, "trials");
  const auto trials = build_trials(test_utts, trial_rng, cfg.n_trials);

  auto load_scores = [&](const std::string& variant, const Condition& cond) {
    const auto p = paths.score_file(variant, cond.category,
                                    cond.category == "original" ? 0 : cond.snr_db);
    const auto lines = detail::read_lines(p, "score file for " + variant);
    if (lines.size() != trials.size())
      throw PipelineError("E_VARIANT_MISMATCH",
                          "score file " + p.string() + " has " +
                              std::to_string(lines.size()) + " rows, expected " +
                              std::to_string(trials.size()));
    ScoreSet s;
    s.trials = trials;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::istringstream is(lines[i]);
      std::string enrol, test;
      double sc;
      int lab;
      if (!(is >> enrol >> test >> sc >> lab) || enrol != trials[i].enrol ||
          test != trials[i].test || lab != int(trials[i].is_target))
        throw PipelineError("E_VARIANT_MISMATCH",
                            "score file " + p.string() + " row " +
                                std::to_string(i) + " does not match trials");
      s.scores.push_back(sc);
    }
    return s;
  };

  std::vector<std::string> lines{detail::csv_header(cfg),
                                 "noise,snr,alpha,eer,dcf"};
  for (const auto& cond : evaluation_grid()) {
    const auto sa = load_scores(cfg.fuse_a, cond);
    const auto sb = load_scores(cfg.fuse_b, cond);
    for (int ai = 0; ai <= 10; ++ai) {
      const double alpha = double(ai) / 10.0;
      const auto fused = fuse_scores(alpha, sa, sb);
      char ab[8];
      std::snprintf(ab, sizeof(ab), "%.1f", alpha);
      lines.push_back(condition_label(cond) + "," + ab + "," +
                      detail::fmt(compute_eer(fused)) + "," +
                      detail::fmt(avg_min_dcf(fused)));
    }
  }
  detail::write_lines(paths.fusion_csv(), lines);
}

// Merge every CSV present under results/ after checking the config hash.
inline void run_report(const ExperimentConfig& cfg) {
  Paths paths(cfg);
  std::vector<std::string> lines{detail::csv_header(cfg)};
  bool found = false;
  for (const auto& v : model_variants()) {
    for (const auto& p :
         {paths.identification_csv(v), paths.verification_csv(v)}) {
      if (!std::filesystem::exists(p)) continue;
      auto csv = detail::read_lines(p, "results csv");
      detail::check_header(csv, cfg, p.filename().string());
      lines.push_back("## " + p.filename().string());
      lines.insert(lines.end(), csv.begin() + 1, csv.end());
      found = true;
    }
  }
  if (std::filesystem::exists(paths.fusion_csv())) {
    auto csv = detail::read_lines(paths.fusion_csv(), "fusion csv");
    detail::check_header(csv, cfg, "fusion.csv");
    lines.push_back("## fusion.csv");
    lines.insert(lines.end(), csv.begin() + 1, csv.end());
    found = true;
  }
  if (!found)
    throw PipelineError("E_MISSING_ARTIFACT",
                        "no result CSVs to merge under " +
                            (paths.out / "results").string());
  detail::write_lines(paths.report_csv(), lines);
}

}  // namespace msa
