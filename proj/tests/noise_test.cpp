#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "msa/noise_mix.hpp"

using namespace msa;

namespace {

Waveform noise_burst(std::uint32_t seed, std::size_t n, double amp = 0.3) {
  Rng rng(seed);
  std::uniform_real_distribution<double> d(-amp, amp);
  Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = d(rng);
  return w;
}

double measured_snr_db(const Waveform& clean, const Waveform& noise_component) {
  return 10.0 * std::log10(mean_power(clean.samples) /
                           mean_power(noise_component.samples));
}

}  // namespace

TEST_CASE("equal power at 0 dB gives unit gain") {
  auto clean = noise_burst(1, 8000);
  Waveform noise = clean;  // identical power
  Rng rng(2);
  auto r = mix_at_snr(clean, noise, 0.0, rng);
  CHECK(r.gain == doctest::Approx(1.0));
}

TEST_CASE("gain follows the power-ratio formula") {
  // P_clean = 1, P_noise = 4, snr 10 dB -> g = sqrt(1/40)
  Waveform clean, noise;
  clean.samples.assign(1000, 1.0);
  noise.samples.assign(1000, 2.0);
  Rng rng(3);
  auto r = mix_at_snr(clean, noise, 10.0, rng);
  CHECK(r.gain == doctest::Approx(std::sqrt(1.0 / 40.0)).epsilon(1e-12));
  CHECK(r.gain == doctest::Approx(0.15811).epsilon(1e-4));
}

TEST_CASE("20 dB vs 0 dB gain ratio is 1/10") {
  auto clean = noise_burst(4, 4000);
  auto noise = noise_burst(5, 4000);
  Rng r1(7), r2(7);  // same crop
  auto a = mix_at_snr(clean, noise, 20.0, r1);
  auto b = mix_at_snr(clean, noise, 0.0, r2);
  CHECK(a.gain / b.gain == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("measured component SNR is exact over the grid") {
  for (std::uint32_t it = 0; it < 50; ++it) {
    auto clean = noise_burst(100 + it, 6000, 0.4);
    auto noise = noise_burst(200 + it, it % 2 ? 9000 : 2500, 0.2);
    const int snr = snr_grid()[it % snr_grid().size()];
    Rng rng(300 + it);
    auto r = mix_at_snr(clean, noise, snr, rng);
    CHECK(measured_snr_db(clean, r.noise_component) ==
          doctest::Approx(double(snr)).epsilon(1e-9));
    for (double s : r.mixed.samples) CHECK(std::isfinite(s));
  }
}

TEST_CASE("mixing is linear in the clean signal for the same seed") {
  auto clean = noise_burst(11, 5000);
  auto noise = noise_burst(12, 5000);
  Waveform scaled = clean;
  for (auto& s : scaled.samples) s *= 3.0;
  Rng r1(9), r2(9);
  auto a = mix_at_snr(clean, noise, 5.0, r1);
  auto b = mix_at_snr(scaled, noise, 5.0, r2);
  // g scales by 3 as well, so b = 3*clean + 3g*noise
  for (std::size_t i = 0; i < a.mixed.samples.size(); ++i)
    CHECK(b.mixed.samples[i] == doctest::Approx(3.0 * a.mixed.samples[i]).epsilon(1e-9));
}

TEST_CASE("silent inputs are rejected") {
  Waveform silent, live = noise_burst(13, 1000);
  silent.samples.assign(1000, 0.0);
  Rng rng(1);
  CHECK_THROWS(mix_at_snr(silent, live, 10.0, rng));
  CHECK_THROWS(mix_at_snr(live, silent, 10.0, rng));
}

TEST_CASE("noise length fitting: crop and loop") {
  auto clean = noise_burst(14, 4000);
  auto longer = noise_burst(15, 10000);
  auto shorter = noise_burst(16, 1500);
  Rng rng(21);
  CHECK(mix_at_snr(clean, longer, 10.0, rng).mixed.samples.size() == 4000);
  CHECK(mix_at_snr(clean, shorter, 10.0, rng).mixed.samples.size() == 4000);
}

TEST_CASE("split_noise_corpus: stratified, disjoint, deterministic") {
  std::vector<NoiseRecord> entries;
  for (const auto& cat : noise_categories())
    for (int i = 0; i < 10; ++i)
      entries.push_back({cat + "_" + std::to_string(i) + ".wav", cat, ""});

  Rng r1(77), r2(77);
  auto [train1, test1] = split_noise_corpus(entries, r1, 0.5);
  auto [train2, test2] = split_noise_corpus(entries, r2, 0.5);

  std::map<std::string, int> per_cat_train, per_cat_test;
  std::set<std::string> train_ids, test_ids;
  for (const auto& e : train1) {
    ++per_cat_train[e.category];
    train_ids.insert(e.path);
    CHECK(e.split == "train");
  }
  for (const auto& e : test1) {
    ++per_cat_test[e.category];
    test_ids.insert(e.path);
    CHECK(e.split == "test");
  }
  for (const auto& cat : noise_categories()) {
    CHECK(per_cat_train[cat] == 5);
    CHECK(per_cat_test[cat] == 5);
  }
  // ID-set intersection audit
  for (const auto& id : train_ids) CHECK(test_ids.count(id) == 0);

  // determinism under the seed
  REQUIRE(train1.size() == train2.size());
  for (std::size_t i = 0; i < train1.size(); ++i)
    CHECK(train1[i].path == train2[i].path);
}

TEST_CASE("split_noise_corpus rejects tiny categories") {
  std::vector<NoiseRecord> entries = {{"a.wav", "music", ""}};
  Rng rng(1);
  CHECK_THROWS(split_noise_corpus(entries, rng));
}
