#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace ragaid;
namespace ts = testing_support;

namespace {

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Bin-count oracle: independent restatement of round-half-up assignment on the folded cents.
std::vector<double> histogram_oracle(const std::vector<double>& cents, int bins) {
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  const double w = 1200.0 / bins;
  for (double c : cents) {
    double folded = std::fmod(c, 1200.0);
    if (folded < 0) folded += 1200.0;
    const long idx = static_cast<long>(std::floor(folded / w + 0.5)) % bins;
    h[static_cast<std::size_t>(idx)] += 1.0;
  }
  for (auto& x : h) x /= static_cast<double>(cents.size());
  return h;
}

// Direct evaluation of one wrapped Gaussian at every bin centre, independent of the library.
std::vector<double> kde_oracle(const std::vector<double>& cents, int bins, double h) {
  std::vector<double> out(static_cast<std::size_t>(bins), 0.0);
  const double w = 1200.0 / bins;
  for (int i = 0; i < bins; ++i) {
    for (double x : cents) {
      for (int m = -3; m <= 3; ++m) {
        const double d = (i * w - x + 1200.0 * m) / h;
        out[static_cast<std::size_t>(i)] += std::exp(-0.5 * d * d);
      }
    }
  }
  const double s = sum(out);
  for (auto& x : out) x /= s;
  return out;
}

PitchTrack random_track(std::mt19937_64& rng, std::size_t n, double ref, double unvoiced_fraction = 0.1) {
  std::uniform_real_distribution<double> c(-2400.0, 3600.0), u(0.0, 1.0);
  PitchTrack t;
  for (std::size_t i = 0; i < n; ++i) {
    const bool voiced = u(rng) >= unvoiced_fraction || i == 0;
    t.frames.push_back({0.01 * i, voiced ? ref * std::exp2(c(rng) / 1200.0) : std::numeric_limits<double>::quiet_NaN(),
                        voiced ? 0.9 : 0.1});
  }
  return t;
}

}  // namespace

TEST(Cents, Conversions) {
  EXPECT_EQ(hz_to_cents(220.0, 220.0), 0.0);
  EXPECT_DOUBLE_EQ(hz_to_cents(440.0, 220.0), 1200.0);
  // 1200 log2(261.63 / 220) evaluated directly: 300.0293...
  EXPECT_NEAR(hz_to_cents(261.63, 220.0), 300.029345, 1e-6);
  EXPECT_NEAR(hz_to_cents(261.63, 220.0), 300.0, 0.05);
  EXPECT_THROW(hz_to_cents(0.0, 220.0), Error);
  EXPECT_THROW(hz_to_cents(220.0, -1.0), Error);
}

TEST(Fold, Examples) {
  EXPECT_EQ(fold_to_octave(880.0, 220.0), 220.0);
  EXPECT_EQ(fold_to_octave(110.0, 220.0), 220.0);
  EXPECT_EQ(fold_to_octave(330.0, 220.0), 330.0);
  try {
    fold_to_octave(-5.0, 220.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveFrequency);
  }
}

TEST(Fold, RangeAndIdempotence) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lf(-12.0, 12.0), lr(3.0, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const double f = std::exp2(lf(rng)) * 100.0;
    const double r = std::exp2(lr(rng));
    const double once = fold_to_octave(f, r);
    EXPECT_GE(once, r);
    EXPECT_LT(once, 2.0 * r);
    EXPECT_EQ(fold_to_octave(once, r), once);
    const double k = std::log2(once / f);
    EXPECT_NEAR(k, std::round(k), 1e-9);
  }
}

TEST(Pcd, SingleClass) {
  const auto pd = compute_pcd(ts::track_at_cents(std::vector<double>(100, 0.0), 146.8), FeatureConfig::pcd(146.8));
  ASSERT_EQ(pd.size(), 12u);
  EXPECT_EQ(pd.values[0], 1.0);
  for (std::size_t i = 1; i < 12; ++i) EXPECT_EQ(pd.values[i], 0.0);
}

TEST(Pcd, TonicAndFifth) {
  std::vector<double> cents(50, 0.0);
  cents.insert(cents.end(), 50, 700.0);
  const auto track = ts::track_at_cents(cents, 200.0);
  const auto pd = compute_pcd(track, FeatureConfig::pcd(200.0));
  const auto oracle = histogram_oracle(cents, 12);
  EXPECT_EQ(oracle[0], 0.5);
  EXPECT_EQ(oracle[7], 0.5);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(pd.values[i], oracle[i], 1e-15) << i;
}

TEST(Pcd, AllUnvoiced) {
  PitchTrack t;
  for (int i = 0; i < 10; ++i) t.frames.push_back({0.01 * i, std::numeric_limits<double>::quiet_NaN(), 0.0});
  try {
    compute_pcd(t, FeatureConfig::pcd());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllFramesUnvoiced);
  }
  EXPECT_THROW(compute_kpd(t, FeatureConfig::kpd(120, 10)), Error);
}

TEST(Fpd, HalfUpRounding) {
  const auto track = ts::track_at_cents(std::vector<double>(100, 15.0), 110.0);
  const auto a = compute_fpd(track, FeatureConfig::fpd(120, 110.0));
  EXPECT_NEAR(a.values[2], 1.0, 1e-15);
  const auto b = compute_fpd(track, FeatureConfig::fpd(240, 110.0));
  EXPECT_NEAR(b.values[3], 1.0, 1e-15);
  const auto c = compute_fpd(ts::track_at_cents(std::vector<double>(10, 0.0), 110.0), FeatureConfig::fpd(120, 110.0));
  EXPECT_EQ(c.values[0], 1.0);
}

TEST(Fpd, MatchesBinCountOracleOnRandomTracks) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> c(-1200.0, 2400.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> cents(200);
    for (auto& x : cents) x = c(rng);
    // Keep clear of bin edges so the oracle and the library see the same side after log/exp rounding.
    for (auto& x : cents) {
      const double frac = x / 10.0 - std::floor(x / 10.0);
      if (std::abs(frac - 0.5) < 1e-6) x += 0.01;
    }
    const auto track = ts::track_at_cents(cents, 130.0);
    for (int bins : {120, 240}) {
      const auto pd = compute_fpd(track, FeatureConfig::fpd(bins, 130.0));
      const auto oracle = histogram_oracle(cents, bins);
      for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_NEAR(pd.values[i], oracle[i], 1e-12);
    }
  }
}

TEST(Kpd, SingleFrameBumpIsSymmetric) {
  const auto pd = compute_kpd(ts::track_at_cents({0.0}, 220.0), FeatureConfig::kpd(120, 10.0, 220.0));
  EXPECT_EQ(pd.values[1], pd.values[119]);
  EXPECT_EQ(pd.values[5], pd.values[115]);
  const auto peak = std::max_element(pd.values.begin(), pd.values.end()) - pd.values.begin();
  EXPECT_EQ(peak, 0);
}

TEST(Kpd, MatchesDirectEvaluation) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> c(0.0, 1200.0);
  std::vector<double> cents(60);
  for (auto& x : cents) x = c(rng);
  const auto track = ts::track_at_cents(cents, 100.0);
  for (double h : {2.5, 10.0, 25.0}) {
    const auto pd = compute_kpd(track, FeatureConfig::kpd(120, h, 100.0));
    const auto oracle = kde_oracle(cents, 120, h);
    for (std::size_t i = 0; i < 120; ++i) EXPECT_NEAR(pd.values[i], oracle[i], 1e-10) << "h=" << h << " bin " << i;
  }
}

TEST(Kpd, NormalizedOnRandomTracks) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> h(0.5, 100.0);
  for (int i = 0; i < 100; ++i) {
    const auto t = random_track(rng, 50 + static_cast<std::size_t>(i) * 7, 146.8);
    const auto pd = compute_kpd(t, FeatureConfig::kpd(i % 2 ? 240 : 120, h(rng), 146.8));
    EXPECT_NEAR(sum(pd.values), 1.0, 1e-9);
    for (double v : pd.values) EXPECT_GE(v, 0.0);
  }
}

TEST(Kpd, NarrowKernelConvergesToHistogram) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> bin(-240, 480);
  std::vector<double> cents(300);
  for (auto& x : cents) x = 10.0 * bin(rng);
  const auto track = ts::track_at_cents(cents, 123.0);
  const auto kpd = compute_kpd(track, FeatureConfig::kpd(120, 0.01, 123.0));
  const auto fpd = compute_fpd(track, FeatureConfig::fpd(120, 123.0));
  double worst = 0.0;
  for (std::size_t i = 0; i < 120; ++i) worst = std::max(worst, std::abs(kpd.values[i] - fpd.values[i]));
  EXPECT_LT(worst, 1e-6);
}

TEST(Kpd, LinearInSamples) {
  const FeatureConfig cfg = FeatureConfig::kpd(120, 5.0, 200.0);
  const auto both = compute_kpd(ts::track_at_cents({0.0, 600.0}, 200.0), cfg);
  const auto a = compute_kpd(ts::track_at_cents({0.0}, 200.0), cfg);
  const auto b = compute_kpd(ts::track_at_cents({600.0}, 200.0), cfg);
  for (std::size_t i = 0; i < 120; ++i) EXPECT_NEAR(both.values[i], 0.5 * (a.values[i] + b.values[i]), 1e-12);
}

TEST(Kpd, InvalidBandwidth) {
  try {
    compute_kpd(ts::track_at_cents({0.0}, 200.0), FeatureConfig::kpd(120, 0.0, 200.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveBandwidth);
  }
}

TEST(FeatureConfig, BinCountRules) {
  EXPECT_THROW((FeatureConfig{FeatureKind::PCD, 120, 0, 100}.validate()), Error);
  EXPECT_THROW((FeatureConfig{FeatureKind::FPD, 12, 0, 100}.validate()), Error);
  EXPECT_THROW((FeatureConfig{FeatureKind::KPD, 100, 5, 100}.validate()), Error);
  EXPECT_NO_THROW((FeatureConfig{FeatureKind::KPD, 240, 5, 100}.validate()));
}

TEST(Features, PermutationStable) {
  std::mt19937_64 rng(8);
  auto t = random_track(rng, 400, 150.0);
  const FeatureConfig cfgs[] = {FeatureConfig::pcd(150.0), FeatureConfig::fpd(240, 150.0),
                                FeatureConfig::kpd(120, 7.5, 150.0)};
  std::vector<PitchDistribution> before;
  for (const auto& c : cfgs) before.push_back(compute_distribution(t, c));
  std::shuffle(t.frames.begin(), t.frames.end(), rng);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(compute_distribution(t, cfgs[i]).values, before[i].values);
}

TEST(Features, TonicShiftEquivariance) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> bin(0, 239);
  const double r = 130.0;
  for (int bins : {120, 240}) {
    const double w = 1200.0 / bins;
    std::vector<double> cents(200);
    for (auto& x : cents) x = w * (bin(rng) % bins);
    const auto track = ts::track_at_cents(cents, r);
    const auto base = compute_fpd(track, FeatureConfig::fpd(bins, r));
    for (int k : {1, 7, bins / 2, bins - 1}) {
      const auto shifted = compute_fpd(track, FeatureConfig::fpd(bins, r * std::exp2(static_cast<double>(k) / bins)));
      const auto rotated = rotate(base, k);
      for (int i = 0; i < bins; ++i) EXPECT_NEAR(shifted.values[i], rotated.values[i], 1e-9) << bins << "/" << k;
      EXPECT_NEAR(rotated.ref_hz, r * std::exp2(static_cast<double>(k) / bins), 1e-9);
    }
  }
}

TEST(Rotate, Examples) {
  std::mt19937_64 rng(2);
  const auto pd = ts::make_pd(ts::random_simplex(rng, 120));
  EXPECT_EQ(rotate(pd, 0).values, pd.values);
  for (long long k : {1LL, 17LL, 119LL}) EXPECT_EQ(rotate(rotate(pd, k), 120 - k).values, pd.values);
  std::vector<double> spike(120, 0.0);
  spike[30] = 1.0;
  const auto r = rotate(ts::make_pd(spike), 30);
  EXPECT_EQ(r.values[0], 1.0);
  EXPECT_EQ(rotate(pd, 121).values, rotate(pd, 1).values);
  EXPECT_EQ(rotate(pd, -1).values, rotate(pd, 119).values);
}

TEST(Peaks, Examples) {
  EXPECT_TRUE(find_peaks(ts::make_pd(std::vector<double>(120, 1.0 / 120)), 7).empty());

  std::vector<double> v(120, 0.0);
  v[10] = 0.5;
  v[50] = 0.3;
  v[90] = 0.2;
  EXPECT_EQ(find_peaks(ts::make_pd(v), 2), (std::vector<std::size_t>{10, 50}));
  EXPECT_EQ(find_peaks(ts::make_pd(v), 7), (std::vector<std::size_t>{10, 50, 90}));

  std::vector<double> one(120, 0.0);
  one[0] = 1.0;
  EXPECT_EQ(find_peaks(ts::make_pd(one), 7), (std::vector<std::size_t>{0}));
}

TEST(Peaks, MatchBruteForceScan) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = ts::random_simplex(rng, trial % 2 ? 240 : 120, 0.3);
    const std::size_t n = v.size();
    std::vector<std::pair<double, std::size_t>> maxima;
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i] > v[(i + n - 1) % n] && v[i] > v[(i + 1) % n]) maxima.emplace_back(-v[i], i);
    }
    std::sort(maxima.begin(), maxima.end());
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < std::min<std::size_t>(7, maxima.size()); ++i) expected.push_back(maxima[i].second);
    EXPECT_EQ(find_peaks(ts::make_pd(v), 7), expected);
  }
}
