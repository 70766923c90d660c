// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "test_support.hpp"

using namespace ragaid;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

constexpr double kSeparabilityMaxError = 0.10;
constexpr double kSweepMaxSeconds = 300.0;
constexpr double kCorpusMaxRagaError = 0.15;
constexpr double kCorpusMaxTonicError = 0.12;
constexpr double kCorpusMaxSeconds = 1800.0;
constexpr double kBhattacharyyaHalf = 0.346574;
constexpr double kBhattacharyyaHalfTol = 1e-6;
constexpr double kSelfDistanceTol = 1e-12;
constexpr double kNormalizationTol = 1e-9;
constexpr double kKdeLimitTol = 1e-6;
constexpr double kLinearityTol = 1e-12;
constexpr double kPosteriorSumTol = 1e-9;
constexpr double kGmmMvgTol = 1e-6;
constexpr double kTrackerCents = 25.0;
constexpr double kOctaveSanityFraction = 0.80;
constexpr double kTrackerMaxSeconds = 60.0;
constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  enum Status { Pass, Fail, NotApplicable } status;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

std::vector<SyntheticSample> corpus_from(const char* file, int per_raga, std::uint64_t seed) {
  return synthesize_corpus(load_synth_specs(fs::path(RAGAID_DATA_DIR) / file), per_raga, seed);
}

EvalConfig nn_config(DistanceMetric metric = DistanceMetric::Bhattacharyya) {
  EvalConfig cfg;
  cfg.seed = kSeed;
  cfg.search.metric = metric;
  cfg.search.mode = SearchMode::AC;
  cfg.classifier = ClassifierKind::NN;
  return cfg;
}

// 1. Reference corpus (only when a manifest is supplied).
Outcome reference_corpus() {
  const char* manifest_path = std::getenv("RAGAID_REFERENCE_MANIFEST");
  if (!manifest_path || !*manifest_path) {
    return {Outcome::NotApplicable, "set RAGAID_REFERENCE_MANIFEST to a labeled 127-sample corpus manifest to run"};
  }
  const auto t0 = Clock::now();
  const auto manifest = load_manifest(manifest_path);
  std::optional<fs::path> tracks;
  if (const char* t = std::getenv("RAGAID_REFERENCE_TRACKS")) tracks = fs::path(t);
  const auto corpus = load_corpus_tracks(manifest, tracks, TrackerConfig{});
  const auto db = build_feature_db(corpus, FeatureConfig::kpd(240, 10.0));
  const auto r = cross_validate(db, nn_config());
  const double secs = seconds_since(t0);
  const double tonic = r.tonic_error_rate_at.at(15.0);
  const bool ok = r.raga_error_rate <= kCorpusMaxRagaError && tonic <= kCorpusMaxTonicError && secs <= kCorpusMaxSeconds;
  return {ok ? Outcome::Pass : Outcome::Fail,
          fmt("raga error %.4f", r.raga_error_rate) + fmt(", tonic error@15 %.4f", tonic) + fmt(", %.1f s", secs)};
}

// 2. Synthetic separability plus sweep runtime.
Outcome synthetic_separability() {
  const auto corpus = ts::as_corpus(corpus_from("synth_basic.json", 10, kSeed));
  const auto db = build_feature_db(corpus, FeatureConfig::kpd(120, 10.0));
  const auto r = cross_validate(db, nn_config());
  const double tonic = r.tonic_error_rate_at.at(15.0);

  SweepGrid grid;
  grid.features = {{FeatureKind::PCD, 12}, {FeatureKind::FPD, 120}, {FeatureKind::KPD, 120}};
  grid.kernel_widths = {10.0};
  grid.metrics = {DistanceMetric::Bhattacharyya, DistanceMetric::Euclidean};
  grid.modes = {SearchMode::AC};
  grid.classifiers = {ClassifierKind::NN};
  const auto t0 = Clock::now();
  const auto rows = run_sweep(corpus, grid, nn_config());
  const double secs = seconds_since(t0);
  bool row_errors = false;
  for (const auto& row : rows) row_errors |= !row.error.empty();

  const bool ok = r.raga_error_rate <= kSeparabilityMaxError && tonic <= kSeparabilityMaxError &&
                  secs <= kSweepMaxSeconds && !row_errors && rows.size() == 6;
  return {ok ? Outcome::Pass : Outcome::Fail, fmt("raga error %.4f", r.raga_error_rate) +
                                                  fmt(", tonic error@15 %.4f", tonic) +
                                                  fmt(", sweep %.1f s", secs) + fmt(" (%g rows)", static_cast<double>(rows.size()))};
}

// 3. Fine-grained beats PCD on microtonal pairs.
Outcome microtonal_ordering() {
  const auto corpus = ts::as_corpus(corpus_from("synth_microtonal.json", 10, kSeed));
  const auto kpd = cross_validate(build_feature_db(corpus, FeatureConfig::kpd(120, 10.0)), nn_config());
  const auto pcd = cross_validate(build_feature_db(corpus, FeatureConfig::pcd()), nn_config());
  const bool ok = kpd.raga_error_rate < pcd.raga_error_rate;
  return {ok ? Outcome::Pass : Outcome::Fail,
          fmt("KPD-120 raga error %.4f", kpd.raga_error_rate) + fmt(" vs PCD %.4f", pcd.raga_error_rate)};
}

// 4. Exhaustive rotation recovery.
Outcome rotation_recovery() {
  const auto db = build_feature_db(ts::as_corpus(corpus_from("synth_basic.json", 10, kSeed)), FeatureConfig::kpd(120, 10.0));
  TonicSearchConfig cfg;
  cfg.mode = SearchMode::AC;
  std::size_t failures = 0, checked = 0;
  const double half_bin = 600.0 / 120.0;
  for (const auto& s : db.samples) {
    for (long long k = 0; k < 120; ++k) {
      const auto est = estimate(rotate(s.pd, k), db.samples, cfg);
      ++checked;
      const bool ok = std::abs(est.distance) <= kSelfDistanceTol && est.raga_label == s.raga_label &&
                      circular_cents_distance(est.tonic_hz, s.tonic_hz) <= half_bin;
      failures += !ok;
    }
  }
  return {failures == 0 ? Outcome::Pass : Outcome::Fail,
          fmt("%g queries", static_cast<double>(checked)) + fmt(", %g failures", static_cast<double>(failures))};
}

// 5. Distance suite.
Outcome distance_suite() {
  const std::vector<double> p{1.0, 0.0}, q{0.5, 0.5}, r{0.0, 1.0};
  bool ok = distance(p, p, DistanceMetric::Bhattacharyya) == 0.0;
  ok &= std::abs(distance(p, q, DistanceMetric::Bhattacharyya) - kBhattacharyyaHalf) <= kBhattacharyyaHalfTol;
  const double disjoint = distance(p, r, DistanceMetric::Bhattacharyya);
  ok &= std::isfinite(disjoint) && std::abs(disjoint - (-std::log(kBhattacharyyaFloor))) < 1e-9;

  std::mt19937_64 rng(kSeed);
  std::size_t violations = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const std::size_t bins = 120;
    const auto a = ts::random_simplex(rng, bins, 0.2), b = ts::random_simplex(rng, bins, 0.2),
               c = ts::random_simplex(rng, bins, 0.2);
    for (auto m : {DistanceMetric::CityBlock, DistanceMetric::Euclidean}) {
      violations += distance(a, b, m) != distance(b, a, m);
      violations += distance(a, a, m) != 0.0 || !(distance(a, b, m) > 0.0);
      violations += distance(a, b, m) > distance(a, c, m) + distance(c, b, m) + 1e-12;
    }
    violations += std::abs(distance(a, b, DistanceMetric::Bhattacharyya) - distance(b, a, DistanceMetric::Bhattacharyya)) > 1e-12;
    violations += std::abs(distance(a, a, DistanceMetric::Bhattacharyya)) > kSelfDistanceTol;
  }
  ok &= violations == 0;
  return {ok ? Outcome::Pass : Outcome::Fail,
          fmt("B(p,q)=%.6f", distance(p, q, DistanceMetric::Bhattacharyya)) + fmt(", disjoint %.2f", disjoint) +
              fmt(", %g axiom violations over 1000 triples", static_cast<double>(violations))};
}

// 6. Kernel density suite.
Outcome kde_suite() {
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> cents(-1200.0, 2400.0), width(0.5, 50.0);
  double worst_norm = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> c(100 + i);
    for (auto& x : c) x = cents(rng);
    const auto pd = compute_kpd(ts::track_at_cents(c, 140.0), FeatureConfig::kpd(120, width(rng), 140.0));
    double s = 0.0;
    for (double v : pd.values) s += v;
    worst_norm = std::max(worst_norm, std::abs(s - 1.0));
  }

  std::uniform_int_distribution<int> bin(0, 119);
  std::vector<double> on_centres(300);
  for (auto& x : on_centres) x = 10.0 * bin(rng);
  const auto track = ts::track_at_cents(on_centres, 140.0);
  const auto kpd = compute_kpd(track, FeatureConfig::kpd(120, 0.01, 140.0));
  const auto fpd = compute_fpd(track, FeatureConfig::fpd(120, 140.0));
  double worst_limit = 0.0;
  for (std::size_t i = 0; i < 120; ++i) worst_limit = std::max(worst_limit, std::abs(kpd.values[i] - fpd.values[i]));

  const auto cfg = FeatureConfig::kpd(120, 5.0, 140.0);
  const auto both = compute_kpd(ts::track_at_cents({0.0, 600.0}, 140.0), cfg);
  const auto a = compute_kpd(ts::track_at_cents({0.0}, 140.0), cfg);
  const auto b = compute_kpd(ts::track_at_cents({600.0}, 140.0), cfg);
  double worst_linear = 0.0;
  for (std::size_t i = 0; i < 120; ++i) {
    worst_linear = std::max(worst_linear, std::abs(both.values[i] - 0.5 * (a.values[i] + b.values[i])));
  }
  const bool ok = worst_norm <= kNormalizationTol && worst_limit < kKdeLimitTol && worst_linear <= kLinearityTol;
  return {ok ? Outcome::Pass : Outcome::Fail, fmt("normalization %.2e", worst_norm) + fmt(", h->0 deviation %.2e", worst_limit) +
                                                  fmt(", linearity %.2e", worst_linear)};
}

// 7. Posterior suite.
Outcome posterior_suite() {
  BayesModel model;
  model.input_dimension = 1;
  model.classes = {"a", "b"};
  model.priors = {0.5, 0.5};
  for (double mu : {0.0, std::sqrt(2.0 * std::log(9.0))}) {
    GaussianComponent g;
    g.mean = Eigen::VectorXd::Constant(1, mu);
    g.covariance = Eigen::MatrixXd::Identity(1, 1);
    g.factorize();
    model.densities.push_back(ClassDensity{{g}});
  }
  const auto nine = bayes_classify(ts::make_pd({0.0}), model).posterior;
  const double nine_err = std::max(std::abs(nine[0] - 0.9), std::abs(nine[1] - 0.1));

  std::mt19937_64 rng(kSeed);
  std::vector<LabeledSample> db;
  std::vector<std::vector<double>> centres;
  for (int c = 0; c < 3; ++c) centres.push_back(ts::random_simplex(rng, 120));
  std::normal_distribution<double> jitter(0.0, 0.002);
  for (int i = 0; i < 18; ++i) {
    auto v = centres[static_cast<std::size_t>(i % 3)];
    double s = 0.0;
    for (auto& x : v) s += (x = std::max(0.0, x + jitter(rng)));
    for (auto& x : v) x /= s;
    db.push_back(ts::labeled("s" + std::to_string(i), "r" + std::to_string(i % 3), ts::make_pd(v)));
  }
  BayesConfig mvg, gmm1, gmm3;
  gmm1.kind = gmm3.kind = DensityKind::GMM;
  gmm1.gmm_components = 1;
  gmm3.gmm_components = 3;
  const auto m_mvg = fit_bayes(db, mvg), m_gmm1 = fit_bayes(db, gmm1), m_gmm3 = fit_bayes(db, gmm3);
  double worst_sum = 0.0, worst_agree = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto q = ts::make_pd(ts::random_simplex(rng, 120));
    const auto pm = bayes_classify(q, m_mvg).posterior;
    const auto p1 = bayes_classify(q, m_gmm1).posterior;
    const auto p3 = bayes_classify(q, m_gmm3).posterior;
    for (const auto* p : {&pm, &p1, &p3}) {
      double s = 0.0;
      for (double x : *p) s += x;
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
    for (std::size_t c = 0; c < pm.size(); ++c) worst_agree = std::max(worst_agree, std::abs(pm[c] - p1[c]));
  }
  const bool ok = worst_sum <= kPosteriorSumTol && nine_err <= 1e-12 && worst_agree <= kGmmMvgTol;
  return {ok ? Outcome::Pass : Outcome::Fail, fmt("posterior (%.12f", nine[0]) + fmt(", %.12f)", nine[1]) +
                                                  fmt(", sum deviation %.2e", worst_sum) +
                                                  fmt(", GMM(1) vs MVG %.2e", worst_agree)};
}

// 8. Pitch tracker oracles.
Outcome tracker_suite() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;

  const auto sine = estimate_pitch_track(ts::sine(440.0, 1.0));
  const double sine_err = ts::cents_between(ts::median(ts::voiced_freqs(sine)), 440.0);
  ok &= sine_err <= kTrackerCents && sine.voiced_count() * 10 >= sine.size() * 9;

  const auto saw = estimate_pitch_track(ts::sawtooth(200.0, 1.0));
  const double saw_err = ts::cents_between(ts::median(ts::voiced_freqs(saw)), 200.0);
  ok &= saw_err <= kTrackerCents;

  ragaid::AudioBuffer silence;
  silence.sample_rate = 44100;
  silence.samples.assign(44100, 0.0);
  const auto quiet = estimate_pitch_track(silence);
  ok &= quiet.voiced_count() == 0 && quiet.size() > 0;

  const auto base = ts::sawtooth(170.0, 0.5, 44100, 0.2);
  const auto ref = estimate_pitch_track(base);
  bool invariant = true;
  for (double c : {4.0, 0.25}) {
    auto scaled = base;
    for (auto& s : scaled.samples) s *= c;
    const auto t = estimate_pitch_track(scaled);
    for (std::size_t i = 0; i < t.size(); ++i) {
      invariant &= t.frames[i].voiced() == ref.frames[i].voiced();
      if (t.frames[i].voiced()) invariant &= t.frames[i].freq_hz == ref.frames[i].freq_hz;
    }
  }
  ok &= invariant;

  double worst_fraction = 1.0;
  for (double f : {146.8, 200.0, 261.6, 293.6}) {
    for (int partials : {1, 8}) {
      const auto v = ts::voiced_freqs(estimate_pitch_track(ts::harmonic_tone(f, partials, 0.4)));
      std::size_t good = 0;
      for (double x : v) good += ts::cents_between(x, f) <= kTrackerCents;
      worst_fraction = std::min(worst_fraction, v.empty() ? 0.0 : static_cast<double>(good) / static_cast<double>(v.size()));
    }
  }
  ok &= worst_fraction >= kOctaveSanityFraction;

  const double secs = seconds_since(t0);
  ok &= secs <= kTrackerMaxSeconds;
  detail = fmt("sine %.2f c", sine_err) + fmt(", sawtooth %.2f c", saw_err) +
           fmt(", silence voiced %g", static_cast<double>(quiet.voiced_count())) +
           (invariant ? ", amplitude-invariant" : ", amplitude-VARIANT") + fmt(", octave-sanity min %.3f", worst_fraction) +
           fmt(", %.1f s", secs);
  return {ok ? Outcome::Pass : Outcome::Fail, detail};
}

// 9. Best-Candidates consistency and cost.
Outcome bc_consistency() {
  const auto db = build_feature_db(ts::as_corpus(corpus_from("synth_basic.json", 10, kSeed)), FeatureConfig::kpd(120, 10.0));
  const auto queries = corpus_from("synth_basic.json", 40, kSeed + 1);
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> ref(80.0, 160.0);
  TonicSearchConfig ac, bc;
  bc.mode = SearchMode::BC;
  std::size_t comparable = 0, mismatches = 0, ac_evals = 0, bc_evals = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    // Reference unrelated to the sample's tonic, so the tonic is unknown to the search.
    const auto pd = compute_kpd(queries[i].track, FeatureConfig::kpd(120, 10.0, ref(rng)));
    SearchStats sa, sb;
    const auto a = estimate(pd, db.samples, ac, &sa);
    const auto b = estimate(pd, db.samples, bc, &sb);
    ac_evals += sa.distance_evaluations;
    bc_evals += sb.distance_evaluations;
    const auto peaks = find_peaks(pd, 7);
    if (std::find(peaks.begin(), peaks.end(), a.rotation_k) == peaks.end()) continue;
    ++comparable;
    const bool same = a.tonic_hz == b.tonic_hz && a.raga_label == b.raga_label && a.distance == b.distance &&
                      a.neighbor_id == b.neighbor_id && a.rotation_k == b.rotation_k;
    mismatches += !same;
  }
  const double ratio = static_cast<double>(bc_evals) / static_cast<double>(ac_evals);
  const bool ok = mismatches == 0 && ratio <= 7.0 / 120.0 && comparable > 0;
  return {ok ? Outcome::Pass : Outcome::Fail, fmt("%g/200 queries with AC winner among BC peaks", static_cast<double>(comparable)) +
                                                  fmt(", %g mismatches", static_cast<double>(mismatches)) +
                                                  fmt(", evaluation ratio %.4f", ratio) + fmt(" (limit %.4f)", 7.0 / 120.0)};
}

// 10. CLI sweep determinism.
Outcome sweep_determinism() {
  const auto work = fs::temp_directory_path() / "ragaid_acceptance_determinism";
  fs::remove_all(work);
  fs::create_directories(work);
  const std::string cli = RAGAID_CLI;
  std::ofstream(work / "grid.json") << R"({"sweep": {"features": ["PCD", "FPD-120", "KPD-120"], "kernel_widths": [10],
    "metrics": ["bhattacharyya", "euclidean"], "modes": ["AC", "BC"], "classifiers": ["NN", "MVG"]}})";
  auto run = [&](const std::string& args) { return std::system((cli + " " + args + " 2>/dev/null").c_str()); };
  if (run("--seed 3 --out " + (work / "corpus").string() + " synth --specs " +
          (fs::path(RAGAID_DATA_DIR) / "synth_basic.json").string() + " --count 4") != 0) {
    return {Outcome::Fail, "synth failed"};
  }
  for (const char* name : {"a", "b"}) {
    if (run("--seed 9 --config " + (work / "grid.json").string() + " --out " + (work / name).string() +
            " sweep --manifest " + (work / "corpus" / "manifest.csv").string()) != 0) {
      return {Outcome::Fail, "sweep failed"};
    }
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto a = slurp(work / "a" / "sweep.csv"), b = slurp(work / "b" / "sweep.csv");
  const bool ok = !a.empty() && a == b;
  return {ok ? Outcome::Pass : Outcome::Fail,
          fmt("%g bytes", static_cast<double>(a.size())) + (ok ? ", identical" : ", DIFFERENT")};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"reference-corpus", reference_corpus},
      {"synthetic-separability", synthetic_separability},
      {"microtonal-ordering", microtonal_ordering},
      {"rotation-recovery", rotation_recovery},
      {"distance-suite", distance_suite},
      {"kde-suite", kde_suite},
      {"posterior-suite", posterior_suite},
      {"pitch-tracker-suite", tracker_suite},
      {"bc-ac-consistency", bc_consistency},
      {"sweep-determinism", sweep_determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Outcome::Pass ? "PASS" : o.status == Outcome::Fail ? "FAIL" : "N/A ";
    std::printf("%s  %-24s %s\n", tag, name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.status == Outcome::Fail;
  }
  std::printf("%d criterion(s) failed\n", failed);
  return failed == 0 ? 0 : 1;
}
