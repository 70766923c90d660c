// ragaid: corpus tooling for joint tonic and raga identification.
//
//   ragaid synth    --specs data/synth_basic.json --count 10 --out corpus
//   ragaid extract  --manifest corpus/manifest.csv --out work
//   ragaid build-db --manifest corpus/manifest.csv --tracks work/tracks --out work
//   ragaid identify --db work/features.json --input query.wav
//   ragaid crossval --db work/features.json --out work
//   ragaid sweep    --manifest corpus/manifest.csv --out work

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ragaid/cli.hpp"
#include "ragaid/ragaid.hpp"

namespace fs = std::filesystem;
using namespace ragaid;

namespace {

constexpr int kExitEmptyDatabase = 2;

struct Options {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = ".";

  std::string manifest;
  std::string tracks_dir;
  std::string db_path;
  std::string input;
  std::string specs;
  int count = 10;

  std::string feature;
  std::optional<double> kernel_width;
  std::string metric;
  std::string mode;
  std::string classifier;
  std::string fit;
};

RunConfig resolve_config(const Options& o) {
  RunConfig rc = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (!o.feature.empty()) {
    const auto axis = parse_feature_axis(o.feature);
    rc.feature.kind = axis.kind;
    rc.feature.bins = axis.bins;
  }
  if (o.kernel_width) rc.feature.kernel_width = *o.kernel_width;
  if (!o.metric.empty()) rc.eval.search.metric = parse_metric(o.metric);
  if (!o.mode.empty()) rc.eval.search.mode = parse_search_mode(o.mode);
  if (!o.classifier.empty()) rc.eval.classifier = parse_classifier(o.classifier);
  rc.eval.seed = o.seed;
  rc.eval.bayes.seed = o.seed;
  rc.sync();
  rc.validate();
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
  out << text;
}

std::optional<fs::path> tracks_dir_or_default(const Options& o) {
  if (!o.tracks_dir.empty()) return fs::path(o.tracks_dir);
  const auto guess = fs::path(o.out_dir) / "tracks";
  if (fs::exists(guess)) return guess;
  return std::nullopt;
}

DatasetManifest load_manifest_reporting(const std::string& path) {
  auto manifest = load_manifest(path);
  for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << '\n';
  return manifest;
}

int cmd_synth(const Options& o) {
  const auto specs = load_synth_specs(o.specs);
  const auto corpus = synthesize_corpus(specs, o.count, o.seed);
  write_corpus(corpus, o.out_dir);
  std::cerr << "wrote " << corpus.size() << " samples to " << (fs::path(o.out_dir) / "manifest.csv").string() << '\n';
  return 0;
}

int cmd_extract(const Options& o, const RunConfig& rc) {
  const auto manifest = load_manifest_reporting(o.manifest);
  const auto summary = extract_tracks(manifest, rc.tracker, fs::path(o.out_dir) / "tracks");
  for (const auto& [id, msg] : summary.failures) std::cerr << "warning: " << id << ": " << msg << '\n';
  std::cerr << "computed " << summary.computed << ", cached " << summary.cached << ", failed "
            << summary.failures.size() << '\n';
  const bool all_failed = !manifest.entries.empty() && summary.failures.size() == manifest.entries.size();
  return all_failed ? 1 : 0;
}

int cmd_build_db(const Options& o, const RunConfig& rc) {
  const auto manifest = load_manifest_reporting(o.manifest);
  const auto corpus = load_corpus_tracks(manifest, tracks_dir_or_default(o), rc.tracker);
  auto db = build_feature_db(corpus, rc.feature);
  if (!o.fit.empty()) {
    BayesConfig bc = rc.eval.bayes;
    bc.kind = parse_classifier(o.fit) == ClassifierKind::GMM ? DensityKind::GMM : DensityKind::MVG;
    if (o.fit == "NN" || o.fit == "nn") throw Error(ErrorCode::InvalidConfig, "--fit takes MVG or GMM");
    db.model = fit_bayes(db.samples, bc);
  }
  const auto path = o.db_path.empty() ? fs::path(o.out_dir) / "features.json" : fs::path(o.db_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_feature_db(db, path);
  std::cerr << "wrote " << db.samples.size() << " x " << db.feature.label() << " to " << path.string() << '\n';
  return 0;
}

PitchTrack load_query_track(const std::string& input, const TrackerConfig& tracker) {
  if (fs::path(input).extension() == ".csv") return load_pitch_track_csv(input);
  return estimate_pitch_track(load_wav(input), tracker);
}

int cmd_identify(const Options& o, RunConfig rc) {
  const auto loaded = load_feature_db(o.db_path, rc.feature.fingerprint());
  const auto& db = loaded.db;
  if (db.samples.empty()) {
    std::cerr << "empty database\n";
    return kExitEmptyDatabase;
  }
  if (loaded.fingerprint_mismatch) {
    std::cerr << "note: using the database's feature settings (" << db.config_fingerprint << ")\n";
  }
  FeatureConfig feature = db.feature;
  feature.ref_hz = rc.feature.ref_hz;
  rc.eval.search.feature = feature;

  const auto track = load_query_track(o.input, rc.tracker);
  const auto query = compute_distribution(track, feature);
  const auto est = estimate(query, db.samples, rc.eval.search);

  nlohmann::json out;
  out["schema_version"] = kReportSchemaVersion;
  out["tonic_hz"] = est.tonic_hz;
  out["raga"] = est.raga_label;
  out["distance"] = est.distance;
  out["neighbor_id"] = est.neighbor_id;
  out["hypothesis_count"] = est.hypothesis_count;

  std::optional<BayesModel> model = db.model;
  if (!model && rc.eval.classifier != ClassifierKind::NN) {
    BayesConfig bc = rc.eval.bayes;
    bc.kind = rc.eval.classifier == ClassifierKind::MVG ? DensityKind::MVG : DensityKind::GMM;
    model = fit_bayes(db.samples, bc);
  }
  if (model) {
    const auto r = bayes_classify(rotate(query, static_cast<long long>(est.rotation_k)), *model);
    out["raga"] = r.label;
    nlohmann::json post = nlohmann::json::object();
    for (std::size_t i = 0; i < r.classes.size(); ++i) post[r.classes[i]] = r.posterior[i];
    out["posterior"] = post;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_crossval(const Options& o, const RunConfig& rc) {
  const auto loaded = load_feature_db(o.db_path);
  if (loaded.db.samples.empty()) {
    std::cerr << "empty database\n";
    return kExitEmptyDatabase;
  }
  EvalConfig cfg = rc.eval;
  cfg.search.feature = loaded.db.feature;
  const auto report = cross_validate(loaded.db, cfg);
  write_text(fs::path(o.out_dir) / "report.json", report_to_json(report).dump(2) + "\n");
  write_text(fs::path(o.out_dir) / "confusion.csv", confusion_csv(report));
  std::printf("raga_error=%.6f", report.raga_error_rate);
  if (auto it = report.tonic_error_rate_at.find(15.0); it != report.tonic_error_rate_at.end()) {
    std::printf(" tonic_error@15=%.6f", it->second);
  }
  std::printf("\n");
  return 0;
}

int cmd_sweep(const Options& o, const RunConfig& rc) {
  const auto manifest = load_manifest_reporting(o.manifest);
  const auto corpus = load_corpus_tracks(manifest, tracks_dir_or_default(o), rc.tracker);
  // A search flag given on the command line pins that sweep axis to the single value.
  SweepGrid grid = rc.sweep;
  if (!o.feature.empty()) grid.features = {parse_feature_axis(o.feature)};
  if (o.kernel_width) grid.kernel_widths = {*o.kernel_width};
  if (!o.metric.empty()) grid.metrics = {rc.eval.search.metric};
  if (!o.mode.empty()) grid.modes = {rc.eval.search.mode};
  if (!o.classifier.empty()) grid.classifiers = {rc.eval.classifier};
  grid.validate();
  const auto rows = run_sweep(corpus, grid, rc.eval);
  write_text(fs::path(o.out_dir) / "sweep.csv", sweep_csv(rows));
  std::cerr << "wrote " << rows.size() << " rows to " << (fs::path(o.out_dir) / "sweep.csv").string() << '\n';
  return 0;
}

void add_search_flags(CLI::App* sub, Options& o) {
  sub->add_option("--feature", o.feature, "PCD, FPD-120, FPD-240, KPD-120 or KPD-240");
  sub->add_option("--kernel-width", o.kernel_width, "KDE bandwidth in cents");
  sub->add_option("--metric", o.metric, "bhattacharyya, euclidean or cityblock");
  sub->add_option("--mode", o.mode, "AC or BC");
  sub->add_option("--classifier", o.classifier, "NN, MVG or GMM");
}

}  // namespace

int ragaid::run_cli(int argc, char** argv) {
  CLI::App app{"Joint tonic and raga identification from pitch distributions"};
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--seed", o.seed, "seed for every randomized step");
  app.add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", o.out_dir, "output directory");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus (manifest + pitch tracks)");
  synth->add_option("--specs", o.specs, "raga spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--count", o.count, "samples per raga");

  auto* extract = app.add_subcommand("extract", "track every manifest entry into <out>/tracks");
  extract->add_option("--manifest", o.manifest)->required()->check(CLI::ExistingFile);

  auto* build = app.add_subcommand("build-db", "build a tonic-aligned feature database");
  build->add_option("--manifest", o.manifest)->required()->check(CLI::ExistingFile);
  build->add_option("--tracks", o.tracks_dir, "directory of <sample_id>.csv pitch tracks");
  build->add_option("--db", o.db_path, "output path (default <out>/features.json)");
  build->add_option("--fit", o.fit, "also store a fitted MVG or GMM model");
  add_search_flags(build, o);

  auto* identify = app.add_subcommand("identify", "estimate tonic and raga of one recording");
  identify->add_option("--db", o.db_path)->required()->check(CLI::ExistingFile);
  identify->add_option("--input", o.input, "WAV file or pitch-track CSV")->required()->check(CLI::ExistingFile);
  add_search_flags(identify, o);

  auto* crossval = app.add_subcommand("crossval", "leave-one-out evaluation of a feature database");
  crossval->add_option("--db", o.db_path)->required()->check(CLI::ExistingFile);
  add_search_flags(crossval, o);

  auto* sweep = app.add_subcommand("sweep", "leave-one-out over a parameter grid");
  sweep->add_option("--manifest", o.manifest)->required()->check(CLI::ExistingFile);
  sweep->add_option("--tracks", o.tracks_dir, "directory of <sample_id>.csv pitch tracks");
  add_search_flags(sweep, o);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig rc = resolve_config(o);
    if (*synth) return cmd_synth(o);
    if (*extract) return cmd_extract(o, rc);
    if (*build) return cmd_build_db(o, rc);
    if (*identify) return cmd_identify(o, rc);
    if (*crossval) return cmd_crossval(o, rc);
    if (*sweep) return cmd_sweep(o, rc);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::EmptyDatabase ? kExitEmptyDatabase : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
