// keytap: command-line front end for the keystroke acoustics pipeline.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "keytap/applications.hpp"
#include "keytap/channel.hpp"
#include "keytap/countermeasure.hpp"
#include "keytap/errors.hpp"
#include "keytap/io.hpp"
#include "keytap/manifest.hpp"
#include "keytap/model_io.hpp"
#include "keytap/random.hpp"
#include "keytap/report.hpp"
#include "keytap/scenarios.hpp"
#include "keytap/synth.hpp"
#include "keytap/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace keytap;

namespace {

// ---- input helpers ---------------------------------------------------------

json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(where + ": " + e.what(), e.byte);
  }
}

json read_json_file(const fs::path& path) { return parse_json_text(read_file(path), path.string()); }

// Inline JSON when the argument starts with '{', otherwise a file path.
json json_arg(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') return parse_json_text(arg, "inline JSON");
  return read_json_file(arg);
}

AudioBuffer read_wav(const fs::path& path) {
  try {
    return load_wav(path);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte_offset());
  }
}

Selector selector_arg(const std::string& arg) { return arg.empty() ? Selector{} : selector_from_json(json_arg(arg)); }

// Rejects keys outside `allowed` so typos in config files do not pass silently.
void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ContractError(what + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) throw ContractError(what + ": unknown key '" + k + "'");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ContractError(what + ": bad value for '" + key + "': " + e.what());
  }
}

struct RunConfig {
  PipelineConfig pipeline;
  KeyModelConfig key;
};

// {"pipeline": {...}, "key_model": {...}}; both optional.
RunConfig run_config_arg(const std::string& arg) {
  RunConfig rc;
  if (arg.empty()) return rc;
  const json j = json_arg(arg);
  check_keys(j, {"pipeline", "key_model"}, "config");
  if (j.contains("pipeline")) rc.pipeline = pipeline_config_from_json(j.at("pipeline"));
  if (j.contains("key_model")) rc.key = key_model_config_from_json(j.at("key_model"));
  return rc;
}

json run_config_json(const RunConfig& rc) { return {{"pipeline", to_json(rc.pipeline)}, {"key_model", to_json(rc.key)}}; }

std::vector<Recording> load_selected(const std::string& manifest, const std::string& select) {
  auto recs = load_recordings(manifest, selector_arg(select));
  if (recs.empty()) throw DegenerateInputError("no recordings in " + manifest + " match the selection");
  return recs;
}

// ---- output helpers --------------------------------------------------------

struct Outputs {
  std::string out;
  std::string csv;
  std::string svg;

  void add_to(CLI::App* cmd, bool out_required = true) {
    auto* o = cmd->add_option("--out", out, "JSON report path");
    if (out_required) o->required();
    cmd->add_option("--csv", csv, "CSV curve table path");
    cmd->add_option("--svg", svg, "SVG plot path");
  }

  void emit(const json& report, const Table& table, const Plot& plot) const {
    if (!out.empty()) write_json(out, report);
    if (!csv.empty()) write_csv(csv, table);
    if (!svg.empty()) write_svg(svg, plot);
  }
};

double mean_at(const ScenarioReport& r, std::size_t n) { return n <= r.mean.size() ? r.mean[n - 1] : NAN; }
double std_at(const ScenarioReport& r, std::size_t n) { return n <= r.stddev.size() ? r.stddev[n - 1] : NAN; }

Table curve_table(const ScenarioReport& r) {
  Table t{{"n", "mean", "stddev", "baseline"}, {}};
  for (std::size_t n = 1; n <= r.mean.size(); ++n) {
    t.add_row({std::to_string(n), format_number(r.mean[n - 1]), format_number(r.stddev[n - 1]),
               format_number(r.baseline[n - 1])});
  }
  return t;
}

Series curve_series(const std::string& name, const std::vector<double>& ys) {
  Series s{name, {}, ys};
  for (std::size_t n = 1; n <= ys.size(); ++n) s.x.push_back(static_cast<double>(n));
  return s;
}

Plot curve_plot(const std::string& title, const std::vector<std::pair<std::string, const ScenarioReport*>>& reports) {
  Plot p{title, "n (top-n)", "accuracy", {}, 0.0, 1.0};
  for (const auto& [name, r] : reports) p.series.push_back(curve_series(name, r->mean));
  if (!reports.empty()) p.series.push_back(curve_series("baseline", reports.front().second->baseline));
  return p;
}

// One row per sweep point: setting, x, top-1/top-5 mean and std, baselines.
struct SweepRow {
  std::string setting;
  double x;
  const ScenarioReport* report;
};

Table sweep_table(const std::string& x_name, const std::vector<SweepRow>& rows) {
  Table t{{"setting", x_name, "top1_mean", "top1_std", "top5_mean", "top5_std", "baseline_top1", "baseline_top5"}, {}};
  for (const auto& r : rows) {
    t.add_row({r.setting, format_number(r.x), format_number(mean_at(*r.report, 1)), format_number(std_at(*r.report, 1)),
               format_number(mean_at(*r.report, 5)), format_number(std_at(*r.report, 5)),
               format_number(r.report->baseline.at(0)),
               format_number(r.report->baseline.size() >= 5 ? r.report->baseline[4] : NAN)});
  }
  return t;
}

Plot sweep_plot(const std::string& title, const std::string& x_label, const std::vector<SweepRow>& rows) {
  Plot p{title, x_label, "accuracy", {}, 0.0, 1.0};
  Series top1{"top-1", {}, {}}, top5{"top-5", {}, {}}, base{"baseline top-1", {}, {}};
  for (const auto& r : rows) {
    if (!std::isfinite(r.x)) continue;
    top1.x.push_back(r.x);
    top1.y.push_back(mean_at(*r.report, 1));
    top5.x.push_back(r.x);
    top5.y.push_back(mean_at(*r.report, 5));
    base.x.push_back(r.x);
    base.y.push_back(r.report->baseline.at(0));
  }
  p.series = {top1, top5, base};
  return p;
}

json scenario_json(const ScenarioReport& r) {
  json j = to_json(r);
  const auto ref = reference_targets(r.scenario);
  if (!ref.empty()) j["reference_targets"] = ref;
  return j;
}

std::optional<std::uint64_t> seed_flag(const CLI::Option* opt, std::uint64_t value) {
  return opt->count() ? std::optional<std::uint64_t>(value) : std::nullopt;
}

// ---- subcommands -----------------------------------------------------------

struct SynthArgs {
  std::string spec, out;
  double voice_seconds = 0.0;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

int cmd_synth(const SynthArgs& a) {
  CorpusSpec spec = a.spec.empty() ? CorpusSpec{} : corpus_spec_from_json(json_arg(a.spec));
  spec.seed = resolve_seed(seed_flag(a.seed_opt, a.seed), spec.seed);
  spec.validate();
  const auto files = write_corpus(spec, a.out);
  json body = {{"manifest", files.manifest.filename().string()},
               {"sessions", files.sessions.filename().string()},
               {"clips", files.clips},
               {"session_count", files.session_count}};
  if (a.voice_seconds > 0.0) {
    save_wav(fs::path(a.out) / "voice.wav", synth_voice(a.voice_seconds, spec.sample_rate, derive_seed(spec.seed, {0x766f6963})));
    body["voice"] = "voice.wav";
    body["voice_seconds"] = a.voice_seconds;
  }
  write_json(fs::path(a.out) / "synth_report.json", make_report("synth", {{"spec", to_json(spec)}, {"voice_seconds", a.voice_seconds}}, spec.seed, body));
  std::cout << "wrote " << files.clips << " clips and " << files.session_count << " sessions to " << a.out << "\n";
  return 0;
}

struct SegmentArgs {
  std::string input, out_dir;
  double threshold = NAN;
  std::size_t expected = 0;
  double length_ms = 100.0, window_ms = 10.0, refractory_ms = 100.0;
  bool remove_dc = false;
};

int cmd_segment(const SegmentArgs& a) {
  const AudioBuffer audio = read_wav(a.input);
  SegmenterConfig cfg;
  cfg.segment_length_s = a.length_ms / 1000.0;
  cfg.energy_window_s = a.window_ms / 1000.0;
  cfg.refractory_s = a.refractory_ms / 1000.0;
  cfg.remove_dc = a.remove_dc;
  if (std::isfinite(a.threshold)) cfg.threshold = a.threshold;
  cfg.validate();
  json calibration = nullptr;
  if (a.expected > 0) {
    const auto cal = calibrate_threshold(audio, a.expected, cfg);
    cfg = cal.config;
    calibration = {{"expected", a.expected}, {"achieved", cal.achieved_count}, {"exact", cal.exact}};
    if (!cal.exact) {
      std::cerr << "keytap: warning: calibrated to " << cal.achieved_count << " keystrokes, " << a.expected
                << " requested\n";
    }
  }
  const auto segs = detect_keystrokes(audio, cfg);
  fs::create_directories(a.out_dir);
  json rows = json::array();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "segment_%04zu.wav", i);
    save_wav(fs::path(a.out_dir) / name, segs[i].waveform);
    rows.push_back({{"index", i},
                    {"onset_s", segs[i].onset_s},
                    {"duration_s", segs[i].waveform.duration_seconds()},
                    {"path", name}});
  }
  json config = {{"input", a.input}, {"segmenter", to_json(cfg)}, {"calibration", calibration}};
  write_json(fs::path(a.out_dir) / "segments.json",
             make_report("segment", config, std::nullopt, {{"segments", rows}, {"count", segs.size()}}));
  std::cout << segs.size() << " segments\n";
  return 0;
}

struct FeaturesArgs {
  std::string input, kind, config, select, out;
};

int cmd_features(const FeaturesArgs& a) {
  RunConfig rc = run_config_arg(a.config);
  if (!a.kind.empty()) rc.pipeline.features.kind = feature_kind_from_string(a.kind);

  std::vector<std::string> paths;
  std::vector<std::string> labels;
  std::vector<SampleMeta> metas;
  std::vector<FeatureVector> vectors;

  const fs::path in(a.input);
  fs::path manifest;
  if (fs::is_regular_file(in) && in.extension() == ".jsonl") manifest = in;
  else if (fs::exists(in / "manifest.jsonl")) manifest = in / "manifest.jsonl";

  if (!manifest.empty()) {
    const auto recs = load_selected(manifest.string(), a.select);
    const auto data = featurize(recs, rc.pipeline);
    for (std::size_t i = 0; i < data.size(); ++i) {
      paths.push_back(recs[i].meta.source);
      labels.push_back(data.labels[i]);
      metas.push_back(data.meta[i]);
      vectors.push_back(data.vectors[i]);
    }
  } else {
    if (!fs::is_directory(in)) throw IoError("no such segments directory: " + in.string());
    std::vector<fs::path> wavs;
    for (const auto& e : fs::directory_iterator(in)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") wavs.push_back(e.path());
    }
    std::sort(wavs.begin(), wavs.end());
    if (wavs.empty()) throw DegenerateInputError("no WAV segments in " + in.string());
    for (const auto& w : wavs) {
      KeystrokeSegment seg;
      seg.waveform = read_wav(w);
      seg.nominal_length_s = rc.pipeline.segmenter.segment_length_s;
      paths.push_back(w.filename().string());
      labels.emplace_back();
      metas.emplace_back();
      vectors.push_back(extract_features(seg, rc.pipeline.features));
    }
  }

  Table t{{"path", "label", "user", "device_model", "device_unit", "typing_style", "channel"}, {}};
  for (std::size_t k = 0; k < vectors.front().values.size(); ++k) t.columns.push_back("f" + std::to_string(k));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    std::vector<std::string> row{paths[i], labels[i]};
    if (manifest.empty()) {
      row.insert(row.end(), 5, "");
    } else {
      const auto& m = metas[i];
      row.insert(row.end(), {m.user, m.device_model, m.device_unit, to_string(m.typing_style), m.channel});
    }
    for (double v : vectors[i].values) row.push_back(format_number(v));
    t.add_row(std::move(row));
  }
  write_csv(a.out, t);
  std::cout << vectors.size() << " feature vectors of length " << vectors.front().values.size() << "\n";
  return 0;
}

struct TrainArgs {
  std::string manifest, select, config, kind, out;
  bool no_rfe = false;
};

int cmd_train(const TrainArgs& a) {
  RunConfig rc = run_config_arg(a.config);
  if (!a.kind.empty()) rc.key.kind = classifier_kind_from_string(a.kind);
  if (a.no_rfe) rc.key.rfe = false;
  const auto recs = load_selected(a.manifest, a.select);
  const auto data = featurize(recs, rc.pipeline);
  const auto model = train_key_model(data, rc.key);
  save_model(a.out, ModelFile{model, rc.pipeline.features});
  std::cout << "trained " << to_string(model.kind) << " on " << data.size() << " samples, " << model.classes.size()
            << " classes\n";
  return 0;
}

struct EvalArgs {
  std::string model, manifest, select, segmenter;
  std::size_t top_n = 0;
  Outputs outputs;
};

int cmd_eval(const EvalArgs& a) {
  const ModelFile mf = load_model(a.model);
  SegmenterConfig seg = a.segmenter.empty() ? SegmenterConfig{} : segmenter_config_from_json(json_arg(a.segmenter));
  const auto recs = load_selected(a.manifest, a.select);
  const auto test = featurize(recs, PipelineConfig{seg, mf.features});
  auto report = summarize("evaluation", mf.classifier.classes.size(), {top_n_curve(mf.classifier, test)});
  report.config = {{"model", a.model}, {"segmenter", to_json(seg)}, {"features", to_json(mf.features)},
                   {"classifier", to_string(mf.classifier.kind)}, {"test_samples", test.size()}};
  json body = {{"report", scenario_json(report)}};
  if (a.top_n > 0) {
    if (a.top_n > report.mean.size()) throw ContractError("--top-n exceeds the number of classes");
    body["top_n"] = a.top_n;
    body["accuracy"] = report.top(a.top_n);
    std::cout << "top-" << a.top_n << " accuracy " << format_number(report.top(a.top_n)) << "\n";
  } else {
    std::cout << "top-1 " << format_number(report.top(1)) << "\n";
  }
  const json config = {{"model", a.model}, {"manifest", a.manifest}, {"select", to_json(selector_arg(a.select))},
                       {"segmenter", to_json(seg)}};
  a.outputs.emit(make_report("eval", config, std::nullopt, body), curve_table(report),
                 curve_plot("top-n accuracy", {{"model", &report}}));
  return 0;
}

// Scenario spec keys shared by every scenario.
const std::set<std::string> kScenarioKeys = {"scenario", "pipeline", "key_model", "folds", "seed", "repetitions",
                                             "select", "train", "test", "victim", "k", "known_threshold",
                                             "crowd", "kinds", "kbps", "voice", "relative_db", "total"};

struct ScenarioArgs {
  std::string spec, manifest;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  Outputs outputs;
};

int cmd_scenario(const ScenarioArgs& a) {
  const json spec = json_arg(a.spec);
  check_keys(spec, kScenarioKeys, "scenario spec");
  const std::string name = get_or<std::string>(spec, "scenario", "", "scenario spec");
  RunConfig rc;
  if (spec.contains("pipeline")) rc.pipeline = pipeline_config_from_json(spec.at("pipeline"));
  if (spec.contains("key_model")) rc.key = key_model_config_from_json(spec.at("key_model"));
  const auto folds = get_or<std::size_t>(spec, "folds", 10, "scenario spec");
  const auto seed = resolve_seed(seed_flag(a.seed_opt, a.seed), get_or<std::uint64_t>(spec, "seed", 0, "scenario spec"));
  json config = spec;
  config["pipeline"] = to_json(rc.pipeline);
  config["key_model"] = to_json(rc.key);
  config["folds"] = folds;
  config["seed"] = seed;
  config["manifest"] = a.manifest;

  auto sel = [&](const char* key) {
    return spec.contains(key) ? selector_from_json(spec.at(key)) : Selector{};
  };
  auto load = [&](const char* key) {
    auto recs = load_recordings(a.manifest, sel(key));
    if (recs.empty()) throw DegenerateInputError(std::string("scenario: selection '") + key + "' matches no recordings");
    return recs;
  };

  json body;
  Table table;
  Plot plot;
  if (name == "complete" || name == "small-training") {
    const auto data = featurize(load("select"), rc.pipeline);
    const auto r = name == "complete"
                       ? run_complete_profiling(data, rc.key, folds, seed)
                       : run_small_training(data, rc.key, folds, get_or<std::size_t>(spec, "repetitions", 20, "scenario spec"),
                                            seed, get_or<std::size_t>(spec, "total", 105, "scenario spec"));
    body = {{"report", scenario_json(r)}};
    table = curve_table(r);
    plot = curve_plot(r.scenario, {{r.scenario, &r}});
  } else if (name == "user") {
    const auto train = featurize(load("train"), rc.pipeline);
    const auto test = featurize(load("test"), rc.pipeline);
    const auto r = run_user_profiling(train, test, rc.key);
    body = {{"report", scenario_json(r)}};
    table = curve_table(r);
    plot = curve_plot(r.scenario, {{r.scenario, &r}});
  } else if (name == "model") {
    const auto db = featurize(load("select"), rc.pipeline);
    const auto victim = featurize(load("victim"), rc.pipeline);
    ModelProfilingConfig mc;
    mc.key = rc.key;
    mc.k = get_or<int>(spec, "k", mc.k, "scenario spec");
    mc.known_threshold = get_or<double>(spec, "known_threshold", mc.known_threshold, "scenario spec");
    mc.crowd = get_or<bool>(spec, "crowd", false, "scenario spec");
    const auto r = run_model_profiling(db, victim, mc);
    body = {{"report", scenario_json(r.report)},
            {"device", {{"model", r.device.model}, {"confidence", r.device.confidence}, {"known", r.device.known},
                        {"samples", r.device.samples}}},
            {"donors", r.donors}};
    table = curve_table(r.report);
    plot = curve_plot(r.report.scenario, {{r.report.scenario, &r.report}});
  } else if (name == "classifiers") {
    std::vector<ClassifierKind> kinds;
    for (const auto& k : get_or<std::vector<std::string>>(spec, "kinds", {"lr", "svm", "lda", "rf", "knn"}, "scenario spec")) {
      kinds.push_back(classifier_kind_from_string(k));
    }
    const auto data = featurize(load("select"), rc.pipeline);
    const auto points = compare_classifiers(data, rc.key, kinds, folds, seed);
    json reports = json::array();
    table.columns = {"n"};
    std::vector<std::pair<std::string, const ScenarioReport*>> curves;
    for (const auto& p : points) {
      json rj = scenario_json(p.report);
      rj["classifier"] = to_string(p.kind);
      reports.push_back(rj);
      table.columns.push_back(to_string(p.kind));
      curves.emplace_back(to_string(p.kind), &p.report);
    }
    for (std::size_t n = 1; n <= points.front().report.mean.size(); ++n) {
      std::vector<std::string> row{std::to_string(n)};
      for (const auto& p : points) row.push_back(format_number(p.report.mean[n - 1]));
      table.add_row(row);
    }
    body = {{"reports", reports}};
    plot = curve_plot("classifier comparison", curves);
  } else if (name == "channel") {
    const auto kbps = get_or<std::vector<double>>(spec, "kbps", {70, 60, 50, 40, 30, 20}, "scenario spec");
    const auto points = run_channel_sweep(load("select"), rc.pipeline, rc.key, kbps, folds, seed);
    json rows = json::array();
    std::vector<SweepRow> sweep;
    for (const auto& p : points) {
      rows.push_back({{"setting", p.setting}, {"channel", to_json(p.channel)}, {"report", scenario_json(p.report)}});
      const bool rated = p.setting != "plain" && p.setting != "identity";
      sweep.push_back({p.setting, rated ? p.channel.target_kbps : NAN, &p.report});
    }
    body = {{"points", rows}, {"note", "bandwidth proxy: Butterworth low-pass plus packet loss; not a codec"}};
    table = sweep_table("kbps", sweep);
    plot = sweep_plot("accuracy vs channel bitrate", "kbps", sweep);
  } else if (name == "voice") {
    if (!spec.contains("voice")) throw ContractError("voice scenario needs a \"voice\" WAV path");
    fs::path vp = spec.at("voice").get<std::string>();
    if (vp.is_relative()) vp = fs::path(a.spec).parent_path() / vp;
    VoiceSweepConfig vc;
    vc.relative_db = get_or<std::vector<double>>(spec, "relative_db", vc.relative_db, "scenario spec");
    vc.repetitions = get_or<std::size_t>(spec, "repetitions", vc.repetitions, "scenario spec");
    vc.folds = folds;
    vc.seed = seed;
    const auto points = run_voice_sweep(load("select"), read_wav(vp), rc.pipeline, rc.key, vc);
    json rows = json::array();
    std::vector<SweepRow> sweep;
    for (const auto& p : points) {
      const bool muted = !std::isfinite(p.relative_db);
      rows.push_back({{"relative_db", muted ? json("muted") : json(p.relative_db)}, {"report", scenario_json(p.report)}});
      sweep.push_back({muted ? "muted" : format_number(p.relative_db), muted ? NAN : p.relative_db, &p.report});
    }
    body = {{"points", rows}};
    table = sweep_table("relative_db", sweep);
    plot = sweep_plot("accuracy vs voice level", "voice level relative to keystrokes (dB)", sweep);
  } else {
    throw ContractError("unknown scenario '" + name +
                        "' (expected complete, small-training, user, model, classifiers, channel or voice)");
  }
  a.outputs.emit(make_report("scenario", config, seed, body), table, plot);
  std::cout << "scenario " << name << " written to " << a.outputs.out << "\n";
  return 0;
}

struct DeviceArgs {
  std::string db, victim, select, victim_select, config;
  int k = 10;
  double threshold = 0.33;
  std::string out;
};

int cmd_device_id(const DeviceArgs& a) {
  const RunConfig rc = run_config_arg(a.config);
  const auto db = featurize(load_selected(a.db, a.select), rc.pipeline);
  const auto victim = featurize(load_selected(a.victim, a.victim_select), rc.pipeline);
  const auto d = classify_device(train_device_db(db, a.k), victim.vectors, a.threshold);
  const json config = {{"db", a.db},       {"victim", a.victim},       {"select", to_json(selector_arg(a.select))},
                       {"k", a.k},         {"known_threshold", a.threshold},
                       {"victim_select", to_json(selector_arg(a.victim_select))},
                       {"pipeline", to_json(rc.pipeline)}};
  const json body = {{"model", d.model}, {"confidence", d.confidence}, {"known", d.known}, {"samples", d.samples}};
  if (!a.out.empty()) write_json(a.out, make_report("device-id", config, std::nullopt, body));
  std::cout << d.model << " confidence " << format_number(d.confidence) << (d.known ? " known" : " unknown") << "\n";
  return 0;
}

struct ChannelArgs {
  std::string input, output, report;
  double kbps = 70.0;
  double loss = NAN, cutoff = NAN;
  bool identity = false;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

int cmd_channel(const ChannelArgs& a) {
  const auto seed = resolve_seed(seed_flag(a.seed_opt, a.seed), 0);
  ChannelConfig cfg = a.identity ? ChannelConfig::identity() : ChannelConfig::for_bitrate(a.kbps, seed);
  cfg.seed = seed;
  if (std::isfinite(a.loss)) cfg.loss_rate = a.loss;
  if (std::isfinite(a.cutoff)) cfg.cutoff_hz = a.cutoff;
  cfg.validate();
  save_wav(a.output, simulate_channel(read_wav(a.input), cfg));
  if (!a.report.empty()) {
    write_json(a.report, make_report("channel", {{"input", a.input}, {"channel", to_json(cfg)}}, seed,
                                     {{"output", a.output}}));
  }
  return 0;
}

struct MixArgs {
  std::string input, output, voice, report;
  double rel_db = 0.0;
  bool muted = false;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

int cmd_mixvoice(const MixArgs& a) {
  const auto seed = resolve_seed(seed_flag(a.seed_opt, a.seed), 0);
  const MixConfig cfg{a.muted ? kMutedDb : a.rel_db};
  bool wrapped = false;
  save_wav(a.output, mix_voice(read_wav(a.input), read_wav(a.voice), cfg, seed, &wrapped));
  if (wrapped) std::cerr << "keytap: warning: voice shorter than the recording; wrapped around\n";
  if (!a.report.empty()) {
    const json config = {{"input", a.input}, {"voice", a.voice},
                         {"relative_db", a.muted ? json("muted") : json(a.rel_db)}};
    write_json(a.report, make_report("mixvoice", config, seed, {{"output", a.output}, {"wrapped", wrapped}}));
  }
  return 0;
}

struct DefendArgs {
  std::string input, output, seed_mode = "per-keystroke", eq, report;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

int cmd_defend(const DefendArgs& a) {
  EqConfig eq = a.eq.empty() ? EqConfig{} : eq_config_from_json(json_arg(a.eq));
  eq.seed = resolve_seed(seed_flag(a.seed_opt, a.seed), eq.seed);
  const auto mode = eq_seed_mode_from_string(a.seed_mode);
  const SegmenterConfig seg;
  save_wav(a.output, defend_recording(read_wav(a.input), eq, seg, mode));
  if (!a.report.empty()) {
    const json config = {{"input", a.input}, {"eq", to_json(eq)}, {"seed_mode", to_string(mode)},
                         {"segmenter", to_json(seg)}};
    write_json(a.report, make_report("defend", config, eq.seed, {{"output", a.output}}));
  }
  return 0;
}

struct CounterArgs {
  std::string manifest, select, config, eq, seed_mode = "per-keystroke";
  std::vector<std::string> kinds{"mfcc", "fft"};
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  Outputs outputs;
};

int cmd_eval_countermeasure(const CounterArgs& a) {
  const RunConfig rc = run_config_arg(a.config);
  CountermeasureConfig cc;
  cc.kinds.clear();
  for (const auto& k : a.kinds) cc.kinds.push_back(feature_kind_from_string(k));
  if (!a.eq.empty()) cc.eq = eq_config_from_json(json_arg(a.eq));
  cc.seed_mode = eq_seed_mode_from_string(a.seed_mode);
  cc.folds = a.folds;
  cc.seed = resolve_seed(seed_flag(a.seed_opt, a.seed), 0);
  cc.eq.seed = cc.seed;
  const auto results = evaluate_countermeasure(load_selected(a.manifest, a.select), rc.pipeline, rc.key, cc);

  json rows = json::array();
  Table t{{"kind", "clean_top1", "equalized_top1", "clean_top5", "equalized_top5", "baseline_top1"}, {}};
  std::vector<std::pair<std::string, const ScenarioReport*>> curves;
  for (const auto& r : results) {
    const double drop = r.clean.top(1) > 0 ? 1.0 - r.equalized.top(1) / r.clean.top(1) : 0.0;
    rows.push_back({{"kind", to_string(r.kind)},
                    {"clean", scenario_json(r.clean)},
                    {"equalized", scenario_json(r.equalized)},
                    {"top1_relative_drop", drop}});
    t.add_row({to_string(r.kind), format_number(r.clean.top(1)), format_number(r.equalized.top(1)),
               format_number(r.clean.top(5)), format_number(r.equalized.top(5)), format_number(r.clean.baseline[0])});
    curves.emplace_back(to_string(r.kind) + " clean", &r.clean);
    curves.emplace_back(to_string(r.kind) + " equalized", &r.equalized);
  }
  std::vector<std::string> kind_names;
  for (auto k : cc.kinds) kind_names.push_back(to_string(k));
  const json config = {{"manifest", a.manifest}, {"select", to_json(selector_arg(a.select))},
                       {"pipeline", to_json(rc.pipeline)}, {"key_model", to_json(rc.key)},
                       {"eq", to_json(cc.eq)}, {"seed_mode", to_string(cc.seed_mode)},
                       {"kinds", kind_names}, {"folds", cc.folds},
                       {"distributions", "centers uniform in Hz, gains uniform in dB"}};
  a.outputs.emit(make_report("eval-countermeasure", config, cc.seed, {{"results", rows}}), t,
                 curve_plot("randomized EQ countermeasure", curves));
  for (const auto& r : results) {
    std::cout << to_string(r.kind) << " top-1 clean " << format_number(r.clean.top(1)) << " equalized "
              << format_number(r.equalized.top(1)) << "\n";
  }
  return 0;
}

struct WordsArgs {
  std::string model, bank, select, dict, segmenter, out;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

int cmd_words(const WordsArgs& a) {
  const ModelFile mf = load_model(a.model);
  fs::path bank = a.bank;
  if (fs::is_directory(bank)) bank /= "manifest.jsonl";
  const auto recs = load_selected(bank.string(), a.select);
  WordRecoveryConfig wc;
  if (!a.segmenter.empty()) wc.segmenter = segmenter_config_from_json(json_arg(a.segmenter));
  wc.features = mf.features;
  wc.trials = a.trials;
  wc.seed = resolve_seed(seed_flag(a.seed_opt, a.seed), 0);
  const auto result = recover_words(mf.classifier, make_letter_bank(recs), read_dictionary(a.dict), wc);
  for (const auto& w : result.warnings) std::cerr << "keytap: warning: " << w << "\n";
  const json config = {{"model", a.model}, {"bank", bank.string()}, {"select", to_json(selector_arg(a.select))},
                       {"dictionary", a.dict}, {"trials", a.trials}, {"segmenter", to_json(wc.segmenter)}};
  json body = to_json(result);
  body["reference_targets"] = reference_targets("words");
  if (!a.out.empty()) write_json(a.out, make_report("words", config, wc.seed, body));
  std::cout << result.trials.size() << " words, char error " << format_number(result.mean_char_error)
            << ", after spell check " << format_number(result.mean_corrected_error) << "\n";
  return 0;
}

struct CrackArgs {
  unsigned alphabet = 26, length = 10, guesses = 5;
  double acc = 1.0, target = 0.5;
  std::vector<double> per_position;
  std::string out;
};

int cmd_crack(const CrackArgs& a) {
  CrackPlan plan{a.alphabet, a.length, a.guesses, a.acc, a.per_position};
  const CrackPlan brute{a.alphabet, a.length, a.alphabet, 1.0, {}};
  const auto report = speedup_report(plan, brute, a.target);
  const auto& e = report.plan;
  const auto half_space = check_printed_figure("26^10/2", Rational(pow(BigInt(26), 10)) / 2, 8.39e13, 3);

  std::cout << "phase0_candidates " << e.phase0.str() << "\n";
  std::cout << "expected_guesses " << to_decimal(e.guesses) << "\n";
  std::cout << "final_phase " << e.final_phase << "\n";
  std::cout << "brute_force_guesses " << to_decimal(report.baseline.guesses) << "\n";
  std::cout << "speedup " << format_number(report.speedup) << "\n";
  std::cout << "phase0_speedup " << format_number(report.phase0_speedup) << "\n";
  std::cout << "entropy_reduction " << format_number(report.entropy_reduction) << "\n";
  if (!half_space.consistent) {
    std::cout << "note: printed 26^10/2 = 8.39e13 disagrees with the exact " << to_decimal(half_space.exact) << "\n";
  }
  if (!a.out.empty()) {
    json config = {{"alphabet", a.alphabet}, {"length", a.length}, {"guesses", a.guesses},
                   {"accuracy", a.acc},      {"target", a.target}};
    if (!a.per_position.empty()) config["per_position"] = a.per_position;
    json body = to_json(report);
    body["figure_checks"] = json::array({to_json(half_space)});
    body["reference_targets"] = reference_targets("crack-estimate");
    write_json(a.out, make_report("crack-estimate", config, std::nullopt, body));
  }
  return 0;
}

struct SweepArgs {
  std::string manifest, select, config;
  std::vector<double> lengths_ms;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  Outputs outputs;
};

int cmd_sweep_length(const SweepArgs& a) {
  const RunConfig rc = run_config_arg(a.config);
  std::vector<double> lengths;
  for (double ms : a.lengths_ms) lengths.push_back(ms / 1000.0);
  if (lengths.empty()) lengths = default_sweep_lengths();
  const auto seed = resolve_seed(seed_flag(a.seed_opt, a.seed), 0);
  const auto points = sweep_segment_length(load_selected(a.manifest, a.select), rc.pipeline, rc.key, lengths, a.folds, seed);
  json rows = json::array();
  std::vector<SweepRow> sweep;
  for (const auto& p : points) {
    rows.push_back({{"length_s", p.length_s}, {"report", scenario_json(p.report)}});
    sweep.push_back({format_number(p.length_s * 1000.0) + " ms", p.length_s * 1000.0, &p.report});
  }
  json config = run_config_json(rc);
  config["manifest"] = a.manifest;
  config["select"] = to_json(selector_arg(a.select));
  config["lengths_s"] = lengths;
  config["folds"] = a.folds;
  a.outputs.emit(make_report("sweep-length", config, seed, {{"points", rows}}), sweep_table("length_ms", sweep),
                 sweep_plot("accuracy vs segment length", "segment length (ms)", sweep));
  for (const auto& p : points) {
    std::cout << format_number(p.length_s * 1000.0) << " ms top-5 " << format_number(p.report.top(5)) << "\n";
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"keytap: keystroke acoustic eavesdropping pipeline and countermeasure"};
  app.require_subcommand(1);
  app.footer("Env: KEYTAP_SEED overrides config seeds (an explicit --seed wins).\n"
             "Exit codes: 0 success, 1 contract or usage error, 2 I/O or parse error.");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic keystroke corpus");
  c_synth->add_option("--spec", synth.spec, "Corpus spec JSON (file or inline); defaults when omitted");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  synth.seed_opt = c_synth->add_option("--seed", synth.seed, "Corpus seed");
  c_synth->add_option("--voice-seconds", synth.voice_seconds, "Also write a synthetic speech track (voice.wav)");

  SegmentArgs segment;
  auto* c_segment = app.add_subcommand("segment", "Detect keystrokes in a recording and write one WAV per segment");
  c_segment->add_option("input", segment.input, "Input WAV")->required();
  c_segment->add_option("--threshold", segment.threshold, "Energy threshold");
  c_segment->add_option("--expected", segment.expected, "Calibrate the threshold to this many keystrokes");
  c_segment->add_option("--length-ms", segment.length_ms, "Segment length in ms")->capture_default_str();
  c_segment->add_option("--window-ms", segment.window_ms, "Energy window in ms")->capture_default_str();
  c_segment->add_option("--refractory-ms", segment.refractory_ms, "Minimum gap between onsets in ms")->capture_default_str();
  c_segment->add_option("--out-dir", segment.out_dir, "Output directory")->required();
  c_segment->add_flag("--remove-dc", segment.remove_dc, "Subtract the recording mean before detection");

  FeaturesArgs features;
  auto* c_features = app.add_subcommand("features", "Extract feature vectors to CSV");
  c_features->add_option("input", features.input,
                         "Segments directory (WAVs), corpus directory or manifest (.jsonl)")->required();
  c_features->add_option("--kind", features.kind, "mfcc, fft or cepstral");
  c_features->add_option("--config", features.config, "Config JSON with pipeline and key_model sections");
  c_features->add_option("--select", features.select, "Manifest selector JSON");
  c_features->add_option("--out", features.out, "Output CSV")->required();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a key classifier from a manifest");
  c_train->add_option("--manifest", train.manifest, "Manifest (.jsonl)")->required();
  c_train->add_option("--select", train.select, "Selector JSON");
  c_train->add_option("--config", train.config, "Config JSON with pipeline and key_model sections");
  c_train->add_option("--kind", train.kind, "lr, svm, lda, rf or knn");
  c_train->add_flag("--no-rfe", train.no_rfe, "Skip feature selection");
  c_train->add_option("--out", train.out, "Model JSON")->required();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a model on a manifest");
  c_eval->add_option("--model", eval.model, "Model JSON")->required();
  c_eval->add_option("--manifest", eval.manifest, "Manifest (.jsonl)")->required();
  c_eval->add_option("--select", eval.select, "Selector JSON");
  c_eval->add_option("--segmenter", eval.segmenter, "Segmenter config JSON");
  c_eval->add_option("--top-n", eval.top_n, "Print top-n accuracy for this n");
  eval.outputs.add_to(c_eval, false);

  ScenarioArgs scenario;
  auto* c_scenario = app.add_subcommand("scenario", "Run a profiling scenario or sweep from a spec");
  c_scenario->add_option("--spec", scenario.spec, "Scenario spec JSON")->required();
  c_scenario->add_option("--manifest", scenario.manifest, "Manifest (.jsonl)")->required();
  scenario.seed_opt = c_scenario->add_option("--seed", scenario.seed, "Seed");
  scenario.outputs.add_to(c_scenario);

  DeviceArgs device;
  auto* c_device = app.add_subcommand("device-id", "Identify the keyboard model of victim recordings");
  c_device->add_option("--db", device.db, "Database manifest")->required();
  c_device->add_option("--victim", device.victim, "Victim manifest")->required();
  c_device->add_option("--select", device.select, "Database selector JSON");
  c_device->add_option("--victim-select", device.victim_select, "Victim selector JSON");
  c_device->add_option("--config", device.config, "Config JSON");
  c_device->add_option("--k", device.k, "Neighbours")->capture_default_str();
  c_device->add_option("--threshold", device.threshold, "Known-model confidence threshold")->capture_default_str();
  c_device->add_option("--out", device.out, "JSON report");

  ChannelArgs channel;
  auto* c_channel = app.add_subcommand("channel", "Pass a recording through the VoIP channel proxy");
  c_channel->add_option("input", channel.input, "Input WAV")->required();
  c_channel->add_option("output", channel.output, "Output WAV")->required();
  c_channel->add_option("--kbps", channel.kbps, "Target bitrate")->capture_default_str();
  c_channel->add_option("--loss", channel.loss, "Packet loss rate override");
  c_channel->add_option("--cutoff", channel.cutoff, "Low-pass cutoff override (Hz)");
  c_channel->add_flag("--identity", channel.identity, "No filtering and no loss");
  channel.seed_opt = c_channel->add_option("--seed", channel.seed, "Packet loss seed");
  c_channel->add_option("--report", channel.report, "JSON report");

  MixArgs mix;
  auto* c_mix = app.add_subcommand("mixvoice", "Overlay voice at a level relative to the keystrokes");
  c_mix->add_option("input", mix.input, "Keystroke WAV")->required();
  c_mix->add_option("output", mix.output, "Output WAV")->required();
  c_mix->add_option("--voice", mix.voice, "Voice WAV without pauses")->required();
  c_mix->add_option("--rel-db", mix.rel_db, "Voice level minus keystroke level (dB)")->capture_default_str();
  c_mix->add_flag("--muted", mix.muted, "Mute the voice");
  mix.seed_opt = c_mix->add_option("--seed", mix.seed, "Offset seed");
  c_mix->add_option("--report", mix.report, "JSON report");

  DefendArgs defend;
  auto* c_defend = app.add_subcommand("defend", "Apply the randomized EQ countermeasure");
  c_defend->add_option("input", defend.input, "Input WAV")->required();
  c_defend->add_option("output", defend.output, "Output WAV")->required();
  c_defend->add_option("--seed-mode", defend.seed_mode, "per-keystroke or per-recording")->capture_default_str();
  c_defend->add_option("--eq", defend.eq, "EQ config JSON");
  defend.seed_opt = c_defend->add_option("--seed", defend.seed, "EQ seed");
  c_defend->add_option("--report", defend.report, "JSON report");

  CounterArgs counter;
  auto* c_counter = app.add_subcommand("eval-countermeasure", "Clean versus equalized accuracy per feature kind");
  c_counter->add_option("--manifest", counter.manifest, "Manifest (.jsonl)")->required();
  c_counter->add_option("--select", counter.select, "Selector JSON");
  c_counter->add_option("--config", counter.config, "Config JSON");
  c_counter->add_option("--eq", counter.eq, "EQ config JSON");
  c_counter->add_option("--seed-mode", counter.seed_mode, "per-keystroke or per-recording")->capture_default_str();
  c_counter->add_option("--kinds", counter.kinds, "Feature kinds")->delimiter(',')->capture_default_str();
  c_counter->add_option("--folds", counter.folds, "Folds")->capture_default_str();
  counter.seed_opt = c_counter->add_option("--seed", counter.seed, "Seed");
  counter.outputs.add_to(c_counter);

  WordsArgs words;
  auto* c_words = app.add_subcommand("words", "Recover dictionary words from letter recordings");
  c_words->add_option("--model", words.model, "Model JSON")->required();
  c_words->add_option("--bank", words.bank, "Letter bank directory or manifest")->required();
  c_words->add_option("--select", words.select, "Bank selector JSON");
  c_words->add_option("--dict", words.dict, "Word list, one lowercase word per line")->required();
  c_words->add_option("--segmenter", words.segmenter, "Segmenter config JSON");
  c_words->add_option("--trials", words.trials, "Trials")->capture_default_str();
  words.seed_opt = c_words->add_option("--seed", words.seed, "Seed");
  c_words->add_option("--out", words.out, "JSON report");

  CrackArgs crack;
  auto* c_crack = app.add_subcommand("crack-estimate", "Expected brute-force guesses with top-x candidates");
  c_crack->add_option("--alphabet", crack.alphabet, "Alphabet size L")->capture_default_str();
  c_crack->add_option("--length", crack.length, "Password length n")->capture_default_str();
  c_crack->add_option("--guesses", crack.guesses, "Candidates per character x")->capture_default_str();
  c_crack->add_option("--acc", crack.acc, "Per-character top-x accuracy p")->capture_default_str();
  c_crack->add_option("--target", crack.target, "Success probability")->capture_default_str();
  c_crack->add_option("--per-position", crack.per_position, "Accuracy per position")->delimiter(',');
  c_crack->add_option("--out", crack.out, "JSON report");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep-length", "Complete profiling accuracy versus segment length");
  c_sweep->add_option("--manifest", sweep.manifest, "Manifest (.jsonl)")->required();
  c_sweep->add_option("--select", sweep.select, "Selector JSON");
  c_sweep->add_option("--config", sweep.config, "Config JSON");
  c_sweep->add_option("--lengths-ms", sweep.lengths_ms, "Lengths in ms (default 3,10,20,...,100)")->delimiter(',');
  c_sweep->add_option("--folds", sweep.folds, "Folds")->capture_default_str();
  sweep.seed_opt = c_sweep->add_option("--seed", sweep.seed, "Seed");
  sweep.outputs.add_to(c_sweep);

  if (argc > 1 && argv[1][0] != '-') {
    const std::string word = argv[1];
    const auto subs = app.get_subcommands([&](CLI::App* c) { return c->get_name() == word; });
    if (subs.empty()) {
      std::cerr << "keytap: unknown subcommand '" << word << "'\n\n" << app.help();
      return 1;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "keytap: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  if (c_synth->parsed()) return cmd_synth(synth);
  if (c_segment->parsed()) return cmd_segment(segment);
  if (c_features->parsed()) return cmd_features(features);
  if (c_train->parsed()) return cmd_train(train);
  if (c_eval->parsed()) return cmd_eval(eval);
  if (c_scenario->parsed()) return cmd_scenario(scenario);
  if (c_device->parsed()) return cmd_device_id(device);
  if (c_channel->parsed()) return cmd_channel(channel);
  if (c_mix->parsed()) return cmd_mixvoice(mix);
  if (c_defend->parsed()) return cmd_defend(defend);
  if (c_counter->parsed()) return cmd_eval_countermeasure(counter);
  if (c_words->parsed()) return cmd_words(words);
  if (c_crack->parsed()) return cmd_crack(crack);
  if (c_sweep->parsed()) return cmd_sweep_length(sweep);
  std::cerr << app.help();
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ContractError& e) {
    std::cerr << "keytap: error: " << e.what() << "\n";
    return 1;
  } catch (const DegenerateInputError& e) {
    std::cerr << "keytap: error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "keytap: error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "keytap: error: " << e.what() << "\n";
    return 2;
  } catch (const UnsupportedEncodingError& e) {
    std::cerr << "keytap: error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "keytap: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "keytap: error: " << e.what() << "\n";
    return 1;
  }
}
