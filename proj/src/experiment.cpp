#include "xrcast/experiment.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "xrcast/error.hpp"
#include "xrcast/parallel.hpp"
#include "xrcast/random.hpp"
#include "xrcast/report.hpp"
#include "xrcast/trace.hpp"

namespace xrcast::experiment {

namespace {

constexpr std::string_view kModule = "harness";

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, kModule, what); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    config_error("key '" + key + "': '" + v + "' is not a valid number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  config_error("key '" + key + "': '" + v + "' is not a boolean");
}

InputKind parse_input_kind(const std::string& v) {
  static const std::map<std::string, InputKind> kinds = {
      {"pcap", InputKind::pcap},
      {"packet_csv", InputKind::packet_csv},
      {"feature_csv", InputKind::feature_csv},
      {"series_csv", InputKind::series_csv},
      {"synthetic_trace", InputKind::synthetic_trace},
      {"synthetic_series", InputKind::synthetic_series}};
  auto it = kinds.find(v);
  if (it == kinds.end()) config_error("unknown input kind '" + v + "'");
  return it->second;
}

struct Key {
  std::string name;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

template <typename T, typename Target>
Key number_key(std::string name, std::string help, Target target) {
  return {std::move(name), std::move(help), [target](ExperimentConfig& c, const std::string& k, const std::string& v) {
            target(c) = parse_number<T>(k, v);
          }};
}

template <typename Target>
Key bool_key(std::string name, std::string help, Target target) {
  return {std::move(name), std::move(help),
          [target](ExperimentConfig& c, const std::string& k, const std::string& v) { target(c) = parse_bool(k, v); }};
}

const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  static const std::vector<Key> table = {
      {"input", "synthetic_series | synthetic_trace | pcap | packet_csv | feature_csv | series_csv",
       [](C& c, const std::string&, const std::string& v) { c.input = parse_input_kind(v); }},
      {"input.path", "file for pcap/csv inputs", [](C& c, const std::string&, const std::string& v) { c.input_path = v; }},
      {"input.server", "IPv4 address of the rendering server (pcap)",
       [](C& c, const std::string&, const std::string& v) { c.server_address = v; }},
      {"input.port", "optional server port filter (pcap)",
       [](C& c, const std::string& k, const std::string& v) { c.server_port = parse_number<int>(k, v); }},
      {"feature", "f_c | f_s | f_iat",
       [](C& c, const std::string&, const std::string& v) {
         try {
           c.feature = series::parse_feature(v);
         } catch (const Error&) {
           config_error("unknown feature '" + v + "'");
         }
       }},
      number_key<double>("vf.segment_duration", "seconds per VF segment",
                         [](C& c) -> double& { return c.viewframe.segment_duration; }),
      number_key<int>("vf.bins", "IAT histogram bins", [](C& c) -> int& { return c.viewframe.histogram.bins; }),
      number_key<double>("vf.valley_ratio", "peak separation ratio in (0, 1]",
                         [](C& c) -> double& { return c.viewframe.histogram.valley_ratio; }),
      number_key<double>("vf.min_peak_fraction", "smallest IAT peak as a fraction of all gaps, in [0, 1)",
                         [](C& c) -> double& { return c.viewframe.histogram.min_peak_fraction; }),
      bool_key("vf.histogram_eligible_only", "IAT histogram over packets >= len_th only",
               [](C& c) -> bool& { return c.viewframe.histogram.eligible_only; }),
      number_key<std::uint32_t>("vf.min_packets", "minimum packets per frame",
                                [](C& c) -> std::uint32_t& { return c.viewframe.frames.min_packets; }),
      bool_key("vf.split_on_small_packet", "small packets close the current frame",
               [](C& c) -> bool& { return c.viewframe.frames.split_on_small_packet; }),
      bool_key("vf.downlink", "scan downlink packets", [](C& c) -> bool& { return c.viewframe.frames.include_downlink; }),
      bool_key("vf.uplink", "scan uplink packets (AR/MR)", [](C& c) -> bool& { return c.viewframe.frames.include_uplink; }),
      number_key<double>("vf.fallback_dur_th", "dur_th when the IAT histogram has < 2 peaks",
                         [](C& c) -> double& { return c.viewframe.fallback_dur_th; }),
      number_key<std::size_t>("series.segment_size", "N, samples per segment",
                              [](C& c) -> std::size_t& { return c.segment_size; }),
      number_key<std::size_t>("series.lookback", "W, window length", [](C& c) -> std::size_t& { return c.lookback; }),
      number_key<double>("split.train_ratio", "share of each segment for train+val",
                         [](C& c) -> double& { return c.split.train_ratio; }),
      number_key<double>("split.val_ratio", "share of the train pool used for validation",
                         [](C& c) -> double& { return c.split.val_ratio_within_train; }),
      {"models", "comma list of transformer, lstm, gru, stacked_lstm",
       [](C& c, const std::string&, const std::string& v) {
         c.models.clear();
         std::stringstream ss(v);
         std::string item;
         std::set<std::string> seen;
         while (std::getline(ss, item, ',')) {
           item = trim(item);
           if (!seen.insert(item).second) config_error("model '" + item + "' listed twice");
           predictors::ModelKind kind;
           try {
             kind = predictors::parse_model_kind(item);
           } catch (const Error&) {
             config_error("unknown model '" + item + "'");
           }
           if (kind == predictors::ModelKind::fcnn) config_error("fcnn is the residual learner, not a base model");
           c.models.push_back({kind, true});
         }
         if (c.models.empty()) config_error("models must not be empty");
       }},
      {"reslearn", "train the residual stage for every model (per-model: reslearn.<kind>)",
       [](C& c, const std::string& k, const std::string& v) {
         const bool on = parse_bool(k, v);
         for (auto& m : c.models) m.reslearn = on;
       }},
      bool_key("combine.keep_bias", "keep Res_B in combined predictions",
               [](C& c) -> bool& { return c.keep_bias_in_combine; }),
      number_key<std::size_t>("eda.window", "rolling mean window", [](C& c) -> std::size_t& { return c.eda_window; }),
      number_key<std::size_t>("base.epochs", "epoch cap", [](C& c) -> std::size_t& { return c.base.epochs; }),
      number_key<std::size_t>("base.hidden_width", "recurrent hidden width D",
                              [](C& c) -> std::size_t& { return c.base.hidden_width; }),
      number_key<std::size_t>("base.d_model", "transformer width", [](C& c) -> std::size_t& { return c.base.d_model; }),
      number_key<std::size_t>("base.n_heads", "attention heads", [](C& c) -> std::size_t& { return c.base.n_heads; }),
      number_key<std::size_t>("base.n_layers", "encoder blocks", [](C& c) -> std::size_t& { return c.base.n_layers; }),
      number_key<std::size_t>("base.ffn_width", "encoder feed-forward width",
                              [](C& c) -> std::size_t& { return c.base.ffn_width; }),
      number_key<double>("base.learning_rate", "Adam step size", [](C& c) -> double& { return c.base.learning_rate; }),
      number_key<std::size_t>("base.batch_size", "mini-batch size", [](C& c) -> std::size_t& { return c.base.batch_size; }),
      number_key<std::size_t>("base.patience", "early-stopping patience (epochs)",
                              [](C& c) -> std::size_t& { return c.base.early_stop_patience; }),
      number_key<double>("base.min_delta", "early-stopping minimum improvement",
                         [](C& c) -> double& { return c.base.early_stop_min_delta; }),
      number_key<std::size_t>("residual.epochs", "epoch cap T'", [](C& c) -> std::size_t& { return c.residual.epochs; }),
      number_key<std::size_t>("residual.hidden_width", "FCNN hidden width D",
                              [](C& c) -> std::size_t& { return c.residual.hidden_width; }),
      number_key<double>("residual.learning_rate", "Adam step size",
                         [](C& c) -> double& { return c.residual.learning_rate; }),
      number_key<std::size_t>("residual.batch_size", "mini-batch size",
                              [](C& c) -> std::size_t& { return c.residual.batch_size; }),
      number_key<std::size_t>("residual.patience", "early-stopping patience (epochs)",
                              [](C& c) -> std::size_t& { return c.residual.early_stop_patience; }),
      number_key<double>("residual.min_delta", "early-stopping minimum improvement",
                         [](C& c) -> double& { return c.residual.early_stop_min_delta; }),
      number_key<std::uint64_t>("synth.trace.seed", "trace seed", [](C& c) -> std::uint64_t& { return c.trace_spec.seed; }),
      number_key<double>("synth.trace.fps", "frames per second", [](C& c) -> double& { return c.trace_spec.fps; }),
      number_key<double>("synth.trace.duration", "seconds", [](C& c) -> double& { return c.trace_spec.duration; }),
      number_key<double>("synth.trace.mean_frame_size", "bytes",
                         [](C& c) -> double& { return c.trace_spec.mean_frame_size; }),
      number_key<std::uint32_t>("synth.trace.packets_per_frame", "packets per frame",
                                [](C& c) -> std::uint32_t& { return c.trace_spec.packets_per_frame; }),
      number_key<double>("synth.trace.intra_frame_spacing", "seconds",
                         [](C& c) -> double& { return c.trace_spec.intra_frame_spacing; }),
      number_key<double>("synth.trace.background_rate", "packets per second",
                         [](C& c) -> double& { return c.trace_spec.background_rate; }),
      number_key<double>("synth.trace.frame_jitter_std", "seconds",
                         [](C& c) -> double& { return c.trace_spec.frame_jitter_std; }),
      number_key<double>("synth.trace.spacing_jitter_std", "seconds",
                         [](C& c) -> double& { return c.trace_spec.spacing_jitter_std; }),
      number_key<std::uint64_t>("synth.series.seed", "series seed", [](C& c) -> std::uint64_t& { return c.series_spec.seed; }),
      number_key<double>("synth.series.level", "base level", [](C& c) -> double& { return c.series_spec.level; }),
      number_key<double>("synth.series.amplitude", "sine amplitude",
                         [](C& c) -> double& { return c.series_spec.amplitude; }),
      number_key<double>("synth.series.period", "sine period (samples)",
                         [](C& c) -> double& { return c.series_spec.period; }),
      number_key<double>("synth.series.trend_slope", "trend per sample",
                         [](C& c) -> double& { return c.series_spec.trend_slope; }),
      number_key<double>("synth.series.noise_std", "Gaussian noise std",
                         [](C& c) -> double& { return c.series_spec.noise_std; }),
      number_key<double>("synth.series.spike_rate", "random spike probability",
                         [](C& c) -> double& { return c.series_spec.spike_rate; }),
      number_key<std::size_t>("synth.series.spike_period", "regular spike spacing (0 = random)",
                              [](C& c) -> std::size_t& { return c.series_spec.spike_period; }),
      number_key<double>("synth.series.spike_height", "spike height",
                         [](C& c) -> double& { return c.series_spec.spike_height; }),
      number_key<std::size_t>("synth.series.length", "samples", [](C& c) -> std::size_t& { return c.series_spec.length; }),
      number_key<std::uint64_t>("seed", "master seed", [](C& c) -> std::uint64_t& { return c.seed; }),
      number_key<std::size_t>("jobs", "worker threads", [](C& c) -> std::size_t& { return c.jobs; }),
      {"out", "output directory", [](C& c, const std::string&, const std::string& v) { c.out_dir = v; }},
  };
  return table;
}

std::string kind_key(predictors::ModelKind k) { return "reslearn." + std::string(predictors::to_string(k)); }

void ensure_readable(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, kModule, "cannot read input '" + path + "'");
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string eda_csv(const series::TimeSeries& s, std::size_t window, std::vector<std::string>& log) {
  std::ostringstream out;
  out << "series,window,n,n_runs,z,p_value\n";
  auto row = [&](const char* name, std::size_t w, std::span<const double> values) {
    try {
      const auto r = series::runs_test(values);
      out << name << ',' << w << ',' << values.size() << ',' << r.n_runs << ',' << report::format_number(r.z) << ','
          << report::format_number(r.p_value) << '\n';
    } catch (const Error& e) {
      out << name << ',' << w << ',' << values.size() << ",NA,NA,NA\n";
      log.push_back(std::string("eda: ") + e.what());
    }
  };
  row("raw", 1, s.values);
  if (s.values.size() >= window) {
    row("rolling_mean", window, series::rolling_mean(s.values, window));
  }
  return out.str();
}

predictors::PredictorConfig base_config_for(const ExperimentConfig& c, predictors::ModelKind kind) {
  auto b = c.base;
  b.kind = kind;
  b.lookback = c.lookback;
  b.seed = derive_seed(c.seed, 100 + static_cast<std::uint64_t>(kind));
  return b;
}

predictors::PredictorConfig residual_config_for(const ExperimentConfig& c, predictors::ModelKind kind) {
  auto r = c.residual;
  r.kind = predictors::ModelKind::fcnn;
  r.lookback = c.lookback;
  r.seed = derive_seed(c.seed, 200 + static_cast<std::uint64_t>(kind));
  return r;
}

std::string bundle_name(std::size_t segment, predictors::ModelKind kind) {
  return "seg" + std::to_string(segment) + "_" + std::string(predictors::to_string(kind)) + ".model";
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  residual.kind = predictors::ModelKind::fcnn;
  out_dir = default_out_dir();
}

std::string default_out_dir() {
  if (const char* env = std::getenv("XRCAST_OUT_DIR"); env && *env) return env;
  return "xrcast-out";
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  std::map<std::string, std::string> pending_reslearn;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  // `models` must apply before any reslearn switch, so those are deferred.
  std::optional<std::string> reslearn_all;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) config_error("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!seen.insert(key).second) config_error("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    if (key == "reslearn") {
      parse_bool(key, value);
      reslearn_all = value;
      continue;
    }
    if (key.rfind("reslearn.", 0) == 0) {
      parse_bool(key, value);
      pending_reslearn[key] = value;
      continue;
    }
    const auto& table = keys();
    auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
    if (it == table.end()) config_error("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->set(c, key, value);
  }
  if (reslearn_all) {
    for (auto& m : c.models) m.reslearn = parse_bool("reslearn", *reslearn_all);
  }
  for (const auto& [key, value] : pending_reslearn) {
    auto it = std::find_if(c.models.begin(), c.models.end(), [&](const ModelEntry& m) { return kind_key(m.kind) == key; });
    if (it == c.models.end()) config_error("'" + key + "' does not name a configured model");
    it->reslearn = parse_bool(key, value);
  }
  if (!c.input_path.empty() && !base_dir.empty() && std::filesystem::path(c.input_path).is_relative()) {
    c.input_path = (base_dir / c.input_path).string();
  }

  const bool needs_path = c.input == InputKind::pcap || c.input == InputKind::packet_csv ||
                          c.input == InputKind::feature_csv || c.input == InputKind::series_csv;
  if (needs_path && c.input_path.empty()) config_error("input.path is required for this input kind");
  if (!needs_path && !c.input_path.empty()) config_error("input.path given for a synthetic input");
  if (c.lookback < 1) config_error("series.lookback must be >= 1");
  if (c.segment_size < 8) config_error("series.segment_size must be >= 8");
  if (c.jobs < 1) config_error("jobs must be >= 1");
  const auto& h = c.viewframe.histogram;
  if (h.bins < 3) config_error("vf.bins must be >= 3");
  if (!(h.valley_ratio > 0.0 && h.valley_ratio <= 1.0)) config_error("vf.valley_ratio must lie in (0, 1]");
  if (!(h.min_peak_fraction >= 0.0 && h.min_peak_fraction < 1.0)) {
    config_error("vf.min_peak_fraction must lie in [0, 1)");
  }
  try {
    base_config_for(c, predictors::ModelKind::transformer).validate();
    residual_config_for(c, predictors::ModelKind::transformer).validate();
    if (c.input == InputKind::pcap) trace::EndpointFilter(c.server_address, c.server_port);
  } catch (const Error& e) {
    config_error(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config '" + path.string() + "'");
  return parse_config(in, path.parent_path());
}

std::string config_schema() {
  std::ostringstream out;
  for (const auto& k : keys()) out << k.name << "\t" << k.help << '\n';
  out << "reslearn.<kind>\tper-model override of reslearn\n";
  return out.str();
}

LoadedInput load_input(const ExperimentConfig& c) {
  LoadedInput loaded;
  std::vector<trace::PacketRecord> packets;
  bool have_packets = false;
  switch (c.input) {
    case InputKind::pcap: {
      ensure_readable(c.input_path);
      auto r = trace::read_pcap_file(c.input_path, trace::EndpointFilter(c.server_address, c.server_port));
      loaded.log.push_back("ingest: " + std::to_string(r.packets.size()) + " packets, " + std::to_string(r.skipped) +
                           " skipped" + (r.truncated ? ", truncated capture" : ""));
      packets = std::move(r.packets);
      have_packets = true;
      break;
    }
    case InputKind::packet_csv: {
      ensure_readable(c.input_path);
      std::ifstream in(c.input_path);
      packets = trace::parse_csv(in);
      loaded.log.push_back("ingest: " + std::to_string(packets.size()) + " packets from csv");
      have_packets = true;
      break;
    }
    case InputKind::synthetic_trace: {
      auto spec = c.trace_spec;
      packets = synthetic::gen_trace(spec).packets;
      loaded.log.push_back("ingest: " + std::to_string(packets.size()) + " synthetic packets");
      have_packets = true;
      break;
    }
    case InputKind::feature_csv: {
      ensure_readable(c.input_path);
      std::ifstream in(c.input_path);
      const auto features = viewframe::read_features_csv(in);
      loaded.series = series::feature_series(features, c.feature);
      break;
    }
    case InputKind::series_csv: {
      ensure_readable(c.input_path);
      std::ifstream in(c.input_path);
      std::string line;
      std::getline(in, line);
      if (trim(line) != "value") throw Error(ErrorCode::SchemaMismatch, kModule, "series csv needs header 'value'");
      loaded.series.feature = c.feature;
      std::size_t line_no = 1;
      while (std::getline(in, line)) {
        ++line_no;
        const std::string v = trim(line);
        if (v.empty()) continue;
        double x = 0;
        auto r = std::from_chars(v.data(), v.data() + v.size(), x);
        if (r.ec != std::errc{} || r.ptr != v.data() + v.size() || !std::isfinite(x)) {
          throw Error(ErrorCode::RowParseError, kModule, "line " + std::to_string(line_no) + ": '" + v + "'");
        }
        loaded.series.values.push_back(x);
      }
      break;
    }
    case InputKind::synthetic_series: {
      auto spec = c.series_spec;
      loaded.series = synthetic::gen_series(spec, c.feature).series;
      break;
    }
  }
  if (have_packets) {
    auto vf = viewframe::extract_features(packets, c.viewframe);
    loaded.log.push_back("viewframe: len_th " + report::format_number(vf.report.thresholds.len_th) + ", dur_th " +
                         report::format_number(vf.report.thresholds.dur_th) +
                         (vf.report.dur_th_fallback ? " (fallback)" : "") + ", " + std::to_string(vf.frames.size()) +
                         " frames");
    loaded.series = series::feature_series(vf.features, c.feature);
    loaded.viewframe = std::move(vf);
  }
  loaded.log.push_back("series: " + std::to_string(loaded.series.values.size()) + " values of " +
                       series::to_string(loaded.series.feature));
  return loaded;
}

RunResult run_experiment(const ExperimentConfig& c, const RunOptions& options) {
  RunResult result;
  std::vector<std::string> log;
  const std::filesystem::path out(c.out_dir);
  auto finish = [&](int code, const std::string& message) {
    result.exit_code = code;
    result.message = message;
    if (!message.empty()) log.push_back(message);
    log.push_back("exit " + std::to_string(code));
    try {
      std::filesystem::create_directories(out);
      report::write_file(out / "run.log", join_lines(log));
      result.files.push_back(out / "run.log");
    } catch (const std::exception&) {
      // Nothing more can be reported when the log itself is unwritable.
    }
    return result;
  };

  LoadedInput input;
  series::SegmentedSeries segments;
  try {
    input = load_input(c);
    log.insert(log.end(), input.log.begin(), input.log.end());
    segments = series::segment(input.series, c.segment_size);
    log.push_back("segments: " + std::to_string(segments.count()) + " of " + std::to_string(c.segment_size) + ", " +
                  std::to_string(segments.dropped) + " trailing values dropped");
  } catch (const Error& e) {
    return finish(kDataError, e.what());
  }

  try {
    std::filesystem::create_directories(out);
    if (input.viewframe) {
      std::ostringstream features;
      viewframe::write_features_csv(features, input.viewframe->features);
      report::write_file(out / "features.csv", features.str());
      report::write_file(out / "thresholds.json", viewframe::threshold_report_json(input.viewframe->report));
      result.files.push_back(out / "features.csv");
      result.files.push_back(out / "thresholds.json");
    }
    report::write_file(out / "eda.csv", eda_csv(input.series, c.eda_window, log));
    result.files.push_back(out / "eda.csv");
  } catch (const Error& e) {
    return finish(kDataError, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return finish(kDataError, std::string("harness: IoError: ") + e.what());
  }

  // One job per (model, segment); every job derives its own seeds, so the
  // schedule does not influence results.
  const std::size_t n_seg = segments.count();
  const std::size_t n_jobs = c.models.size() * n_seg;
  std::vector<reslearn::SegmentOutcome> outcomes(n_jobs);
  parallel_for(n_jobs, c.jobs, [&](std::size_t j) {
    const auto& entry = c.models[j / n_seg];
    const std::size_t seg = j % n_seg;
    reslearn::ResLearnOptions opt;
    opt.split = c.split;
    opt.train_residual = entry.reslearn;
    opt.keep_bias_in_combine = c.keep_bias_in_combine;
    outcomes[j] = reslearn::train_segment(segments.segments[seg].values, seg, base_config_for(c, entry.kind),
                                          residual_config_for(c, entry.kind), opt);
  });

  bool any_failed = false;
  for (auto& o : outcomes) {
    const auto& r = o.report;
    std::string line = "segment " + std::to_string(r.segment_index) + " " + std::string(predictors::to_string(r.base_kind));
    if (!r.ok) {
      any_failed = true;
      line += ": FAILED " + r.error;
    } else {
      line += ": base epochs " + std::to_string(r.base_epochs);
      if (r.has_reslearn) line += ", residual epochs " + std::to_string(r.residual_epochs);
    }
    log.push_back(line);
    result.reports.push_back(r);
  }

  try {
    for (auto fmt : {report::ReportFormat::csv, report::ReportFormat::json, report::ReportFormat::plotdata}) {
      auto files = report::emit_report(result.reports, fmt, out);
      result.files.insert(result.files.end(), files.begin(), files.end());
    }
    const auto table = report::comparison_table(result.reports);
    report::write_file(out / "comparison.csv", report::render_comparison_csv(table));
    result.files.push_back(out / "comparison.csv");

    if (options.save_models) {
      const auto models_dir = out / "models";
      std::filesystem::create_directories(models_dir);
      for (const auto& o : outcomes) {
        if (!o.model) continue;
        std::ostringstream bundle;
        reslearn::save_bundle(bundle, *o.model);
        const auto path = models_dir / bundle_name(o.report.segment_index, o.report.base_kind);
        report::write_file(path, bundle.str());
        result.files.push_back(path);
      }
    }
  } catch (const Error& e) {
    return finish(kDataError, e.what());
  }
  return finish(any_failed ? kTrainingFailure : kOk, any_failed ? "one or more segments failed" : "");
}

RunResult evaluate_models(const ExperimentConfig& c, const std::filesystem::path& models_dir) {
  RunResult result;
  const std::filesystem::path out(c.out_dir);
  try {
    const auto input = load_input(c);
    const auto segments = series::segment(input.series, c.segment_size);
    std::ostringstream csv;
    csv << "segment,model,variant,rmse,mape,smape\n";
    std::size_t loaded = 0;
    for (const auto& entry : c.models) {
      for (std::size_t i = 0; i < segments.count(); ++i) {
        const auto path = models_dir / bundle_name(i, entry.kind);
        std::ifstream in(path);
        if (!in) continue;
        const auto model = reslearn::load_bundle(in);
        ++loaded;
        const auto& values = segments.segments[i].values;
        const auto parts = series::split(values, c.split, c.lookback);
        const std::size_t pool = parts.train.size() + parts.val.size();
        const auto test = series::make_windows_from(values, c.lookback, pool);
        const auto base = metrics::evaluate(test.targets, model.predict_base(test.inputs));
        const auto combined = metrics::evaluate(test.targets, model.predict_combined(test.inputs));
        for (auto [variant, m] : {std::pair{"base", &base}, std::pair{"reslearn", &combined}}) {
          csv << i << ',' << predictors::to_string(entry.kind) << ',' << variant << ','
              << report::format_number(m->rmse) << ',' << report::format_number(m->mape) << ','
              << report::format_number(m->smape * 100.0) << '\n';
        }
      }
    }
    if (loaded == 0) throw Error(ErrorCode::IoError, kModule, "no model bundles in '" + models_dir.string() + "'");
    std::filesystem::create_directories(out);
    report::write_file(out / "evaluate.csv", csv.str());
    result.files.push_back(out / "evaluate.csv");
  } catch (const Error& e) {
    result.exit_code = e.code() == ErrorCode::ConfigError ? kConfigError : kDataError;
    result.message = e.what();
  }
  return result;
}

}  // namespace xrcast::experiment
