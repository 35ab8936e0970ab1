// xrcast command-line front end.
#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "xrcast/error.hpp"
#include "xrcast/experiment.hpp"
#include "xrcast/report.hpp"
#include "xrcast/series.hpp"
#include "xrcast/synthetic.hpp"
#include "xrcast/trace.hpp"
#include "xrcast/viewframe.hpp"

namespace {

using namespace xrcast;
namespace ex = xrcast::experiment;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::BadArgument:
    case ErrorCode::BadConfig:
    case ErrorCode::BadFilter:
    case ErrorCode::BadSpec:
      return ex::kConfigError;
    default:
      return ex::kDataError;
  }
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    report::write_file(path, content);
  }
}

std::vector<trace::PacketRecord> read_packets(const std::string& pcap, const std::string& csv,
                                              const std::string& server, std::optional<int> port) {
  if (!pcap.empty()) {
    auto r = trace::read_pcap_file(pcap, trace::EndpointFilter(server, port));
    std::cerr << "ingest: " << r.packets.size() << " packets, " << r.skipped << " skipped"
              << (r.truncated ? ", truncated capture" : "") << '\n';
    if (r.warnings) std::cerr << "warning: " << r.warnings << " malformed records\n";
    return std::move(r.packets);
  }
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::IoError, "cli", "cannot read '" + csv + "'");
  return trace::parse_csv(in);
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
};

void add_run_args(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--config", a.config, "experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "override the config seed");
  cmd->add_option("--jobs", a.jobs, "worker threads");
  cmd->add_option("--out", a.out, "output directory");
}

ex::ExperimentConfig resolve(const RunArgs& a) {
  auto c = ex::load_config(a.config);
  if (a.seed) c.seed = *a.seed;
  if (a.jobs) {
    if (*a.jobs < 1) throw Error(ErrorCode::ConfigError, "cli", "--jobs must be >= 1");
    c.jobs = *a.jobs;
  }
  if (!a.out.empty()) c.out_dir = a.out;
  return c;
}

int report_run(const ex::RunResult& r) {
  if (!r.message.empty()) std::cerr << r.message << '\n';
  for (const auto& f : r.files) std::cout << f.string() << '\n';
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xrcast: XR traffic forecasting with residual learning"};
  app.require_subcommand(1);
  bool help_config = false;
  app.add_flag("--help-config", help_config, "list experiment config keys and exit");

  // ingest
  std::string in_pcap, in_csv, server = "10.0.0.1", out_path;
  std::optional<int> port;
  auto* ingest = app.add_subcommand("ingest", "pcap or packet csv -> normalized packet csv");
  auto* src = ingest->add_option_group("source");
  src->add_option("--pcap", in_pcap, "classic pcap capture");
  src->add_option("--csv", in_csv, "packet csv (ts,length,direction)");
  src->require_option(1);
  ingest->add_option("--server", server, "server IPv4 address");
  ingest->add_option("--port", port, "server UDP/TCP port");
  ingest->add_option("--out", out_path, "output file (default stdout)");

  // frames
  std::string fr_csv, fr_pcap, fr_thresholds;
  viewframe::ViewFrameConfig vf;
  auto* frames = app.add_subcommand("frames", "ViewFrame features per segment");
  auto* fsrc = frames->add_option_group("source");
  fsrc->add_option("--pcap", fr_pcap, "classic pcap capture");
  fsrc->add_option("--csv", fr_csv, "packet csv");
  fsrc->require_option(1);
  frames->add_option("--server", server, "server IPv4 address");
  frames->add_option("--port", port, "server port");
  frames->add_option("--segment-duration", vf.segment_duration, "seconds per segment");
  frames->add_option("--bins", vf.histogram.bins, "IAT histogram bins");
  frames->add_option("--valley-ratio", vf.histogram.valley_ratio, "peak separation ratio");
  frames->add_option("--min-peak-fraction", vf.histogram.min_peak_fraction, "smallest peak as a fraction of gaps");
  frames->add_option("--min-packets", vf.frames.min_packets, "minimum packets per frame");
  frames->add_flag("--split-on-small", vf.frames.split_on_small_packet, "small packets close a frame");
  frames->add_flag("--uplink", vf.frames.include_uplink, "also scan uplink packets");
  frames->add_option("--out", out_path, "features csv (default stdout)");
  frames->add_option("--thresholds", fr_thresholds, "thresholds json");

  // eda
  std::string eda_series, eda_features, eda_feature = "f_s";
  std::size_t eda_window = 20;
  auto* eda = app.add_subcommand("eda", "runs test on a series and its rolling mean");
  auto* esrc = eda->add_option_group("source");
  esrc->add_option("--series", eda_series, "series csv (header: value)");
  esrc->add_option("--features", eda_features, "features csv");
  esrc->require_option(1);
  eda->add_option("--feature", eda_feature, "f_c | f_s | f_iat");
  eda->add_option("--window", eda_window, "rolling mean window");

  // synth
  auto* synth = app.add_subcommand("synth", "synthetic traces and series");
  synth->require_subcommand(1);
  synthetic::TraceSpec ts;
  std::string trace_format = "pcap";
  auto* strace = synth->add_subcommand("trace", "XR-like packet trace");
  strace->add_option("--fps", ts.fps);
  strace->add_option("--duration", ts.duration);
  strace->add_option("--frame-size", ts.mean_frame_size);
  strace->add_option("--packets-per-frame", ts.packets_per_frame);
  strace->add_option("--spacing", ts.intra_frame_spacing);
  strace->add_option("--background-rate", ts.background_rate);
  strace->add_option("--frame-jitter", ts.frame_jitter_std);
  strace->add_option("--spacing-jitter", ts.spacing_jitter_std);
  strace->add_option("--seed", ts.seed);
  strace->add_option("--format", trace_format)->check(CLI::IsMember({"pcap", "csv"}));
  strace->add_option("--out", out_path)->required();
  synthetic::SeriesSpec ss;
  bool peaky = false;
  auto* sseries = synth->add_subcommand("series", "seasonal series with noise and spikes");
  sseries->add_flag("--peaky", peaky, "start from the peaky fixture");
  sseries->add_option("--level", ss.level);
  sseries->add_option("--amplitude", ss.amplitude);
  sseries->add_option("--period", ss.period);
  sseries->add_option("--trend", ss.trend_slope);
  sseries->add_option("--noise", ss.noise_std);
  sseries->add_option("--spike-rate", ss.spike_rate);
  sseries->add_option("--spike-period", ss.spike_period);
  sseries->add_option("--spike-height", ss.spike_height);
  sseries->add_option("--length", ss.length);
  sseries->add_option("--seed", ss.seed);
  sseries->add_option("--out", out_path, "output (default stdout)");

  RunArgs train_args, run_args, eval_args;
  std::string models_dir;
  auto* train = app.add_subcommand("train", "run the experiment and save model bundles");
  add_run_args(train, train_args);
  auto* evaluate = app.add_subcommand("evaluate", "score saved bundles on each segment's test part");
  add_run_args(evaluate, eval_args);
  evaluate->add_option("--models", models_dir, "directory of saved bundles")->required();
  auto* run = app.add_subcommand("run", "full pipeline from a config file");
  add_run_args(run, run_args);

  // --help-config short-circuits the subcommand requirement.
  for (int i = 1; i < argc; ++i) {
    if (std::string_view(argv[i]) == "--help-config") {
      std::cout << ex::config_schema();
      return ex::kOk;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ex::kOk : ex::kConfigError;
  }

  try {
    if (*ingest) {
      const auto packets = read_packets(in_pcap, in_csv, server, port);
      write_output(out_path, trace::emit_csv(packets));
    } else if (*frames) {
      const auto packets = read_packets(fr_pcap, fr_csv, server, port);
      const auto result = viewframe::extract_features(packets, vf);
      std::ostringstream csv;
      viewframe::write_features_csv(csv, result.features);
      write_output(out_path, csv.str());
      if (!fr_thresholds.empty()) report::write_file(fr_thresholds, viewframe::threshold_report_json(result.report));
    } else if (*eda) {
      ex::ExperimentConfig c;
      c.feature = series::parse_feature(eda_feature);
      c.input = eda_series.empty() ? ex::InputKind::feature_csv : ex::InputKind::series_csv;
      c.input_path = eda_series.empty() ? eda_features : eda_series;
      const auto loaded = ex::load_input(c);
      const auto& v = loaded.series.values;
      std::cout << "series,window,n,n_runs,z,p_value\n";
      auto row = [&](const char* name, std::size_t w, std::span<const double> values) {
        const auto r = series::runs_test(values);
        std::cout << name << ',' << w << ',' << values.size() << ',' << r.n_runs << ','
                  << report::format_number(r.z) << ',' << report::format_number(r.p_value) << '\n';
      };
      row("raw", 1, v);
      row("rolling_mean", eda_window, series::rolling_mean(v, eda_window));
    } else if (*synth) {
      if (*strace) {
        const auto g = synthetic::gen_trace(ts);
        if (trace_format == "csv") {
          report::write_file(out_path, trace::emit_csv(g.packets));
        } else {
          const auto bytes = trace::write_pcap(g.packets);
          std::ofstream out(out_path, std::ios::binary);
          out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
          if (!out) throw Error(ErrorCode::IoError, "cli", "cannot write '" + out_path + "'");
        }
      } else {
        auto spec = ss;
        if (peaky) {
          spec = synthetic::peaky_fixture(ss.seed);
        }
        const auto g = synthetic::gen_series(spec);
        std::ostringstream csv;
        csv << "value\n";
        for (double x : g.series.values) {
          char buf[32];
          auto r = std::to_chars(buf, buf + sizeof buf, x);
          csv << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf)) << '\n';
        }
        write_output(out_path, csv.str());
      }
    } else if (*train) {
      return report_run(ex::run_experiment(resolve(train_args), {.save_models = true}));
    } else if (*evaluate) {
      return report_run(ex::evaluate_models(resolve(eval_args), models_dir));
    } else if (*run) {
      return report_run(ex::run_experiment(resolve(run_args)));
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code_for(e);
  }
  return ex::kOk;
}
