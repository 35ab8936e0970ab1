#pragma once

#include <cstdint>
#include <vector>

#include "xrcast/series.hpp"
#include "xrcast/trace.hpp"
#include "xrcast/viewframe.hpp"

namespace xrcast::synthetic {

/// Downlink video frames as bursts of large packets plus small background
/// packets in both directions.
struct TraceSpec {
  double fps = 72.0;
  double duration = 10.0;                // seconds
  double mean_frame_size = 12000.0;      // bytes
  std::uint32_t packets_per_frame = 10;
  double intra_frame_spacing = 1e-4;     // seconds between packets of a frame
  double background_rate = 200.0;        // packets per second, both directions
  double frame_jitter_std = 0.0;         // seconds, on frame start times
  double spacing_jitter_std = 0.0;       // seconds, on each intra-frame gap
  std::uint64_t seed = 1;

  void validate() const;
};

struct GeneratedTrace {
  std::vector<trace::PacketRecord> packets;
  std::vector<viewframe::Frame> frames;  // planted ground truth, by start time
};

/// Timestamps are whole microseconds, rebased so the first packet is at 0.
GeneratedTrace gen_trace(const TraceSpec& spec);

struct SeriesSpec {
  double level = 100.0;
  double amplitude = 20.0;
  double period = 50.0;       // samples
  double trend_slope = 0.0;   // per sample
  double noise_std = 2.0;
  /// Probability of a spike at each sample; ignored when spike_period > 0.
  double spike_rate = 0.0;
  /// Regular spike every spike_period samples (0 = random spikes).
  std::size_t spike_period = 0;
  double spike_height = 40.0;
  std::size_t length = 2000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GeneratedSeries {
  series::TimeSeries series;
  std::vector<double> deterministic;  // level + seasonal + trend
  std::vector<double> noise;
  std::vector<double> spikes;
};

GeneratedSeries gen_series(const SeriesSpec& spec, series::Feature feature = series::Feature::f_s);

/// The peaky fixture used by the end-to-end checks: 2000 points, periodic
/// spikes on a seasonal level.
SeriesSpec peaky_fixture(std::uint64_t seed = 7);

}  // namespace xrcast::synthetic
