#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xrcast/trace.hpp"

namespace xrcast::viewframe {

/// Packet-length and intra-frame gap thresholds, estimated once from the
/// first segment of a session.
struct Thresholds {
  double len_th = 0.0;  // bytes
  double dur_th = 0.0;  // seconds
};

struct Frame {
  double start_ts = 0.0;
  double end_ts = 0.0;
  std::uint64_t size = 0;  // sum of member packet lengths
  std::uint32_t packet_count = 0;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct SegmentFeatures {
  std::size_t segment_index = 0;
  std::uint64_t f_c = 0;
  std::uint64_t f_s = 0;
  /// Mean gap between consecutive frame starts; absent with fewer than 2 frames.
  std::optional<double> f_iat;

  double mean_frame_size() const { return f_c == 0 ? 0.0 : static_cast<double>(f_s) / f_c; }

  friend bool operator==(const SegmentFeatures&, const SegmentFeatures&) = default;
};

/// 0.25 x the largest packet length.
double estimate_len_threshold(std::span<const trace::PacketRecord> packets);

struct HistogramOptions {
  int bins = 50;
  /// Two neighbouring local maxima only count as separate peaks when some bin
  /// between them falls below `valley_ratio` x the smaller maximum; otherwise
  /// the lower one is merged away. 1.0 keeps every strict local maximum.
  double valley_ratio = 0.5;
  /// Local maxima holding less than this fraction of all IATs are ignored
  /// before merging. 0 disables the filter.
  double min_peak_fraction = 0.02;
  /// extract_features builds the histogram from packets at or above len_th
  /// only; small interleaved packets otherwise split intra-frame gaps.
  bool eligible_only = true;
};

struct DurThresholdEstimate {
  double dur_th = 0.0;
  /// IAT (seconds) at the centre of every accepted peak, ascending.
  std::vector<double> peaks;
  std::vector<std::size_t> counts;
  double log10_min = 0.0;
  double bin_width = 0.0;  // in log10 units
};

/// Histogram of log10 of the strictly positive inter-arrival times; returns
/// the geometric midpoint between the first two peaks.
/// Throws DegenerateDistribution when fewer than two peaks exist.
DurThresholdEstimate estimate_dur_threshold(std::span<const trace::PacketRecord> packets,
                                            const HistogramOptions& options = {});

struct FrameOptions {
  std::uint32_t min_packets = 1;
  bool split_on_small_packet = false;
  bool include_downlink = true;
  bool include_uplink = false;
};

std::vector<Frame> identify_frames(std::span<const trace::PacketRecord> packets,
                                   const Thresholds& thresholds, const FrameOptions& options = {});

std::vector<SegmentFeatures> segment_features(std::span<const Frame> frames, double session_start,
                                              double segment_duration, std::size_t num_segments);

struct ViewFrameConfig {
  double segment_duration = 1.0;
  HistogramOptions histogram;
  FrameOptions frames;
  /// Used when the first segment does not show two IAT peaks.
  double fallback_dur_th = 0.002;
};

struct ThresholdReport {
  Thresholds thresholds;
  int bins = 0;
  std::vector<double> peaks;
  bool dur_th_fallback = false;
  std::size_t first_segment_packets = 0;
  std::size_t histogram_packets = 0;
  double valley_ratio = 0.5;
  double min_peak_fraction = 0.02;
};

struct ViewFrameResult {
  ThresholdReport report;
  std::vector<Frame> frames;
  std::vector<SegmentFeatures> features;
};

/// Full VF pass over one session: thresholds from the first segment, frame
/// grouping over the whole trace, dense per-segment features.
ViewFrameResult extract_features(std::span<const trace::PacketRecord> packets,
                                 const ViewFrameConfig& config = {});

/// `segment,f_c,f_s,f_iat` with NA for an absent f_iat.
void write_features_csv(std::ostream& out, std::span<const SegmentFeatures> features);
std::vector<SegmentFeatures> read_features_csv(std::istream& in);

std::string threshold_report_json(const ThresholdReport& report);

}  // namespace xrcast::viewframe
