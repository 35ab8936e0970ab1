#include "xrcast/viewframe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "xrcast/error.hpp"

namespace xrcast::viewframe {

namespace {

constexpr std::string_view kModule = "viewframe";

bool direction_selected(trace::Direction d, const FrameOptions& options) {
  return d == trace::Direction::downlink ? options.include_downlink : options.include_uplink;
}

std::vector<std::size_t> local_maxima(const std::vector<std::size_t>& counts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::size_t left = i == 0 ? 0 : counts[i - 1];
    const std::size_t right = i + 1 == counts.size() ? 0 : counts[i + 1];
    if (counts[i] > left && counts[i] > right) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> merge_shallow_peaks(const std::vector<std::size_t>& counts,
                                             const std::vector<std::size_t>& maxima, double ratio) {
  std::vector<std::size_t> kept;
  for (std::size_t p : maxima) {
    if (kept.empty()) {
      kept.push_back(p);
      continue;
    }
    const std::size_t q = kept.back();
    const std::size_t valley = *std::min_element(counts.begin() + static_cast<std::ptrdiff_t>(q) + 1,
                                                 counts.begin() + static_cast<std::ptrdiff_t>(p));
    const double smaller = static_cast<double>(std::min(counts[q], counts[p]));
    if (static_cast<double>(valley) < ratio * smaller) {
      kept.push_back(p);
    } else if (counts[p] > counts[q]) {
      kept.back() = p;
    }
  }
  return kept;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

double estimate_len_threshold(std::span<const trace::PacketRecord> packets) {
  if (packets.empty()) throw Error(ErrorCode::EmptySegment, kModule, "no packets in first segment");
  std::uint32_t max_len = 0;
  for (const auto& p : packets) max_len = std::max(max_len, p.length);
  return 0.25 * static_cast<double>(max_len);
}

DurThresholdEstimate estimate_dur_threshold(std::span<const trace::PacketRecord> packets,
                                            const HistogramOptions& options) {
  if (options.bins < 3) throw Error(ErrorCode::BadArgument, kModule, "need at least 3 bins");
  if (!(options.valley_ratio > 0.0 && options.valley_ratio <= 1.0)) {
    throw Error(ErrorCode::BadArgument, kModule, "valley ratio must lie in (0, 1]");
  }
  if (!(options.min_peak_fraction >= 0.0 && options.min_peak_fraction < 1.0)) {
    throw Error(ErrorCode::BadArgument, kModule, "minimum peak fraction must lie in [0, 1)");
  }
  if (packets.size() < 3) {
    throw Error(ErrorCode::DegenerateDistribution, kModule, "need at least 3 packets");
  }
  std::vector<double> logs;
  logs.reserve(packets.size());
  for (std::size_t i = 1; i < packets.size(); ++i) {
    const double gap = packets[i].ts - packets[i - 1].ts;
    if (gap > 0.0) logs.push_back(std::log10(gap));
  }
  if (logs.empty()) {
    throw Error(ErrorCode::DegenerateDistribution, kModule, "no positive inter-arrival times");
  }
  const auto [lo_it, hi_it] = std::minmax_element(logs.begin(), logs.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  // Timestamps rebuilt from sums carry ulp-level noise; treat that as equal.
  if (!(hi - lo > 1e-6)) {
    throw Error(ErrorCode::DegenerateDistribution, kModule, "all inter-arrival times identical");
  }

  DurThresholdEstimate est;
  est.log10_min = lo;
  est.bin_width = (hi - lo) / options.bins;
  est.counts.assign(static_cast<std::size_t>(options.bins), 0);
  for (double l : logs) {
    auto bin = static_cast<std::size_t>((l - lo) / est.bin_width);
    ++est.counts[std::min(bin, est.counts.size() - 1)];
  }

  auto maxima = local_maxima(est.counts);
  const double min_count = options.min_peak_fraction * static_cast<double>(logs.size());
  std::erase_if(maxima, [&](std::size_t i) { return static_cast<double>(est.counts[i]) < min_count; });
  const auto peaks = merge_shallow_peaks(est.counts, maxima, options.valley_ratio);
  for (std::size_t p : peaks) {
    est.peaks.push_back(std::pow(10.0, lo + (static_cast<double>(p) + 0.5) * est.bin_width));
  }
  if (peaks.size() < 2) {
    throw Error(ErrorCode::DegenerateDistribution, kModule,
                "found " + std::to_string(peaks.size()) + " peak(s), need 2");
  }
  est.dur_th = std::sqrt(est.peaks[0] * est.peaks[1]);
  return est;
}

std::vector<Frame> identify_frames(std::span<const trace::PacketRecord> packets,
                                   const Thresholds& thresholds, const FrameOptions& options) {
  std::vector<Frame> frames;
  std::optional<Frame> current;
  bool small_since_last = false;

  auto close = [&] {
    if (current && current->packet_count >= options.min_packets) frames.push_back(*current);
    current.reset();
  };

  for (const auto& p : packets) {
    if (!direction_selected(p.direction, options)) continue;
    if (static_cast<double>(p.length) < thresholds.len_th) {
      small_since_last = true;
      continue;
    }
    const bool joins = current && (p.ts - current->end_ts) <= thresholds.dur_th &&
                       !(options.split_on_small_packet && small_since_last);
    if (joins) {
      current->end_ts = p.ts;
      current->size += p.length;
      ++current->packet_count;
    } else {
      close();
      current = Frame{p.ts, p.ts, p.length, 1};
    }
    small_since_last = false;
  }
  close();
  return frames;
}

std::vector<SegmentFeatures> segment_features(std::span<const Frame> frames, double session_start,
                                              double segment_duration, std::size_t num_segments) {
  if (!(segment_duration > 0.0)) {
    throw Error(ErrorCode::BadArgument, kModule, "segment duration must be positive");
  }
  std::vector<SegmentFeatures> out(num_segments);
  std::vector<double> iat_sum(num_segments, 0.0);
  std::vector<std::optional<double>> last_start(num_segments);
  for (std::size_t i = 0; i < num_segments; ++i) out[i].segment_index = i;

  for (const auto& f : frames) {
    const double pos = std::floor((f.start_ts - session_start) / segment_duration);
    if (pos < 0.0 || pos >= static_cast<double>(num_segments)) continue;
    const auto idx = static_cast<std::size_t>(pos);
    auto& seg = out[idx];
    ++seg.f_c;
    seg.f_s += f.size;
    if (last_start[idx]) iat_sum[idx] += f.start_ts - *last_start[idx];
    last_start[idx] = f.start_ts;
  }
  for (std::size_t i = 0; i < num_segments; ++i) {
    if (out[i].f_c >= 2) out[i].f_iat = iat_sum[i] / static_cast<double>(out[i].f_c - 1);
  }
  return out;
}

ViewFrameResult extract_features(std::span<const trace::PacketRecord> packets,
                                 const ViewFrameConfig& config) {
  if (packets.empty()) throw Error(ErrorCode::EmptyTrace, kModule, "no packets");
  const double start = packets.front().ts;

  std::vector<trace::PacketRecord> first;
  for (const auto& p : packets) {
    if (p.ts - start >= config.segment_duration) break;
    if (direction_selected(p.direction, config.frames)) first.push_back(p);
  }

  ViewFrameResult result;
  result.report.bins = config.histogram.bins;
  result.report.first_segment_packets = first.size();
  result.report.thresholds.len_th = estimate_len_threshold(first);
  std::vector<trace::PacketRecord> eligible;
  if (config.histogram.eligible_only) {
    for (const auto& p : first) {
      if (static_cast<double>(p.length) >= result.report.thresholds.len_th) eligible.push_back(p);
    }
  }
  result.report.histogram_packets = config.histogram.eligible_only ? eligible.size() : first.size();
  result.report.valley_ratio = config.histogram.valley_ratio;
  result.report.min_peak_fraction = config.histogram.min_peak_fraction;
  try {
    auto est = estimate_dur_threshold(config.histogram.eligible_only ? eligible : first, config.histogram);
    result.report.thresholds.dur_th = est.dur_th;
    result.report.peaks = std::move(est.peaks);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateDistribution) throw;
    result.report.thresholds.dur_th = config.fallback_dur_th;
    result.report.dur_th_fallback = true;
  }

  result.frames = identify_frames(packets, result.report.thresholds, config.frames);
  const double span = packets.back().ts - start;
  const auto segments = static_cast<std::size_t>(std::floor(span / config.segment_duration)) + 1;
  result.features = segment_features(result.frames, start, config.segment_duration, segments);
  return result;
}

void write_features_csv(std::ostream& out, std::span<const SegmentFeatures> features) {
  out << "segment,f_c,f_s,f_iat\n";
  for (const auto& f : features) {
    out << f.segment_index << ',' << f.f_c << ',' << f.f_s << ','
        << (f.f_iat ? format_double(*f.f_iat) : std::string("NA")) << '\n';
  }
}

std::vector<SegmentFeatures> read_features_csv(std::istream& in) {
  std::string line;
  auto trim = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaMismatch, kModule, "empty features file");
  trim(line);
  if (line != "segment,f_c,f_s,f_iat") {
    throw Error(ErrorCode::SchemaMismatch, kModule, "expected header 'segment,f_c,f_s,f_iat'");
  }
  std::vector<SegmentFeatures> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    auto fail = [&] {
      throw Error(ErrorCode::RowParseError, kModule, "line " + std::to_string(line_no) + ": '" + line + "'");
    };
    if (fields.size() != 4) fail();
    SegmentFeatures f;
    auto parse_u = [&](const std::string& s, auto& v) {
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) fail();
    };
    parse_u(fields[0], f.segment_index);
    parse_u(fields[1], f.f_c);
    parse_u(fields[2], f.f_s);
    if (fields[3] != "NA") {
      double v = 0.0;
      parse_u(fields[3], v);
      f.f_iat = v;
    }
    out.push_back(f);
  }
  return out;
}

std::string threshold_report_json(const ThresholdReport& report) {
  nlohmann::ordered_json j;
  j["len_th"] = report.thresholds.len_th;
  j["dur_th"] = report.thresholds.dur_th;
  j["bins"] = report.bins;
  j["peaks"] = report.peaks;
  j["dur_th_fallback"] = report.dur_th_fallback;
  j["first_segment_packets"] = report.first_segment_packets;
  j["histogram_packets"] = report.histogram_packets;
  j["valley_ratio"] = report.valley_ratio;
  j["min_peak_fraction"] = report.min_peak_fraction;
  j["packet_length"] = "captured";
  j["peak_rule"] = "log10 histogram, local maxima above min_peak_fraction merged unless separated by a valley";
  return j.dump(2) + "\n";
}

}  // namespace xrcast::viewframe
