#include "xrcast/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "xrcast/error.hpp"
#include "xrcast/random.hpp"

namespace xrcast::synthetic {

namespace {

constexpr std::string_view kModule = "harness";
constexpr std::uint32_t kMaxPacket = 1500;
constexpr std::uint32_t kBackgroundMin = 60;
constexpr std::uint32_t kBackgroundMax = 180;

[[noreturn]] void bad_spec(const std::string& what) { throw Error(ErrorCode::BadSpec, kModule, what); }

struct Planned {
  double t;
  std::uint32_t length;
  trace::Direction dir;
  std::int64_t frame;  // -1 for background
  std::size_t seq;
};

}  // namespace

void TraceSpec::validate() const {
  if (!(fps > 0.0) || !(duration > 0.0)) bad_spec("fps and duration must be positive");
  if (packets_per_frame < 1) bad_spec("packets_per_frame must be >= 1");
  if (!(intra_frame_spacing > 0.0)) bad_spec("intra_frame_spacing must be positive");
  if (!(background_rate >= 0.0) || !(frame_jitter_std >= 0.0) || !(spacing_jitter_std >= 0.0)) {
    bad_spec("rates and jitter must be non-negative");
  }
  const double per_packet = mean_frame_size / packets_per_frame;
  if (!(per_packet * 1.2 <= kMaxPacket) || !(per_packet * 0.8 >= 4.0 * kBackgroundMax)) {
    bad_spec("mean_frame_size / packets_per_frame must lie in [900, 1250] bytes");
  }
}

GeneratedTrace gen_trace(const TraceSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<Planned> plan;
  const double per_packet = spec.mean_frame_size / spec.packets_per_frame;
  const auto frames = static_cast<std::int64_t>(std::llround(spec.fps * spec.duration));

  for (std::int64_t f = 0; f < frames; ++f) {
    double t = static_cast<double>(f) / spec.fps + rng.normal(0.0, spec.frame_jitter_std);
    for (std::uint32_t k = 0; k < spec.packets_per_frame; ++k) {
      if (k > 0) t += std::max(1e-6, spec.intra_frame_spacing + rng.normal(0.0, spec.spacing_jitter_std));
      const auto len = static_cast<std::uint32_t>(std::llround(rng.uniform(0.8, 1.2) * per_packet));
      plan.push_back({t, len, trace::Direction::downlink, f, plan.size()});
    }
  }
  if (spec.background_rate > 0.0) {
    double t = 0.0;
    while (true) {
      t += -std::log(1.0 - rng.uniform()) / spec.background_rate;
      if (t >= spec.duration) break;
      const auto len = static_cast<std::uint32_t>(kBackgroundMin + rng.below(kBackgroundMax - kBackgroundMin + 1));
      const auto dir = rng.below(2) == 0 ? trace::Direction::downlink : trace::Direction::uplink;
      plan.push_back({t, len, dir, -1, plan.size()});
    }
  }

  const double origin = std::min_element(plan.begin(), plan.end(), [](const auto& a, const auto& b) {
                          return a.t < b.t;
                        })->t;
  for (auto& p : plan) p.t = static_cast<double>(std::llround((p.t - origin) * 1e6)) / 1e6;
  std::sort(plan.begin(), plan.end(), [](const Planned& a, const Planned& b) {
    return std::tie(a.t, a.seq) < std::tie(b.t, b.seq);
  });

  GeneratedTrace out;
  out.frames.resize(static_cast<std::size_t>(frames));
  std::vector<bool> seen(static_cast<std::size_t>(frames), false);
  for (const auto& p : plan) {
    out.packets.push_back({p.t, p.length, p.dir});
    if (p.frame < 0) continue;
    auto& fr = out.frames[static_cast<std::size_t>(p.frame)];
    if (!seen[static_cast<std::size_t>(p.frame)]) {
      fr.start_ts = p.t;
      seen[static_cast<std::size_t>(p.frame)] = true;
    }
    fr.end_ts = p.t;
    fr.size += p.length;
    ++fr.packet_count;
  }
  std::stable_sort(out.frames.begin(), out.frames.end(),
                   [](const auto& a, const auto& b) { return a.start_ts < b.start_ts; });
  return out;
}

void SeriesSpec::validate() const {
  if (length < 1) bad_spec("length must be >= 1");
  if (!(period > 0.0)) bad_spec("period must be positive");
  if (!(noise_std >= 0.0) || !(amplitude >= 0.0) || !(spike_height >= 0.0)) {
    bad_spec("amplitude, noise and spike height must be non-negative");
  }
  if (!(spike_rate >= 0.0 && spike_rate <= 1.0)) bad_spec("spike_rate must lie in [0, 1]");
}

GeneratedSeries gen_series(const SeriesSpec& spec, series::Feature feature) {
  spec.validate();
  Rng rng(spec.seed);
  GeneratedSeries g;
  g.series.feature = feature;
  g.deterministic.resize(spec.length);
  g.noise.resize(spec.length);
  g.spikes.resize(spec.length);
  g.series.values.resize(spec.length);
  for (std::size_t t = 0; t < spec.length; ++t) {
    const double td = static_cast<double>(t);
    g.deterministic[t] =
        spec.level + spec.amplitude * std::sin(2.0 * std::numbers::pi * td / spec.period) + spec.trend_slope * td;
    g.noise[t] = spec.noise_std > 0.0 ? rng.normal(0.0, spec.noise_std) : 0.0;
    bool spike = false;
    if (spec.spike_period > 0) {
      spike = t % spec.spike_period == 0;
    } else if (spec.spike_rate > 0.0) {
      spike = rng.uniform() < spec.spike_rate;
    }
    g.spikes[t] = spike ? spec.spike_height * rng.uniform(0.8, 1.2) : 0.0;
    g.series.values[t] = g.deterministic[t] + g.noise[t] + g.spikes[t];
  }
  return g;
}

SeriesSpec peaky_fixture(std::uint64_t seed) {
  SeriesSpec s;
  s.level = 100.0;
  s.amplitude = 20.0;
  s.period = 50.0;
  s.noise_std = 2.0;
  s.spike_period = 20;
  s.spike_height = 60.0;
  s.length = 2000;
  s.seed = seed;
  return s;
}

}  // namespace xrcast::synthetic
