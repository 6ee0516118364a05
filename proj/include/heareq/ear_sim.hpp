#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "heareq/digest.hpp"
#include "heareq/rng.hpp"
#include "heareq/spectra.hpp"

namespace heareq {

// One ear, one device fit. The occluded canal between receiver and
// eardrum is modeled as a lossy one-dimensional tube; the open ear is
// the same tube with an entrance extension and a pressure-release
// source end. mic_offset_m is the inward microphone's standoff from the
// eardrum (0 means colocated with the drum, which makes s equal r).
struct EarModelParams {
  double canal_length_m = 0.015;
  double canal_radius_m = 0.004;
  double drum_resistance = 0.7;
  double mic_offset_m = 0.0045;
  double leak_gain = 0.25;
  double processing_noise_db = 0.5;

  void validate() const {
    if (canal_length_m < 0.010 || canal_length_m > 0.020)
      throw ConfigError("ear model: canal length outside [0.010, 0.020] m");
    if (!(canal_radius_m > 0.0)) throw ConfigError("ear model: canal radius must be positive");
    if (!(drum_resistance > 0.0) || !(drum_resistance < 1.0))
      throw ConfigError("ear model: drum resistance must lie in (0, 1)");
    if (mic_offset_m < 0.0 || mic_offset_m >= canal_length_m)
      throw ConfigError("ear model: mic offset must lie in [0, canal length)");
    if (!(leak_gain > 0.0) || !(leak_gain < 1.0))
      throw ConfigError("ear model: leak gain must lie in (0, 1)");
    if (processing_noise_db < 0.0)
      throw ConfigError("ear model: reinsertion noise must be nonnegative");
  }
};

struct GeneratorConfig {
  int n_subjects = 18;
  int n_trials = 3;
  std::uint64_t seed = 0;
  SampleRate rate{};
  int fft_size = 1024;

  void validate() const {
    if (n_subjects < 1) throw ConfigError("generator: need at least one subject");
    if (n_trials < 1) throw ConfigError("generator: need at least one trial");
    if (fft_size < 2 || fft_size % 2 != 0)
      throw ConfigError("generator: fft size must be even and at least 2");
  }
};

namespace tube {

constexpr double kSoundSpeed = 343.0;
// Wall-loss coefficient: attenuation alpha = kViscousLoss * sqrt(f) / radius.
constexpr double kViscousLoss = 3.0e-5;
// Reflection seen looking back at the receiver that blocks the canal.
constexpr double kReceiverReflection = 0.8;
// Pressure release at the open canal entrance.
constexpr double kOpenReflection = -0.8;
// Concha and entrance section added to the open-ear path length.
constexpr double kOpenExtensionM = 0.012;
// The occluded leak transmits lows and rolls off above this corner.
constexpr double kLeakCutoffHz = 1200.0;
// Receiver and converter latency, quantized to whole samples so that
// sampled spectra keep exactly real DC and Nyquist bins.
constexpr double kChainDelaySeconds = 0.0016;

inline cplx propagation(double freq_hz, double radius_m, double rate_ignored = 0.0) {
  (void)rate_ignored;
  const double alpha = kViscousLoss * std::sqrt(freq_hz) / radius_m;
  return {alpha, 2.0 * M_PI * freq_hz / kSoundSpeed};
}

// Standing-wave pressure at position x in a tube of length len driven
// at x = 0, with source- and drum-side reflection factors.
inline cplx pressure_at(double x, double len, double r_source, double r_drum, cplx gamma) {
  const cplx direct = std::exp(-gamma * x);
  const cplx reflected = r_drum * std::exp(-gamma * (2.0 * len - x));
  const cplx den = 1.0 - r_source * r_drum * std::exp(-2.0 * gamma * len);
  return (direct + reflected) / den;
}

}  // namespace tube

namespace detail {

constexpr std::uint64_t kSubjectLane = 1;
constexpr std::uint64_t kRenderLane = 2;

inline std::uint64_t params_key(const EarModelParams& p) {
  return Digest()
      .add(p.canal_length_m)
      .add(p.canal_radius_m)
      .add(p.drum_resistance)
      .add(p.mic_offset_m)
      .add(p.leak_gain)
      .add(p.processing_noise_db)
      .value();
}

inline FrequencyResponse seal_real_edges(std::vector<cplx> bins, int nf, SampleRate rate) {
  bins.front().imag(0.0);
  bins.back().imag(0.0);
  return FrequencyResponse(std::move(bins), nf, rate);
}

}  // namespace detail

inline EarModelParams sample_subject(SeedStream& stream) {
  EarModelParams p;
  p.canal_length_m = stream.uniform(0.010, 0.020);
  p.canal_radius_m = stream.uniform(0.0035, 0.0050);
  p.drum_resistance = stream.uniform(0.55, 0.85);
  p.mic_offset_m = stream.uniform(0.003, 0.006);
  p.leak_gain = stream.uniform(0.15, 0.40);
  p.processing_noise_db = stream.uniform(0.3, 1.0);
  p.validate();
  return p;
}

// Renders the five paths of one insertion. Reinsertion variability is a
// small multiplicative jitter on the fit geometry, keyed by the
// parameter values and the trial index so a subject's trials are stable
// regardless of corpus size or rendering order.
inline AtfSet render_atf_set(const EarModelParams& params, int trial,
                             const GeneratorConfig& cfg) {
  params.validate();
  cfg.validate();
  if (trial < 1) throw ConfigError("render: trial index starts at 1");

  SeedStream ts(cfg.seed, detail::kRenderLane, detail::params_key(params),
                static_cast<std::uint64_t>(trial));
  const double noise = params.processing_noise_db;
  const double len = params.canal_length_m * (1.0 + 0.004 * noise * ts.jitter(1.0));
  const double offset = params.mic_offset_m * (1.0 + 0.010 * noise * ts.jitter(1.0));
  const double drum =
      std::min(0.99, params.drum_resistance * (1.0 + 0.004 * noise * ts.jitter(1.0)));
  const double leak =
      std::min(0.95, params.leak_gain * (1.0 + 0.010 * noise * ts.jitter(1.0)));
  const double ripple1 = 0.04 * ts.jitter(1.0);
  const double ripple2 = 0.03 * ts.jitter(1.0);
  const double ripple3 = 0.02 * ts.jitter(1.0);

  const int nf = cfg.fft_size;
  const int nb = nf / 2 + 1;
  const double rate_hz = cfg.rate.hertz;
  const auto delay_samples =
      static_cast<double>(std::llround(tube::kChainDelaySeconds * rate_hz));
  const double open_len = len + tube::kOpenExtensionM;

  std::vector<cplx> r_bins(nb), s_bins(nb), o_bins(nb), c_bins(nb);
  for (int k = 0; k < nb; ++k) {
    const double f = k * rate_hz / nf;
    const cplx gamma = tube::propagation(f, params.canal_radius_m);
    const cplx chain = phasor_turns(-k * delay_samples / nf);
    r_bins[k] = chain * tube::pressure_at(len, len, tube::kReceiverReflection, drum, gamma);
    s_bins[k] =
        chain * tube::pressure_at(len - offset, len, tube::kReceiverReflection, drum, gamma);
    o_bins[k] = tube::pressure_at(open_len, open_len, tube::kOpenReflection, drum, gamma);
    c_bins[k] = leak * o_bins[k] / cplx(1.0, f / tube::kLeakCutoffHz);
  }

  AtfSet set{"", trial,
             detail::seal_real_edges(std::move(o_bins), nf, cfg.rate),
             detail::seal_real_edges(std::move(c_bins), nf, cfg.rate),
             ir_to_fr(ImpulseResponse({1.0, ripple1, ripple2, ripple3}, cfg.rate), nf),
             detail::seal_real_edges(std::move(r_bins), nf, cfg.rate),
             detail::seal_real_edges(std::move(s_bins), nf, cfg.rate)};
  set.validate();
  return set;
}

inline std::string subject_label(int index_one_based) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%02d", index_one_based);
  return buf;
}

inline AtfDatabase generate_database(const GeneratorConfig& cfg) {
  cfg.validate();
  AtfDatabase db;
  for (int i = 1; i <= cfg.n_subjects; ++i) {
    SeedStream subject_stream(cfg.seed, detail::kSubjectLane, static_cast<std::uint64_t>(i));
    const EarModelParams params = sample_subject(subject_stream);
    for (int t = 1; t <= cfg.n_trials; ++t) {
      AtfSet set = render_atf_set(params, t, cfg);
      set.subject_id = subject_label(i);
      db.sets.push_back(std::move(set));
    }
  }
  db.validate();
  return db;
}

}  // namespace heareq
