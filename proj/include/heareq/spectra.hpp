#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "heareq/errors.hpp"

namespace heareq {

using cplx = std::complex<double>;

// Transform convention used throughout: forward DFT is unnormalized,
// the inverse carries 1/Nf. Spectra are stored one-sided (DC through
// Nyquist, Nf/2+1 bins) and reconstructed by conjugate symmetry.

struct SampleRate {
  double hertz = 40000.0;

  SampleRate() = default;
  explicit SampleRate(double hz) : hertz(hz) {
    if (!(hz > 0.0) || !std::isfinite(hz))
      throw DataError("sample rate must be positive and finite");
  }
};

inline bool operator==(SampleRate a, SampleRate b) { return a.hertz == b.hertz; }
inline bool operator!=(SampleRate a, SampleRate b) { return !(a == b); }

// Closed frequency interval [low_hz, high_hz].
struct Band {
  double low_hz = 0.0;
  double high_hz = 0.0;

  void validate(double nyquist_hz) const {
    if (low_hz < 0.0 || !(low_hz < high_hz))
      throw ConfigError("band edges must satisfy 0 <= low < high");
    if (high_hz > nyquist_hz) throw ConfigError("band extends past Nyquist");
  }
  bool contains(double f) const { return f >= low_hz && f <= high_hz; }
};

// Unit phasor for a fraction of a full turn. Exact at multiples of a
// quarter turn so that whole-sample delays yield bit-exact +-1 and +-i,
// and DC or Nyquist bins of shifted spectra stay exactly real.
inline cplx phasor_turns(double turns) {
  double t = turns - std::round(turns);  // [-0.5, 0.5]
  if (t == 0.0) return {1.0, 0.0};
  if (t == 0.25) return {0.0, 1.0};
  if (t == -0.25) return {0.0, -1.0};
  if (t == 0.5 || t == -0.5) return {-1.0, 0.0};
  const double a = 2.0 * M_PI * t;
  return {std::cos(a), std::sin(a)};
}

class ImpulseResponse {
public:
  ImpulseResponse(std::vector<double> taps, SampleRate rate)
      : taps_(std::move(taps)), rate_(rate) {
    if (taps_.empty()) throw DimensionError("impulse response needs at least one tap");
    for (double v : taps_)
      if (!std::isfinite(v)) throw DataError("impulse response has non-finite tap");
  }

  const std::vector<double>& taps() const { return taps_; }
  SampleRate rate() const { return rate_; }
  std::size_t size() const { return taps_.size(); }

private:
  std::vector<double> taps_;
  SampleRate rate_;
};

class FrequencyResponse {
public:
  FrequencyResponse(std::vector<cplx> bins, int fft_size, SampleRate rate)
      : bins_(std::move(bins)), fft_size_(fft_size), rate_(rate) {
    if (fft_size_ < 2 || fft_size_ % 2 != 0)
      throw DimensionError("fft size must be even and at least 2");
    if (bins_.size() != static_cast<std::size_t>(fft_size_ / 2 + 1))
      throw DimensionError("one-sided spectrum must hold fft_size/2+1 bins");
    for (const cplx& v : bins_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw DataError("spectrum has non-finite bin");
  }

  const std::vector<cplx>& bins() const { return bins_; }
  int fft_size() const { return fft_size_; }
  SampleRate rate() const { return rate_; }
  std::size_t n_bins() const { return bins_.size(); }

  // Center frequency of bin k in Hz.
  double bin_freq(std::size_t k) const {
    return static_cast<double>(k) * rate_.hertz / fft_size_;
  }
  double nyquist() const { return rate_.hertz / 2.0; }

  bool same_grid(const FrequencyResponse& other) const {
    return fft_size_ == other.fft_size_ && rate_ == other.rate_;
  }

  const cplx& operator[](std::size_t k) const { return bins_[k]; }

private:
  std::vector<cplx> bins_;
  int fft_size_;
  SampleRate rate_;
};

inline void require_same_grid(const FrequencyResponse& a, const FrequencyResponse& b,
                              const char* what) {
  if (!a.same_grid(b))
    throw DimensionError(std::string(what) + ": spectra on different grids");
}

// One measurement set: open ear o, occluded direct path c, external
// microphone path m, receiver-to-eardrum path r, secondary path s,
// all on one grid.
struct AtfSet {
  std::string subject_id;
  int trial = 1;
  FrequencyResponse o, c, m, r, s;

  void validate() const {
    require_same_grid(o, c, "atf set");
    require_same_grid(o, m, "atf set");
    require_same_grid(o, r, "atf set");
    require_same_grid(o, s, "atf set");
  }
  int fft_size() const { return o.fft_size(); }
  SampleRate rate() const { return o.rate(); }
};

struct AtfDatabase {
  std::vector<AtfSet> sets;

  std::size_t J() const { return sets.size(); }

  void validate() const {
    if (sets.empty()) return;
    for (const AtfSet& set : sets) {
      set.validate();
      if (!set.o.same_grid(sets.front().o))
        throw DimensionError("database sets on inconsistent grids");
    }
  }
};

// One-sided DFT of the zero-padded taps. DC and Nyquist imaginary parts
// are forced to exact zero; for real input they are zero up to rounding.
inline FrequencyResponse ir_to_fr(const ImpulseResponse& ir, int fft_size) {
  if (fft_size < 2 || fft_size % 2 != 0)
    throw DimensionError("ir_to_fr: fft size must be even and at least 2");
  if (static_cast<std::size_t>(fft_size) < ir.size())
    throw DimensionError("ir_to_fr: fft size " + std::to_string(fft_size) +
                         " shorter than " + std::to_string(ir.size()) + " taps");

  std::vector<cplx> in(static_cast<std::size_t>(fft_size), cplx{0.0, 0.0});
  for (std::size_t n = 0; n < ir.size(); ++n) in[n] = cplx{ir.taps()[n], 0.0};

  std::vector<cplx> out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);

  std::vector<cplx> bins(out.begin(), out.begin() + fft_size / 2 + 1);
  bins.front().imag(0.0);
  bins.back().imag(0.0);
  return FrequencyResponse(std::move(bins), fft_size, ir.rate());
}

// Inverse transform of the conjugate-symmetric extension, truncated to
// out_len samples. Rejects spectra whose DC or Nyquist bin carries a
// non-negligible imaginary part, since those cannot come from a real
// signal.
inline ImpulseResponse fr_to_ir(const FrequencyResponse& fr, int out_len) {
  const int nf = fr.fft_size();
  if (out_len < 1 || out_len > nf)
    throw DimensionError("fr_to_ir: output length must be in [1, fft_size]");

  const auto& bins = fr.bins();
  const double scale = 1.0 + std::abs(bins.front().real()) + std::abs(bins.back().real());
  if (std::abs(bins.front().imag()) > 1e-12 * scale ||
      std::abs(bins.back().imag()) > 1e-12 * scale)
    throw InvariantError("fr_to_ir: DC or Nyquist bin is not real");

  std::vector<cplx> full(static_cast<std::size_t>(nf));
  for (int k = 0; k <= nf / 2; ++k) full[k] = bins[k];
  for (int k = nf / 2 + 1; k < nf; ++k) full[k] = std::conj(bins[nf - k]);

  std::vector<cplx> time;
  Eigen::FFT<double> fft;
  fft.inv(time, full);  // carries the 1/Nf

  std::vector<double> taps(static_cast<std::size_t>(out_len));
  for (int n = 0; n < out_len; ++n) taps[n] = time[n].real();
  return ImpulseResponse(std::move(taps), fr.rate());
}

// Pure phase ramp of a time shift: bin k holds exp(-j 2 pi k D / Nf)
// with D = shift_seconds * rate in samples, fractional shifts allowed.
// A negative shift is a time advance. Note that a fractional shift makes
// the Nyquist bin complex; such a ramp is a multiplier, not the spectrum
// of a real signal.
inline FrequencyResponse delay_phase(int fft_size, SampleRate rate, double shift_seconds) {
  if (fft_size < 2 || fft_size % 2 != 0)
    throw DimensionError("delay_phase: fft size must be even and at least 2");
  const double shift_samples = shift_seconds * rate.hertz;
  std::vector<cplx> bins(static_cast<std::size_t>(fft_size / 2 + 1));
  for (std::size_t k = 0; k < bins.size(); ++k)
    bins[k] = phasor_turns(-static_cast<double>(k) * shift_samples / fft_size);
  return FrequencyResponse(std::move(bins), fft_size, rate);
}

}  // namespace heareq
