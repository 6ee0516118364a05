#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "heareq/spectra.hpp"

namespace heareq {

// Which receiver-to-eardrum response went into a filter design.
enum class RSource { TrueR, EstimatedR, SecondaryPathAsR, Ensemble };

inline const char* to_string(RSource s) {
  switch (s) {
    case RSource::TrueR: return "true";
    case RSource::EstimatedR: return "estimated";
    case RSource::SecondaryPathAsR: return "secondary";
    case RSource::Ensemble: return "ensemble";
  }
  return "?";
}

inline RSource r_source_from_string(const std::string& s) {
  if (s == "true") return RSource::TrueR;
  if (s == "estimated") return RSource::EstimatedR;
  if (s == "secondary") return RSource::SecondaryPathAsR;
  if (s == "ensemble") return RSource::Ensemble;
  throw DataError("unknown r_source tag '" + s + "'");
}

struct EqDesignConfig {
  double mu = 0.001;             // Tikhonov weight
  double d_proc_seconds = 0.0016;  // causality shift, realized as a time advance
  int taps_nt = 64;              // time-domain filter length
  int fft_size = 1024;

  void validate() const {
    if (mu < 0.0) throw ConfigError("eq design: mu must be nonnegative");
    if (d_proc_seconds < 0.0) throw ConfigError("eq design: d_proc must be nonnegative");
    if (taps_nt < 1) throw ConfigError("eq design: filter length must be positive");
    if (fft_size < 2 || fft_size % 2 != 0)
      throw ConfigError("eq design: fft size must be even and at least 2");
    if (taps_nt > fft_size)
      throw ConfigError("eq design: filter length exceeds fft size");
  }
};

// A designed equalization filter. Time-domain designs hold Nt real taps,
// frequency-domain designs hold per-bin gains; exactly one of the two.
class EqFilter {
public:
  EqFilter(std::vector<double> taps, EqDesignConfig cfg, RSource source)
      : payload_(std::move(taps)), config_(cfg), r_source_(source) {}
  EqFilter(FrequencyResponse bins, EqDesignConfig cfg, RSource source)
      : payload_(std::move(bins)), config_(cfg), r_source_(source) {}

  bool is_time_domain() const { return payload_.index() == 0; }

  const std::vector<double>& taps() const {
    if (!is_time_domain()) throw DataError("filter holds bins, not taps");
    return std::get<0>(payload_);
  }
  const FrequencyResponse& bins() const {
    if (is_time_domain()) throw DataError("filter holds taps, not bins");
    return std::get<1>(payload_);
  }

  const EqDesignConfig& config() const { return config_; }
  RSource r_source() const { return r_source_; }

private:
  std::variant<std::vector<double>, FrequencyResponse> payload_;
  EqDesignConfig config_;
  RSource r_source_;
};

struct AidedResponse {
  FrequencyResponse bins;
};

namespace detail {

constexpr double kSingularMagnitude = 1e-12;

// Real-valued stacked form of the per-bin design equations
//   sum_n g[n] * a_k * exp(-j 2 pi k n / Nf) = t_k,   a_k = m_k r_k zeta_k
// over the one-sided grid. Interior bins contribute their real and
// imaginary parts scaled by sqrt(2); DC and Nyquist contribute one real
// row each. This makes the quadratic cost equal to the two-sided
// spectrum cost of the corresponding complex system, so the real solve
// reproduces the complex normal equations while guaranteeing real taps.
struct DesignSystem {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
};

inline DesignSystem build_design_system(const FrequencyResponse& m,
                                        const FrequencyResponse& r,
                                        const FrequencyResponse& o,
                                        const FrequencyResponse& c,
                                        const EqDesignConfig& cfg) {
  const int nf = cfg.fft_size;
  const int nb = nf / 2 + 1;
  const int nt = cfg.taps_nt;
  const FrequencyResponse zeta = delay_phase(nf, m.rate(), -cfg.d_proc_seconds);

  DesignSystem sys;
  sys.a.resize(2 * nb - 2, nt);
  sys.b.resize(2 * nb - 2);

  const double rt2 = std::sqrt(2.0);
  int row = 0;
  for (int k = 0; k < nb; ++k) {
    const cplx ak = m[k] * r[k] * zeta[k];
    const cplx tk = o[k] - c[k];
    const bool edge = (k == 0 || k == nb - 1);
    const double w = edge ? 1.0 : rt2;
    for (int n = 0; n < nt; ++n) {
      const cplx e = ak * phasor_turns(-static_cast<double>(k) * n / nf);
      sys.a(row, n) = w * e.real();
      if (!edge) sys.a(row + 1, n) = w * e.imag();
    }
    sys.b(row) = w * tk.real();
    if (!edge) sys.b(row + 1) = w * tk.imag();
    row += edge ? 1 : 2;
  }
  return sys;
}

inline std::vector<double> solve_ridge_normal(const Eigen::MatrixXd& gram,
                                              const Eigen::VectorXd& rhs, double mu) {
  Eigen::MatrixXd lhs = gram;
  lhs.diagonal().array() += mu;
  Eigen::LLT<Eigen::MatrixXd> llt(lhs);
  if (llt.info() != Eigen::Success)
    throw SingularityError("eq design: normal equations not positive definite");
  Eigen::VectorXd g = llt.solve(rhs);
  return std::vector<double>(g.data(), g.data() + g.size());
}

inline std::vector<double> solve_unregularized(const Eigen::MatrixXd& a,
                                               const Eigen::VectorXd& b) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols())
    throw SingularityError("eq design: rank-deficient system with mu = 0");
  Eigen::VectorXd g = qr.solve(b);
  return std::vector<double>(g.data(), g.data() + g.size());
}

inline void check_design_inputs(const AtfSet& set, const EqDesignConfig& cfg) {
  cfg.validate();
  set.validate();
  if (set.fft_size() != cfg.fft_size)
    throw DimensionError("eq design: config fft size does not match the data grid");
}

}  // namespace detail

// Closed-form transparency filter G = (o - c) / (m r), defined only
// where the product path does not vanish.
inline FrequencyResponse ideal_filter(const AtfSet& set) {
  set.validate();
  std::vector<cplx> g(set.o.n_bins());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const cplx y = set.m[k] * set.r[k];
    if (std::abs(y) < detail::kSingularMagnitude)
      throw SingularityError("ideal filter: |m r| vanishes at bin " + std::to_string(k));
    g[k] = (set.o[k] - set.c[k]) / y;
  }
  return FrequencyResponse(std::move(g), set.fft_size(), set.rate());
}

// Per-bin regularized frequency-domain design. The diagonal system
// reduces to G = conj(m r) (o - c) / (|m r|^2 + mu) at each bin.
inline EqFilter design_freq_ls(const AtfSet& set, const EqDesignConfig& cfg) {
  detail::check_design_inputs(set, cfg);
  std::vector<cplx> g(set.o.n_bins());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const cplx y = set.m[k] * set.r[k];
    const double denom = std::norm(y) + cfg.mu;
    if (cfg.mu == 0.0 && std::abs(y) < detail::kSingularMagnitude)
      throw SingularityError("freq design: |m r| vanishes at bin " + std::to_string(k) +
                             " and mu = 0");
    g[k] = std::conj(y) * (set.o[k] - set.c[k]) / denom;
  }
  return EqFilter(FrequencyResponse(std::move(g), set.fft_size(), set.rate()), cfg,
                  RSource::TrueR);
}

namespace detail {

inline EqFilter design_time_ls_impl(const AtfSet& set, const FrequencyResponse& r_used,
                                    const EqDesignConfig& cfg, RSource source) {
  check_design_inputs(set, cfg);
  require_same_grid(set.o, r_used, "time design");
  const DesignSystem sys = build_design_system(set.m, r_used, set.o, set.c, cfg);
  std::vector<double> taps =
      cfg.mu > 0.0
          ? solve_ridge_normal(sys.a.transpose() * sys.a, sys.a.transpose() * sys.b, cfg.mu)
          : solve_unregularized(sys.a, sys.b);
  return EqFilter(std::move(taps), cfg, source);
}

}  // namespace detail

// Nt real taps minimizing the two-sided spectrum cost
//   sum_k |c + m r exp(+j w d_proc) DFT(g) - o|^2 + mu ||g||^2.
inline EqFilter design_time_ls(const AtfSet& set, const EqDesignConfig& cfg) {
  return detail::design_time_ls_impl(set, set.r, cfg, RSource::TrueR);
}

// Same solve with an estimate standing in for r. Pass
// RSource::SecondaryPathAsR when the estimate is the raw secondary path.
inline EqFilter design_time_ls_estimated(const AtfSet& set, const FrequencyResponse& r_hat,
                                         const EqDesignConfig& cfg,
                                         RSource source = RSource::EstimatedR) {
  return detail::design_time_ls_impl(set, r_hat, cfg, source);
}

// One common filter for a whole training database: the per-set design
// systems are stacked and the data term is averaged over sets, so mu
// keeps the same meaning regardless of J. A duplicate of every row
// therefore leaves the solution unchanged.
inline EqFilter design_gls(const AtfDatabase& training, const EqDesignConfig& cfg) {
  cfg.validate();
  if (training.sets.empty()) throw DataError("gls design: empty training database");
  training.validate();
  const double inv_j = 1.0 / static_cast<double>(training.J());

  if (cfg.mu > 0.0) {
    const int nt = cfg.taps_nt;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nt, nt);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nt);
    for (const AtfSet& set : training.sets) {
      detail::check_design_inputs(set, cfg);
      const detail::DesignSystem sys =
          detail::build_design_system(set.m, set.r, set.o, set.c, cfg);
      gram.noalias() += sys.a.transpose() * sys.a;
      rhs.noalias() += sys.a.transpose() * sys.b;
    }
    return EqFilter(detail::solve_ridge_normal(gram * inv_j, rhs * inv_j, cfg.mu), cfg,
                    RSource::Ensemble);
  }

  // mu = 0: solve the stacked least-squares problem directly.
  const int nb = cfg.fft_size / 2 + 1;
  const int rows_per_set = 2 * nb - 2;
  Eigen::MatrixXd a(rows_per_set * static_cast<int>(training.J()), cfg.taps_nt);
  Eigen::VectorXd b(a.rows());
  int at = 0;
  for (const AtfSet& set : training.sets) {
    detail::check_design_inputs(set, cfg);
    const detail::DesignSystem sys =
        detail::build_design_system(set.m, set.r, set.o, set.c, cfg);
    a.middleRows(at, rows_per_set) = sys.a;
    b.segment(at, rows_per_set) = sys.b;
    at += rows_per_set;
  }
  return EqFilter(detail::solve_unregularized(a, b), cfg, RSource::Ensemble);
}

// Frequency response of a designed filter as it acts in the aided path,
// including the causality advance for time-domain designs.
inline FrequencyResponse filter_response(const EqFilter& filter, SampleRate rate) {
  if (!filter.is_time_domain()) return filter.bins();
  const EqDesignConfig& cfg = filter.config();
  const FrequencyResponse spec =
      ir_to_fr(ImpulseResponse(filter.taps(), rate), cfg.fft_size);
  const FrequencyResponse zeta = delay_phase(cfg.fft_size, rate, -cfg.d_proc_seconds);
  std::vector<cplx> bins(spec.n_bins());
  for (std::size_t k = 0; k < bins.size(); ++k) bins[k] = spec[k] * zeta[k];
  return FrequencyResponse(std::move(bins), cfg.fft_size, rate);
}

// Aided transfer function c + m G r, always evaluated against the true
// r of the set.
inline AidedResponse aided_response(const AtfSet& set, const EqFilter& filter) {
  set.validate();
  const FrequencyResponse g = filter_response(filter, set.rate());
  require_same_grid(set.o, g, "aided response");
  std::vector<cplx> bins(set.o.n_bins());
  for (std::size_t k = 0; k < bins.size(); ++k)
    bins[k] = set.c[k] + set.m[k] * g[k] * set.r[k];
  return AidedResponse{FrequencyResponse(std::move(bins), set.fft_size(), set.rate())};
}

// Value of the time-domain design objective for arbitrary taps; used to
// confirm optimality of solutions.
inline double design_cost(const AtfSet& set, const FrequencyResponse& r_used,
                          const EqDesignConfig& cfg, const std::vector<double>& taps) {
  detail::check_design_inputs(set, cfg);
  if (static_cast<int>(taps.size()) != cfg.taps_nt)
    throw DimensionError("design cost: tap count does not match config");
  const FrequencyResponse zeta = delay_phase(cfg.fft_size, set.rate(), -cfg.d_proc_seconds);
  const FrequencyResponse gf = ir_to_fr(ImpulseResponse(taps, set.rate()), cfg.fft_size);
  double cost = 0.0;
  const int nb = cfg.fft_size / 2 + 1;
  for (int k = 0; k < nb; ++k) {
    const cplx resid =
        (set.o[k] - set.c[k]) - set.m[k] * r_used[k] * zeta[k] * gf[k];
    const double w = (k == 0 || k == nb - 1) ? 1.0 : 2.0;
    cost += w * std::norm(resid);
  }
  for (double t : taps) cost += cfg.mu * t * t;
  return cost;
}

}  // namespace heareq
