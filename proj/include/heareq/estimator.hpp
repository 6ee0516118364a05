#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "heareq/spectra.hpp"

namespace heareq {

// Per-bin ridge regression from secondary path to receiver-to-eardrum
// response: r_hat(w) = g_hat(w) * s(w).
struct RidgeModel {
  FrequencyResponse gains;
  double mu = 0.001;
  double band_limit_hz = 1500.0;

  void validate() const {
    if (mu < 0.0) throw ConfigError("ridge model: mu must be nonnegative");
    if (band_limit_hz < 0.0) throw ConfigError("ridge model: negative band limit");
  }
};

// Gain-space mapping between the top-K principal components of the
// band-windowed secondary paths and eardrum responses.
struct PcaModel {
  int k = 12;
  Eigen::MatrixXcd u_s;  // n_bins x K, orthonormal columns
  Eigen::MatrixXcd u_r;
  FrequencyResponse s_mean;
  FrequencyResponse r_mean;
  Eigen::VectorXcd g_s_mean;
  Eigen::VectorXcd g_r_mean;
  Eigen::MatrixXcd a_hat;  // K x K
  Band band{1500.0, 8000.0};
  bool a_hat_regularized = false;

  void validate() const {
    if (k < 1) throw ConfigError("pca model: component count must be positive");
    const auto nb = static_cast<Eigen::Index>(s_mean.n_bins());
    require_same_grid(s_mean, r_mean, "pca model means");
    if (u_s.rows() != nb || u_s.cols() != k || u_r.rows() != nb || u_r.cols() != k)
      throw DimensionError("pca model: basis shape does not match grid and K");
    if (g_s_mean.size() != k || g_r_mean.size() != k)
      throw DimensionError("pca model: gain mean length does not match K");
    if (a_hat.rows() != k || a_hat.cols() != k)
      throw DimensionError("pca model: mapping matrix must be K x K");
    band.validate(s_mean.nyquist());
  }
};

struct CombinedEstimator {
  RidgeModel ridge;
  PcaModel pca;
  double split_hz = 1500.0;

  void validate() const {
    ridge.validate();
    pca.validate();
    if (split_hz < 0.0) throw ConfigError("combined estimator: negative split frequency");
    require_same_grid(ridge.gains, pca.s_mean, "combined estimator");
  }
};

// Rectangular window: bins whose center frequency lies in [low, high]
// pass, all others are zeroed.
inline FrequencyResponse window_band(const FrequencyResponse& fr, Band band) {
  band.validate(fr.nyquist());
  std::vector<cplx> bins(fr.n_bins());
  for (std::size_t k = 0; k < bins.size(); ++k)
    bins[k] = band.contains(fr.bin_freq(k)) ? fr[k] : cplx(0.0, 0.0);
  return FrequencyResponse(std::move(bins), fr.fft_size(), fr.rate());
}

// Because the ridge decouples per bin, fitting on the full grid gives
// the same in-band gains as fitting on windowed pairs, while keeping
// the out-of-band gains defined for the combiner's fallback region.
inline RidgeModel train_ridge(const AtfDatabase& training, double mu) {
  if (mu < 0.0) throw ConfigError("ridge training: mu must be nonnegative");
  if (training.sets.empty()) throw DataError("ridge training: empty database");
  training.validate();

  const FrequencyResponse& grid = training.sets.front().s;
  std::vector<cplx> gains(grid.n_bins());
  for (std::size_t k = 0; k < gains.size(); ++k) {
    cplx num(0.0, 0.0);
    double den = 0.0;
    for (const AtfSet& set : training.sets) {
      num += std::conj(set.s[k]) * set.r[k];
      den += std::norm(set.s[k]);
    }
    if (mu == 0.0 && den < 1e-24)
      throw SingularityError("ridge training: secondary path vanishes at bin " +
                             std::to_string(k) + " and mu = 0");
    gains[k] = num / (den + mu);
  }
  return RidgeModel{FrequencyResponse(std::move(gains), grid.fft_size(), grid.rate()), mu};
}

inline FrequencyResponse estimate_ridge(const RidgeModel& model, const FrequencyResponse& s) {
  require_same_grid(model.gains, s, "ridge estimate");
  std::vector<cplx> bins(s.n_bins());
  for (std::size_t k = 0; k < bins.size(); ++k) bins[k] = model.gains[k] * s[k];
  return FrequencyResponse(std::move(bins), s.fft_size(), s.rate());
}

namespace detail {

// Complex singular vectors are unique only up to a unit phase; rotate
// each column so its largest-magnitude entry (lowest index on ties) is
// real and positive, which pins the model bit-for-bit.
inline void fix_component_phases(Eigen::MatrixXcd& u) {
  for (Eigen::Index col = 0; col < u.cols(); ++col) {
    Eigen::Index best = 0;
    double best_mag = 0.0;
    for (Eigen::Index row = 0; row < u.rows(); ++row) {
      const double mag = std::abs(u(row, col));
      if (mag > best_mag) {
        best_mag = mag;
        best = row;
      }
    }
    if (best_mag > 0.0) u.col(col) *= std::conj(u(best, col)) / best_mag;
  }
}

inline Eigen::VectorXcd to_vector(const FrequencyResponse& fr) {
  return Eigen::Map<const Eigen::VectorXcd>(fr.bins().data(),
                                            static_cast<Eigen::Index>(fr.n_bins()));
}

inline FrequencyResponse from_vector(const Eigen::VectorXcd& v, const FrequencyResponse& grid) {
  return FrequencyResponse(std::vector<cplx>(v.data(), v.data() + v.size()),
                           grid.fft_size(), grid.rate());
}

}  // namespace detail

inline PcaModel train_pca(const AtfDatabase& training, int k,
                          Band band = Band{1500.0, 8000.0}) {
  if (training.J() < 2) throw DataError("pca training: need at least two sets");
  training.validate();
  const FrequencyResponse& grid = training.sets.front().s;
  const auto nb = static_cast<Eigen::Index>(grid.n_bins());
  const auto j = static_cast<Eigen::Index>(training.J());
  if (k < 1) throw ConfigError("pca training: component count must be positive");
  if (k > std::min<Eigen::Index>(j, nb))
    throw ConfigError("pca training: K exceeds min(J, n_bins)");
  band.validate(grid.nyquist());

  Eigen::MatrixXcd s_data(nb, j);
  Eigen::MatrixXcd r_data(nb, j);
  for (Eigen::Index col = 0; col < j; ++col) {
    const AtfSet& set = training.sets[static_cast<std::size_t>(col)];
    s_data.col(col) = detail::to_vector(window_band(set.s, band));
    r_data.col(col) = detail::to_vector(window_band(set.r, band));
  }
  const Eigen::VectorXcd s_mean = s_data.rowwise().mean();
  const Eigen::VectorXcd r_mean = r_data.rowwise().mean();
  s_data.colwise() -= s_mean;
  r_data.colwise() -= r_mean;

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd_s(s_data, Eigen::ComputeThinU);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd_r(r_data, Eigen::ComputeThinU);
  Eigen::MatrixXcd u_s = svd_s.matrixU().leftCols(k);
  Eigen::MatrixXcd u_r = svd_r.matrixU().leftCols(k);
  // Singular vectors of band-supported data are band-supported; clear
  // the rotation noise the solver leaves on the zeroed rows so models
  // are exactly silent outside the band.
  for (Eigen::Index row = 0; row < nb; ++row) {
    if (band.contains(grid.bin_freq(static_cast<std::size_t>(row)))) continue;
    u_s.row(row).setZero();
    u_r.row(row).setZero();
  }
  detail::fix_component_phases(u_s);
  detail::fix_component_phases(u_r);

  const Eigen::MatrixXcd g_s = u_s.adjoint() * s_data;  // K x J
  const Eigen::MatrixXcd g_r = u_r.adjoint() * r_data;
  const Eigen::VectorXcd g_s_mean = g_s.rowwise().mean();
  const Eigen::VectorXcd g_r_mean = g_r.rowwise().mean();
  const Eigen::MatrixXcd g_s_c = g_s.colwise() - g_s_mean;
  const Eigen::MatrixXcd g_r_c = g_r.colwise() - g_r_mean;

  const Eigen::MatrixXcd cross = g_r_c * g_s_c.adjoint();
  Eigen::MatrixXcd auto_cov = g_s_c * g_s_c.adjoint();

  PcaModel model{k,
                 std::move(u_s),
                 std::move(u_r),
                 detail::from_vector(s_mean, grid),
                 detail::from_vector(r_mean, grid),
                 g_s_mean,
                 g_r_mean,
                 Eigen::MatrixXcd::Zero(k, k),
                 band,
                 false};

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(auto_cov);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmax > 0.0)) {
    // Zero-variance gains: no information to map, keep A_hat = 0.
    model.a_hat_regularized = true;
    return model;
  }
  if (lmin <= lmax * 1e-10) {
    const double eps = 1e-10 * auto_cov.trace().real() / k;
    auto_cov.diagonal().array() += eps;
    model.a_hat_regularized = true;
  }
  Eigen::LLT<Eigen::MatrixXcd> llt(auto_cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("pca training: gain covariance factorization failed");
  model.a_hat = llt.solve(cross.adjoint()).adjoint();
  return model;
}

// Runtime chain: g_s = U_s^H (s - s_mean), g_r_hat = g_r_mean + A g_s,
// r_hat = r_mean + U_r g_r_hat. Out-of-band bins come out zero because
// the basis rows and means are zero there.
inline FrequencyResponse estimate_pca(const PcaModel& model, const FrequencyResponse& s) {
  model.validate();
  require_same_grid(model.s_mean, s, "pca estimate");
  const Eigen::VectorXcd g_s =
      model.u_s.adjoint() * (detail::to_vector(s) - detail::to_vector(model.s_mean));
  const Eigen::VectorXcd g_r = model.g_r_mean + model.a_hat * g_s;
  const Eigen::VectorXcd r_hat = detail::to_vector(model.r_mean) + model.u_r * g_r;
  return detail::from_vector(r_hat, s);
}

// True when a bin is served by neither constituent's intended range and
// falls back to the ridge output.
inline bool combiner_fallback_bin(const CombinedEstimator& est, double freq_hz) {
  return freq_hz > est.split_hz && freq_hz > est.pca.band.high_hz;
}

// Knobs of the whole estimation stage, with the published defaults.
struct EstimatorConfig {
  double mu = 0.001;
  int k = 12;
  double split_hz = 1500.0;
  double band_high_hz = 8000.0;

  void validate() const {
    if (mu < 0.0) throw ConfigError("estimator config: mu must be nonnegative");
    if (k < 1) throw ConfigError("estimator config: K must be positive");
    if (split_hz < 0.0) throw ConfigError("estimator config: negative split frequency");
    if (!(band_high_hz > split_hz))
      throw ConfigError("estimator config: PCA band must extend above the split");
  }
};

inline CombinedEstimator train_combined(const AtfDatabase& training,
                                        const EstimatorConfig& cfg) {
  cfg.validate();
  RidgeModel ridge = train_ridge(training, cfg.mu);
  ridge.band_limit_hz = cfg.split_hz;
  PcaModel pca = train_pca(training, cfg.k, Band{cfg.split_hz, cfg.band_high_hz});
  return CombinedEstimator{std::move(ridge), std::move(pca), cfg.split_hz};
}

// Piecewise selection: ridge at and below the split, PCA inside its
// pass-band above the split, ridge again beyond the pass-band.
inline FrequencyResponse estimate_combined(const CombinedEstimator& est,
                                           const FrequencyResponse& s) {
  est.validate();
  const FrequencyResponse from_ridge = estimate_ridge(est.ridge, s);
  const FrequencyResponse from_pca = estimate_pca(est.pca, s);
  std::vector<cplx> bins(s.n_bins());
  for (std::size_t bin = 0; bin < bins.size(); ++bin) {
    const double f = s.bin_freq(bin);
    const bool use_ridge = f <= est.split_hz || f > est.pca.band.high_hz;
    bins[bin] = use_ridge ? from_ridge[bin] : from_pca[bin];
  }
  return FrequencyResponse(std::move(bins), s.fft_size(), s.rate());
}

}  // namespace heareq
