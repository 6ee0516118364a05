#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "heareq/estimator.hpp"
#include "heareq/rng.hpp"
#include "heareq/spectra.hpp"

#include "oracle_helpers.hpp"

using namespace heareq;

namespace {

FrequencyResponse flat_fr(int nf, cplx value) {
  return FrequencyResponse(std::vector<cplx>(static_cast<std::size_t>(nf / 2 + 1), value),
                           nf, SampleRate());
}

AtfDatabase random_db(SeedStream& stream, int j, int nf) {
  AtfDatabase db;
  for (int i = 0; i < j; ++i) {
    AtfSet set = oracle::random_set(stream, nf);
    set.subject_id = "s" + std::to_string(i + 1);
    db.sets.push_back(std::move(set));
  }
  return db;
}

// Windowed and centered per-set data as columns, using the model's own
// stored mean so gain computations match the training convention.
Eigen::MatrixXcd centered_columns(const AtfDatabase& db, const PcaModel& model, bool use_r) {
  const auto nb = static_cast<Eigen::Index>(model.s_mean.n_bins());
  Eigen::MatrixXcd out(nb, static_cast<Eigen::Index>(db.J()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const AtfSet& set = db.sets[static_cast<std::size_t>(j)];
    const FrequencyResponse w = window_band(use_r ? set.r : set.s, model.band);
    const FrequencyResponse& mean = use_r ? model.r_mean : model.s_mean;
    for (Eigen::Index k = 0; k < nb; ++k)
      out(k, j) = w[static_cast<std::size_t>(k)] - mean[static_cast<std::size_t>(k)];
  }
  return out;
}

double mapping_cost(const Eigen::MatrixXcd& g_r, const Eigen::MatrixXcd& g_s,
                    const Eigen::MatrixXcd& a) {
  return (g_r - a * g_s).squaredNorm();
}

}  // namespace

TEST_CASE("band windowing keeps exactly the in-band bins") {
  SeedStream stream(21, 1);
  const FrequencyResponse fr = oracle::random_fr(stream, 1024, SampleRate());
  const Band band{1500.0, 8000.0};
  const FrequencyResponse w = window_band(fr, band);
  for (std::size_t k = 0; k < w.n_bins(); ++k) {
    if (band.contains(fr.bin_freq(k)))
      REQUIRE(w[k] == fr[k]);
    else
      REQUIRE(w[k] == cplx(0.0, 0.0));
  }
  // On the default grid the pass-band is bins 39 through 204.
  REQUIRE(w[38] == cplx(0.0, 0.0));
  REQUIRE(w[39] == fr[39]);
  REQUIRE(w[204] == fr[204]);
  REQUIRE(w[205] == cplx(0.0, 0.0));
}

TEST_CASE("ridge training matches its closed form and oracle") {
  SECTION("a doubled response trains an exact gain of two") {
    SeedStream stream(22, 1);
    AtfDatabase db;
    for (int j = 0; j < 2; ++j) {
      const FrequencyResponse s = oracle::random_fr(stream, 16, SampleRate());
      std::vector<cplx> r(s.n_bins());
      for (std::size_t k = 0; k < r.size(); ++k) r[k] = 2.0 * s[k];
      db.sets.push_back(AtfSet{"s" + std::to_string(j + 1), 1, s, s, s,
                               FrequencyResponse(std::move(r), 16, SampleRate()), s});
    }
    const RidgeModel model = train_ridge(db, 0.0);
    for (std::size_t k = 0; k < model.gains.n_bins(); ++k)
      REQUIRE(model.gains[k] == cplx(2.0, 0.0));
  }
  SECTION("regularization shrinks a unit gain to 1/1.001") {
    AtfDatabase db;
    const FrequencyResponse one = flat_fr(16, {1.0, 0.0});
    db.sets.push_back(AtfSet{"s1", 1, one, one, one, one, one});
    const RidgeModel model = train_ridge(db, 0.001);
    for (std::size_t k = 0; k < model.gains.n_bins(); ++k)
      REQUIRE(model.gains[k].real() == 1.0 / 1.001);
  }
  SECTION("gains agree with the materialized stacked solve") {
    SeedStream stream(22, 2);
    const AtfDatabase db = random_db(stream, 5, 32);
    const double mu = 0.7;
    const RidgeModel model = train_ridge(db, mu);
    const std::vector<cplx> expect = oracle::stacked_ridge(db, mu);
    REQUIRE(expect.size() == model.gains.n_bins());
    for (std::size_t k = 0; k < expect.size(); ++k)
      REQUIRE(std::abs(model.gains[k] - expect[k]) < 1e-10);
  }
  SECTION("no single-bin perturbation lowers the ridge cost") {
    SeedStream stream(22, 3);
    const AtfDatabase db = random_db(stream, 4, 16);
    const double mu = 0.05;
    const RidgeModel model = train_ridge(db, mu);
    auto cost = [&](std::size_t bin, cplx gain) {
      double c = mu * std::norm(gain);
      for (const AtfSet& set : db.sets) c += std::norm(set.r[bin] - gain * set.s[bin]);
      return c;
    };
    for (std::size_t bin : {std::size_t{0}, std::size_t{3}, std::size_t{8}}) {
      const double best = cost(bin, model.gains[bin]);
      for (int trial = 0; trial < 100; ++trial) {
        const cplx delta = 1e-3 * cplx(stream.uniform(-1.0, 1.0), stream.uniform(-1.0, 1.0));
        REQUIRE(best <= cost(bin, model.gains[bin] + delta));
      }
    }
  }
  SECTION("a dead bin is rejected only when mu is zero") {
    AtfDatabase db;
    const FrequencyResponse one = flat_fr(8, {1.0, 0.0});
    std::vector<cplx> s_bins(one.n_bins(), cplx(1.0, 0.0));
    s_bins[2] = cplx(0.0, 0.0);
    const FrequencyResponse s(std::move(s_bins), 8, SampleRate());
    db.sets.push_back(AtfSet{"s1", 1, one, one, one, one, s});
    REQUIRE_THROWS_AS(train_ridge(db, 0.0), SingularityError);
    const RidgeModel model = train_ridge(db, 0.001);
    REQUIRE(model.gains[2] == cplx(0.0, 0.0));
  }
  SECTION("training input is guarded") {
    REQUIRE_THROWS_AS(train_ridge(AtfDatabase{}, 0.001), DataError);
    SeedStream stream(22, 4);
    const AtfDatabase db = random_db(stream, 2, 16);
    REQUIRE_THROWS_AS(train_ridge(db, -1.0), ConfigError);
  }
  SECTION("estimation is the trained gain applied per bin") {
    SeedStream stream(22, 5);
    const AtfDatabase db = random_db(stream, 3, 16);
    const RidgeModel model = train_ridge(db, 0.001);
    const FrequencyResponse probe = oracle::random_fr(stream, 16, SampleRate());
    const FrequencyResponse r_hat = estimate_ridge(model, probe);
    for (std::size_t k = 0; k < r_hat.n_bins(); ++k)
      REQUIRE(r_hat[k] == model.gains[k] * probe[k]);
    const FrequencyResponse wrong_grid = oracle::random_fr(stream, 32, SampleRate());
    REQUIRE_THROWS_AS(estimate_ridge(model, wrong_grid), DimensionError);
  }
}

TEST_CASE("subspace training yields a pinned orthonormal model") {
  SeedStream stream(23, 1);
  const AtfDatabase db = random_db(stream, 8, 64);
  const Band band{2000.0, 8000.0};
  const PcaModel model = train_pca(db, 3, band);

  SECTION("the model validates and keeps its shape") {
    REQUIRE_NOTHROW(model.validate());
    REQUIRE(model.k == 3);
    REQUIRE_FALSE(model.a_hat_regularized);
  }
  SECTION("bases are orthonormal") {
    const Eigen::MatrixXcd gram_s = model.u_s.adjoint() * model.u_s;
    const Eigen::MatrixXcd gram_r = model.u_r.adjoint() * model.u_r;
    REQUIRE((gram_s - Eigen::MatrixXcd::Identity(3, 3)).norm() < 1e-10);
    REQUIRE((gram_r - Eigen::MatrixXcd::Identity(3, 3)).norm() < 1e-10);
  }
  SECTION("each column's largest entry is pinned real positive") {
    for (const Eigen::MatrixXcd* u : {&model.u_s, &model.u_r}) {
      for (Eigen::Index col = 0; col < u->cols(); ++col) {
        Eigen::Index best = 0;
        for (Eigen::Index row = 1; row < u->rows(); ++row)
          if (std::abs((*u)(row, col)) > std::abs((*u)(best, col))) best = row;
        REQUIRE((*u)(best, col).real() > 0.0);
        REQUIRE(std::abs((*u)(best, col).imag()) < 1e-12);
      }
    }
  }
  SECTION("bases and means vanish outside the band") {
    for (std::size_t k = 0; k < model.s_mean.n_bins(); ++k) {
      if (band.contains(model.s_mean.bin_freq(k))) continue;
      REQUIRE(model.s_mean[k] == cplx(0.0, 0.0));
      REQUIRE(model.r_mean[k] == cplx(0.0, 0.0));
      for (Eigen::Index col = 0; col < 3; ++col) {
        REQUIRE(model.u_s(static_cast<Eigen::Index>(k), col) == cplx(0.0, 0.0));
        REQUIRE(model.u_r(static_cast<Eigen::Index>(k), col) == cplx(0.0, 0.0));
      }
    }
  }
  SECTION("training is bit-for-bit repeatable") {
    const PcaModel again = train_pca(db, 3, band);
    REQUIRE((model.u_s - again.u_s).norm() == 0.0);
    REQUIRE((model.u_r - again.u_r).norm() == 0.0);
    REQUIRE((model.a_hat - again.a_hat).norm() == 0.0);
    REQUIRE((model.g_s_mean - again.g_s_mean).norm() == 0.0);
  }
  SECTION("no subspace captures more energy than the leading components") {
    const Eigen::MatrixXcd s_c = centered_columns(db, model, false);
    const double captured = (model.u_s.adjoint() * s_c).squaredNorm();
    std::vector<Eigen::Index> in_band;
    for (std::size_t k = 0; k < model.s_mean.n_bins(); ++k)
      if (band.contains(model.s_mean.bin_freq(k)))
        in_band.push_back(static_cast<Eigen::Index>(k));
    SeedStream noise(23, 2);
    for (int trial = 0; trial < 30; ++trial) {
      Eigen::MatrixXcd candidate = Eigen::MatrixXcd::Zero(s_c.rows(), 3);
      for (Eigen::Index k : in_band)
        for (Eigen::Index col = 0; col < 3; ++col)
          candidate(k, col) = cplx(noise.uniform(-1.0, 1.0), noise.uniform(-1.0, 1.0));
      const Eigen::MatrixXcd q =
          Eigen::HouseholderQR<Eigen::MatrixXcd>(candidate).householderQ() *
          Eigen::MatrixXcd::Identity(s_c.rows(), 3);
      REQUIRE((q.adjoint() * s_c).squaredNorm() <= captured + 1e-8);
    }
  }
  SECTION("the gain mapping matches the oracle and minimizes its cost") {
    const Eigen::MatrixXcd g_s = model.u_s.adjoint() * centered_columns(db, model, false);
    const Eigen::MatrixXcd g_r = model.u_r.adjoint() * centered_columns(db, model, true);
    const Eigen::MatrixXcd expect = oracle::a_hat_from_gains(g_r, g_s);
    REQUIRE((model.a_hat - expect).norm() < 1e-8);

    const double best = mapping_cost(g_r, g_s, model.a_hat);
    SeedStream noise(23, 3);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::MatrixXcd delta(3, 3);
      for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j)
          delta(i, j) = cplx(noise.uniform(-1.0, 1.0), noise.uniform(-1.0, 1.0));
      delta *= 1e-3 / delta.norm();
      REQUIRE(best <= mapping_cost(g_r, g_s, model.a_hat + delta) + 1e-10);
    }
  }
  SECTION("training rejects impossible shapes") {
    REQUIRE_THROWS_AS(train_pca(db, 0, band), ConfigError);
    REQUIRE_THROWS_AS(train_pca(db, 9, band), ConfigError);
    AtfDatabase one;
    one.sets.push_back(db.sets.front());
    REQUIRE_THROWS_AS(train_pca(one, 1, band), DataError);
  }
}

TEST_CASE("identical training sets collapse to the mean predictor") {
  SeedStream stream(24, 1);
  const AtfSet proto = oracle::random_set(stream, 64);
  AtfDatabase db;
  for (int j = 0; j < 3; ++j) {
    AtfSet copy = proto;
    copy.subject_id = "s" + std::to_string(j + 1);
    db.sets.push_back(std::move(copy));
  }
  const Band band{2000.0, 8000.0};
  const PcaModel model = train_pca(db, 2, band);
  REQUIRE(model.a_hat_regularized);
  REQUIRE(model.a_hat.norm() == 0.0);

  const FrequencyResponse r_hat = estimate_pca(model, proto.s);
  const FrequencyResponse r_w = window_band(proto.r, band);
  for (std::size_t k = 0; k < r_hat.n_bins(); ++k)
    REQUIRE(std::abs(r_hat[k] - r_w[k]) < 1e-10);
}

TEST_CASE("an exact low-rank ensemble is recovered through the gain mapping") {
  SeedStream stream(25, 1);
  const Band band{2000.0, 8000.0};
  const oracle::RankKEnsemble ensemble = oracle::rank_k_ensemble(stream, 8, 3, 64, band);

  AtfDatabase training;
  for (int j = 0; j < 6; ++j) training.sets.push_back(ensemble.db.sets[static_cast<std::size_t>(j)]);

  const PcaModel model = train_pca(training, 3, band);
  for (std::size_t held : {std::size_t{6}, std::size_t{7}}) {
    const AtfSet& probe = ensemble.db.sets[held];
    const FrequencyResponse r_hat = estimate_pca(model, probe.s);
    for (std::size_t k = 0; k < r_hat.n_bins(); ++k)
      REQUIRE(std::abs(r_hat[k] - window_band(probe.r, band)[k]) < 1e-8);
  }
}

TEST_CASE("the combiner routes bins by frequency") {
  // Rigged models with unmistakable outputs: the ridge doubles its
  // input, the subspace model always answers its mean of 7.
  const int nf = 16;
  const auto nb = static_cast<Eigen::Index>(nf / 2 + 1);
  RidgeModel ridge{flat_fr(nf, {2.0, 0.0}), 0.001, 5000.0};
  PcaModel pca{1,
               Eigen::MatrixXcd::Zero(nb, 1),
               Eigen::MatrixXcd::Zero(nb, 1),
               flat_fr(nf, {0.0, 0.0}),
               flat_fr(nf, {7.0, 0.0}),
               Eigen::VectorXcd::Zero(1),
               Eigen::VectorXcd::Zero(1),
               Eigen::MatrixXcd::Zero(1, 1),
               Band{5000.0, 15000.0},
               false};
  const FrequencyResponse probe = flat_fr(nf, {1.0, 0.0});

  SECTION("each region answers with its own constituent") {
    const CombinedEstimator est{ridge, pca, 5000.0};
    REQUIRE_NOTHROW(est.validate());
    const FrequencyResponse out = estimate_combined(est, probe);
    for (std::size_t k = 0; k < out.n_bins(); ++k) {
      const double f = out.bin_freq(k);
      // The bin exactly at the split stays with the ridge.
      const bool ridge_bin = f <= 5000.0 || f > 15000.0;
      REQUIRE(out[k] == (ridge_bin ? cplx(2.0, 0.0) : cplx(7.0, 0.0)));
      REQUIRE(combiner_fallback_bin(est, f) == (f > 5000.0 && f > 15000.0));
    }
  }
  SECTION("a split above the grid sends every bin to the ridge") {
    const CombinedEstimator est{ridge, pca, 25000.0};
    const FrequencyResponse out = estimate_combined(est, probe);
    for (std::size_t k = 0; k < out.n_bins(); ++k) REQUIRE(out[k] == cplx(2.0, 0.0));
  }
  SECTION("a zero split leaves only DC and the tail to the ridge") {
    const CombinedEstimator est{ridge, pca, 0.0};
    const FrequencyResponse out = estimate_combined(est, probe);
    for (std::size_t k = 0; k < out.n_bins(); ++k) {
      const double f = out.bin_freq(k);
      const bool ridge_bin = f <= 0.0 || f > 15000.0;
      REQUIRE(out[k] == (ridge_bin ? cplx(2.0, 0.0) : cplx(7.0, 0.0)));
    }
  }
}

TEST_CASE("the trained combination recovers an in-span ensemble everywhere") {
  SeedStream stream(26, 1);
  const Band band{2000.0, 8000.0};
  const oracle::RankKEnsemble ensemble = oracle::rank_k_ensemble(stream, 8, 3, 64, band);

  AtfDatabase training;
  for (int j = 0; j < 6; ++j) training.sets.push_back(ensemble.db.sets[static_cast<std::size_t>(j)]);

  EstimatorConfig cfg;
  cfg.mu = 0.001;
  cfg.k = 3;
  cfg.split_hz = 2000.0;
  cfg.band_high_hz = 8000.0;
  const CombinedEstimator est = train_combined(training, cfg);

  SECTION("wiring carries the configured knobs") {
    REQUIRE(est.split_hz == 2000.0);
    REQUIRE(est.ridge.band_limit_hz == 2000.0);
    REQUIRE(est.ridge.mu == 0.001);
    REQUIRE(est.pca.band.low_hz == 2000.0);
    REQUIRE(est.pca.band.high_hz == 8000.0);
    REQUIRE(est.pca.k == 3);
  }
  SECTION("held-out sets are reproduced on the full grid") {
    // Outside the ensemble band both s and r vanish, so the ridge side
    // is exact there too; inside, the gain mapping carries the day.
    for (std::size_t held : {std::size_t{6}, std::size_t{7}}) {
      const AtfSet& probe = ensemble.db.sets[held];
      const FrequencyResponse r_hat = estimate_combined(est, probe.s);
      for (std::size_t k = 0; k < r_hat.n_bins(); ++k)
        REQUIRE(std::abs(r_hat[k] - probe.r[k]) < 1e-8);
    }
  }
}

TEST_CASE("estimator configuration is validated") {
  EstimatorConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.mu = -0.1;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EstimatorConfig{};
  cfg.k = 0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EstimatorConfig{};
  cfg.split_hz = -5.0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EstimatorConfig{};
  cfg.band_high_hz = cfg.split_hz;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}
