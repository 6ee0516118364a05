// End-to-end walkthrough on a small synthetic corpus: generate ears,
// train the estimator, design filters for a held-out subject, and
// compare the equalization conditions against the open ear.

#include <cstdio>

#include "heareq/ear_sim.hpp"
#include "heareq/eq_design.hpp"
#include "heareq/estimator.hpp"
#include "heareq/evaluate.hpp"

using namespace heareq;

namespace {

double band_mean_abs(const BandErrorCurve& curve, const std::vector<char>& flagged,
                     Band band) {
  std::vector<BandStat> stats = band_stats(curve, flagged, {band});
  return stats.front().mean_abs_err_db;
}

}  // namespace

int main() {
  GeneratorConfig gen;
  gen.n_subjects = 8;
  gen.n_trials = 2;
  gen.seed = 7;
  const AtfDatabase db = generate_database(gen);
  std::printf("corpus: %zu sets on a %d-point grid at %.0f Hz\n", db.J(),
              db.sets.front().fft_size(), db.sets.front().rate().hertz);

  const AtfSet& probe = db.sets.front();
  AtfDatabase training;
  for (const AtfSet& set : db.sets)
    if (set.subject_id != probe.subject_id) training.sets.push_back(set);

  EstimatorConfig est_cfg;
  const CombinedEstimator est = train_combined(training, est_cfg);
  const FrequencyResponse r_hat = estimate_combined(est, probe.s);

  const Band speech{1500.0, 6000.0};
  const LevelError pca_err = level_error(probe.r, r_hat);
  const LevelError sp_err = level_error(probe.r, probe.s);
  BandErrorCurve curve;
  curve.freqs_hz.resize(probe.r.n_bins());
  for (std::size_t k = 0; k < curve.freqs_hz.size(); ++k)
    curve.freqs_hz[k] = probe.r.bin_freq(k);
  curve.std_db.assign(curve.freqs_hz.size(), 0.0);

  curve.mean_db = pca_err.db;
  std::printf("estimating r for held-out %s trial %d:\n", probe.subject_id.c_str(),
              probe.trial);
  std::printf("  combined estimator: %.2f dB mean |error| in 1.5-6 kHz\n",
              band_mean_abs(curve, pca_err.flagged, speech));
  curve.mean_db = sp_err.db;
  std::printf("  raw secondary path: %.2f dB mean |error| in 1.5-6 kHz\n",
              band_mean_abs(curve, sp_err.flagged, speech));

  EqDesignConfig eq_cfg;
  const EvalReport report = leave_one_out(db, est_cfg, eq_cfg);
  std::printf("\nleave-one-out over %zu sets, aided vs open ear, 1.5-6 kHz:\n",
              report.sets.size());
  for (const ConditionSummary& cs : report.summary.conditions)
    for (const BandStat& stat : cs.bands)
      if (stat.band.low_hz == 1500.0)
        std::printf("  %-10s %6.2f dB mean |err|  (std %.2f dB)\n",
                    to_string(cs.condition), stat.mean_abs_err_db, stat.std_db);
  return 0;
}
