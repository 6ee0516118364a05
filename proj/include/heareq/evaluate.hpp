#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "heareq/digest.hpp"
#include "heareq/eq_design.hpp"
#include "heareq/estimator.hpp"
#include "heareq/spectra.hpp"

namespace heareq {

enum class Condition { OpenEar, Occluded, PerfectEq, IdvPca, IdvSp, Gls };

inline constexpr std::array<Condition, 6> kConditions = {
    Condition::OpenEar, Condition::Occluded, Condition::PerfectEq,
    Condition::IdvPca,  Condition::IdvSp,    Condition::Gls};

inline const char* to_string(Condition c) {
  switch (c) {
    case Condition::OpenEar: return "open_ear";
    case Condition::Occluded: return "occluded";
    case Condition::PerfectEq: return "perfect_eq";
    case Condition::IdvPca: return "idv_pca";
    case Condition::IdvSp: return "idv_sp";
    case Condition::Gls: return "gls";
  }
  return "?";
}

// Per-bin level difference 10 log10 |truth|^2 - 10 log10 |estimate|^2.
// Bins where either magnitude is degenerate are computed against a
// clamped magnitude and flagged instead of being dropped.
struct LevelError {
  std::vector<double> db;
  std::vector<char> flagged;
};

inline LevelError level_error(const FrequencyResponse& truth,
                              const FrequencyResponse& estimate) {
  require_same_grid(truth, estimate, "level error");
  constexpr double kFloor = 1e-12;
  bool truth_alive = false;
  bool estimate_alive = false;
  LevelError out;
  out.db.resize(truth.n_bins());
  out.flagged.resize(truth.n_bins(), 0);
  for (std::size_t k = 0; k < truth.n_bins(); ++k) {
    const double mt = std::abs(truth[k]);
    const double me = std::abs(estimate[k]);
    truth_alive = truth_alive || mt >= kFloor;
    estimate_alive = estimate_alive || me >= kFloor;
    if (mt < kFloor || me < kFloor) out.flagged[k] = 1;
    out.db[k] = 20.0 * (std::log10(std::max(mt, kFloor)) - std::log10(std::max(me, kFloor)));
  }
  if (!truth_alive || !estimate_alive)
    throw DataError("level error: an input spectrum is zero everywhere");
  return out;
}

struct BandErrorCurve {
  std::vector<double> freqs_hz;
  std::vector<double> mean_db;
  std::vector<double> std_db;
};

struct ConditionReport {
  Condition condition;
  std::string subject_id;
  int trial = 1;
  AidedResponse aided;
  BandErrorCurve error_curve;  // per-set curve: mean_db holds the error, std_db is zero
  std::vector<char> flagged;
};

struct BandStat {
  Band band;
  double mean_abs_err_db = 0.0;
  double std_db = 0.0;
  std::size_t n_used = 0;
  std::size_t n_flagged = 0;
};

struct ConditionSummary {
  Condition condition;
  BandErrorCurve curve;  // mean and std across sets, per bin
  std::vector<BandStat> bands;
};

struct EvalSummary {
  std::vector<ConditionSummary> conditions;
  std::size_t total_flagged = 0;
};

struct EvalReport {
  struct SetResult {
    std::string subject_id;
    int trial = 1;
    std::vector<ConditionReport> conditions;
  };
  std::vector<SetResult> sets;
  EvalSummary summary;
  std::string config_fingerprint;
};

inline std::vector<Band> standard_bands() {
  return {Band{0.0, 1500.0}, Band{1500.0, 6000.0}, Band{6000.0, 8000.0}};
}

namespace detail {

// A bin belongs to the first band that contains its frequency, so
// shared edges are counted once.
inline const Band* owning_band(const std::vector<Band>& bands, double freq_hz) {
  for (const Band& b : bands)
    if (b.contains(freq_hz)) return &b;
  return nullptr;
}

inline void collect_band_values(const BandErrorCurve& curve, const std::vector<char>& flagged,
                                const std::vector<Band>& bands, const Band& band,
                                std::vector<double>& abs_values, std::size_t& n_flagged) {
  for (std::size_t k = 0; k < curve.freqs_hz.size(); ++k) {
    if (owning_band(bands, curve.freqs_hz[k]) != &band) continue;
    if (!flagged.empty() && flagged[k]) {
      ++n_flagged;
      continue;
    }
    abs_values.push_back(std::abs(curve.mean_db[k]));
  }
}

inline std::pair<double, double> mean_and_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

}  // namespace detail

// Per-band statistics of one error curve: mean and population std of
// the absolute error over the band's bins, flagged bins excluded.
inline std::vector<BandStat> band_stats(const BandErrorCurve& curve,
                                        const std::vector<char>& flagged,
                                        const std::vector<Band>& bands) {
  std::vector<BandStat> out;
  for (const Band& band : bands) {
    BandStat stat;
    stat.band = band;
    std::vector<double> values;
    detail::collect_band_values(curve, flagged, bands, band, values, stat.n_flagged);
    stat.n_used = values.size();
    const auto [mean, sd] = detail::mean_and_std(values);
    stat.mean_abs_err_db = mean;
    stat.std_db = sd;
    out.push_back(std::move(stat));
  }
  return out;
}

inline std::string database_fingerprint(const AtfDatabase& db) {
  Digest d;
  d.add(static_cast<std::uint64_t>(db.J()));
  for (const AtfSet& set : db.sets) {
    d.add(set.subject_id).add(set.trial);
    d.add(set.o.fft_size()).add(set.o.rate().hertz);
    for (const FrequencyResponse* fr : {&set.o, &set.c, &set.m, &set.r, &set.s})
      d.add(fr->bins());
  }
  return d.hex();
}

// All six conditions for one held-out set. The training database must
// not contain the held-out subject; the common GLS filter may be passed
// in when the caller evaluates several sets against the same fold.
inline std::vector<ConditionReport> evaluate_conditions(
    const AtfSet& set, const CombinedEstimator& models, const AtfDatabase& training,
    const EqDesignConfig& eq_cfg, const EqFilter* gls_filter = nullptr) {
  set.validate();
  models.validate();
  eq_cfg.validate();
  training.validate();
  for (const AtfSet& t : training.sets)
    if (t.subject_id == set.subject_id)
      throw ContractError("evaluation: held-out subject '" + set.subject_id +
                          "' appears in the training data");

  std::vector<ConditionReport> out;
  out.reserve(kConditions.size());
  auto push = [&](Condition condition, AidedResponse aided) {
    LevelError err = level_error(set.o, aided.bins);
    BandErrorCurve curve;
    curve.freqs_hz.resize(set.o.n_bins());
    for (std::size_t k = 0; k < curve.freqs_hz.size(); ++k)
      curve.freqs_hz[k] = set.o.bin_freq(k);
    curve.mean_db = std::move(err.db);
    curve.std_db.assign(curve.freqs_hz.size(), 0.0);
    out.push_back(ConditionReport{condition, set.subject_id, set.trial, std::move(aided),
                                  std::move(curve), std::move(err.flagged)});
  };

  push(Condition::OpenEar, AidedResponse{set.o});
  const EqFilter zero(std::vector<double>(static_cast<std::size_t>(eq_cfg.taps_nt), 0.0),
                      eq_cfg, RSource::TrueR);
  push(Condition::Occluded, aided_response(set, zero));
  push(Condition::PerfectEq, aided_response(set, design_time_ls(set, eq_cfg)));
  const FrequencyResponse r_hat = estimate_combined(models, set.s);
  push(Condition::IdvPca, aided_response(set, design_time_ls_estimated(set, r_hat, eq_cfg)));
  push(Condition::IdvSp, aided_response(set, design_time_ls_estimated(
                             set, set.s, eq_cfg, RSource::SecondaryPathAsR)));
  if (gls_filter)
    push(Condition::Gls, aided_response(set, *gls_filter));
  else
    push(Condition::Gls, aided_response(set, design_gls(training, eq_cfg)));
  return out;
}

// Mean and std across sets per bin and per band, with flagged bins left
// out of the statistics but counted.
inline EvalSummary summarize(const EvalReport& report) {
  if (report.sets.empty()) throw DataError("summarize: empty report");

  EvalSummary summary;
  const std::vector<Band> bands = standard_bands();
  for (Condition condition : kConditions) {
    std::vector<const ConditionReport*> reports;
    for (const EvalReport::SetResult& set : report.sets)
      for (const ConditionReport& r : set.conditions)
        if (r.condition == condition) reports.push_back(&r);
    if (reports.empty()) continue;

    const std::vector<double>& freqs = reports.front()->error_curve.freqs_hz;
    for (const ConditionReport* r : reports)
      if (r->error_curve.freqs_hz != freqs)
        throw DimensionError("summarize: condition curves on different grids");

    ConditionSummary cs;
    cs.condition = condition;
    cs.curve.freqs_hz = freqs;
    cs.curve.mean_db.resize(freqs.size(), 0.0);
    cs.curve.std_db.resize(freqs.size(), 0.0);
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const ConditionReport* r : reports) {
        if (r->flagged[k]) continue;
        sum += r->error_curve.mean_db[k];
        ++n;
      }
      const double mean = n ? sum / static_cast<double>(n) : 0.0;
      double var = 0.0;
      for (const ConditionReport* r : reports) {
        if (r->flagged[k]) continue;
        const double d = r->error_curve.mean_db[k] - mean;
        var += d * d;
      }
      cs.curve.mean_db[k] = mean;
      cs.curve.std_db[k] = n ? std::sqrt(var / static_cast<double>(n)) : 0.0;
    }

    for (const Band& band : bands) {
      BandStat stat;
      stat.band = band;
      std::vector<double> values;
      for (const ConditionReport* r : reports)
        detail::collect_band_values(r->error_curve, r->flagged, bands, band, values,
                                    stat.n_flagged);
      stat.n_used = values.size();
      const auto [mean, sd] = detail::mean_and_std(values);
      stat.mean_abs_err_db = mean;
      stat.std_db = sd;
      summary.total_flagged += stat.n_flagged;
      cs.bands.push_back(stat);
    }
    summary.conditions.push_back(std::move(cs));
  }
  return summary;
}

// Subject-level folds: all trials of the held-out subject leave the
// training data together.
inline EvalReport leave_one_out(const AtfDatabase& db, const EstimatorConfig& est_cfg,
                                const EqDesignConfig& eq_cfg) {
  db.validate();
  est_cfg.validate();
  eq_cfg.validate();
  if (db.J() < 2) throw DataError("leave-one-out: need at least two sets");

  std::vector<std::string> subjects;
  for (const AtfSet& set : db.sets)
    if (std::find(subjects.begin(), subjects.end(), set.subject_id) == subjects.end())
      subjects.push_back(set.subject_id);
  if (subjects.size() < 2)
    throw DataError("leave-one-out: need at least two distinct subjects");

  EvalReport report;
  for (const std::string& held_out : subjects) {
    AtfDatabase training;
    for (const AtfSet& set : db.sets)
      if (set.subject_id != held_out) training.sets.push_back(set);

    const CombinedEstimator models = train_combined(training, est_cfg);
    const EqFilter gls = design_gls(training, eq_cfg);
    for (const AtfSet& set : db.sets) {
      if (set.subject_id != held_out) continue;
      EvalReport::SetResult result;
      result.subject_id = set.subject_id;
      result.trial = set.trial;
      result.conditions = evaluate_conditions(set, models, training, eq_cfg, &gls);
      report.sets.push_back(std::move(result));
    }
  }

  report.summary = summarize(report);
  Digest d;
  d.add(est_cfg.mu).add(est_cfg.k).add(est_cfg.split_hz).add(est_cfg.band_high_hz);
  d.add(eq_cfg.mu).add(eq_cfg.d_proc_seconds).add(eq_cfg.taps_nt).add(eq_cfg.fft_size);
  d.add(database_fingerprint(db));
  report.config_fingerprint = d.hex();
  return report;
}

}  // namespace heareq
