#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "heareq/ear_sim.hpp"
#include "heareq/eq_design.hpp"
#include "heareq/estimator.hpp"
#include "heareq/evaluate.hpp"
#include "heareq/io.hpp"
#include "heareq/spectra.hpp"

namespace heareq::cli {

using io::json;

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kToolVersion = "1.0.0";

// Resolved settings of one invocation. Defaults are the published
// operating point: mu = 0.001, d_proc = 1.6 ms, Nt = 64, K = 12,
// split = 1.5 kHz, PCA band up to 8 kHz, 40 kHz rate, 18 x 3 sets.
struct RunConfig {
  std::string database_dir;
  std::string output;
  std::string model_path;
  std::string subject;
  int trial = 1;
  std::string r_source = "pca";

  double mu_est = 0.001;
  int k = 12;
  double split_hz = 1500.0;
  double band_high_hz = 8000.0;

  double mu = 0.001;
  double d_proc_seconds = 0.0016;
  int taps_nt = 64;
  int fft_size = 1024;

  int n_subjects = 18;
  int n_trials = 3;
  std::uint64_t seed = 0;
  double rate_hz = 40000.0;

  bool force = false;
  bool check = false;

  EstimatorConfig estimator() const {
    EstimatorConfig cfg{mu_est, k, split_hz, band_high_hz};
    cfg.validate();
    return cfg;
  }
  EqDesignConfig eq() const {
    EqDesignConfig cfg{mu, d_proc_seconds, taps_nt, fft_size};
    cfg.validate();
    return cfg;
  }
  GeneratorConfig generator() const {
    GeneratorConfig cfg{n_subjects, n_trials, seed, SampleRate(rate_hz), fft_size};
    cfg.validate();
    return cfg;
  }
};

inline json config_echo(const RunConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["database_dir"] = cfg.database_dir;
  j["output"] = cfg.output;
  j["estimator"] = {{"mu_est", cfg.mu_est},
                    {"k", cfg.k},
                    {"split_hz", cfg.split_hz},
                    {"band_high_hz", cfg.band_high_hz}};
  j["eq"] = {{"mu", cfg.mu},
             {"d_proc_seconds", cfg.d_proc_seconds},
             {"taps_nt", cfg.taps_nt},
             {"fft_size", cfg.fft_size}};
  j["generator"] = {{"n_subjects", cfg.n_subjects},
                    {"n_trials", cfg.n_trials},
                    {"seed", cfg.seed},
                    {"rate_hz", cfg.rate_hz},
                    {"fft_size", cfg.fft_size}};
  return j;
}

inline std::string version_text() {
  json j = config_echo(RunConfig{});
  j.erase("database_dir");
  j.erase("output");
  j["schemas"] = {io::kDbSchema, io::kFilterSchema, io::kModelSchema, io::kReportSchema};
  return std::string("heareq ") + kToolVersion + "\n" + j.dump(2) + "\n";
}

// Adopt the database grid; an explicitly given --nf that contradicts it
// is a configuration mistake rather than something to guess around.
inline EqDesignConfig resolve_eq(const RunConfig& cfg, const AtfDatabase& db,
                                 bool nf_explicit) {
  EqDesignConfig eq = cfg.eq();
  if (nf_explicit && eq.fft_size != db.sets.front().fft_size())
    throw ConfigError("requested fft size " + std::to_string(eq.fft_size) +
                      " does not match the database grid " +
                      std::to_string(db.sets.front().fft_size()));
  eq.fft_size = db.sets.front().fft_size();
  eq.validate();
  return eq;
}

inline void cmd_synth(const RunConfig& cfg) {
  const AtfDatabase db = generate_database(cfg.generator());
  io::ensure_output_dir(cfg.output, cfg.force);
  const json echo = config_echo(cfg);
  io::save_database(db, cfg.output, &echo);
  std::cout << "synth: wrote " << db.J() << " sets to " << cfg.output << " (db "
            << database_fingerprint(db) << ")\n";
}

inline void cmd_train(const RunConfig& cfg) {
  const io::LoadedDatabase loaded = io::load_database(cfg.database_dir);
  const CombinedEstimator est = train_combined(loaded.db, cfg.estimator());
  if (est.pca.a_hat_regularized)
    std::cerr << "heareq: warning: singular gain covariance; mapping was "
                 "ridge-regularized\n";
  json j = io::model_to_json(est, database_fingerprint(loaded.db));
  j["run_config"] = config_echo(cfg);
  io::write_text_file(cfg.output, j.dump(2) + "\n");
  std::cout << "train: wrote model " << cfg.output << " (J = " << loaded.db.J() << ")\n";
}

namespace detail {

inline const AtfSet& find_set(const AtfDatabase& db, const std::string& subject, int trial) {
  for (const AtfSet& set : db.sets)
    if (set.subject_id == subject && set.trial == trial) return set;
  throw DataError("no set for subject '" + subject + "' trial " + std::to_string(trial));
}

inline AtfDatabase without_subject(const AtfDatabase& db, const std::string& subject) {
  AtfDatabase out;
  for (const AtfSet& set : db.sets)
    if (set.subject_id != subject) out.sets.push_back(set);
  return out;
}

}  // namespace detail

inline void cmd_design(const RunConfig& cfg, bool nf_explicit = false) {
  const io::LoadedDatabase loaded = io::load_database(cfg.database_dir);
  const AtfSet& set = detail::find_set(loaded.db, cfg.subject, cfg.trial);
  const EqDesignConfig eq = resolve_eq(cfg, loaded.db, nf_explicit);

  EqFilter filter = [&] {
    if (cfg.r_source == "true") return design_time_ls(set, eq);
    if (cfg.r_source == "sp")
      return design_time_ls_estimated(set, set.s, eq, RSource::SecondaryPathAsR);
    if (cfg.r_source != "pca")
      throw ConfigError("unknown --r-source '" + cfg.r_source + "'");
    CombinedEstimator est = [&] {
      if (!cfg.model_path.empty()) return io::load_model(cfg.model_path).est;
      return train_combined(detail::without_subject(loaded.db, cfg.subject),
                            cfg.estimator());
    }();
    return design_time_ls_estimated(set, estimate_combined(est, set.s), eq);
  }();

  json j = io::filter_to_json(filter, set.rate());
  j["run_config"] = config_echo(cfg);
  io::write_text_file(cfg.output, j.dump(2) + "\n");

  // Diagnostic: the true r, the r the design used, the estimation error,
  // and whether the bin came from the combiner's above-band fallback.
  const FrequencyResponse r_used = [&] {
    if (cfg.r_source == "true") return set.r;
    if (cfg.r_source == "sp") return set.s;
    if (!cfg.model_path.empty())
      return estimate_combined(io::load_model(cfg.model_path).est, set.s);
    return estimate_combined(
        train_combined(detail::without_subject(loaded.db, cfg.subject), cfg.estimator()),
        set.s);
  }();
  const LevelError err = level_error(set.r, r_used);
  std::string diag = "freq_hz,re_r,im_r,re_rhat,im_rhat,eps_db,fallback\n";
  for (std::size_t bin = 0; bin < set.r.n_bins(); ++bin) {
    const double f = set.r.bin_freq(bin);
    const bool fallback =
        cfg.r_source == "pca" && f > cfg.split_hz && f > cfg.band_high_hz;
    diag += io::format_double(f) + ',' + io::format_double(set.r[bin].real()) + ',' +
            io::format_double(set.r[bin].imag()) + ',' +
            io::format_double(r_used[bin].real()) + ',' +
            io::format_double(r_used[bin].imag()) + ',' + io::format_double(err.db[bin]) +
            ',' + (fallback ? "1" : "0") + '\n';
  }
  io::fs::path diag_path(cfg.output);
  diag_path.replace_extension();
  diag_path += "_diag.csv";
  io::write_text_file(diag_path, diag);
  std::cout << "design: wrote " << cfg.output << " and " << diag_path.string() << "\n";
}

namespace detail {

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline void check_report(const EvalReport& report) {
  const EvalSummary redo = summarize(report);
  if (redo.conditions.size() != report.summary.conditions.size())
    throw InvariantError("check: summary shape drifted");
  for (std::size_t i = 0; i < redo.conditions.size(); ++i) {
    const ConditionSummary& a = redo.conditions[i];
    const ConditionSummary& b = report.summary.conditions[i];
    if (a.condition != b.condition || a.curve.mean_db.size() != b.curve.mean_db.size() ||
        a.bands.size() != b.bands.size())
      throw InvariantError("check: summary shape drifted");
    for (std::size_t k = 0; k < a.curve.mean_db.size(); ++k)
      if (!close(a.curve.mean_db[k], b.curve.mean_db[k], 1e-12) ||
          !close(a.curve.std_db[k], b.curve.std_db[k], 1e-12))
        throw InvariantError("check: aggregated curves do not reproduce");
    for (std::size_t k = 0; k < a.bands.size(); ++k)
      if (!close(a.bands[k].mean_abs_err_db, b.bands[k].mean_abs_err_db, 1e-12) ||
          !close(a.bands[k].std_db, b.bands[k].std_db, 1e-12))
        throw InvariantError("check: band statistics do not reproduce");
  }
  std::vector<std::pair<std::string, int>> seen;
  for (const EvalReport::SetResult& set : report.sets) {
    const auto key = std::make_pair(set.subject_id, set.trial);
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      throw InvariantError("check: set evaluated twice");
    seen.push_back(key);
    if (set.conditions.size() != kConditions.size())
      throw InvariantError("check: missing conditions for a set");
    for (const ConditionReport& r : set.conditions)
      if (r.condition == Condition::OpenEar)
        for (double v : r.error_curve.mean_db)
          if (v != 0.0) throw InvariantError("check: open-ear error is not zero");
  }
}

}  // namespace detail

inline void cmd_eval(const RunConfig& cfg, bool nf_explicit = false) {
  const io::LoadedDatabase loaded = io::load_database(cfg.database_dir);
  const EqDesignConfig eq = resolve_eq(cfg, loaded.db, nf_explicit);
  const EvalReport report = leave_one_out(loaded.db, cfg.estimator(), eq);
  if (cfg.check) detail::check_report(report);

  io::ensure_output_dir(cfg.output, cfg.force);
  const io::fs::path dir(cfg.output);
  io::write_text_file(dir / "bands.csv", io::render_bands_csv(report));
  io::write_text_file(dir / "summary.csv", io::render_summary_csv(report.summary));
  for (const ConditionSummary& cs : report.summary.conditions)
    io::write_text_file(dir / (std::string("curve_") + to_string(cs.condition) + ".csv"),
                        io::render_curve_csv(cs.curve));

  json j;
  j["schema"] = io::kReportSchema;
  j["run_config"] = config_echo(cfg);
  j["config_fingerprint"] = report.config_fingerprint;
  j["n_sets"] = report.sets.size();
  j["flagged_bins"] = report.summary.total_flagged;
  io::write_text_file(dir / "report.json", j.dump(2) + "\n");

  std::cout << "eval: " << report.sets.size() << " sets, report in " << cfg.output << "\n";
  for (const ConditionSummary& cs : report.summary.conditions)
    for (const BandStat& stat : cs.bands)
      if (stat.band.low_hz == 1500.0)
        std::cout << "  " << to_string(cs.condition) << " 1.5-6 kHz mean |err| = "
                  << io::format_double(stat.mean_abs_err_db) << " dB\n";
}

inline int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  return 3;
}

inline const char* category_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const NumericalError*>(&e)) return "numeric";
  return "data";
}

inline int run(int argc, const char* const* argv) {
  RunConfig cfg;
  CLI::App app{"hear-through equalization toolkit"};
  app.set_version_flag("--version", version_text);
  app.set_config("--config");
  app.require_subcommand(1);

  auto add_estimator_flags = [&](CLI::App* c) {
    c->add_option("--mu-est", cfg.mu_est, "estimator ridge weight");
    c->add_option("--k", cfg.k, "PCA component count");
    c->add_option("--split", cfg.split_hz, "estimator split frequency in Hz");
    c->add_option("--band-high", cfg.band_high_hz, "upper edge of the PCA band in Hz");
  };
  auto add_eq_flags = [&](CLI::App* c) -> CLI::Option* {
    c->add_option("--mu", cfg.mu, "design regularization weight");
    c->add_option("--d-proc", cfg.d_proc_seconds, "causality shift in seconds");
    c->add_option("--taps", cfg.taps_nt, "filter length in taps");
    return c->add_option("--nf", cfg.fft_size, "fft size (must match the database)");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic database");
  synth->add_option("--out", cfg.output, "output directory")->required();
  synth->add_option("--subjects", cfg.n_subjects, "number of subjects");
  synth->add_option("--trials", cfg.n_trials, "reinsertion trials per subject");
  synth->add_option("--seed", cfg.seed, "generator seed");
  synth->add_option("--rate", cfg.rate_hz, "sample rate in Hz");
  synth->add_option("--nf", cfg.fft_size, "fft size");
  synth->add_flag("--force", cfg.force, "overwrite a non-empty output directory");

  CLI::App* train = app.add_subcommand("train", "train the combined estimator");
  train->add_option("--db", cfg.database_dir, "database directory")->required();
  train->add_option("--out", cfg.output, "model file")->required();
  add_estimator_flags(train);

  CLI::App* design = app.add_subcommand("design", "design one equalization filter");
  design->add_option("--db", cfg.database_dir, "database directory")->required();
  design->add_option("--subject", cfg.subject, "subject id")->required();
  design->add_option("--trial", cfg.trial, "trial index");
  design->add_option("--out", cfg.output, "filter file")->required();
  design->add_option("--model", cfg.model_path, "trained model file (default: train on "
                                                "the other subjects)");
  design->add_option("--r-source", cfg.r_source, "which r the design uses")
      ->check(CLI::IsMember({"true", "sp", "pca"}));
  add_estimator_flags(design);
  CLI::Option* design_nf = add_eq_flags(design);

  CLI::App* eval = app.add_subcommand("eval", "leave-one-out condition comparison");
  eval->add_option("--db", cfg.database_dir, "database directory")->required();
  eval->add_option("--out", cfg.output, "report directory")->required();
  eval->add_flag("--force", cfg.force, "overwrite a non-empty report directory");
  eval->add_flag("--check", cfg.check, "re-verify report invariants");
  add_estimator_flags(eval);
  CLI::Option* eval_nf = add_eq_flags(eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) cmd_synth(cfg);
    if (train->parsed()) cmd_train(cfg);
    if (design->parsed()) cmd_design(cfg, design_nf->count() > 0);
    if (eval->parsed()) cmd_eval(cfg, eval_nf->count() > 0);
    return 0;
  } catch (const Error& e) {
    std::cerr << "heareq: error: " << category_for(e) << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "heareq: error: internal: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace heareq::cli
