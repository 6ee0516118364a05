#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "heareq/digest.hpp"
#include "heareq/eq_design.hpp"
#include "heareq/estimator.hpp"
#include "heareq/evaluate.hpp"
#include "heareq/spectra.hpp"

namespace heareq::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kDbSchema = "heareq-db-1";
inline constexpr const char* kFilterSchema = "heareq-filter-1";
inline constexpr const char* kModelSchema = "heareq-model-1";
inline constexpr const char* kReportSchema = "heareq-report-1";

// 17 significant digits round-trip any double exactly, which is what
// keeps rerun outputs byte-identical.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& token, const std::string& where) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0'))
    throw SchemaError(where + ": bad number '" + token + "'");
  return v;
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed for " + path.string());
}

inline json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

// The caller decides whether clobbering an existing non-empty directory
// is intended.
inline void ensure_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir))
    throw ConfigError(dir.string() + " exists and is not a directory");
  if (fs::is_directory(dir) && !fs::is_empty(dir) && !force)
    throw ConfigError(dir.string() + " is not empty (use --force to overwrite)");
  fs::create_directories(dir);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  for (std::string& tok : out) {
    const auto a = tok.find_first_not_of(' ');
    const auto b = tok.find_last_not_of(' ');
    tok = a == std::string::npos ? std::string() : tok.substr(a, b - a + 1);
  }
  return out;
}

inline json complex_to_json(const cplx& v) { return json::array({v.real(), v.imag()}); }

inline cplx complex_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw SchemaError(where + ": complex values must be [re, im] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json bins_to_json(const std::vector<cplx>& bins) {
  json out = json::array();
  for (const cplx& v : bins) out.push_back(complex_to_json(v));
  return out;
}

inline std::vector<cplx> bins_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of [re, im] pairs");
  std::vector<cplx> out;
  out.reserve(j.size());
  for (const json& e : j) out.push_back(complex_from_json(e, where));
  return out;
}

inline json matrix_to_json(const Eigen::MatrixXcd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXcd matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw SchemaError(where + ": expected a nonempty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols)
      throw SchemaError(where + ": ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = complex_from_json(j[r][c], where);
  }
  return m;
}

inline json vector_to_json(const Eigen::VectorXcd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v[i]));
  return out;
}

inline Eigen::VectorXcd vector_from_json(const json& j, const std::string& where) {
  const std::vector<cplx> bins = bins_from_json(j, where);
  return Eigen::Map<const Eigen::VectorXcd>(bins.data(), static_cast<Eigen::Index>(bins.size()));
}

inline std::string require_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string())
    throw SchemaError(where + ": missing string field '" + key + "'");
  return j[key].get<std::string>();
}

inline double require_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number())
    throw SchemaError(where + ": missing numeric field '" + key + "'");
  return j[key].get<double>();
}

inline int require_int(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number_integer())
    throw SchemaError(where + ": missing integer field '" + key + "'");
  return j[key].get<int>();
}

inline void require_schema(const json& j, const char* expected, const std::string& where) {
  if (require_string(j, "schema", where) != expected)
    throw SchemaError(where + ": expected schema '" + expected + "'");
}

inline std::string safe_file_stem(const std::string& subject_id, int trial) {
  std::string out;
  for (char ch : subject_id)
    out += (std::isalnum(static_cast<unsigned char>(ch)) != 0) ? ch : '_';
  return out + "_t" + std::to_string(trial);
}

}  // namespace detail

// One-sided spectra of a set, one row per bin.
inline std::string render_spectrum_csv(const AtfSet& set) {
  std::string out = "bin_index,re_o,im_o,re_c,im_c,re_m,im_m,re_r,im_r,re_s,im_s\n";
  for (std::size_t k = 0; k < set.o.n_bins(); ++k) {
    out += std::to_string(k);
    for (const FrequencyResponse* fr : {&set.o, &set.c, &set.m, &set.r, &set.s}) {
      out += ',' + format_double((*fr)[k].real());
      out += ',' + format_double((*fr)[k].imag());
    }
    out += '\n';
  }
  return out;
}

namespace detail {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<int> line_numbers;
};

inline CsvTable parse_numeric_csv(const std::string& content, const std::string& where,
                                  std::size_t n_cols) {
  CsvTable table;
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> tokens = split_csv_line(line);
    if (line_no == 1) {
      table.header = std::move(tokens);
      if (table.header.size() != n_cols)
        throw SchemaError(where + ":1: expected " + std::to_string(n_cols) + " columns");
      continue;
    }
    if (tokens.size() != n_cols)
      throw SchemaError(where + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(n_cols) + " columns");
    std::vector<double> row;
    row.reserve(n_cols);
    for (const std::string& tok : tokens)
      row.push_back(parse_double(tok, where + ":" + std::to_string(line_no)));
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) throw SchemaError(where + ": empty file");
  return table;
}

inline FrequencyResponse column_pair_to_fr(const CsvTable& t, std::size_t first_col, int nf,
                                           SampleRate rate, const std::string& where) {
  std::vector<cplx> bins;
  bins.reserve(t.rows.size());
  for (const auto& row : t.rows) bins.push_back({row[first_col], row[first_col + 1]});
  try {
    return FrequencyResponse(std::move(bins), nf, rate);
  } catch (const Error& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

}  // namespace detail

inline AtfSet parse_spectrum_csv(const std::string& content, const std::string& subject_id,
                                 int trial, int nf, SampleRate rate,
                                 const std::string& where) {
  const detail::CsvTable t = detail::parse_numeric_csv(content, where, 11);
  if (t.rows.size() != static_cast<std::size_t>(nf / 2 + 1))
    throw SchemaError(where + ": expected " + std::to_string(nf / 2 + 1) + " bins, found " +
                      std::to_string(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (t.rows[i][0] != static_cast<double>(i))
      throw SchemaError(where + ":" + std::to_string(t.line_numbers[i]) +
                        ": bin_index out of order");
  AtfSet set{subject_id, trial,
             detail::column_pair_to_fr(t, 1, nf, rate, where),
             detail::column_pair_to_fr(t, 3, nf, rate, where),
             detail::column_pair_to_fr(t, 5, nf, rate, where),
             detail::column_pair_to_fr(t, 7, nf, rate, where),
             detail::column_pair_to_fr(t, 9, nf, rate, where)};
  set.validate();
  return set;
}

// Time-domain alternative: real samples per path, transformed here.
inline AtfSet parse_impulse_csv(const std::string& content, const std::string& subject_id,
                                int trial, int nf, SampleRate rate,
                                const std::string& where) {
  const detail::CsvTable t = detail::parse_numeric_csv(content, where, 6);
  if (t.rows.size() > static_cast<std::size_t>(nf))
    throw SchemaError(where + ": more samples than the fft size " + std::to_string(nf));
  auto column_to_fr = [&](std::size_t col) {
    std::vector<double> taps;
    taps.reserve(t.rows.size());
    for (const auto& row : t.rows) taps.push_back(row[col]);
    try {
      return ir_to_fr(ImpulseResponse(std::move(taps), rate), nf);
    } catch (const Error& e) {
      throw SchemaError(where + ": " + e.what());
    }
  };
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (t.rows[i][0] != static_cast<double>(i))
      throw SchemaError(where + ":" + std::to_string(t.line_numbers[i]) +
                        ": sample_index out of order");
  AtfSet set{subject_id, trial,      column_to_fr(1), column_to_fr(2),
             column_to_fr(3), column_to_fr(4), column_to_fr(5)};
  set.validate();
  return set;
}

inline void save_database(const AtfDatabase& db, const fs::path& dir,
                          const json* generator_echo = nullptr) {
  db.validate();
  if (db.sets.empty()) throw DataError("save_database: empty database");
  json manifest;
  manifest["schema"] = kDbSchema;
  manifest["rate_hz"] = db.sets.front().rate().hertz;
  manifest["fft_size"] = db.sets.front().fft_size();
  if (generator_echo) manifest["generator"] = *generator_echo;
  json sets = json::array();
  for (const AtfSet& set : db.sets) {
    const std::string file = detail::safe_file_stem(set.subject_id, set.trial) + ".csv";
    const std::string content = render_spectrum_csv(set);
    write_text_file(dir / file, content);
    json entry;
    entry["subject"] = set.subject_id;
    entry["trial"] = set.trial;
    entry["file"] = file;
    entry["format"] = "spectrum";
    entry["content_fnv64"] = Digest().bytes(content.data(), content.size()).hex();
    sets.push_back(std::move(entry));
  }
  manifest["sets"] = std::move(sets);
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

struct LoadedDatabase {
  AtfDatabase db;
  json manifest;
};

inline LoadedDatabase load_database(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const json manifest = parse_json_file(manifest_path);
  const std::string where = manifest_path.string();
  detail::require_schema(manifest, kDbSchema, where);
  const double rate_hz = detail::require_number(manifest, "rate_hz", where);
  const int nf = detail::require_int(manifest, "fft_size", where);
  if (!manifest.contains("sets") || !manifest["sets"].is_array())
    throw SchemaError(where + ": missing 'sets' array");

  LoadedDatabase out;
  out.manifest = manifest;
  for (const json& entry : manifest["sets"]) {
    const std::string subject = detail::require_string(entry, "subject", where);
    const int trial = detail::require_int(entry, "trial", where);
    const std::string file = detail::require_string(entry, "file", where);
    const std::string format =
        entry.contains("format") ? detail::require_string(entry, "format", where) : "spectrum";
    const std::string content = read_text_file(dir / file);
    if (entry.contains("content_fnv64")) {
      const std::string expect = detail::require_string(entry, "content_fnv64", where);
      const std::string got = Digest().bytes(content.data(), content.size()).hex();
      if (expect != got)
        throw DataError(dir.string() + "/" + file + ": content hash mismatch");
    }
    const std::string file_where = (dir / file).string();
    if (format == "spectrum")
      out.db.sets.push_back(
          parse_spectrum_csv(content, subject, trial, nf, SampleRate(rate_hz), file_where));
    else if (format == "impulse")
      out.db.sets.push_back(
          parse_impulse_csv(content, subject, trial, nf, SampleRate(rate_hz), file_where));
    else
      throw SchemaError(where + ": unknown set format '" + format + "'");
  }
  out.db.validate();
  return out;
}

namespace detail {

inline json eq_config_to_json(const EqDesignConfig& cfg) {
  json j;
  j["mu"] = cfg.mu;
  j["d_proc_seconds"] = cfg.d_proc_seconds;
  j["taps_nt"] = cfg.taps_nt;
  j["fft_size"] = cfg.fft_size;
  return j;
}

inline EqDesignConfig eq_config_from_json(const json& j, const std::string& where) {
  EqDesignConfig cfg;
  cfg.mu = require_number(j, "mu", where);
  cfg.d_proc_seconds = require_number(j, "d_proc_seconds", where);
  cfg.taps_nt = require_int(j, "taps_nt", where);
  cfg.fft_size = require_int(j, "fft_size", where);
  cfg.validate();
  return cfg;
}

inline std::string filter_content_hash(const EqFilter& filter, SampleRate rate) {
  Digest d;
  d.add(std::string(to_string(filter.r_source())));
  d.add(filter.config().mu)
      .add(filter.config().d_proc_seconds)
      .add(filter.config().taps_nt)
      .add(filter.config().fft_size);
  d.add(rate.hertz);
  if (filter.is_time_domain())
    d.add(filter.taps());
  else
    d.add(filter.bins().bins());
  return d.hex();
}

}  // namespace detail

inline json filter_to_json(const EqFilter& filter, SampleRate rate) {
  json j;
  j["schema"] = kFilterSchema;
  j["r_source"] = to_string(filter.r_source());
  j["config"] = detail::eq_config_to_json(filter.config());
  j["rate_hz"] = rate.hertz;
  if (filter.is_time_domain())
    j["taps"] = filter.taps();
  else
    j["bins"] = detail::bins_to_json(filter.bins().bins());
  j["content_fnv64"] = detail::filter_content_hash(filter, rate);
  return j;
}

inline std::pair<EqFilter, SampleRate> filter_from_json(const json& j,
                                                        const std::string& where) {
  detail::require_schema(j, kFilterSchema, where);
  const RSource source = r_source_from_string(detail::require_string(j, "r_source", where));
  if (!j.contains("config")) throw SchemaError(where + ": missing 'config'");
  const EqDesignConfig cfg = detail::eq_config_from_json(j["config"], where);
  const SampleRate rate(detail::require_number(j, "rate_hz", where));

  auto finish = [&](EqFilter filter) {
    if (j.contains("content_fnv64") &&
        j["content_fnv64"].get<std::string>() != detail::filter_content_hash(filter, rate))
      throw DataError(where + ": content hash mismatch");
    return std::make_pair(std::move(filter), rate);
  };
  if (j.contains("taps")) {
    if (!j["taps"].is_array()) throw SchemaError(where + ": 'taps' must be an array");
    std::vector<double> taps;
    for (const json& v : j["taps"]) {
      if (!v.is_number()) throw SchemaError(where + ": non-numeric tap");
      taps.push_back(v.get<double>());
    }
    return finish(EqFilter(std::move(taps), cfg, source));
  }
  if (j.contains("bins")) {
    std::vector<cplx> bins = detail::bins_from_json(j["bins"], where);
    try {
      return finish(EqFilter(FrequencyResponse(std::move(bins), cfg.fft_size, rate), cfg,
                             source));
    } catch (const Error& e) {
      throw SchemaError(where + ": " + e.what());
    }
  }
  throw SchemaError(where + ": filter holds neither 'taps' nor 'bins'");
}

inline void save_filter(const EqFilter& filter, SampleRate rate, const fs::path& path) {
  write_text_file(path, filter_to_json(filter, rate).dump(2) + "\n");
}

inline std::pair<EqFilter, SampleRate> load_filter(const fs::path& path) {
  return filter_from_json(parse_json_file(path), path.string());
}

inline json model_to_json(const CombinedEstimator& est,
                          const std::string& training_fingerprint) {
  est.validate();
  json j;
  j["schema"] = kModelSchema;
  j["split_hz"] = est.split_hz;
  j["training_fingerprint"] = training_fingerprint;
  j["rate_hz"] = est.ridge.gains.rate().hertz;
  j["fft_size"] = est.ridge.gains.fft_size();

  json ridge;
  ridge["mu"] = est.ridge.mu;
  ridge["band_limit_hz"] = est.ridge.band_limit_hz;
  ridge["gains"] = detail::bins_to_json(est.ridge.gains.bins());
  j["ridge"] = std::move(ridge);

  json pca;
  pca["k"] = est.pca.k;
  pca["band_low_hz"] = est.pca.band.low_hz;
  pca["band_high_hz"] = est.pca.band.high_hz;
  pca["a_hat_regularized"] = est.pca.a_hat_regularized;
  pca["s_mean"] = detail::bins_to_json(est.pca.s_mean.bins());
  pca["r_mean"] = detail::bins_to_json(est.pca.r_mean.bins());
  pca["g_s_mean"] = detail::vector_to_json(est.pca.g_s_mean);
  pca["g_r_mean"] = detail::vector_to_json(est.pca.g_r_mean);
  pca["u_s"] = detail::matrix_to_json(est.pca.u_s);
  pca["u_r"] = detail::matrix_to_json(est.pca.u_r);
  pca["a_hat"] = detail::matrix_to_json(est.pca.a_hat);
  j["pca"] = std::move(pca);
  return j;
}

struct LoadedModel {
  CombinedEstimator est;
  std::string training_fingerprint;
};

inline LoadedModel model_from_json(const json& j, const std::string& where) {
  detail::require_schema(j, kModelSchema, where);
  const SampleRate rate(detail::require_number(j, "rate_hz", where));
  const int nf = detail::require_int(j, "fft_size", where);
  if (!j.contains("ridge") || !j.contains("pca"))
    throw SchemaError(where + ": missing 'ridge' or 'pca' section");
  const json& jr = j["ridge"];
  const json& jp = j["pca"];

  auto fr_from = [&](const json& bins, const char* name) {
    try {
      return FrequencyResponse(detail::bins_from_json(bins, where), nf, rate);
    } catch (const Error& e) {
      throw SchemaError(where + ": " + name + ": " + e.what());
    }
  };

  RidgeModel ridge{fr_from(jr.contains("gains") ? jr["gains"] : json(), "gains"),
                   detail::require_number(jr, "mu", where),
                   detail::require_number(jr, "band_limit_hz", where)};

  PcaModel pca{detail::require_int(jp, "k", where),
               detail::matrix_from_json(jp.contains("u_s") ? jp["u_s"] : json(), where),
               detail::matrix_from_json(jp.contains("u_r") ? jp["u_r"] : json(), where),
               fr_from(jp.contains("s_mean") ? jp["s_mean"] : json(), "s_mean"),
               fr_from(jp.contains("r_mean") ? jp["r_mean"] : json(), "r_mean"),
               detail::vector_from_json(jp.contains("g_s_mean") ? jp["g_s_mean"] : json(),
                                        where),
               detail::vector_from_json(jp.contains("g_r_mean") ? jp["g_r_mean"] : json(),
                                        where),
               detail::matrix_from_json(jp.contains("a_hat") ? jp["a_hat"] : json(), where),
               Band{detail::require_number(jp, "band_low_hz", where),
                    detail::require_number(jp, "band_high_hz", where)},
               jp.contains("a_hat_regularized") && jp["a_hat_regularized"].get<bool>()};

  CombinedEstimator est{std::move(ridge), std::move(pca),
                        detail::require_number(j, "split_hz", where)};
  try {
    est.validate();
  } catch (const Error& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return LoadedModel{std::move(est), detail::require_string(j, "training_fingerprint", where)};
}

inline void save_model(const CombinedEstimator& est, const std::string& training_fingerprint,
                       const fs::path& path) {
  write_text_file(path, model_to_json(est, training_fingerprint).dump(2) + "\n");
}

inline LoadedModel load_model(const fs::path& path) {
  return model_from_json(parse_json_file(path), path.string());
}

inline constexpr const char* kBandCsvHeader =
    "condition,subject,trial,band_low_hz,band_high_hz,mean_abs_err_db,std_db\n";

// One row per condition, set, and band.
inline std::string render_bands_csv(const EvalReport& report) {
  std::string out = kBandCsvHeader;
  const std::vector<Band> bands = standard_bands();
  for (Condition condition : kConditions)
    for (const EvalReport::SetResult& set : report.sets)
      for (const ConditionReport& r : set.conditions) {
        if (r.condition != condition) continue;
        for (const BandStat& stat : band_stats(r.error_curve, r.flagged, bands)) {
          out += std::string(to_string(condition)) + ',' + r.subject_id + ',' +
                 std::to_string(r.trial) + ',' + format_double(stat.band.low_hz) + ',' +
                 format_double(stat.band.high_hz) + ',' +
                 format_double(stat.mean_abs_err_db) + ',' + format_double(stat.std_db) +
                 '\n';
        }
      }
  return out;
}

// Band-averaged rows pooled across sets; subject column holds "all".
inline std::string render_summary_csv(const EvalSummary& summary) {
  std::string out = kBandCsvHeader;
  for (const ConditionSummary& cs : summary.conditions)
    for (const BandStat& stat : cs.bands)
      out += std::string(to_string(cs.condition)) + ",all,0," +
             format_double(stat.band.low_hz) + ',' + format_double(stat.band.high_hz) + ',' +
             format_double(stat.mean_abs_err_db) + ',' + format_double(stat.std_db) + '\n';
  return out;
}

inline std::string render_curve_csv(const BandErrorCurve& curve) {
  std::string out = "freq_hz,mean_db,std_db\n";
  for (std::size_t k = 0; k < curve.freqs_hz.size(); ++k)
    out += format_double(curve.freqs_hz[k]) + ',' + format_double(curve.mean_db[k]) + ',' +
           format_double(curve.std_db[k]) + '\n';
  return out;
}

}  // namespace heareq::io
