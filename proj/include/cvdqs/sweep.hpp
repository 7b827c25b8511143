// Copyright 2026 The cvdqs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parameter sweeps rendered as CSV.
//
// Points are independent, so they are evaluated on a small thread pool and
// written back by index; output order never depends on scheduling.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cvdqs/error.hpp"
#include "cvdqs/nla.hpp"
#include "cvdqs/sensing.hpp"

namespace cvdqs::sweep {

struct Grid {
  double min = 1.0;
  double max = 3.0;
  int steps = 41;

  // steps >= 2, or a single point when min == max.
  void validate(const std::string& name) const {
    detail::require(std::isfinite(min) && std::isfinite(max), name + ": bounds must be finite");
    detail::require(min <= max, name + ": min must not exceed max");
    if (min == max) {
      detail::require(steps >= 1, name + ": steps must be >= 1");
    } else {
      detail::require(steps >= 2, name + ": steps must be >= 2 for a non-degenerate range");
    }
  }

  std::vector<double> values() const {
    if (min == max) return std::vector<double>(1, min);
    std::vector<double> v(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) v[static_cast<std::size_t>(i)] = min + (max - min) * i / (steps - 1);
    v.back() = max;
    return v;
  }
};

struct SweepRequest {
  int M = 4;
  double n_s = 0.04;
  double eta = 0.5;
  int scissors = 2;
  std::optional<int> cutoff;
  Grid gain{1.0, 3.0, 41};
  Grid eta_grid{0.1, 1.0, 10};
  int precision = 6;
  int jobs = 1;

  void validate() const {
    detail::require(M >= 1, "M must be >= 1");
    detail::require(n_s >= 0.0 && std::isfinite(n_s), "ns must be >= 0");
    detail::require(eta > 0.0 && eta <= 1.0, "eta must lie in (0,1]");
    detail::require(scissors >= 1, "scissors must be >= 1");
    if (cutoff) {
      detail::require(*cutoff >= 1, "cutoff must be >= 1");
      detail::require(*cutoff >= scissors, "cutoff " + std::to_string(*cutoff) + " is below the scissor count " +
                                               std::to_string(scissors));
    }
    gain.validate("gain grid");
    detail::require(gain.min >= 1.0, "gain grid: g-min must be >= 1");
    eta_grid.validate("eta grid");
    detail::require(eta_grid.min >= 0.0 && eta_grid.max <= 1.0, "eta grid: values must lie in [0,1]");
    detail::require(precision >= 3 && precision <= 17, "precision must lie in [3,17]");
    detail::require(jobs >= 1, "jobs must be >= 1");
  }

  sensing::ScenarioConfig practical_config(double g) const {
    sensing::ScenarioConfig cfg;
    cfg.M = M;
    cfg.n_s = n_s;
    cfg.eta = eta;
    cfg.nla = nla::NlaSpec::practical(g, scissors);
    cfg.cutoff = cutoff;
    cfg.scheme = sensing::Scheme::entangled_practical_nla;
    return cfg;
  }
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is
// rethrown after all workers finish.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string format_float(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", precision, v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(int precision) : precision_(precision) {}

  CsvWriter& header(std::initializer_list<const char*> cols) {
    bool first = true;
    for (const char* c : cols) {
      if (!first) out_ += ',';
      out_ += c;
      first = false;
    }
    out_ += '\n';
    return *this;
  }

  CsvWriter& field(const std::string& s) { return raw(csv_quote(s)); }
  CsvWriter& field(int v) { return raw(std::to_string(v)); }
  CsvWriter& field(double v) { return raw(format_float(v, precision_)); }
  CsvWriter& field(const std::optional<double>& v) { return v ? field(*v) : raw(""); }
  CsvWriter& field(const std::optional<int>& v) { return v ? field(*v) : raw(""); }
  CsvWriter& end_row() {
    out_ += '\n';
    at_start_ = true;
    return *this;
  }

  const std::string& str() const { return out_; }

 private:
  CsvWriter& raw(const std::string& s) {
    if (!at_start_) out_ += ',';
    out_ += s;
    at_start_ = false;
    return *this;
  }

  int precision_;
  std::string out_;
  bool at_start_ = true;
};

// ---------------------------------------------------------------------------
// sweep-sensitivity
// ---------------------------------------------------------------------------

struct SensitivityRow {
  sensing::Scheme scheme;
  int M;
  double n_s;  // source photons actually used by this row
  double eta;  // transmissivity actually used by this row
  double g;
  std::optional<int> scissors = {};
  std::optional<double> probe_power = {};
  std::optional<double> delta_alpha = {};
  std::optional<double> p_success = {};
  std::optional<int> cutoff = {};
  std::optional<double> trunc_deficit = {};
  std::string error = {};
};

// Four rows per gain. The practical point fixes the probe power; the no-NLA
// row reaches that power with a brighter source (N_S = P / eta) and the
// product row spends it on locally prepared squeezed vacua (eta_local = 1).
// The ideal-NLA row uses the same gain on the original source.
inline std::vector<SensitivityRow> sensitivity_rows_at(const SweepRequest& req, double g) {
  using sensing::Scheme;
  std::vector<SensitivityRow> rows;

  SensitivityRow prac{Scheme::entangled_practical_nla, req.M, req.n_s, req.eta, g, req.scissors};
  std::optional<double> power;
  try {
    const auto cfg = req.practical_config(g);
    prac.cutoff = cfg.effective_cutoff();
    const auto pt = sensing::simulate_practical(cfg);
    prac.probe_power = pt.probe_power;
    prac.delta_alpha = pt.delta_alpha;
    prac.p_success = pt.p_success;
    prac.trunc_deficit = pt.trunc_deficit;
    power = pt.probe_power;
  } catch (const std::exception& e) {
    prac.error = e.what();
  }

  SensitivityRow ideal{Scheme::entangled_ideal_nla, req.M, req.n_s, req.eta, g};
  try {
    const auto pt = sensing::delta_alpha_ideal_nla(req.M, req.n_s, req.eta, g);
    ideal.probe_power = pt.probe_power;
    ideal.delta_alpha = pt.delta_alpha;
    ideal.p_success = pt.p_success;  // 0: the ideal amplifier never heralds
  } catch (const std::exception& e) {
    ideal.error = e.what();
  }

  SensitivityRow none{Scheme::entangled_no_nla, req.M, req.n_s, req.eta, g};
  SensitivityRow prod{Scheme::product_optimal, req.M, req.n_s, 1.0, g};
  if (power) {
    none.n_s = *power / req.eta;
    none.probe_power = *power;
    none.delta_alpha = sensing::delta_alpha_entangled(req.M, none.n_s, req.eta);
    none.p_success = 1.0;
    prod.n_s = *power;
    prod.probe_power = *power;
    prod.delta_alpha = sensing::delta_alpha_product(req.M, *power, 1.0);
    prod.p_success = 1.0;
  } else {
    none.error = prod.error = "no practical-NLA probe power to match";
  }

  rows.push_back(std::move(ideal));
  rows.push_back(std::move(none));
  rows.push_back(std::move(prac));
  rows.push_back(std::move(prod));
  return rows;
}

inline std::vector<SensitivityRow> sensitivity_rows(const SweepRequest& req) {
  req.validate();
  const auto gains = req.gain.values();
  std::vector<std::vector<SensitivityRow>> per_gain(gains.size());
  parallel_for(gains.size(), req.jobs, [&](std::size_t i) { per_gain[i] = sensitivity_rows_at(req, gains[i]); });
  std::vector<SensitivityRow> rows;
  for (auto& block : per_gain) rows.insert(rows.end(), block.begin(), block.end());
  std::stable_sort(rows.begin(), rows.end(), [](const SensitivityRow& a, const SensitivityRow& b) {
    if (a.scheme != b.scheme) return sensing::to_string(a.scheme) < sensing::to_string(b.scheme);
    return a.g < b.g;
  });
  return rows;
}

inline std::string sensitivity_csv(const std::vector<SensitivityRow>& rows, int precision) {
  CsvWriter w(precision);
  w.header({"scheme", "M", "N_S", "eta", "g", "scissors", "probe_power", "delta_alpha", "p_success", "cutoff",
            "trunc_deficit", "error"});
  for (const auto& r : rows) {
    w.field(std::string(sensing::to_string(r.scheme)))
        .field(r.M)
        .field(r.n_s)
        .field(r.eta)
        .field(r.g)
        .field(r.scissors)
        .field(r.probe_power)
        .field(r.delta_alpha)
        .field(r.p_success)
        .field(r.cutoff)
        .field(r.trunc_deficit)
        .field(r.error)
        .end_row();
  }
  return w.str();
}

inline std::string run_sweep_sensitivity(const SweepRequest& req) {
  return sensitivity_csv(sensitivity_rows(req), req.precision);
}

// ---------------------------------------------------------------------------
// sweep-nla
// ---------------------------------------------------------------------------

inline std::string run_sweep_nla(const SweepRequest& req) {
  req.validate();
  const auto gains = req.gain.values();
  std::vector<sensing::SensitivityPoint> pts(gains.size());
  parallel_for(gains.size(), req.jobs, [&](std::size_t i) { pts[i] = sensing::simulate_practical(req.practical_config(gains[i])); });
  CsvWriter w(req.precision);
  w.header({"g", "p_success", "probe_power"});
  for (std::size_t i = 0; i < gains.size(); ++i) w.field(gains[i]).field(pts[i].p_success).field(pts[i].probe_power).end_row();
  return w.str();
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

// The product columns share the channel loss (equal-loss comparison).
inline std::string run_bounds(const SweepRequest& req) {
  req.validate();
  CsvWriter w(req.precision);
  w.header({"eta", "crlb_entangled", "crlb_product", "delta_alpha_entangled", "delta_alpha_product"});
  for (double eta : req.eta_grid.values()) {
    w.field(eta)
        .field(sensing::crlb_entangled(req.M, req.n_s, eta))
        .field(sensing::crlb_product(req.M, req.n_s, eta))
        .field(sensing::delta_alpha_entangled(req.M, req.n_s, eta))
        .field(sensing::delta_alpha_product(req.M, req.n_s, eta))
        .end_row();
  }
  return w.str();
}

}  // namespace cvdqs::sweep
