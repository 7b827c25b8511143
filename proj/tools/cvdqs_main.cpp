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

// cvdqs: sensitivity sweeps, NLA success curves, bounds and self-validation.
//
// Exit codes: 0 success, 1 validation or runtime failure, 2 usage or
// configuration error.

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <system_error>

#include "cvdqs/error.hpp"
#include "cvdqs/sweep.hpp"
#include "cvdqs/validate.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  cvdqs::sweep::SweepRequest req;
  std::string out;
  std::string config;
  double perturb_projector = 0.0;
  double validate_gain = 2.2;
};

template <class T>
bool parse_number(const std::string& s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using Setter = std::function<bool(const std::string&)>;

template <class T>
Setter setter(T& field) {
  return [&field](const std::string& v) { return parse_number(v, field); };
}

Setter optional_int_setter(std::optional<int>& field) {
  return [&field](const std::string& v) {
    int x = 0;
    if (!parse_number(v, x)) return false;
    field = x;
    return true;
  };
}

// Options shared by every subcommand; names double as config-file keys.
std::map<std::string, Setter> register_options(CLI::App* sub, Settings& s) {
  auto& r = s.req;
  sub->add_option("--M", r.M, "number of sensors")->capture_default_str();
  sub->add_option("--ns", r.n_s, "source mean photon number")->capture_default_str();
  sub->add_option("--eta", r.eta, "channel transmissivity")->capture_default_str();
  sub->add_option("--scissors", r.scissors, "scissors per practical NLA")->capture_default_str();
  sub->add_option("--cutoff", r.cutoff, "photon-number cutoff per mode (default: max(5, scissors*M))");
  sub->add_option("--g-min", r.gain.min, "smallest gain")->capture_default_str();
  sub->add_option("--g-max", r.gain.max, "largest gain")->capture_default_str();
  sub->add_option("--g-steps", r.gain.steps, "gain grid points")->capture_default_str();
  sub->add_option("--eta-min", r.eta_grid.min, "smallest transmissivity (bounds)")->capture_default_str();
  sub->add_option("--eta-max", r.eta_grid.max, "largest transmissivity (bounds)")->capture_default_str();
  sub->add_option("--eta-steps", r.eta_grid.steps, "transmissivity grid points (bounds)")->capture_default_str();
  sub->add_option("--out", s.out, "output CSV path (default: stdout)");
  sub->add_option("--precision", r.precision, "significant digits after the point")->capture_default_str();
  sub->add_option("--jobs", r.jobs, "worker threads")->capture_default_str();
  sub->add_option("--config", s.config, "config file (default: $CVDQS_CONFIG)");
  return {
      {"M", setter(r.M)},
      {"ns", setter(r.n_s)},
      {"eta", setter(r.eta)},
      {"scissors", setter(r.scissors)},
      {"cutoff", optional_int_setter(r.cutoff)},
      {"g-min", setter(r.gain.min)},
      {"g-max", setter(r.gain.max)},
      {"g-steps", setter(r.gain.steps)},
      {"eta-min", setter(r.eta_grid.min)},
      {"eta-max", setter(r.eta_grid.max)},
      {"eta-steps", setter(r.eta_grid.steps)},
      {"out", [&s](const std::string& v) { s.out = v; return true; }},
      {"precision", setter(r.precision)},
      {"jobs", setter(r.jobs)},
  };
}

// `key = value` lines, '#' comments. Values apply only where the matching
// flag was not given on the command line.
void apply_config(const std::string& path, const CLI::App* sub, std::map<std::string, Setter>& keys) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw UsageError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) throw UsageError(where + ": unknown key '" + key + "'");
    if (sub->count("--" + key) > 0) continue;
    if (!it->second(value)) throw UsageError(where + ": invalid value '" + value + "' for '" + key + "'");
  }
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + out + "'");
  f << text;
  if (!f.flush()) throw UsageError("failed writing '" + out + "'");
}

int run_validate(const Settings& s) {
  cvdqs::validate::Options opt;
  opt.scenario.M = s.req.M;
  opt.scenario.n_s = s.req.n_s;
  opt.scenario.eta = s.req.eta;
  opt.scenario.cutoff = s.req.cutoff;
  opt.scenario.nla = cvdqs::nla::NlaSpec::practical(s.validate_gain, s.req.scissors);
  opt.projector_perturbation = s.perturb_projector;
  const auto results = cvdqs::validate::run_all(opt);
  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::string report;
  for (const auto& r : results) {
    report += (r.passed ? "PASS  " : "FAIL  ") + r.name + std::string(width - r.name.size() + 2, ' ') + r.detail + "\n";
  }
  const bool ok = cvdqs::validate::all_passed(results);
  report += ok ? "all checks passed\n" : "validation FAILED\n";
  emit(report, s.out);
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed quantum sensing with noiseless linear amplifiers"};
  app.require_subcommand(1);

  Settings s;
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, std::map<std::string, Setter>> keys;
  const std::pair<const char*, const char*> commands[] = {
      {"sweep-sensitivity", "rms error of all schemes along a gain grid"},
      {"sweep-nla", "joint success probability and probe power along a gain grid"},
      {"bounds", "Cramer-Rao bounds and closed forms along a transmissivity grid"},
      {"validate", "run the invariant suite"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    keys[name] = register_options(sub, s);
    subs[name] = sub;
  }
  subs["validate"]->add_option("--gain", s.validate_gain, "gain of the practical-pipeline check")->capture_default_str();
  subs["validate"]->add_option("--perturb-projector", s.perturb_projector,
                               "fault injection: relative error on the one-photon entry of the practical operator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }

  try {
    std::string config = s.config;
    if (config.empty()) {
      if (const char* env = std::getenv("CVDQS_CONFIG"); env != nullptr) config = env;
    }
    if (!config.empty()) apply_config(config, subs[command], keys[command]);

    if (command == "validate") return run_validate(s);
    std::string csv;
    if (command == "sweep-sensitivity") csv = cvdqs::sweep::run_sweep_sensitivity(s.req);
    if (command == "sweep-nla") csv = cvdqs::sweep::run_sweep_nla(s.req);
    if (command == "bounds") csv = cvdqs::sweep::run_bounds(s.req);
    emit(csv, s.out);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cvdqs::PhysicalityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const cvdqs::TruncationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const cvdqs::DomainError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
