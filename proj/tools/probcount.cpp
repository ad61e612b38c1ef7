// Copyright 2026 The probcount Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: distribution dumps, privacy audits, survey
// simulation, the aggregation service and table/figure data.
//
// Exit codes: 0 success, 1 domain or resource error, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "probcount/aggregation_service.hpp"
#include "probcount/dp_audit.hpp"
#include "probcount/exact_dist.hpp"
#include "probcount/fm_constant.hpp"
#include "probcount/report.hpp"
#include "probcount/survey_sim.hpp"

namespace {

using namespace probcount;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Range {
  std::uint64_t from = 0;
  std::uint64_t to = 0;
};

Range parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("range must look like A:B");
  try {
    std::size_t used = 0;
    Range r;
    r.from = std::stoull(text.substr(0, colon), &used);
    if (used != colon) throw UsageError("bad range start");
    const std::string rest = text.substr(colon + 1);
    r.to = std::stoull(rest, &used);
    if (used != rest.size()) throw UsageError("bad range end");
    if (r.from > r.to) throw UsageError("range start exceeds end");
    return r;
  } catch (const std::logic_error&) {
    throw UsageError("range must look like A:B with non-negative integers");
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DomainError(path + ": " + e.what());
  }
}

// Evaluates work(i) for i in [0, count) on up to hardware_concurrency
// threads, each at `bits` precision, and returns the results in order.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t count, long bits, Fn work) {
  std::vector<std::optional<T>> slots(count);
  const std::size_t threads =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), count));
  std::vector<std::exception_ptr> errors(threads);
  auto run = [&](std::size_t t) {
    try {
      ScopedPrecision prec(bits);
      for (std::size_t i = t; i < count; i += threads) slots[i].emplace(work(i));
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  if (threads == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run, t);
    for (std::thread& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// "n^-2" style deltas follow n; anything else is a constant.
std::function<double(std::uint64_t)> parse_delta(const std::string& text) {
  if (text.rfind("n^-", 0) == 0) {
    double power = 0;
    try {
      power = std::stod(text.substr(3));
    } catch (const std::logic_error&) {
      throw UsageError("delta must be a number or n^-P");
    }
    return [power](std::uint64_t n) { return std::pow(static_cast<double>(n), -power); };
  }
  double value = 0;
  try {
    std::size_t used = 0;
    value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw UsageError("delta must be a number or n^-P");
  }
  return [value](std::uint64_t) { return value; };
}

struct Globals {
  int digits = kDefaultDigits;
  long precision = kDefaultPrecisionBits;
};

int dist_morris(const Globals& g, std::uint64_t n, bool moments, bool tails,
                std::uint64_t cap) {
  if (moments) {
    const dist::Moments m = dist::morris_moments(n, cap);
    std::cout << "n,mean,variance,mean_pow2\n"
              << n << ',' << m.mean.to_string(g.digits) << ',' << m.variance.to_string(g.digits)
              << ',' << m.mean_pow2.to_string(g.digits) << '\n';
    return 0;
  }
  if (tails) {
    const dist::Interval in = dist::interval_In(n);
    const dist::Tails t = dist::morris_tails(n, cap);
    std::cout << "n,lo,hi,lower,upper,total\n"
              << n << ',' << in.lo << ',' << in.hi << ',' << t.lower.to_string(g.digits) << ','
              << t.upper.to_string(g.digits) << ',' << t.total.to_string(g.digits) << '\n';
    return 0;
  }
  const dist::ProbRow row = dist::morris_row(n, cap);
  std::cout << "l,probability\n";
  for (std::uint64_t l = 1; l <= row.support_max(); ++l) {
    std::cout << l << ',' << row.at(static_cast<std::int64_t>(l)).to_string(g.digits) << '\n';
  }
  return 0;
}

int dist_maxgeo(const Globals& g, std::uint64_t n, std::int64_t l) {
  std::cout << "n,l,pmf,cdf\n"
            << n << ',' << l << ',' << dist::maxgeo_pmf(n, l).to_string(g.digits) << ','
            << dist::maxgeo_cdf(n, l).to_string(g.digits) << '\n';
  return 0;
}

int audit_morris(const Globals& g, std::optional<std::uint64_t> n,
                 std::optional<std::string> range, bool csv) {
  if (n.has_value() == range.has_value()) {
    throw UsageError("audit morris needs exactly one of --n or --range");
  }
  if (n) {
    std::cout << to_json(morris_audit(*n)).dump(2) << '\n';
    return 0;
  }
  const Range r = parse_range(*range);
  if (r.from < kMorrisAuditMinN) {
    throw DomainError("Morris audit needs n >= " + std::to_string(kMorrisAuditMinN));
  }
  const std::size_t count = r.to - r.from + 1;
  if (csv) {
    const auto lines = parallel_map<std::string>(count, g.precision, [&](std::size_t i) {
      std::ostringstream row;
      write_morris_epsilon_csv(row, r.from + i, r.from + i, g.digits);
      std::string text = row.str();
      return text.substr(text.find('\n') + 1);
    });
    std::cout << "n,epsilon_exact,lower_curve,upper_curve\n";
    for (const std::string& line : lines) std::cout << line;
    return 0;
  }
  const auto audits = parallel_map<Json>(
      count, g.precision, [&](std::size_t i) { return to_json(morris_audit(r.from + i)); });
  std::cout << Json(audits).dump(2) << '\n';
  return 0;
}

int audit_maxgeo(const Globals& g, std::optional<double> epsilon, std::optional<std::uint64_t> n,
                 std::optional<std::string> range, const std::string& delta_text,
                 bool compat_level) {
  const int modes = epsilon.has_value() + n.has_value() + range.has_value();
  if (modes != 1) throw UsageError("audit maxgeo needs exactly one of --epsilon, --n or --range");
  const auto delta_at = parse_delta(delta_text);
  if (epsilon) {
    if (delta_text.rfind("n^-", 0) == 0) throw UsageError("--epsilon needs a numeric --delta");
    std::cout << maxgeo_min_n_json(*epsilon, delta_at(0), MaxGeoOptions{compat_level}).dump(2)
              << '\n';
    return 0;
  }
  if (n) {
    const double delta = delta_at(*n);
    std::cout << to_json(*n, delta, maxgeo_eps_given_n(*n, delta)).dump(2) << '\n';
    return 0;
  }
  const Range r = parse_range(*range);
  if (r.from == 0) throw DomainError("n must be positive");
  const std::size_t count = r.to - r.from + 1;
  const auto lines = parallel_map<std::string>(count, g.precision, [&](std::size_t i) {
    std::ostringstream row;
    write_privacy_comparison_csv(row, r.from + i, r.from + i, delta_at, g.digits);
    std::string text = row.str();
    return text.substr(text.find('\n') + 1);
  });
  std::cout << "n,delta,morris_eps,maxgeo_eps0,psi,phi\n";
  for (const std::string& line : lines) std::cout << line;
  return 0;
}

int survey(const Globals& g, const std::string& config_path, const std::string& trials_path) {
  const SurveyConfig config = survey_config_from_json(read_json_file(config_path));
  const SurveyOutcome outcome = run_survey(config);
  if (!trials_path.empty()) {
    std::ofstream out(trials_path);
    if (!out) throw UsageError("cannot write " + trials_path);
    write_trials_csv(out, outcome, g.digits);
  }
  std::cout << survey_summary_json(config, outcome).dump(2) << '\n';
  return 0;
}

int serve_cmd(const std::string& config_path) {
  const ServiceConfig config = service_config_from_json(read_json_file(config_path));
  const int rc = serve(config, std::cin, std::cout, [](std::uint16_t port) {
    std::cerr << "listening on port " << port << std::endl;
  });
  return rc == 0 ? 0 : 1;
}

int tables(const Globals& g, bool alfa, bool init) {
  if (alfa == init) throw UsageError("tables needs exactly one of --alfa or --init");
  if (alfa) {
    std::cout << "i,theta,pow2,scaled\n";
    for (const dist::RatioEntry& e : dist::ratio_table(129, 11)) {
      std::cout << e.i << ',' << e.theta.to_string(g.digits) << ','
                << e.pow2.to_string(g.digits) << ',' << e.scaled.to_string(g.digits) << '\n';
    }
    return 0;
  }
  const dist::LemmaSequences seq = dist::lemma_sequences(2, 14);
  std::cout << "k,p_k4,p_k5\n";
  for (const dist::LemmaRow& r : seq.rows) {
    std::cout << r.k << ',' << r.at_k4.to_fixed_string(g.digits) << ','
              << r.at_k5.to_fixed_string(g.digits) << '\n';
  }
  return 0;
}

int compare(const Globals& g, std::uint64_t n) {
  std::cout << "method,epsilon,delta,estimator,variance,memory_bits\n";
  for (const ComparisonRow& row : comparison_table(n)) {
    std::cout << row.method << ',' << format_double(row.dp.epsilon, g.digits) << ','
              << format_double(row.dp.delta, g.digits) << ',' << row.estimator << ','
              << format_double(row.variance, g.digits) << ','
              << format_double(row.memory_bits, g.digits) << '\n';
  }
  return 0;
}

int phi(const Globals& g, std::uint64_t terms) {
  if (terms == 0) throw DomainError("phi needs at least one product term");
  const FMConstant c = compute_phi(terms);
  std::cout << "terms,phi\n" << c.terms_used << ',' << c.phi.to_string(g.digits) << '\n';
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Exact distributions, privacy audits and simulations for probabilistic counters"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  Globals g;
  try {
    g.precision = precision_bits_from_env();
  } catch (const DomainError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }
  app.add_option("--digits", g.digits, "Significant digits for printed numbers")
      ->check(CLI::Range(1, 1000));
  app.add_option("--precision", g.precision,
                 "Working precision in bits (default from PROBCOUNT_PRECISION_BITS or 256)")
      ->check(CLI::Range(kMinPrecisionBits, 1L << 24));

  int rc = 0;
  std::function<int()> action;

  auto* dist_cmd = app.add_subcommand("dist", "Exact counter distributions");
  dist_cmd->require_subcommand(1);
  auto* dm = dist_cmd->add_subcommand("morris", "Morris counter level distribution");
  std::uint64_t dm_n = 0;
  std::uint64_t dm_cap = dist::kDefaultRowCap;
  bool dm_row = false, dm_moments = false, dm_tails = false;
  dm->add_option("--n", dm_n, "Number of increment requests")->required();
  auto* row_flag = dm->add_flag("--row", dm_row, "Full pmf row (default)");
  auto* mom_flag = dm->add_flag("--moments", dm_moments, "Mean and variance of the level");
  auto* tail_flag = dm->add_flag("--tails", dm_tails, "Mass outside the interval I_n");
  row_flag->excludes(mom_flag)->excludes(tail_flag);
  mom_flag->excludes(tail_flag);
  dm->add_option("--cap", dm_cap, "Largest n computed by recursion");
  dm->callback([&] { action = [&] { return dist_morris(g, dm_n, dm_moments, dm_tails, dm_cap); }; });

  auto* dg = dist_cmd->add_subcommand("maxgeo", "MaxGeo counter pmf and cdf at one level");
  std::uint64_t dg_n = 0;
  std::int64_t dg_l = 0;
  dg->add_option("--n", dg_n, "Number of increment requests")->required();
  dg->add_option("--l", dg_l, "Level")->required();
  dg->callback([&] { action = [&] { return dist_maxgeo(g, dg_n, dg_l); }; });

  auto* audit_cmd = app.add_subcommand("audit", "Differential privacy parameters");
  audit_cmd->require_subcommand(1);
  auto* am = audit_cmd->add_subcommand("morris", "Exact privacy loss of the Morris counter");
  std::optional<std::uint64_t> am_n;
  std::optional<std::string> am_range;
  bool am_csv = false;
  am->add_option("--n", am_n, "Number of true inputs");
  am->add_option("--range", am_range, "Inclusive range A:B of n");
  am->add_flag("--csv", am_csv, "Emit n,epsilon_exact,lower_curve,upper_curve");
  am->callback([&] { action = [&] { return audit_morris(g, am_n, am_range, am_csv); }; });

  auto* ag = audit_cmd->add_subcommand("maxgeo", "MaxGeo minimum n and privacy envelope");
  std::optional<double> ag_eps;
  std::optional<std::uint64_t> ag_n;
  std::optional<std::string> ag_range;
  std::string ag_delta;
  bool ag_csv = false, ag_compat = false;
  ag->add_option("--epsilon", ag_eps, "Target epsilon (prints n_min)");
  ag->add_option("--n", ag_n, "Number of true inputs (prints eps0, psi, phi)");
  ag->add_option("--range", ag_range, "Inclusive range A:B of n, as CSV");
  ag->add_option("--delta", ag_delta, "Tail mass, a number or n^-P")->required();
  ag->add_flag("--csv", ag_csv, "CSV output (implied by --range)");
  ag->add_flag("--compat-level", ag_compat, "Use ceil(log2(1 + 1/epsilon)) for l_epsilon");
  ag->callback([&] {
    action = [&] { return audit_maxgeo(g, ag_eps, ag_n, ag_range, ag_delta, ag_compat); };
  });

  auto* sv = app.add_subcommand("survey", "Monte Carlo survey simulation");
  std::string sv_config, sv_trials;
  sv->add_option("--config", sv_config, "JSON survey configuration")->required();
  sv->add_option("--trials-csv", sv_trials, "Write per-trial results to this file");
  sv->callback([&] { action = [&] { return survey(g, sv_config, sv_trials); }; });

  auto* se = app.add_subcommand("serve", "Run one aggregation session");
  std::string se_config;
  se->add_option("--config", se_config, "JSON service configuration")->required();
  se->callback([&] { action = [&] { return serve_cmd(se_config); }; });

  auto* tb = app.add_subcommand("tables", "Ratio and lemma tables");
  bool tb_alfa = false, tb_init = false;
  tb->add_flag("--alfa", tb_alfa, "theta_i = p(129,i)/p(129,i+1) for i = 1..11");
  tb->add_flag("--init", tb_init, "p(2^k+1, k+4) and p(2^k+1, k+5) for k = 2..14");
  tb->callback([&] { action = [&] { return tables(g, tb_alfa, tb_init); }; });

  auto* cp = app.add_subcommand("compare", "Laplace, Morris and MaxGeo side by side");
  std::uint64_t cp_n = 0;
  cp->add_option("--n", cp_n, "Number of true inputs")->required();
  cp->callback([&] { action = [&] { return compare(g, cp_n); }; });

  auto* ph = app.add_subcommand("phi", "Flajolet-Martin constant from its product form");
  std::uint64_t ph_terms = kDefaultPhiTerms;
  ph->add_option("--terms", ph_terms, "Number of product terms");
  ph->callback([&] { action = [&] { return phi(g, ph_terms); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    ScopedPrecision prec(g.precision);
    rc = action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
