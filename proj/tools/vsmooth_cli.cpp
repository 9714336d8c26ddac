// vsmooth: trace analysis, smoothing experiments and the fluid buffer model.
//
//   vsmooth analyze --trace s.csv
//   vsmooth smooth  --synth gop=G16B3 n=4800 --seed 7 --mode baseline --out run1
//   vsmooth fluid   --params model.txt --validate-mc --horizon 200000 --seed 3
//   vsmooth compare --left "--synth n=4800" --right "--synth n=4800 --no-smooth" --seed 7
//
// Exit codes: 0 success, 2 usage or input error, 3 numeric-quality error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "experiment.hpp"
#include "vsmooth/vsmooth.hpp"

namespace fs = std::filesystem;
using namespace vsmooth;
using namespace vsmooth::cli;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Globals {
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string format = "csv";
  std::string config;
};

std::optional<std::uint64_t> seed_of(const Globals& g) {
  return g.seed_given ? std::optional<std::uint64_t>(g.seed) : std::nullopt;
}

std::string out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  return (fs::path(g.out) / name).string();
}

// ---- config file ----------------------------------------------------------

// Flat `key = value` lines become `--key value` tokens placed right after the
// subcommand, ahead of the user's own flags, so flags given on the command
// line win.
std::vector<std::string> config_tokens(const std::string& path) {
  std::vector<std::string> toks;
  detail::for_each_line(read_file(path), [&](std::size_t line_no, std::string_view raw) {
    auto line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "config lines are key = value");
    const auto key = std::string(detail::trim(line.substr(0, eq)));
    const auto val = detail::trim(line.substr(eq + 1));
    if (key == "config") throw ParseError(line_no, "nested config files are not supported");
    if (val == "true") {
      toks.push_back("--" + key);
    } else if (val != "false") {
      toks.push_back("--" + key);
      for (auto piece : detail::split_ws(val)) toks.emplace_back(piece);
    }
  });
  return toks;
}

std::vector<std::string> expand_config(std::vector<std::string> args, const std::vector<std::string>& subcommands) {
  std::string path;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      path = args[k + 1];
      args.erase(args.begin() + static_cast<long>(k), args.begin() + static_cast<long>(k) + 2);
      break;
    }
    if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
      args.erase(args.begin() + static_cast<long>(k));
      break;
    }
  }
  if (path.empty()) return args;
  const auto toks = config_tokens(path);
  auto sub = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
    return std::find(subcommands.begin(), subcommands.end(), a) != subcommands.end();
  });
  if (sub == args.end()) throw UsageError("--config needs a subcommand");
  args.insert(sub + 1, toks.begin(), toks.end());
  return args;
}

// ---- analyze ----------------------------------------------------------------

int cmd_analyze(const Globals& g, const TraceSource& src) {
  const auto trace = resolve_trace(src, seed_of(g));
  const auto s = trace_stats(trace);
  const auto header = std::string("name,n_frames,fps,cer_bps,per_bps,mean_frame_bytes\n");
  const auto row = fmt::format("{},{},{:.6g},{:.1f},{:.1f},{:.3f}\n", trace.name, s.n_frames, s.fps, s.cer, s.per,
                               s.mean_frame_bytes);
  std::cout << header << row;
  write_file(out_path(g, "stats.csv"), header + row);
  return 0;
}

// ---- smooth -----------------------------------------------------------------

struct Outcome {
  FrameTrace trace;
  bool smoothed = false;
  SmootherConfig cfg;
  RunResult run;
  RunMetrics metrics;
  std::vector<double> raw_rates;
  double v_unsmoothed = 0.0;
};

Outcome run_experiment(const ExperimentSpec& e) {
  Outcome o;
  o.trace = resolve_trace(e.trace, e.seed);
  const auto stats = trace_stats(o.trace);
  o.raw_rates = baseline_rates(o.trace);
  o.v_unsmoothed = variability(o.raw_rates);
  if (e.no_smooth) return o;
  o.smoothed = true;
  o.cfg = resolve_config(e, stats);
  const auto feed = resolve_channel(e, o.trace, stats);
  o.run = run(o.trace, o.cfg, feed ? &*feed : nullptr);
  o.metrics = run_metrics(o.run.log, o.run.bill, o.cfg);
  return o;
}

std::string metrics_file(const Outcome& o) {
  if (!o.smoothed) return fmt::format("variability_unsmoothed\n{:.6f}\n", o.v_unsmoothed);
  return metrics_csv_header() + ",variability_unsmoothed,variability_improvement_pct,startup_delay_s\n" +
         metrics_csv_row(o.metrics) +
         fmt::format(",{:.6f},{:.4f},{:.6f}\n", o.v_unsmoothed,
                     improvement_pct(o.v_unsmoothed, o.metrics.variability), o.run.log.startup_delay);
}

int cmd_smooth(const Globals& g, ExperimentSpec e) {
  e.seed = seed_of(g);
  const auto o = run_experiment(e);
  if (!o.smoothed) {
    std::string rates = "frame,rate_bps\n";
    for (std::size_t k = 0; k < o.raw_rates.size(); ++k) rates += fmt::format("{},{:.3f}\n", k, o.raw_rates[k]);
    write_file(out_path(g, "rates.csv"), rates);
    const auto m = metrics_file(o);
    write_file(out_path(g, "metrics.csv"), m);
    std::cout << m;
    return 0;
  }
  write_file(out_path(g, "log.csv"), log_csv(o.run.log));
  write_file(out_path(g, "billing.txt"), billing_text(o.run.bill));
  const auto m = metrics_file(o);
  write_file(out_path(g, "metrics.csv"), m);
  std::cout << m;
  return 0;
}

// ---- compare ----------------------------------------------------------------

ExperimentSpec parse_side(const std::string& text, const Globals& g, const char* which) {
  ExperimentSpec e;
  CLI::App side{which};
  side.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  add_experiment_options(side, e);
  std::vector<std::string> toks;
  for (auto t : detail::split_ws(text)) toks.emplace_back(t);
  std::reverse(toks.begin(), toks.end());
  try {
    side.parse(toks);
  } catch (const CLI::ParseError& err) {
    throw UsageError(std::string(which) + ": " + err.what());
  }
  e.seed = seed_of(g);
  return e;
}

int cmd_compare(const Globals& g, const std::string& left_args, const std::string& right_args) {
  const auto left_spec = parse_side(left_args, g, "--left");
  const auto right_spec = parse_side(right_args, g, "--right");
  auto lf = std::async(std::launch::async, [&] { return run_experiment(left_spec); });
  auto rt = std::async(std::launch::async, [&] { return run_experiment(right_spec); });
  const auto l = lf.get();
  const auto r = rt.get();
  if (l.trace.frames != r.trace.frames) throw UsageError("left and right experiments use different traces");

  struct Row {
    std::string name;
    std::optional<double> left, right;
  };
  auto pick = [](const Outcome& o, auto&& f) -> std::optional<double> {
    if (!o.smoothed) return std::nullopt;
    return f(o);
  };
  auto variability_of = [](const Outcome& o) { return o.smoothed ? o.metrics.variability : o.v_unsmoothed; };
  std::vector<Row> rows = {
      {"variability", variability_of(l), variability_of(r)},
      {"net_bytes_per_second", pick(l, [](auto& o) { return o.metrics.net_per_second; }),
       pick(r, [](auto& o) { return o.metrics.net_per_second; })},
      {"pct_r1", pick(l, [](auto& o) { return 100 * o.metrics.p_r1; }), pick(r, [](auto& o) { return 100 * o.metrics.p_r1; })},
      {"pct_cer", pick(l, [](auto& o) { return 100 * o.metrics.p_cer; }), pick(r, [](auto& o) { return 100 * o.metrics.p_cer; })},
      {"pct_r2", pick(l, [](auto& o) { return 100 * o.metrics.p_r2; }), pick(r, [](auto& o) { return 100 * o.metrics.p_r2; })},
      {"max_buffer_bytes", pick(l, [](auto& o) { return double(o.metrics.max_buffer); }),
       pick(r, [](auto& o) { return double(o.metrics.max_buffer); })},
      {"cer_t_obtained_over_cer", pick(l, [](auto& o) { return o.metrics.cer_t_obtained_ratio; }),
       pick(r, [](auto& o) { return o.metrics.cer_t_obtained_ratio; })},
      {"overflows", pick(l, [](auto& o) { return double(o.metrics.overflows); }),
       pick(r, [](auto& o) { return double(o.metrics.overflows); })},
  };
  auto num = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string("NA"); };
  std::string out = "metric,left,right,improvement_pct\n";
  for (const auto& row : rows) {
    const auto imp = (row.left && row.right) ? fmt::format("{:.4f}", improvement_pct(*row.left, *row.right))
                                             : std::string("NA");
    out += fmt::format("{},{},{},{}\n", row.name, num(row.left), num(row.right), imp);
  }
  write_file(out_path(g, "compare.csv"), out);
  std::cout << out;
  return 0;
}

// ---- fluid ------------------------------------------------------------------

struct FluidArgs {
  std::string params_file;
  std::optional<double> n, rho, beta, lambda, cer_t, alpha, a1, a2, k;
  int grid = 201;
  bool validate_mc = false;
  double horizon = 0.0;
  int batches = 30;
  bool experimental_delay = false;
};

fluid::FluidParams resolve_params(const FluidArgs& a) {
  fluid::FluidParams p;
  if (!a.params_file.empty()) p = fluid::parse_params(read_file(a.params_file));
  else if (!a.n || !a.rho || !a.beta || !a.lambda || !a.cer_t || !a.alpha || !a.a1 || !a.a2 || !a.k)
    throw UsageError("give --params FILE or all of --n --rho --beta --lambda --cer-t --alpha --a1 --a2 --k");
  if (a.n) {
    if (*a.n != std::floor(*a.n)) throw UsageError("--n must be an integer");
    p.n = static_cast<int>(*a.n);
  }
  if (a.rho) p.rho = *a.rho;
  if (a.beta) p.beta = *a.beta;
  if (a.lambda) p.lambda = *a.lambda;
  if (a.cer_t) p.cer_t = *a.cer_t;
  if (a.alpha) p.alpha = *a.alpha;
  if (a.a1) p.a1 = *a.a1;
  if (a.a2) p.a2 = *a.a2;
  if (a.k) p.k = *a.k;
  return p;
}

std::string mc_line(const char* name, double analytic, const fluid::Estimate& e, bool& ok) {
  const double gap = std::abs(analytic - e.mean);
  const bool pass = gap <= 3.0 * e.se + 1e-12;
  ok = ok && pass;
  return fmt::format("mc_{}={:.9g} se={:.3g} analytic={:.9g} z={:.3f} {}\n", name, e.mean, e.se, analytic,
                     e.se > 0 ? gap / e.se : 0.0, pass ? "pass" : "FAIL");
}

int cmd_fluid(const Globals& g, const FluidArgs& a) {
  const auto p = resolve_params(a);
  const auto sol = fluid::solve(p);
  const auto s = fluid::summarize(sol);
  std::string summary = fluid::summary_text(s);
  summary += fmt::format("throughput_by_service={:.12g}\n", fluid::throughput_by_service(sol));
  if (p.alpha == 0.0) {
    const auto single = fluid::solve_single_regime(p);
    const double gap = fluid::max_cdf_gap(sol, single);
    summary += fmt::format("single_regime_check={} gap={:.3e}\n", gap <= 1e-8 ? "passed" : "FAILED", gap);
  }
  if (a.experimental_delay) {
    for (int m : {1, 2}) {
      const auto d = fluid::delay_probability(sol, m);
      summary += fmt::format("experimental_delay_a{}={:.9g}{}\n", m, d.value,
                             d.clamped ? fmt::format(" (clamped from {:.9g})", d.raw) : "");
    }
  }
  bool ok = true;
  if (a.validate_mc) {
    if (!g.seed_given) throw UsageError("--validate-mc needs --seed");
    const double horizon = a.horizon > 0 ? a.horizon : 2e6 / fluid::expected_transition_rate(p);
    const auto mc = fluid::mc_oracle(p, horizon, g.seed, {a.batches, 1e5});
    summary += fmt::format("mc_horizon={:.9g}\nmc_transitions={}\nmc_batches={}\n", horizon, mc.transitions,
                           mc.batches);
    summary += mc_line("throughput", s.throughput, mc.throughput, ok);
    summary += mc_line("loss_probability", s.loss, mc.loss_probability, ok);
    summary += mc_line("p_low", s.regimes.low, mc.p_low, ok);
    summary += mc_line("p_mid", s.regimes.mid, mc.p_mid, ok);
    summary += mc_line("p_high", s.regimes.high, mc.p_high, ok);
    summary += fmt::format("mc_validation={}\n", ok ? "pass" : "FAIL");
  }
  write_file(out_path(g, "summary.txt"), summary);
  write_file(out_path(g, "cdf.csv"), fluid::cdf_csv(sol, a.grid));
  std::cout << summary;
  return ok ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-threshold VBR video smoothing and fluid buffer model"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  Globals g;
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Seed for every synthetic source")->each([&](const std::string&) {
    g.seed_given = true;
  });
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv"}));
  app.add_option("--config", g.config, "Flat key = value file mirroring flag names");

  auto* analyze = app.add_subcommand("analyze", "Frame-size trace statistics");
  analyze->fallthrough();
  TraceSource analyze_src;
  add_trace_options(*analyze, analyze_src);

  auto* smooth = app.add_subcommand("smooth", "Run the smoothing buffer over a trace");
  smooth->fallthrough();
  ExperimentSpec smooth_spec;
  add_experiment_options(*smooth, smooth_spec);

  auto* fluid_cmd = app.add_subcommand("fluid", "Solve the ON-OFF fluid model of the buffer");
  fluid_cmd->fallthrough();
  FluidArgs fa;
  fluid_cmd->add_option("--params", fa.params_file, "Parameter file (n, rho, beta, lambda, cer_t, alpha, a1, a2, k)");
  fluid_cmd->add_option("--n", fa.n, "Number of ON-OFF sources");
  fluid_cmd->add_option("--rho", fa.rho, "OFF->ON rate");
  fluid_cmd->add_option("--beta", fa.beta, "ON->OFF rate");
  fluid_cmd->add_option("--lambda", fa.lambda, "Packets/s per ON source");
  fluid_cmd->add_option("--cer-t", fa.cer_t, "Mid-regime service rate, packets/s");
  fluid_cmd->add_option("--alpha", fa.alpha, "Service-rate spread in [0,1]");
  fluid_cmd->add_option("--a1", fa.a1, "Lower threshold, packets");
  fluid_cmd->add_option("--a2", fa.a2, "Upper threshold, packets");
  fluid_cmd->add_option("--k", fa.k, "Buffer capacity, packets");
  fluid_cmd->add_option("--grid", fa.grid, "Points in cdf.csv");
  fluid_cmd->add_flag("--validate-mc", fa.validate_mc, "Compare against the Monte Carlo oracle");
  fluid_cmd->add_option("--horizon", fa.horizon, "Simulated seconds for --validate-mc");
  fluid_cmd->add_option("--batches", fa.batches, "Batch count for --validate-mc");
  fluid_cmd->add_flag("--experimental-delay", fa.experimental_delay, "Report the threshold delay expression");

  auto* compare = app.add_subcommand("compare", "Run two experiments on the same trace and compare");
  compare->fallthrough();
  std::string left_args, right_args;
  compare->add_option("--left", left_args, "Flags of the first experiment (as for smooth)")->required();
  compare->add_option("--right", right_args, "Flags of the second experiment (as for smooth)")->required();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args), {"analyze", "smooth", "fluid", "compare"});
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*analyze) return cmd_analyze(g, analyze_src);
    if (*smooth) return cmd_smooth(g, smooth_spec);
    if (*fluid_cmd) return cmd_fluid(g, fa);
    if (*compare) return cmd_compare(g, left_args, right_args);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
