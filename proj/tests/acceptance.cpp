// Acceptance suite: one test per criterion, one PASS/FAIL/SKIP line each.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "fluid_suite.hpp"
#include "vsmooth/vsmooth.hpp"

namespace fs = std::filesystem;
using namespace vsmooth;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kFixture = std::string(VSMOOTH_FIXTURES) + "/g16b3_synth.csv";

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FrameTrace fixture() { return parse_trace(slurp(kFixture), TraceFormat::Csv, 30.0, "g16b3_synth"); }

void note(const std::string& s) { std::cout << "    " << s << '\n'; }

bool within_3se(double analytic, const fluid::Estimate& e) {
  return std::abs(analytic - e.mean) <= 3.0 * e.se + 1e-12;
}

class CriterionPrinter : public testing::EmptyTestEventListener {
  void OnTestEnd(const testing::TestInfo& info) override {
    const auto* r = info.result();
    const char* verdict = r->Skipped() ? "SKIP" : r->Passed() ? "PASS" : "FAIL";
    std::cout << info.name() << ": " << verdict << std::endl;
  }
};

}  // namespace

TEST(Acceptance, AC1_NoUnderflow) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> jitter(0.0, 2.0);
  std::uniform_int_distribution<int> frames(300, 3000);
  std::uniform_real_distribution<double> rc(0.6, 1.6);
  const char* gops[] = {"G16B3", "IBBPBBPBBPBB", "IPPPPPPP", "IBP", "I"};
  std::size_t records = 0, violations = 0;
  for (int k = 0; k < 200; ++k) {
    const auto seed = rng();
    const double j = jitter(rng);
    const auto t = synth_trace(gops[k % 5], {10000, 4000, 1000}, {j, 0.7 * j, 0.5 * j},
                               static_cast<std::size_t>(frames(rng)), seed);
    const auto stats = trace_stats(t);
    const double rc_ratio = rc(rng);
    for (auto mode : {Mode::Baseline, Mode::CreditGated, Mode::Feedback}) {
      const double alpha = std::min(0.02 * (k % 3), stats.per / stats.cer - 1.0);
      const auto cfg = make_config(stats, alpha, 0.030, mode);
      const auto ct = synth_channel(rc_ratio * stats.cer * 4.0, 0.3, t.size() * 40 + 1000, seed + 1);
      const auto feed = aggregate_feedback(ct, 0.030, {1, 4}, {9});
      const auto r = run(t, cfg, mode == Mode::Feedback ? &feed : nullptr);
      for (const auto& rec : r.log.records) {
        ++records;
        if (rec.sent > rec.buffer_before || rec.buffer_after < 0 || rec.sent < 0) ++violations;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  note(fmt::format("600 runs, {} records, {} violations, {:.2f} s", records, violations, elapsed));
  EXPECT_EQ(violations, 0u);
  EXPECT_LT(elapsed, 30.0);
}

TEST(Acceptance, AC2_CbrDegeneracy) {
  // frame and transmission clocks aligned (rtp = Tf), the only setting where
  // a constant trace keeps B exactly on A1 = A2
  for (auto [fps, size] : {std::pair{30.0, 4000}, std::pair{25.0, 1234}, std::pair{30.0, 1}}) {
    const auto t = synth_trace("P", {0, double(size), 0}, {0, 0, 0}, 3000, 1, fps);
    const auto cfg = make_config(trace_stats(t), 0.0, 1.0 / fps);
    const auto r = run(t, cfg);
    std::size_t cer = 0;
    for (const auto& rec : r.log.records) cer += rec.label == RateState::CER;
    const double tolerance = static_cast<double>(r.log.records.size()) / 1000.0;
    note(fmt::format("fps {} size {}: {}/{} CER, net {:.6f} bytes", fps, size, cer, r.log.records.size(),
                     r.bill.net));
    EXPECT_EQ(cer, r.log.records.size());
    EXPECT_LE(std::abs(r.bill.net), tolerance);
  }
}

TEST(Acceptance, AC3_VariabilityImprovement) {
  const auto t0 = Clock::now();
  const auto t = fixture();
  const auto cfg = make_config(trace_stats(t), 0.0);
  const auto r = run(t, cfg);
  const double before = variability(baseline_rates(t));
  const double after = run_metrics(r.log, r.bill, cfg).variability;
  const double gain = improvement_pct(before, after);
  const double elapsed = seconds_since(t0);
  note(fmt::format("V unsmoothed {:.4f}, smoothed {:.4f}, improvement {:.2f}%, {:.2f} s", before, after, gain,
                   elapsed));
  EXPECT_LT(after, before);
  EXPECT_GE(gain, 20.0);
  EXPECT_LT(elapsed, 10.0);
}

TEST(Acceptance, AC4_FeedbackTightening) {
  const auto t = fixture();
  const auto stats = trace_stats(t);
  // share 10/73 of one PRB per TTI: R_c = 1.1 CER, R_max = 8.03 CER (about 0.9 PER here)
  const double prb = 1.1 * stats.cer * 7.3;
  const auto ct = synth_channel(prb, 0.1, 200000, 77);
  const auto feed = aggregate_feedback(ct, 0.030, {10, 73}, {1});
  double rc = 0, rmax = 0;
  for (const auto& w : feed.windows) {
    rc += w.r_c;
    rmax += w.r_max;
  }
  rc /= static_cast<double>(feed.windows.size());
  rmax /= static_cast<double>(feed.windows.size());

  const auto base_cfg = make_config(stats, 0.0);
  const auto fb_cfg = make_config(stats, 0.0, 0.030, Mode::Feedback);
  const auto base = run(t, base_cfg);
  const auto fb = run(t, fb_cfg, &feed);
  const auto mb = run_metrics(base.log, base.bill, base_cfg);
  const auto mf = run_metrics(fb.log, fb.bill, fb_cfg);
  note(fmt::format("R_c/CER {:.3f}, R_max/PER {:.3f}", rc / stats.cer, rmax / stats.per));
  note(fmt::format("V baseline {:.6f}, feedback {:.6f}; overflows {}/{}, underflows {}/{}", mb.variability,
                   mf.variability, mb.overflows, mf.overflows, mb.underflows, mf.underflows));
  EXPECT_LE(mf.variability, mb.variability);
  EXPECT_EQ(mf.overflows, 0);
  EXPECT_EQ(mf.underflows, 0);
  EXPECT_EQ(mb.overflows, 0);
  EXPECT_EQ(mb.underflows, 0);
}

TEST(Acceptance, AC5_SilenceTraceReproduction) {
  const char* path = std::getenv("VSMOOTH_SILENCE_TRACE");
  if (path == nullptr || !fs::exists(path))
    GTEST_SKIP() << "set VSMOOTH_SILENCE_TRACE to the H.264 Silence of the Lambs trace to run";
  // CSV if the name says so; otherwise an ASU verbose file, whose #cols line
  // may come from VSMOOTH_SILENCE_COLS when the file lacks one
  std::string text = slurp(path);
  auto format = fs::path(path).extension() == ".csv" ? TraceFormat::Csv : TraceFormat::Asu;
  if (format == TraceFormat::Asu && text.find("#cols") == std::string::npos) {
    const char* cols = std::getenv("VSMOOTH_SILENCE_COLS");
    if (cols == nullptr) GTEST_SKIP() << "ASU trace without #cols; set VSMOOTH_SILENCE_COLS";
    text = std::string(cols) + "\n" + text;
  }
  const auto t = parse_trace(text, format, 30.0, path);
  const auto cfg = make_config(trace_stats(t), 0.0);
  const auto r = run(t, cfg);
  const auto m = run_metrics(r.log, r.bill, cfg);
  note(fmt::format("{} frames, max B {}, net/s {:.2f}", t.size(), m.max_buffer, m.net_per_second));
  EXPECT_NEAR(static_cast<double>(m.max_buffer), 24986.0, 0.05 * 24986.0);
  EXPECT_NEAR(m.net_per_second, 124.7, 0.10 * 124.7);
}

TEST(Acceptance, AC6_FluidVersusMonteCarlo) {
  const auto t0 = Clock::now();
  double pl_min = 1, pl_max = 0;
  for (const auto& in : suite::instances()) {
    const auto sol = fluid::solve(in.params);
    const auto s = fluid::summarize(sol);
    const auto mc = fluid::mc_oracle(in.params, suite::horizon(in.params), in.seed);
    pl_min = std::min(pl_min, s.loss);
    pl_max = std::max(pl_max, s.loss);
    note(fmt::format("{} (N={}): {} transitions; P_L {:.6g} vs {:.6g}+-{:.2g}; T {:.6g} vs {:.6g}+-{:.2g}", in.name,
                     in.params.n, mc.transitions, s.loss, mc.loss_probability.mean, mc.loss_probability.se,
                     s.throughput, mc.throughput.mean, mc.throughput.se));
    note(fmt::format("    regimes ({:.4f}, {:.4f}, {:.4f}) vs ({:.4f}, {:.4f}, {:.4f})", s.regimes.low, s.regimes.mid,
                     s.regimes.high, mc.p_low.mean, mc.p_mid.mean, mc.p_high.mean));
    EXPECT_GE(mc.transitions, 100000u) << in.name;
    EXPECT_TRUE(within_3se(s.throughput, mc.throughput)) << in.name << " throughput";
    EXPECT_TRUE(within_3se(s.loss, mc.loss_probability)) << in.name << " loss";
    EXPECT_TRUE(within_3se(s.regimes.low, mc.p_low)) << in.name << " low";
    EXPECT_TRUE(within_3se(s.regimes.mid, mc.p_mid)) << in.name << " mid";
    EXPECT_TRUE(within_3se(s.regimes.high, mc.p_high)) << in.name << " high";
  }
  const double elapsed = seconds_since(t0);
  note(fmt::format("P_L spans [{:.4g}, {:.4g}], {:.2f} s", pl_min, pl_max, elapsed));
  EXPECT_EQ(pl_min, 0.0);
  EXPECT_GT(pl_max, 0.2);
  EXPECT_LE(pl_max, 0.3);
  EXPECT_LT(elapsed, 120.0);
}

TEST(Acceptance, AC7_TwoStateClosedForm) {
  // Independent oracle, two-state finite queue served at c in (0, lambda):
  //   z = rho/c - beta/(lambda-c), g = beta c/(rho (lambda-c)),
  //   F_0 = B(e^{zx} - g), F_1 = B c/(lambda-c)(e^{zx} - 1), B = P_0/(e^{zK} - g)
  const double rho = 1, beta = 2, lambda = 3, c = 1.5, k = 4;
  const double z = rho / c - beta / (lambda - c);
  const double g = beta * c / (rho * (lambda - c));
  const double b = beta / (rho + beta) / (std::exp(z * k) - g);
  const auto sol = fluid::solve_single_regime(fluid::FluidParams{1, rho, beta, lambda, c, 0.0, 1, 2, k});
  double worst = 0;
  for (double x : {0.0, 0.5, 1.3, 2.7, 3.9}) {
    const double f0 = b * (std::exp(z * x) - g);
    const double f1 = b * c / (lambda - c) * (std::exp(z * x) - 1);
    worst = std::max({worst, std::abs(sol.cdf(0, x) - f0), std::abs(sol.cdf(1, x) - f1)});
  }
  note(fmt::format("max |F - closed form| at 5 levels: {:.3e}", worst));
  EXPECT_LE(worst, 1e-6);
}

TEST(Acceptance, AC8_NumericalHygiene) {
  for (const auto& in : suite::instances()) {
    const auto sol = fluid::solve(in.params);
    const auto q = fluid::assess(sol, 1000);
    auto p0 = in.params;
    p0.alpha = 0.0;
    const double gap = fluid::max_cdf_gap(fluid::solve(p0), fluid::solve_single_regime(p0));
    note(fmt::format("{}: residual {:.2e}, sum F(K) {:.12f}, min {:.1e}, drop {:.1e}, alpha=0 gap {:.1e}", in.name,
                     q.eigen_residual, q.normalization, q.min_value, q.max_decrease, gap));
    EXPECT_LE(q.eigen_residual, 1e-8) << in.name;
    EXPECT_NEAR(q.normalization, 1.0, 1e-6) << in.name;
    EXPECT_GE(q.min_value, -1e-9) << in.name;
    EXPECT_LE(q.max_decrease, 1e-9) << in.name;
    EXPECT_LE(q.max_excess, 1e-9) << in.name;
    EXPECT_LE(gap, 1e-8) << in.name;
  }
}

TEST(Acceptance, AC9_Determinism) {
  const auto root = fs::temp_directory_path() / "vsmooth_acceptance";
  auto run_cli = [&](const std::string& tag, const std::string& args) {
    const auto dir = root / tag;
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cmd = std::string(VSMOOTH_CLI) + " --out '" + dir.string() + "' " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    EXPECT_TRUE(WIFEXITED(status) && WEXITSTATUS(status) == 0) << cmd;
    return dir;
  };
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"smooth_fb", "--seed 31 smooth --synth n=2000 jitter=1.1 --mode feedback --channel-synth rc_over_cer=1.1 "
                    "sd=0.3 rmax_over_per=0.9"},
      {"smooth_credit", "smooth --trace " + kFixture + " --mode credit --alpha 0.01 --capacity 25000"},
      {"fluid_mc", "--seed 8 fluid --n 4 --rho 1 --beta 3 --lambda 1 --cer-t 1.2 --alpha 0.5 --a1 1 --a2 2 --k 4 "
                   "--validate-mc --horizon 200000 --experimental-delay"},
  };
  for (const auto& [tag, args] : cases) {
    const auto a = run_cli(tag + "_a", args);
    const auto b = run_cli(tag + "_b", args);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto name = entry.path().filename();
      ASSERT_TRUE(fs::exists(b / name)) << tag << ": " << name;
      EXPECT_EQ(slurp(a / name), slurp(b / name)) << tag << ": " << name;
      ++files;
    }
    note(fmt::format("{}: {} files identical", tag, files));
    EXPECT_GT(files, 0u);
  }
}

int main(int argc, char** argv) {
  testing::InitGoogleTest(&argc, argv);
  testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
  return RUN_ALL_TESTS();
}
