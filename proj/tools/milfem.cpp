// Command line driver: solve | convergence | residual | regularity | selftest.
// Exit codes: 0 success, 2 invalid config, 3 numerical blow-up, 4 resource
// error.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "milfem/config.hpp"
#include "milfem/errors.hpp"
#include "milfem/harness.hpp"
#include "milfem/kernels.hpp"
#include "milfem/selftest.hpp"

namespace {

struct CommonFlags {
  std::string config_file;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  double p = 0.0;
  std::string variant;
  std::size_t J = 0;
  std::size_t threads = 0;
  bool threads_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file, "JSON config file");
  cmd->add_option("--paths", flags.paths, "Monte Carlo paths");
  cmd->add_option("--seed", flags.seed, "RNG seed")
      ->each([&](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--p", flags.p, "moment of the error norms");
  cmd->add_option("--variant", flags.variant,
                  "scheme variant: milstein|em|truncated");
  cmd->add_option("--J", flags.J, "noise truncation parameter");
  cmd->add_option("--threads", flags.threads, "worker threads (0 = all)")
      ->each([&](const std::string&) { flags.threads_set = true; });
}

milfem::ExperimentPlan plan_from_flags(const CommonFlags& flags) {
  milfem::ExperimentPlan plan = flags.config_file.empty()
                                    ? milfem::default_plan()
                                    : milfem::load_plan(flags.config_file);
  if (flags.paths > 0) plan.n_paths = flags.paths;
  if (flags.seed_set) plan.seed = flags.seed;
  if (!flags.out.empty()) plan.out_dir = flags.out;
  if (flags.p > 0.0) plan.p = flags.p;
  if (!flags.variant.empty()) {
    if (flags.variant == "milstein")
      plan.variant = milfem::Variant::milstein;
    else if (flags.variant == "em")
      plan.variant = milfem::Variant::euler_maruyama;
    else if (flags.variant == "truncated")
      plan.variant = milfem::Variant::truncated_milstein;
    else
      throw milfem::ConfigError("unknown variant: " + flags.variant);
  }
  if (flags.J > 0) plan.J = flags.J;
  if (flags.threads_set) plan.threads = flags.threads;
  return plan;
}

void print_report(const milfem::RateReport& report) {
  std::printf("%s", milfem::report_csv(report).c_str());
  std::printf("# slope %.4f  intercept %.4f  R^2 %.5f%s\n", report.slope,
              report.intercept, report.r2,
              report.dropped_coarsest ? "  (coarsest rung dropped)" : "");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Milstein-Galerkin finite element solver for semilinear "
               "stochastic heat equations"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string study = "temporal";
  std::string dump_file;

  CLI::App* solve = app.add_subcommand("solve", "single run, trajectory summary");
  add_common(solve, flags);
  solve->add_option("--dump-path", dump_file,
                    "write the first path's increments to a binary file");

  CLI::App* conv = app.add_subcommand(
      "convergence", "temporal|spatial|truncation convergence study");
  add_common(conv, flags);
  conv->add_option("--study", study, "temporal|spatial|truncation");

  CLI::App* resid = app.add_subcommand(
      "residual", "two-sided error/residual study over the k ladder");
  add_common(resid, flags);

  CLI::App* reg = app.add_subcommand("regularity", "moment and Hoelder diagnostics");
  add_common(reg, flags);

  CLI::App* self = app.add_subcommand("selftest", "run the property suites");
  add_common(self, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      milfem::ExperimentPlan plan = plan_from_flags(flags);
      if (!(plan.k_fixed > 0.0)) plan.k_fixed = 1.0 / 256;
      const milfem::TrajectorySummary summary =
          milfem::solve_summary(plan, dump_file);
      std::printf("t,norm,stderr\n");
      for (std::size_t n = 0; n < summary.times.size(); ++n)
        std::printf("%.12g,%.12g,%.12g\n", summary.times[n],
                    summary.norms[n].value, summary.norms[n].se);
      return 0;
    }
    if (conv->parsed()) {
      milfem::ExperimentPlan plan = plan_from_flags(flags);
      if (study == "temporal")
        plan.study = milfem::StudyKind::temporal;
      else if (study == "spatial")
        plan.study = milfem::StudyKind::spatial;
      else if (study == "truncation")
        plan.study = milfem::StudyKind::truncation;
      else
        throw milfem::ConfigError("unknown study: " + study);
      print_report(milfem::run_experiment(plan));
      return 0;
    }
    if (resid->parsed()) {
      milfem::ExperimentPlan plan = plan_from_flags(flags);
      plan.study = milfem::StudyKind::two_sided;
      print_report(milfem::run_experiment(plan));
      return 0;
    }
    if (reg->parsed()) {
      milfem::ExperimentPlan plan = plan_from_flags(flags);
      if (!(plan.k_fixed > 0.0)) plan.k_fixed = 1.0 / 256;
      const milfem::RegularityReport report = milfem::check_regularity(plan);
      std::printf("s,sup_moment,holder_exponent,r2\n");
      for (const auto& e : report.entries)
        std::printf("%.3g,%.12g,%.4f,%.4f\n", e.s, e.sup_moment,
                    e.holder_exponent, e.holder_r2);
      return 0;
    }
    if (self->parsed()) {
      std::printf("kernel backend: %s\n",
                  std::string(milfem::kernels::backend_name(
                                  milfem::kernels::active_backend()))
                      .c_str());
      bool all_ok = true;
      milfem::run_selftest(20240901, [&](const milfem::SelftestResult& r) {
        std::printf("[%s] %s%s%s\n", r.ok ? "ok" : "FAIL", r.name.c_str(),
                    r.detail.empty() ? "" : ": ", r.detail.c_str());
        all_ok = all_ok && r.ok;
      });
      return all_ok ? 0 : 1;
    }
  } catch (const milfem::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const milfem::BlowupError& e) {
    std::fprintf(stderr, "numerical blow-up: %s\n", e.what());
    return 3;
  } catch (const milfem::ResourceError& e) {
    std::fprintf(stderr, "resource error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
