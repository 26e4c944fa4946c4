#include "milfem/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "milfem/errors.hpp"
#include "milfem/parallel.hpp"

namespace milfem {

namespace {

// Holds <out_dir>/.lock for the duration of one experiment.
class DirLock {
public:
  explicit DirLock(const std::string& dir) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    path_ = dir + "/.lock";
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr)
      throw ConfigError("output directory is locked by another experiment: " +
                        dir);
    std::fclose(f);
    held_ = true;
  }
  ~DirLock() {
    if (held_) std::remove(path_.c_str());
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

private:
  std::string path_;
  bool held_ = false;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void validate_dyadic(const std::vector<double>& ladder) {
  if (ladder.empty()) throw ConfigError("experiment ladder is empty");
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
    if (!(ladder[i] > ladder[i + 1]))
      throw ConfigError("k ladder must be sorted from coarse to fine");
    const double ratio = ladder[i] / ladder[i + 1];
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
      throw ConfigError("k ladder rungs must nest (integer refinement)");
  }
}

std::size_t ratio_of(double coarse, double fine) {
  const double r = coarse / fine;
  const auto n = static_cast<std::size_t>(std::llround(r));
  if (n == 0 || std::abs(r - static_cast<double>(n)) > 1e-9)
    throw ConfigError("grids do not nest");
  return n;
}

SchemeConfig scheme_config(const ExperimentPlan& plan, Variant variant,
                           double k, const Mesh1D& mesh, std::size_t J) {
  SchemeConfig config;
  config.variant = variant;
  config.grid = make_time_grid(k, plan.problem.T);
  config.mesh = mesh;
  config.J = J;
  config.levy = plan.levy;
  config.levy_terms = plan.levy_terms;
  return config;
}

struct RungReduction {
  NodeSampleSet errors;
  NodeSampleSet residuals;
  bool with_residual;
  RungReduction(std::size_t n_nodes, std::size_t n_paths, bool residual)
      : errors(n_nodes, n_paths),
        residuals(residual ? n_nodes : 1, residual ? n_paths : 1),
        with_residual(residual) {}
};

RungResult reduce_rung(double param, RungReduction& red, double p) {
  RungResult rung;
  rung.param = param;
  const LpEstimate err = red.errors.max_over_nodes(p);
  rung.error = err.value;
  rung.error_se = err.se;
  if (red.with_residual) {
    const LpEstimate t0 = red.residuals.node(0, p);
    LpEstimate best;
    for (std::size_t n = 1; n < red.residuals.n_nodes(); ++n) {
      const LpEstimate e = red.residuals.node(n, p);
      if (e.value >= best.value) best = e;
    }
    rung.residual_norm = t0.value + best.value;
    rung.residual_se = std::sqrt(t0.se * t0.se + best.se * best.se);
    rung.ratio = two_sided_ratio(rung.error, rung.residual_norm);
    rung.has_residual = true;
  }
  return rung;
}

void finalize_fit(RateReport& report, const ExperimentPlan& plan) {
  std::vector<double> params, errors, weights;
  for (const RungResult& r : report.rungs) {
    params.push_back(r.param);
    errors.push_back(r.error);
    if (r.error > 0.0 && r.error_se > 0.0)
      weights.push_back(std::pow(r.error / r.error_se, 2.0));
    else
      weights.push_back(1.0);
  }
  const GuardedFit fit = fit_rate(
      params, errors, plan.weighted_fit ? &weights : nullptr);
  report.slope = fit.fit.slope;
  report.intercept = fit.fit.intercept;
  report.r2 = fit.fit.r2;
  report.dropped_coarsest = fit.dropped_coarsest;
}

RateReport temporal_study(const ExperimentPlan& plan, bool with_residual) {
  validate_dyadic(plan.k_ladder);
  const ProblemSpec& problem = plan.problem;
  const Mesh1D mesh = make_mesh(plan.n_cells);
  FemOperators ops = assemble(mesh);

  const double k_min = plan.k_ladder.back();
  const double k_ref = k_min / static_cast<double>(plan.ref_time_factor);
  const SchemeConfig ref_config =
      scheme_config(plan, Variant::milstein, k_ref, mesh, 0);
  const SchemeRunner ref_runner(problem, ref_config, ops);

  std::vector<SchemeConfig> rung_configs;
  std::vector<SchemeRunner> rung_runners;
  std::vector<std::size_t> coarsen_factors, keep_strides;
  rung_runners.reserve(plan.k_ladder.size());
  for (double k : plan.k_ladder) {
    rung_configs.push_back(
        scheme_config(plan, plan.variant, k, mesh, plan.J));
    coarsen_factors.push_back(ratio_of(k, k_ref));
    keep_strides.push_back(ratio_of(k, k_min));
  }
  for (const SchemeConfig& c : rung_configs)
    rung_runners.emplace_back(problem, c, ops);

  const std::size_t keep = plan.ref_time_factor; // reference stride to k_min
  std::vector<RungReduction> reductions;
  for (const SchemeConfig& c : rung_configs)
    reductions.emplace_back(c.grid.n_steps + 1, plan.n_paths, with_residual);

  parallel_for(plan.n_paths, plan.threads, [&](std::size_t pi) {
    const WienerPath path_f = sample_path(problem.covariance, k_ref,
                                          ref_config.grid.n_steps, plan.seed,
                                          pi);
    const std::vector<GridFunctionH> ref_kept =
        ref_runner.run_strided(path_f, keep);

    for (std::size_t ri = 0; ri < rung_configs.size(); ++ri) {
      const SchemeRunner& runner = rung_runners[ri];
      const std::size_t N = rung_configs[ri].grid.n_steps;
      const WienerPath path_c = coarsen(path_f, coarsen_factors[ri]);
      const GridProcess x = runner.run(path_c);

      std::vector<double> norms(N + 1);
      GridFunctionH diff = zero_grid_function(mesh);
      for (std::size_t n = 0; n <= N; ++n) {
        const GridFunctionH& ref_state = ref_kept[n * keep_strides[ri]];
        for (std::size_t i = 0; i < diff.size(); ++i)
          diff.nodal[i] = x.states[n].nodal[i] - ref_state.nodal[i];
        norms[n] = mass_norm(diff, ops);
      }
      reductions[ri].errors.set_path(pi, norms);

      if (with_residual) {
        GridProcess restricted;
        restricted.grid = rung_configs[ri].grid;
        restricted.seed = path_f.seed;
        restricted.path_index = path_f.path_index;
        restricted.states.reserve(N + 1);
        for (std::size_t n = 0; n <= N; ++n)
          restricted.states.push_back(ref_kept[n * keep_strides[ri]]);
        const ResidualField rf = residual(restricted, runner, path_c);
        reductions[ri].residuals.set_path(pi,
                                          propagated_residual_norms(rf, ops));
      }
    }
  });

  RateReport report;
  report.study = study_name(with_residual ? StudyKind::two_sided
                                          : StudyKind::temporal);
  report.n_paths = plan.n_paths;
  report.seed = plan.seed;
  report.p = plan.p;
  for (std::size_t ri = 0; ri < rung_configs.size(); ++ri)
    report.rungs.push_back(
        reduce_rung(plan.k_ladder[ri], reductions[ri], plan.p));
  finalize_fit(report, plan);
  return report;
}

RateReport spatial_study(const ExperimentPlan& plan) {
  if (plan.cells_ladder.empty()) throw ConfigError("spatial ladder is empty");
  if (!(plan.k_fixed > 0.0)) throw ConfigError("spatial study needs a fixed k");
  for (std::size_t i = 0; i + 1 < plan.cells_ladder.size(); ++i)
    if (plan.cells_ladder[i] >= plan.cells_ladder[i + 1])
      throw ConfigError("cells ladder must be sorted from coarse to fine");

  const ProblemSpec& problem = plan.problem;
  const std::size_t ref_cells =
      plan.cells_ladder.back() * plan.ref_space_factor;
  const Mesh1D ref_mesh = make_mesh(ref_cells);
  FemOperators ref_ops = assemble(ref_mesh);
  const SchemeConfig ref_config =
      scheme_config(plan, Variant::milstein, plan.k_fixed, ref_mesh, 0);
  const SchemeRunner ref_runner(problem, ref_config, ref_ops);
  const std::size_t N = ref_config.grid.n_steps;

  std::vector<Mesh1D> meshes;
  std::vector<FemOperators> opses;
  for (std::size_t cells : plan.cells_ladder) {
    if (ref_cells % cells != 0)
      throw ConfigError("spatial rungs must nest into the reference mesh");
    meshes.push_back(make_mesh(cells));
    opses.push_back(assemble(meshes.back()));
  }
  std::vector<SchemeRunner> runners;
  runners.reserve(meshes.size());
  std::vector<SchemeConfig> configs;
  for (std::size_t ri = 0; ri < meshes.size(); ++ri)
    configs.push_back(
        scheme_config(plan, plan.variant, plan.k_fixed, meshes[ri], plan.J));
  for (std::size_t ri = 0; ri < meshes.size(); ++ri)
    runners.emplace_back(problem, configs[ri], opses[ri]);

  std::vector<RungReduction> reductions;
  for (std::size_t ri = 0; ri < meshes.size(); ++ri)
    reductions.emplace_back(N + 1, plan.n_paths, false);

  parallel_for(plan.n_paths, plan.threads, [&](std::size_t pi) {
    const WienerPath path =
        sample_path(problem.covariance, plan.k_fixed, N, plan.seed, pi);
    const GridProcess x_ref = ref_runner.run(path);
    for (std::size_t ri = 0; ri < meshes.size(); ++ri) {
      const GridProcess x = runners[ri].run(path);
      std::vector<double> norms(N + 1);
      for (std::size_t n = 0; n <= N; ++n) {
        GridFunctionH lifted = prolong(x.states[n], meshes[ri], ref_mesh);
        for (std::size_t i = 0; i < lifted.size(); ++i)
          lifted.nodal[i] -= x_ref.states[n].nodal[i];
        norms[n] = mass_norm(lifted, ref_ops);
      }
      reductions[ri].errors.set_path(pi, norms);
    }
  });

  RateReport report;
  report.study = study_name(StudyKind::spatial);
  report.n_paths = plan.n_paths;
  report.seed = plan.seed;
  report.p = plan.p;
  for (std::size_t ri = 0; ri < meshes.size(); ++ri)
    report.rungs.push_back(
        reduce_rung(meshes[ri].h, reductions[ri], plan.p));
  finalize_fit(report, plan);
  return report;
}

RateReport truncation_study(const ExperimentPlan& plan) {
  if (plan.J_ladder.empty()) throw ConfigError("truncation ladder is empty");
  if (!(plan.k_fixed > 0.0))
    throw ConfigError("truncation study needs a fixed k");
  const ProblemSpec& problem = plan.problem;
  const Mesh1D mesh = make_mesh(plan.n_cells);
  FemOperators ops = assemble(mesh);
  const SchemeConfig full_config =
      scheme_config(plan, Variant::milstein, plan.k_fixed, mesh, 0);
  const SchemeRunner full_runner(problem, full_config, ops);
  const std::size_t N = full_config.grid.n_steps;

  std::vector<SchemeRunner> runners;
  runners.reserve(plan.J_ladder.size());
  for (std::size_t J : plan.J_ladder)
    runners.emplace_back(
        problem,
        scheme_config(plan, Variant::truncated_milstein, plan.k_fixed, mesh, J),
        ops);

  std::vector<RungReduction> reductions;
  for (std::size_t ri = 0; ri < plan.J_ladder.size(); ++ri)
    reductions.emplace_back(N + 1, plan.n_paths, false);

  parallel_for(plan.n_paths, plan.threads, [&](std::size_t pi) {
    const WienerPath path =
        sample_path(problem.covariance, plan.k_fixed, N, plan.seed, pi);
    const GridProcess x_full = full_runner.run(path);
    for (std::size_t ri = 0; ri < plan.J_ladder.size(); ++ri) {
      const GridProcess x = runners[ri].run(path);
      std::vector<double> norms(N + 1);
      GridFunctionH diff = zero_grid_function(mesh);
      for (std::size_t n = 0; n <= N; ++n) {
        for (std::size_t i = 0; i < diff.size(); ++i)
          diff.nodal[i] = x.states[n].nodal[i] - x_full.states[n].nodal[i];
        norms[n] = mass_norm(diff, ops);
      }
      reductions[ri].errors.set_path(pi, norms);
    }
  });

  RateReport report;
  report.study = study_name(StudyKind::truncation);
  report.n_paths = plan.n_paths;
  report.seed = plan.seed;
  report.p = plan.p;
  for (std::size_t ri = 0; ri < plan.J_ladder.size(); ++ri)
    report.rungs.push_back(reduce_rung(
        static_cast<double>(plan.J_ladder[ri]), reductions[ri], plan.p));
  finalize_fit(report, plan);
  return report;
}

} // namespace

std::string study_name(StudyKind kind) {
  switch (kind) {
    case StudyKind::temporal: return "temporal";
    case StudyKind::spatial: return "spatial";
    case StudyKind::truncation: return "truncation";
    case StudyKind::two_sided: return "two-sided";
    case StudyKind::regularity: return "regularity";
  }
  return "unknown";
}

FitResult fit_loglog(const std::vector<double>& param,
                     const std::vector<double>& error,
                     const std::vector<double>* weights) {
  if (param.size() != error.size() || param.size() < 3)
    throw std::invalid_argument("fit_loglog: need at least 3 points");
  const std::size_t n = param.size();
  std::vector<double> lx(n), ly(n), w(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(param[i] > 0.0) || !(error[i] > 0.0))
      throw std::invalid_argument("fit_loglog: values must be positive");
    lx[i] = std::log(param[i]);
    ly[i] = std::log(error[i]);
    if (weights != nullptr) w[i] = (*weights)[i];
  }
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    swx += w[i] * lx[i];
    swy += w[i] * ly[i];
    swxx += w[i] * lx[i] * lx[i];
    swxy += w[i] * lx[i] * ly[i];
  }
  const double det = sw * swxx - swx * swx;
  if (det == 0.0) throw std::invalid_argument("fit_loglog: degenerate abscissae");
  FitResult fit;
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.intercept = (swxx * swy - swx * swxy) / det;
  double ss_res = 0, ss_tot = 0;
  const double ymean = swy / sw;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = fit.intercept + fit.slope * lx[i];
    ss_res += w[i] * (ly[i] - pred) * (ly[i] - pred);
    ss_tot += w[i] * (ly[i] - ymean) * (ly[i] - ymean);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

GuardedFit fit_rate(const std::vector<double>& param,
                    const std::vector<double>& error,
                    const std::vector<double>* weights) {
  GuardedFit out;
  out.fit = fit_loglog(param, error, weights);
  if (out.fit.r2 < 0.98 && param.size() >= 4) {
    // Drop the rung with the largest error (the pre-asymptotic coarse end).
    std::size_t drop = 0;
    for (std::size_t i = 1; i < error.size(); ++i)
      if (error[i] > error[drop]) drop = i;
    std::vector<double> p2, e2, w2;
    for (std::size_t i = 0; i < param.size(); ++i) {
      if (i == drop) continue;
      p2.push_back(param[i]);
      e2.push_back(error[i]);
      if (weights != nullptr) w2.push_back((*weights)[i]);
    }
    out.fit = fit_loglog(p2, e2, weights != nullptr ? &w2 : nullptr);
    out.dropped_coarsest = true;
  }
  return out;
}

ReferenceSet make_reference(const ExperimentPlan& plan, FemOperators& ops) {
  const ProblemSpec& problem = plan.problem;
  double k_ref;
  if (!plan.k_ladder.empty())
    k_ref = plan.k_ladder.back() / static_cast<double>(plan.ref_time_factor);
  else if (plan.k_fixed > 0.0)
    k_ref = plan.k_fixed;
  else
    throw ConfigError("make_reference: no step size in plan");

  ReferenceSet set;
  set.config = SchemeConfig{};
  set.config.variant = Variant::milstein;
  set.config.grid = make_time_grid(k_ref, problem.T);
  set.config.mesh = ops.mesh;
  set.config.levy = plan.levy;
  set.config.levy_terms = plan.levy_terms;

  const std::size_t N = set.config.grid.n_steps;
  const std::size_t state_bytes =
      (N + 1) * ops.mesh.n_nodes() * sizeof(double);
  const std::size_t path_bytes =
      N * problem.covariance.n_modes * sizeof(double);
  const std::size_t required = plan.n_paths * (state_bytes + path_bytes);
  if (required > plan.memory_budget_mb * std::size_t{1024} * 1024)
    throw ResourceError(
        "make_reference: materialized reference needs " +
            std::to_string(required) + " bytes, budget is " +
            std::to_string(plan.memory_budget_mb * std::size_t{1024} * 1024),
        required);

  const SchemeRunner runner(problem, set.config, ops);
  set.processes.resize(plan.n_paths);
  set.paths.resize(plan.n_paths);
  parallel_for(plan.n_paths, plan.threads, [&](std::size_t pi) {
    set.paths[pi] =
        sample_path(problem.covariance, k_ref, N, plan.seed, pi);
    set.processes[pi] = runner.run(set.paths[pi]);
  });
  return set;
}

LpEstimate strong_error(const std::vector<GridProcess>& coarse,
                        const Mesh1D& coarse_mesh,
                        const std::vector<GridProcess>& reference,
                        const Mesh1D& reference_mesh, double p) {
  if (coarse.size() != reference.size() || coarse.empty())
    throw std::invalid_argument("strong_error: path sets must match");
  FemOperators ref_ops = assemble(reference_mesh);
  const std::size_t Nc = coarse[0].grid.n_steps;
  const std::size_t stride = ratio_of(coarse[0].grid.k, reference[0].grid.k);
  if (reference[0].grid.n_steps != Nc * stride)
    throw std::invalid_argument("strong_error: time grids do not nest");
  NodeSampleSet set(Nc + 1);
  for (std::size_t m = 0; m < coarse.size(); ++m) {
    std::vector<double> norms(Nc + 1);
    for (std::size_t n = 0; n <= Nc; ++n) {
      GridFunctionH lifted =
          prolong(coarse[m].states[n], coarse_mesh, reference_mesh);
      const GridFunctionH& ref = reference[m].states[n * stride];
      for (std::size_t i = 0; i < lifted.size(); ++i)
        lifted.nodal[i] -= ref.nodal[i];
      norms[n] = mass_norm(lifted, ref_ops);
    }
    set.add_path(norms);
  }
  return set.max_over_nodes(p);
}

RateReport run_experiment(const ExperimentPlan& plan) {
  const DirLock lock(plan.out_dir);
  RateReport report;
  switch (plan.study) {
    case StudyKind::temporal:
      report = temporal_study(plan, false);
      break;
    case StudyKind::two_sided:
      report = temporal_study(plan, true);
      break;
    case StudyKind::spatial:
      report = spatial_study(plan);
      break;
    case StudyKind::truncation:
      report = truncation_study(plan);
      break;
    case StudyKind::regularity:
      throw ConfigError("run_experiment: use check_regularity for regularity studies");
  }
  if (!plan.out_dir.empty()) write_report(report, plan.out_dir);
  return report;
}

RegularityReport check_regularity(const ExperimentPlan& plan) {
  const ProblemSpec& problem = plan.problem;
  if (!(plan.k_fixed > 0.0))
    throw ConfigError("regularity study needs a fixed k");
  const Mesh1D mesh = make_mesh(plan.n_cells);
  FemOperators ops = assemble(mesh);
  const SchemeConfig config =
      scheme_config(plan, plan.variant, plan.k_fixed, mesh, plan.J);
  const SchemeRunner runner(problem, config, ops);
  const std::size_t N = config.grid.n_steps;
  const std::size_t n_lift =
      lift_mode_cap(mesh, problem.basis);
  const SpectralLift lift(mesh, problem.basis, n_lift);

  const std::vector<double> s_values = {0.0, problem.r, 1.0 + problem.r};
  const double two_p = 2.0 * problem.p;

  // Dyadic lags 1, 2, 4, 8 steps: the Hoelder exponent is a small-lag
  // quantity; long lags saturate once lambda_j * lag ~ 1.
  std::vector<std::size_t> lags;
  for (std::size_t lag = 1; lag <= 8 && 4 * lag <= N; lag *= 2)
    lags.push_back(lag);

  // Accumulators: per s, per node moments; per (s, lag) pooled moments.
  std::vector<std::vector<double>> node_moment(
      s_values.size(), std::vector<double>(N + 1, 0.0));
  std::vector<std::vector<double>> lag_moment(
      s_values.size(), std::vector<double>(lags.size(), 0.0));
  std::vector<std::vector<std::size_t>> lag_count(
      s_values.size(), std::vector<std::size_t>(lags.size(), 0));
  std::mutex acc_mutex;

  parallel_for(plan.n_paths, plan.threads, [&](std::size_t pi) {
    const WienerPath path =
        sample_path(problem.covariance, plan.k_fixed, N, plan.seed, pi);
    const GridProcess x = runner.run(path);
    std::vector<SpectralVector> coeffs(N + 1);
    for (std::size_t n = 0; n <= N; ++n) coeffs[n] = lift.apply(x.states[n]);

    std::vector<std::vector<double>> local_node(
        s_values.size(), std::vector<double>(N + 1, 0.0));
    std::vector<std::vector<double>> local_lag(
        s_values.size(), std::vector<double>(lags.size(), 0.0));
    std::vector<std::vector<std::size_t>> local_count(
        s_values.size(), std::vector<std::size_t>(lags.size(), 0));
    SpectralVector diff;
    diff.coeff.resize(n_lift);
    for (std::size_t si = 0; si < s_values.size(); ++si) {
      for (std::size_t n = 0; n <= N; ++n)
        local_node[si][n] = std::pow(
            fractional_norm(coeffs[n], s_values[si], problem.basis), two_p);
      for (std::size_t li = 0; li < lags.size(); ++li) {
        for (std::size_t n = 0; n + lags[li] <= N; ++n) {
          for (std::size_t j = 0; j < n_lift; ++j)
            diff.coeff[j] =
                coeffs[n + lags[li]].coeff[j] - coeffs[n].coeff[j];
          local_lag[si][li] += std::pow(
              fractional_norm(diff, s_values[si], problem.basis), two_p);
          local_count[si][li] += 1;
        }
      }
    }
    const std::lock_guard<std::mutex> guard(acc_mutex);
    for (std::size_t si = 0; si < s_values.size(); ++si) {
      for (std::size_t n = 0; n <= N; ++n)
        node_moment[si][n] += local_node[si][n];
      for (std::size_t li = 0; li < lags.size(); ++li) {
        lag_moment[si][li] += local_lag[si][li];
        lag_count[si][li] += local_count[si][li];
      }
    }
  });

  RegularityReport report;
  report.n_paths = plan.n_paths;
  report.seed = plan.seed;
  for (std::size_t si = 0; si < s_values.size(); ++si) {
    RegularityEntry entry;
    entry.s = s_values[si];
    for (std::size_t n = 0; n <= N; ++n)
      entry.sup_moment =
          std::max(entry.sup_moment,
                   node_moment[si][n] / static_cast<double>(plan.n_paths));
    std::vector<double> lag_seconds, moments;
    for (std::size_t li = 0; li < lags.size(); ++li) {
      const double mean = lag_moment[si][li] /
                          static_cast<double>(lag_count[si][li] * plan.n_paths);
      lag_seconds.push_back(static_cast<double>(lags[li]) * plan.k_fixed);
      moments.push_back(std::pow(mean, 1.0 / two_p));
    }
    if (moments.size() >= 3) {
      const FitResult fit = fit_loglog(lag_seconds, moments);
      entry.holder_exponent = fit.slope;
      entry.holder_r2 = fit.r2;
    }
    report.entries.push_back(entry);
  }
  return report;
}

TrajectorySummary solve_summary(const ExperimentPlan& plan,
                                const std::string& dump_path_file) {
  const ProblemSpec& problem = plan.problem;
  if (!(plan.k_fixed > 0.0)) throw ConfigError("solve needs a step size");
  const Mesh1D mesh = make_mesh(plan.n_cells);
  FemOperators ops = assemble(mesh);
  const SchemeConfig config =
      scheme_config(plan, plan.variant, plan.k_fixed, mesh, plan.J);
  const SchemeRunner runner(problem, config, ops);
  const std::size_t N = config.grid.n_steps;

  NodeSampleSet set(N + 1, plan.n_paths);
  parallel_for(plan.n_paths, plan.threads, [&](std::size_t pi) {
    const WienerPath path =
        sample_path(problem.covariance, plan.k_fixed, N, plan.seed, pi);
    if (pi == 0 && !dump_path_file.empty()) dump_path(path, dump_path_file);
    const GridProcess x = runner.run(path);
    set.set_path(pi, state_norms(x, ops));
  });

  TrajectorySummary summary;
  for (std::size_t n = 0; n <= N; ++n) {
    summary.times.push_back(config.grid.node(n));
    summary.norms.push_back(set.node(n, plan.p));
  }
  return summary;
}

std::string report_csv(const RateReport& report) {
  std::string csv =
      "study,rung_param,error,stderr,residual_norm,ratio,n_paths,seed\n";
  for (const RungResult& r : report.rungs) {
    csv += report.study;
    csv += "," + format_double(r.param);
    csv += "," + format_double(r.error);
    csv += "," + format_double(r.error_se);
    csv += "," + (r.has_residual ? format_double(r.residual_norm)
                                 : std::string("nan"));
    csv += "," + (r.has_residual ? format_double(r.ratio) : std::string("nan"));
    csv += "," + std::to_string(report.n_paths);
    csv += "," + std::to_string(report.seed);
    csv += "\n";
  }
  return csv;
}

std::string report_json(const RateReport& report) {
  nlohmann::ordered_json j;
  j["study"] = report.study;
  j["n_paths"] = report.n_paths;
  j["seed"] = report.seed;
  j["p"] = report.p;
  j["slope"] = report.slope;
  j["intercept"] = report.intercept;
  j["r2"] = report.r2;
  j["dropped_coarsest"] = report.dropped_coarsest;
  j["rungs"] = nlohmann::ordered_json::array();
  for (const RungResult& r : report.rungs) {
    nlohmann::ordered_json rj;
    rj["rung_param"] = r.param;
    rj["error"] = r.error;
    rj["stderr"] = r.error_se;
    if (r.has_residual) {
      rj["residual_norm"] = r.residual_norm;
      rj["residual_stderr"] = r.residual_se;
      rj["ratio"] = r.ratio;
    }
    j["rungs"].push_back(rj);
  }
  return j.dump(2) + "\n";
}

void write_report(const RateReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string base = out_dir + "/" + report.study;
  {
    std::FILE* f = std::fopen((base + ".csv").c_str(), "wb");
    if (f == nullptr) throw std::runtime_error("cannot write " + base + ".csv");
    const std::string csv = report_csv(report);
    std::fwrite(csv.data(), 1, csv.size(), f);
    std::fclose(f);
  }
  {
    std::FILE* f = std::fopen((base + ".json").c_str(), "wb");
    if (f == nullptr)
      throw std::runtime_error("cannot write " + base + ".json");
    const std::string json = report_json(report);
    std::fwrite(json.data(), 1, json.size(), f);
    std::fclose(f);
  }
}

} // namespace milfem
