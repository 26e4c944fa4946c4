#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "milfem/residual.hpp"
#include "milfem/scheme.hpp"

// Experiment orchestration: coupled-grid convergence studies against a
// fine-grid reference, two-sided error/residual tables, noise-truncation
// ladders, regularity diagnostics and rate fitting.
namespace milfem {

enum class StudyKind { temporal, spatial, truncation, two_sided, regularity };

std::string study_name(StudyKind kind);

struct ExperimentPlan {
  ProblemSpec problem;
  StudyKind study = StudyKind::temporal;

  std::vector<double> k_ladder;            // temporal / two_sided rungs
  std::vector<std::size_t> cells_ladder;   // spatial rungs
  std::vector<std::size_t> J_ladder;       // truncation rungs

  std::size_t n_cells = 256; // fixed mesh (temporal, truncation, regularity)
  double k_fixed = 0.0;      // fixed step (spatial, truncation, regularity)

  std::size_t ref_time_factor = 16;
  std::size_t ref_space_factor = 4;

  std::size_t n_paths = 100;
  double p = 2.0;
  std::uint64_t seed = 12345;

  Variant variant = Variant::milstein;
  std::size_t J = 0; // truncation parameter when variant == truncated
  LevyMode levy = LevyMode::zero;
  std::size_t levy_terms = 0;

  std::string out_dir; // empty: no artifacts written
  std::size_t threads = 0; // 0 picks hardware concurrency
  bool weighted_fit = false;
  std::size_t memory_budget_mb = 8192;
};

struct RungResult {
  double param = 0.0;
  double error = 0.0;
  double error_se = 0.0;
  double residual_norm = 0.0;
  double residual_se = 0.0;
  double ratio = 0.0;
  bool has_residual = false;
};

struct RateReport {
  std::string study;
  std::vector<RungResult> rungs;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  bool dropped_coarsest = false;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  double p = 2.0;
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least squares of log(error) against log(param). Throws
// std::invalid_argument for fewer than 3 points or nonpositive values.
FitResult fit_loglog(const std::vector<double>& param,
                     const std::vector<double>& error,
                     const std::vector<double>* weights = nullptr);

// Fit with the pre-asymptotic guard: drops the coarsest rung and refits when
// R^2 < 0.98 (requires at least 4 rungs to drop).
struct GuardedFit {
  FitResult fit;
  bool dropped_coarsest = false;
};
GuardedFit fit_rate(const std::vector<double>& param,
                    const std::vector<double>& error,
                    const std::vector<double>* weights = nullptr);

/// Eagerly materialized reference solutions (test-scale only).
struct ReferenceSet {
  SchemeConfig config;
  std::vector<GridProcess> processes;
  std::vector<WienerPath> paths;
};

// Fine-grid Milstein reference runs with the full mode count. Throws
// ResourceError when the materialized set would exceed the plan's memory
// budget (the study drivers stream instead).
ReferenceSet make_reference(const ExperimentPlan& plan, FemOperators& ops);

// Sup-norm distance between coarse runs and reference runs (coarse states
// prolonged into the reference space, differenced at shared time nodes).
LpEstimate strong_error(const std::vector<GridProcess>& coarse,
                        const Mesh1D& coarse_mesh,
                        const std::vector<GridProcess>& reference,
                        const Mesh1D& reference_mesh, double p);

// Runs the study described by the plan; writes CSV/JSON artifacts when
// out_dir is set.
RateReport run_experiment(const ExperimentPlan& plan);

struct RegularityEntry {
  double s = 0.0;
  double sup_moment = 0.0;      // sup_t E ||X(t)||_s^{2p}
  double holder_exponent = 0.0; // fitted over dyadic lags
  double holder_r2 = 0.0;
};

struct RegularityReport {
  std::vector<RegularityEntry> entries;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
};

RegularityReport check_regularity(const ExperimentPlan& plan);

// Single-run trajectory summary: per node t_n, Lp estimate of ||X(t_n)||.
struct TrajectorySummary {
  std::vector<double> times;
  std::vector<LpEstimate> norms;
};

TrajectorySummary solve_summary(const ExperimentPlan& plan,
                                const std::string& dump_path_file = "");

// Deterministic text artifacts (byte-identical across runs and thread
// counts for a fixed plan).
std::string report_csv(const RateReport& report);
std::string report_json(const RateReport& report);
void write_report(const RateReport& report, const std::string& out_dir);

} // namespace milfem
