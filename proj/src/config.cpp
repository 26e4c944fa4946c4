#include "milfem/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "milfem/errors.hpp"

namespace milfem {

namespace {

using nlohmann::json;

StudyKind parse_study(const std::string& name) {
  if (name == "temporal") return StudyKind::temporal;
  if (name == "spatial") return StudyKind::spatial;
  if (name == "truncation") return StudyKind::truncation;
  if (name == "two-sided" || name == "two_sided") return StudyKind::two_sided;
  if (name == "regularity") return StudyKind::regularity;
  throw ConfigError("unknown study kind: " + name);
}

Variant parse_variant(const std::string& name) {
  if (name == "milstein") return Variant::milstein;
  if (name == "em" || name == "euler_maruyama") return Variant::euler_maruyama;
  if (name == "truncated") return Variant::truncated_milstein;
  throw ConfigError("unknown variant: " + name);
}

LevyMode parse_levy(const std::string& name) {
  if (name == "auto" || name == "zero") return LevyMode::zero;
  if (name == "sampled") return LevyMode::sampled;
  throw ConfigError("unknown levy mode: " + name);
}

void apply_problem(ExperimentPlan& plan, const json& jp) {
  std::size_t n_modes = jp.value("n_modes", std::size_t{1024});
  std::size_t noise_modes = jp.value("noise_modes", std::size_t{256});
  plan.problem = default_problem(n_modes, noise_modes);
  ProblemSpec& prob = plan.problem;
  if (jp.contains("drift"))
    prob.drift.b = scalar_function(jp["drift"].get<std::string>());
  if (jp.contains("diffusion"))
    prob.diffusion.b = scalar_function(jp["diffusion"].get<std::string>());
  if (jp.contains("beta"))
    prob.covariance = power_covariance(noise_modes, jp["beta"].get<double>());
  prob.T = jp.value("T", 1.0);
  prob.r = jp.value("r", 0.5);
  prob.p = jp.value("p", 2.0);
  if (!(prob.T > 0.0)) throw ConfigError("problem.T must be positive");
  if (prob.r < 0.0 || prob.r >= 1.0)
    throw ConfigError("problem.r must lie in [0,1)");
  if (prob.p < 2.0) throw ConfigError("problem.p must be >= 2");
  if (jp.contains("x0")) {
    prob.x0.coeff.assign(n_modes, 0.0);
    for (const auto& [key, value] : jp["x0"].items()) {
      const std::size_t mode = std::stoul(key);
      if (mode == 0 || mode > n_modes)
        throw ConfigError("x0 mode out of range: " + key);
      prob.x0.coeff[mode - 1] = value.get<double>();
    }
  }
}

void apply_experiment(ExperimentPlan& plan, const json& je) {
  if (je.contains("study")) plan.study = parse_study(je["study"]);
  if (je.contains("k_ladder"))
    plan.k_ladder = je["k_ladder"].get<std::vector<double>>();
  if (je.contains("cells_ladder"))
    plan.cells_ladder = je["cells_ladder"].get<std::vector<std::size_t>>();
  if (je.contains("J_ladder"))
    plan.J_ladder = je["J_ladder"].get<std::vector<std::size_t>>();
  plan.n_cells = je.value("n_cells", plan.n_cells);
  plan.k_fixed = je.value("k", plan.k_fixed);
  plan.ref_time_factor = je.value("ref_time_factor", plan.ref_time_factor);
  plan.ref_space_factor = je.value("ref_space_factor", plan.ref_space_factor);
  plan.n_paths = je.value("paths", plan.n_paths);
  plan.p = je.value("p", plan.problem.p);
  plan.seed = je.value("seed", plan.seed);
  if (je.contains("variant")) plan.variant = parse_variant(je["variant"]);
  plan.J = je.value("J", plan.J);
  if (je.contains("levy")) plan.levy = parse_levy(je["levy"]);
  plan.levy_terms = je.value("levy_terms", plan.levy_terms);
  plan.out_dir = je.value("out", plan.out_dir);
  plan.threads = je.value("threads", plan.threads);
  plan.weighted_fit = je.value("weighted_fit", plan.weighted_fit);
  plan.memory_budget_mb = je.value("memory_budget_mb", plan.memory_budget_mb);
  if (plan.n_paths == 0) throw ConfigError("experiment.paths must be >= 1");
  if (plan.variant == Variant::truncated_milstein && plan.J == 0)
    throw ConfigError("truncated variant needs J >= 1");
}

} // namespace

ExperimentPlan default_plan() {
  ExperimentPlan plan;
  plan.problem = default_problem();
  plan.study = StudyKind::temporal;
  plan.k_ladder = {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
  plan.n_cells = 256;
  plan.n_paths = 200;
  return plan;
}

ExperimentPlan parse_plan(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentPlan plan = default_plan();
  try {
    if (j.contains("problem")) apply_problem(plan, j["problem"]);
    if (j.contains("experiment")) apply_experiment(plan, j["experiment"]);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config value error: ") + e.what());
  }
  return plan;
}

ExperimentPlan load_plan(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file: " + file);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plan(ss.str());
}

} // namespace milfem
