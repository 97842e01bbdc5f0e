// Command-line driver: solve lifted AC-OPF cases, BMI decay-rate instances,
// and run the warm-start benchmark. Exit codes: 0 converged, 1 finished
// without convergence, 2 usage or input errors.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gnopt/acopf.hpp"
#include "gnopt/bmi.hpp"
#include "gnopt/diagnostics.hpp"
#include "gnopt/trace.hpp"

namespace {

using nlohmann::ordered_json;

int log_level() {
  const char* env = std::getenv("GNOPT_LOG");
  return env ? std::atoi(env) : 0;
}

std::function<void(const std::string&)> make_logger() {
  if (log_level() < 1) return {};
  return [](const std::string& line) { std::cerr << "[gnopt] " << line << "\n"; };
}

void emit_error(const std::string& msg, const std::string& report_path) {
  ordered_json j;
  j["error"] = msg;
  std::cout << j.dump(2) << std::endl;
  if (!report_path.empty()) {
    try {
      gnopt::write_text_file(report_path, j.dump(2) + "\n");
    } catch (...) {
    }
  }
}

struct CommonOpts {
  std::string report_path, trace_path;
  double beta_t = 0;
  double beta_q_factor = 5.0;
  std::string strategy = "geometric";
  double mu = 2.0;
  double tol_feas = 0;  // 0 = per-command default (1e-5 OPF, 1e-6 BMI)
  double tol_step = 0;  // 0 = per-command default (1e-6 OPF, 1e-9 BMI)
  int max_iter = 100;
  std::string lazy = "off";
  std::string warmstart = "on";
  std::uint64_t seed = 0;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--beta-t", o.beta_t, "penalty weight (default: branch count for OPF)");
  cmd->add_option("--beta-q-factor", o.beta_q_factor, "beta_q = factor * beta_t");
  cmd->add_option("--strategy", o.strategy, "L update rule")
      ->check(CLI::IsMember({"fixed", "bisection", "geometric"}));
  cmd->add_option("--mu", o.mu, "geometric growth factor");
  cmd->add_option("--tol-feas", o.tol_feas, "residual infinity-norm tolerance");
  cmd->add_option("--tol-step", o.tol_step, "stall step tolerance");
  cmd->add_option("--max-iter", o.max_iter, "outer iteration cap");
  cmd->add_option("--lazy", o.lazy, "lazy flow-limit cones")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--warmstart", o.warmstart, "warm-start inner solves")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--seed", o.seed, "restart perturbation seed");
  cmd->add_option("--report", o.report_path, "write report JSON here");
  cmd->add_option("--trace", o.trace_path, "write per-iteration CSV here");
  cmd->add_flag("--timing", o.timing, "fill wall_ms in the trace (off keeps runs byte-identical)");
}

gnopt::LStrategy strategy_of(const std::string& s) {
  if (s == "fixed") return gnopt::LStrategy::Fixed;
  if (s == "bisection") return gnopt::LStrategy::Bisection;
  return gnopt::LStrategy::Geometric;
}

gnopt::AdmmSettings default_admm() {
  gnopt::AdmmSettings a;
  a.adaptive_rho = true;
  return a;
}

int run_solve_opf(const std::string& case_path, const CommonOpts& o,
                  const std::string& dump_path) {
  auto model = std::make_shared<gnopt::acopf::NetworkModel>(
      gnopt::acopf::parse_matpower(gnopt::read_text_file(case_path)));
  gnopt::acopf::build_admittance(*model);

  gnopt::acopf::OpfTuning tuning = gnopt::acopf::default_tuning(*model);
  if (o.beta_t > 0) {
    tuning.beta_t = o.beta_t;
    tuning.beta_q = o.beta_q_factor * o.beta_t;
  }
  tuning.beta_q_factor = o.beta_q_factor;
  tuning.strategy = strategy_of(o.strategy);
  tuning.mu = o.mu;
  tuning.tol_feas = o.tol_feas > 0 ? o.tol_feas : 1e-5;
  tuning.tol_step = o.tol_step > 0 ? o.tol_step : 1e-6;
  tuning.max_outer = o.max_iter;
  tuning.lazy = o.lazy == "on";
  tuning.warm_start = o.warmstart == "on";
  tuning.seed = o.seed;

  if (!dump_path.empty()) {
    gnopt::acopf::SocpInit init = gnopt::acopf::socp_init(*model, default_admm());
    gnopt::ProblemDef prob = gnopt::acopf::build_problem(model, tuning, nullptr);
    gnopt::GnConfig cfg = gnopt::acopf::make_gn_config(*model, tuning);
    const gnopt::ConicProgram prog =
        gnopt::assemble(prob, gnopt::acopf::pack_point(*model, init.point), cfg.weights,
                        gnopt::reg_l_vector(prob.layout, cfg.reg,
                                            {cfg.reg.groups[0].l_init, cfg.reg.groups[1].l_init}));
    std::ostringstream os;
    prog.dump(os);
    gnopt::write_text_file(dump_path, os.str());
  }

  const gnopt::acopf::OpfResult res = gnopt::acopf::solve_opf(
      model, tuning, default_admm(), false, o.timing, nullptr, nullptr, make_logger());

  ordered_json j = gnopt::report_json(res.report, res.class_names, res.group_names);
  j["objective_per_hour"] = res.dollars;
  j["socp_lower_bound_per_hour"] = res.init.objective;
  ordered_json polar;
  polar["p_balance_inf"] = res.polar.p_balance_inf;
  polar["q_balance_inf"] = res.polar.q_balance_inf;
  polar["line_limit_excess"] = res.polar.line_limit_excess;
  polar["v_bound_excess"] = res.polar.v_bound_excess;
  polar["angle_excess"] = res.polar.angle_excess;
  polar["pq_bound_excess"] = res.polar.pq_bound_excess;
  j["polar_validation"] = polar;
  ordered_json sol;
  {
    std::vector<double> vm, va_deg, pg_mw, qg_mvar;
    for (int i = 0; i < model->n_bus(); ++i) {
      vm.push_back(res.polar.v[i]);
      va_deg.push_back(res.polar.theta[i] * 180.0 / 3.14159265358979323846);
    }
    for (int g = 0; g < model->n_gen(); ++g) {
      pg_mw.push_back(res.point.p[g] * model->base_mva);
      qg_mvar.push_back(res.point.q[g] * model->base_mva);
    }
    sol["bus_vm_pu"] = vm;
    sol["bus_va_deg"] = va_deg;
    sol["gen_p_mw"] = pg_mw;
    sol["gen_q_mvar"] = qg_mvar;
  }
  j["solution"] = sol;
  std::cout << j.dump(2) << std::endl;
  if (!o.report_path.empty()) gnopt::write_text_file(o.report_path, j.dump(2) + "\n");
  if (!o.trace_path.empty())
    gnopt::write_text_file(o.trace_path,
                           gnopt::trace_csv(res.report, res.class_names, res.group_names));
  return res.report.status == gnopt::Status::Converged ? 0 : 1;
}

int run_solve_bmi(const std::string& instance_path, const CommonOpts& o) {
  const gnopt::bmi::BmiInstance inst =
      gnopt::bmi::instance_from_json(gnopt::read_text_file(instance_path));
  gnopt::ProblemDef prob = gnopt::bmi::build_bmi_problem(inst);
  gnopt::GnConfig cfg = gnopt::bmi::make_gn_config(o.beta_t > 0 ? o.beta_t : 1000.0);
  cfg.reg.strategy = strategy_of(o.strategy);
  cfg.reg.mu = o.mu;
  if (o.tol_feas > 0) cfg.tol_feas = o.tol_feas;
  if (o.tol_step > 0) cfg.tol_step = o.tol_step;
  cfg.max_outer = o.max_iter;
  cfg.seed = o.seed;
  cfg.warm_start = o.warmstart == "on";
  cfg.timing = o.timing;
  cfg.admm = default_admm();
  cfg.log = make_logger();

  gnopt::GnSolver solver(prob, cfg);
  const gnopt::SolveReport report = solver.solve(gnopt::bmi::spectral_start(inst));
  const gnopt::bmi::BmiVerification ver = gnopt::bmi::verify_bmi_solution(inst, report.x);

  const std::vector<std::string> classes{"bmi"}, groups{"all"};
  ordered_json j = gnopt::report_json(report, classes, groups);
  j["decay_rate_t"] = ver.t;
  j["closed_loop_abscissa"] = ver.closed_loop_abscissa;
  j["lambda_min_p"] = ver.lambda_min_p;
  j["lambda_min_s"] = ver.lambda_min_s;
  j["feasible_at_tolerance"] = ver.feasible(1e-6);
  std::cout << j.dump(2) << std::endl;
  if (!o.report_path.empty()) gnopt::write_text_file(o.report_path, j.dump(2) + "\n");
  if (!o.trace_path.empty())
    gnopt::write_text_file(o.trace_path, gnopt::trace_csv(report, classes, groups));
  return report.status == gnopt::Status::Converged ? 0 : 1;
}

int run_bench_warmstart(const std::string& case_path, const CommonOpts& o) {
  auto model = std::make_shared<gnopt::acopf::NetworkModel>(
      gnopt::acopf::parse_matpower(gnopt::read_text_file(case_path)));
  // flow limits are dropped in this mode; the subproblems become QPs
  for (auto& br : model->branches) br.rate_a_mva = 0;
  gnopt::acopf::build_admittance(*model);

  gnopt::acopf::OpfTuning tuning = gnopt::acopf::default_tuning(*model);
  if (o.beta_t > 0) {
    tuning.beta_t = o.beta_t;
    tuning.beta_q = o.beta_q_factor * o.beta_t;
  }
  tuning.strategy = strategy_of(o.strategy);
  tuning.mu = o.mu;
  // benchmark-grade tolerance: enough outer iterations for the warm-start
  // effect to show against the unavoidably cold first solve
  tuning.tol_feas = o.tol_feas > 0 ? o.tol_feas : 1e-6;
  tuning.tol_step = o.tol_step > 0 ? o.tol_step : 1e-8;
  tuning.max_outer = o.max_iter;
  tuning.seed = o.seed;
  tuning.polish = false;  // both passes run the plain solve for comparability

  const gnopt::AdmmSettings admm = default_admm();

  tuning.warm_start = false;
  const gnopt::acopf::OpfResult cold =
      gnopt::acopf::solve_opf(model, tuning, admm, false, false, nullptr, nullptr, make_logger());

  std::vector<std::vector<std::vector<double>>> schedule;
  for (const auto& trials : cold.report.trials) {
    schedule.emplace_back();
    for (const auto& t : trials) schedule.back().push_back(t.l_values);
  }

  tuning.warm_start = true;
  const gnopt::acopf::OpfResult warm = gnopt::acopf::solve_opf(
      model, tuning, admm, false, false, &schedule, &cold.report.restart_iterations,
      make_logger());

  std::ostringstream csv;
  csv << "gn_iter,trial,L_cs,L_theta,inner_cold,inner_warm\n";
  long cold_total = 0, warm_total = 0;
  for (size_t k = 0; k < cold.report.trials.size(); ++k) {
    for (size_t t = 0; t < cold.report.trials[k].size(); ++t) {
      const auto& ct = cold.report.trials[k][t];
      long wi = 0;
      if (k < warm.report.trials.size() && t < warm.report.trials[k].size())
        wi = warm.report.trials[k][t].inner_iters;
      csv << k << "," << t << "," << gnopt::format_double(ct.l_values[0]) << ","
          << gnopt::format_double(ct.l_values[1]) << "," << ct.inner_iters << "," << wi << "\n";
      cold_total += ct.inner_iters;
      warm_total += wi;
    }
  }

  ordered_json j;
  j["schema_version"] = 1;
  j["case"] = model->name;
  j["gn_iterations"] = cold.report.outer_iterations;
  j["inner_iterations_cold"] = cold_total;
  j["inner_iterations_warm"] = warm_total;
  j["warm_cold_ratio"] = cold_total > 0 ? static_cast<double>(warm_total) / cold_total : 0.0;
  j["objective_cold"] = cold.dollars;
  j["objective_warm"] = warm.dollars;
  j["status_cold"] = gnopt::status_name(cold.report.status);
  j["status_warm"] = gnopt::status_name(warm.report.status);
  std::cout << j.dump(2) << std::endl;
  if (!o.report_path.empty()) gnopt::write_text_file(o.report_path, j.dump(2) + "\n");
  if (!o.trace_path.empty()) gnopt::write_text_file(o.trace_path, csv.str());
  const bool ok = cold.report.status == gnopt::Status::Converged &&
                  warm.report.status == gnopt::Status::Converged;
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"penalized Gauss-Newton solver for lifted AC-OPF and BMI decay-rate problems"};
  app.require_subcommand(1);

  CommonOpts opf_opts, bmi_opts, bench_opts;
  std::string case_path, instance_path, bench_case, dump_path;

  CLI::App* opf = app.add_subcommand("solve-opf", "solve a MATPOWER case");
  opf->add_option("--case", case_path, "MATPOWER .m case file")->required();
  opf->add_option("--dump-subproblem", dump_path,
                  "write the first assembled subproblem in plain-text sparse form");
  add_common(opf, opf_opts);

  CLI::App* bmi_cmd = app.add_subcommand("solve-bmi", "solve a BMI decay-rate instance");
  bmi_cmd->add_option("--instance", instance_path, "instance JSON")->required();
  add_common(bmi_cmd, bmi_opts);

  CLI::App* bench = app.add_subcommand("bench-warmstart",
                                       "cold vs warm inner-solve benchmark (flow limits dropped)");
  bench->add_option("--case", bench_case, "MATPOWER .m case file")->required();
  add_common(bench, bench_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    emit_error(std::string("usage: ") + e.what(), "");
    return 2;
  }

  const std::string report_path = opf->parsed()
                                      ? opf_opts.report_path
                                      : (bmi_cmd->parsed() ? bmi_opts.report_path
                                                           : bench_opts.report_path);
  const std::string input_path =
      opf->parsed() ? case_path : (bmi_cmd->parsed() ? instance_path : bench_case);
  if (!std::filesystem::exists(input_path)) {
    emit_error("file not found: " + input_path, report_path);
    return 2;
  }
  try {
    if (opf->parsed()) return run_solve_opf(case_path, opf_opts, dump_path);
    if (bmi_cmd->parsed()) return run_solve_bmi(instance_path, bmi_opts);
    if (bench->parsed()) return run_bench_warmstart(bench_case, bench_opts);
  } catch (const gnopt::ParseError& e) {
    emit_error(e.what(), report_path);
    return 2;
  } catch (const gnopt::Error& e) {
    emit_error(e.what(), report_path);
    return 1;
  } catch (const std::exception& e) {
    emit_error(e.what(), report_path);
    return 2;
  }
  return 2;
}
