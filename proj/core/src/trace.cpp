#include "gnopt/trace.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gnopt {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trace_csv(const SolveReport& report, const std::vector<std::string>& class_names,
                      const std::vector<std::string>& group_names) {
  std::ostringstream os;
  os << "k,F";
  for (const auto& c : class_names) os << ",psi_inf_" << c;
  for (const auto& g : group_names) os << ",L_" << g;
  os << ",r_L,inner_iters,l_updates,wall_ms\n";
  for (const auto& row : report.trace) {
    os << row.k << "," << format_double(row.f);
    for (double v : row.psi_inf) os << "," << format_double(v);
    for (double v : row.l_values) os << "," << format_double(v);
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.3f", row.wall_ms);
    os << "," << format_double(row.r_l) << "," << row.inner_iters << "," << row.l_updates << ","
       << wall << "\n";
  }
  return os.str();
}

nlohmann::ordered_json report_json(const SolveReport& report,
                                   const std::vector<std::string>& class_names,
                                   const std::vector<std::string>& group_names) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["status"] = status_name(report.status);
  j["objective"] = report.objective;
  nlohmann::ordered_json viol;
  for (size_t c = 0; c < class_names.size(); ++c)
    viol[class_names[c]] = c < report.max_violation.size() ? report.max_violation[c] : 0.0;
  j["max_violation"] = viol;
  j["outer_iterations"] = report.outer_iterations;
  j["l_updates"] = report.l_updates;
  j["inner_iterations_total"] = report.inner_iterations_total;
  j["restarts"] = report.restarts;
  j["wall_time_s"] = report.wall_time_s;
  nlohmann::ordered_json beta;
  for (size_t c = 0; c < class_names.size(); ++c)
    beta[class_names[c]] = c < report.final_beta.size() ? report.final_beta[c] : 0.0;
  j["final_beta"] = beta;
  if (report.f_lower) j["f_lower"] = *report.f_lower;
  if (!report.rate_tail_ratios.empty()) j["rate_tail_ratios"] = report.rate_tail_ratios;
  (void)group_names;
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("file not found: '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace gnopt
