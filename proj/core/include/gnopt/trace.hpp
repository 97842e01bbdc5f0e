#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gnopt/gauss_newton.hpp"

namespace gnopt {

/// Fixed-format double printing so identical runs serialize identically.
std::string format_double(double v);

/// CSV trace: header + one row per outer iteration.
/// Columns: k, F, psi_inf_<class>..., L_<group>..., r_L, inner_iters,
/// l_updates, wall_ms.
std::string trace_csv(const SolveReport& report, const std::vector<std::string>& class_names,
                      const std::vector<std::string>& group_names);

/// Versioned report object with fixed field names.
nlohmann::ordered_json report_json(const SolveReport& report,
                                   const std::vector<std::string>& class_names,
                                   const std::vector<std::string>& group_names);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace gnopt
