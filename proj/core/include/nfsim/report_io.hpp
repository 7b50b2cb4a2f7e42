#pragma once

#include <string>
#include <vector>

#include "nfsim/config.hpp"
#include "nfsim/metrics.hpp"
#include "nfsim/optimizer.hpp"
#include "nfsim/unfd.hpp"

namespace nfsim {

// "# nfsim <version> scenario=<hash>"
std::string csv_preamble(const SystemConfig& config);

// %.17g, with inf/-inf/nan spelled out.
std::string format_double(double v);

// FocusReport rows for one layer count.
std::string focus_reports_csv(const SystemConfig& config, const std::vector<FocusReport>& reports);
std::string psf_csv(const SystemConfig& config, const PsfCut& cut);
std::string trace_csv(const SystemConfig& config, const OptimizationTrace& trace);

std::string summary_json(const SystemConfig& config, const std::vector<UnfdReport>& reports);
std::string focus_report_json(const FocusReport& report);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace nfsim
