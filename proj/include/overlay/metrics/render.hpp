#pragma once

#include <string>

#include "overlay/metrics/report.hpp"

namespace overlay::metrics {

// Structured rendering with full precision and per-field undefined reasons.
std::string to_json(const MetricReport& report);

// Plain-text table, one header and one value row, in the fixed column order
// VYR TIHR WHR SCSI HRR HSR TIB ICR SGLI TLSR ASLSR AALSR SRLSR Overall.
// Fractions are shown as percentages with one decimal; SCSI, SGLI and the
// load sensitivities are shown raw with three decimals; undefined cells show
// an em dash.
std::string to_table(const MetricReport& report);

}  // namespace overlay::metrics
