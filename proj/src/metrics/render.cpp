#include "overlay/metrics/render.hpp"

#include <array>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace overlay::metrics {

namespace {

using json = nlohmann::ordered_json;

json value_json(const MetricValue& m) {
  json j;
  if (!m.defined()) {
    j["value"] = nullptr;
    j["reason"] = m.reason;
  } else if (m.infinite) {
    j["value"] = *m.value > 0 ? "inf" : "-inf";
    j["infinite"] = true;
  } else {
    j["value"] = *m.value;
  }
  return j;
}

json load_json(const LoadSensitivity& l) {
  json j;
  j["r"] = value_json(l.r);
  j["t"] = value_json(l.t);
  j["n"] = l.n;
  return j;
}

std::string format_number(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

// scale: 100 for fractions rendered as percent, 1 for raw values.
std::string format_cell(const MetricValue& m, double scale, int decimals) {
  if (!m.defined()) return "—";
  if (m.infinite) return *m.value > 0 ? "inf" : "-inf";
  return format_number(*m.value * scale, decimals);
}

}  // namespace

std::string to_json(const MetricReport& r) {
  json j;
  j["schema_version"] = "1";

  json counts;
  counts["samples"] = r.counts.samples;
  counts["contradictory"] = r.counts.contradictory;
  counts["groups"] = r.counts.groups;
  counts["paired_groups"] = r.counts.paired_groups;
  counts["complete_groups"] = r.counts.complete_groups;
  j["counts"] = std::move(counts);

  j["overall"] = value_json(r.overall);

  json layer1;
  layer1["hrr"] = value_json(r.hrr);
  layer1["vyr"] = value_json(r.vyr);
  layer1["har"] = value_json(r.har);
  layer1["icr"] = value_json(r.icr);
  layer1["sgli"] = value_json(r.sgli);
  layer1["tihr"] = value_json(r.tihr);
  layer1["tib"] = value_json(r.tib);
  j["layer1"] = std::move(layer1);

  json layer2;
  layer2["scsi"] = value_json(r.scsi);
  layer2["whr"] = value_json(r.whr);
  layer2["hsr"] = value_json(r.hsr);
  json hrc = json::array();
  for (const MetricValue& v : r.hrc) hrc.push_back(value_json(v));
  layer2["hrc"] = std::move(hrc);
  j["layer2"] = std::move(layer2);

  json layer3;
  for (std::size_t d = 0; d < data::kDimensionCount; ++d) {
    layer3[data::to_string(static_cast<data::Dimension>(d))] =
        load_json(r.load[d]);
  }
  j["layer3"] = std::move(layer3);

  json by_dim;
  for (std::size_t d = 0; d < data::kDimensionCount; ++d) {
    by_dim[data::to_string(static_cast<data::Dimension>(d))] =
        value_json(r.accuracy_by_dimension[d]);
  }
  j["accuracy_by_dimension"] = std::move(by_dim);

  json by_scs = json::array();
  for (const MetricValue& v : r.accuracy_by_scs) by_scs.push_back(value_json(v));
  j["accuracy_by_scs"] = std::move(by_scs);

  json shift;
  json regimes;
  for (std::size_t i = 0; i < kRegimeCount; ++i) {
    regimes[to_string(static_cast<Regime>(i))] = r.prob_shift.regime_counts[i];
  }
  shift["regime_counts"] = std::move(regimes);
  shift["mean_delta_truth"] = value_json(r.prob_shift.mean_delta_truth);
  shift["mean_delta_halluc"] = value_json(r.prob_shift.mean_delta_halluc);
  shift["used_groups"] = r.prob_shift.used_groups;
  shift["skipped_groups"] = r.prob_shift.skipped_groups;
  j["prob_shift"] = std::move(shift);

  return j.dump(2) + "\n";
}

std::string to_table(const MetricReport& r) {
  const std::vector<std::pair<std::string, std::string>> columns = {
      {"VYR", format_cell(r.vyr, 100.0, 1)},
      {"TIHR", format_cell(r.tihr, 100.0, 1)},
      {"WHR", format_cell(r.whr, 100.0, 1)},
      {"SCSI", format_cell(r.scsi, 1.0, 3)},
      {"HRR", format_cell(r.hrr, 100.0, 1)},
      {"HSR", format_cell(r.hsr, 1.0, 1)},  // already a percentage
      {"TIB", format_cell(r.tib, 100.0, 1)},
      {"ICR", format_cell(r.icr, 100.0, 1)},
      {"SGLI", format_cell(r.sgli, 1.0, 3)},
      {"TLSR", format_cell(r.load[0].r, 1.0, 3)},
      {"ASLSR", format_cell(r.load[1].r, 1.0, 3)},
      {"AALSR", format_cell(r.load[2].r, 1.0, 3)},
      {"SRLSR", format_cell(r.load[3].r, 1.0, 3)},
      {"Overall", format_cell(r.overall, 100.0, 1)},
  };

  // The em dash renders one column wide but counts three bytes.
  const auto display_width = [](const std::string& s) {
    return s == "—" ? std::size_t{1} : s.size();
  };

  std::string header;
  std::string row;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const auto& [name, cell] = columns[i];
    const std::size_t width = std::max(name.size(), display_width(cell));
    if (i > 0) {
      header += "  ";
      row += "  ";
    }
    header += name;
    header.append(width - name.size(), ' ');
    row += cell;
    row.append(width - display_width(cell), ' ');
  }
  while (!header.empty() && header.back() == ' ') header.pop_back();
  while (!row.empty() && row.back() == ' ') row.pop_back();
  return header + "\n" + row + "\n";
}

}  // namespace overlay::metrics
