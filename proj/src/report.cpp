#include <cctype>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "lift/error.hpp"
#include "lift/runner.hpp"

namespace lift::runner {

ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv;
  if (text == "md" || text == "markdown") return ReportFormat::markdown;
  throw Error(ErrorCode::invalid_argument, fmt::format("unknown report format '{}'", text));
}

std::string mean_std_cell(std::span<const double> values) {
  if (values.empty()) return "";
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size()));
  return fmt::format("{:.2f}±{:.2f}", mean, sd);
}

ReportRow report_row(const json& result) {
  ReportRow row;
  row.dataset = result.value("name", std::string{});
  if (row.dataset.empty()) row.dataset = result.value("dataset", std::string{});
  row.method = result.value("method", std::string{});
  row.task = parse_task_kind(result.value("task", std::string("classification")));
  if (!result.contains("repeats")) return row;
  for (const auto& r : result["repeats"]) {
    const auto& t = r["test"];
    if (t.contains("accuracy")) row.accuracy.push_back(t["accuracy"].get<double>());
    if (t.contains("rmse")) row.rmse.push_back(t["rmse"].get<double>());
    if (t.contains("rae")) row.rae.push_back(t["rae"].get<double>());
  }
  return row;
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// "9Clusters (1)" -> "9clusters"
std::string base_name(const std::string& s) {
  std::string out = lower(s.substr(0, s.find(" (")));
  std::erase_if(out, [](char c) { return c == ' ' || c == '_' || c == '-'; });
  return out;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Cells {
  std::string dataset, method, accuracy, rmse, rae, repeats;
};

Cells cells_of(const ReportRow& r) {
  Cells c{r.dataset, r.method, mean_std_cell(r.accuracy), mean_std_cell(r.rmse), mean_std_cell(r.rae), ""};
  std::size_t n = std::max({r.accuracy.size(), r.rmse.size(), r.rae.size()});
  if (r.reference) {
    c.accuracy = r.reference->second ? fmt::format("{:.2f}±{:.2f}", r.reference->first, *r.reference->second)
                                     : fmt::format("{:.2f}", r.reference->first);
    n = 0;
  }
  c.repeats = n ? std::to_string(n) : "";
  return c;
}

}  // namespace

std::vector<ReportRow> reference_rows(std::span<const baselines::ReferenceResult> refs, const std::string& dataset) {
  std::vector<ReportRow> out;
  const auto key = base_name(dataset);
  for (const auto& r : refs) {
    if (base_name(r.dataset) != key) continue;
    ReportRow row;
    row.dataset = dataset;
    row.method = "published/" + r.method;
    row.reference = std::pair{r.mean, r.std};
    out.push_back(std::move(row));
  }
  return out;
}

std::string emit_report(std::span<const ReportRow> rows, ReportFormat format) {
  if (rows.empty()) throw Error(ErrorCode::invalid_argument, "report needs at least one result");
  std::ostringstream out;
  switch (format) {
    case ReportFormat::json: {
      json arr = json::array();
      for (const auto& r : rows) {
        const auto c = cells_of(r);
        json j{{"dataset", c.dataset}, {"method", c.method}, {"task", std::string(to_string(r.task))}};
        if (!c.accuracy.empty()) j["accuracy"] = c.accuracy;
        if (!c.rmse.empty()) j["rmse"] = c.rmse;
        if (!c.rae.empty()) j["rae"] = c.rae;
        if (!c.repeats.empty()) j["repeats"] = std::stoul(c.repeats);
        arr.push_back(j);
      }
      out << arr.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv:
      out << "dataset,method,accuracy,rmse,rae,repeats\r\n";
      for (const auto& r : rows) {
        const auto c = cells_of(r);
        out << csv_quote(c.dataset) << ',' << csv_quote(c.method) << ',' << csv_quote(c.accuracy) << ','
            << csv_quote(c.rmse) << ',' << csv_quote(c.rae) << ',' << c.repeats << "\r\n";
      }
      break;
    case ReportFormat::markdown:
      out << "| Dataset | Method | Accuracy (%) | RMSE | RAE | Repeats |\n";
      out << "|---|---|---|---|---|---|\n";
      for (const auto& r : rows) {
        const auto c = cells_of(r);
        out << "| " << c.dataset << " | " << c.method << " | " << c.accuracy << " | " << c.rmse << " | " << c.rae
            << " | " << c.repeats << " |\n";
      }
      break;
  }
  return out.str();
}

}  // namespace lift::runner
