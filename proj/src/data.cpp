#include "lift/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "lift/error.hpp"
#include "lift/random.hpp"
#include "lift/text.hpp"

namespace lift {

std::string_view to_string(TaskKind task) {
  return task == TaskKind::classification ? "classification" : "regression";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "classification") return TaskKind::classification;
  if (text == "regression") return TaskKind::regression;
  throw Error(ErrorCode::invalid_argument, fmt::format("unknown task kind '{}'", text));
}

std::string target_to_string(const Target& target) {
  if (const auto* label = std::get_if<std::string>(&target)) return *label;
  return fmt::format("{}", std::get<double>(target));
}

void FeatureSchema::validate() const {
  if (names.empty()) return;
  if (names.size() != p) {
    throw Error(ErrorCode::invalid_argument,
                fmt::format("schema has {} names for {} features", names.size(), p));
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : names) {
    if (name.empty()) throw Error(ErrorCode::invalid_argument, "empty feature name");
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::invalid_argument, fmt::format("duplicate feature name '{}'", name));
    }
  }
}

std::vector<std::string> canonical_label_order(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  const bool numeric = !labels.empty() && std::all_of(labels.begin(), labels.end(), [](const auto& l) {
    return parse_double(l).has_value();
  });
  if (numeric) {
    std::stable_sort(labels.begin(), labels.end(), [](const auto& a, const auto& b) {
      return *parse_double(a) < *parse_double(b);
    });
  }
  return labels;
}

TabularDataset::TabularDataset(FeatureSchema schema, FeatureMatrix rows, std::vector<Target> targets,
                               TaskKind task, std::vector<std::string> label_set)
    : schema_(std::move(schema)),
      rows_(std::move(rows)),
      targets_(std::move(targets)),
      task_(task),
      label_set_(std::move(label_set)) {
  schema_.validate();
  if (rows_.size() != targets_.size()) {
    throw Error(ErrorCode::invalid_argument,
                fmt::format("{} rows but {} targets", rows_.size(), targets_.size()));
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].size() != schema_.p) {
      throw Error(ErrorCode::dimension_mismatch,
                  fmt::format("row {} has {} features, expected {}", i, rows_[i].size(), schema_.p));
    }
  }
  if (task_ == TaskKind::classification) {
    std::vector<std::string> seen;
    seen.reserve(targets_.size());
    for (const auto& t : targets_) {
      const auto* label = std::get_if<std::string>(&t);
      if (!label) throw Error(ErrorCode::invalid_argument, "classification target must be a label");
      seen.push_back(*label);
    }
    if (label_set_.empty()) {
      label_set_ = canonical_label_order(std::move(seen));
    } else {
      std::set<std::string> allowed(label_set_.begin(), label_set_.end());
      if (allowed.size() != label_set_.size()) {
        throw Error(ErrorCode::invalid_argument, "label_set contains duplicates");
      }
      for (const auto& l : seen) {
        if (!allowed.count(l)) {
          throw Error(ErrorCode::unknown_label, fmt::format("label '{}' not in label_set", l));
        }
      }
    }
  } else {
    for (const auto& t : targets_) {
      if (!std::holds_alternative<double>(t)) {
        throw Error(ErrorCode::invalid_argument, "regression target must be numeric");
      }
    }
    label_set_.clear();
  }
}

const std::string& TabularDataset::label(std::size_t i) const { return std::get<std::string>(targets_.at(i)); }

double TabularDataset::value(std::size_t i) const { return std::get<double>(targets_.at(i)); }

std::vector<std::string> TabularDataset::labels() const {
  std::vector<std::string> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(label(i));
  return out;
}

std::vector<double> TabularDataset::values() const {
  std::vector<double> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(value(i));
  return out;
}

TabularDataset TabularDataset::subset(const std::vector<std::size_t>& indices) const {
  FeatureMatrix rows;
  std::vector<Target> targets;
  rows.reserve(indices.size());
  targets.reserve(indices.size());
  for (auto i : indices) {
    rows.push_back(rows_.at(i));
    targets.push_back(targets_.at(i));
  }
  return TabularDataset(schema_, std::move(rows), std::move(targets), task_, label_set_);
}

TabularDataset TabularDataset::with_rows(FeatureMatrix rows) const {
  FeatureSchema schema = schema_;
  if (!rows.empty() && rows.front().size() != schema.p) {
    schema.p = rows.front().size();
    schema.names.clear();
  }
  return TabularDataset(std::move(schema), std::move(rows), targets_, task_, label_set_);
}

TabularDataset TabularDataset::with_targets(std::vector<Target> targets) const {
  return TabularDataset(schema_, rows_, std::move(targets), task_, label_set_);
}

TabularDataset concat(const TabularDataset& a, const TabularDataset& b) {
  if (a.task() != b.task() || a.p() != b.p()) {
    throw Error(ErrorCode::dimension_mismatch, "cannot concatenate datasets of different shape or task");
  }
  FeatureMatrix rows = a.rows();
  rows.insert(rows.end(), b.rows().begin(), b.rows().end());
  std::vector<Target> targets = a.targets();
  targets.insert(targets.end(), b.targets().begin(), b.targets().end());
  std::vector<std::string> labels = a.label_set();
  for (const auto& l : b.label_set()) {
    if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
  }
  return TabularDataset(a.schema(), std::move(rows), std::move(targets), a.task(), std::move(labels));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string csv_quote(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

TabularDataset read_csv(std::istream& in, const CsvOptions& options) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    records.push_back(split_csv_line(line));
    line_numbers.push_back(line_no);
  }
  if (records.empty()) {
    FeatureSchema schema;
    return TabularDataset(schema, {}, {}, options.task);
  }

  const std::size_t columns = records.front().size();
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].size() != columns) {
      throw Error(ErrorCode::malformed_row,
                  fmt::format("line {} has {} columns, expected {}", line_numbers[r], records[r].size(), columns),
                  line_numbers[r]);
    }
  }

  std::vector<std::string> header;
  std::size_t first_data = 0;
  if (options.has_header) {
    header = records.front();
    for (auto& h : header) h = std::string(trim(h));
    first_data = 1;
  }

  std::size_t target_col = 0;
  if (const auto* name = std::get_if<std::string>(&options.target_column)) {
    const auto it = std::find(header.begin(), header.end(), *name);
    if (it == header.end()) {
      throw Error(ErrorCode::missing_target, fmt::format("target column '{}' not found", *name));
    }
    target_col = static_cast<std::size_t>(it - header.begin());
  } else {
    target_col = std::get<std::size_t>(options.target_column);
    if (target_col >= columns) {
      throw Error(ErrorCode::missing_target,
                  fmt::format("target column index {} out of range ({} columns)", target_col, columns));
    }
  }

  FeatureSchema schema;
  schema.p = columns - 1;
  if (options.has_header) {
    for (std::size_t c = 0; c < columns; ++c) {
      if (c != target_col) schema.names.push_back(header[c]);
    }
    schema.target_name = header[target_col];
  }

  FeatureMatrix rows;
  std::vector<Target> targets;
  for (std::size_t r = first_data; r < records.size(); ++r) {
    FeatureRow row;
    row.reserve(schema.p);
    for (std::size_t c = 0; c < columns; ++c) {
      const std::string& cell = records[r][c];
      if (c == target_col) {
        if (options.task == TaskKind::classification) {
          targets.emplace_back(std::string(trim(cell)));
        } else {
          const auto v = parse_double(cell);
          if (!v) {
            throw Error(ErrorCode::non_numeric_target,
                        fmt::format("line {} column {}: '{}' is not a number", line_numbers[r], c + 1, cell),
                        line_numbers[r], c + 1);
          }
          targets.emplace_back(*v);
        }
        continue;
      }
      const auto v = parse_double(cell);
      if (!v) {
        throw Error(ErrorCode::non_numeric_feature,
                    fmt::format("line {} column {}: '{}' is not a number", line_numbers[r], c + 1, cell),
                    line_numbers[r], c + 1);
      }
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  return TabularDataset(std::move(schema), std::move(rows), std::move(targets), options.task);
}

TabularDataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot open '{}'", path.string()));
  return read_csv(in, options);
}

void write_csv(const TabularDataset& ds, std::ostream& out, int precision) {
  const auto& schema = ds.schema();
  if (schema.has_names()) {
    std::vector<std::string> header;
    for (const auto& n : schema.names) header.push_back(csv_quote(n));
    header.push_back(csv_quote(schema.target_name.empty() ? "y" : schema.target_name));
    out << join(header, ",") << '\n';
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.rows()[i]) out << fmt::format("{:.{}g}", v, precision) << ',';
    if (ds.task() == TaskKind::classification) {
      out << csv_quote(ds.label(i));
    } else {
      out << fmt::format("{:.{}g}", ds.value(i), precision);
    }
    out << '\n';
  }
}

void save_csv(const TabularDataset& ds, const std::filesystem::path& path, int precision) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, fmt::format("cannot write '{}'", path.string()));
  write_csv(ds, out, precision);
}

// ---------------------------------------------------------------------------
// Splitting

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

std::vector<std::size_t> allocate_counts(std::size_t n, const std::vector<double>& fractions) {
  std::vector<std::size_t> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    // Guard against 0.1 * 10 = 1.0000000000000002 style drift.
    const double exact = fractions[i] * static_cast<double>(n);
    const double rounded = std::round(exact);
    const double share = std::abs(exact - rounded) < 1e-9 ? rounded : exact;
    counts[i] = static_cast<std::size_t>(std::floor(share));
    assigned += counts[i];
    remainders.emplace_back(share - std::floor(share), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n && k < remainders.size(); ++k, ++assigned) {
    ++counts[remainders[k].second];
  }
  return counts;
}

void SplitSpec::validate() const {
  const double sum = train + validation + test;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::invalid_argument, fmt::format("split fractions sum to {}, expected 1", sum));
  }
  if (!(train > 0.0 && train <= 1.0) || validation < 0.0 || validation >= 1.0 || test < 0.0 || test >= 1.0) {
    throw Error(ErrorCode::invalid_argument, "split fractions must lie in [0,1) with a positive train share");
  }
}

DatasetSplits split(const TabularDataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::vector<double> fractions{spec.train, spec.validation, spec.test};
  const std::size_t nonempty = static_cast<std::size_t>(std::count_if(
      fractions.begin(), fractions.end(), [](double f) { return f > 0.0; }));
  if (ds.size() < nonempty && nonempty == 3) {
    throw Error(ErrorCode::too_few_samples, fmt::format("{} samples cannot fill three splits", ds.size()));
  }

  Rng rng = make_rng(spec.seed);
  std::array<std::vector<std::size_t>, 3> parts;

  auto distribute = [&](std::vector<std::size_t> indices) {
    std::shuffle(indices.begin(), indices.end(), rng);
    const auto counts = allocate_counts(indices.size(), fractions);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      parts[s].insert(parts[s].end(), indices.begin() + static_cast<std::ptrdiff_t>(offset),
                      indices.begin() + static_cast<std::ptrdiff_t>(offset + counts[s]));
      offset += counts[s];
    }
  };

  if (spec.stratified && ds.task() == TaskKind::classification) {
    for (const auto& label : ds.label_set()) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.label(i) == label) members.push_back(i);
      }
      if (members.empty()) continue;
      if (members.size() < nonempty) {
        throw Error(ErrorCode::too_few_samples,
                    fmt::format("class '{}' has {} samples for {} non-empty splits", label, members.size(), nonempty));
      }
      distribute(std::move(members));
    }
    // Interleave classes so that downstream prefixes are not class-sorted.
    for (auto& part : parts) std::shuffle(part.begin(), part.end(), rng);
  } else {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    distribute(std::move(all));
  }

  DatasetSplits out;
  out.train = ds.subset(parts[0]);
  out.validation = ds.subset(parts[1]);
  out.test = ds.subset(parts[2]);
  out.train_indices = std::move(parts[0]);
  out.validation_indices = std::move(parts[1]);
  out.test_indices = std::move(parts[2]);
  return out;
}

}  // namespace lift
