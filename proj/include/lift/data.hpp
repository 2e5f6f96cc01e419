#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

namespace lift {

enum class TaskKind { classification, regression };

std::string_view to_string(TaskKind task);
TaskKind parse_task_kind(std::string_view text);

using FeatureRow = std::vector<double>;
using FeatureMatrix = std::vector<FeatureRow>;

/// A class label (classification) or a real response (regression).
using Target = std::variant<std::string, double>;

std::string target_to_string(const Target& target);

struct FeatureSchema {
  std::size_t p = 0;
  std::vector<std::string> names;  // empty, or exactly p distinct non-empty names
  std::string target_name;

  bool has_names() const { return !names.empty(); }
  void validate() const;
};

/// Immutable labeled dataset. Construction validates every invariant;
/// transformations return new datasets.
class TabularDataset {
 public:
  TabularDataset() = default;

  /// For classification, an empty label_set is derived from the targets.
  TabularDataset(FeatureSchema schema, FeatureMatrix rows, std::vector<Target> targets,
                 TaskKind task, std::vector<std::string> label_set = {});

  const FeatureSchema& schema() const { return schema_; }
  const FeatureMatrix& rows() const { return rows_; }
  const std::vector<Target>& targets() const { return targets_; }
  TaskKind task() const { return task_; }
  const std::vector<std::string>& label_set() const { return label_set_; }

  std::size_t size() const { return rows_.size(); }
  std::size_t p() const { return schema_.p; }
  bool empty() const { return rows_.empty(); }

  const std::string& label(std::size_t i) const;
  double value(std::size_t i) const;
  std::vector<std::string> labels() const;
  std::vector<double> values() const;

  /// Rows at the given indices, in that order; label_set is preserved.
  TabularDataset subset(const std::vector<std::size_t>& indices) const;
  TabularDataset with_rows(FeatureMatrix rows) const;
  TabularDataset with_targets(std::vector<Target> targets) const;

 private:
  FeatureSchema schema_;
  FeatureMatrix rows_;
  std::vector<Target> targets_;
  TaskKind task_ = TaskKind::regression;
  std::vector<std::string> label_set_;
};

/// Numeric labels sort numerically, anything else lexicographically.
std::vector<std::string> canonical_label_order(std::vector<std::string> labels);

/// Concatenate datasets sharing schema and task; label sets are merged.
TabularDataset concat(const TabularDataset& a, const TabularDataset& b);

struct CsvOptions {
  TaskKind task = TaskKind::classification;
  std::variant<std::string, std::size_t> target_column = std::size_t{0};
  bool has_header = true;
};

TabularDataset load_csv(const std::filesystem::path& path, const CsvOptions& options);
TabularDataset read_csv(std::istream& in, const CsvOptions& options);

/// Features first, target last. Header is written when the schema has names.
void save_csv(const TabularDataset& ds, const std::filesystem::path& path, int precision = 17);
void write_csv(const TabularDataset& ds, std::ostream& out, int precision = 17);

struct SplitSpec {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
  bool stratified = false;

  void validate() const;
};

struct DatasetSplits {
  TabularDataset train;
  TabularDataset validation;
  TabularDataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
  std::vector<std::size_t> test_indices;
};

DatasetSplits split(const TabularDataset& ds, const SplitSpec& spec);

/// Integer sizes for `fractions` of n, summing to n (largest remainder).
std::vector<std::size_t> allocate_counts(std::size_t n, const std::vector<double>& fractions);

/// round(x) with halves rounded up; used wherever fraction·n is turned into a count.
std::size_t round_half_up(double x);

}  // namespace lift
