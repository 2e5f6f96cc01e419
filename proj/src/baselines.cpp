#include "lift/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "lift/error.hpp"
#include "lift/text.hpp"

namespace lift::baselines {

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::mcc: return "mcc";
    case BaselineKind::knn_classifier: return "knn_classifier";
    case BaselineKind::knn_regressor: return "knn_regressor";
    case BaselineKind::linear: return "linear";
    case BaselineKind::logistic: return "logistic";
  }
  return "?";
}

BaselineKind parse_baseline_kind(std::string_view text) {
  for (auto k : {BaselineKind::mcc, BaselineKind::knn_classifier, BaselineKind::knn_regressor, BaselineKind::linear,
                 BaselineKind::logistic}) {
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorCode::invalid_argument, fmt::format("unknown baseline '{}'", text));
}

std::string_view to_string(Aggregator agg) { return agg == Aggregator::mean ? "mean" : "median"; }

Aggregator parse_aggregator(std::string_view text) {
  if (text == "mean") return Aggregator::mean;
  if (text == "median") return Aggregator::median;
  throw Error(ErrorCode::invalid_argument, fmt::format("unknown aggregator '{}'", text));
}

void Hyperparameters::validate() const {
  if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be >= 1");
  if (!(minkowski_p >= 1.0)) throw Error(ErrorCode::invalid_argument, "Minkowski power must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "learning rate must be > 0");
}

double minkowski_pow(std::span<const double> a, std::span<const double> b, double power) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    s += power == 1.0 ? d : power == 2.0 ? d * d : std::pow(d, power);
  }
  return s;
}

namespace {

bool is_classifier(BaselineKind kind) {
  return kind == BaselineKind::mcc || kind == BaselineKind::knn_classifier || kind == BaselineKind::logistic;
}

void softmax_rows(Eigen::MatrixXd& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
}

}  // namespace

TaskKind FittedBaseline::task() const {
  return is_classifier(kind_) ? TaskKind::classification : TaskKind::regression;
}

std::vector<double> FittedBaseline::transform(std::span<const double> x) const {
  std::vector<double> out(x.begin(), x.end());
  if (shift_.empty()) return out;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (out[j] - shift_[j]) / scale_[j];
  return out;
}

FittedBaseline fit(BaselineKind kind, const Hyperparameters& hp, const TabularDataset& train) {
  hp.validate();
  if (train.empty()) throw Error(ErrorCode::empty_training_set, "cannot fit on an empty training set");
  const TaskKind want = is_classifier(kind) ? TaskKind::classification : TaskKind::regression;
  if (train.task() != want) {
    throw Error(ErrorCode::wrong_task, fmt::format("{} needs a {} dataset", to_string(kind), to_string(want)));
  }

  FittedBaseline m;
  m.kind_ = kind;
  m.hp_ = hp;
  m.p_ = train.p();
  m.labels_ = train.label_set();
  const std::size_t n = train.size();
  const std::size_t p = train.p();

  if (train.task() == TaskKind::classification) {
    std::map<std::string, std::size_t> counts;
    for (const auto& l : train.labels()) ++counts[l];
    std::optional<std::size_t> best;
    for (const auto& l : m.labels_) {
      if (!best || counts[l] > *best) m.majority_ = l, best = counts[l];
    }
  }
  if (kind == BaselineKind::mcc) return m;

  if (hp.standardize) {
    m.shift_.assign(p, 0.0);
    m.scale_.assign(p, 1.0);
    for (std::size_t j = 0; j < p; ++j) {
      double mean = 0.0;
      for (const auto& r : train.rows()) mean += r[j];
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (const auto& r : train.rows()) ss += (r[j] - mean) * (r[j] - mean);
      const double sd = std::sqrt(ss / static_cast<double>(n));
      m.shift_[j] = mean;
      m.scale_[j] = sd > 0.0 ? sd : 1.0;
    }
  }

  if (kind == BaselineKind::knn_classifier || kind == BaselineKind::knn_regressor) {
    m.train_x_.reserve(n);
    for (const auto& r : train.rows()) m.train_x_.push_back(m.transform(r));
    m.train_y_ = train.targets();
    return m;
  }

  Eigen::MatrixXd a(n, p + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = m.transform(train.rows()[i]);
    for (std::size_t j = 0; j < p; ++j) a(i, j) = z[j];
    a(i, p) = 1.0;
  }

  if (kind == BaselineKind::linear) {
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) y(i) = train.value(i);
    Eigen::MatrixXd gram = a.transpose() * a;
    const Eigen::VectorXd rhs = a.transpose() * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const double tol = 1e-12 * std::max(1.0, gram.diagonal().maxCoeff());
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= tol) {
      gram.diagonal().array() += 1e-8 * std::max(1.0, gram.diagonal().mean());
      ldlt.compute(gram);
    }
    const Eigen::VectorXd w = ldlt.solve(rhs);
    m.weights_.resize(static_cast<Eigen::Index>(p));
    m.bias_ = w(p);
    for (std::size_t j = 0; j < p; ++j) {
      const double s = m.scale_.empty() ? 1.0 : m.scale_[j];
      const double c = m.shift_.empty() ? 0.0 : m.shift_[j];
      m.weights_(j) = w(j) / s;
      m.bias_ -= w(j) * c / s;
    }
    return m;
  }

  // logistic: full-batch gradient descent on mean softmax cross-entropy
  const std::size_t c = m.labels_.size();
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::find(m.labels_.begin(), m.labels_.end(), train.label(i));
    onehot(i, it - m.labels_.begin()) = 1.0;
  }
  m.coef_ = Eigen::MatrixXd::Zero(c, p + 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  auto loss_of = [&](const Eigen::MatrixXd& prob) {
    return -inv_n * (onehot.array() * prob.array().max(1e-300).log()).sum();
  };
  m.loss_history_.reserve(hp.iterations + 1);
  for (std::size_t it = 0; it <= hp.iterations; ++it) {
    Eigen::MatrixXd prob = a * m.coef_.transpose();
    softmax_rows(prob);
    m.loss_history_.push_back(loss_of(prob));
    if (it == hp.iterations) break;
    m.coef_ -= hp.learning_rate * inv_n * (prob - onehot).transpose() * a;
  }
  return m;
}

std::vector<std::size_t> FittedBaseline::neighbors(std::span<const double> x) const {
  const auto q = transform(x);
  std::vector<std::pair<double, std::size_t>> d(train_x_.size());
  for (std::size_t i = 0; i < train_x_.size(); ++i) d[i] = {minkowski_pow(q, train_x_[i], hp_.minkowski_p), i};
  const std::size_t k = std::min(hp_.k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

Target FittedBaseline::predict_one(std::span<const double> x) const {
  if (x.size() != p_) {
    throw Error(ErrorCode::dimension_mismatch, fmt::format("expected {} features, got {}", p_, x.size()));
  }
  switch (kind_) {
    case BaselineKind::mcc: return majority_;
    case BaselineKind::knn_classifier: {
      const auto nn = neighbors(x);
      std::map<std::string, std::size_t> votes;
      std::size_t top = 0;
      for (std::size_t i : nn) top = std::max(top, ++votes[std::get<std::string>(train_y_[i])]);
      // Among the tied classes, the one holding the nearest neighbour wins.
      for (std::size_t i : nn) {
        const auto& l = std::get<std::string>(train_y_[i]);
        if (votes[l] == top) return l;
      }
      return majority_;
    }
    case BaselineKind::knn_regressor: {
      const auto nn = neighbors(x);
      std::vector<double> v;
      v.reserve(nn.size());
      for (std::size_t i : nn) v.push_back(std::get<double>(train_y_[i]));
      if (hp_.aggregator == Aggregator::mean) return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      std::sort(v.begin(), v.end());
      const std::size_t h = v.size() / 2;
      return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    }
    case BaselineKind::linear: {
      double s = bias_;
      for (std::size_t j = 0; j < p_; ++j) s += weights_(j) * x[j];
      return s;
    }
    case BaselineKind::logistic: {
      const auto z = transform(x);
      Eigen::VectorXd a(p_ + 1);
      for (std::size_t j = 0; j < p_; ++j) a(j) = z[j];
      a(p_) = 1.0;
      const Eigen::VectorXd score = coef_ * a;
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < score.size(); ++c) {
        if (score(c) > score(best)) best = c;
      }
      return labels_[static_cast<std::size_t>(best)];
    }
  }
  return majority_;
}

std::vector<Target> FittedBaseline::predict(const FeatureMatrix& x) const {
  std::vector<Target> out;
  out.reserve(x.size());
  for (const auto& row : x) out.push_back(predict_one(row));
  return out;
}

std::vector<ReferenceResult> load_reference_results(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot open {}", csv.string()));
  std::vector<ReferenceResult> out;
  std::string line;
  std::getline(in, line);  // header
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') quoted = !quoted;
      else if (ch == ',' && !quoted) cells.push_back(std::exchange(cur, {}));
      else cur += ch;
    }
    cells.push_back(cur);
    if (cells.size() != 4) throw Error(ErrorCode::malformed_row, "expected 4 cells", lineno);
    const auto mean = parse_double(cells[2]);
    if (!mean) throw Error(ErrorCode::malformed_row, "bad accuracy", lineno, 3);
    out.push_back({cells[0], cells[1], *mean, parse_double(cells[3])});
  }
  return out;
}

}  // namespace lift::baselines
