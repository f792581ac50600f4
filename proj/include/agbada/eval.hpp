#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "agbada/data/batches.hpp"
#include "agbada/errors.hpp"
#include "agbada/model.hpp"
#include "agbada/train.hpp"

namespace agbada {

// Rows are the true class index, columns the predicted one.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, 2>, 2> counts{};
  std::vector<std::string> class_names = default_class_names();

  std::size_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
  std::size_t row_sum(std::size_t c) const { return counts[c][0] + counts[c][1]; }
  std::size_t col_sum(std::size_t c) const { return counts[0][c] + counts[1][c]; }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw ParameterError("confusion_matrix: " + std::to_string(y_true.size()) + " labels vs " +
                         std::to_string(y_pred.size()) + " predictions");
  }
  if (y_true.empty()) throw ParameterError("confusion_matrix: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if ((y_true[i] != 0 && y_true[i] != 1) || (y_pred[i] != 0 && y_pred[i] != 1)) {
      throw ParameterError("confusion_matrix: labels must be 0 or 1");
    }
    ++cm.counts[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
  }
  return cm;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassificationReport {
  std::array<ClassMetrics, 2> per_class;
  double accuracy = 0.0;
  ClassMetrics macro;
  ClassMetrics weighted;
  std::size_t total = 0;
};

namespace detail {

inline double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace detail

// Undefined ratios (empty row or column) are reported as 0.
inline ClassificationReport metrics(const ConfusionMatrix& cm) {
  ClassificationReport rep;
  rep.total = cm.total();
  std::size_t trace = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& m = rep.per_class[c];
    const std::size_t tp = cm.counts[c][c];
    trace += tp;
    m.support = cm.row_sum(c);
    m.precision = detail::ratio(tp, cm.col_sum(c));
    m.recall = detail::ratio(tp, m.support);
    m.f1 = detail::harmonic(m.precision, m.recall);
  }
  rep.accuracy = detail::ratio(trace, rep.total);

  const auto& a = rep.per_class[0];
  const auto& b = rep.per_class[1];
  rep.macro = {(a.precision + b.precision) / 2.0, (a.recall + b.recall) / 2.0, (a.f1 + b.f1) / 2.0, rep.total};
  const double n = static_cast<double>(rep.total);
  auto weigh = [&](double x, double y) {
    return rep.total == 0 ? 0.0 : (static_cast<double>(a.support) * x + static_cast<double>(b.support) * y) / n;
  };
  rep.weighted = {weigh(a.precision, b.precision), 0.0, weigh(a.f1, b.f1), rep.total};
  // support-weighted recall reduces to trace / N
  rep.weighted.recall = rep.accuracy;
  return rep;
}

// Two-decimal rounding, halves away from zero.
inline std::string format_fixed2(double x) {
  const double scaled = std::round(x * 100.0);
  const long long v = static_cast<long long>(scaled);
  const long long mag = v < 0 ? -v : v;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%lld.%02lld", v < 0 ? "-" : "", mag / 100, mag % 100);
  return buf;
}

inline std::string render_report(const ClassificationReport& rep) {
  char line[128];
  std::ostringstream os;
  std::snprintf(line, sizeof(line), "%12s %11s %9s %9s %9s\n", "", "precision", "recall", "f1-score", "support");
  os << line << '\n';
  auto row = [&](const std::string& label, const ClassMetrics& m) {
    std::snprintf(line, sizeof(line), "%12s %11s %9s %9s %9zu\n", label.c_str(), format_fixed2(m.precision).c_str(),
                  format_fixed2(m.recall).c_str(), format_fixed2(m.f1).c_str(), m.support);
    os << line;
  };
  row("0", rep.per_class[0]);
  row("1", rep.per_class[1]);
  os << '\n';
  std::snprintf(line, sizeof(line), "%12s %11s %9s %9s %9zu\n", "accuracy", "", "", format_fixed2(rep.accuracy).c_str(),
                rep.total);
  os << line;
  row("macro avg", rep.macro);
  row("weighted avg", rep.weighted);
  return os.str();
}

inline std::string render_confusion(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "true\\pred";
  for (const auto& n : cm.class_names) os << '\t' << n;
  os << '\n';
  for (std::size_t t = 0; t < 2; ++t) os << cm.class_names[t] << '\t' << cm.counts[t][0] << '\t' << cm.counts[t][1] << '\n';
  return os.str();
}

struct EvaluationResult {
  double loss = 0.0;
  ConfusionMatrix confusion;
  ClassificationReport report;
  std::vector<double> probabilities;  // P(class 1) per row, in index order
};

// Infer-mode pass over the stream in order; predictions threshold at 0.5 (strict).
template <typename T>
EvaluationResult evaluate_model(SequentialModel<T>& model, data::BatchStream& stream) {
  if (stream.size() == 0) throw ParameterError("evaluate_model: no rows");
  stream.set_epoch(0);
  std::vector<int> truth, pred;
  EvaluationResult out;
  double loss_sum = 0.0;
  for (std::size_t s = 0; s < stream.steps(); ++s) {
    const auto batch = stream.batch(s);
    const Tensor<T> x = batch.inputs.template cast<T>();
    const Tensor<T> y = batch.targets.template cast<T>();
    const Tensor<T> p = forward(model, x, Mode::Infer);
    loss_sum += bce_loss(p, y).loss * static_cast<double>(p.dim(0));
    for (std::size_t i = 0; i < p.dim(0); ++i) {
      const double prob = static_cast<double>(p[i]);
      out.probabilities.push_back(prob);
      truth.push_back(y[i] > T(0.5) ? 1 : 0);
      pred.push_back(prob > 0.5 ? 1 : 0);
    }
  }
  out.loss = loss_sum / static_cast<double>(truth.size());
  out.confusion = confusion_matrix(truth, pred);
  out.confusion.class_names = model.class_names;
  out.report = metrics(out.confusion);
  return out;
}

template <typename T>
EvaluationResult evaluate_model(SequentialModel<T>& model, const std::vector<data::IndexRow>& rows,
                                std::vector<std::size_t> members, data::ImageLoader loader, std::size_t batch_size) {
  data::BatchStream stream(rows, std::move(members), std::move(loader), {batch_size, false, 0, std::nullopt});
  return evaluate_model(model, stream);
}

// ---------------------------------------------------------------------------
// Training history

namespace detail {

inline std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw ValidationError("bad number '" + s + "' in history");
  return v;
}

}  // namespace detail

inline constexpr const char* kHistoryHeader = "epoch,train_loss,train_acc,val_loss,val_acc,lr";

// Reals use the shortest representation that round-trips exactly.
inline std::string export_history(const std::vector<EpochRecord>& records) {
  std::string out = std::string(kHistoryHeader) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.epoch) + "," + detail::shortest(r.train_loss) + "," + detail::shortest(r.train_acc) + "," +
           detail::shortest(r.val_loss) + "," + detail::shortest(r.val_acc) + "," + detail::shortest(r.lr) + "\n";
  }
  return out;
}

inline std::vector<EpochRecord> parse_history(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) throw ValidationError("history: unexpected header");
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw ValidationError("history: expected 6 fields, got " + std::to_string(f.size()));
    EpochRecord r;
    r.epoch = static_cast<int>(detail::parse_double(f[0]));
    r.train_loss = detail::parse_double(f[1]);
    r.train_acc = detail::parse_double(f[2]);
    r.val_loss = detail::parse_double(f[3]);
    r.val_acc = detail::parse_double(f[4]);
    r.lr = detail::parse_double(f[5]);
    out.push_back(r);
  }
  return out;
}

}  // namespace agbada
