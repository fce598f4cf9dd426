#include "convemo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace convemo {

MetricsReport compute_metrics(const std::vector<int>& gold,
                              const std::vector<int>& pred,
                              std::size_t n_classes) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("compute_metrics: size mismatch");
  MetricsReport r;
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < gold.size(); ++i)
    r.confusion[gold[i]][pred[i]] += 1;

  std::size_t correct = 0;
  for (std::size_t c = 0; c < n_classes; ++c) correct += r.confusion[c][c];
  r.accuracy = gold.empty() ? 0.0
                            : static_cast<double>(correct) /
                                  static_cast<double>(gold.size());

  r.per_class_f1.assign(n_classes, 0.0);
  double weighted = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t support = 0, predicted = 0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      support += r.confusion[c][k];
      predicted += r.confusion[k][c];
    }
    const std::size_t tp = r.confusion[c][c];
    const double precision =
        predicted ? static_cast<double>(tp) / predicted : 0.0;
    const double recall = support ? static_cast<double>(tp) / support : 0.0;
    const double f1 = precision + recall > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    r.per_class_f1[c] = f1;
    weighted += f1 * static_cast<double>(support);
  }
  r.weighted_f1 = gold.empty() ? 0.0 : weighted / static_cast<double>(gold.size());
  return r;
}

double shift_f1(const std::vector<ShiftLabelMatrix>& gold,
                const std::vector<std::vector<std::uint8_t>>& pred) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("shift_f1: dialogue count mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    if (gold[d].s.size() != pred[d].size())
      throw std::invalid_argument("shift_f1: matrix size mismatch");
    for (std::size_t i = 0; i < gold[d].s.size(); ++i) {
      const bool g = gold[d].s[i] != 0;
      const bool p = pred[d][i] != 0;
      if (g && p) ++tp;
      else if (!g && p) ++fp;
      else if (g && !p) ++fn;
    }
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two equal-length series");
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace convemo
