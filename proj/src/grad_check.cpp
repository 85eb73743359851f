#include "ced/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ced/rng.hpp"

namespace ced::nn {

GradCheckReport grad_check(const std::function<double(bool)>& loss,
                           std::span<Parameter* const> params, double epsilon,
                           std::size_t max_entries, std::uint64_t seed) {
  // flat index space over all parameter entries
  std::vector<std::pair<Parameter*, std::size_t>> entries;
  for (Parameter* p : params)
    for (std::size_t i = 0; i < p->value.numel(); ++i) entries.emplace_back(p, i);

  std::vector<std::size_t> picked;
  if (entries.size() <= max_entries) {
    picked.resize(entries.size());
    for (std::size_t i = 0; i < picked.size(); ++i) picked[i] = i;
  } else {
    rng::Rng r(seed);
    std::vector<std::size_t> all(entries.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    r.shuffle(all);
    picked.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(max_entries));
    std::sort(picked.begin(), picked.end());
  }

  for (Parameter* p : params) p->zero_grad();
  loss(true);
  std::vector<double> analytic(picked.size());
  for (std::size_t k = 0; k < picked.size(); ++k) {
    auto [p, i] = entries[picked[k]];
    analytic[k] = p->grad[i];
  }

  GradCheckReport report;
  report.entries_checked = picked.size();
  for (std::size_t k = 0; k < picked.size(); ++k) {
    auto [p, i] = entries[picked[k]];
    const double saved = p->value[i];
    p->value[i] = saved + epsilon;
    const double up = loss(false);
    p->value[i] = saved - epsilon;
    const double down = loss(false);
    p->value[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[k];
    const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    report.max_rel_err = std::max(report.max_rel_err, rel);
  }
  return report;
}

}  // namespace ced::nn
