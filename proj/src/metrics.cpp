#include "hirsute/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hirsute/errors.hpp"
#include "hirsute/logging.hpp"

namespace hirsute {

std::optional<std::uint64_t> exact_count_ge(const ScoreSet& s, double t) {
  if (s.empty() || t > s.max()) return 0;
  if (t <= s.min()) return s.count();
  const auto& tail = s.tail();
  const auto below = [&] {
    return static_cast<std::uint64_t>(
        std::lower_bound(tail.begin(), tail.end(), t) - tail.begin());
  };
  if (s.tail_complete()) return s.count() - below();
  if (!tail.empty()) {
    // Unretained scores sit at or below tail.front() (kHigh) or at or above
    // tail.back() (kLow).
    if (s.side() == TailSide::kHigh && t > tail.front()) {
      return static_cast<std::uint64_t>(tail.size()) - below();
    }
    if (s.side() == TailSide::kLow && t <= tail.back()) {
      return s.count() - below();
    }
  }
  return s.probe_count_ge(t);
}

namespace {

std::uint64_t histogram_count_ge(const ScoreSet& s, double t) {
  const auto& h = s.histogram();
  std::uint64_t n = 0;
  for (std::size_t b = s.histogram_config().bin_of(t); b < h.size(); ++b) n += h[b];
  return n;
}

std::uint64_t count_ge(const ScoreSet& s, double t, Exactness exactness,
                       bool& exact) {
  if (const auto n = exact_count_ge(s, t)) {
    exact = true;
    return *n;
  }
  if (exactness == Exactness::kRequired) {
    const auto& tail = s.tail();
    throw TailCoverageError(fmt::format(
        "threshold {} lies outside the retained score tail [{}, {}] of {} "
        "scores; rerun scoring with a larger tail fraction",
        t, tail.empty() ? s.min() : tail.front(),
        tail.empty() ? s.max() : tail.back(), s.count()));
  }
  exact = false;
  return histogram_count_ge(s, t);
}

Rate make_rate(std::uint64_t errors, std::uint64_t count, bool exact) {
  Rate r;
  r.count = count;
  r.errors = errors;
  r.exact = exact;
  r.defined = count > 0;
  r.value = count > 0 ? static_cast<double>(errors) / static_cast<double>(count)
                      : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace

Rate fmr_at(const ScoreSet& impostor, double t, Exactness exactness) {
  if (impostor.empty()) return make_rate(0, 0, true);
  bool exact = true;
  const auto ge = count_ge(impostor, t, exactness, exact);
  return make_rate(ge, impostor.count(), exact);
}

Rate fnmr_at(const ScoreSet& genuine, double t, Exactness exactness) {
  if (genuine.empty()) return make_rate(0, 0, true);
  bool exact = true;
  const auto ge = count_ge(genuine, t, exactness, exact);
  return make_rate(genuine.count() - ge, genuine.count(), exact);
}

ThresholdResult threshold_for_fmr(const ScoreSet& impostor, double target) {
  if (!(target > 0.0 && target <= 1.0)) {
    throw UsageError(fmt::format("target FMR {} outside (0, 1]", target));
  }
  if (impostor.empty()) {
    throw CalibrationError("cannot calibrate a threshold on an empty cell");
  }
  const std::uint64_t n = impostor.count();
  const double total = static_cast<double>(n);
  if (total * target < 1.0) {
    logging::warn("{} impostor scores cannot resolve a target FMR of {}; "
                  "threshold will sit above every score",
                  n, target);
  }
  // Largest m with m / n <= target, evaluated exactly as fmr_at compares.
  auto m = static_cast<std::uint64_t>(
      std::min(total, std::floor(target * total)));
  while (m < n && static_cast<double>(m + 1) / total <= target) ++m;
  while (m > 0 && static_cast<double>(m) / total > target) --m;

  ThresholdResult result;
  result.allowed = m;
  if (m >= n) {
    result.threshold = impostor.min();
    result.fmr = fmr_at(impostor, result.threshold);
    return result;
  }

  // v = (m+1)-th largest score. Every score strictly above v has at most m
  // scores at or above it; v itself has at least m+1.
  const auto& tail = impostor.tail();
  const bool have = impostor.tail_complete() ||
                    (impostor.side() == TailSide::kHigh && tail.size() >= m + 1);
  if (!have) {
    throw TailCoverageError(fmt::format(
        "target FMR {} needs the {} largest of {} scores but only {} are "
        "retained; rerun scoring with a larger tail fraction",
        target, m + 1, n, tail.size()));
  }
  const double v = tail[tail.size() - 1 - m];
  const auto above = std::upper_bound(tail.begin(), tail.end(), v);
  if (above == tail.end()) {
    result.reachable = false;
    result.threshold =
        std::nextafter(impostor.max(), std::numeric_limits<double>::infinity());
    if (total * target >= 1.0) {
      logging::warn("target FMR {} unreachable: {} scores tie at the maximum "
                    "{}; threshold set just above it",
                    target, tail.end() - std::lower_bound(tail.begin(), tail.end(), v),
                    impostor.max());
    }
  } else {
    result.threshold = *above;
  }
  result.fmr = fmr_at(impostor, result.threshold);
  return result;
}

EerResult eer(const ScoreSet& impostor, const ScoreSet& genuine) {
  if (impostor.empty() || genuine.empty()) {
    throw UsageError("EER needs non-empty impostor and genuine score sets");
  }
  std::vector<double> candidates;
  candidates.insert(candidates.end(), impostor.tail().begin(), impostor.tail().end());
  candidates.insert(candidates.end(), genuine.tail().begin(), genuine.tail().end());
  candidates.push_back(impostor.min());
  candidates.push_back(genuine.min());
  candidates.push_back(std::nextafter(std::max(impostor.max(), genuine.max()),
                                      std::numeric_limits<double>::infinity()));
  const bool complete = impostor.tail_complete() && genuine.tail_complete();
  if (!complete) {
    const auto& cfg = impostor.histogram_config();
    for (std::size_t b = 0; b < cfg.bins; ++b) candidates.push_back(cfg.lower_edge(b));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  // Suffix sums make the histogram fallback O(1) per candidate.
  auto suffix = [](const ScoreSet& s) {
    const auto& h = s.histogram();
    std::vector<std::uint64_t> out(h.size() + 1, 0);
    for (std::size_t b = h.size(); b-- > 0;) out[b] = out[b + 1] + h[b];
    return out;
  };
  const auto imp_suffix = complete ? std::vector<std::uint64_t>{} : suffix(impostor);
  const auto gen_suffix = complete ? std::vector<std::uint64_t>{} : suffix(genuine);
  auto ge = [](const ScoreSet& s, const std::vector<std::uint64_t>& sfx, double t,
               bool& exact) -> std::uint64_t {
    if (const auto n = exact_count_ge(s, t)) return *n;
    exact = false;
    return sfx[s.histogram_config().bin_of(t)];
  };

  const double ni = static_cast<double>(impostor.count());
  const double ng = static_cast<double>(genuine.count());
  EerResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const double t : candidates) {
    bool exact = true;
    const double fmr = static_cast<double>(ge(impostor, imp_suffix, t, exact)) / ni;
    const double fnmr =
        static_cast<double>(genuine.count() - ge(genuine, gen_suffix, t, exact)) / ng;
    const double gap = std::abs(fmr - fnmr);
    if (gap < best_gap) {
      best_gap = gap;
      best.threshold = t;
      best.fmr = fmr;
      best.fnmr = fnmr;
      best.rate = 0.5 * (fmr + fnmr);
      best.exact = exact;
    }
  }
  best.uncertainty = best.exact ? 0.0 : impostor.histogram_config().width();
  best.separated = impostor.max() < genuine.min();
  return best;
}

InequityResult inequity_ratio(
    const std::map<std::string, std::optional<double>>& fmrs) {
  InequityResult out;
  double hi = -1.0;
  double lo = std::numeric_limits<double>::infinity();
  std::size_t included = 0;
  for (const auto& [group, fmr] : fmrs) {
    if (!fmr || std::isnan(*fmr)) {
      out.undefined_groups.push_back(group);
      continue;
    }
    if (*fmr < 0.0) {
      throw UsageError(fmt::format("group '{}' has negative FMR {}", group, *fmr));
    }
    if (*fmr == 0.0) {
      out.excluded_zero_fmr.push_back(group);
      continue;
    }
    ++included;
    if (*fmr > hi) {
      hi = *fmr;
      out.max_group = group;
    }
    if (*fmr < lo) {
      lo = *fmr;
      out.min_group = group;
    }
  }
  if (included >= 2) out.ratio = hi / lo;
  return out;
}

InequityResult inequity_ratio(const std::map<std::string, double>& fmrs) {
  std::map<std::string, std::optional<double>> wrapped;
  for (const auto& [g, v] : fmrs) wrapped.emplace(g, v);
  return inequity_ratio(wrapped);
}

double ThresholdTable::threshold_for(
    const std::optional<PairCategory>& category) const {
  if (category) {
    const auto it = per_category.find(*category);
    if (it != per_category.end()) return it->second;
  }
  return global_threshold;
}

ThresholdTable calibrate(std::span<const ScoreCell> impostor_cells,
                         double target) {
  ThresholdTable table;
  bool have_global = false;
  for (const auto& cell : impostor_cells) {
    if (cell.key.kind != PairKind::kImpostor) continue;
    if (cell.scores.empty()) {
      throw CalibrationError(fmt::format(
          "cannot calibrate {}: no impostor pairs", cell.key.name()));
    }
    const double t = threshold_for_fmr(cell.scores, target).threshold;
    if (cell.key.category) {
      table.per_category[*cell.key.category] = t;
    } else {
      table.global_threshold = t;
      have_global = true;
    }
  }
  if (!have_global) {
    throw CalibrationError("no uncategorized impostor cell to calibrate the "
                           "global threshold on");
  }
  return table;
}

std::vector<CellErrors> evaluate(std::span<const ScoreCell> cells,
                                 const ThresholdTable& table,
                                 Exactness exactness) {
  std::vector<CellErrors> out;
  out.reserve(cells.size());
  for (const auto& cell : cells) {
    CellErrors e;
    e.key = cell.key;
    e.threshold = table.threshold_for(cell.key.category);
    if (cell.key.kind == PairKind::kImpostor) {
      e.fmr = fmr_at(cell.scores, e.threshold, exactness);
    } else {
      e.fnmr = fnmr_at(cell.scores, e.threshold, exactness);
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace hirsute
