#include "hirsute/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "hirsute/errors.hpp"
#include "hirsute/logging.hpp"

namespace hirsute {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Unbiased draw in [0, bound). std::uniform_int_distribution is not
// specified bit-for-bit across standard libraries, so splits would differ.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

SubjectSplit split_subjects(std::span<const std::string> subjects,
                            std::uint64_t seed, std::size_t index) {
  if (subjects.size() < 2) {
    throw UsageError(fmt::format("need at least 2 subjects to split, got {}",
                                 subjects.size()));
  }
  std::vector<std::string> order(subjects.begin(), subjects.end());
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
    throw UsageError("subject list contains duplicates");
  }
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(index)));
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[uniform_below(rng, i + 1)]);
  }
  const std::size_t n_val = (order.size() + 1) / 2;
  SubjectSplit split;
  split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return split;
}

std::string_view mode_name(ThresholdMode mode) {
  switch (mode) {
    case ThresholdMode::kGlobal: return "global";
    case ThresholdMode::kAdaptive: return "adaptive";
    case ThresholdMode::kOracle: return "oracle";
  }
  return "?";
}

std::vector<PairCategory> default_protocol_groups() {
  return {PairCategory(RatioClass::kCl, RatioClass::kCl),
          PairCategory(RatioClass::kCl, RatioClass::kFhL1),
          PairCategory(RatioClass::kFhL2, RatioClass::kFhL2)};
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.n = values.size();
  if (values.empty()) return a;
  double sum = 0.0;
  for (const double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  a.mean = mean;
  if (values.size() == 1) {
    a.std = 0.0;
    return a;
  }
  double sq = 0.0;
  for (const double v : values) sq += (v - mean) * (v - mean);
  a.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return a;
}

namespace {

Rate rate_from_counts(std::uint64_t errors, std::uint64_t count, bool exact) {
  Rate r;
  r.errors = errors;
  r.count = count;
  r.defined = count > 0;
  r.exact = exact;
  r.value = count > 0 ? static_cast<double>(errors) / static_cast<double>(count)
                      : std::numeric_limits<double>::quiet_NaN();
  return r;
}

bool pairwise_disjoint(std::span<const PairCategory> groups,
                       const RatioClassScheme& scheme) {
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a + 1; b < groups.size(); ++b) {
      if (categories_overlap(groups[a], groups[b], scheme)) return false;
    }
  }
  return true;
}

std::map<std::string, std::optional<double>> fmr_by_name(
    const std::map<PairCategory, Rate>& rates) {
  std::map<std::string, std::optional<double>> out;
  for (const auto& [cat, r] : rates) {
    out[cat.name()] = r.defined ? std::optional<double>(r.value) : std::nullopt;
  }
  return out;
}

struct TestCells {
  const ScoreCell* imp_all = nullptr;
  const ScoreCell* gen_all = nullptr;
  std::vector<const ScoreCell*> imp_group;
  std::vector<const ScoreCell*> gen_group;
};

SplitOutcome run_split(const Dataset& scoped, const EmbeddingStore& store,
                       std::size_t index, const SplitPlan& plan,
                       double target_fmr, std::span<const PairCategory> groups,
                       const std::optional<std::string>& scope,
                       const ProtocolOptions& options, bool disjoint) {
  const auto subjects = scoped.subject_ids();
  const auto split = split_subjects(subjects, plan.seed, index);
  const std::set<std::string> val_subjects(split.validation.begin(),
                                           split.validation.end());
  const std::set<std::string> test_subjects(split.test.begin(), split.test.end());
  const Dataset val = scoped.restrict_to_subjects(val_subjects);
  const Dataset test = scoped.restrict_to_subjects(test_subjects);

  SplitOutcome out;
  out.index = index;
  out.validation_subjects = val_subjects.size();
  out.test_subjects = test_subjects.size();

  // Calibration on the validation half.
  std::vector<CellKey> val_keys = {{PairKind::kImpostor, std::nullopt, scope}};
  for (const auto& g : groups) val_keys.push_back({PairKind::kImpostor, g, scope});
  const auto val_cells = score_pairs(val, store, val_keys, options.scoring);
  out.validation_impostor_pairs = val_cells[0].scores.count();
  if (val_cells[0].scores.empty()) {
    throw CalibrationError(fmt::format(
        "split {}: validation half has no impostor pairs", index));
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (val_cells[g + 1].scores.empty()) {
      throw CalibrationError(fmt::format(
          "split {}: group {} has no validation impostor pairs; cannot "
          "calibrate its threshold",
          index, groups[g].name()));
    }
  }
  out.global_threshold = threshold_for_fmr(val_cells[0].scores, target_fmr).threshold;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.adaptive_thresholds[groups[g]] =
        threshold_for_fmr(val_cells[g + 1].scores, target_fmr).threshold;
  }

  // Evaluation on the test half. Probes at the calibrated thresholds make
  // the test rates exact however far they fall outside the retained tails.
  std::vector<CellKey> test_keys;
  std::vector<std::vector<double>> probes;
  const double tg = out.global_threshold;
  test_keys.push_back({PairKind::kImpostor, std::nullopt, scope});
  probes.push_back({tg});
  test_keys.push_back({PairKind::kGenuine, std::nullopt, scope});
  probes.push_back({tg});
  for (const auto& g : groups) {
    const double ta = out.adaptive_thresholds.at(g);
    test_keys.push_back({PairKind::kImpostor, g, scope});
    probes.push_back({tg, ta});
    test_keys.push_back({PairKind::kGenuine, g, scope});
    probes.push_back({tg, ta});
  }
  const auto test_cells = score_pairs(test, store, test_keys, options.scoring, probes);
  TestCells tc;
  tc.imp_all = &test_cells[0];
  tc.gen_all = &test_cells[1];
  for (std::size_t g = 0; g < groups.size(); ++g) {
    tc.imp_group.push_back(&test_cells[2 + 2 * g]);
    tc.gen_group.push_back(&test_cells[3 + 2 * g]);
  }
  out.test_impostor_pairs = tc.imp_all->scores.count();
  out.test_genuine_pairs = tc.gen_all->scores.count();

  auto& fmr_g = out.fmr[ThresholdMode::kGlobal];
  auto& fmr_a = out.fmr[ThresholdMode::kAdaptive];
  auto& fnmr_g = out.fnmr[ThresholdMode::kGlobal];
  auto& fnmr_a = out.fnmr[ThresholdMode::kAdaptive];
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double ta = out.adaptive_thresholds.at(groups[g]);
    fmr_g[groups[g]] = fmr_at(tc.imp_group[g]->scores, tg);
    fmr_a[groups[g]] = fmr_at(tc.imp_group[g]->scores, ta);
    fnmr_g[groups[g]] = fnmr_at(tc.gen_group[g]->scores, tg);
    fnmr_a[groups[g]] = fnmr_at(tc.gen_group[g]->scores, ta);
  }
  out.fmr_all[ThresholdMode::kGlobal] = fmr_at(tc.imp_all->scores, tg);
  out.fnmr_all[ThresholdMode::kGlobal] = fnmr_at(tc.gen_all->scores, tg);
  if (disjoint) {
    // Group pairs use their own threshold; every other pair the global one.
    auto combine = [&](const ScoreCell* all_cell,
                       const std::vector<const ScoreCell*>& group_cells,
                       bool impostor) {
      const auto& all = all_cell->scores;
      std::uint64_t ge_rest = *exact_count_ge(all, tg);
      std::uint64_t ge_total = 0;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& s = group_cells[g]->scores;
        ge_rest -= *exact_count_ge(s, tg);
        ge_total += *exact_count_ge(s, out.adaptive_thresholds.at(groups[g]));
      }
      ge_total += ge_rest;
      const auto errors = impostor ? ge_total : all.count() - ge_total;
      return rate_from_counts(errors, all.count(), true);
    };
    out.fmr_all[ThresholdMode::kAdaptive] = combine(tc.imp_all, tc.imp_group, true);
    out.fnmr_all[ThresholdMode::kAdaptive] = combine(tc.gen_all, tc.gen_group, false);
  }

  if (options.oracle_mode) {
    auto& fmr_o = out.fmr[ThresholdMode::kOracle];
    auto& fnmr_o = out.fnmr[ThresholdMode::kOracle];
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& imp = tc.imp_group[g]->scores;
      if (imp.empty()) {
        fmr_o[groups[g]] = Rate{};
        fnmr_o[groups[g]] = Rate{};
        continue;
      }
      const double to = threshold_for_fmr(imp, target_fmr).threshold;
      out.oracle_thresholds[groups[g]] = to;
      fmr_o[groups[g]] = fmr_at(imp, to);
      fnmr_o[groups[g]] =
          fnmr_at(tc.gen_group[g]->scores, to, Exactness::kBestEffort);
    }
  }

  for (const auto& [mode, rates] : out.fmr) {
    out.inequity[mode] = inequity_ratio(fmr_by_name(rates));
  }
  return out;
}

}  // namespace

ProtocolResult run_protocol(const Dataset& dataset, const EmbeddingStore& store,
                            const SplitPlan& plan, double target_fmr,
                            std::span<const PairCategory> groups,
                            const std::optional<std::string>& scope,
                            const ProtocolOptions& options) {
  if (!(target_fmr > 0.0 && target_fmr < 1.0)) {
    throw UsageError(fmt::format("target FMR {} outside (0, 1)", target_fmr));
  }
  if (plan.n_splits == 0) throw UsageError("need at least one split");
  if (groups.empty()) throw UsageError("need at least one calibration group");
  options.scoring.scheme.validate();

  const Dataset scoped = scope ? dataset.restrict_to_demographic(*scope) : dataset;
  if (scoped.size() == 0) {
    throw DataError(fmt::format("no images in scope '{}'", scope.value_or("all")));
  }
  const bool disjoint = pairwise_disjoint(groups, options.scoring.scheme);
  if (!disjoint) {
    logging::warn("calibration groups overlap; adaptive all-pairs rates are "
                  "not reported");
  }

  ProtocolResult result;
  result.scope = scope;
  result.target_fmr = target_fmr;
  result.plan = plan;
  result.groups.assign(groups.begin(), groups.end());
  result.modes = {ThresholdMode::kGlobal, ThresholdMode::kAdaptive};
  if (options.oracle_mode) result.modes.push_back(ThresholdMode::kOracle);

  for (std::size_t s = 0; s < plan.n_splits; ++s) {
    logging::info("scope {}: split {}/{}", scope.value_or("all"), s + 1,
                  plan.n_splits);
    result.splits.push_back(run_split(scoped, store, s, plan, target_fmr, groups,
                                      scope, options, disjoint));
  }

  for (const auto mode : result.modes) {
    for (const auto& g : result.groups) {
      std::vector<double> values;
      for (const auto& split : result.splits) {
        const auto& r = split.fmr.at(mode).at(g);
        if (r.defined) values.push_back(r.value);
      }
      result.fmr_summary[mode][g] = aggregate(values);
    }
    std::vector<double> ratios;
    auto& excluded = result.ratio_excluded_splits[mode];
    for (const auto& split : result.splits) {
      const auto& ineq = split.inequity.at(mode);
      if (ineq.ratio && ineq.excluded_zero_fmr.empty() &&
          ineq.undefined_groups.empty()) {
        ratios.push_back(*ineq.ratio);
      } else {
        excluded.push_back(split.index);
      }
    }
    result.ratio_summary[mode] = aggregate(ratios);
  }
  return result;
}

}  // namespace hirsute
