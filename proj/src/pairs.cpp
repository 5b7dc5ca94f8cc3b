#include "hirsute/pairs.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "hirsute/errors.hpp"

namespace hirsute {

std::string_view class_name(RatioClass c) {
  switch (c) {
    case RatioClass::kCl: return "cl";
    case RatioClass::kFhS: return "fh_S";
    case RatioClass::kFhL1: return "fh_L1";
    case RatioClass::kFhL2: return "fh_L2";
  }
  return "?";
}

RatioClass parse_class(std::string_view name) {
  for (const auto c : kAllRatioClasses) {
    if (class_name(c) == name) return c;
  }
  throw UsageError(fmt::format("unknown ratio class '{}' (expected cl, fh_S, "
                               "fh_L1 or fh_L2)",
                               name));
}

std::vector<RatioClass> ClassSet::members() const {
  std::vector<RatioClass> out;
  for (const auto c : kAllRatioClasses) {
    if (contains(c)) out.push_back(c);
  }
  return out;
}

void RatioClassScheme::validate() const {
  if (!(cl_upper > 0.0 && cl_upper <= large_lower &&
        large_lower <= xlarge_lower && xlarge_lower <= 1.0)) {
    throw UsageError(fmt::format(
        "ratio class thresholds must satisfy 0 < cl ({}) <= fh_L1 ({}) <= "
        "fh_L2 ({}) <= 1",
        cl_upper, large_lower, xlarge_lower));
  }
}

ClassSet classify(double ratio, const RatioClassScheme& scheme) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw UsageError(fmt::format("facial hair ratio {} outside [0, 1]", ratio));
  }
  ClassSet s;
  if (ratio < scheme.cl_upper) {
    s.insert(RatioClass::kCl);
  } else if (ratio < scheme.large_lower) {
    s.insert(RatioClass::kFhS);
  } else {
    s.insert(RatioClass::kFhL1);
    if (ratio >= scheme.xlarge_lower) s.insert(RatioClass::kFhL2);
  }
  return s;
}

PairCategory PairCategory::parse(std::string_view name) {
  constexpr std::string_view sep = "_vs_";
  const auto pos = name.find(sep);
  if (pos == std::string_view::npos) {
    throw UsageError(
        fmt::format("pair category '{}' is not of the form <a>_vs_<b>", name));
  }
  return PairCategory(parse_class(name.substr(0, pos)),
                      parse_class(name.substr(pos + sep.size())));
}

std::string PairCategory::name() const {
  return fmt::format("{}_vs_{}", class_name(left_), class_name(right_));
}

bool categorize_pair(double ra, double rb, const PairCategory& target,
                     const RatioClassScheme& scheme) {
  return target.matches(classify(ra, scheme), classify(rb, scheme));
}

bool categorize_pair(double ra, double rb, std::string_view target,
                     const RatioClassScheme& scheme) {
  return categorize_pair(ra, rb, PairCategory::parse(target), scheme);
}

namespace {

std::vector<ClassSet> reachable_class_sets(const RatioClassScheme& scheme) {
  std::vector<double> points = {0.0, scheme.cl_upper, scheme.large_lower,
                                scheme.xlarge_lower, 1.0};
  std::sort(points.begin(), points.end());
  const auto n = points.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    points.push_back(0.5 * (points[i] + points[i + 1]));
  }
  std::vector<ClassSet> sets;
  for (const double p : points) {
    const auto s = classify(p, scheme);
    if (std::find(sets.begin(), sets.end(), s) == sets.end()) sets.push_back(s);
  }
  return sets;
}

}  // namespace

bool categories_overlap(const PairCategory& a, const PairCategory& b,
                        const RatioClassScheme& scheme) {
  const auto sets = reachable_class_sets(scheme);
  for (const auto& x : sets) {
    for (const auto& y : sets) {
      if (a.matches(x, y) && b.matches(x, y)) return true;
    }
  }
  return false;
}

std::string_view kind_name(PairKind kind) {
  return kind == PairKind::kGenuine ? "genuine" : "impostor";
}

PairIndex PairIndex::build(const Dataset& dataset,
                           const std::optional<std::string>& scope,
                           const RatioClassScheme& scheme) {
  PairIndex idx;
  const auto& recs = dataset.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!scope || recs[i].demographic == *scope) idx.record.push_back(i);
  }
  std::sort(idx.record.begin(), idx.record.end(),
            [&](std::size_t a, std::size_t b) {
              return recs[a].image_id < recs[b].image_id;
            });
  std::map<std::string, std::uint32_t> subjects;
  std::map<std::string, std::uint32_t> demos;
  for (const auto r : idx.record) {
    subjects.emplace(recs[r].subject_id, 0);
    demos.emplace(recs[r].demographic, 0);
  }
  std::uint32_t next = 0;
  for (auto& [_, ord] : subjects) ord = next++;
  next = 0;
  for (auto& [name, ord] : demos) {
    ord = next++;
    idx.demographic_names.push_back(name);
  }
  idx.subject.reserve(idx.record.size());
  idx.demographic.reserve(idx.record.size());
  idx.classes.reserve(idx.record.size());
  for (const auto r : idx.record) {
    const auto& rec = recs[r];
    if (!rec.facial_hair_ratio) {
      throw DataError(fmt::format("image '{}' has no facial_hair_ratio",
                                  rec.image_id));
    }
    idx.subject.push_back(subjects.at(rec.subject_id));
    idx.demographic.push_back(demos.at(rec.demographic));
    idx.classes.push_back(classify(*rec.facial_hair_ratio, scheme));
  }
  return idx;
}

PairEnumerator::PairEnumerator(const Dataset& dataset, PairSpec spec,
                               const RatioClassScheme& scheme)
    : spec_(std::move(spec)), index_(PairIndex::build(dataset, spec_.scope, scheme)) {}

std::uint64_t PairEnumerator::count() const {
  std::uint64_t n = 0;
  for_each([&](const ImagePair&) { ++n; });
  return n;
}

std::vector<ImagePair> PairEnumerator::collect() const {
  std::vector<ImagePair> out;
  for_each([&](const ImagePair& p) { out.push_back(p); });
  return out;
}

}  // namespace hirsute
