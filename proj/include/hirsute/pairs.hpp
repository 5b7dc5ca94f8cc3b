#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hirsute/dataset.hpp"

namespace hirsute {

// Facial-hair extent classes. kCl, kFhS and kFhL1 partition [0, 1]; kFhL2 is
// a subset of kFhL1.
enum class RatioClass : std::uint8_t { kCl = 0, kFhS = 1, kFhL1 = 2, kFhL2 = 3 };

inline constexpr RatioClass kAllRatioClasses[] = {
    RatioClass::kCl, RatioClass::kFhS, RatioClass::kFhL1, RatioClass::kFhL2};

std::string_view class_name(RatioClass c);
// Throws UsageError for anything but cl, fh_S, fh_L1, fh_L2.
RatioClass parse_class(std::string_view name);

struct ClassSet {
  std::uint8_t bits = 0;

  bool contains(RatioClass c) const {
    return (bits >> static_cast<unsigned>(c)) & 1u;
  }
  void insert(RatioClass c) { bits |= std::uint8_t(1u << static_cast<unsigned>(c)); }
  std::size_t size() const { return static_cast<std::size_t>(__builtin_popcount(bits)); }
  std::vector<RatioClass> members() const;

  bool operator==(const ClassSet&) const = default;
};

// Lower bounds inclusive, upper bounds exclusive:
//   cl: r < cl_upper, fh_S: cl_upper <= r < large_lower,
//   fh_L1: r >= large_lower, fh_L2: r >= xlarge_lower.
struct RatioClassScheme {
  double cl_upper = 0.001;
  double large_lower = 0.10;
  double xlarge_lower = 0.15;

  void validate() const;
  bool operator==(const RatioClassScheme&) const = default;
};

ClassSet classify(double ratio, const RatioClassScheme& scheme = {});

// Unordered pair of ratio classes, stored with left <= right.
class PairCategory {
 public:
  PairCategory(RatioClass a, RatioClass b)
      : left_(a < b ? a : b), right_(a < b ? b : a) {}

  // "cl_vs_fh_L1" and "fh_L1_vs_cl" name the same category.
  static PairCategory parse(std::string_view name);

  RatioClass left() const { return left_; }
  RatioClass right() const { return right_; }
  std::string name() const;

  bool matches(ClassSet a, ClassSet b) const {
    return (a.contains(left_) && b.contains(right_)) ||
           (a.contains(right_) && b.contains(left_));
  }

  auto operator<=>(const PairCategory&) const = default;

 private:
  RatioClass left_;
  RatioClass right_;
};

bool categorize_pair(double ra, double rb, const PairCategory& target,
                     const RatioClassScheme& scheme = {});
// Parses `target` first; unknown class names are a UsageError.
bool categorize_pair(double ra, double rb, std::string_view target,
                     const RatioClassScheme& scheme = {});

// True if some image pair could fall in both categories.
bool categories_overlap(const PairCategory& a, const PairCategory& b,
                        const RatioClassScheme& scheme = {});

enum class PairKind : std::uint8_t { kGenuine = 0, kImpostor = 1 };
std::string_view kind_name(PairKind kind);

struct PairSpec {
  PairKind kind = PairKind::kImpostor;
  std::optional<std::string> scope;  // demographic tag; empty means all
  std::optional<PairCategory> category;
  // Impostor pairs whose images carry different demographic tags.
  bool cross_demographic = false;
};

// Images of one scope sorted by image_id, with the per-image attributes the
// pair loop needs. Position i < j enumerates pairs in image_id order.
struct PairIndex {
  std::vector<std::size_t> record;        // dataset record index
  std::vector<std::uint32_t> subject;     // subject ordinal
  std::vector<std::uint32_t> demographic; // demographic ordinal
  std::vector<ClassSet> classes;
  std::vector<std::string> demographic_names;

  std::size_t size() const { return record.size(); }

  // Requires every record in scope to carry a facial_hair_ratio.
  static PairIndex build(const Dataset& dataset,
                         const std::optional<std::string>& scope,
                         const RatioClassScheme& scheme = {});
};

struct ImagePair {
  std::size_t first = 0;   // dataset record index, smaller image_id
  std::size_t second = 0;

  bool operator==(const ImagePair&) const = default;
};

// Lazy pair stream. Pairs are never materialized; the row range form lets
// callers split the stream into disjoint blocks.
class PairEnumerator {
 public:
  PairEnumerator(const Dataset& dataset, PairSpec spec,
                 const RatioClassScheme& scheme = {});

  const PairIndex& index() const { return index_; }
  const PairSpec& spec() const { return spec_; }

  // Visits pairs whose first position lies in [row_begin, row_end).
  template <typename Fn>
  void for_each(Fn&& fn, std::size_t row_begin = 0,
                std::size_t row_end = std::numeric_limits<std::size_t>::max()) const {
    const std::size_t n = index_.size();
    row_end = row_end < n ? row_end : n;
    for (std::size_t i = row_begin; i < row_end; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (accepts(i, j)) fn(ImagePair{index_.record[i], index_.record[j]});
      }
    }
  }

  std::uint64_t count() const;
  std::vector<ImagePair> collect() const;

  bool accepts(std::size_t i, std::size_t j) const {
    const bool genuine = index_.subject[i] == index_.subject[j];
    if (genuine != (spec_.kind == PairKind::kGenuine)) return false;
    if (!genuine && !spec_.cross_demographic &&
        index_.demographic[i] != index_.demographic[j]) {
      return false;
    }
    return !spec_.category ||
           spec_.category->matches(index_.classes[i], index_.classes[j]);
  }

 private:
  PairSpec spec_;
  PairIndex index_;
};

}  // namespace hirsute
