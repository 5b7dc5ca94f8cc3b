#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hirsute {

enum class Label : std::uint8_t {
  kNotFacialHair = 0,
  kFacialHair = 1,
  kShadow = 2,  // five o'clock shadow
};

// Per-pixel label grid, row-major. Every cell is 0, 1 or 2.
class LabelMask {
 public:
  LabelMask() = default;
  LabelMask(std::size_t width, std::size_t height);  // all kNotFacialHair
  LabelMask(std::size_t width, std::size_t height,
            std::vector<std::uint8_t> labels);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pixel_count() const { return labels_.size(); }
  std::span<const std::uint8_t> labels() const { return labels_; }

  std::uint8_t at(std::size_t row, std::size_t col) const {
    return labels_[row * width_ + col];
  }
  void set(std::size_t row, std::size_t col, Label label);

  std::string shape_string() const;

  bool operator==(const LabelMask&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> labels_;
};

struct IoUReport {
  std::uint8_t class_id = 1;
  std::uint64_t intersection = 0;
  std::uint64_t union_count = 0;
  // Empty when neither mask contains the class.
  std::optional<double> iou;
};

IoUReport iou(const LabelMask& pred, const LabelMask& gt,
              Label class_id = Label::kFacialHair);

// Facial-hair pixels over all pixels. Shadow pixels count only when asked.
double facial_hair_ratio(const LabelMask& mask, bool count_shadow = false);

// Ratio interval. The upper bound is always exclusive.
struct RatioBucket {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  bool lower_inclusive = true;

  bool contains(double r) const {
    return (lower_inclusive ? r >= lower : r > lower) && r < upper;
  }
  std::string label() const;
};

// (0, 0.05), [0.05, 0.1), [0.1, 0.15), [0.15, inf)
std::vector<RatioBucket> default_ratio_buckets();

struct BucketIoU {
  RatioBucket bucket;
  std::size_t members = 0;        // pairs whose gt ratio falls in the bucket
  std::size_t defined = 0;        // members with a defined IoU
  std::optional<double> mean_iou; // unweighted mean over defined members
  std::uint64_t intersection = 0;
  std::uint64_t union_count = 0;
};

using MaskPair = std::pair<LabelMask, LabelMask>;  // (pred, gt)

// Buckets by the ground-truth facial-hair ratio. Throws UsageError for
// unordered or overlapping buckets.
std::vector<BucketIoU> iou_by_ratio_bucket(
    std::span<const MaskPair> pairs, std::span<const RatioBucket> buckets,
    Label class_id = Label::kFacialHair, bool count_shadow = false);

struct AgreementReport {
  std::uint64_t intersection = 0;
  std::uint64_t union_count = 0;
  std::optional<double> aggregate_iou;  // sum(intersection) / sum(union)
  std::vector<IoUReport> per_pair;
};

AgreementReport annotator_agreement(std::span<const LabelMask> first,
                                    std::span<const LabelMask> second,
                                    Label class_id = Label::kFacialHair);

}  // namespace hirsute
