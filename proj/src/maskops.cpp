#include "hirsute/maskops.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hirsute/errors.hpp"

namespace hirsute {

LabelMask::LabelMask(std::size_t width, std::size_t height)
    : LabelMask(width, height, std::vector<std::uint8_t>(width * height, 0)) {}

LabelMask::LabelMask(std::size_t width, std::size_t height,
                     std::vector<std::uint8_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  if (width_ == 0 || height_ == 0) {
    throw DataError(fmt::format("mask must be non-empty, got {}x{}", width_,
                                height_));
  }
  if (labels_.size() != width_ * height_) {
    throw DataError(fmt::format("mask {}x{} needs {} labels, got {}", width_,
                                height_, width_ * height_, labels_.size()));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] > 2) {
      throw DataError(fmt::format("mask label {} at pixel {} is not 0, 1 or 2",
                                  labels_[i], i));
    }
  }
}

void LabelMask::set(std::size_t row, std::size_t col, Label label) {
  labels_[row * width_ + col] = static_cast<std::uint8_t>(label);
}

std::string LabelMask::shape_string() const {
  return fmt::format("{}x{}", width_, height_);
}

IoUReport iou(const LabelMask& pred, const LabelMask& gt, Label class_id) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw DataError(fmt::format("mask shape mismatch: prediction {} vs truth {}",
                                pred.shape_string(), gt.shape_string()));
  }
  const auto c = static_cast<std::uint8_t>(class_id);
  IoUReport report;
  report.class_id = c;
  const auto p = pred.labels();
  const auto g = gt.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool in_p = p[i] == c;
    const bool in_g = g[i] == c;
    report.intersection += (in_p && in_g) ? 1 : 0;
    report.union_count += (in_p || in_g) ? 1 : 0;
  }
  if (report.union_count > 0) {
    report.iou = static_cast<double>(report.intersection) /
                 static_cast<double>(report.union_count);
  }
  return report;
}

double facial_hair_ratio(const LabelMask& mask, bool count_shadow) {
  if (mask.pixel_count() == 0) throw DataError("facial_hair_ratio: empty mask");
  std::size_t hair = 0;
  for (const auto v : mask.labels()) {
    if (v == 1 || (count_shadow && v == 2)) ++hair;
  }
  return static_cast<double>(hair) / static_cast<double>(mask.pixel_count());
}

std::string RatioBucket::label() const {
  const char open = lower_inclusive ? '[' : '(';
  if (std::isinf(upper)) return fmt::format("{}{}, inf)", open, lower);
  return fmt::format("{}{}, {})", open, lower, upper);
}

std::vector<RatioBucket> default_ratio_buckets() {
  return {
      {0.0, 0.05, false},
      {0.05, 0.10, true},
      {0.10, 0.15, true},
      {0.15, std::numeric_limits<double>::infinity(), true},
  };
}

namespace {

void check_buckets(std::span<const RatioBucket> buckets) {
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const auto& b = buckets[i];
    if (!(b.lower < b.upper)) {
      throw UsageError(fmt::format("ratio bucket {} is empty", b.label()));
    }
    if (i == 0) continue;
    // Upper bounds are exclusive, so [a, b) followed by [b, c) is disjoint.
    const auto& prev = buckets[i - 1];
    if (prev.upper > b.lower) {
      throw UsageError(fmt::format("ratio buckets {} and {} overlap or are "
                                   "out of order",
                                   prev.label(), b.label()));
    }
  }
}

}  // namespace

std::vector<BucketIoU> iou_by_ratio_bucket(std::span<const MaskPair> pairs,
                                           std::span<const RatioBucket> buckets,
                                           Label class_id, bool count_shadow) {
  check_buckets(buckets);
  std::vector<BucketIoU> out;
  out.reserve(buckets.size());
  std::vector<double> sums(buckets.size(), 0.0);
  for (const auto& b : buckets) {
    BucketIoU entry;
    entry.bucket = b;
    out.push_back(entry);
  }

  for (const auto& [pred, gt] : pairs) {
    const double r = facial_hair_ratio(gt, count_shadow);
    for (std::size_t k = 0; k < buckets.size(); ++k) {
      if (!buckets[k].contains(r)) continue;
      const IoUReport rep = iou(pred, gt, class_id);
      auto& slot = out[k];
      ++slot.members;
      slot.intersection += rep.intersection;
      slot.union_count += rep.union_count;
      if (rep.iou) {
        ++slot.defined;
        sums[k] += *rep.iou;
      }
      break;
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k].defined > 0) {
      out[k].mean_iou = sums[k] / static_cast<double>(out[k].defined);
    }
  }
  return out;
}

AgreementReport annotator_agreement(std::span<const LabelMask> first,
                                    std::span<const LabelMask> second,
                                    Label class_id) {
  if (first.size() != second.size()) {
    throw DataError(fmt::format("annotator lists differ in length: {} vs {}",
                                first.size(), second.size()));
  }
  if (first.empty()) throw DataError("annotator lists are empty");
  AgreementReport report;
  report.per_pair.reserve(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    auto rep = iou(first[i], second[i], class_id);
    report.intersection += rep.intersection;
    report.union_count += rep.union_count;
    report.per_pair.push_back(rep);
  }
  if (report.union_count > 0) {
    report.aggregate_iou = static_cast<double>(report.intersection) /
                           static_cast<double>(report.union_count);
  }
  return report;
}

}  // namespace hirsute
