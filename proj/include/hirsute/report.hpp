#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hirsute/maskops.hpp"
#include "hirsute/metrics.hpp"
#include "hirsute/protocol.hpp"

// Fixed-format serialization of results. Every function is a pure function
// of its arguments, so identical inputs give byte-identical files.
namespace hirsute::report {

// FMR in units of 1e-4 with two decimals: 0.000255 -> "2.55".
std::string format_e4(double fmr);
// "2.55±0.09", or "n/a" without a mean. `scale` multiplies both numbers.
std::string format_mean_std(const Aggregate& a, double scale = 1.0);

std::string protocol_json(std::span<const ProtocolResult> results);

// One row per scope and mode: per-group FMR (x1e-4) mean and std, then the
// max/min FMR ratio mean, std and the number of splits it covers.
std::string table3_csv(std::span<const ProtocolResult> results);
// The same rows as an aligned text table, "mean±std" per cell.
std::string table3_text(std::span<const ProtocolResult> results);

struct ScopedThresholds {
  std::optional<std::string> scope;
  ThresholdTable table;
};

std::string thresholds_json(std::span<const ScopedThresholds> tables,
                            double target_fmr);
std::vector<ScopedThresholds> parse_thresholds_json(const std::string& text);

struct ScopedEer {
  std::optional<std::string> scope;
  std::optional<EerResult> eer;  // empty without genuine or impostor pairs
};

std::string errors_json(std::span<const CellErrors> errors,
                        std::span<const ScopedEer> eers);

struct MaskRow {
  std::string name;
  IoUReport report;
  double gt_ratio = 0.0;
};

// name,gt_ratio,intersection,union,iou
std::string iou_csv(std::span<const MaskRow> rows);
// bucket,members,defined,mean_iou,intersection,union
std::string bucket_csv(std::span<const BucketIoU> buckets);

}  // namespace hirsute::report
