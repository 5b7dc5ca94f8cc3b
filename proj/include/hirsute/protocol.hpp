#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hirsute/dataset.hpp"
#include "hirsute/metrics.hpp"
#include "hirsute/pairs.hpp"
#include "hirsute/scoring.hpp"

namespace hirsute {

struct SplitPlan {
  std::uint64_t seed = 0;
  std::size_t n_splits = 5;
};

struct SubjectSplit {
  std::vector<std::string> validation;  // ceil(n / 2) subjects
  std::vector<std::string> test;        // floor(n / 2) subjects
};

// Deterministic shuffle of the sorted subject list keyed by (seed, index),
// then halved. Identical on every platform. Throws UsageError for fewer than
// two subjects.
SubjectSplit split_subjects(std::span<const std::string> subjects,
                            std::uint64_t seed, std::size_t index);

enum class ThresholdMode : std::uint8_t {
  kGlobal = 0,    // one threshold from all validation impostors
  kAdaptive = 1,  // one threshold per group from that group's validation impostors
  kOracle = 2,    // per-group thresholds fitted on the test half itself
};
std::string_view mode_name(ThresholdMode mode);

// The three groups calibrated in the adaptive-threshold experiment.
std::vector<PairCategory> default_protocol_groups();

struct SplitOutcome {
  std::size_t index = 0;
  std::size_t validation_subjects = 0;
  std::size_t test_subjects = 0;
  std::uint64_t validation_impostor_pairs = 0;
  std::uint64_t test_impostor_pairs = 0;
  std::uint64_t test_genuine_pairs = 0;

  double global_threshold = 0.0;
  std::map<PairCategory, double> adaptive_thresholds;
  std::map<PairCategory, double> oracle_thresholds;  // oracle mode only

  // Test-half rates per mode and group.
  std::map<ThresholdMode, std::map<PairCategory, Rate>> fmr;
  std::map<ThresholdMode, std::map<PairCategory, Rate>> fnmr;
  // All test pairs; in adaptive mode, pairs outside every group use the
  // global threshold. Adaptive totals need pairwise-disjoint groups.
  std::map<ThresholdMode, Rate> fmr_all;
  std::map<ThresholdMode, Rate> fnmr_all;

  std::map<ThresholdMode, InequityResult> inequity;
};

struct Aggregate {
  std::optional<double> mean;
  std::optional<double> std;  // unbiased, n - 1 denominator
  std::size_t n = 0;
};

// Mean and unbiased standard deviation (0 for a single value).
Aggregate aggregate(std::span<const double> values);

struct ProtocolResult {
  std::optional<std::string> scope;
  double target_fmr = 1e-4;
  SplitPlan plan;
  std::vector<PairCategory> groups;
  std::vector<ThresholdMode> modes;
  std::vector<SplitOutcome> splits;

  std::map<ThresholdMode, std::map<PairCategory, Aggregate>> fmr_summary;
  std::map<ThresholdMode, Aggregate> ratio_summary;
  // Splits left out of the ratio aggregate because a group had zero (or no)
  // FMR under that mode.
  std::map<ThresholdMode, std::vector<std::size_t>> ratio_excluded_splits;
};

struct ProtocolOptions {
  ScoringOptions scoring{};
  bool oracle_mode = false;
};

// Repeated subject-disjoint validation/test experiment for one demographic
// scope (or all images when `scope` is empty). Throws CalibrationError when
// a validation group has no impostor pairs.
ProtocolResult run_protocol(const Dataset& dataset, const EmbeddingStore& store,
                            const SplitPlan& plan, double target_fmr,
                            std::span<const PairCategory> groups,
                            const std::optional<std::string>& scope,
                            const ProtocolOptions& options = {});

}  // namespace hirsute
