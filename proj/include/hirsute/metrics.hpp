#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hirsute/pairs.hpp"
#include "hirsute/scoring.hpp"

// Verification error rates over ScoreSets. The decision rule everywhere is
// "match iff score >= threshold".
namespace hirsute {

enum class Exactness {
  kRequired,    // throw TailCoverageError rather than estimate
  kBestEffort,  // fall back to the histogram, flagging the result inexact
};

struct Rate {
  double value = 0.0;
  std::uint64_t errors = 0;  // numerator, when exact
  std::uint64_t count = 0;
  bool defined = false;      // false when count == 0
  bool exact = true;
};

// Number of scores >= t when it is recoverable exactly from the tail, the
// extrema or a probe.
std::optional<std::uint64_t> exact_count_ge(const ScoreSet& scores, double t);

// |{s >= t}| / count.
Rate fmr_at(const ScoreSet& impostor, double t,
            Exactness exactness = Exactness::kRequired);
// |{s < t}| / count.
Rate fnmr_at(const ScoreSet& genuine, double t,
             Exactness exactness = Exactness::kRequired);

struct ThresholdResult {
  double threshold = 0.0;
  Rate fmr;                 // on the calibration cell, always exact
  std::uint64_t allowed = 0;  // largest match count with count/total <= target
  bool reachable = true;    // false: no retained score works, max + ulp used
};

// Smallest retained score t with fmr_at(t) <= target. When no score
// qualifies (ties at the top, or target * count < 1) returns the next double
// above the maximum score with reachable = false.
ThresholdResult threshold_for_fmr(const ScoreSet& impostor, double target);

struct EerResult {
  double rate = 0.0;        // (FMR + FNMR) / 2 at the chosen threshold
  double threshold = 0.0;
  double fmr = 0.0;
  double fnmr = 0.0;
  double uncertainty = 0.0; // 0 when exact, else one histogram bin width
  bool separated = false;   // every genuine score above every impostor score
  bool exact = true;
};

// Threshold minimizing |FMR - FNMR| over the retained scores (and, when a
// tail is incomplete, the histogram bin edges); the lowest such threshold
// wins ties. Throws UsageError when either set is empty.
EerResult eer(const ScoreSet& impostor, const ScoreSet& genuine);

struct InequityResult {
  std::optional<double> ratio;  // max / min over groups with FMR > 0
  std::string max_group;
  std::string min_group;
  std::vector<std::string> excluded_zero_fmr;
  std::vector<std::string> undefined_groups;  // no FMR available
};

// Groups with FMR == 0 are excluded and listed; the ratio is undefined
// unless at least two groups remain.
InequityResult inequity_ratio(const std::map<std::string, std::optional<double>>& fmrs);
InequityResult inequity_ratio(const std::map<std::string, double>& fmrs);

struct ThresholdTable {
  double global_threshold = 0.0;
  std::map<PairCategory, double> per_category;

  // Category threshold, or the global one when the category is not
  // calibrated.
  double threshold_for(const std::optional<PairCategory>& category) const;
};

// Calibrates on impostor cells: the uncategorized one gives the global
// threshold, each categorized one its own. Throws CalibrationError naming an
// empty cell.
ThresholdTable calibrate(std::span<const ScoreCell> impostor_cells, double target);

struct CellErrors {
  CellKey key;
  double threshold = 0.0;
  Rate fmr;   // impostor cells
  Rate fnmr;  // genuine cells
};

// Error rates of every cell at the threshold the table assigns it.
std::vector<CellErrors> evaluate(std::span<const ScoreCell> cells,
                                 const ThresholdTable& table,
                                 Exactness exactness = Exactness::kBestEffort);

}  // namespace hirsute
