#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hirsute/dataset.hpp"
#include "hirsute/pairs.hpp"

namespace hirsute {

inline constexpr std::uint32_t kDefaultHistogramBins = 100000;
inline constexpr double kDefaultTailFraction = 1e-3;

// Dot product of two equal-length float vectors accumulated in double with a
// fixed summation order, so every caller gets bit-identical results.
double dot(const float* a, const float* b, std::size_t n);

// Cosine similarity of unit vectors: the dot product clamped to [-1, 1].
// Throws UsageError on a dimension mismatch.
double cosine(std::span<const float> a, std::span<const float> b);

// Which extreme of the distribution a ScoreSet keeps exactly. Impostor sets
// keep the largest scores (FMR lives there), genuine sets the smallest.
enum class TailSide : std::uint8_t { kHigh = 0, kLow = 1 };

inline TailSide tail_side_for(PairKind kind) {
  return kind == PairKind::kImpostor ? TailSide::kHigh : TailSide::kLow;
}

// ceil(count * fraction), the number of extreme scores worth keeping.
std::size_t tail_capacity(std::uint64_t count, double fraction);

// Uniform bins over [-1, 1]; the last bin is closed.
struct HistogramConfig {
  std::uint32_t bins = kDefaultHistogramBins;

  double width() const { return 2.0 / bins; }
  double lower_edge(std::size_t b) const { return -1.0 + 2.0 * b / bins; }
  std::size_t bin_of(double score) const {
    const double x = std::floor((score + 1.0) * 0.5 * bins);
    if (!(x > 0.0)) return 0;
    const auto b = static_cast<std::size_t>(x);
    return b >= bins ? bins - 1 : b;
  }
  bool operator==(const HistogramConfig&) const = default;
};

// Summary of the scores of one cell: count, extrema, the exact extreme tail,
// a fixed-bin histogram, and exact match counts at pre-registered probe
// thresholds.
class ScoreSet {
 public:
  ScoreSet() = default;
  ScoreSet(TailSide side, std::size_t capacity, double tail_fraction,
           HistogramConfig histogram = {}, std::vector<double> probes = {});

  // Keeps ceil(n * tail_fraction) extreme scores.
  static ScoreSet from_scores(std::span<const double> scores, TailSide side,
                              double tail_fraction = kDefaultTailFraction,
                              HistogramConfig histogram = {},
                              std::vector<double> probes = {});
  // Keeps exactly `capacity` extreme scores (or all, if fewer).
  static ScoreSet from_scores_with_capacity(std::span<const double> scores,
                                            TailSide side, std::size_t capacity,
                                            double tail_fraction,
                                            HistogramConfig histogram = {},
                                            std::vector<double> probes = {});

  TailSide side() const { return side_; }
  std::size_t capacity() const { return capacity_; }
  double tail_fraction() const { return tail_fraction_; }
  const HistogramConfig& histogram_config() const { return histogram_config_; }

  std::uint64_t count() const { return count_; }
  bool empty() const { return count_ == 0; }
  double min() const { return min_; }
  double max() const { return max_; }

  // Retained extreme scores, ascending. For kHigh these are the largest
  // |tail| scores of the cell, for kLow the smallest.
  const std::vector<double>& tail() const { return tail_; }
  bool tail_complete() const { return tail_.size() == count_; }

  const std::vector<std::uint64_t>& histogram() const { return histogram_; }

  const std::vector<double>& probes() const { return probes_; }
  // Number of scores >= probes()[i].
  const std::vector<std::uint64_t>& probe_counts() const { return probe_ge_; }
  std::optional<std::uint64_t> probe_count_ge(double threshold) const;

  // Approximate mean from histogram bin centres.
  std::optional<double> histogram_mean() const;

  // Streaming insertion. The tail is a heap until finish() sorts it; the
  // scoring loop uses this, other callers should prefer from_scores().
  void add(double score);
  void finish();

  // Counts add, extrema combine, tails merge and truncate to
  // max(capacities, ceil(merged count * tail_fraction)). The merged tail is
  // limited to what both inputs can vouch for: a truncated input of length m
  // caps the exact merged prefix at m. Throws UsageError when the tail side,
  // tail fraction, histogram or probe configuration differ.
  static ScoreSet merge(const ScoreSet& a, const ScoreSet& b);

  bool operator==(const ScoreSet&) const = default;

 private:
  friend class ScoreCacheCodec;

  TailSide side_ = TailSide::kHigh;
  std::size_t capacity_ = 0;
  double tail_fraction_ = kDefaultTailFraction;
  HistogramConfig histogram_config_{};
  std::uint64_t count_ = 0;
  double min_ = std::numeric_limits<double>::infinity();
  double max_ = -std::numeric_limits<double>::infinity();
  std::vector<double> tail_;
  bool heap_ = false;
  std::vector<std::uint64_t> histogram_;
  std::vector<double> probes_;
  std::vector<std::uint64_t> probe_ge_;
};

// One summarized cell: (pair kind, category, demographic scope).
struct CellKey {
  PairKind kind = PairKind::kImpostor;
  std::optional<PairCategory> category;  // empty means every pair
  std::optional<std::string> scope;      // empty means every demographic

  std::string name() const;  // e.g. "impostor/AAM/cl_vs_cl", "genuine/all/all"
  auto operator<=>(const CellKey&) const = default;
};

struct ScoreCell {
  CellKey key;
  ScoreSet scores;

  bool operator==(const ScoreCell&) const = default;
};

struct ScoringOptions {
  double tail_fraction = kDefaultTailFraction;
  HistogramConfig histogram{};
  std::size_t block_size = 256;
  unsigned workers = 1;
  bool cross_demographic = false;
  RatioClassScheme scheme{};
};

// Scores every pair that falls in at least one requested cell. A pair counts
// once in each cell it matches. `probes`, when given, is aligned with `cells`
// and lists thresholds at which exact >= counts are kept. Results do not
// depend on `workers`.
std::vector<ScoreCell> score_pairs(
    const Dataset& dataset, const EmbeddingStore& store,
    std::span<const CellKey> cells, const ScoringOptions& options = {},
    std::span<const std::vector<double>> probes = {});

// Convenience form: one cell per category for the spec's kind and scope, plus
// an unfiltered cell when `categories` is empty.
std::vector<ScoreCell> score_pairs(const Dataset& dataset,
                                   const EmbeddingStore& store,
                                   const PairSpec& spec,
                                   std::span<const PairCategory> categories,
                                   const ScoringOptions& options = {});

// Pairwise merge of two cell lists with identical keys in identical order.
std::vector<ScoreCell> merge_cells(std::span<const ScoreCell> a,
                                   std::span<const ScoreCell> b);

// Binary cache: magic "FHSC", u32 version, then the cells.
inline constexpr std::uint32_t kScoreCacheVersion = 1;
void write_score_cache(std::span<const ScoreCell> cells,
                       const std::filesystem::path& path);
std::vector<ScoreCell> read_score_cache(const std::filesystem::path& path);

// "bin_lower,count" rows for non-empty bins.
void write_histogram_csv(const ScoreSet& scores,
                         const std::filesystem::path& path);

}  // namespace hirsute
