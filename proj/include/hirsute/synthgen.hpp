#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hirsute/dataset.hpp"
#include "hirsute/maskops.hpp"
#include "hirsute/pairs.hpp"

// Synthetic datasets with a tunable facial-hair confound, and brute-force
// reference computations over them.
namespace hirsute {

inline constexpr double kMaxSyntheticRatio = 0.35;

struct GenConfig {
  std::size_t n_subjects = 2000;
  std::size_t images_per_subject = 3;
  std::size_t dim = 128;
  double identity_spread = 0.5;        // sigma_id
  double within_subject_noise = 0.1;   // sigma_w
  double hair_axis_strength = 0.0;     // beta
  double clean_shaven_fraction = 0.5;  // p0
  double max_ratio = kMaxSyntheticRatio;
  std::vector<std::string> demographics = {"S"};  // assigned round-robin by subject
  // When set, ratios are quantized to whole mask pixels so masks reproduce
  // them exactly.
  std::size_t mask_width = 0;
  std::size_t mask_height = 0;
  std::uint64_t seed = 0;

  // Throws UsageError on a degenerate configuration.
  void validate() const;
};

struct SyntheticData {
  Dataset dataset;
  EmbeddingStore embeddings;
};

// Each subject gets a unit latent direction u; each image
//   normalize(sigma_id * u + sigma_w * n + beta * ratio * h),
// with n ~ N(0, I / dim) and h one shared unit "hair axis". Ratios are 0 with
// probability p0, otherwise max_ratio * Beta(2, 3). Bitwise identical for a
// given config.
SyntheticData generate(const GenConfig& cfg);

// Label-1 block filling floor(ratio * w * h) pixels of the lower-face region
// (columns [0.1 w, 0.9 w), rows [h / 2, h)) from the bottom row upwards.
// Throws UsageError for masks smaller than 8x8 and for ratios above the
// region's share of the image.
LabelMask mask_for_ratio(double ratio, std::size_t width, std::size_t height);
double max_mask_ratio(std::size_t width, std::size_t height);

// Masks for every record, in record order.
std::vector<LabelMask> generate_masks(const Dataset& dataset, std::size_t width,
                                      std::size_t height);

// Writes manifest.csv, embeddings.bin and, when mask dimensions are
// configured, masks/<image_id>.pgm with the manifest ratio column left empty.
void write_synthetic(const SyntheticData& data, const GenConfig& cfg,
                     const std::filesystem::path& out_dir);

inline constexpr std::size_t kOracleMaxImages = 10000;

// Every score of the pairs selected by `spec`, ascending. Naive double loop
// over records in manifest order. Throws UsageError above kOracleMaxImages.
std::vector<double> oracle_scores(const Dataset& dataset,
                                  const EmbeddingStore& store,
                                  const PairSpec& spec,
                                  const RatioClassScheme& scheme = {});

struct OracleMetrics {
  std::uint64_t pairs = 0;
  std::uint64_t at_or_above = 0;
  std::optional<double> fmr;   // impostor specs with pairs
  std::optional<double> fnmr;  // genuine specs with pairs
};

OracleMetrics oracle_metrics(const Dataset& dataset, const EmbeddingStore& store,
                             const PairSpec& spec, double threshold,
                             const RatioClassScheme& scheme = {});

}  // namespace hirsute
