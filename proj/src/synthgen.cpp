#include "hirsute/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "hirsute/errors.hpp"
#include "hirsute/mask_io.hpp"
#include "hirsute/scoring.hpp"

namespace hirsute {

void GenConfig::validate() const {
  if (dim < 2) throw UsageError(fmt::format("dim must be >= 2, got {}", dim));
  if (n_subjects < 2) {
    throw UsageError(fmt::format("need at least 2 subjects, got {}", n_subjects));
  }
  if (images_per_subject < 1) throw UsageError("images_per_subject must be >= 1");
  if (!(identity_spread >= 0.0) || !(within_subject_noise >= 0.0) ||
      !(hair_axis_strength >= 0.0)) {
    throw UsageError("spreads and hair axis strength must be >= 0");
  }
  if (!(clean_shaven_fraction >= 0.0 && clean_shaven_fraction <= 1.0)) {
    throw UsageError(fmt::format("clean-shaven fraction {} outside [0, 1]",
                                 clean_shaven_fraction));
  }
  if (!(max_ratio > 0.0 && max_ratio <= kMaxSyntheticRatio)) {
    throw UsageError(fmt::format("max ratio {} outside (0, {}]", max_ratio,
                                 kMaxSyntheticRatio));
  }
  if (demographics.empty()) throw UsageError("need at least one demographic tag");
  if ((mask_width == 0) != (mask_height == 0)) {
    throw UsageError("set both mask width and height, or neither");
  }
  if (mask_width != 0 && max_ratio > max_mask_ratio(mask_width, mask_height)) {
    throw UsageError(fmt::format("max ratio {} exceeds the {}x{} mask region",
                                 max_ratio, mask_width, mask_height));
  }
}

namespace {

// Portable samplers: the standard distributions are not specified
// bit-for-bit, so generated data would vary between standard libraries.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed ^ 0x6A09E667F3BCC909ull) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Beta(2, 3): second smallest of four uniforms.
  double beta_2_3() {
    double u[4] = {uniform(), uniform(), uniform(), uniform()};
    std::sort(u, u + 4);
    return u[1];
  }

 private:
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<double> unit_gaussian(Sampler& s, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = s.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

struct Region {
  std::size_t c0, c1, r0;
  std::size_t area(std::size_t height) const { return (c1 - c0) * (height - r0); }
};

Region lower_face(std::size_t width, std::size_t height) {
  return {width / 10, width - width / 10, height / 2};
}

void check_mask_size(std::size_t width, std::size_t height) {
  if (width < 8 || height < 8) {
    throw UsageError(fmt::format("masks must be at least 8x8, got {}x{}", width,
                                 height));
  }
}

std::size_t pixels_for(double ratio, std::size_t width, std::size_t height) {
  return static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(width * height) + 1e-9));
}

}  // namespace

double max_mask_ratio(std::size_t width, std::size_t height) {
  check_mask_size(width, height);
  return static_cast<double>(lower_face(width, height).area(height)) /
         static_cast<double>(width * height);
}

LabelMask mask_for_ratio(double ratio, std::size_t width, std::size_t height) {
  check_mask_size(width, height);
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw UsageError(fmt::format("ratio {} outside [0, 1]", ratio));
  }
  const auto region = lower_face(width, height);
  const std::size_t n = pixels_for(ratio, width, height);
  if (n > region.area(height)) {
    throw UsageError(fmt::format(
        "ratio {} unreachable: the lower-face region holds at most {:.4f} of a "
        "{}x{} mask",
        ratio, max_mask_ratio(width, height), width, height));
  }
  LabelMask mask(width, height);
  const std::size_t row_len = region.c1 - region.c0;
  for (std::size_t k = 0; k < n; ++k) {
    mask.set(height - 1 - k / row_len, region.c0 + k % row_len, Label::kFacialHair);
  }
  return mask;
}

std::vector<LabelMask> generate_masks(const Dataset& dataset, std::size_t width,
                                      std::size_t height) {
  std::vector<LabelMask> masks;
  masks.reserve(dataset.size());
  for (const auto& r : dataset.records()) {
    if (!r.facial_hair_ratio) {
      throw UsageError(fmt::format("image {} has no ratio to draw", r.image_id));
    }
    masks.push_back(mask_for_ratio(*r.facial_hair_ratio, width, height));
  }
  return masks;
}

SyntheticData generate(const GenConfig& cfg) {
  cfg.validate();
  Sampler s(cfg.seed);
  const std::size_t dim = cfg.dim;
  const auto hair = unit_gaussian(s, dim);
  const double noise_scale = cfg.within_subject_noise / std::sqrt(static_cast<double>(dim));
  const std::size_t pixels = cfg.mask_width * cfg.mask_height;

  std::vector<ImageRecord> records;
  records.reserve(cfg.n_subjects * cfg.images_per_subject);
  std::vector<float> values;
  values.reserve(cfg.n_subjects * cfg.images_per_subject * dim);
  const int width = static_cast<int>(std::to_string(cfg.n_subjects).size());
  const int iwidth = static_cast<int>(std::to_string(cfg.images_per_subject).size());
  std::vector<double> e(dim);

  for (std::size_t subj = 0; subj < cfg.n_subjects; ++subj) {
    const auto latent = unit_gaussian(s, dim);
    const std::string sid = fmt::format("s{:0{}}", subj, width);
    const auto& demo = cfg.demographics[subj % cfg.demographics.size()];
    for (std::size_t img = 0; img < cfg.images_per_subject; ++img) {
      double ratio = 0.0;
      if (s.uniform() >= cfg.clean_shaven_fraction) {
        ratio = cfg.max_ratio * s.beta_2_3();
        if (ratio <= 0.0) ratio = cfg.max_ratio * 1e-6;
      }
      if (pixels != 0) {
        ratio = static_cast<double>(pixels_for(ratio, cfg.mask_width, cfg.mask_height)) /
                static_cast<double>(pixels);
      }
      for (std::size_t k = 0; k < dim; ++k) {
        e[k] = cfg.identity_spread * latent[k] + noise_scale * s.normal() +
               cfg.hair_axis_strength * ratio * hair[k];
      }
      ImageRecord rec;
      rec.image_id = fmt::format("{}_{:0{}}", sid, img, iwidth);
      rec.subject_id = sid;
      rec.demographic = demo;
      rec.embedding_index = records.size();
      rec.facial_hair_ratio = ratio;
      records.push_back(std::move(rec));
      for (const double x : e) values.push_back(static_cast<float>(x));
    }
  }
  return {Dataset(std::move(records)), EmbeddingStore::from_rows(dim, std::move(values))};
}

void write_synthetic(const SyntheticData& data, const GenConfig& cfg,
                     const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw DataError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
  }
  write_embeddings(data.embeddings, out_dir / "embeddings.bin");
  if (cfg.mask_width == 0) {
    write_manifest(data.dataset, out_dir / "manifest.csv");
    return;
  }
  const auto mask_dir = out_dir / "masks";
  std::filesystem::create_directories(mask_dir, ec);
  if (ec) {
    throw DataError(fmt::format("cannot create {}: {}", mask_dir.string(), ec.message()));
  }
  std::vector<ImageRecord> records = data.dataset.records();
  for (auto& r : records) {
    const auto rel = std::filesystem::path("masks") / (r.image_id + ".pgm");
    write_mask_pgm(mask_for_ratio(*r.facial_hair_ratio, cfg.mask_width, cfg.mask_height),
                   out_dir / rel);
    r.mask_path = rel.generic_string();
    r.facial_hair_ratio.reset();
  }
  write_manifest(Dataset(std::move(records)), out_dir / "manifest.csv");
}

namespace {

// Deliberately separate from the pairs module: classes by direct comparison.
bool in_class(double r, RatioClass c, const RatioClassScheme& sc) {
  switch (c) {
    case RatioClass::kCl: return r < sc.cl_upper;
    case RatioClass::kFhS: return r >= sc.cl_upper && r < sc.large_lower;
    case RatioClass::kFhL1: return r >= sc.large_lower;
    case RatioClass::kFhL2: return r >= sc.xlarge_lower;
  }
  return false;
}

bool oracle_selects(const ImageRecord& a, const ImageRecord& b,
                    const PairSpec& spec, const RatioClassScheme& sc) {
  if (spec.scope && (a.demographic != *spec.scope || b.demographic != *spec.scope)) {
    return false;
  }
  const bool same = a.subject_id == b.subject_id;
  if (spec.kind == PairKind::kGenuine && !same) return false;
  if (spec.kind == PairKind::kImpostor) {
    if (same) return false;
    if (!spec.cross_demographic && a.demographic != b.demographic) return false;
  }
  if (spec.category) {
    const double ra = a.facial_hair_ratio.value();
    const double rb = b.facial_hair_ratio.value();
    const auto l = spec.category->left();
    const auto r = spec.category->right();
    if (!((in_class(ra, l, sc) && in_class(rb, r, sc)) ||
          (in_class(ra, r, sc) && in_class(rb, l, sc)))) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::vector<double> oracle_scores(const Dataset& dataset,
                                  const EmbeddingStore& store,
                                  const PairSpec& spec,
                                  const RatioClassScheme& scheme) {
  if (dataset.size() > kOracleMaxImages) {
    throw UsageError(fmt::format("oracle limited to {} images, got {}",
                                 kOracleMaxImages, dataset.size()));
  }
  const auto& recs = dataset.records();
  std::vector<double> scores;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    for (std::size_t j = i + 1; j < recs.size(); ++j) {
      if (!oracle_selects(recs[i], recs[j], spec, scheme)) continue;
      scores.push_back(cosine(store.row(recs[i].embedding_index),
                              store.row(recs[j].embedding_index)));
    }
  }
  std::sort(scores.begin(), scores.end());
  return scores;
}

OracleMetrics oracle_metrics(const Dataset& dataset, const EmbeddingStore& store,
                             const PairSpec& spec, double threshold,
                             const RatioClassScheme& scheme) {
  const auto scores = oracle_scores(dataset, store, spec, scheme);
  OracleMetrics m;
  m.pairs = scores.size();
  for (const double v : scores) m.at_or_above += v >= threshold ? 1 : 0;
  if (m.pairs > 0) {
    const double n = static_cast<double>(m.pairs);
    if (spec.kind == PairKind::kImpostor) {
      m.fmr = static_cast<double>(m.at_or_above) / n;
    } else {
      m.fnmr = static_cast<double>(m.pairs - m.at_or_above) / n;
    }
  }
  return m;
}

}  // namespace hirsute
