#pragma once

// Brute-force reference computations for tests. Nothing here calls into the
// library's scoring, pairing or metric code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hirsute/dataset.hpp"
#include "hirsute/maskops.hpp"

namespace oracle {

// Same summation order as the production kernel (eight lanes, pairwise
// combine, scalar remainder), so scores agree bit for bit.
inline double dot(const float* a, const float* b, std::size_t n) {
  double lane[8] = {};
  std::size_t full = n / 8 * 8;
  for (std::size_t k = 0; k < full; ++k) {
    lane[k % 8] += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  }
  double rest = 0.0;
  for (std::size_t k = full; k < n; ++k) {
    rest += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  }
  const double s01 = lane[0] + lane[1];
  const double s23 = lane[2] + lane[3];
  const double s45 = lane[4] + lane[5];
  const double s67 = lane[6] + lane[7];
  double s = (s01 + s23) + (s45 + s67);
  s = s + rest;
  return s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
}

// 0 cl, 1 fh_S, 2 fh_L1, 3 fh_L2 membership with default bounds.
struct Bounds {
  double cl = 0.001, large = 0.10, xlarge = 0.15;
};

inline bool member(double r, int cls, const Bounds& b = {}) {
  switch (cls) {
    case 0: return r < b.cl;
    case 1: return r >= b.cl && r < b.large;
    case 2: return r >= b.large;
    default: return r >= b.xlarge;
  }
}

struct Query {
  bool genuine = false;
  std::optional<std::string> scope;
  std::optional<std::pair<int, int>> category;
  bool cross_demographic = false;
};

inline std::vector<double> scores(const hirsute::Dataset& ds,
                                  const hirsute::EmbeddingStore& store,
                                  const Query& q, const Bounds& b = {}) {
  std::vector<double> out;
  const auto& recs = ds.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const auto& x = recs[i];
      const auto& y = recs[j];
      if (q.scope && (x.demographic != *q.scope || y.demographic != *q.scope)) continue;
      const bool same = x.subject_id == y.subject_id;
      if (same != q.genuine) continue;
      if (!same && !q.cross_demographic && x.demographic != y.demographic) continue;
      if (q.category) {
        const double rx = *x.facial_hair_ratio;
        const double ry = *y.facial_hair_ratio;
        const auto [c1, c2] = *q.category;
        if (!((member(rx, c1, b) && member(ry, c2, b)) ||
              (member(rx, c2, b) && member(ry, c1, b)))) {
          continue;
        }
      }
      const auto ra = store.row(x.embedding_index);
      const auto rb = store.row(y.embedding_index);
      out.push_back(dot(ra.data(), rb.data(), ra.size()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::uint64_t count_ge(const std::vector<double>& s, double t) {
  std::uint64_t n = 0;
  for (const double v : s) n += v >= t ? 1 : 0;
  return n;
}

inline std::size_t bin_of(double s, std::uint32_t bins) {
  double x = std::floor((s + 1.0) / 2.0 * bins);
  if (x < 0) x = 0;
  if (x > bins - 1) x = bins - 1;
  return static_cast<std::size_t>(x);
}

inline std::vector<std::uint64_t> histogram(const std::vector<double>& s,
                                            std::uint32_t bins) {
  std::vector<std::uint64_t> h(bins, 0);
  for (const double v : s) ++h[bin_of(v, bins)];
  return h;
}

// Largest `k` scores ascending (or smallest `k` when low).
inline std::vector<double> extreme(const std::vector<double>& sorted, std::size_t k,
                                   bool high) {
  k = std::min(k, sorted.size());
  if (high) return {sorted.end() - static_cast<std::ptrdiff_t>(k), sorted.end()};
  return {sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k)};
}

struct Eer {
  double rate = 0, threshold = 0, gap = 0;
};

// Scan of every distinct score plus one point above the maximum; the lowest
// minimizing threshold wins.
inline Eer eer(const std::vector<double>& imp, const std::vector<double>& gen) {
  std::vector<double> cand(imp);
  cand.insert(cand.end(), gen.begin(), gen.end());
  cand.push_back(std::nextafter(std::max(imp.back(), gen.back()),
                                std::numeric_limits<double>::infinity()));
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  Eer best;
  best.gap = std::numeric_limits<double>::infinity();
  for (const double t : cand) {
    const double fmr = static_cast<double>(count_ge(imp, t)) / imp.size();
    const double fnmr =
        static_cast<double>(gen.size() - count_ge(gen, t)) / gen.size();
    const double gap = std::abs(fmr - fnmr);
    if (gap < best.gap) best = {0.5 * (fmr + fnmr), t, gap};
  }
  return best;
}

// Per-pixel mask references.
struct PixelIou {
  std::uint64_t inter = 0, uni = 0;
};

inline PixelIou pixel_iou(const hirsute::LabelMask& p, const hirsute::LabelMask& g,
                          std::uint8_t cls) {
  PixelIou r;
  for (std::size_t y = 0; y < g.height(); ++y) {
    for (std::size_t x = 0; x < g.width(); ++x) {
      const bool a = p.at(y, x) == cls;
      const bool b = g.at(y, x) == cls;
      r.inter += a && b;
      r.uni += a || b;
    }
  }
  return r;
}

inline double pixel_ratio(const hirsute::LabelMask& m, bool shadow) {
  std::uint64_t n = 0;
  for (std::size_t y = 0; y < m.height(); ++y) {
    for (std::size_t x = 0; x < m.width(); ++x) {
      const auto v = m.at(y, x);
      n += v == 1 || (shadow && v == 2);
    }
  }
  return static_cast<double>(n) / static_cast<double>(m.width() * m.height());
}

inline hirsute::LabelMask random_mask(std::mt19937_64& rng, std::size_t w,
                                      std::size_t h) {
  std::vector<std::uint8_t> px(w * h);
  // Mix of sparse, dense and empty masks.
  const int mode = static_cast<int>(rng() % 4);
  const double p1 = mode == 0 ? 0.0 : (mode == 1 ? 0.03 : (mode == 2 ? 0.15 : 0.5));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : px) {
    const double x = u(rng);
    v = x < p1 ? 1 : (x < p1 + 0.05 ? 2 : 0);
  }
  return hirsute::LabelMask(w, h, std::move(px));
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hirsute_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
