#include "hirsute/scoring.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "hirsute/errors.hpp"
#include "hirsute/logging.hpp"

namespace hirsute {

double dot(const float* a, const float* b, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    for (std::size_t l = 0; l < 8; ++l) {
      acc[l] += static_cast<double>(a[k + l]) * static_cast<double>(b[k + l]);
    }
  }
  double rest = 0.0;
  for (; k < n; ++k) rest += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + rest;
}

namespace {

inline double clamp_score(double s) { return std::clamp(s, -1.0, 1.0); }

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw UsageError(fmt::format("cosine: dimension mismatch {} vs {}",
                                 a.size(), b.size()));
  }
  return clamp_score(dot(a.data(), b.data(), a.size()));
}

std::size_t tail_capacity(std::uint64_t count, double fraction) {
  if (count == 0 || !(fraction > 0.0)) return 0;
  const double k = std::ceil(static_cast<double>(count) * fraction);
  return static_cast<std::size_t>(
      std::min<double>(k, static_cast<double>(count)));
}

ScoreSet::ScoreSet(TailSide side, std::size_t capacity, double tail_fraction,
                   HistogramConfig histogram, std::vector<double> probes)
    : side_(side),
      capacity_(capacity),
      tail_fraction_(tail_fraction),
      histogram_config_(histogram),
      histogram_(histogram.bins, 0),
      probes_(std::move(probes)),
      probe_ge_(probes_.size(), 0) {
  if (histogram.bins == 0) throw UsageError("histogram needs at least one bin");
  if (!(tail_fraction >= 0.0 && tail_fraction <= 1.0)) {
    throw UsageError(
        fmt::format("tail fraction {} outside [0, 1]", tail_fraction));
  }
  std::sort(probes_.begin(), probes_.end());
  probes_.erase(std::unique(probes_.begin(), probes_.end()), probes_.end());
  probe_ge_.assign(probes_.size(), 0);
}

ScoreSet ScoreSet::from_scores(std::span<const double> scores, TailSide side,
                               double tail_fraction, HistogramConfig histogram,
                               std::vector<double> probes) {
  return from_scores_with_capacity(scores, side,
                                   tail_capacity(scores.size(), tail_fraction),
                                   tail_fraction, histogram, std::move(probes));
}

ScoreSet ScoreSet::from_scores_with_capacity(std::span<const double> scores,
                                             TailSide side, std::size_t capacity,
                                             double tail_fraction,
                                             HistogramConfig histogram,
                                             std::vector<double> probes) {
  ScoreSet set(side, capacity, tail_fraction, histogram, std::move(probes));
  for (const double s : scores) set.add(s);
  set.finish();
  return set;
}

void ScoreSet::add(double score) {
  ++count_;
  min_ = std::min(min_, score);
  max_ = std::max(max_, score);
  ++histogram_[histogram_config_.bin_of(score)];
  for (std::size_t p = 0; p < probes_.size() && probes_[p] <= score; ++p) {
    ++probe_ge_[p];
  }
  if (capacity_ == 0) return;
  if (!heap_) {
    if (side_ == TailSide::kHigh) {
      std::make_heap(tail_.begin(), tail_.end(), std::greater<>());
    } else {
      std::make_heap(tail_.begin(), tail_.end());
    }
    heap_ = true;
  }
  // kHigh: min-heap of the largest scores; kLow: max-heap of the smallest.
  if (side_ == TailSide::kHigh) {
    if (tail_.size() < capacity_) {
      tail_.push_back(score);
      std::push_heap(tail_.begin(), tail_.end(), std::greater<>());
    } else if (score > tail_.front()) {
      std::pop_heap(tail_.begin(), tail_.end(), std::greater<>());
      tail_.back() = score;
      std::push_heap(tail_.begin(), tail_.end(), std::greater<>());
    }
  } else {
    if (tail_.size() < capacity_) {
      tail_.push_back(score);
      std::push_heap(tail_.begin(), tail_.end());
    } else if (score < tail_.front()) {
      std::pop_heap(tail_.begin(), tail_.end());
      tail_.back() = score;
      std::push_heap(tail_.begin(), tail_.end());
    }
  }
}

void ScoreSet::finish() {
  std::sort(tail_.begin(), tail_.end());
  heap_ = false;
}

std::optional<std::uint64_t> ScoreSet::probe_count_ge(double threshold) const {
  const auto it = std::lower_bound(probes_.begin(), probes_.end(), threshold);
  if (it == probes_.end() || *it != threshold) return std::nullopt;
  return probe_ge_[static_cast<std::size_t>(it - probes_.begin())];
}

std::optional<double> ScoreSet::histogram_mean() const {
  if (count_ == 0) return std::nullopt;
  double sum = 0.0;
  const double w = histogram_config_.width();
  for (std::size_t b = 0; b < histogram_.size(); ++b) {
    if (histogram_[b] == 0) continue;
    sum += static_cast<double>(histogram_[b]) *
           (histogram_config_.lower_edge(b) + 0.5 * w);
  }
  return sum / static_cast<double>(count_);
}

ScoreSet ScoreSet::merge(const ScoreSet& a, const ScoreSet& b) {
  if (a.side_ != b.side_) throw UsageError("merge: tail sides differ");
  if (a.tail_fraction_ != b.tail_fraction_) {
    throw UsageError(fmt::format("merge: tail fractions differ ({} vs {})",
                                 a.tail_fraction_, b.tail_fraction_));
  }
  if (!(a.histogram_config_ == b.histogram_config_)) {
    throw UsageError(fmt::format("merge: histogram bins differ ({} vs {})",
                                 a.histogram_config_.bins,
                                 b.histogram_config_.bins));
  }
  if (a.probes_ != b.probes_) throw UsageError("merge: probe thresholds differ");
  if (a.heap_ || b.heap_) throw UsageError("merge: unfinished score set");

  ScoreSet out(a.side_, 0, a.tail_fraction_, a.histogram_config_, a.probes_);
  out.count_ = a.count_ + b.count_;
  out.min_ = std::min(a.min_, b.min_);
  out.max_ = std::max(a.max_, b.max_);
  for (std::size_t i = 0; i < out.histogram_.size(); ++i) {
    out.histogram_[i] = a.histogram_[i] + b.histogram_[i];
  }
  for (std::size_t i = 0; i < out.probe_ge_.size(); ++i) {
    out.probe_ge_[i] = a.probe_ge_[i] + b.probe_ge_[i];
  }
  out.capacity_ = std::max({a.capacity_, b.capacity_,
                            tail_capacity(out.count_, out.tail_fraction_)});

  std::size_t keep = std::min<std::size_t>(
      out.capacity_, a.tail_.size() + b.tail_.size());
  if (!a.tail_complete()) keep = std::min(keep, a.tail_.size());
  if (!b.tail_complete()) keep = std::min(keep, b.tail_.size());

  std::vector<double> all;
  all.reserve(a.tail_.size() + b.tail_.size());
  std::merge(a.tail_.begin(), a.tail_.end(), b.tail_.begin(), b.tail_.end(),
             std::back_inserter(all));
  if (out.side_ == TailSide::kHigh) {
    out.tail_.assign(all.end() - static_cast<std::ptrdiff_t>(keep), all.end());
  } else {
    out.tail_.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  return out;
}

std::string CellKey::name() const {
  return fmt::format("{}/{}/{}", kind_name(kind), scope ? *scope : "all",
                     category ? category->name() : "all");
}

namespace {

constexpr std::size_t kClassCodes = 16;

// Cell lists per (kind, demographic code, class set a, class set b). The
// demographic code is the shared demographic ordinal, or D for mixed pairs.
class Dispatch {
 public:
  Dispatch(const PairIndex& index, std::span<const CellKey> cells,
           bool cross_demographic)
      : demos_(index.demographic_names.size()),
        lists_(2 * (demos_ + 1) * kClassCodes * kClassCodes) {
    for (std::size_t kind = 0; kind < 2; ++kind) {
      for (std::size_t code = 0; code <= demos_; ++code) {
        const bool mixed = code == demos_;
        for (std::size_t ba = 0; ba < kClassCodes; ++ba) {
          for (std::size_t bb = 0; bb < kClassCodes; ++bb) {
            auto& list = lists_[slot(kind, code, ba, bb)];
            for (std::size_t c = 0; c < cells.size(); ++c) {
              const auto& key = cells[c];
              if (static_cast<std::size_t>(key.kind) != kind) continue;
              if (key.scope) {
                if (mixed || index.demographic_names[code] != *key.scope) continue;
              } else if (mixed && key.kind == PairKind::kImpostor &&
                         !cross_demographic) {
                continue;
              }
              if (key.category &&
                  !key.category->matches(ClassSet{std::uint8_t(ba)},
                                         ClassSet{std::uint8_t(bb)})) {
                continue;
              }
              list.push_back(static_cast<std::uint32_t>(c));
            }
          }
        }
      }
    }
  }

  const std::vector<std::uint32_t>& get(std::size_t kind, std::size_t code,
                                        std::size_t ba, std::size_t bb) const {
    return lists_[slot(kind, code, ba, bb)];
  }
  std::size_t mixed_code() const { return demos_; }

 private:
  std::size_t slot(std::size_t kind, std::size_t code, std::size_t ba,
                   std::size_t bb) const {
    return ((kind * (demos_ + 1) + code) * kClassCodes + ba) * kClassCodes + bb;
  }

  std::size_t demos_;
  std::vector<std::vector<std::uint32_t>> lists_;
};

struct Tile {
  std::size_t row_begin, row_end, col_begin, col_end;
};

std::vector<Tile> make_tiles(std::size_t n, std::size_t block) {
  std::vector<Tile> tiles;
  for (std::size_t i = 0; i < n; i += block) {
    for (std::size_t j = i; j < n; j += block) {
      tiles.push_back({i, std::min(n, i + block), j, std::min(n, j + block)});
    }
  }
  return tiles;
}

// Runs fn(worker, tile) over all tiles with `workers` threads pulling from a
// shared counter.
template <typename Fn>
void run_tiles(const std::vector<Tile>& tiles, unsigned workers, Fn&& fn) {
  if (workers <= 1 || tiles.size() <= 1) {
    for (const auto& t : tiles) fn(0u, t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mu;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t t = next++; t < tiles.size(); t = next++) fn(w, tiles[t]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = tiles.size();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

template <typename PairFn>
void visit_tile(const PairIndex& index, const Dispatch& dispatch,
                const Tile& tile, PairFn&& on_pair) {
  const std::size_t mixed = dispatch.mixed_code();
  for (std::size_t i = tile.row_begin; i < tile.row_end; ++i) {
    const std::size_t j0 = tile.col_begin == tile.row_begin ? i + 1 : tile.col_begin;
    const auto subj_i = index.subject[i];
    const auto demo_i = index.demographic[i];
    const auto cls_i = index.classes[i].bits;
    for (std::size_t j = j0; j < tile.col_end; ++j) {
      const std::size_t kind = index.subject[j] == subj_i
                                   ? static_cast<std::size_t>(PairKind::kGenuine)
                                   : static_cast<std::size_t>(PairKind::kImpostor);
      const std::size_t code = index.demographic[j] == demo_i ? demo_i : mixed;
      const auto& cells = dispatch.get(kind, code, cls_i, index.classes[j].bits);
      if (!cells.empty()) on_pair(i, j, cells);
    }
  }
}

std::optional<std::string> common_scope(std::span<const CellKey> cells) {
  if (cells.empty()) return std::nullopt;
  for (const auto& c : cells) {
    if (c.scope != cells.front().scope) return std::nullopt;
  }
  return cells.front().scope;
}

}  // namespace

std::vector<ScoreCell> score_pairs(const Dataset& dataset,
                                   const EmbeddingStore& store,
                                   std::span<const CellKey> cells,
                                   const ScoringOptions& options,
                                   std::span<const std::vector<double>> probes) {
  if (!probes.empty() && probes.size() != cells.size()) {
    throw UsageError(fmt::format("{} probe lists given for {} cells",
                                 probes.size(), cells.size()));
  }
  if (options.block_size == 0) throw UsageError("block size must be positive");
  options.scheme.validate();
  dataset.check_embeddings(store);

  const auto index = PairIndex::build(dataset, common_scope(cells), options.scheme);
  const Dispatch dispatch(index, cells, options.cross_demographic);
  const auto tiles = make_tiles(index.size(), options.block_size);
  const unsigned workers = std::max(1u, options.workers);

  // Pass 1: exact per-cell pair counts fix each tail's capacity up front.
  std::vector<std::vector<std::uint64_t>> partial_counts(
      workers, std::vector<std::uint64_t>(cells.size(), 0));
  run_tiles(tiles, workers, [&](unsigned w, const Tile& tile) {
    auto& counts = partial_counts[w];
    visit_tile(index, dispatch, tile,
               [&](std::size_t, std::size_t, const std::vector<std::uint32_t>& hit) {
                 for (const auto c : hit) ++counts[c];
               });
  });
  std::vector<std::uint64_t> counts(cells.size(), 0);
  for (const auto& pc : partial_counts) {
    for (std::size_t c = 0; c < cells.size(); ++c) counts[c] += pc[c];
  }

  auto blank_sets = [&] {
    std::vector<ScoreSet> sets;
    sets.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      sets.emplace_back(tail_side_for(cells[c].kind),
                        tail_capacity(counts[c], options.tail_fraction),
                        options.tail_fraction, options.histogram,
                        probes.empty() ? std::vector<double>{} : probes[c]);
    }
    return sets;
  };

  // Pass 2: scores. Each worker owns private sets; merging is the only
  // synchronization and is order-independent.
  std::vector<const float*> rows(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    rows[i] = store.row(dataset[index.record[i]].embedding_index).data();
  }
  const std::size_t dim = store.dim();
  std::vector<std::vector<ScoreSet>> partial(workers);
  for (auto& p : partial) p = blank_sets();
  run_tiles(tiles, workers, [&](unsigned w, const Tile& tile) {
    auto& sets = partial[w];
    visit_tile(index, dispatch, tile,
               [&](std::size_t i, std::size_t j,
                   const std::vector<std::uint32_t>& hit) {
                 const double s = clamp_score(dot(rows[i], rows[j], dim));
                 for (const auto c : hit) sets[c].add(s);
               });
  });

  std::vector<ScoreCell> out;
  out.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    partial[0][c].finish();
    ScoreSet merged = std::move(partial[0][c]);
    for (unsigned w = 1; w < workers; ++w) {
      partial[w][c].finish();
      merged = ScoreSet::merge(merged, partial[w][c]);
    }
    out.push_back({cells[c], std::move(merged)});
  }
  logging::debug("scored {} images into {} cells with {} worker(s)",
                 index.size(), cells.size(), workers);
  return out;
}

std::vector<ScoreCell> score_pairs(const Dataset& dataset,
                                   const EmbeddingStore& store,
                                   const PairSpec& spec,
                                   std::span<const PairCategory> categories,
                                   const ScoringOptions& options) {
  std::vector<CellKey> keys;
  if (categories.empty()) {
    keys.push_back({spec.kind, spec.category, spec.scope});
  } else {
    for (const auto& cat : categories) keys.push_back({spec.kind, cat, spec.scope});
  }
  ScoringOptions opts = options;
  opts.cross_demographic = spec.cross_demographic;
  return score_pairs(dataset, store, keys, opts);
}

std::vector<ScoreCell> merge_cells(std::span<const ScoreCell> a,
                                   std::span<const ScoreCell> b) {
  if (a.empty()) return {b.begin(), b.end()};
  if (b.empty()) return {a.begin(), a.end()};
  if (a.size() != b.size()) {
    throw UsageError(fmt::format("merge: {} cells vs {} cells", a.size(), b.size()));
  }
  std::vector<ScoreCell> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].key == b[i].key)) {
      throw UsageError(fmt::format("merge: cell keys differ ({} vs {})",
                                   a[i].key.name(), b[i].key.name()));
    }
    out.push_back({a[i].key, ScoreSet::merge(a[i].scores, b[i].scores)});
  }
  return out;
}

}  // namespace hirsute
