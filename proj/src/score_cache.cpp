#include <fstream>

#include <fmt/format.h>

#include "binio.hpp"
#include "hirsute/errors.hpp"
#include "hirsute/scoring.hpp"

namespace hirsute {

namespace {
constexpr char kCacheMagic[4] = {'F', 'H', 'S', 'C'};
}  // namespace

// Field-level access to ScoreSet for the cache format.
class ScoreCacheCodec {
 public:
  static void write(std::ostream& out, const ScoreSet& s) {
    binio::put<std::uint8_t>(out, static_cast<std::uint8_t>(s.side_));
    binio::put<std::uint64_t>(out, s.capacity_);
    binio::put<double>(out, s.tail_fraction_);
    binio::put<std::uint32_t>(out, s.histogram_config_.bins);
    binio::put<std::uint64_t>(out, s.count_);
    binio::put<double>(out, s.min_);
    binio::put<double>(out, s.max_);
    binio::put<std::uint64_t>(out, s.tail_.size());
    for (const double v : s.tail_) binio::put<double>(out, v);
    std::uint32_t nonzero = 0;
    for (const auto c : s.histogram_) nonzero += c != 0 ? 1 : 0;
    binio::put<std::uint32_t>(out, nonzero);
    for (std::uint32_t b = 0; b < s.histogram_.size(); ++b) {
      if (s.histogram_[b] == 0) continue;
      binio::put<std::uint32_t>(out, b);
      binio::put<std::uint64_t>(out, s.histogram_[b]);
    }
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.probes_.size()));
    for (std::size_t i = 0; i < s.probes_.size(); ++i) {
      binio::put<double>(out, s.probes_[i]);
      binio::put<std::uint64_t>(out, s.probe_ge_[i]);
    }
  }

  static ScoreSet read(std::istream& in) {
    const auto side = binio::get<std::uint8_t>(in, "tail side");
    if (side > 1) throw DataError("score cache: bad tail side");
    const auto capacity = binio::get<std::uint64_t>(in, "capacity");
    const auto fraction = binio::get<double>(in, "tail fraction");
    const auto bins = binio::get<std::uint32_t>(in, "histogram bins");
    if (bins == 0 || bins > (1u << 26)) {
      throw DataError(fmt::format("score cache: bad histogram bins {}", bins));
    }
    ScoreSet s(static_cast<TailSide>(side), capacity, fraction,
               HistogramConfig{bins});
    s.count_ = binio::get<std::uint64_t>(in, "count");
    s.min_ = binio::get<double>(in, "min");
    s.max_ = binio::get<double>(in, "max");
    const auto tail_len = binio::get<std::uint64_t>(in, "tail length");
    if (tail_len > s.count_) throw DataError("score cache: tail longer than count");
    s.tail_.resize(tail_len);
    for (auto& v : s.tail_) v = binio::get<double>(in, "tail");
    const auto nonzero = binio::get<std::uint32_t>(in, "histogram entries");
    std::uint64_t total = 0;
    for (std::uint32_t k = 0; k < nonzero; ++k) {
      const auto b = binio::get<std::uint32_t>(in, "histogram bin");
      if (b >= bins) throw DataError("score cache: histogram bin out of range");
      s.histogram_[b] = binio::get<std::uint64_t>(in, "histogram count");
      total += s.histogram_[b];
    }
    if (total != s.count_) {
      throw DataError("score cache: histogram does not sum to count");
    }
    const auto nprobes = binio::get<std::uint32_t>(in, "probe count");
    s.probes_.resize(nprobes);
    s.probe_ge_.resize(nprobes);
    for (std::uint32_t i = 0; i < nprobes; ++i) {
      s.probes_[i] = binio::get<double>(in, "probe");
      s.probe_ge_[i] = binio::get<std::uint64_t>(in, "probe count");
    }
    return s;
  }
};

void write_score_cache(std::span<const ScoreCell> cells,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out.write(kCacheMagic, 4);
  binio::put<std::uint32_t>(out, kScoreCacheVersion);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(cells.size()));
  for (const auto& cell : cells) {
    binio::put<std::uint8_t>(out, static_cast<std::uint8_t>(cell.key.kind));
    binio::put<std::uint8_t>(out, cell.key.category ? 1 : 0);
    if (cell.key.category) {
      binio::put<std::uint8_t>(out,
                               static_cast<std::uint8_t>(cell.key.category->left()));
      binio::put<std::uint8_t>(out,
                               static_cast<std::uint8_t>(cell.key.category->right()));
    }
    binio::put<std::uint8_t>(out, cell.key.scope ? 1 : 0);
    if (cell.key.scope) binio::put_string(out, *cell.key.scope);
    ScoreCacheCodec::write(out, cell.scores);
  }
  if (!out) throw DataError(fmt::format("write failed: {}", path.string()));
}

std::vector<ScoreCell> read_score_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open score cache {}", path.string()));
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != "FHSC") {
    throw DataError(fmt::format("{}: missing FHSC magic bytes", path.string()));
  }
  const auto version = binio::get<std::uint32_t>(in, "cache version");
  if (version != kScoreCacheVersion) {
    throw DataError(fmt::format("{}: unsupported score cache version {}",
                                path.string(), version));
  }
  const auto n = binio::get<std::uint32_t>(in, "cell count");
  std::vector<ScoreCell> cells;
  cells.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ScoreCell cell;
    const auto kind = binio::get<std::uint8_t>(in, "pair kind");
    if (kind > 1) throw DataError("score cache: bad pair kind");
    cell.key.kind = static_cast<PairKind>(kind);
    if (binio::get<std::uint8_t>(in, "category flag")) {
      const auto l = binio::get<std::uint8_t>(in, "category");
      const auto r = binio::get<std::uint8_t>(in, "category");
      if (l > 3 || r > 3) throw DataError("score cache: bad ratio class");
      cell.key.category =
          PairCategory(static_cast<RatioClass>(l), static_cast<RatioClass>(r));
    }
    if (binio::get<std::uint8_t>(in, "scope flag")) {
      cell.key.scope = binio::get_string(in, "scope");
    }
    cell.scores = ScoreCacheCodec::read(in);
    cells.push_back(std::move(cell));
  }
  return cells;
}

void write_histogram_csv(const ScoreSet& scores,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << "bin_lower,count\n";
  const auto& cfg = scores.histogram_config();
  const auto& h = scores.histogram();
  for (std::size_t b = 0; b < h.size(); ++b) {
    if (h[b] == 0) continue;
    out << fmt::format("{:.6f},{}\n", cfg.lower_edge(b), h[b]);
  }
}

}  // namespace hirsute
