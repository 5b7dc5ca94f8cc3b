#include "hirsute/dataset.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <cmath>
#include <fstream>
#include <string_view>

#include <fmt/format.h>

#include "binio.hpp"
#include "csv.hpp"
#include "hirsute/errors.hpp"
#include "hirsute/logging.hpp"
#include "hirsute/mask_io.hpp"
#include "hirsute/maskops.hpp"

namespace hirsute {

namespace {

constexpr char kEmbeddingMagic[4] = {'F', 'H', 'E', 'B'};

}  // namespace

EmbeddingStore EmbeddingStore::from_rows(std::size_t dim,
                                         std::vector<float> values) {
  if (dim == 0) throw DataError("embedding dimension must be positive");
  if (values.size() % dim != 0) {
    throw DataError(fmt::format("{} values do not form rows of dimension {}",
                                values.size(), dim));
  }
  const std::size_t count = values.size() / dim;
  for (std::size_t i = 0; i < count; ++i) {
    float* row = values.data() + i * dim;
    double sq = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      sq += static_cast<double>(row[k]) * static_cast<double>(row[k]);
    }
    if (!(sq > 0.0) || !std::isfinite(sq)) {
      throw DataError(fmt::format(
          "embedding {} has zero or non-finite norm and cannot be normalized",
          i));
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t k = 0; k < dim; ++k) {
      row[k] = static_cast<float>(static_cast<double>(row[k]) * inv);
    }
  }
  EmbeddingStore store;
  store.dim_ = dim;
  store.values_ = std::move(values);
  return store;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError(fmt::format("cannot open embeddings file {}", path.string()));
  }
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    throw DataError(
        fmt::format("{}: missing FHEB magic bytes", path.string()));
  }
  const auto count = binio::get<std::uint32_t>(in, "embedding count");
  const auto dim = binio::get<std::uint32_t>(in, "embedding dim");
  if (dim == 0) {
    throw DataError(fmt::format("{}: embedding dim is zero", path.string()));
  }
  if (expected_dim && *expected_dim != dim) {
    throw DataError(fmt::format("{}: embedding dim {} does not match expected {}",
                                path.string(), dim, *expected_dim));
  }
  const std::size_t n = static_cast<std::size_t>(count) * dim;
  std::vector<float> values(n);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(float))) {
    throw DataError(fmt::format(
        "{}: truncated, header promises {} x {} floats", path.string(), count,
        dim));
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      bits = __builtin_bswap32(bits);
      v = std::bit_cast<float>(bits);
    }
  }
  return EmbeddingStore::from_rows(dim, std::move(values));
}

void write_embeddings(const EmbeddingStore& store,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out.write(kEmbeddingMagic, 4);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(store.count()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  for (const float v : store.values()) binio::put<float>(out, v);
  if (!out) throw DataError(fmt::format("write failed: {}", path.string()));
}

Dataset::Dataset(std::vector<ImageRecord> records)
    : records_(std::move(records)) {
  by_id_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& rec = records_[i];
    if (rec.image_id.empty()) {
      throw DataError(fmt::format("record {} has an empty image_id", i));
    }
    if (!by_id_.emplace(rec.image_id, i).second) {
      throw DataError(fmt::format("duplicate image_id '{}'", rec.image_id));
    }
    if (rec.facial_hair_ratio &&
        !(*rec.facial_hair_ratio >= 0.0 && *rec.facial_hair_ratio <= 1.0)) {
      throw DataError(fmt::format("image '{}': facial_hair_ratio {} outside [0, 1]",
                                  rec.image_id, *rec.facial_hair_ratio));
    }
    subjects_[rec.subject_id].push_back(i);
    demographics_[rec.demographic].push_back(i);
  }
}

std::optional<std::size_t> Dataset::find(const std::string& image_id) const {
  const auto it = by_id_.find(image_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Dataset::subject_ids() const {
  std::vector<std::string> ids;
  ids.reserve(subjects_.size());
  for (const auto& [id, _] : subjects_) ids.push_back(id);
  return ids;
}

bool Dataset::has_all_ratios() const {
  for (const auto& r : records_) {
    if (!r.facial_hair_ratio) return false;
  }
  return true;
}

void Dataset::check_embeddings(const EmbeddingStore& store) const {
  for (const auto& r : records_) {
    if (r.embedding_index >= store.count()) {
      throw DataError(fmt::format(
          "image '{}': embedding_index {} out of range (store holds {})",
          r.image_id, r.embedding_index, store.count()));
    }
  }
}

Dataset Dataset::restrict_to_subjects(
    const std::set<std::string>& subjects) const {
  std::vector<ImageRecord> kept;
  for (const auto& r : records_) {
    if (subjects.contains(r.subject_id)) kept.push_back(r);
  }
  return Dataset(std::move(kept));
}

Dataset Dataset::restrict_to_demographic(const std::string& tag) const {
  std::vector<ImageRecord> kept;
  for (const auto& r : records_) {
    if (r.demographic == tag) kept.push_back(r);
  }
  return Dataset(std::move(kept));
}

namespace {

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open manifest {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(fmt::format("{}: empty manifest, header missing",
                                path.string()));
  }
  std::string_view header = trim_cr(line);
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  if (header != kManifestHeader) {
    throw DataError(fmt::format("{}:1: expected header '{}'", path.string(),
                                kManifestHeader));
  }

  std::vector<ImageRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim_cr(line);
    if (body.empty()) continue;
    const auto where = fmt::format("{}:{}", path.string(), line_no);
    auto fields = csv::split(body);
    if (!fields) throw DataError(where + ": unterminated quote");
    if (fields->size() != 6) {
      throw DataError(
          fmt::format("{}: expected 6 fields, got {}", where, fields->size()));
    }
    auto& f = *fields;
    ImageRecord rec;
    rec.image_id = f[0];
    rec.subject_id = f[1];
    rec.demographic = f[2];
    if (rec.image_id.empty()) throw DataError(where + ": empty image_id");
    if (rec.subject_id.empty()) throw DataError(where + ": empty subject_id");
    {
      const auto& s = f[3];
      const auto* end = s.data() + s.size();
      auto [p, ec] = std::from_chars(s.data(), end, rec.embedding_index);
      if (s.empty() || ec != std::errc() || p != end) {
        throw DataError(fmt::format("{}: bad embedding_index '{}'", where, s));
      }
    }
    if (!f[4].empty()) rec.mask_path = f[4];
    if (!f[5].empty()) {
      const auto& s = f[5];
      const auto* end = s.data() + s.size();
      double v = 0.0;
      auto [p, ec] = std::from_chars(s.data(), end, v);
      if (ec != std::errc() || p != end) {
        throw DataError(fmt::format("{}: bad facial_hair_ratio '{}'", where, s));
      }
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError(fmt::format("{}: facial_hair_ratio {} outside [0, 1]",
                                    where, v));
      }
      rec.facial_hair_ratio = v;
    }
    records.push_back(std::move(rec));
  }
  return Dataset(std::move(records));
}

void write_manifest(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << kManifestHeader << '\n';
  for (const auto& r : dataset.records()) {
    out << csv::escape(r.image_id) << ',' << csv::escape(r.subject_id) << ','
        << csv::escape(r.demographic) << ',' << r.embedding_index << ','
        << (r.mask_path ? csv::escape(*r.mask_path) : std::string()) << ','
        // {} is the shortest representation that parses back exactly.
        << (r.facial_hair_ratio ? fmt::format("{}", *r.facial_hair_ratio)
                                : std::string())
        << '\n';
  }
  if (!out) throw DataError(fmt::format("write failed: {}", path.string()));
}

Dataset attach_ratios(const Dataset& dataset,
                      const std::map<std::string, double>& ratios) {
  for (const auto& [id, value] : ratios) {
    if (!dataset.find(id)) {
      throw DataError(fmt::format("ratio given for unknown image_id '{}'", id));
    }
    if (!(value >= 0.0 && value <= 1.0)) {
      throw DataError(fmt::format("image '{}': facial_hair_ratio {} outside [0, 1]",
                                  id, value));
    }
  }
  std::vector<ImageRecord> records = dataset.records();
  for (auto& r : records) {
    const auto it = ratios.find(r.image_id);
    if (r.facial_hair_ratio) {
      if (it != ratios.end() && it->second != *r.facial_hair_ratio) {
        logging::warn("image '{}': manifest ratio {} kept over derived {}",
                      r.image_id, *r.facial_hair_ratio, it->second);
      }
      continue;
    }
    if (it == ratios.end()) {
      throw DataError(
          fmt::format("image '{}' has no facial_hair_ratio", r.image_id));
    }
    r.facial_hair_ratio = it->second;
  }
  return Dataset(std::move(records));
}

std::map<std::string, double> ratios_from_masks(
    const Dataset& dataset, const std::filesystem::path& base_dir,
    bool count_shadow) {
  std::map<std::string, double> out;
  for (const auto& r : dataset.records()) {
    if (!r.mask_path) continue;
    std::filesystem::path p(*r.mask_path);
    if (p.is_relative()) p = base_dir / p;
    out[r.image_id] = facial_hair_ratio(load_mask(p), count_shadow);
  }
  return out;
}

LoadedData load_dataset(const std::filesystem::path& manifest,
                        const std::filesystem::path& embeddings,
                        std::optional<std::size_t> expected_dim,
                        bool count_shadow,
                        const std::optional<std::filesystem::path>& mask_dir) {
  if (!std::filesystem::exists(embeddings)) {
    throw DataError(
        fmt::format("embeddings file not found: {}", embeddings.string()));
  }
  Dataset ds = load_manifest(manifest);
  EmbeddingStore store = load_embeddings(embeddings, expected_dim);
  ds.check_embeddings(store);
  // Mask-derived ratios fill gaps; attach_ratios keeps manifest values and
  // warns where the two disagree.
  const auto derived =
      ratios_from_masks(ds, mask_dir.value_or(manifest.parent_path()), count_shadow);
  if (!derived.empty() || !ds.has_all_ratios()) ds = attach_ratios(ds, derived);
  return {std::move(ds), std::move(store)};
}

}  // namespace hirsute
