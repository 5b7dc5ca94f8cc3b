#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace hirsute {

// One face image. The embedding lives in an EmbeddingStore row; the ratio is
// either supplied by the manifest or derived from the mask.
struct ImageRecord {
  std::string image_id;
  std::string subject_id;
  std::string demographic;
  std::size_t embedding_index = 0;
  std::optional<std::string> mask_path;
  std::optional<double> facial_hair_ratio;

  bool operator==(const ImageRecord&) const = default;
};

// Row-major float32 matrix of unit-norm embeddings.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  // Normalizes every row to unit length. Throws DataError naming the first
  // zero-norm (or non-finite) row.
  static EmbeddingStore from_rows(std::size_t dim, std::vector<float> values);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<const float> values() const { return values_; }

  bool operator==(const EmbeddingStore&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

// Binary layout: "FHEB", u32 count, u32 dim, count*dim little-endian float32.
EmbeddingStore load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_dim = {});
void write_embeddings(const EmbeddingStore& store,
                      const std::filesystem::path& path);

// Immutable, indexed collection of ImageRecords. Indices hold record
// positions, so they stay valid for the lifetime of the Dataset.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<ImageRecord> records);

  const std::vector<ImageRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const ImageRecord& operator[](std::size_t i) const { return records_[i]; }

  std::optional<std::size_t> find(const std::string& image_id) const;

  const std::map<std::string, std::vector<std::size_t>>& subjects() const {
    return subjects_;
  }
  const std::map<std::string, std::vector<std::size_t>>& demographics() const {
    return demographics_;
  }
  std::vector<std::string> subject_ids() const;

  bool has_all_ratios() const;

  // Throws DataError for the first record whose embedding_index is not a
  // valid row of `store`.
  void check_embeddings(const EmbeddingStore& store) const;

  Dataset restrict_to_subjects(const std::set<std::string>& subjects) const;
  Dataset restrict_to_demographic(const std::string& tag) const;

  bool operator==(const Dataset& other) const {
    return records_ == other.records_;
  }

 private:
  std::vector<ImageRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<std::string, std::vector<std::size_t>> subjects_;
  std::map<std::string, std::vector<std::size_t>> demographics_;
};

inline constexpr const char* kManifestHeader =
    "image_id,subject_id,demographic,embedding_index,mask_path,"
    "facial_hair_ratio";

Dataset load_manifest(const std::filesystem::path& path);
void write_manifest(const Dataset& dataset, const std::filesystem::path& path);

// Fills facial_hair_ratio from `ratios`. A ratio already present on a record
// is kept (with a warning when the map disagrees). Every record must end up
// with a ratio in [0, 1].
Dataset attach_ratios(const Dataset& dataset,
                      const std::map<std::string, double>& ratios);

// Facial-hair ratios for every record that has a mask_path. Relative mask
// paths resolve against `base_dir`.
std::map<std::string, double> ratios_from_masks(
    const Dataset& dataset, const std::filesystem::path& base_dir,
    bool count_shadow = false);

struct LoadedData {
  Dataset dataset;
  EmbeddingStore embeddings;
};

// Manifest + embeddings, with missing ratios derived from masks. Relative
// mask paths resolve against `mask_dir`, by default the manifest's folder.
LoadedData load_dataset(const std::filesystem::path& manifest,
                        const std::filesystem::path& embeddings,
                        std::optional<std::size_t> expected_dim = {},
                        bool count_shadow = false,
                        const std::optional<std::filesystem::path>& mask_dir = {});

}  // namespace hirsute
