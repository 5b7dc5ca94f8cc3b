#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "hirsute/dataset.hpp"

namespace fixtures {

struct Img {
  std::string id;
  std::string subject;
  std::string demo;
  double ratio;
};

inline hirsute::Dataset dataset(const std::vector<Img>& imgs) {
  std::vector<hirsute::ImageRecord> recs;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    hirsute::ImageRecord r;
    r.image_id = imgs[i].id;
    r.subject_id = imgs[i].subject;
    r.demographic = imgs[i].demo;
    r.embedding_index = i;
    r.facial_hair_ratio = imgs[i].ratio;
    recs.push_back(r);
  }
  return hirsute::Dataset(std::move(recs));
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixtures
