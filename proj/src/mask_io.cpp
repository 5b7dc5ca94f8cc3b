#include "hirsute/mask_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hirsute/errors.hpp"

namespace hirsute {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::vector<std::uint8_t> checked_labels(std::vector<std::uint8_t> raw,
                                         const std::filesystem::path& path) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] > 2) {
      throw DataError(fmt::format("{}: pixel {} has value {}, expected 0/1/2",
                                  path.string(), i, raw[i]));
    }
  }
  return raw;
}

// Next whitespace-delimited PNM header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

std::size_t pnm_number(std::istream& in, const std::filesystem::path& path,
                       const char* what) {
  const auto tok = pnm_token(in);
  try {
    std::size_t pos = 0;
    const auto v = std::stoul(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError(fmt::format("{}: bad PGM {} '{}'", path.string(), what, tok));
  }
}

LabelMask load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open mask {}", path.string()));
  const auto magic = pnm_token(in);
  const bool ascii = magic == "P2";
  if (!ascii && magic != "P5") {
    throw DataError(fmt::format("{}: not a PGM file", path.string()));
  }
  const auto width = pnm_number(in, path, "width");
  const auto height = pnm_number(in, path, "height");
  const auto maxval = pnm_number(in, path, "maxval");
  if (maxval == 0 || maxval > 255) {
    throw DataError(fmt::format("{}: PGM maxval {} is not 8-bit",
                                path.string(), maxval));
  }
  std::vector<std::uint8_t> raw(width * height);
  if (ascii) {
    for (auto& px : raw) {
      px = static_cast<std::uint8_t>(
          std::min<std::size_t>(pnm_number(in, path, "pixel"), 255));
    }
  } else {
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
      throw DataError(fmt::format("{}: truncated PGM data", path.string()));
    }
  }
  return LabelMask(width, height, checked_labels(std::move(raw), path));
}

// libpng reports errors by longjmp, so the setjmp frames below hold only
// trivially destructible locals.
struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

bool png_read_header(PngReader& r, std::FILE* fp, png_uint_32* width,
                     png_uint_32* height, int* bit_depth, int* color_type) {
  if (setjmp(png_jmpbuf(r.png))) return false;
  png_init_io(r.png, fp);
  png_read_info(r.png, r.info);
  *width = png_get_image_width(r.png, r.info);
  *height = png_get_image_height(r.png, r.info);
  *bit_depth = png_get_bit_depth(r.png, r.info);
  *color_type = png_get_color_type(r.png, r.info);
  return true;
}

bool png_read_pixels(PngReader& r, png_bytepp rows) {
  if (setjmp(png_jmpbuf(r.png))) return false;
  png_read_image(r.png, rows);
  png_read_end(r.png, nullptr);
  return true;
}

LabelMask load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError(fmt::format("cannot open mask {}", path.string()));
  PngReader reader;
  reader.png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (reader.png == nullptr) throw DataError("libpng: out of memory");
  reader.info = png_create_info_struct(reader.png);
  if (reader.info == nullptr) throw DataError("libpng: out of memory");

  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  if (!png_read_header(reader, fp.get(), &width, &height, &bit_depth,
                       &color_type)) {
    throw DataError(fmt::format("{}: corrupt PNG header", path.string()));
  }
  if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 8) {
    throw DataError(fmt::format("{}: PNG must be 8-bit single-channel (color "
                                "type {}, bit depth {})",
                                path.string(), color_type, bit_depth));
  }
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(width) * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 r = 0; r < height; ++r) {
    rows[r] = raw.data() + static_cast<std::size_t>(r) * width;
  }
  if (!png_read_pixels(reader, rows.data())) {
    throw DataError(fmt::format("{}: corrupt PNG data", path.string()));
  }
  return LabelMask(width, height, checked_labels(std::move(raw), path));
}

}  // namespace

LabelMask load_mask(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError(fmt::format("cannot open mask {}", path.string()));
  std::array<unsigned char, 8> sig{};
  probe.read(reinterpret_cast<char*>(sig.data()), sig.size());
  const auto got = static_cast<std::size_t>(probe.gcount());
  probe.close();
  if (got == sig.size() && png_sig_cmp(sig.data(), 0, sig.size()) == 0) {
    return load_png(path);
  }
  if (got >= 2 && sig[0] == 'P' && (sig[1] == '2' || sig[1] == '5')) {
    return load_pgm(path);
  }
  throw DataError(
      fmt::format("{}: unrecognized mask format (want PNG or PGM)",
                  path.string()));
}

void write_mask_pgm(const LabelMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << "P2\n" << mask.width() << ' ' << mask.height() << "\n2\n";
  const auto labels = mask.labels();
  for (std::size_t r = 0; r < mask.height(); ++r) {
    for (std::size_t c = 0; c < mask.width(); ++c) {
      if (c > 0) out << ' ';
      out << static_cast<int>(labels[r * mask.width() + c]);
    }
    out << '\n';
  }
  if (!out) throw DataError(fmt::format("write failed: {}", path.string()));
}

namespace {

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

bool png_write_all(PngWriter& w, std::FILE* fp, png_uint_32 width,
                   png_uint_32 height, png_bytepp rows) {
  if (setjmp(png_jmpbuf(w.png))) return false;
  png_init_io(w.png, fp);
  png_set_IHDR(w.png, w.info, width, height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows);
  png_write_end(w.png, nullptr);
  return true;
}

}  // namespace

void write_mask_png(const LabelMask& mask, const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError(fmt::format("cannot write {}", path.string()));
  PngWriter writer;
  writer.png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (writer.png == nullptr) throw DataError("libpng: out of memory");
  writer.info = png_create_info_struct(writer.png);
  if (writer.info == nullptr) throw DataError("libpng: out of memory");
  std::vector<std::uint8_t> pixels(mask.labels().begin(), mask.labels().end());
  std::vector<png_bytep> rows(mask.height());
  for (std::size_t r = 0; r < mask.height(); ++r) {
    rows[r] = pixels.data() + r * mask.width();
  }
  if (!png_write_all(writer, fp.get(), static_cast<png_uint_32>(mask.width()),
                     static_cast<png_uint_32>(mask.height()), rows.data())) {
    throw DataError(fmt::format("write failed: {}", path.string()));
  }
}

}  // namespace hirsute
