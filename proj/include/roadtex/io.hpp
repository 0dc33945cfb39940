#pragma once

// Grayscale image files: PGM (P2/P5), 8-bit PNG, and a lossless float64
// raster used to persist pipeline intermediates.

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "roadtex/error.hpp"
#include "roadtex/image.hpp"

namespace roadtex {

/// Map from real intensities to stored gray levels:
/// stored = clamp(round(scale * value + offset), 0, 255).
struct AffineMap {
  double scale = 1.0;
  double offset = 0.0;

  double apply(double v) const { return std::clamp(std::round(scale * v + offset), 0.0, 255.0); }
  double invert(double stored) const { return (stored - offset) / scale; }
};

enum class Quantize {
  clamp,      ///< identity map, out-of-range values clamped
  normalize,  ///< min..max stretched to 0..255
};

inline AffineMap make_map(const ImageGrid& img, Quantize mode) {
  if (mode == Quantize::clamp) return {};
  const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  if (*hi - *lo <= 0.0) return {1.0, -*lo};
  const double scale = 255.0 / (*hi - *lo);
  return {scale, -*lo * scale};
}

struct LoadedImage {
  ImageGrid image;
  std::optional<AffineMap> map;  ///< present when the file was written by save_image
};

namespace detail {

inline constexpr const char* kMapKey = "roadtex-affine";

inline std::string map_text(const AffineMap& m) {
  std::ostringstream os;
  os.precision(17);
  os << "scale=" << m.scale << " offset=" << m.offset;
  return os.str();
}

inline std::optional<AffineMap> parse_map_text(const std::string& s) {
  AffineMap m;
  if (std::sscanf(s.c_str(), " scale=%lf offset=%lf", &m.scale, &m.offset) == 2 && m.scale != 0.0) return m;
  return std::nullopt;
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class PgmReader {
 public:
  explicit PgmReader(const std::vector<unsigned char>& bytes) : b_(bytes) {}

  LoadedImage read() {
    if (b_.size() < 2 || b_[0] != 'P' || (b_[1] != '2' && b_[1] != '5'))
      throw IoError("not a PGM file (expected P2 or P5 magic)", 0);
    const bool binary = b_[1] == '5';
    pos_ = 2;
    const long w = header_int("width");
    const long h = header_int("height");
    const long maxval = header_int("maxval");
    if (w < 1 || h < 1) throw IoError("PGM dimensions must be positive", pos_);
    if (maxval < 1 || maxval > 65535) throw IoError("PGM maxval out of range", pos_);
    ImageGrid img(static_cast<int>(w), static_cast<int>(h));
    if (binary) {
      if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw IoError("missing separator before raster", pos_);
      ++pos_;
      const std::size_t bpp = maxval > 255 ? 2 : 1;
      if (b_.size() - pos_ < img.size() * bpp)
        throw IoError("truncated P5 raster: need " + std::to_string(img.size() * bpp) + " bytes", pos_);
      for (std::size_t i = 0; i < img.size(); ++i) {
        const std::size_t at = pos_ + i * bpp;
        img[i] = bpp == 1 ? b_[at] : (b_[at] << 8 | b_[at + 1]);
      }
    } else {
      for (std::size_t i = 0; i < img.size(); ++i) {
        const long v = header_int("pixel");
        if (v > maxval) throw IoError("pixel value exceeds maxval", pos_);
        img[i] = static_cast<double>(v);
      }
    }
    if (maxval != 255) {
      // Other depths are rescaled to the 8-bit range.
      for (double& v : img.pixels()) v = v * 255.0 / maxval;
    }
    return {std::move(img), map_};
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        const std::size_t start = pos_ + 1;
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
        std::string comment(b_.begin() + start, b_.begin() + pos_);
        const auto k = comment.find(kMapKey);
        if (k != std::string::npos) map_ = parse_map_text(comment.substr(k + std::strlen(kMapKey)));
      } else {
        break;
      }
    }
  }

  long header_int(const char* what) {
    skip_space_and_comments();
    if (pos_ >= b_.size()) throw IoError(std::string("unexpected end of file reading ") + what, pos_);
    if (!std::isdigit(b_[pos_])) throw IoError(std::string("expected integer for ") + what, pos_);
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1'000'000'000) throw IoError(std::string("integer overflow reading ") + what, pos_);
      ++pos_;
    }
    return v;
  }

  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
  std::optional<AffineMap> map_;
};

struct PngBuffer {
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  std::string text;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  char message[256] = {};
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<PngBuffer*>(png_get_error_ptr(png));
  std::snprintf(buf->message, sizeof buf->message, "%s", msg);
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

// Only trivially destructible state lives in this frame across setjmp.
inline bool png_decode(FILE* fp, PngBuffer* buf) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, buf, png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  buf->width = png_get_image_width(png, info);
  buf->height = png_get_image_height(png, info);
  if (png_get_rowbytes(png, info) != buf->width) {
    std::snprintf(buf->message, sizeof buf->message, "unsupported PNG pixel layout");
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  buf->pixels.resize(static_cast<std::size_t>(buf->width) * buf->height);
  buf->rows.resize(buf->height);
  for (png_uint_32 y = 0; y < buf->height; ++y) buf->rows[y] = buf->pixels.data() + y * buf->width;
  png_read_image(png, buf->rows.data());
  png_read_end(png, info);
  png_textp text = nullptr;
  int ntext = 0;
  png_get_text(png, info, &text, &ntext);
  for (int i = 0; i < ntext; ++i)
    if (std::strcmp(text[i].key, kMapKey) == 0) buf->text = text[i].text;
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline bool png_encode(FILE* fp, PngBuffer* buf) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, buf, png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, buf->width, buf->height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_text text{};
  text.compression = PNG_TEXT_COMPRESSION_NONE;
  text.key = const_cast<char*>(kMapKey);
  text.text = buf->text.data();
  png_set_text(png, info, &text, 1);
  // Fixed zlib settings keep the encoded bytes reproducible.
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (png_uint_32 y = 0; y < buf->height; ++y) png_write_row(png, buf->pixels.data() + y * buf->width);
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct FileCloser {
  void operator()(FILE* f) const { std::fclose(f); }
};

inline bool has_extension(const std::filesystem::path& p, const char* ext) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

}  // namespace detail

/// Reads a P2/P5 PGM or PNG (detected from the file signature). Color
/// PNGs are converted to luminance.
inline LoadedImage load_image_with_map(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  static constexpr std::array<unsigned char, 8> kPngSig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngSig.begin(), kPngSig.end(), bytes.begin())) {
    std::unique_ptr<FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path.string());
    detail::PngBuffer buf;
    if (!detail::png_decode(fp.get(), &buf))
      throw IoError("malformed PNG " + path.string() + ": " + (buf.message[0] ? buf.message : "decode failed"));
    ImageGrid img(static_cast<int>(buf.width), static_cast<int>(buf.height));
    std::copy(buf.pixels.begin(), buf.pixels.end(), img.pixels().begin());
    return {std::move(img), detail::parse_map_text(buf.text)};
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    try {
      return detail::PgmReader(bytes).read();
    } catch (const IoError& e) {
      throw IoError(path.string() + ": " + e.what());
    }
  }
  throw IoError("unsupported image format: " + path.string(), 0);
}

inline ImageGrid load_image(const std::filesystem::path& path) { return load_image_with_map(path).image; }

/// Writes an 8-bit grayscale image; format follows the extension (.png,
/// .pgm for binary P5). The affine map used for quantization is stored in
/// the file (PNG tEXt chunk / PGM comment) and returned.
inline AffineMap save_image(const ImageGrid& img, const std::filesystem::path& path,
                            Quantize mode = Quantize::clamp) {
  const AffineMap map = make_map(img, mode);
  std::vector<unsigned char> gray(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) gray[i] = static_cast<unsigned char>(map.apply(img[i]));

  if (detail::has_extension(path, ".png")) {
    std::unique_ptr<FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path.string());
    detail::PngBuffer buf;
    buf.pixels = std::move(gray);
    buf.width = static_cast<png_uint_32>(img.width());
    buf.height = static_cast<png_uint_32>(img.height());
    buf.text = detail::map_text(map);
    if (!detail::png_encode(fp.get(), &buf)) throw IoError("PNG encode failed: " + std::string(buf.message));
    return map;
  }
  if (detail::has_extension(path, ".pgm")) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n# " << detail::kMapKey << ' ' << detail::map_text(map) << '\n'
        << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    if (!out) throw IoError("write failed: " + path.string());
    return map;
  }
  throw IoError("unsupported output extension: " + path.string());
}

/// Lossless float64 raster ("RTXF64" header, little-endian doubles).
inline void save_raw(const ImageGrid& img, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "raw rasters assume a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "RTXF64\n" << img.width() << ' ' << img.height() << '\n';
  out.write(reinterpret_cast<const char*>(img.pixels().data()),
            static_cast<std::streamsize>(img.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

inline ImageGrid load_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  in >> magic >> w >> h;
  if (magic != "RTXF64" || !in) throw IoError("bad raw raster header: " + path.string(), 0);
  in.get();
  if (w < 1 || h < 1) throw IoError("bad raw raster dimensions: " + path.string());
  ImageGrid img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels().data()), static_cast<std::streamsize>(img.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != img.size() * sizeof(double))
    throw IoError("truncated raw raster: " + path.string(), static_cast<std::size_t>(in.tellg()));
  return img;
}

}  // namespace roadtex
