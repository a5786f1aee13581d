#pragma once

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "ignet/tensor.hpp"

namespace ignet {

// An 8-bit-origin grayscale image scaled into [0,1].
struct ImageSample {
  TensorF pixels;  // [1,H,W]
  std::string source_path;
  int bit_depth = 8;

  index_t height() const { return pixels.dim(1); }
  index_t width() const { return pixels.dim(2); }
};

namespace detail {

inline TensorF bytes_to_unit(const std::vector<unsigned char>& bytes, index_t h, index_t w) {
  TensorF t({1, h, w});
  for (index_t i = 0; i < h * w; ++i)
    t[i] = static_cast<float>(bytes[static_cast<std::size_t>(i)]) / 255.0f;
  return t;
}

inline unsigned char unit_to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<unsigned char>(std::lround(c * 255.0f));
}

// Skips PNM whitespace and '#' comment lines.
inline int pnm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
      continue;
    }
    if (!std::isspace(ch)) break;
  }
  if (ch == EOF) return -1;
  do {
    tok.push_back(static_cast<char>(ch));
  } while ((ch = in.get()) != EOF && !std::isspace(ch));
  return 0;
}

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

}  // namespace detail

// 8-bit binary PGM (P5) reader.
inline ImageSample load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string tok;
  if (detail::pnm_next_token(in, tok) != 0 || tok != "P5")
    throw IoError("'" + path + "' is not a binary PGM (P5) file");
  long w = 0, h = 0, maxval = 0;
  try {
    if (detail::pnm_next_token(in, tok) != 0) throw IoError("");
    w = std::stol(tok);
    if (detail::pnm_next_token(in, tok) != 0) throw IoError("");
    h = std::stol(tok);
    if (detail::pnm_next_token(in, tok) != 0) throw IoError("");
    maxval = std::stol(tok);
  } catch (const std::exception&) {
    throw IoError("'" + path + "': malformed PGM header");
  }
  if (w <= 0 || h <= 0) throw IoError("'" + path + "': bad PGM dimensions");
  if (maxval != 255) throw IoError("'" + path + "': only 8-bit PGM supported (maxval 255)");
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw IoError("'" + path + "': truncated PGM pixel data");
  ImageSample s{detail::bytes_to_unit(bytes, h, w), path, 8};
  return s;
}

// 8-bit binary PGM (P5) writer; values clamped to [0,1] then quantized.
inline void save_pgm(const std::string& path, const TensorF& pixels) {
  if (pixels.ndim() != 3 || pixels.dim(0) != 1)
    throw ShapeError("save_pgm expects [1,H,W], got " + shape_str(pixels.shape()));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const index_t h = pixels.dim(1), w = pixels.dim(2);
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(h * w));
  for (index_t i = 0; i < h * w; ++i)
    bytes[static_cast<std::size_t>(i)] = detail::unit_to_byte(pixels[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

// 8-bit PNG reader; color inputs are reduced with BT.601 luma.
inline ImageSample load_png(const std::string& path) {
  detail::PngReadCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw IoError("cannot open '" + path + "'");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, ctx.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError("'" + path + "' is not a PNG file");
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw IoError("png_create_read_struct failed for '" + path + "'");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw IoError("png_create_info_struct failed for '" + path + "'");
  if (setjmp(png_jmpbuf(ctx.png))) throw IoError("'" + path + "': PNG decode error");
  png_init_io(ctx.png, ctx.fp);
  png_set_sig_bytes(ctx.png, 8);
  png_read_info(ctx.png, ctx.info);

  const png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
  const png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
  const int depth = png_get_bit_depth(ctx.png, ctx.info);
  const int color = png_get_color_type(ctx.png, ctx.info);
  if (depth == 16) throw IoError("'" + path + "': 16-bit PNG not supported");
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  png_set_strip_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const int channels = png_get_channels(ctx.png, ctx.info);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * static_cast<std::size_t>(channels));
  std::vector<unsigned char> gray(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  // Re-arm after buffer construction so an error longjmp unwinds through
  // this frame with the vectors' destructors still reachable.
  if (setjmp(png_jmpbuf(ctx.png))) throw IoError("'" + path + "': PNG decode error");
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(ctx.png, row.data(), nullptr);
    unsigned char* dst = gray.data() + static_cast<std::size_t>(y) * w;
    if (channels == 1) {
      std::memcpy(dst, row.data(), w);
    } else if (channels == 3) {
      for (png_uint_32 x = 0; x < w; ++x) {
        const double r = row[3 * x], g = row[3 * x + 1], b = row[3 * x + 2];
        dst[x] = static_cast<unsigned char>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
      }
    } else {
      throw IoError("'" + path + "': unsupported PNG channel count " +
                    std::to_string(channels));
    }
  }
  png_read_end(ctx.png, nullptr);
  ImageSample s{detail::bytes_to_unit(gray, static_cast<index_t>(h), static_cast<index_t>(w)),
                path, 8};
  return s;
}

// 8-bit grayscale PNG writer.
inline void save_png(const std::string& path, const TensorF& pixels) {
  if (pixels.ndim() != 3 || pixels.dim(0) != 1)
    throw ShapeError("save_png expects [1,H,W], got " + shape_str(pixels.shape()));
  detail::PngWriteCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) throw IoError("cannot write '" + path + "'");
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw IoError("png_create_write_struct failed for '" + path + "'");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw IoError("png_create_info_struct failed for '" + path + "'");
  if (setjmp(png_jmpbuf(ctx.png))) throw IoError("'" + path + "': PNG encode error");
  png_init_io(ctx.png, ctx.fp);
  const index_t h = pixels.dim(1), w = pixels.dim(2);
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  std::vector<unsigned char> row(static_cast<std::size_t>(w));
  if (setjmp(png_jmpbuf(ctx.png))) throw IoError("'" + path + "': PNG encode error");
  for (index_t y = 0; y < h; ++y) {
    for (index_t x = 0; x < w; ++x)
      row[static_cast<std::size_t>(x)] = detail::unit_to_byte(pixels[y * w + x]);
    png_write_row(ctx.png, row.data());
  }
  png_write_end(ctx.png, nullptr);
}

// Dispatch on extension: .pgm or .png (case-insensitive).
inline ImageSample load_grayscale(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".pgm") return load_pgm(path);
  if (ext == ".png") return load_png(path);
  throw IoError("unsupported image format '" + ext + "' for '" + path +
                "' (expected .pgm or .png)");
}

inline void save_grayscale(const std::string& path, const TensorF& pixels) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".pgm") return save_pgm(path, pixels);
  if (ext == ".png") return save_png(path, pixels);
  throw IoError("unsupported image format '" + ext + "' for '" + path + "'");
}

}  // namespace ignet
