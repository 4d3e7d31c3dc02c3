#include "contextnav/map_io.hpp"

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

#include "json.hpp"

namespace contextnav {

namespace {

// Image row 0 is the top of the picture; grid row 0 is the bottom of the
// world. Loaders/savers flip vertically.

std::vector<uint8_t> read_pgm(const std::string& path, int& w, int& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MapFileError("cannot open map file: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw MapFormatError("not an 8-bit grayscale P5 PGM: " + path);
  auto next_int = [&]() {
    // skip whitespace and '#' comments
    for (;;) {
      const int ch = in.peek();
      if (ch == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(ch)) {
        in.get();
      } else {
        break;
      }
    }
    int v;
    in >> v;
    if (!in) throw MapFormatError("bad PGM header: " + path);
    return v;
  };
  w = next_int();
  h = next_int();
  const int maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255)
    throw MapFormatError("unsupported PGM dimensions or maxval: " + path);
  in.get();  // single whitespace after maxval
  std::vector<uint8_t> pixels(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size()))
    throw MapFormatError("truncated PGM payload: " + path);
  return pixels;
}

void write_pgm(const std::string& path, const std::vector<uint8_t>& pixels, int w, int h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MapFileError("cannot write map file: " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

struct PngReadCtx {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadCtx() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

std::vector<uint8_t> read_png(const std::string& path, int& w, int& h) {
  PngReadCtx ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw MapFileError("cannot open map file: " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, ctx.fp) != 8 || png_sig_cmp(sig, 0, 8))
    throw MapFormatError("not a PNG file: " + path);
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (setjmp(png_jmpbuf(ctx.png))) throw MapFormatError("corrupt PNG: " + path);
  png_init_io(ctx.png, ctx.fp);
  png_set_sig_bytes(ctx.png, 8);
  png_read_info(ctx.png, ctx.info);
  w = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  h = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  const int color = png_get_color_type(ctx.png, ctx.info);
  const int depth = png_get_bit_depth(ctx.png, ctx.info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8)
    throw MapFormatError("map PNG must be 8-bit grayscale: " + path);
  std::vector<uint8_t> pixels(static_cast<size_t>(w) * h);
  std::vector<png_bytep> rows(h);
  for (int r = 0; r < h; ++r) rows[r] = pixels.data() + static_cast<size_t>(r) * w;
  png_read_image(ctx.png, rows.data());
  return pixels;
}

struct PngWriteCtx {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteCtx() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

void write_png_gray(const std::string& path, const std::vector<uint8_t>& pixels, int w, int h) {
  PngWriteCtx ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) throw MapFileError("cannot write map file: " + path);
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (setjmp(png_jmpbuf(ctx.png))) throw MapFileError("PNG write failed: " + path);
  png_init_io(ctx.png, ctx.fp);
  png_set_IHDR(ctx.png, ctx.info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  for (int r = 0; r < h; ++r)
    png_write_row(ctx.png, const_cast<png_bytep>(pixels.data() + static_cast<size_t>(r) * w));
  png_write_end(ctx.png, nullptr);
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::string sidecar_path(const std::string& map_path) {
  return std::filesystem::path(map_path).replace_extension(".json").string();
}

OccupancyGrid load_map(const std::string& path) {
  int w = 0, h = 0;
  std::vector<uint8_t> pixels;
  if (has_suffix(path, ".pgm")) {
    pixels = read_pgm(path, w, h);
  } else if (has_suffix(path, ".png")) {
    pixels = read_png(path, w, h);
  } else {
    throw MapFormatError("unsupported map extension (want .pgm or .png): " + path);
  }

  const std::string side = sidecar_path(path);
  std::ifstream sin(side);
  if (!sin) throw MapSidecarError("missing map sidecar: " + side);
  nlohmann::json j;
  try {
    sin >> j;
  } catch (const nlohmann::json::exception& e) {
    throw MapSidecarError("bad map sidecar " + side + ": " + e.what());
  }
  if (!j.contains("resolution_m") || !j.contains("origin_xy_m"))
    throw MapSidecarError("sidecar must contain resolution_m and origin_xy_m: " + side);

  OccupancyGrid g(w, h, j.at("resolution_m").get<double>(),
                  {j.at("origin_xy_m").at(0).get<double>(), j.at("origin_xy_m").at(1).get<double>()});
  if (g.resolution <= 0.0) throw MapSidecarError("sidecar resolution must be positive: " + side);
  for (int r = 0; r < h; ++r) {
    const uint8_t* img_row = pixels.data() + static_cast<size_t>(h - 1 - r) * w;
    for (int c = 0; c < w; ++c) g.at(c, r) = img_row[c] >= 128 ? 1 : 0;
  }
  return g;
}

void save_map(const OccupancyGrid& grid, const std::string& path) {
  if (grid.width <= 0 || grid.height <= 0 || grid.resolution <= 0.0)
    throw MapFormatError("cannot save an empty or invalid grid");
  std::vector<uint8_t> pixels(static_cast<size_t>(grid.width) * grid.height);
  for (int r = 0; r < grid.height; ++r) {
    uint8_t* img_row = pixels.data() + static_cast<size_t>(grid.height - 1 - r) * grid.width;
    for (int c = 0; c < grid.width; ++c) img_row[c] = grid.at(c, r) == 1 ? 255 : 0;
  }
  if (has_suffix(path, ".pgm")) {
    write_pgm(path, pixels, grid.width, grid.height);
  } else if (has_suffix(path, ".png")) {
    write_png_gray(path, pixels, grid.width, grid.height);
  } else {
    throw MapFormatError("unsupported map extension (want .pgm or .png): " + path);
  }
  nlohmann::json j;
  j["resolution_m"] = grid.resolution;
  j["origin_xy_m"] = {grid.origin.x, grid.origin.y};
  std::ofstream out(sidecar_path(path));
  if (!out) throw MapFileError("cannot write sidecar for: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace contextnav
