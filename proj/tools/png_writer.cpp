#include "png_writer.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

void write_confusion_png(const std::filesystem::path& path, const std::vector<std::vector<long>>& confusion,
                         int cell) {
  const int k = static_cast<int>(confusion.size());
  if (k == 0) throw std::invalid_argument("empty confusion matrix");
  const int border = 2;
  const int side = k * cell + border * (k + 1);

  std::vector<unsigned char> rgb(static_cast<std::size_t>(side) * side * 3, 136);
  for (int t = 0; t < k; ++t) {
    long total = 0;
    for (long v : confusion[t]) total += v;
    for (int p = 0; p < k; ++p) {
      const double rate = total ? static_cast<double>(confusion[t][p]) / static_cast<double>(total) : 0.0;
      const auto shade = static_cast<unsigned char>(255.0 * (1.0 - rate));
      const int y0 = border + t * (cell + border), x0 = border + p * (cell + border);
      for (int y = y0; y < y0 + cell; ++y) {
        for (int x = x0; x < x0 + cell; ++x) {
          unsigned char* px = &rgb[(static_cast<std::size_t>(y) * side + x) * 3];
          px[0] = shade;
          px[1] = shade;
          px[2] = 255;
        }
      }
    }
  }

  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, side, side, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < side; ++y) png_write_row(png, &rgb[static_cast<std::size_t>(y) * side * 3]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}
