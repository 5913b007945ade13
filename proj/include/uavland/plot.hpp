#pragma once

// Reward-per-episode curves with a moving-average overlay, written as PNG
// (raster, via libpng) or SVG depending on the output extension.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavland/harness.hpp"

namespace uavland::plot {

struct Series {
  std::vector<double> returns;
  std::vector<double> average;  // moving average over harness::kAverageWindow
};

inline Series series_from_records(const std::vector<harness::EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("plot: no episodes to draw");
  Series s;
  for (const auto& r : records) s.returns.push_back(r.ret);
  s.average = harness::moving_average(s.returns);
  return s;
}

struct Extent {
  double lo = 0.0, hi = 1.0;
};

inline Extent value_extent(const Series& s) {
  auto [lo, hi] = std::minmax_element(s.returns.begin(), s.returns.end());
  Extent e{*lo, *hi};
  e.lo = std::min(e.lo, *std::min_element(s.average.begin(), s.average.end()));
  e.hi = std::max(e.hi, *std::max_element(s.average.begin(), s.average.end()));
  if (e.hi - e.lo < 1e-9) {
    e.lo -= 1.0;
    e.hi += 1.0;
  }
  const double pad = 0.05 * (e.hi - e.lo);
  return {e.lo - pad, e.hi + pad};
}

// RGB canvas with Bresenham lines.
class Canvas {
 public:
  Canvas(int width, int height) : w_(width), h_(height), px_(static_cast<std::size_t>(width * height * 3), 255) {}

  void set(int x, int y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    auto* p = &px_[static_cast<std::size_t>((y * w_ + x) * 3)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  void line(int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> c, int thickness = 1) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      for (int t = 0; t < thickness; ++t) {
        set(x0, y0 + t, c);
        set(x0 + t, y0, c);
      }
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void write_png(const std::filesystem::path& path) const {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::fclose(fp);
      throw std::runtime_error("libpng failed writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h_; ++y) {
      png_write_row(png, const_cast<png_bytep>(&px_[static_cast<std::size_t>(y * w_ * 3)]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
  }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

inline void render_png(const Series& s, const std::filesystem::path& out) {
  constexpr int W = 900, H = 500, L = 60, R = 20, T = 20, B = 40;
  Canvas c(W, H);
  const Extent e = value_extent(s);
  const std::size_t n = s.returns.size();
  auto xpix = [&](std::size_t i) {
    return L + static_cast<int>(std::lround(n > 1 ? double(i) / double(n - 1) * (W - L - R) : 0.0));
  };
  auto ypix = [&](double v) {
    return T + static_cast<int>(std::lround((e.hi - v) / (e.hi - e.lo) * (H - T - B)));
  };
  const std::array<std::uint8_t, 3> axis{0, 0, 0}, grid{225, 225, 225};
  for (int k = 0; k <= 4; ++k) {
    const int y = T + k * (H - T - B) / 4;
    c.line(L, y, W - R, y, grid);
  }
  if (e.lo < 0.0 && e.hi > 0.0) c.line(L, ypix(0.0), W - R, ypix(0.0), {160, 160, 160});
  c.line(L, T, L, H - B, axis);
  c.line(L, H - B, W - R, H - B, axis);
  auto draw = [&](const std::vector<double>& v, std::array<std::uint8_t, 3> col, int thick) {
    if (v.size() == 1) {
      c.line(xpix(0), ypix(v[0]), W - R, ypix(v[0]), col, thick);
      return;
    }
    for (std::size_t i = 1; i < v.size(); ++i) {
      c.line(xpix(i - 1), ypix(v[i - 1]), xpix(i), ypix(v[i]), col, thick);
    }
  };
  draw(s.returns, {150, 190, 235}, 1);
  draw(s.average, {200, 30, 30}, 2);
  c.write_png(out);
}

inline void render_svg(const Series& s, const std::filesystem::path& out, const std::string& title) {
  constexpr double W = 900, H = 500, L = 70, R = 20, T = 40, B = 50;
  const Extent e = value_extent(s);
  const std::size_t n = s.returns.size();
  auto x = [&](std::size_t i) { return L + (n > 1 ? double(i) / double(n - 1) : 0.0) * (W - L - R); };
  auto y = [&](double v) { return T + (e.hi - v) / (e.hi - e.lo) * (H - T - B); };
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out.string());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\">"
     << title << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = e.hi - k * (e.hi - e.lo) / 4.0;
    os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << y(v) << "\" y2=\"" << y(v)
       << "\" stroke=\"#e0e0e0\"/>\n<text x=\"" << L - 6 << "\" y=\"" << y(v) + 4
       << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
       << std::lround(v) << "</text>\n";
  }
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\""
     << H - B << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\">episode (1.." << n << ")</text>\n";
  auto poly = [&](const std::vector<double>& v, const char* color, double width) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\" points=\"";
    for (std::size_t i = 0; i < v.size(); ++i) os << x(i) << ',' << y(v[i]) << ' ';
    if (v.size() == 1) os << W - R << ',' << y(v[0]);
    os << "\"/>\n";
  };
  poly(s.returns, "#96bee9", 1.0);
  poly(s.average, "#c81e1e", 2.0);
  os << "</svg>\n";
}

// Reads a metrics CSV and writes the curve; format chosen by extension.
inline Series plot_metrics(const std::filesystem::path& metrics, const std::filesystem::path& out) {
  const Series s = series_from_records(harness::read_metrics(metrics));
  if (out.extension() == ".svg") {
    render_svg(s, out, "Reward per episode (" + metrics.filename().string() + ")");
  } else {
    render_png(s, out);
  }
  return s;
}

}  // namespace uavland::plot
