#ifndef SPIN_IO_HPP
#define SPIN_IO_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spin/core.hpp"

namespace spin::io {

// 17 significant digits, '.' separator; round-trips every double exactly.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  return out;
}

// One value per line.
inline void write_signal_csv(const std::filesystem::path& path, const SignalVector& v) {
  auto out = open_output(path);
  for (Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << '\n';
}

inline SignalVector read_signal_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ss.imbue(std::locale::classic());
    double v = 0.0;
    require(static_cast<bool>(ss >> v), ErrorCode::Io, "bad value '" + line + "' in " + path.string());
    require(std::isfinite(v), ErrorCode::Io, "non-finite value in " + path.string());
    values.push_back(v);
  }
  return Eigen::Map<const SignalVector>(values.data(), static_cast<Index>(values.size()));
}

struct Image16 {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint16_t> pixels;
};

// Linear map of [min, max] onto [0, 65535]; constant images map to 0.
inline Image16 quantize(const SignalVector& img, Index height, Index width) {
  require_same_size(img.size(), height * width, "image size");
  Image16 out{height, width, std::vector<std::uint16_t>(static_cast<std::size_t>(img.size()), 0)};
  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  if (hi > lo) {
    for (Index i = 0; i < img.size(); ++i) {
      out.pixels[i] = static_cast<std::uint16_t>(std::lround((img[i] - lo) / (hi - lo) * 65535.0));
    }
  }
  return out;
}

// Binary PGM (P5), maxval 65535, big-endian samples.
inline void write_pgm(const std::filesystem::path& path, const SignalVector& img, Index height,
                      Index width) {
  const Image16 q = quantize(img, height, width);
  auto out = open_output(path);
  out << "P5\n" << width << ' ' << height << "\n65535\n";
  for (std::uint16_t p : q.pixels) {
    const char bytes[2] = {static_cast<char>(p >> 8), static_cast<char>(p & 0xff)};
    out.write(bytes, 2);
  }
}

inline Image16 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::string magic;
  Image16 img;
  int maxval = 0;
  in >> magic >> img.width >> img.height >> maxval;
  require(magic == "P5" && maxval == 65535 && img.width > 0 && img.height > 0, ErrorCode::Io,
          "unsupported PGM header in " + path.string());
  in.get();
  img.pixels.resize(static_cast<std::size_t>(img.width * img.height));
  for (auto& p : img.pixels) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    require(static_cast<bool>(in), ErrorCode::Io, "truncated PGM " + path.string());
    p = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  return img;
}

}  // namespace spin::io

#endif  // SPIN_IO_HPP
