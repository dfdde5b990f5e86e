#include "mtensor/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "mtensor/tensor_io.hpp"

namespace mtensor {
namespace {

// Next header token, skipping whitespace and '#' comments.
long read_header_int(std::istream& is) {
  int c = is.peek();
  while (c != EOF) {
    if (std::isspace(c)) {
      is.get();
    } else if (c == '#') {
      std::string discard;
      std::getline(is, discard);
    } else {
      break;
    }
    c = is.peek();
  }
  long v = -1;
  if (!(is >> v) || v <= 0) throw std::runtime_error("netpbm: malformed header");
  return v;
}

}  // namespace

DenseTensor read_image(std::istream& is) {
  char magic[2] = {0, 0};
  is.read(magic, 2);
  if (!is || magic[0] != 'P') throw std::runtime_error("netpbm: bad magic");
  const char kind = magic[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
    throw std::runtime_error(std::string("netpbm: unsupported format P") + kind);
  }
  const bool ascii = kind == '2' || kind == '3';
  const Index channels = (kind == '3' || kind == '6') ? 3 : 1;
  const long width = read_header_int(is);
  const long height = read_header_int(is);
  const long maxval = read_header_int(is);
  if (maxval > 65535) throw std::runtime_error("netpbm: maxval out of range");
  if (width > (1 << 16) || height > (1 << 16)) throw std::runtime_error("netpbm: image too large");

  const auto w = static_cast<Index>(width);
  const auto h = static_cast<Index>(height);
  DenseTensor t({h, w, channels});
  const double scale = 1.0 / static_cast<double>(maxval);
  const bool wide = maxval > 255;
  if (!ascii) is.get();  // single whitespace byte before the raster

  for (Index row = 0; row < h; ++row) {
    for (Index col = 0; col < w; ++col) {
      for (Index ch = 0; ch < channels; ++ch) {
        long v = 0;
        if (ascii) {
          if (!(is >> v)) throw std::runtime_error("netpbm: truncated ASCII raster");
        } else {
          const int hi = is.get();
          if (hi == EOF) throw std::runtime_error("netpbm: truncated raster");
          v = hi;
          if (wide) {
            const int lo = is.get();
            if (lo == EOF) throw std::runtime_error("netpbm: truncated raster");
            v = (v << 8) | lo;
          }
        }
        if (v < 0 || v > maxval) throw std::runtime_error("netpbm: sample exceeds maxval");
        t.at({row, col, ch}) = static_cast<double>(v) * scale;
      }
    }
  }
  return t;
}

DenseTensor load_image(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_image(is);
}

void write_image(std::ostream& os, const DenseTensor& t, bool ascii) {
  Index channels = 1;
  if (t.order() == 3) {
    channels = t.extent(2);
  } else if (t.order() != 2) {
    throw std::invalid_argument("write_image: expected a (height, width[, channels]) tensor");
  }
  if (channels != 1 && channels != 3) throw std::invalid_argument("write_image: need 1 or 3 channels");
  const Index h = t.extent(0);
  const Index w = t.extent(1);
  const char kind = channels == 3 ? (ascii ? '3' : '6') : (ascii ? '2' : '5');
  os << 'P' << kind << '\n' << w << ' ' << h << "\n255\n";
  for (Index row = 0; row < h; ++row) {
    for (Index col = 0; col < w; ++col) {
      for (Index ch = 0; ch < channels; ++ch) {
        const double v = t.order() == 3 ? t.at({row, col, ch}) : t.at({row, col});
        const auto byte = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        if (ascii) {
          os << byte << ((col + 1 == w && ch + 1 == channels) ? '\n' : ' ');
        } else {
          os.put(static_cast<char>(byte));
        }
      }
    }
  }
  if (!os) throw std::runtime_error("write_image: write failed");
}

void save_image(const std::filesystem::path& path, const DenseTensor& t, bool ascii) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_image(os, t, ascii);
}

DenseTensor load_data(const std::filesystem::path& path) {
  if (path.extension() == ".mtd1") return load_tensor(path);
  return load_image(path);
}

void save_data(const std::filesystem::path& path, const DenseTensor& t) {
  if (path.extension() == ".mtd1") {
    save_tensor(path, t);
  } else {
    save_image(path, t);
  }
}

}  // namespace mtensor
