#include "fhdr/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "fhdr/checkpoint.hpp"
#include "fhdr/errors.hpp"

namespace fhdr::image_io {
namespace {

void check_image(const Tensor& img, const std::filesystem::path& path) {
  const Shape& s = img.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3) || s.h == 0 || s.w == 0) {
    throw ShapeError(path.string() + ": image tensors must be (1, 1|3, H, W), got " + s.str());
  }
}

// Parses the ASCII header tokens of PNM/PFM, returning the offset of the raster.
class HeaderParser {
 public:
  HeaderParser(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::string token() {
    skip_space_and_comments();
    std::string t;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) t.push_back(static_cast<char>(bytes_[pos_++]));
    if (t.empty()) throw IoError(path_.string() + ": truncated header");
    return t;
  }

  long number() {
    const std::string t = token();
    try {
      std::size_t used = 0;
      const long v = std::stol(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw IoError(path_.string() + ": bad header field '" + t + "'");
    }
  }

  double real() {
    const std::string t = token();
    try {
      return std::stod(t);
    } catch (const std::exception&) {
      throw IoError(path_.string() + ": bad header field '" + t + "'");
    }
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size()) throw IoError(path_.string() + ": missing raster");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

void write_pnm(const std::filesystem::path& path, const Tensor& img, unsigned maxval) {
  check_image(img, path);
  const Shape& s = img.shape();
  std::ostringstream header;
  header << (s.c == 1 ? "P5" : "P6") << '\n' << s.w << ' ' << s.h << '\n' << maxval << '\n';
  const std::string h = header.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  const std::size_t bps = maxval > 255 ? 2 : 1;
  bytes.reserve(bytes.size() + s.h * s.w * s.c * bps);
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x) {
      for (std::size_t c = 0; c < s.c; ++c) {
        const double v = std::clamp(img.at(0, c, y, x), 0.0, 1.0);
        const auto q = static_cast<std::uint16_t>(std::lround(v * maxval));
        if (bps == 2) bytes.push_back(static_cast<std::uint8_t>(q >> 8));
        bytes.push_back(static_cast<std::uint8_t>(q & 0xff));
      }
    }
  }
  write_file_atomic(path, bytes);
}

}  // namespace

void write_pnm16(const std::filesystem::path& path, const Tensor& img) { write_pnm(path, img, 65535); }
void write_pnm8(const std::filesystem::path& path, const Tensor& img) { write_pnm(path, img, 255); }

Tensor read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  HeaderParser hp(bytes, path);
  const std::string magic = hp.token();
  if (magic != "P5" && magic != "P6") throw IoError(path.string() + ": unsupported PNM type '" + magic + "'");
  const long w = hp.number(), h = hp.number(), maxval = hp.number();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw IoError(path.string() + ": invalid PNM header");
  const std::size_t c = magic == "P5" ? 1 : 3;
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t start = hp.raster_start();
  if (bytes.size() - start < static_cast<std::size_t>(w * h) * c * bps) throw IoError(path.string() + ": truncated raster");
  Tensor img({1, c, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  const std::uint8_t* p = bytes.data() + start;
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        unsigned q = *p++;
        if (bps == 2) q = (q << 8) | *p++;
        img.at(0, ch, y, x) = static_cast<double>(q) / static_cast<double>(maxval);
      }
  return img;
}

void write_pfm(const std::filesystem::path& path, const Tensor& img) {
  check_image(img, path);
  img.audit(path.string());
  const Shape& s = img.shape();
  std::ostringstream header;
  header << (s.c == 1 ? "Pf" : "PF") << '\n' << s.w << ' ' << s.h << '\n' << "-1.0" << '\n';
  const std::string h = header.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  for (std::size_t row = 0; row < s.h; ++row) {
    const std::size_t y = s.h - 1 - row;
    for (std::size_t x = 0; x < s.w; ++x)
      for (std::size_t c = 0; c < s.c; ++c) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.at(0, c, y, x)));
        for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
      }
  }
  write_file_atomic(path, bytes);
}

Tensor read_pfm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  HeaderParser hp(bytes, path);
  const std::string magic = hp.token();
  if (magic != "Pf" && magic != "PF") throw IoError(path.string() + ": not a PFM file");
  const long w = hp.number(), h = hp.number();
  const double scale = hp.real();
  if (w <= 0 || h <= 0 || scale == 0.0) throw IoError(path.string() + ": invalid PFM header");
  const bool little = scale < 0.0;
  const std::size_t c = magic == "Pf" ? 1 : 3;
  const std::size_t start = hp.raster_start();
  if (bytes.size() - start < static_cast<std::size_t>(w * h) * c * 4) throw IoError(path.string() + ": truncated raster");
  Tensor img({1, c, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  const std::uint8_t* p = bytes.data() + start;
  for (long row = 0; row < h; ++row) {
    const long y = h - 1 - row;
    for (long x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
          const std::uint32_t byte = p[little ? b : 3 - b];
          bits |= byte << (8 * b);
        }
        p += 4;
        img.at(0, ch, y, x) = static_cast<double>(std::bit_cast<float>(bits));
      }
  }
  return img;
}

Tensor read_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
  throw IoError(path.string() + ": unsupported image extension '" + ext + "'");
}

}  // namespace fhdr::image_io
