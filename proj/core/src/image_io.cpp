#include "dcv/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace dcv {

namespace {

struct PnmHeader {
  char kind = 0;  // '5' or '6'
  std::int64_t width = 0, height = 0;
  int maxval = 0;
};

std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

PnmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  PnmHeader h;
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P6") throw IoError(path.string() + ": not a binary PGM/PPM file");
  h.kind = magic[1];
  try {
    h.width = std::stoll(next_token(in));
    h.height = std::stoll(next_token(in));
    h.maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PNM header");
  }
  if (h.width < 1 || h.height < 1 || h.maxval < 1 || h.maxval > 65535) {
    throw IoError(path.string() + ": invalid PNM dimensions or maxval");
  }
  return h;
}

struct RawImage {
  PnmHeader header;
  std::vector<std::uint16_t> samples;  // interleaved
};

RawImage read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  RawImage img;
  img.header = read_header(in, path);
  const auto& h = img.header;
  const std::int64_t channels = h.kind == '6' ? 3 : 1;
  const std::int64_t count = h.width * h.height * channels;
  const bool wide = h.maxval > 255;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(count * (wide ? 2 : 1)));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError(path.string() + ": truncated pixel data");
  }
  img.samples.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    img.samples[i] = wide ? static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]) : bytes[i];
  }
  return img;
}

void write_raw(const std::filesystem::path& path, char kind, std::int64_t w, std::int64_t h, int maxval,
               const std::vector<std::uint16_t>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << 'P' << kind << '\n' << w << ' ' << h << '\n' << maxval << '\n';
  for (auto s : samples) {
    if (maxval > 255) out.put(static_cast<char>(s >> 8));
    out.put(static_cast<char>(s & 0xff));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void check_image(const Tensor& image, bool gray_only) {
  if (image.ndim() != 4 || image.size(0) != 1 ||
      (image.size(1) != 1 && (gray_only || image.size(1) != 3))) {
    throw ShapeError("expected a 1 x " + std::string(gray_only ? "1" : "{1,3}") +
                     " x H x W image, got " + to_string(image.shape()));
  }
}

}  // namespace

Tensor read_image(const std::filesystem::path& path, DType dtype) {
  const RawImage raw = read_raw(path);
  const auto& h = raw.header;
  const std::int64_t c = h.kind == '6' ? 3 : 1;
  Tensor out(Shape{1, c, h.height, h.width}, dtype);
  const double scale = 1.0 / static_cast<double>(h.maxval);
  for (std::int64_t y = 0; y < h.height; ++y)
    for (std::int64_t x = 0; x < h.width; ++x)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        out.set((ch * h.height + y) * h.width + x,
                raw.samples[static_cast<std::size_t>((y * h.width + x) * c + ch)] * scale);
      }
  return out;
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  check_image(image, false);
  const std::int64_t c = image.size(1), h = image.size(2), w = image.size(3);
  std::vector<std::uint16_t> samples(static_cast<std::size_t>(c * h * w));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double v = std::clamp(image.at((ch * h + y) * w + x), 0.0, 1.0);
        samples[static_cast<std::size_t>((y * w + x) * c + ch)] =
            static_cast<std::uint16_t>(std::lround(v * 255.0));
      }
  write_raw(path, c == 3 ? '6' : '5', w, h, 255, samples);
}

void write_pgm16(const std::filesystem::path& path, const Tensor& image, double scale) {
  check_image(image, true);
  const std::int64_t h = image.size(2), w = image.size(3);
  std::vector<std::uint16_t> samples(static_cast<std::size_t>(h * w));
  for (std::int64_t i = 0; i < h * w; ++i) {
    const double v = std::clamp(std::round(image.at(i) * scale), 0.0, 65535.0);
    samples[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(v);
  }
  write_raw(path, '5', w, h, 65535, samples);
}

Tensor read_pgm16(const std::filesystem::path& path, double scale, DType dtype) {
  const RawImage raw = read_raw(path);
  if (raw.header.kind != '5') throw IoError(path.string() + ": expected a grayscale PGM");
  Tensor out(Shape{1, 1, raw.header.height, raw.header.width}, dtype);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) {
    out.set(static_cast<std::int64_t>(i), raw.samples[i] / scale);
  }
  return out;
}

}  // namespace dcv
