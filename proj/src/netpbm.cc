#include "terrafuse/netpbm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "terrafuse/error.hpp"

namespace terrafuse {

void write_netpbm(const ImageBuffer& image, const std::filesystem::path& path) {
  image.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << (image.channels == 1 ? "P5" : "P6") << '\n'
      << image.width << ' ' << image.height << '\n'
      << image.max_value() << '\n';
  std::vector<char> bytes;
  if (image.bit_depth == 8) {
    bytes.assign(image.pixels.begin(), image.pixels.end());
  } else {
    bytes.reserve(image.pixels.size() * 2);
    for (std::uint16_t p : image.pixels) {
      bytes.push_back(static_cast<char>(p >> 8));
      bytes.push_back(static_cast<char>(p & 0xFF));
    }
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::vector<unsigned char>& data, std::size_t& pos) {
  while (pos < data.size()) {
    if (data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(data[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < data.size() && !std::isspace(data[pos])) tok.push_back(static_cast<char>(data[pos++]));
  return tok;
}

}  // namespace

ImageBuffer read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingPayload, "cannot open image " + path.string());
  const std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  const std::string magic = header_token(data, pos);
  if (magic != "P5" && magic != "P6") {
    fail(ErrorCode::kParseError, path.string() + ": not a binary PGM/PPM file");
  }
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(header_token(data, pos));
    h = std::stoi(header_token(data, pos));
    maxval = std::stoi(header_token(data, pos));
  } catch (const std::exception&) {
    fail(ErrorCode::kParseError, path.string() + ": malformed header");
  }
  ++pos;  // single whitespace before the raster
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    fail(ErrorCode::kParseError, path.string() + ": invalid header values");
  }
  const int channels = magic == "P5" ? 1 : 3;
  ImageBuffer image(w, h, channels, maxval > 255 ? 16 : 8);
  const std::size_t bps = maxval > 255 ? 2 : 1;
  if (data.size() < pos + image.pixels.size() * bps) {
    fail(ErrorCode::kParseError, path.string() + ": truncated raster");
  }
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    image.pixels[i] = bps == 1 ? data[pos + i]
                               : static_cast<std::uint16_t>((data[pos + 2 * i] << 8) |
                                                            data[pos + 2 * i + 1]);
  }
  return image;
}

}  // namespace terrafuse
