#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <zlib.h>

#include "trimsgd/dataio.hpp"
#include "trimsgd/error.hpp"

namespace trimsgd {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in, const std::string& name) {
  z_stream zs{};
  // 16 + MAX_WBITS selects the gzip wrapper.
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw FileError("zlib init failed for " + name);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof chunk;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("corrupt gzip stream in " + name);
    }
    out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw LengthError("truncated gzip stream in " + name);
    }
  }
  inflateEnd(&zs);
  return out;
}

}  // namespace

IdxData parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    throw LengthError("IDX header: expected at least 4 bytes, got " + std::to_string(bytes.size()));
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  std::size_t rank = 0;
  if (magic == kIdxLabelMagic) {
    rank = 1;
  } else if (magic == kIdxImageMagic) {
    rank = 3;
  } else {
    throw FormatError("IDX magic " + hex32(magic) + " is not " + hex32(kIdxLabelMagic) + " or " +
                      hex32(kIdxImageMagic));
  }
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) {
    throw LengthError("IDX header: expected " + std::to_string(header) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  IdxData out;
  std::size_t expected = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * i));
    expected *= out.dims.back();
  }
  const std::size_t actual = bytes.size() - header;
  if (actual != expected) {
    throw LengthError("IDX payload: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(actual));
  }
  out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B) return gunzip(bytes, path.string());
  return bytes;
}

RealArray normalize(std::span<const std::uint8_t> raw) {
  if (raw.empty()) throw InputError("normalize: no pixels");
  std::vector<double> values(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) values[i] = static_cast<double>(raw[i]) / 255.0;
  return RealArray({raw.size()}, std::move(values));
}

}  // namespace trimsgd
