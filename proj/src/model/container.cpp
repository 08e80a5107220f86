#include "cpath/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include <zlib.h>

#include "cpath/errors.hpp"

namespace cpath::io {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'L', 'H'};

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  std::uint8_t raw[sizeof(U)];
  std::memcpy(raw, &value, sizeof(U));
  out.insert(out.end(), raw, raw + sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }

  void read(void* dst, std::size_t n, const char* what) {
    need(n, what);
    if (n) std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > end_ - pos_) throw ParseError(std::string("container truncated while reading ") + what);
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint64_t element_count(const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

}  // namespace

Entry Entry::floats(std::string name, std::vector<std::uint64_t> dims, std::vector<float> values) {
  Entry e;
  e.name = std::move(name);
  e.dtype = DType::f32;
  e.dims = std::move(dims);
  e.f32 = std::move(values);
  return e;
}

Entry Entry::text(std::string name, const std::string& value) {
  Entry e;
  e.name = std::move(name);
  e.dtype = DType::u8;
  e.dims = {value.size()};
  e.bytes.assign(value.begin(), value.end());
  return e;
}

std::string Entry::as_text() const {
  return std::string(bytes.begin(), bytes.end());
}

std::vector<std::uint8_t> encode_container(const std::vector<Entry>& entries) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kContainerVersion);
  const std::size_t payload_start = out.size();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  std::unordered_set<std::string> names;
  for (const auto& e : entries) {
    if (!names.insert(e.name).second) throw ContractError("duplicate container entry '" + e.name + "'");
    const std::uint64_t count = element_count(e.dims);
    const std::size_t stored = e.dtype == DType::f32 ? e.f32.size() : e.bytes.size();
    if (count != stored) throw DimensionError("entry '" + e.name + "' dims do not match its payload");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) put<std::uint64_t>(out, d);
    if (e.dtype == DType::f32) {
      const auto* raw = reinterpret_cast<const std::uint8_t*>(e.f32.data());
      out.insert(out.end(), raw, raw + e.f32.size() * sizeof(float));
    } else {
      out.insert(out.end(), e.bytes.begin(), e.bytes.end());
    }
  }
  put<std::uint32_t>(out, crc_of(out.data() + payload_start, out.size() - payload_start));
  return out;
}

std::vector<Entry> decode_container(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8) throw ParseError("container truncated: missing header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("not a container file (bad magic)");
  Reader header(bytes, bytes.size());
  header.seek(4);
  const auto version = header.get<std::uint32_t>("version");
  if (version != kContainerVersion) {
    throw VersionError("unsupported container version " + std::to_string(version) + " (expected " +
                       std::to_string(kContainerVersion) + ")");
  }
  if (bytes.size() < 16) throw ParseError("container truncated: missing entry table");
  const std::size_t payload_end = bytes.size() - 4;
  Reader in(bytes, payload_end);
  in.seek(8);
  const auto count = in.get<std::uint32_t>("entry count");
  std::vector<Entry> entries;
  std::unordered_set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const auto name_len = in.get<std::uint32_t>("name length");
    e.name.resize(name_len);
    in.read(e.name.data(), name_len, "name");
    const auto dtype = in.get<std::uint8_t>("dtype");
    if (dtype != static_cast<std::uint8_t>(DType::f32) && dtype != static_cast<std::uint8_t>(DType::u8)) {
      throw ParseError("entry '" + e.name + "' has unknown dtype code " + std::to_string(dtype));
    }
    e.dtype = static_cast<DType>(dtype);
    const auto rank = in.get<std::uint32_t>("rank");
    if (rank > 16) throw ParseError("entry '" + e.name + "' has implausible rank");
    for (std::uint32_t r = 0; r < rank; ++r) e.dims.push_back(in.get<std::uint64_t>("dims"));
    const std::uint64_t n = element_count(e.dims);
    const std::uint64_t width = e.dtype == DType::f32 ? sizeof(float) : 1;
    if (n > (payload_end - in.pos()) / width) throw ParseError("container truncated in entry '" + e.name + "'");
    if (e.dtype == DType::f32) {
      e.f32.resize(n);
      in.read(e.f32.data(), n * sizeof(float), "payload");
    } else {
      e.bytes.resize(n);
      in.read(e.bytes.data(), n, "payload");
    }
    if (!names.insert(e.name).second) throw ParseError("duplicate entry name '" + e.name + "'");
    entries.push_back(std::move(e));
  }
  if (in.pos() != payload_end) throw ParseError("container has trailing bytes after its entries");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + payload_end, 4);
  if (stored != crc_of(bytes.data() + 8, payload_end - 8)) throw ChecksumError("container CRC32 mismatch");
  return entries;
}

void write_container(const std::filesystem::path& path, const std::vector<Entry>& entries) {
  const auto bytes = encode_container(entries);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<Entry> read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

}  // namespace cpath::io
