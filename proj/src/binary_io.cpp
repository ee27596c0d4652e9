#include "sc/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "sc/error.hpp"

namespace sc::io {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_f32s(std::string& out, std::span<const float> values) {
  out.reserve(out.size() + 4 * values.size());
  for (float v : values) put_f32(out, v);
}

void put_f32s(std::string& out, std::span<const double> values) {
  out.reserve(out.size() + 4 * values.size());
  for (double v : values) put_f32(out, static_cast<float>(v));
}

std::string_view ByteCursor::take(std::size_t n) {
  require(n <= remaining(), "truncated file");
  auto s = bytes_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::uint8_t ByteCursor::u8() { return static_cast<std::uint8_t>(take(1)[0]); }

std::uint32_t ByteCursor::u32() {
  const auto s = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(s[i]);
  return v;
}

float ByteCursor::f32() { return std::bit_cast<float>(u32()); }

void ByteCursor::f32s(std::span<float> out) {
  for (auto& v : out) v = f32();
}

void ByteCursor::f32s(std::span<double> out) {
  for (auto& v : out) v = static_cast<double>(f32());
}

void put_framed_header(std::string& out, std::string_view magic,
                       const nlohmann::json& header) {
  out.append(magic);
  const std::string text = header.dump();
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
}

nlohmann::json take_framed_header(ByteCursor& cur, std::string_view magic) {
  require(cur.remaining() >= magic.size() && cur.take(magic.size()) == magic,
          "bad magic: expected \"" + std::string(magic) + "\"");
  const std::uint32_t len = cur.u32();
  require(len <= cur.remaining(), "header length exceeds file size");
  const auto text = cur.take(len);
  auto header = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  require(header.is_object(), "malformed JSON header");
  return header;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), "cannot write " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail("cannot write " + path.string());
  }
}

}  // namespace sc::io
