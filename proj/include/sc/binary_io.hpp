#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace sc::io {

void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
void put_f32s(std::string& out, std::span<const float> values);
// Doubles are narrowed to float32 on write.
void put_f32s(std::string& out, std::span<const double> values);

// Forward-only reader over an in-memory file image.
class ByteCursor {
 public:
  explicit ByteCursor(std::string_view bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::string_view take(std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  float f32();
  void f32s(std::span<float> out);
  void f32s(std::span<double> out);

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

// "<magic><u32 LE length><JSON header>"; the payload follows.
void put_framed_header(std::string& out, std::string_view magic,
                       const nlohmann::json& header);
nlohmann::json take_framed_header(ByteCursor& cur, std::string_view magic);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace sc::io
