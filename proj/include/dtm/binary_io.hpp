#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace dtm::io {

/// Little-endian writer for fixed-layout binary formats.
class LeWriter {
 public:
  explicit LeWriter(std::ostream& os) : os_(os) {}

  void magic(std::string_view m) { os_.write(m.data(), static_cast<std::streamsize>(m.size())); }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    std::array<char, sizeof(T)> buf;
    std::memcpy(buf.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
    os_.write(buf.data(), sizeof(T));
  }

  template <typename T>
  void put_array(const T* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) put(data[i]);
  }

  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  void put_bytes(const std::vector<std::uint8_t>& bytes) {
    os_.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }

  void check() const {
    if (!os_) throw std::runtime_error("write failed");
  }

 private:
  std::ostream& os_;
};

/// Little-endian reader; every short read throws with the byte offset.
class LeReader {
 public:
  explicit LeReader(std::istream& is) : is_(is) {}

  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    read_raw(got.data(), got.size());
    if (got != m)
      throw std::runtime_error("bad magic at offset 0: expected '" + std::string(m) + "'");
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    std::array<char, sizeof(T)> buf;
    read_raw(buf.data(), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
    T v;
    std::memcpy(&v, buf.data(), sizeof(T));
    return v;
  }

  template <typename T>
  void get_array(T* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) data[i] = get<T>();
  }

  std::string get_string(std::uint32_t max_len = 1u << 20) {
    const auto n = get<std::uint32_t>();
    if (n > max_len) throw std::runtime_error("string length out of range at offset " + pos());
    std::string s(n, '\0');
    read_raw(s.data(), n);
    return s;
  }

  std::vector<std::uint8_t> get_bytes(std::size_t n) {
    std::vector<std::uint8_t> out(n);
    read_raw(reinterpret_cast<char*>(out.data()), n);
    return out;
  }

  std::size_t offset() const { return offset_; }

 private:
  std::string pos() const { return std::to_string(offset_); }

  void read_raw(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw std::runtime_error("truncated input at offset " +
                               std::to_string(offset_ + static_cast<std::size_t>(is_.gcount())));
    offset_ += n;
  }

  std::istream& is_;
  std::size_t offset_ = 0;
};

}  // namespace dtm::io
