#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace roost {

using Bytes = std::vector<std::byte>;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

static_assert(std::endian::native == std::endian::little,
              "wire and checkpoint encodings assume a little-endian host");

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(Bytes& out) : out_(&out) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  ByteWriter& put(T value) {
    const auto* p = reinterpret_cast<const std::byte*>(&value);
    buffer().insert(buffer().end(), p, p + sizeof(T));
    return *this;
  }

  ByteWriter& put_bytes(std::span<const std::byte> data) {
    buffer().insert(buffer().end(), data.begin(), data.end());
    return *this;
  }

  ByteWriter& put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    const auto* p = reinterpret_cast<const std::byte*>(s.data());
    buffer().insert(buffer().end(), p, p + s.size());
    return *this;
  }

  ByteWriter& put_doubles(std::span<const double> v) {
    put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
    for (double x : v) put(x);
    return *this;
  }

  Bytes& buffer() { return out_ ? *out_ : own_; }
  Bytes take() { return std::move(buffer()); }

 private:
  Bytes own_;
  Bytes* out_ = nullptr;
};

/// Bounds-checked little-endian reader; throws FormatError on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> data) : data_(data) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::vector<double> get_doubles() {
    const auto n = get<std::uint32_t>();
    need(std::size_t{n} * sizeof(double));
    std::vector<double> v(n);
    for (auto& x : v) x = get<double>();
    return v;
  }

  std::span<const std::byte> get_bytes(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("truncated byte stream");
  }

  std::span<const std::byte> data_;
  std::size_t pos_ = 0;
};

}  // namespace roost
