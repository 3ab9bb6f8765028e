#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fskey {

// Growable bit sequence, most significant bit first.
class BitString {
 public:
  BitString() = default;

  // Appends the low `width` bits of `value`, MSB first. width <= 64.
  void append(std::uint64_t value, int width);
  void append(const BitString& other);

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  bool operator[](std::size_t i) const { return bits_[i]; }

  // Reads `width` bits starting at `offset` as an unsigned integer.
  std::uint64_t read(std::size_t offset, int width) const;

  // Big-endian byte packing, zero-padded to a byte boundary.
  std::vector<std::uint8_t> packed() const;

  std::string to_string() const;  // "0101..."
  std::string to_hex() const;     // hex of packed(); empty string for no bits

  friend bool operator==(const BitString&, const BitString&) = default;

 private:
  std::vector<bool> bits_;
};

}  // namespace fskey
