#include "fskey/bitstring.hpp"

#include <cassert>

namespace fskey {

void BitString::append(std::uint64_t value, int width) {
  assert(width >= 0 && width <= 64);
  for (int b = width - 1; b >= 0; --b) bits_.push_back(((value >> b) & 1U) != 0);
}

void BitString::append(const BitString& other) {
  bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
}

std::uint64_t BitString::read(std::size_t offset, int width) const {
  assert(offset + static_cast<std::size_t>(width) <= bits_.size());
  std::uint64_t value = 0;
  for (int b = 0; b < width; ++b) value = (value << 1) | (bits_[offset + b] ? 1U : 0U);
  return value;
}

std::vector<std::uint8_t> BitString::packed() const {
  std::vector<std::uint8_t> bytes((bits_.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  }
  return bytes;
}

std::string BitString::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (bool b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

std::string BitString::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  for (std::uint8_t byte : packed()) {
    s.push_back(kDigits[byte >> 4]);
    s.push_back(kDigits[byte & 0x0F]);
  }
  return s;
}

}  // namespace fskey
