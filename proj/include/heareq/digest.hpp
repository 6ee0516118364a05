#pragma once

#include <complex>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace heareq {

// FNV-1a over raw bytes; used for content fingerprints and for deriving
// parameter-keyed random substreams. Stable across platforms because it
// only ever sees explicit byte sequences.
class Digest {
public:
  Digest& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x00000100000001b3ull;
    }
    return *this;
  }

  Digest& add(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return add(bits);
  }
  Digest& add(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    return bytes(b, 8);
  }
  Digest& add(int v) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
  Digest& add(const std::complex<double>& v) { return add(v.real()).add(v.imag()); }
  Digest& add(const std::string& s) {
    add(static_cast<std::uint64_t>(s.size()));
    return bytes(s.data(), s.size());
  }
  template <typename T>
  Digest& add(const std::vector<T>& v) {
    add(static_cast<std::uint64_t>(v.size()));
    for (const T& x : v) add(x);
    return *this;
  }

  std::uint64_t value() const { return state_; }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i)
      out[15 - i] = digits[(state_ >> (4 * i)) & 0xf];
    return out;
  }

private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace heareq
