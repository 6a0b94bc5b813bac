// Copyright 2026 The xptrav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XPTRAV_BINARY_IO_HPP
#define XPTRAV_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace xptrav {

/// Raised when a persisted file has the wrong magic, version, shape, or is
/// cut short. The message names the offending section.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on open/read/write failures of the underlying stream.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace binio {

template <typename T>
T to_little(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

template <typename T>
void write(std::ostream& out, T value) {
  value = to_little(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void write_bytes(std::ostream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

/// u16 length prefix followed by raw UTF-8 bytes.
inline void write_name(std::ostream& out, const std::string& name) {
  if (name.size() > 0xFFFF) throw FormatError("name too long: " + name.substr(0, 32));
  write<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  write_bytes(out, name.data(), name.size());
}

/// Reads one value; `what` is used in the error message when the stream
/// ends early.
template <typename T>
T read(std::istream& in, const std::string& what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw FormatError("truncated file while reading " + what);
  }
  return to_little(value);
}

inline void read_bytes(std::istream& in, void* data, std::size_t size, const std::string& what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (in.gcount() != static_cast<std::streamsize>(size)) {
    throw FormatError("truncated file while reading " + what);
  }
}

inline std::string read_name(std::istream& in, const std::string& what) {
  const auto len = read<std::uint16_t>(in, what + " name length");
  std::string name(len, '\0');
  read_bytes(in, name.data(), len, what + " name");
  return name;
}

template <typename T>
void write_array(std::ostream& out, const T* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes(out, data, count * sizeof(T));
  } else {
    for (std::size_t i = 0; i < count; ++i) write<T>(out, data[i]);
  }
}

template <typename T>
void read_array(std::istream& in, T* data, std::size_t count, const std::string& what) {
  read_bytes(in, data, count * sizeof(T), what);
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < count; ++i) data[i] = to_little(data[i]);
  }
}

/// Checks a 4-byte magic tag at the current position.
inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& kind) {
  char got[4] = {};
  in.read(got, 4);
  if (in.gcount() != 4 || std::memcmp(got, magic, 4) != 0) {
    throw FormatError("bad magic: not a " + kind + " file (expected \"" + std::string(magic, 4) +
                      "\")");
  }
}

}  // namespace binio
}  // namespace xptrav

#endif  // XPTRAV_BINARY_IO_HPP
