/**
 * Copyright 2026 The sydnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SYDNET_SRC_BINARY_IO_HPP_
#define SYDNET_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "sydnet/error.hpp"

namespace syd::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename V>
void write_le(std::ostream& os, V value) {
  static_assert(std::is_trivially_copyable_v<V>);
  os.write(reinterpret_cast<const char*>(&value), sizeof(V));
}

inline void write_bytes(std::ostream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

/// Reads little-endian values and tracks the byte offset for error reports.
class BinaryReader {
 public:
  BinaryReader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  template <typename V>
  V read(const char* field) {
    V value{};
    read_bytes(&value, sizeof(V), field);
    return value;
  }

  void read_bytes(void* dst, std::size_t n, const char* field) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw FormatError(what_ + ": truncated while reading " + field, offset_ + static_cast<std::uint64_t>(is_.gcount()));
    }
    offset_ += n;
  }

  std::uint64_t offset() const { return offset_; }
  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& is_;
  std::string what_;
  std::uint64_t offset_ = 0;
};

}  // namespace syd::detail

#endif  // SYDNET_SRC_BINARY_IO_HPP_
