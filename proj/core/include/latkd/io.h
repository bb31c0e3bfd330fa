// Copyright 2026 The LATKD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LATKD_IO_H_
#define LATKD_IO_H_

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <type_traits>

#include "latkd/errors.h"

namespace latkd {

std::string ReadFile(const std::filesystem::path& path);

// Writes to a sibling temporary file, flushes it to disk and renames it over
// `path`, so readers observe either the old or the new contents.
// `before_commit`, when set, runs after the temporary file is durable and
// before the rename (fault-injection point for tests).
void WriteFileAtomic(const std::filesystem::path& path, std::string_view bytes,
                     const std::function<void()>& before_commit = {});

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double value);

// Little-endian append-only byte buffer for the binary container formats.
class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void Put(T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    bytes_.append(raw, sizeof(T));
  }
  void PutBytes(std::string_view bytes) { bytes_.append(bytes); }
  void PutString(std::string_view s) {
    Put<std::uint64_t>(s.size());
    bytes_.append(s);
  }
  const std::string& bytes() const { return bytes_; }
  std::string Release() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T Get() {
    Require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }
  std::string_view GetBytes(std::size_t n) {
    Require(n);
    std::string_view out = bytes_.substr(offset_, n);
    offset_ += n;
    return out;
  }
  std::string GetString() {
    const auto n = Get<std::uint64_t>();
    return std::string(GetBytes(n));
  }
  bool AtEnd() const { return offset_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - offset_; }

 private:
  void Require(std::size_t n) const {
    if (bytes_.size() - offset_ < n) {
      throw Error(ErrorCode::kParse, "truncated binary record");
    }
  }

  std::string_view bytes_;
  std::size_t offset_ = 0;
};

}  // namespace latkd

#endif  // LATKD_IO_H_
