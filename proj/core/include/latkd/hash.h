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

#ifndef LATKD_HASH_H_
#define LATKD_HASH_H_

#include <span>
#include <string>
#include <string_view>

namespace latkd {

// Lowercase hex SHA-256 digest (64 characters).
std::string Sha256Hex(std::string_view bytes);

// Incremental form for hashing large numeric buffers without a copy.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void Update(std::string_view bytes);
  template <typename T>
  void UpdateRaw(std::span<const T> values) {
    Update(std::string_view(reinterpret_cast<const char*>(values.data()),
                            values.size_bytes()));
  }
  std::string FinalHex();

 private:
  struct Impl;
  Impl* impl_;
};

bool IsHexDigest(std::string_view s);

}  // namespace latkd

#endif  // LATKD_HASH_H_
