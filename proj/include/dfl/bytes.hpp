//
// Copyright 2026 The dflsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfl {

using Bytes = std::vector<uint8_t>;

std::string to_hex(const uint8_t* data, size_t len);
std::string to_hex(const Bytes& b);
std::optional<Bytes> from_hex(const std::string& hex);

// Thrown on malformed wire data. Callers on network paths catch it and drop
// the message; it is never expected on locally produced encodings.
class CodecError : public std::runtime_error {
 public:
  explicit CodecError(const std::string& what) : std::runtime_error(what) {}
};

// Canonical encoding: fixed field order, big-endian integers, u32 length
// prefixes on variable-size fields. Injective by construction so digests and
// signatures over encodings identify the message uniquely.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u32(uint32_t v) {
    for (int i = 3; i >= 0; --i) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 7; i >= 0; --i) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void raw(const uint8_t* data, size_t len) { buf_.insert(buf_.end(), data, data + len); }
  template <size_t N>
  void fixed(const std::array<uint8_t, N>& a) {
    raw(a.data(), N);
  }
  void blob(const Bytes& b) {
    u32(static_cast<uint32_t>(b.size()));
    raw(b.data(), b.size());
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }

  const Bytes& bytes() const { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const Bytes& b) : data_(b.data()), size_(b.size()) {}
  ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }
  int64_t i64() { return static_cast<int64_t>(u64()); }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  template <size_t N>
  std::array<uint8_t, N> fixed() {
    need(N);
    std::array<uint8_t, N> a;
    std::memcpy(a.data(), data_ + pos_, N);
    pos_ += N;
    return a;
  }
  Bytes blob() {
    uint32_t len = u32();
    need(len);
    Bytes b(data_ + pos_, data_ + pos_ + len);
    pos_ += len;
    return b;
  }
  std::string str() {
    uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
    pos_ += len;
    return s;
  }

  size_t remaining() const { return size_ - pos_; }
  void expect_end() const {
    if (pos_ != size_) throw CodecError("trailing bytes after message");
  }

 private:
  void need(size_t n) const {
    if (size_ - pos_ < n) throw CodecError("truncated message");
  }
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

// decode(encode(m)) == m round trips; see tests for the property check.
template <typename T>
Bytes encode(const T& msg) {
  ByteWriter w;
  msg.encode(w);
  return w.take();
}

template <typename T>
T decode(const Bytes& b) {
  ByteReader r(b);
  T msg = T::decode(r);
  r.expect_end();
  return msg;
}

template <typename T>
std::optional<T> try_decode(const Bytes& b) {
  try {
    return decode<T>(b);
  } catch (const CodecError&) {
    return std::nullopt;
  }
}

}  // namespace dfl
