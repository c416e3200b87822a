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

#include "dfl/crypto.hpp"

#include <sodium.h>

#include <mutex>

namespace dfl {

namespace {

void ensure_sodium() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
  });
}

}  // namespace

std::string to_hex(const uint8_t* data, size_t len) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (size_t i = 0; i < len; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xf]);
  }
  return out;
}

std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

std::optional<Bytes> from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(uint8_t(hi << 4 | lo));
  }
  return out;
}

Digest digest(const uint8_t* data, size_t len) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), data, len);
  return d;
}

Digest digest(const Bytes& data) { return digest(data.data(), data.size()); }

Digest digest(const std::string& data) {
  return digest(reinterpret_cast<const uint8_t*>(data.data()), data.size());
}

NodeId node_id_of(const PublicKey& pk) {
  Digest d = digest(pk.bytes.data(), pk.bytes.size());
  return NodeId{d.bytes};
}

std::pair<NodeId, KeyPair> generate_identity(uint64_t seed) {
  ensure_sodium();
  // Stretch the 64-bit seed to the 32-byte Ed25519 seed.
  ByteWriter w;
  w.str("dflsim/identity/v1");
  w.u64(seed);
  Digest ed_seed = digest(w.bytes());

  KeyPair kp;
  crypto_sign_seed_keypair(kp.public_key.bytes.data(), kp.secret_key.data(),
                           ed_seed.bytes.data());
  return {node_id_of(kp.public_key), kp};
}

Signature sign(const KeyPair& kp, const Bytes& data) {
  ensure_sodium();
  Signature sig;
  crypto_sign_detached(sig.bytes.data(), nullptr, data.data(), data.size(),
                       kp.secret_key.data());
  return sig;
}

bool verify(const PublicKey& pk, const Bytes& data, const Signature& sig) {
  ensure_sodium();
  return crypto_sign_verify_detached(sig.bytes.data(), data.data(), data.size(),
                                     pk.bytes.data()) == 0;
}

}  // namespace dfl
