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
#include <compare>
#include <cstdint>
#include <string>
#include <utility>

#include "dfl/bytes.hpp"

namespace dfl {

// Node identities, hashing and signatures. SHA-256 for digests, Ed25519 for
// signatures; a NodeId is the SHA-256 of the node's verification key, so it
// is stable across rounds and unique per key.

struct Digest {
  std::array<uint8_t, 32> bytes{};

  auto operator<=>(const Digest&) const = default;
  std::string hex() const { return to_hex(bytes.data(), bytes.size()); }
  void encode(ByteWriter& w) const { w.fixed(bytes); }
  static Digest decode(ByteReader& r) { return Digest{r.fixed<32>()}; }
};

struct NodeId {
  std::array<uint8_t, 32> bytes{};

  auto operator<=>(const NodeId&) const = default;
  std::string hex() const { return to_hex(bytes.data(), bytes.size()); }
  // Short prefix for logs and CSV rows.
  std::string short_hex() const { return to_hex(bytes.data(), 4); }
  void encode(ByteWriter& w) const { w.fixed(bytes); }
  static NodeId decode(ByteReader& r) { return NodeId{r.fixed<32>()}; }
};

struct Signature {
  std::array<uint8_t, 64> bytes{};

  bool operator==(const Signature&) const = default;
  void encode(ByteWriter& w) const { w.fixed(bytes); }
  static Signature decode(ByteReader& r) { return Signature{r.fixed<64>()}; }
};

struct PublicKey {
  std::array<uint8_t, 32> bytes{};

  bool operator==(const PublicKey&) const = default;
  void encode(ByteWriter& w) const { w.fixed(bytes); }
  static PublicKey decode(ByteReader& r) { return PublicKey{r.fixed<32>()}; }
};

struct KeyPair {
  PublicKey public_key;
  std::array<uint8_t, 64> secret_key{};
};

Digest digest(const uint8_t* data, size_t len);
Digest digest(const Bytes& data);
Digest digest(const std::string& data);

// Deterministic: one seed, one identity. Distinct seeds give distinct ids.
std::pair<NodeId, KeyPair> generate_identity(uint64_t seed);

NodeId node_id_of(const PublicKey& pk);

Signature sign(const KeyPair& kp, const Bytes& data);
// False on a wrong key, tampered data or malformed signature; never throws.
bool verify(const PublicKey& pk, const Bytes& data, const Signature& sig);

}  // namespace dfl
