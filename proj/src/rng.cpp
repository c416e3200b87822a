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

#include "dfl/rng.hpp"

#include "dfl/crypto.hpp"

namespace dfl {

Rng Rng::derive(uint64_t seed, const std::string& purpose, uint64_t index) {
  ByteWriter w;
  w.u64(seed);
  w.str(purpose);
  w.u64(index);
  Digest d = digest(w.bytes());
  uint64_t sub = 0;
  for (int i = 0; i < 8; ++i) sub = (sub << 8) | d.bytes[i];
  return Rng(sub);
}

}  // namespace dfl
