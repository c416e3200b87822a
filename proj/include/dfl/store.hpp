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

#include <map>

#include "dfl/bytes.hpp"
#include "dfl/crypto.hpp"

namespace dfl {

// Local content-addressed blob store keyed by digest. Model bytes live
// here; only their digests ever touch the contract.
class ContentStore {
 public:
  Digest put(Bytes data) {
    Digest d = digest(data);
    items_.emplace(d, std::move(data));
    return d;
  }

  const Bytes* get(const Digest& d) const {
    auto it = items_.find(d);
    return it == items_.end() ? nullptr : &it->second;
  }

  size_t size() const { return items_.size(); }

 private:
  std::map<Digest, Bytes> items_;
};

}  // namespace dfl
