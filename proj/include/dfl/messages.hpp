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

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "dfl/bytes.hpp"
#include "dfl/committee.hpp"
#include "dfl/crypto.hpp"

namespace dfl {

// Wire formats for every protocol message. Each struct has a distinct type
// tag so encodings are injective across message types; signatures always
// cover canonical bytes.

enum class Phase : uint8_t { Elect = 0, Pledge = 1, Commit = 2, Work = 3 };

const char* phase_name(Phase p);
Phase phase_from_u8(uint8_t v);

// Currency and incentive scores are integer milli-units end to end.
using Milli = int64_t;
constexpr Milli kMilli = 1000;

// <it, status, money, address, sig>: the replay-defended request core.
struct RequestTuple {
  uint64_t it = 1;  // round
  Phase status = Phase::Pledge;
  Milli money = 0;
  NodeId address;
  Signature sig;

  Bytes signing_bytes() const;
  void sign_with(const KeyPair& kp);
  bool verify_sig(const PublicKey& pk) const;

  void encode(ByteWriter& w) const;
  static RequestTuple decode(ByteReader& r);
};

struct ElectBody {
  Milli pledge_eth = 0;
  uint32_t claimed_acc = 0;  // average historical accuracy in [0,1000]
};

struct PledgeBody {};

struct CommitBody {
  Digest submodel_digest;  // content-store key of the (noised) sub-model
};

struct WorkBody {
  Digest global_digest;
  uint32_t global_score = 0;
  std::vector<std::pair<NodeId, uint32_t>> submodel_scores;  // sorted by NodeId
};

// A participant request: the replay tuple plus the per-phase body.
struct PhasePayload {
  RequestTuple tuple;
  std::variant<ElectBody, PledgeBody, CommitBody, WorkBody> body;

  void encode(ByteWriter& w) const;
  static PhasePayload decode(ByteReader& r);
};

struct ConsensusRequest {
  Digest id;  // digest(payload)
  Bytes payload;
  NodeId sender;
  Signature sig;  // over payload

  static ConsensusRequest make(const PhasePayload& pp, const NodeId& sender,
                               const KeyPair& kp);
  bool verify_sig(const PublicKey& pk) const;

  void encode(ByteWriter& w) const;
  static ConsensusRequest decode(ByteReader& r);
};

struct RequestBatch {
  std::vector<ConsensusRequest> requests;

  Digest digest_of() const;
  void encode(ByteWriter& w) const;
  static RequestBatch decode(ByteReader& r);
};

enum class PbftKind : uint8_t {
  PrePrepare = 0,
  Prepare = 1,
  Commit = 2,
  ViewChange = 3,
};

struct PbftMessage {
  PbftKind kind = PbftKind::PrePrepare;
  uint64_t epoch = 0;   // committee epoch
  uint64_t round = 1;   // instance scope: logs are per (round, phase)
  Phase phase = Phase::Pledge;
  uint32_t view = 0;
  uint64_t seq = 0;
  Digest req_id;  // batch digest
  NodeId sender;
  Signature sig;
  Bytes extra;  // PrePrepare: RequestBatch; ViewChange: prepared certs

  Bytes signing_bytes() const;
  void sign_with(const KeyPair& kp);
  bool verify_sig(const PublicKey& pk) const;

  void encode(ByteWriter& w) const;
  static PbftMessage decode(ByteReader& r);
};

// Prepared instance carried by a ViewChange so the new master can re-propose
// at the same sequence number.
struct PreparedCert {
  uint32_t view = 0;
  uint64_t seq = 0;
  Bytes batch;  // canonical RequestBatch

  void encode(ByteWriter& w) const;
  static PreparedCert decode(ByteReader& r);
};

struct ViewChangePayload {
  std::vector<PreparedCert> prepared;

  void encode(ByteWriter& w) const;
  static ViewChangePayload decode(ByteReader& r);
};

// End<address, type, hash, sig>: a committee node proposes to finalize the
// phase whose local result hashes to `hash`.
struct EndRequest {
  NodeId address;
  Phase type = Phase::Pledge;
  Digest hash;
  Signature sig;

  Bytes signing_bytes() const;
  void sign_with(const KeyPair& kp);
  bool verify_sig(const PublicKey& pk) const;

  void encode(ByteWriter& w) const;
  static EndRequest decode(ByteReader& r);
};

// Reply<address, type, hash, sig, result>: responder attests that its local
// result matches; hash = digest(result).
struct ReplyMsg {
  NodeId address;  // responder
  Phase type = Phase::Pledge;
  Digest hash;
  Signature sig;
  Bytes result;

  Bytes signing_bytes() const;
  void sign_with(const KeyPair& kp);
  bool verify_sig(const PublicKey& pk) const;

  void encode(ByteWriter& w) const;
  static ReplyMsg decode(ByteReader& r);
};

// An End plus >= F+1 matching Replies: the unit of phase finalization.
struct TransitionProof {
  EndRequest end;
  std::vector<ReplyMsg> replies;
  uint64_t round = 1;
  Phase phase = Phase::Pledge;

  Digest digest_of() const;
  void encode(ByteWriter& w) const;
  static TransitionProof decode(ByteReader& r);
};

// ---- Phase results (the bytes every honest replica must agree on) ----

struct ElectResult {
  uint64_t next_epoch = 0;
  std::vector<NodeId> members;  // election order; incumbent on shortfall
};

struct PledgeResult {
  std::vector<std::pair<NodeId, Milli>> stake;  // sorted by NodeId
};

struct CommitResult {
  std::vector<std::pair<NodeId, Digest>> submissions;  // sorted by NodeId
};

struct WorkResult {
  Digest global_digest;
  uint32_t global_score = 0;
  std::vector<std::pair<NodeId, uint32_t>> submodel_scores;  // sorted by NodeId
  std::vector<NodeId> matched_members;     // attestation equal to this result
  std::vector<NodeId> unanswered_members;  // no attestation executed
};

struct PhaseResult {
  uint64_t round = 1;
  Phase phase = Phase::Pledge;
  uint64_t pbft_view = 0;  // view-change counter, so the master is auditable
  std::variant<ElectResult, PledgeResult, CommitResult, WorkResult> body;

  void encode(ByteWriter& w) const;
  static PhaseResult decode(ByteReader& r);
};

// ---- Contract events ----

struct EventRecord {
  uint64_t seq = 0;
  uint64_t block = 0;
  std::string kind;
  Bytes payload;

  void encode(ByteWriter& w) const;
  static EventRecord decode(ByteReader& r);
};

namespace event_kind {
inline constexpr const char* kInitialized = "initialized";
inline constexpr const char* kRegistered = "registered";
inline constexpr const char* kPhaseFinalized = "phase-finalized";
inline constexpr const char* kReplayFlagged = "replay-flagged";
inline constexpr const char* kDuplicateProof = "duplicate-proof";
inline constexpr const char* kWarning = "warning";
}  // namespace event_kind

// The state-change event payload: everything a stalled node needs to
// fast-forward. Digests, scores and node lists only — never model weights.
struct PhaseFinalizedEvent {
  uint64_t round = 1;
  Phase phase = Phase::Pledge;
  Bytes result;  // canonical PhaseResult
  Digest proof_digest;
  uint64_t next_round = 1;
  Phase next_phase = Phase::Pledge;
  CommitteeView committee;  // post-application view
  uint64_t gas_used = 0;
  NodeId caller;

  void encode(ByteWriter& w) const;
  static PhaseFinalizedEvent decode(ByteReader& r);
};

struct ReplayFlaggedEvent {
  uint64_t round = 1;
  Phase phase = Phase::Pledge;
  RequestTuple tuple;

  void encode(ByteWriter& w) const;
  static ReplayFlaggedEvent decode(ByteReader& r);
};

// Genesis broadcast: every parameter a node needs to join in, including the
// registry of node verification keys (public information held on-chain).
struct InitEvent {
  uint32_t need = 4;
  uint64_t elect_times = 2;
  double weight_p = 0.3;
  Digest initial_global_model;
  CommitteeView committee;
  uint64_t round = 1;
  Phase phase = Phase::Pledge;
  double dp_eps = 1.0;
  double dp_delta = 1e-5;
  double dp_clip = 1.0;
  bool dp_enabled = true;
  std::vector<std::pair<NodeId, PublicKey>> registry;

  void encode(ByteWriter& w) const;
  static InitEvent decode(ByteReader& r);
};

struct RegisteredEvent {
  NodeId node;
  PublicKey pk;
  Milli deposit = 0;

  void encode(ByteWriter& w) const;
  static RegisteredEvent decode(ByteReader& r);
};

// ---- Top-level wire envelope for node-to-node traffic ----

using WireMessage = std::variant<ConsensusRequest, PbftMessage, EndRequest, ReplyMsg>;

Bytes wire_encode(const WireMessage& m);
std::optional<WireMessage> wire_decode(const Bytes& b);

}  // namespace dfl
