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

#include "dfl/messages.hpp"

namespace dfl {

namespace {

// Type tags keep encodings injective across message kinds.
enum Tag : uint8_t {
  kTagRequestTuple = 1,
  kTagConsensusRequest = 2,
  kTagPbftMessage = 3,
  kTagEndRequest = 4,
  kTagReplyMsg = 5,
  kTagTransitionProof = 6,
  kTagEventRecord = 7,
  // 8 is ModelParams (see fl.cpp)
  kTagPhasePayload = 9,
  kTagPhaseResult = 10,
  kTagPreparedCert = 11,
  kTagRequestBatch = 12,
  kTagViewChangePayload = 13,
  kTagPhaseFinalizedEvent = 14,
  kTagReplayFlaggedEvent = 15,
  kTagInitEvent = 16,
  kTagRegisteredEvent = 17,
};

void check_tag(ByteReader& r, uint8_t expected, const char* what) {
  if (r.u8() != expected) throw CodecError(std::string("bad tag for ") + what);
}

}  // namespace

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Elect: return "elect";
    case Phase::Pledge: return "pledge";
    case Phase::Commit: return "commit";
    case Phase::Work: return "work";
  }
  return "?";
}

Phase phase_from_u8(uint8_t v) {
  if (v > 3) throw CodecError("bad phase value");
  return static_cast<Phase>(v);
}

// ---- RequestTuple ----

Bytes RequestTuple::signing_bytes() const {
  ByteWriter w;
  w.u8(kTagRequestTuple);
  w.u64(it);
  w.u8(static_cast<uint8_t>(status));
  w.i64(money);
  address.encode(w);
  return w.take();
}

void RequestTuple::sign_with(const KeyPair& kp) { sig = sign(kp, signing_bytes()); }

bool RequestTuple::verify_sig(const PublicKey& pk) const {
  return verify(pk, signing_bytes(), sig);
}

void RequestTuple::encode(ByteWriter& w) const {
  w.u8(kTagRequestTuple);
  w.u64(it);
  w.u8(static_cast<uint8_t>(status));
  w.i64(money);
  address.encode(w);
  sig.encode(w);
}

RequestTuple RequestTuple::decode(ByteReader& r) {
  check_tag(r, kTagRequestTuple, "RequestTuple");
  RequestTuple t;
  t.it = r.u64();
  t.status = phase_from_u8(r.u8());
  t.money = r.i64();
  t.address = NodeId::decode(r);
  t.sig = Signature::decode(r);
  return t;
}

// ---- PhasePayload ----

void PhasePayload::encode(ByteWriter& w) const {
  w.u8(kTagPhasePayload);
  tuple.encode(w);
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, ElectBody>) {
          w.i64(b.pledge_eth);
          w.u32(b.claimed_acc);
        } else if constexpr (std::is_same_v<T, CommitBody>) {
          b.submodel_digest.encode(w);
        } else if constexpr (std::is_same_v<T, WorkBody>) {
          b.global_digest.encode(w);
          w.u32(b.global_score);
          w.u32(static_cast<uint32_t>(b.submodel_scores.size()));
          for (const auto& [node, score] : b.submodel_scores) {
            node.encode(w);
            w.u32(score);
          }
        }
      },
      body);
}

PhasePayload PhasePayload::decode(ByteReader& r) {
  check_tag(r, kTagPhasePayload, "PhasePayload");
  PhasePayload p;
  p.tuple = RequestTuple::decode(r);
  switch (p.tuple.status) {
    case Phase::Elect: {
      ElectBody b;
      b.pledge_eth = r.i64();
      b.claimed_acc = r.u32();
      p.body = b;
      break;
    }
    case Phase::Pledge:
      p.body = PledgeBody{};
      break;
    case Phase::Commit: {
      CommitBody b;
      b.submodel_digest = Digest::decode(r);
      p.body = b;
      break;
    }
    case Phase::Work: {
      WorkBody b;
      b.global_digest = Digest::decode(r);
      b.global_score = r.u32();
      uint32_t n = r.u32();
      b.submodel_scores.reserve(n);
      for (uint32_t i = 0; i < n; ++i) {
        NodeId node = NodeId::decode(r);
        uint32_t score = r.u32();
        b.submodel_scores.emplace_back(node, score);
      }
      p.body = b;
      break;
    }
  }
  return p;
}

// ---- ConsensusRequest ----

ConsensusRequest ConsensusRequest::make(const PhasePayload& pp, const NodeId& sender,
                                        const KeyPair& kp) {
  ConsensusRequest req;
  req.payload = dfl::encode(pp);
  req.id = digest(req.payload);
  req.sender = sender;
  req.sig = sign(kp, req.payload);
  return req;
}

bool ConsensusRequest::verify_sig(const PublicKey& pk) const {
  return verify(pk, payload, sig);
}

void ConsensusRequest::encode(ByteWriter& w) const {
  w.u8(kTagConsensusRequest);
  id.encode(w);
  w.blob(payload);
  sender.encode(w);
  sig.encode(w);
}

ConsensusRequest ConsensusRequest::decode(ByteReader& r) {
  check_tag(r, kTagConsensusRequest, "ConsensusRequest");
  ConsensusRequest req;
  req.id = Digest::decode(r);
  req.payload = r.blob();
  req.sender = NodeId::decode(r);
  req.sig = Signature::decode(r);
  if (req.id != digest(req.payload)) throw CodecError("request id != digest(payload)");
  return req;
}

// ---- RequestBatch ----

Digest RequestBatch::digest_of() const { return digest(dfl::encode(*this)); }

void RequestBatch::encode(ByteWriter& w) const {
  w.u8(kTagRequestBatch);
  w.u32(static_cast<uint32_t>(requests.size()));
  for (const auto& req : requests) req.encode(w);
}

RequestBatch RequestBatch::decode(ByteReader& r) {
  check_tag(r, kTagRequestBatch, "RequestBatch");
  RequestBatch b;
  uint32_t n = r.u32();
  b.requests.reserve(n);
  for (uint32_t i = 0; i < n; ++i) b.requests.push_back(ConsensusRequest::decode(r));
  return b;
}

// ---- PbftMessage ----

Bytes PbftMessage::signing_bytes() const {
  ByteWriter w;
  w.u8(kTagPbftMessage);
  w.u8(static_cast<uint8_t>(kind));
  w.u64(epoch);
  w.u64(round);
  w.u8(static_cast<uint8_t>(phase));
  w.u32(view);
  w.u64(seq);
  req_id.encode(w);
  sender.encode(w);
  digest(extra).encode(w);
  return w.take();
}

void PbftMessage::sign_with(const KeyPair& kp) { sig = sign(kp, signing_bytes()); }

bool PbftMessage::verify_sig(const PublicKey& pk) const {
  return verify(pk, signing_bytes(), sig);
}

void PbftMessage::encode(ByteWriter& w) const {
  w.u8(kTagPbftMessage);
  w.u8(static_cast<uint8_t>(kind));
  w.u64(epoch);
  w.u64(round);
  w.u8(static_cast<uint8_t>(phase));
  w.u32(view);
  w.u64(seq);
  req_id.encode(w);
  sender.encode(w);
  sig.encode(w);
  w.blob(extra);
}

PbftMessage PbftMessage::decode(ByteReader& r) {
  check_tag(r, kTagPbftMessage, "PbftMessage");
  PbftMessage m;
  uint8_t k = r.u8();
  if (k > 3) throw CodecError("bad pbft kind");
  m.kind = static_cast<PbftKind>(k);
  m.epoch = r.u64();
  m.round = r.u64();
  m.phase = phase_from_u8(r.u8());
  m.view = r.u32();
  m.seq = r.u64();
  m.req_id = Digest::decode(r);
  m.sender = NodeId::decode(r);
  m.sig = Signature::decode(r);
  m.extra = r.blob();
  return m;
}

// ---- PreparedCert / ViewChangePayload ----

void PreparedCert::encode(ByteWriter& w) const {
  w.u8(kTagPreparedCert);
  w.u32(view);
  w.u64(seq);
  w.blob(batch);
}

PreparedCert PreparedCert::decode(ByteReader& r) {
  check_tag(r, kTagPreparedCert, "PreparedCert");
  PreparedCert c;
  c.view = r.u32();
  c.seq = r.u64();
  c.batch = r.blob();
  return c;
}

void ViewChangePayload::encode(ByteWriter& w) const {
  w.u8(kTagViewChangePayload);
  w.u32(static_cast<uint32_t>(prepared.size()));
  for (const auto& c : prepared) c.encode(w);
}

ViewChangePayload ViewChangePayload::decode(ByteReader& r) {
  check_tag(r, kTagViewChangePayload, "ViewChangePayload");
  ViewChangePayload p;
  uint32_t n = r.u32();
  p.prepared.reserve(n);
  for (uint32_t i = 0; i < n; ++i) p.prepared.push_back(PreparedCert::decode(r));
  return p;
}

// ---- EndRequest ----

Bytes EndRequest::signing_bytes() const {
  ByteWriter w;
  w.u8(kTagEndRequest);
  address.encode(w);
  w.u8(static_cast<uint8_t>(type));
  hash.encode(w);
  return w.take();
}

void EndRequest::sign_with(const KeyPair& kp) { sig = sign(kp, signing_bytes()); }

bool EndRequest::verify_sig(const PublicKey& pk) const {
  return verify(pk, signing_bytes(), sig);
}

void EndRequest::encode(ByteWriter& w) const {
  w.u8(kTagEndRequest);
  address.encode(w);
  w.u8(static_cast<uint8_t>(type));
  hash.encode(w);
  sig.encode(w);
}

EndRequest EndRequest::decode(ByteReader& r) {
  check_tag(r, kTagEndRequest, "EndRequest");
  EndRequest e;
  e.address = NodeId::decode(r);
  e.type = phase_from_u8(r.u8());
  e.hash = Digest::decode(r);
  e.sig = Signature::decode(r);
  return e;
}

// ---- ReplyMsg ----

Bytes ReplyMsg::signing_bytes() const {
  ByteWriter w;
  w.u8(kTagReplyMsg);
  address.encode(w);
  w.u8(static_cast<uint8_t>(type));
  hash.encode(w);
  return w.take();
}

void ReplyMsg::sign_with(const KeyPair& kp) { sig = sign(kp, signing_bytes()); }

bool ReplyMsg::verify_sig(const PublicKey& pk) const {
  return verify(pk, signing_bytes(), sig);
}

void ReplyMsg::encode(ByteWriter& w) const {
  w.u8(kTagReplyMsg);
  address.encode(w);
  w.u8(static_cast<uint8_t>(type));
  hash.encode(w);
  sig.encode(w);
  w.blob(result);
}

ReplyMsg ReplyMsg::decode(ByteReader& r) {
  check_tag(r, kTagReplyMsg, "ReplyMsg");
  ReplyMsg m;
  m.address = NodeId::decode(r);
  m.type = phase_from_u8(r.u8());
  m.hash = Digest::decode(r);
  m.sig = Signature::decode(r);
  m.result = r.blob();
  return m;
}

// ---- TransitionProof ----

Digest TransitionProof::digest_of() const { return digest(dfl::encode(*this)); }

void TransitionProof::encode(ByteWriter& w) const {
  w.u8(kTagTransitionProof);
  end.encode(w);
  w.u32(static_cast<uint32_t>(replies.size()));
  for (const auto& rep : replies) rep.encode(w);
  w.u64(round);
  w.u8(static_cast<uint8_t>(phase));
}

TransitionProof TransitionProof::decode(ByteReader& r) {
  check_tag(r, kTagTransitionProof, "TransitionProof");
  TransitionProof p;
  p.end = EndRequest::decode(r);
  uint32_t n = r.u32();
  p.replies.reserve(n);
  for (uint32_t i = 0; i < n; ++i) p.replies.push_back(ReplyMsg::decode(r));
  p.round = r.u64();
  p.phase = phase_from_u8(r.u8());
  return p;
}

// ---- PhaseResult ----

void PhaseResult::encode(ByteWriter& w) const {
  w.u8(kTagPhaseResult);
  w.u64(round);
  w.u8(static_cast<uint8_t>(phase));
  w.u64(pbft_view);
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, ElectResult>) {
          w.u64(b.next_epoch);
          w.u32(static_cast<uint32_t>(b.members.size()));
          for (const auto& m : b.members) m.encode(w);
        } else if constexpr (std::is_same_v<T, PledgeResult>) {
          w.u32(static_cast<uint32_t>(b.stake.size()));
          for (const auto& [node, money] : b.stake) {
            node.encode(w);
            w.i64(money);
          }
        } else if constexpr (std::is_same_v<T, CommitResult>) {
          w.u32(static_cast<uint32_t>(b.submissions.size()));
          for (const auto& [node, d] : b.submissions) {
            node.encode(w);
            d.encode(w);
          }
        } else if constexpr (std::is_same_v<T, WorkResult>) {
          b.global_digest.encode(w);
          w.u32(b.global_score);
          w.u32(static_cast<uint32_t>(b.submodel_scores.size()));
          for (const auto& [node, score] : b.submodel_scores) {
            node.encode(w);
            w.u32(score);
          }
          w.u32(static_cast<uint32_t>(b.matched_members.size()));
          for (const auto& m : b.matched_members) m.encode(w);
          w.u32(static_cast<uint32_t>(b.unanswered_members.size()));
          for (const auto& m : b.unanswered_members) m.encode(w);
        }
      },
      body);
}

PhaseResult PhaseResult::decode(ByteReader& r) {
  check_tag(r, kTagPhaseResult, "PhaseResult");
  PhaseResult res;
  res.round = r.u64();
  res.phase = phase_from_u8(r.u8());
  res.pbft_view = r.u64();
  switch (res.phase) {
    case Phase::Elect: {
      ElectResult b;
      b.next_epoch = r.u64();
      uint32_t n = r.u32();
      b.members.reserve(n);
      for (uint32_t i = 0; i < n; ++i) b.members.push_back(NodeId::decode(r));
      res.body = b;
      break;
    }
    case Phase::Pledge: {
      PledgeResult b;
      uint32_t n = r.u32();
      b.stake.reserve(n);
      for (uint32_t i = 0; i < n; ++i) {
        NodeId node = NodeId::decode(r);
        Milli money = r.i64();
        b.stake.emplace_back(node, money);
      }
      res.body = b;
      break;
    }
    case Phase::Commit: {
      CommitResult b;
      uint32_t n = r.u32();
      b.submissions.reserve(n);
      for (uint32_t i = 0; i < n; ++i) {
        NodeId node = NodeId::decode(r);
        Digest d = Digest::decode(r);
        b.submissions.emplace_back(node, d);
      }
      res.body = b;
      break;
    }
    case Phase::Work: {
      WorkResult b;
      b.global_digest = Digest::decode(r);
      b.global_score = r.u32();
      uint32_t n = r.u32();
      b.submodel_scores.reserve(n);
      for (uint32_t i = 0; i < n; ++i) {
        NodeId node = NodeId::decode(r);
        uint32_t score = r.u32();
        b.submodel_scores.emplace_back(node, score);
      }
      uint32_t nm = r.u32();
      b.matched_members.reserve(nm);
      for (uint32_t i = 0; i < nm; ++i) b.matched_members.push_back(NodeId::decode(r));
      uint32_t nu = r.u32();
      b.unanswered_members.reserve(nu);
      for (uint32_t i = 0; i < nu; ++i) b.unanswered_members.push_back(NodeId::decode(r));
      res.body = b;
      break;
    }
  }
  return res;
}

// ---- EventRecord and event payloads ----

void EventRecord::encode(ByteWriter& w) const {
  w.u8(kTagEventRecord);
  w.u64(seq);
  w.u64(block);
  w.str(kind);
  w.blob(payload);
}

EventRecord EventRecord::decode(ByteReader& r) {
  check_tag(r, kTagEventRecord, "EventRecord");
  EventRecord e;
  e.seq = r.u64();
  e.block = r.u64();
  e.kind = r.str();
  e.payload = r.blob();
  return e;
}

void PhaseFinalizedEvent::encode(ByteWriter& w) const {
  w.u8(kTagPhaseFinalizedEvent);
  w.u64(round);
  w.u8(static_cast<uint8_t>(phase));
  w.blob(result);
  proof_digest.encode(w);
  w.u64(next_round);
  w.u8(static_cast<uint8_t>(next_phase));
  committee.encode(w);
  w.u64(gas_used);
  caller.encode(w);
}

PhaseFinalizedEvent PhaseFinalizedEvent::decode(ByteReader& r) {
  check_tag(r, kTagPhaseFinalizedEvent, "PhaseFinalizedEvent");
  PhaseFinalizedEvent e;
  e.round = r.u64();
  e.phase = phase_from_u8(r.u8());
  e.result = r.blob();
  e.proof_digest = Digest::decode(r);
  e.next_round = r.u64();
  e.next_phase = phase_from_u8(r.u8());
  e.committee = CommitteeView::decode(r);
  e.gas_used = r.u64();
  e.caller = NodeId::decode(r);
  return e;
}

void ReplayFlaggedEvent::encode(ByteWriter& w) const {
  w.u8(kTagReplayFlaggedEvent);
  w.u64(round);
  w.u8(static_cast<uint8_t>(phase));
  tuple.encode(w);
}

ReplayFlaggedEvent ReplayFlaggedEvent::decode(ByteReader& r) {
  check_tag(r, kTagReplayFlaggedEvent, "ReplayFlaggedEvent");
  ReplayFlaggedEvent e;
  e.round = r.u64();
  e.phase = phase_from_u8(r.u8());
  e.tuple = RequestTuple::decode(r);
  return e;
}

void InitEvent::encode(ByteWriter& w) const {
  w.u8(kTagInitEvent);
  w.u32(need);
  w.u64(elect_times);
  w.f64(weight_p);
  initial_global_model.encode(w);
  committee.encode(w);
  w.u64(round);
  w.u8(static_cast<uint8_t>(phase));
  w.f64(dp_eps);
  w.f64(dp_delta);
  w.f64(dp_clip);
  w.u8(dp_enabled ? 1 : 0);
  w.u32(static_cast<uint32_t>(registry.size()));
  for (const auto& [node, pk] : registry) {
    node.encode(w);
    pk.encode(w);
  }
}

InitEvent InitEvent::decode(ByteReader& r) {
  check_tag(r, kTagInitEvent, "InitEvent");
  InitEvent e;
  e.need = r.u32();
  e.elect_times = r.u64();
  e.weight_p = r.f64();
  e.initial_global_model = Digest::decode(r);
  e.committee = CommitteeView::decode(r);
  e.round = r.u64();
  e.phase = phase_from_u8(r.u8());
  e.dp_eps = r.f64();
  e.dp_delta = r.f64();
  e.dp_clip = r.f64();
  e.dp_enabled = r.u8() != 0;
  uint32_t n = r.u32();
  e.registry.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    NodeId node = NodeId::decode(r);
    PublicKey pk = PublicKey::decode(r);
    e.registry.emplace_back(node, pk);
  }
  return e;
}

void RegisteredEvent::encode(ByteWriter& w) const {
  w.u8(kTagRegisteredEvent);
  node.encode(w);
  pk.encode(w);
  w.i64(deposit);
}

RegisteredEvent RegisteredEvent::decode(ByteReader& r) {
  check_tag(r, kTagRegisteredEvent, "RegisteredEvent");
  RegisteredEvent e;
  e.node = NodeId::decode(r);
  e.pk = PublicKey::decode(r);
  e.deposit = r.i64();
  return e;
}


// ---- Wire envelope ----

Bytes wire_encode(const WireMessage& m) {
  ByteWriter w;
  std::visit(
      [&](const auto& msg) {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, ConsensusRequest>)
          w.u8(1);
        else if constexpr (std::is_same_v<T, PbftMessage>)
          w.u8(2);
        else if constexpr (std::is_same_v<T, EndRequest>)
          w.u8(3);
        else
          w.u8(4);
        msg.encode(w);
      },
      m);
  return w.take();
}

std::optional<WireMessage> wire_decode(const Bytes& b) {
  try {
    ByteReader r(b);
    uint8_t tag = r.u8();
    WireMessage m;
    switch (tag) {
      case 1: m = ConsensusRequest::decode(r); break;
      case 2: m = PbftMessage::decode(r); break;
      case 3: m = EndRequest::decode(r); break;
      case 4: m = ReplyMsg::decode(r); break;
      default: return std::nullopt;
    }
    r.expect_end();
    return m;
  } catch (const CodecError&) {
    return std::nullopt;
  }
}

}  // namespace dfl
