#include "trustwatch/messages.hpp"

#include <sodium.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>

namespace trustwatch {

namespace {

void ensure_sodium() {
    static const bool ready = [] {
        if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
        return true;
    }();
    (void)ready;
}

}  // namespace

const char* to_string(RepMessType t) {
    switch (t) {
    case RepMessType::RepRequest: return "rep_request";
    case RepMessType::RepResponse: return "rep_response";
    case RepMessType::RepBroadcast: return "rep_broadcast";
    case RepMessType::Challenge: return "challenge";
    case RepMessType::ChallengeAck: return "challenge_ack";
    case RepMessType::VerifyBehavior: return "verify_behavior";
    case RepMessType::GlobalAlarm: return "global_alarm";
    case RepMessType::AlarmVote: return "alarm_vote";
    case RepMessType::CertExchange: return "cert_exchange";
    }
    return "unknown";
}

const char* to_string(CodecError::Code c) {
    switch (c) {
    case CodecError::Code::Truncated: return "Truncated";
    case CodecError::Code::BadVersion: return "BadVersion";
    case CodecError::Code::UnknownType: return "UnknownType";
    case CodecError::Code::RepValOverflow: return "RepValOverflow";
    case CodecError::Code::LengthMismatch: return "LengthMismatch";
    case CodecError::Code::PayloadTooLarge: return "PayloadTooLarge";
    }
    return "?";
}

const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Valid: return "Valid";
    case Verdict::TamperedResponse: return "TamperedResponse";
    case Verdict::DroppedFeedback: return "DroppedFeedback";
    case Verdict::WrongGroupTrust: return "WrongGroupTrust";
    case Verdict::BadIssuerTag: return "BadIssuerTag";
    }
    return "?";
}

std::string to_string(const CertKey& k) {
    return std::to_string(k.subject) + ":" + std::to_string(k.issuer) + ":" +
           std::to_string(k.issued_at_ms);
}

std::uint16_t to_fixed(double r) {
    const double c = clamp01(r);
    return static_cast<std::uint16_t>(std::floor(c * kFixedScale + 0.5));
}

// ---------------------------------------------------------------------------

ByteWriter& ByteWriter::u8(std::uint8_t v) {
    out_.push_back(v);
    return *this;
}
ByteWriter& ByteWriter::u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
    return *this;
}
ByteWriter& ByteWriter::u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
    return *this;
}
ByteWriter& ByteWriter::u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
    return *this;
}
ByteWriter& ByteWriter::raw(std::span<const std::uint8_t> v) {
    out_.insert(out_.end(), v.begin(), v.end());
    return *this;
}

void ByteReader::need(std::size_t n) const {
    if (remaining() < n) throw CodecError(CodecError::Code::Truncated, "unexpected end of input");
}
std::uint8_t ByteReader::u8() {
    need(1);
    return in_[pos_++];
}
std::uint16_t ByteReader::u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
}
std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += 4;
    return v;
}
std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += 8;
    return v;
}
std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

Bytes from_hex(const std::string& hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::string clean;
    for (char c : hex)
        if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
    if (clean.size() % 2 != 0) throw std::invalid_argument("hex string has odd length");
    Bytes out;
    out.reserve(clean.size() / 2);
    for (std::size_t i = 0; i < clean.size(); i += 2) {
        int hi = nibble(clean[i]);
        int lo = nibble(clean[i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

// ---------------------------------------------------------------------------

AuthTag make_tag(std::span<const std::uint8_t> message, const Secret& secret) {
    ensure_sodium();
    AuthTag tag{};
    crypto_auth_hmacsha256(tag.data(), message.data(), message.size(), secret.data());
    return tag;
}

Digest sha256(std::span<const std::uint8_t> data) {
    ensure_sodium();
    Digest d{};
    crypto_hash_sha256(d.data(), data.data(), data.size());
    return d;
}

std::uint64_t digest64(std::span<const std::uint8_t> data) {
    Digest d = sha256(data);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
    return v;
}

Bytes encode_rep_mess(ReputationHeader header, std::span<const std::uint8_t> payload,
                      const Secret& signer) {
    if (payload.size() > kMaxPayload)
        throw CodecError(CodecError::Code::PayloadTooLarge, "payload exceeds 65535 bytes");
    header.payload_len = static_cast<std::uint16_t>(payload.size());
    ByteWriter w;
    w.u8(header.version)
        .u8(static_cast<std::uint8_t>(header.type))
        .u32(header.subject)
        .u16(header.rep_val)
        .u64(header.timestamp_ms)
        .u64(header.nonce)
        .u32(header.sender)
        .u16(header.payload_len)
        .raw(payload);
    Bytes out = w.take();
    AuthTag tag = make_tag(out, signer);
    out.insert(out.end(), tag.begin(), tag.end());
    return out;
}

Frame decode_rep_mess(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMinFrameSize)
        throw CodecError(CodecError::Code::Truncated,
                         "frame of " + std::to_string(bytes.size()) + " bytes is below minimum");
    ByteReader r(bytes);
    Frame f;
    f.header.version = r.u8();
    if (f.header.version != kWireVersion)
        throw CodecError(CodecError::Code::BadVersion,
                         "unsupported version " + std::to_string(f.header.version));
    const std::uint8_t type = r.u8();
    if (type > static_cast<std::uint8_t>(RepMessType::CertExchange))
        throw CodecError(CodecError::Code::UnknownType, "unknown type " + std::to_string(type));
    f.header.type = static_cast<RepMessType>(type);
    f.header.subject = r.u32();
    f.header.rep_val = r.u16();
    if (f.header.rep_val > kFixedScale)
        throw CodecError(CodecError::Code::RepValOverflow,
                         "rep_val " + std::to_string(f.header.rep_val) + " exceeds 10000");
    f.header.timestamp_ms = r.u64();
    f.header.nonce = r.u64();
    f.header.sender = r.u32();
    f.header.payload_len = r.u16();
    if (bytes.size() != kMinFrameSize + f.header.payload_len)
        throw CodecError(CodecError::Code::LengthMismatch,
                         "payload_len " + std::to_string(f.header.payload_len) +
                             " disagrees with frame size " + std::to_string(bytes.size()));
    auto payload = r.raw(f.header.payload_len);
    f.payload.assign(payload.begin(), payload.end());
    auto tag = r.raw(kTagSize);
    std::copy(tag.begin(), tag.end(), f.tag.begin());
    return f;
}

// ---------------------------------------------------------------------------

Secret derive_secret(std::uint64_t seed, NodeId node) {
    ByteWriter w;
    w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("tw-secret"), 9))
        .u64(seed)
        .u32(node);
    return sha256(w.bytes());
}

Binding binding_of_secret(const Secret& secret) {
    ByteWriter w;
    w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("tw-binding"), 10))
        .raw(secret);
    return sha256(w.bytes());
}

Authority::Authority(Secret own_secret)
    : secret_(own_secret), own_binding_(binding_of_secret(own_secret)) {
    keys_[own_binding_] = secret_;
    node_bindings_[kAuthorityId] = own_binding_;
}

Binding Authority::enroll_key(const Secret& secret) {
    Binding b = binding_of_secret(secret);
    keys_[b] = secret;
    return b;
}

Bytes Authority::identity_bytes(NodeId node, const Digest& cred, const Binding& binding) {
    ByteWriter w;
    w.u32(node).raw(cred).raw(binding);
    return w.take();
}

IdentityCertificate Authority::issue_identity(NodeId node, std::span<const std::uint8_t> credential,
                                              const Binding& public_binding) {
    Digest h = sha256(credential);
    if (issued_credentials_.count(h))
        throw AuthorityError(AuthorityError::Code::DuplicateCredential,
                             "credential already holds a valid identity certificate");
    if (!keys_.count(public_binding))
        throw AuthorityError(AuthorityError::Code::UnknownBinding, "binding was never enrolled");
    issued_credentials_.insert(h);
    node_bindings_[node] = public_binding;

    IdentityCertificate cert;
    cert.node = node;
    cert.credential_hash = h;
    cert.public_binding = public_binding;
    cert.authority_tag = make_tag(identity_bytes(node, h, public_binding), secret_);
    return cert;
}

bool Authority::verify_identity(const IdentityCertificate& cert) const {
    return make_tag(identity_bytes(cert.node, cert.credential_hash, cert.public_binding), secret_) ==
           cert.authority_tag;
}

bool Authority::verify_tag(std::span<const std::uint8_t> message, const AuthTag& tag,
                           const Binding& binding) const {
    auto it = keys_.find(binding);
    if (it == keys_.end())
        throw AuthorityError(AuthorityError::Code::UnknownBinding, "no key for binding");
    return make_tag(message, it->second) == tag;
}

const Binding& Authority::binding_of(NodeId node) const {
    auto it = node_bindings_.find(node);
    if (it == node_bindings_.end())
        throw AuthorityError(AuthorityError::Code::UnknownNode,
                             "node " + std::to_string(node) + " has no identity");
    return it->second;
}

bool Authority::verify_frame(std::span<const std::uint8_t> frame) const {
    if (frame.size() < kMinFrameSize) return false;
    ByteReader r(frame.subspan(24, 4));
    const NodeId sender = r.u32();
    auto it = node_bindings_.find(sender);
    if (it == node_bindings_.end()) return false;
    AuthTag tag{};
    std::copy(frame.end() - kTagSize, frame.end(), tag.begin());
    return verify_tag(tagged_portion(frame), tag, it->second);
}

// ---------------------------------------------------------------------------

Bytes response_signing_bytes(std::uint64_t round, NodeId subject, NodeId respondent,
                             std::uint16_t maliciousness, std::uint16_t samples) {
    ByteWriter w;
    w.u8('R').u64(round).u32(subject).u32(respondent).u16(maliciousness).u16(samples);
    return w.take();
}

ResponseRecord sign_response(std::uint64_t round, NodeId subject, NodeId respondent,
                             double maliciousness, std::uint16_t samples, const Secret& secret) {
    ResponseRecord r;
    r.respondent = respondent;
    r.maliciousness = to_fixed(maliciousness);
    r.samples = samples;
    r.tag = make_tag(response_signing_bytes(round, subject, respondent, r.maliciousness, samples),
                     secret);
    return r;
}

std::vector<Observation> certificate_observations(const GroupTrustCertificate& cert,
                                                  double weight) {
    std::vector<Observation> obs;
    for (const auto& r : cert.responses) {
        if (r.samples == 0) continue;
        obs.push_back({r.respondent, from_fixed(r.maliciousness), weight, 1.0});
    }
    return obs;
}

double compute_certificate_trust(const GroupTrustCertificate& cert, double threshold) {
    auto obs = certificate_observations(cert);
    if (obs.empty()) return 1.0;
    return group_trust(obs, threshold).group_trust;
}

Bytes certificate_body(const GroupTrustCertificate& cert) {
    ByteWriter w;
    w.u32(cert.subject)
        .u32(cert.issuer)
        .u64(cert.round)
        .u64(cert.issued_at_ms)
        .u16(cert.group_trust)
        .u16(static_cast<std::uint16_t>(cert.responses.size()));
    for (const auto& r : cert.responses)
        w.u32(r.respondent).u16(r.maliciousness).u16(r.samples).raw(r.tag);
    return w.take();
}

Bytes serialize_certificate(const GroupTrustCertificate& cert) {
    Bytes out = certificate_body(cert);
    out.insert(out.end(), cert.certificate_tag.begin(), cert.certificate_tag.end());
    return out;
}

GroupTrustCertificate parse_certificate(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    GroupTrustCertificate c;
    c.subject = r.u32();
    c.issuer = r.u32();
    c.round = r.u64();
    c.issued_at_ms = r.u64();
    c.group_trust = r.u16();
    if (c.group_trust > kFixedScale)
        throw CodecError(CodecError::Code::RepValOverflow, "group trust exceeds 10000");
    const std::uint16_t n = r.u16();
    c.responses.reserve(n);
    for (std::uint16_t i = 0; i < n; ++i) {
        ResponseRecord rec;
        rec.respondent = r.u32();
        rec.maliciousness = r.u16();
        if (rec.maliciousness > kFixedScale)
            throw CodecError(CodecError::Code::RepValOverflow, "maliciousness exceeds 10000");
        rec.samples = r.u16();
        auto t = r.raw(kTagSize);
        std::copy(t.begin(), t.end(), rec.tag.begin());
        c.responses.push_back(rec);
    }
    auto t = r.raw(kTagSize);
    std::copy(t.begin(), t.end(), c.certificate_tag.begin());
    if (r.remaining() != 0)
        throw CodecError(CodecError::Code::LengthMismatch, "trailing bytes after certificate");
    return c;
}

void finalize_certificate(GroupTrustCertificate& cert, double threshold, const Secret& issuer,
                          bool keep_group_trust) {
    std::sort(cert.responses.begin(), cert.responses.end(),
              [](const ResponseRecord& a, const ResponseRecord& b) { return a.respondent < b.respondent; });
    if (!keep_group_trust) cert.group_trust = to_fixed(compute_certificate_trust(cert, threshold));
    cert.certificate_tag = make_tag(certificate_body(cert), issuer);
}

std::uint64_t respondent_fingerprint(const GroupTrustCertificate& cert) {
    ByteWriter w;
    w.u32(cert.subject);
    std::vector<NodeId> ids;
    for (const auto& r : cert.responses) ids.push_back(r.respondent);
    std::sort(ids.begin(), ids.end());
    for (auto id : ids) w.u32(id);
    return digest64(w.bytes());
}

Verdict verify_group_certificate(const GroupTrustCertificate& cert,
                                 const std::set<NodeId>& expected_respondents,
                                 const UpdateParams& params, const Authority& authority) {
    std::set<NodeId> present;
    for (const auto& r : cert.responses) {
        if (!authority.knows(r.respondent)) return Verdict::TamperedResponse;
        Bytes signed_bytes =
            response_signing_bytes(cert.round, cert.subject, r.respondent, r.maliciousness, r.samples);
        if (!authority.verify_tag(signed_bytes, r.tag, authority.binding_of(r.respondent)))
            return Verdict::TamperedResponse;
        present.insert(r.respondent);
    }
    if (present.size() != cert.responses.size() || present != expected_respondents)
        return Verdict::DroppedFeedback;

    const int recomputed = to_fixed(compute_certificate_trust(cert, params.maliciousness_threshold));
    if (std::abs(recomputed - static_cast<int>(cert.group_trust)) > 1) return Verdict::WrongGroupTrust;

    if (!authority.knows(cert.issuer) ||
        !authority.verify_tag(certificate_body(cert), cert.certificate_tag,
                              authority.binding_of(cert.issuer)))
        return Verdict::BadIssuerTag;
    return Verdict::Valid;
}

}  // namespace trustwatch
