#pragma once

// Wire format for reputation messages and group-trust certificates, plus the
// certifying authority that binds node identities to signing keys.
//
// Frame layout (big-endian):
//   [0] version  [1] type  [2..6) subject  [6..8) rep_val  [8..16) timestamp_ms
//   [16..24) nonce  [24..28) sender  [28..30) payload_len  [30..30+len) payload
//   final 32 bytes: tag over everything before it

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trustwatch/trust_math.hpp"

namespace trustwatch {

using Bytes = std::vector<std::uint8_t>;
using AuthTag = std::array<std::uint8_t, 32>;
using Secret = std::array<std::uint8_t, 32>;
using Binding = std::array<std::uint8_t, 32>;
using Digest = std::array<std::uint8_t, 32>;

inline constexpr NodeId kAuthorityId = 0;
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderSize = 30;
inline constexpr std::size_t kTagSize = 32;
inline constexpr std::size_t kMinFrameSize = kHeaderSize + kTagSize;
inline constexpr std::size_t kMaxPayload = 65535;
inline constexpr std::uint16_t kFixedScale = 10000;

enum class RepMessType : std::uint8_t {
    RepRequest = 0,
    RepResponse = 1,
    RepBroadcast = 2,
    Challenge = 3,
    ChallengeAck = 4,
    VerifyBehavior = 5,
    GlobalAlarm = 6,
    AlarmVote = 7,
    CertExchange = 8,
};

const char* to_string(RepMessType t);

struct ReputationHeader {
    std::uint8_t version = kWireVersion;
    RepMessType type = RepMessType::RepRequest;
    NodeId subject = 0;
    std::uint16_t rep_val = 0;  // fixed point, 1/10000
    std::uint64_t timestamp_ms = 0;
    std::uint64_t nonce = 0;
    NodeId sender = 0;
    std::uint16_t payload_len = 0;

    bool operator==(const ReputationHeader&) const = default;
};

struct Frame {
    ReputationHeader header;
    Bytes payload;
    AuthTag tag{};
};

class CodecError : public std::runtime_error {
public:
    enum class Code { Truncated, BadVersion, UnknownType, RepValOverflow, LengthMismatch, PayloadTooLarge };

    CodecError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

const char* to_string(CodecError::Code c);

std::uint16_t to_fixed(double r);
inline double from_fixed(std::uint16_t raw) { return static_cast<double>(raw) / kFixedScale; }

AuthTag make_tag(std::span<const std::uint8_t> message, const Secret& secret);
Digest sha256(std::span<const std::uint8_t> data);
std::uint64_t digest64(std::span<const std::uint8_t> data);

/// Sets `payload_len` from the payload and appends the sender's tag.
Bytes encode_rep_mess(ReputationHeader header, std::span<const std::uint8_t> payload,
                      const Secret& signer);
Frame decode_rep_mess(std::span<const std::uint8_t> bytes);

/// The portion of an encoded frame covered by its tag.
inline std::span<const std::uint8_t> tagged_portion(std::span<const std::uint8_t> frame) {
    return frame.first(frame.size() - kTagSize);
}

// ---------------------------------------------------------------------------
// Identity bootstrap

class AuthorityError : public std::runtime_error {
public:
    enum class Code { DuplicateCredential, UnknownBinding, UnknownNode };

    AuthorityError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

struct IdentityCertificate {
    NodeId node = 0;
    Digest credential_hash{};
    Binding public_binding{};
    AuthTag authority_tag{};
};

Secret derive_secret(std::uint64_t seed, NodeId node);
Binding binding_of_secret(const Secret& secret);

/// Simulated certifying authority. Signature verification is modelled as a
/// registry lookup from a public binding to the signer's keyed tag function.
class Authority {
public:
    explicit Authority(Secret own_secret);

    /// Records a node's signing key. Returns its public binding.
    Binding enroll_key(const Secret& secret);

    /// At most one certificate per credential hash, ever.
    IdentityCertificate issue_identity(NodeId node, std::span<const std::uint8_t> credential,
                                       const Binding& public_binding);

    bool verify_identity(const IdentityCertificate& cert) const;
    bool verify_tag(std::span<const std::uint8_t> message, const AuthTag& tag,
                    const Binding& binding) const;
    const Binding& binding_of(NodeId node) const;
    bool knows(NodeId node) const { return node_bindings_.count(node) != 0; }

    /// Checks a whole encoded frame against the binding of its sender field.
    bool verify_frame(std::span<const std::uint8_t> frame) const;

private:
    static Bytes identity_bytes(NodeId node, const Digest& cred, const Binding& binding);

    Secret secret_;
    Binding own_binding_;
    std::map<Binding, Secret> keys_;
    std::set<Digest> issued_credentials_;
    std::map<NodeId, Binding> node_bindings_;
};

// ---------------------------------------------------------------------------
// Group trust certificates

struct ResponseRecord {
    NodeId respondent = 0;
    std::uint16_t maliciousness = 0;  // fixed point
    std::uint16_t samples = 0;        // 0 marks a no-knowledge response
    AuthTag tag{};

    bool operator==(const ResponseRecord&) const = default;
};

struct CertKey {
    NodeId subject = 0;
    NodeId issuer = 0;
    std::uint64_t issued_at_ms = 0;

    auto operator<=>(const CertKey&) const = default;
};

std::string to_string(const CertKey& k);

struct GroupTrustCertificate {
    NodeId subject = 0;
    NodeId issuer = 0;
    std::uint64_t round = 0;
    std::uint64_t issued_at_ms = 0;
    std::uint16_t group_trust = kFixedScale;
    std::vector<ResponseRecord> responses;  // ascending respondent id
    AuthTag certificate_tag{};

    CertKey key() const { return {subject, issuer, issued_at_ms}; }
    bool operator==(const GroupTrustCertificate&) const = default;
};

Bytes response_signing_bytes(std::uint64_t round, NodeId subject, NodeId respondent,
                             std::uint16_t maliciousness, std::uint16_t samples);
ResponseRecord sign_response(std::uint64_t round, NodeId subject, NodeId respondent,
                             double maliciousness, std::uint16_t samples, const Secret& secret);

/// Observations carried by the certificate. No-knowledge responses abstain.
std::vector<Observation> certificate_observations(const GroupTrustCertificate& cert,
                                                  double weight = 1.0);

/// Group trust over the knowledgeable responses; 1.0 when every response abstains.
double compute_certificate_trust(const GroupTrustCertificate& cert, double threshold);

Bytes certificate_body(const GroupTrustCertificate& cert);
Bytes serialize_certificate(const GroupTrustCertificate& cert);
GroupTrustCertificate parse_certificate(std::span<const std::uint8_t> bytes);

/// Sorts responses, fills in group trust (unless `keep_group_trust`) and tags.
void finalize_certificate(GroupTrustCertificate& cert, double threshold, const Secret& issuer,
                          bool keep_group_trust = false);

std::uint64_t respondent_fingerprint(const GroupTrustCertificate& cert);

enum class Verdict { Valid, TamperedResponse, DroppedFeedback, WrongGroupTrust, BadIssuerTag };
const char* to_string(Verdict v);

Verdict verify_group_certificate(const GroupTrustCertificate& cert,
                                 const std::set<NodeId>& expected_respondents,
                                 const UpdateParams& params, const Authority& authority);

// ---------------------------------------------------------------------------
// Big-endian helpers shared by the payload encoders.

class ByteWriter {
public:
    ByteWriter& u8(std::uint8_t v);
    ByteWriter& u16(std::uint16_t v);
    ByteWriter& u32(std::uint32_t v);
    ByteWriter& u64(std::uint64_t v);
    ByteWriter& raw(std::span<const std::uint8_t> v);
    Bytes take() { return std::move(out_); }
    const Bytes& bytes() const { return out_; }

private:
    Bytes out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    std::span<const std::uint8_t> raw(std::size_t n);
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    void need(std::size_t n) const;
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

std::string to_hex(std::span<const std::uint8_t> bytes);
Bytes from_hex(const std::string& hex);

}  // namespace trustwatch
