#pragma once

// Newline-delimited event records: "time_ms kind actor subject details".

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "trustwatch/trust_math.hpp"

namespace trustwatch {

enum class EventKind {
    Meta,            // scenario parameters, written at t=0
    Adversary,       // ground-truth roster, written at t=0
    LinkUp,
    LinkDown,
    Obs,             // resolved monitor sample: details = ok|drop|mod
    PacketDrop,      // details = reason
    RouteDiscovery,
    Suspicion,
    Challenge,
    ChallengeAck,
    ChallengeDone,
    ChallengeLapse,
    Escalation,
    VerifyBehavior,
    Response,
    CertIssued,
    CertHeld,
    CertRejected,
    TamperDetected,
    TrustUpdate,
    GlobalAlarm,
    AlarmSuppressed,
    Vote,
    AlarmExpired,
    AlarmRejected,
    Isolated,
    Exchange,
    Summary,
};

const char* to_string(EventKind k);
EventKind parse_event_kind(std::string_view s);

struct EventRecord {
    std::uint64_t time_ms = 0;
    EventKind kind = EventKind::Meta;
    NodeId actor = 0;
    NodeId subject = 0;
    std::string details;

    bool operator==(const EventRecord&) const = default;
};

std::string format_record(const EventRecord& r);
EventRecord parse_record(std::string_view line);

class EventLog {
public:
    void add(EventRecord r) { records_.push_back(std::move(r)); }
    void add(std::uint64_t t, EventKind k, NodeId actor, NodeId subject, std::string details = {}) {
        records_.push_back({t, k, actor, subject, std::move(details)});
    }
    const std::vector<EventRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    void write(std::ostream& os) const;
    std::string to_string() const;
    static EventLog read(std::istream& is);

private:
    std::vector<EventRecord> records_;
};

/// Value of `key=value` inside a details string, or empty.
std::string detail_field(std::string_view details, std::string_view key);

}  // namespace trustwatch
