#include "trustwatch/event_log.hpp"

#include <array>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace trustwatch {

namespace {

constexpr std::array<std::pair<EventKind, const char*>, 28> kNames{{
    {EventKind::Meta, "META"},
    {EventKind::Adversary, "ADVERSARY"},
    {EventKind::LinkUp, "LINK_UP"},
    {EventKind::LinkDown, "LINK_DOWN"},
    {EventKind::Obs, "OBS"},
    {EventKind::PacketDrop, "PKT_DROP"},
    {EventKind::RouteDiscovery, "ROUTE_DISCOVERY"},
    {EventKind::Suspicion, "SUSPICION"},
    {EventKind::Challenge, "CHALLENGE"},
    {EventKind::ChallengeAck, "CHALLENGE_ACK"},
    {EventKind::ChallengeDone, "CHALLENGE_DONE"},
    {EventKind::ChallengeLapse, "CHALLENGE_LAPSE"},
    {EventKind::Escalation, "ESCALATION"},
    {EventKind::VerifyBehavior, "VERIFY_BEHAVIOR"},
    {EventKind::Response, "RESPONSE"},
    {EventKind::CertIssued, "CERT_ISSUED"},
    {EventKind::CertHeld, "CERT_HELD"},
    {EventKind::CertRejected, "CERT_REJECTED"},
    {EventKind::TamperDetected, "TAMPER_DETECTED"},
    {EventKind::TrustUpdate, "TRUST_UPDATE"},
    {EventKind::GlobalAlarm, "GLOBAL_ALARM"},
    {EventKind::AlarmSuppressed, "ALARM_SUPPRESSED"},
    {EventKind::Vote, "VOTE"},
    {EventKind::AlarmExpired, "ALARM_EXPIRED"},
    {EventKind::AlarmRejected, "ALARM_REJECTED"},
    {EventKind::Isolated, "ISOLATED"},
    {EventKind::Exchange, "EXCHANGE"},
    {EventKind::Summary, "SUMMARY"},
}};

}  // namespace

const char* to_string(EventKind k) {
    for (const auto& [kind, name] : kNames)
        if (kind == k) return name;
    return "?";
}

EventKind parse_event_kind(std::string_view s) {
    for (const auto& [kind, name] : kNames)
        if (s == name) return kind;
    throw std::invalid_argument("unknown event kind '" + std::string(s) + "'");
}

std::string format_record(const EventRecord& r) {
    std::string s = std::to_string(r.time_ms);
    s += ' ';
    s += to_string(r.kind);
    s += ' ';
    s += std::to_string(r.actor);
    s += ' ';
    s += std::to_string(r.subject);
    if (!r.details.empty()) {
        s += ' ';
        s += r.details;
    }
    return s;
}

EventRecord parse_record(std::string_view line) {
    auto next = [&line]() -> std::string_view {
        auto pos = line.find(' ');
        std::string_view tok = line.substr(0, pos);
        line = pos == std::string_view::npos ? std::string_view{} : line.substr(pos + 1);
        return tok;
    };
    EventRecord r;
    try {
        r.time_ms = std::stoull(std::string(next()));
        r.kind = parse_event_kind(next());
        r.actor = static_cast<NodeId>(std::stoul(std::string(next())));
        r.subject = static_cast<NodeId>(std::stoul(std::string(next())));
    } catch (const std::logic_error& e) {
        throw std::invalid_argument("malformed event record: " + std::string(e.what()));
    }
    r.details = std::string(line);
    return r;
}

void EventLog::write(std::ostream& os) const {
    for (const auto& r : records_) os << format_record(r) << '\n';
}

std::string EventLog::to_string() const {
    std::ostringstream os;
    write(os);
    return os.str();
}

EventLog EventLog::read(std::istream& is) {
    EventLog log;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        log.add(parse_record(line));
    }
    return log;
}

std::string detail_field(std::string_view details, std::string_view key) {
    std::size_t pos = 0;
    while (pos < details.size()) {
        auto end = details.find(' ', pos);
        if (end == std::string_view::npos) end = details.size();
        auto tok = details.substr(pos, end - pos);
        if (tok.size() > key.size() && tok.substr(0, key.size()) == key && tok[key.size()] == '=')
            return std::string(tok.substr(key.size() + 1));
        pos = end + 1;
    }
    return {};
}

}  // namespace trustwatch
