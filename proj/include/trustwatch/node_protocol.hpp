#pragma once

// Per-node protocol: monitor, reputation collector, maintainer, propagator
// and alarm raiser. A Node only sees the world through `Network`.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trustwatch/event_log.hpp"
#include "trustwatch/messages.hpp"
#include "trustwatch/trust_math.hpp"

namespace trustwatch {

enum class Outcome { Forwarded, Dropped, Modified };
const char* to_string(Outcome o);

struct ForwardingEvent {
    NodeId subject = 0;
    Outcome outcome = Outcome::Forwarded;
    std::uint64_t time_ms = 0;
};

struct Suspicion {
    NodeId subject = 0;
    double maliciousness = 0.0;
};

struct MonitorParams {
    double sampling_prob = 0.25;
    std::uint64_t window_ms = 30000;
    double threshold = 0.25;
    std::uint32_t min_samples = 10;
    std::uint64_t observation_deadline_ms = 1000;
};

/// Sliding-window counters for one monitored neighbour.
class MonitorWindow {
public:
    explicit MonitorWindow(std::uint64_t window_ms = 30000) : window_ms_(window_ms) {}

    void sampled() { ++pending_; }
    void discard() {
        if (pending_ > 0) --pending_;
    }
    void record(Outcome o, std::uint64_t now_ms);
    void prune(std::uint64_t now_ms);
    void reset() {
        events_.clear();
        ok_ = dropped_ = modified_ = 0;
    }

    std::uint32_t forwarded_ok() const { return ok_; }
    std::uint32_t dropped() const { return dropped_; }
    std::uint32_t modified() const { return modified_; }
    std::uint32_t pending() const { return pending_; }
    std::uint32_t resolved() const { return ok_ + dropped_ + modified_; }
    std::uint32_t sampled_count() const { return resolved() + pending_; }
    double maliciousness() const {
        const auto n = resolved();
        return n == 0 ? 0.0 : static_cast<double>(dropped_ + modified_) / n;
    }

private:
    void count(Outcome o, int delta);

    std::uint64_t window_ms_;
    std::deque<std::pair<std::uint64_t, Outcome>> events_;
    std::uint32_t ok_ = 0;
    std::uint32_t dropped_ = 0;
    std::uint32_t modified_ = 0;
    std::uint32_t pending_ = 0;
};

struct ProtocolParams {
    UpdateParams trust;
    MonitorParams monitor;
    double respondent_weight = 1.0;
    std::uint64_t ack_deadline_ms = 2000;
    std::uint64_t collection_window_ms = 3000;
    std::uint64_t certificate_grace_ms = 1000;
    std::uint64_t challenge_cooldown_ms = 30000;
    std::uint64_t exchange_interval_ms = 60000;
    double f_fraction = 0.5;
    std::size_t piggyback_budget = 2;
    std::size_t cache_capacity = 256;
    std::uint64_t interaction_window_ms = 120000;
    std::uint64_t vote_window_ms = 2000;
    std::uint64_t alarm_backoff_ms = 5000;
    std::uint64_t alarm_holdoff_ms = 60000;
    bool delta_per_certificate = false;

    std::uint64_t replay_window_ms() const { return 2 * exchange_interval_ms; }
};

/// How this node itself deviates from the protocol. Never describes peers.
struct Misbehavior {
    bool drops_certificates = false;
    bool drops_feedback_in_aggregate = false;
    bool tampers_certificates = false;
    bool false_accuser = false;
    bool silent_on_challenge = false;
    std::set<NodeId> colluding_set;

    bool any() const {
        return drops_certificates || drops_feedback_in_aggregate || tampers_certificates ||
               false_accuser || silent_on_challenge || !colluding_set.empty();
    }
};

/// The world as seen from a node.
class Network {
public:
    virtual ~Network() = default;
    virtual std::uint64_t now_ms() const = 0;
    virtual std::span<const NodeId> neighbors_of(NodeId node) const = 0;  // ascending
    virtual void send(NodeId from, NodeId to, Bytes frame) = 0;           // one hop
    virtual void send_routed(NodeId from, NodeId to, Bytes frame) = 0;    // multi-hop
    virtual void wake_at(NodeId node, std::uint64_t at_ms) = 0;
    virtual void record(EventKind kind, NodeId actor, NodeId subject, std::string details) = 0;
    virtual double uniform01() = 0;
    virtual void declare_isolated(NodeId subject) = 0;
};

struct RepEntry {
    double rep_val = 1.0;
    std::uint64_t last_updated_ms = 0;
    bool informed = false;  // touched by at least one update with evidence behind it
    std::set<std::uint64_t> accepted_respondent_sets;
};
using ReputationTable = std::map<NodeId, RepEntry>;

struct ChallengeState {
    NodeId subject = 0;
    std::uint64_t initiated_at_ms = 0;
    std::uint64_t ack_deadline_ms = 0;
    std::uint64_t cert_deadline_ms = 0;
    bool acked = false;
    std::uint64_t round = 0;
};

/// Responses gathered by an accused node for one round.
struct CollectionState {
    std::uint64_t round = 0;
    std::uint64_t deadline_ms = 0;
    std::set<NodeId> expected;
    std::map<NodeId, ResponseRecord> collected;
};

struct AlarmState {
    NodeId subject = 0;
    std::uint64_t nonce = 0;
    std::map<NodeId, bool> votes;
    std::uint64_t voting_deadline_ms = 0;
};

enum class AlarmOutcome { NoDecision, Isolated, Rejected };

/// Order-independent tally: strictly more than half of received votes.
AlarmOutcome tally_votes(const std::map<NodeId, bool>& votes);

/// Bounded certificate store with oldest-first eviction.
class CertificateCache {
public:
    explicit CertificateCache(std::size_t capacity = 256) : capacity_(capacity) {}

    struct Entry {
        GroupTrustCertificate cert;
        Bytes bytes;
        std::uint64_t digest = 0;
        std::uint64_t seq = 0;
    };

    bool contains(const CertKey& k) const { return entries_.count(k) != 0; }
    const Entry* find(const CertKey& k) const;
    /// Returns the evicted key, if any.
    std::optional<CertKey> insert(GroupTrustCertificate cert, Bytes bytes);
    std::vector<CertKey> keys() const;
    std::vector<CertKey> most_recent(std::size_t n) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::size_t capacity_;
    std::uint64_t next_seq_ = 0;
    std::map<CertKey, Entry> entries_;
};

/// Uniform random subset of `neighbors` of size ceil(f * n).
std::vector<NodeId> initial_flood_targets(std::span<const NodeId> neighbors, double f_fraction,
                                          Network& net);

class ProtocolError : public std::logic_error {
public:
    enum class Code { ChallengeAlreadyOpen, NotANeighbor };
    ProtocolError(Code code, const std::string& what) : std::logic_error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

struct TickSummary {
    std::size_t exchanges = 0;
    std::size_t expired_challenges = 0;
    std::size_t aggregated = 0;
    std::size_t alarms_decided = 0;
    std::size_t alarms_raised = 0;
    bool replenished = false;

    bool idle() const {
        return exchanges == 0 && expired_challenges == 0 && aggregated == 0 &&
               alarms_decided == 0 && alarms_raised == 0 && !replenished;
    }
};

struct ProtocolStats {
    std::uint64_t frames_rejected = 0;
    std::uint64_t replays_rejected = 0;
    std::uint64_t certs_accepted = 0;
    std::map<Verdict, std::uint64_t> verdicts;
    std::uint64_t tamper_evidence = 0;
    std::uint64_t bytes_sent = 0;
    std::uint64_t piggyback_bytes = 0;
};

class Node {
public:
    Node(NodeId id, Secret secret, const Authority& authority, ProtocolParams params,
         Network& net, Misbehavior conduct = {});

    NodeId id() const { return id_; }
    const ProtocolParams& params() const { return params_; }
    const Misbehavior& conduct() const { return conduct_; }

    /// Arms the periodic exchange timer with the given first firing time.
    void start(std::uint64_t first_exchange_ms);

    // monitor ------------------------------------------------------------
    void monitor_sampled(NodeId subject);
    void monitor_discard(NodeId subject);
    /// Updates the window; returns a suspicion when it crosses the threshold.
    std::optional<Suspicion> monitor_observe(const ForwardingEvent& event);
    /// monitor_observe followed by the reaction to any suspicion.
    void observe(const ForwardingEvent& event);
    const MonitorWindow* window(NodeId subject) const;

    // collector ----------------------------------------------------------
    void initiate_challenge(NodeId suspect);
    const ChallengeState* challenge(NodeId subject) const;
    const CollectionState* collection() const { return collection_ ? &*collection_ : nullptr; }
    void false_accuse(NodeId target);

    // message entry point --------------------------------------------------
    void receive(NodeId from, std::span<const std::uint8_t> frame);

    // maintainer -----------------------------------------------------------
    Verdict handle_certificate(const GroupTrustCertificate& cert, std::span<const std::uint8_t> bytes,
                               NodeId from, std::uint8_t flags);
    double trust_of(NodeId subject) const;
    const ReputationTable& table() const { return table_; }
    const CertificateCache& cache() const { return cache_; }
    bool holds(const CertKey& k) const { return cache_.contains(k); }

    // propagator -----------------------------------------------------------
    void exchange_with(NodeId neighbor);
    std::vector<CertKey> piggyback_keys() const;
    void on_piggyback(NodeId from, std::span<const CertKey> keys);
    std::size_t wanted_count() const { return wanted_.size(); }

    // alarm raiser -----------------------------------------------------------
    void raise_global_alarm(NodeId subject, std::string_view reason);
    void request_alarm(NodeId subject, std::string_view reason);
    const AlarmState* open_alarm(NodeId subject) const;
    bool considers_isolated(NodeId subject) const { return isolated_.count(subject) != 0; }
    /// Vote this node would cast, or nullopt when it abstains.
    std::optional<bool> opinion(NodeId subject) const;
    bool eligible_voter(NodeId subject) const;

    // interaction tracking ---------------------------------------------------
    void note_interaction(NodeId other);
    void on_link_change(NodeId other, bool up);

    TickSummary tick(std::uint64_t now_ms);

    const ProtocolStats& stats() const { return stats_; }

    // RepBroadcast payload flags
    static constexpr std::uint8_t kFlagSeed = 0x01;      // relay once to own neighbours
    static constexpr std::uint8_t kFlagExchange = 0x02;  // transferred during exchange

private:
    struct AlarmKey {
        std::uint8_t kind;
        NodeId subject;
        NodeId raiser;
        std::uint64_t nonce;
        auto operator<=>(const AlarmKey&) const = default;
    };

    Bytes make_frame(RepMessType type, NodeId subject, std::uint16_t rep_val, Bytes payload);
    void send_frame(NodeId to, RepMessType type, NodeId subject, std::uint16_t rep_val, Bytes payload);
    void send_certificate(NodeId to, const CertificateCache::Entry& e, std::uint8_t flags);
    bool is_neighbor(NodeId other) const;
    void log(EventKind kind, NodeId subject, std::string details = {});

    void on_challenge(const Frame& f);
    void on_challenge_ack(const Frame& f);
    void on_verify_behavior(const Frame& f);
    void on_response(const Frame& f);
    void on_rep_broadcast(NodeId from, const Frame& f);
    void on_rep_request(NodeId from, const Frame& f);
    void on_cert_exchange(NodeId from, const Frame& f);
    void on_global_alarm(NodeId from, const Frame& f);
    void on_alarm_vote(const Frame& f);

    void react_to_suspicion(const Suspicion& s);
    void aggregate_responses();
    void escalate(NodeId subject, std::string_view reason);
    void complete_challenge(NodeId subject);
    void decide_alarm(NodeId subject);
    void flood_alarm(std::uint8_t kind, NodeId subject, NodeId raiser, std::uint64_t nonce,
                     NodeId except);
    bool alarm_suppressed(NodeId subject) const;
    void mark_isolated(NodeId subject);
    void prune(std::uint64_t now);

    NodeId id_;
    Secret secret_;
    const Authority& authority_;
    ProtocolParams params_;
    Network& net_;
    Misbehavior conduct_;

    std::uint64_t nonce_counter_ = 0;
    std::uint64_t round_counter_ = 0;
    std::uint64_t next_exchange_ms_ = 0;
    bool started_ = false;

    std::map<NodeId, MonitorWindow> monitors_;
    std::map<NodeId, ChallengeState> challenges_;
    std::map<NodeId, std::uint64_t> cooldown_until_;
    std::optional<CollectionState> collection_;
    std::map<std::pair<NodeId, std::uint64_t>, ResponseRecord> my_responses_;
    std::map<std::pair<NodeId, std::uint64_t>, std::uint64_t> my_response_times_;

    ReputationTable table_;
    CertificateCache cache_;
    std::map<CertKey, NodeId> wanted_;

    std::map<NodeId, AlarmState> alarms_;
    std::map<NodeId, std::uint64_t> pending_alarms_;
    std::map<NodeId, std::string> pending_reasons_;
    std::map<NodeId, std::uint64_t> last_alarm_seen_;
    std::set<AlarmKey> seen_alarms_;
    std::set<NodeId> isolated_;
    std::set<NodeId> accused_targets_;

    std::map<NodeId, std::uint64_t> last_interaction_;
    std::map<std::pair<NodeId, std::uint64_t>, std::uint64_t> seen_nonces_;

    ProtocolStats stats_;
};

}  // namespace trustwatch
