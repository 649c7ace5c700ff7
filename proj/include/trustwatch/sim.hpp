#pragma once

// Discrete-event world: random-waypoint mobility, unit-disk topology, CBR
// flows over shortest source routes, FIFO buffers and adversaries.

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trustwatch/event_log.hpp"
#include "trustwatch/messages.hpp"
#include "trustwatch/node_protocol.hpp"
#include "trustwatch/trust_math.hpp"

namespace trustwatch {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Vec2 a, Vec2 b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

/// One 64-bit Mersenne Twister stream with portable derived draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next() { return engine_(); }
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    /// Uniform on [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }
    bool bernoulli(double p) { return p >= 1.0 || (p > 0.0 && uniform01() < p); }

private:
    std::mt19937_64 engine_;
};

struct MobilityConfig {
    double max_speed_mps = 20.0;
    double pause_s = 5.0;
};

struct AdversaryProfile {
    double drop_prob = 1.0;
    double tamper_prob = 0.0;
    bool drops_certificates = false;
    bool drops_feedback_in_aggregate = false;
    bool tampers_certificates = false;
    bool false_accuser = false;
    bool silent_on_challenge = false;
    bool colluding = false;  // colluding set = all other adversaries
};

struct ScenarioConfig {
    double duration_s = 1000.0;
    double width_m = 100.0;
    double height_m = 100.0;
    std::uint32_t node_count = 50;
    double tx_range_m = 30.0;
    MobilityConfig mobility;
    std::uint32_t flow_count = 15;
    double flow_rate_pps = 2.0;
    std::uint32_t packet_bytes = 512;
    std::uint32_t buffer_capacity = 64;
    std::uint32_t malicious_count = 5;
    AdversaryProfile adversary;
    double false_accuse_interval_s = 100.0;
    double exchange_interval_s = 60.0;
    double f_fraction = 0.5;
    UpdateParams trust;
    MonitorParams monitor;
    bool delta_per_certificate = false;
    std::uint64_t slot_ms = 10;
    std::uint64_t hop_latency_ms = 5;
    std::uint64_t topology_step_ms = 100;
    std::uint64_t rng_seed = 1;
    std::string preset = "multihop";
    /// When non-empty the nodes never move and sit here (index i is node i+1).
    std::vector<Vec2> fixed_positions;
    /// When non-empty, replaces the random adversary draw and malicious_count.
    std::set<NodeId> malicious_nodes;
    /// When non-empty, replaces the random flow endpoints and flow_count.
    std::vector<std::pair<NodeId, NodeId>> fixed_flows;

    ProtocolParams protocol_params() const;
};

class ConfigInvalid : public std::invalid_argument {
public:
    struct Issue {
        std::string field;
        std::string message;
    };
    explicit ConfigInvalid(std::vector<Issue> issues);
    const std::vector<Issue>& issues() const noexcept { return issues_; }

private:
    std::vector<Issue> issues_;
};

/// Throws ConfigInvalid listing every offending field.
void validate(const ScenarioConfig& cfg);

/// Named preset, or nullopt when the name is unknown.
std::optional<ScenarioConfig> preset_config(const std::string& name);
std::vector<std::string> preset_names();

// ---------------------------------------------------------------------------
// Mobility

struct NodeMotion {
    Vec2 position;
    Vec2 waypoint;
    double speed_mps = 0.0;
    double pause_remaining_s = 0.0;
};

struct MobilityState {
    double width_m = 100.0;
    double height_m = 100.0;
    std::vector<NodeMotion> nodes;  // index i is node i+1
};

MobilityState initial_mobility(std::uint32_t node_count, double width_m, double height_m,
                               const MobilityConfig& cfg, Rng& rng);

/// Advances every node by `dt_s` seconds of random-waypoint motion.
void step_mobility(MobilityState& state, double dt_s, const MobilityConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Topology and routing

class Topology {
public:
    Topology() = default;
    explicit Topology(std::uint32_t node_count) : adj_(node_count + 1) {}

    static Topology from_positions(std::span<const Vec2> positions, double tx_range_m);
    static Topology from_edges(std::uint32_t node_count,
                               std::span<const std::pair<NodeId, NodeId>> edges);

    std::uint32_t node_count() const { return adj_.empty() ? 0 : static_cast<std::uint32_t>(adj_.size() - 1); }
    std::span<const NodeId> neighbors(NodeId v) const;
    bool adjacent(NodeId a, NodeId b) const;

private:
    std::vector<std::vector<NodeId>> adj_;  // adj_[0] unused
};

/// Shortest hop path avoiding `excluded`, ties broken by the smallest node-id
/// sequence. Empty when no route exists.
std::vector<NodeId> compute_route(NodeId src, NodeId dst, const Topology& topo,
                                  const std::set<NodeId>& excluded);

// ---------------------------------------------------------------------------
// Packets

enum class DropReason { BufferFull, Malicious, NoRoute };
const char* to_string(DropReason r);

struct Packet {
    std::uint64_t id = 0;
    std::uint32_t flow = 0;
    NodeId src = 0;
    NodeId dst = 0;
    std::vector<NodeId> source_route;
    std::size_t hop_index = 0;
    std::uint64_t payload_digest = 0;
    std::uint64_t created_ms = 0;
    bool altered = false;
    std::vector<std::pair<NodeId, std::uint64_t>> witnesses;  // (monitor, sampled at)
};

/// Per-flow conservation counters.
struct FlowLedger {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::map<DropReason, std::uint64_t> dropped;
    std::int64_t in_buffer = 0;
    std::int64_t in_flight = 0;

    std::uint64_t dropped_total() const;
    bool balanced() const {
        return static_cast<std::int64_t>(sent) ==
               static_cast<std::int64_t>(delivered + dropped_total()) + in_buffer + in_flight;
    }
};

struct OverheadLedger {
    std::map<RepMessType, std::uint64_t> frames;
    std::uint64_t control_bytes = 0;
    std::uint64_t piggyback_bytes = 0;
    std::uint64_t data_bytes = 0;
    std::uint64_t route_discoveries = 0;
    std::uint64_t lost_frames = 0;
};

struct GroundTruth {
    std::uint32_t node_count = 0;
    std::uint64_t duration_ms = 0;
    std::set<NodeId> malicious;
};

struct RunResult {
    EventLog log;
    GroundTruth truth;
    OverheadLedger overhead;
    std::vector<FlowLedger> flows;
};

class World final : public Network {
public:
    explicit World(ScenarioConfig cfg);
    ~World() override;

    /// Runs to the configured duration. Call once.
    RunResult run();

    /// Makes `accuser` challenge `suspect` at the given time (test hook).
    void schedule_challenge(NodeId accuser, NodeId suspect, std::uint64_t at_ms);

    Node& node(NodeId id) { return *nodes_.at(id - 1); }
    const Authority& authority() const { return authority_; }
    const Topology& topology() const { return topo_; }
    const MobilityState& mobility() const { return mobility_; }
    const GroundTruth& truth() const { return truth_; }
    const std::set<NodeId>& isolated() const { return isolated_; }
    const std::vector<FlowLedger>& flows() const { return ledgers_; }

    // Network
    std::uint64_t now_ms() const override { return now_; }
    std::span<const NodeId> neighbors_of(NodeId node) const override { return topo_.neighbors(node); }
    void send(NodeId from, NodeId to, Bytes frame) override;
    void send_routed(NodeId from, NodeId to, Bytes frame) override;
    void wake_at(NodeId node, std::uint64_t at_ms) override;
    void record(EventKind kind, NodeId actor, NodeId subject, std::string details) override;
    double uniform01() override { return rng_.uniform01(); }
    void declare_isolated(NodeId subject) override;

private:
    enum class Ev { Topology, FlowSend, Service, Arrive, Deliver, Wake, ObsDeadline, FalseAccuse, Challenge };
    struct Event {
        std::uint64_t time = 0;
        std::uint64_t seq = 0;
        Ev kind = Ev::Wake;
        NodeId a = 0;
        NodeId b = 0;
        std::uint64_t ref = 0;
        bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
    };
    struct Flow {
        NodeId src = 0;
        NodeId dst = 0;
        std::vector<NodeId> route;
    };
    struct Pending {  // dropped packet awaiting monitor deadline
        NodeId witness = 0;
        NodeId subject = 0;
    };

    void push(std::uint64_t at, Ev kind, NodeId a = 0, NodeId b = 0, std::uint64_t ref = 0);
    void step_topology();
    void on_flow_send(std::uint32_t flow);
    void on_service(NodeId node);
    void on_arrive(NodeId node, std::uint64_t packet_id);
    void enqueue(NodeId node, std::uint64_t packet_id);
    void drop(std::uint64_t packet_id, NodeId at, DropReason reason, bool observable);
    void resolve_witnesses(Packet& p, NodeId forwarder, Outcome outcome);
    void sample_witnesses(Packet& p, NodeId upstream, NodeId forwarder);
    void on_false_accuse(NodeId node);
    bool route_packet(Packet& p, NodeId from);
    bool route_usable(const std::vector<NodeId>& route) const;
    void check_conservation() const;

    ScenarioConfig cfg_;
    Rng rng_;
    Authority authority_;
    EventLog log_;
    GroundTruth truth_;
    std::map<NodeId, AdversaryProfile> adversaries_;
    std::vector<std::unique_ptr<Node>> nodes_;
    MobilityState mobility_;
    Topology topo_;
    std::set<NodeId> isolated_;

    std::vector<Flow> flow_defs_;
    std::vector<FlowLedger> ledgers_;
    std::map<std::uint64_t, Packet> packets_;
    std::vector<std::deque<std::uint64_t>> buffers_;
    std::vector<bool> serving_;
    std::vector<std::uint64_t> next_slot_;
    std::map<std::uint64_t, Bytes> frames_;
    std::map<std::uint64_t, NodeId> frame_from_;
    std::map<std::uint64_t, Pending> pending_obs_;
    OverheadLedger overhead_;

    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::uint64_t now_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t next_packet_ = 0;
    std::uint64_t next_ref_ = 0;
    bool ran_ = false;
};

/// Convenience: build a World and run it.
RunResult run(const ScenarioConfig& cfg);

}  // namespace trustwatch
