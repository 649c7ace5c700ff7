#include "trustwatch/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace trustwatch {

namespace {

std::string issue_list(const std::vector<ConfigInvalid::Issue>& issues) {
    std::string s = "invalid scenario:";
    for (const auto& i : issues) s += " " + i.field + ": " + i.message + ";";
    return s;
}

bool unit_interval(double p) { return p >= 0.0 && p <= 1.0; }

std::uint64_t to_ms(double seconds) { return static_cast<std::uint64_t>(std::llround(seconds * 1000.0)); }

void draw_leg(NodeMotion& m, double width, double height, const MobilityConfig& cfg, Rng& rng) {
    m.waypoint = {rng.uniform(0.0, width), rng.uniform(0.0, height)};
    m.speed_mps = cfg.max_speed_mps * (1.0 - rng.uniform01());  // (0, max]
}

}  // namespace

ProtocolParams ScenarioConfig::protocol_params() const {
    ProtocolParams p;
    p.trust = trust;
    p.monitor = monitor;
    p.exchange_interval_ms = to_ms(exchange_interval_s);
    p.f_fraction = f_fraction;
    p.delta_per_certificate = delta_per_certificate;
    return p;
}

ConfigInvalid::ConfigInvalid(std::vector<Issue> issues)
    : std::invalid_argument(issue_list(issues)), issues_(std::move(issues)) {}

void validate(const ScenarioConfig& c) {
    std::vector<ConfigInvalid::Issue> bad;
    auto need = [&bad](bool ok, const char* field, const char* msg) {
        if (!ok) bad.push_back({field, msg});
    };
    need(c.duration_s > 0, "duration_s", "must be positive");
    need(c.width_m > 0, "width_m", "must be positive");
    need(c.height_m > 0, "height_m", "must be positive");
    need(c.node_count > 0, "node_count", "must be positive");
    need(c.tx_range_m > 0, "tx_range_m", "must be positive");
    need(c.fixed_positions.empty() ? c.mobility.max_speed_mps > 0 : true, "max_speed",
         "must be positive (speed interval (0, max] would be empty)");
    need(c.mobility.pause_s >= 0, "pause_s", "must not be negative");
    need(c.flow_count == 0 || c.flow_rate_pps > 0, "flow_rate", "must be positive");
    need(c.flow_count == 0 || c.node_count >= 2, "flow_count", "flows need at least two nodes");
    need(c.packet_bytes > 0, "packet_bytes", "must be positive");
    need(c.buffer_capacity > 0, "buffer_capacity", "must be positive");
    need(c.malicious_count < c.node_count, "malicious_count", "must be below node_count");
    for (NodeId m : c.malicious_nodes)
        need(m >= 1 && m <= c.node_count, "malicious_nodes", "node id out of range");
    for (const auto& [a, b] : c.fixed_flows)
        need(a >= 1 && a <= c.node_count && b >= 1 && b <= c.node_count && a != b, "fixed_flows",
             "endpoints must be distinct node ids");
    need(unit_interval(c.adversary.drop_prob), "drop_prob", "must lie in [0,1]");
    need(unit_interval(c.adversary.tamper_prob), "tamper_prob", "must lie in [0,1]");
    need(c.false_accuse_interval_s > 0, "false_accuse_interval_s", "must be positive");
    need(c.exchange_interval_s > 0, "exchange_interval_s", "must be positive");
    need(unit_interval(c.f_fraction), "F_fraction", "must lie in [0,1]");
    need(unit_interval(c.trust.alpha), "alpha", "must lie in [0,1]");
    need(unit_interval(c.trust.alpha2), "alpha2", "must lie in [0,1]");
    need(unit_interval(c.trust.delta), "delta", "must lie in [0,1]");
    need(unit_interval(c.trust.maliciousness_threshold), "maliciousness_threshold", "must lie in [0,1]");
    need(unit_interval(c.monitor.sampling_prob), "sampling_prob", "must lie in [0,1]");
    need(unit_interval(c.monitor.threshold), "monitor_threshold", "must lie in [0,1]");
    need(c.monitor.window_ms > 0, "monitor_window_s", "must be positive");
    need(c.monitor.min_samples > 0, "min_samples", "must be positive");
    need(c.slot_ms > 0, "slot_ms", "must be positive");
    need(c.hop_latency_ms > 0, "hop_latency_ms", "must be positive");
    need(c.topology_step_ms > 0, "topology_step_ms", "must be positive");
    if (!c.fixed_positions.empty()) {
        need(c.fixed_positions.size() == c.node_count, "fixed_positions", "need one position per node");
        for (const auto& p : c.fixed_positions)
            need(p.x >= 0 && p.x <= c.width_m && p.y >= 0 && p.y <= c.height_m, "fixed_positions",
                 "position outside the area");
    }
    if (!bad.empty()) throw ConfigInvalid(std::move(bad));
}

std::vector<std::string> preset_names() { return {"multihop", "table1-literal", "congestion"}; }

std::optional<ScenarioConfig> preset_config(const std::string& name) {
    ScenarioConfig c;
    c.preset = name;
    if (name == "multihop") return c;
    if (name == "table1-literal") {
        c.tx_range_m = 200.0;
        return c;
    }
    if (name == "congestion") {
        c.malicious_count = 0;
        c.flow_count = 15;
        c.flow_rate_pps = 20.0;
        return c;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

MobilityState initial_mobility(std::uint32_t node_count, double width_m, double height_m,
                               const MobilityConfig& cfg, Rng& rng) {
    MobilityState s;
    s.width_m = width_m;
    s.height_m = height_m;
    s.nodes.resize(node_count);
    for (auto& m : s.nodes) {
        m.position = {rng.uniform(0.0, width_m), rng.uniform(0.0, height_m)};
        draw_leg(m, width_m, height_m, cfg, rng);
    }
    return s;
}

void step_mobility(MobilityState& state, double dt_s, const MobilityConfig& cfg, Rng& rng) {
    for (auto& m : state.nodes) {
        double remaining = dt_s;
        for (int guard = 0; remaining > 0.0 && guard < 64; ++guard) {
            if (m.pause_remaining_s > 0.0) {
                const double used = std::min(m.pause_remaining_s, remaining);
                m.pause_remaining_s -= used;
                remaining -= used;
                if (m.pause_remaining_s > 0.0) break;
                draw_leg(m, state.width_m, state.height_m, cfg, rng);
                continue;
            }
            const double d = distance(m.position, m.waypoint);
            if (d <= 0.0 || m.speed_mps <= 0.0) {
                draw_leg(m, state.width_m, state.height_m, cfg, rng);
                continue;
            }
            const double reach = m.speed_mps * remaining;
            if (reach < d) {
                m.position.x += (m.waypoint.x - m.position.x) * reach / d;
                m.position.y += (m.waypoint.y - m.position.y) * reach / d;
                remaining = 0.0;
            } else {
                m.position = m.waypoint;
                remaining -= d / m.speed_mps;
                m.pause_remaining_s = cfg.pause_s;
                if (cfg.pause_s <= 0.0) draw_leg(m, state.width_m, state.height_m, cfg, rng);
            }
        }
        m.position.x = std::clamp(m.position.x, 0.0, state.width_m);
        m.position.y = std::clamp(m.position.y, 0.0, state.height_m);
    }
}

// ---------------------------------------------------------------------------

Topology Topology::from_positions(std::span<const Vec2> positions, double tx_range_m) {
    Topology t(static_cast<std::uint32_t>(positions.size()));
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = i + 1; j < positions.size(); ++j)
            if (distance(positions[i], positions[j]) <= tx_range_m) {
                t.adj_[i + 1].push_back(static_cast<NodeId>(j + 1));
                t.adj_[j + 1].push_back(static_cast<NodeId>(i + 1));
            }
    for (auto& a : t.adj_) std::sort(a.begin(), a.end());
    return t;
}

Topology Topology::from_edges(std::uint32_t node_count, std::span<const std::pair<NodeId, NodeId>> edges) {
    Topology t(node_count);
    for (auto [a, b] : edges) {
        if (a == b || a == 0 || b == 0 || a > node_count || b > node_count) continue;
        t.adj_[a].push_back(b);
        t.adj_[b].push_back(a);
    }
    for (auto& a : t.adj_) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    return t;
}

std::span<const NodeId> Topology::neighbors(NodeId v) const {
    if (v == 0 || v >= adj_.size()) return {};
    return adj_[v];
}

bool Topology::adjacent(NodeId a, NodeId b) const {
    auto n = neighbors(a);
    return std::binary_search(n.begin(), n.end(), b);
}

std::vector<NodeId> compute_route(NodeId src, NodeId dst, const Topology& topo, const std::set<NodeId>& excluded) {
    const std::uint32_t n = topo.node_count();
    if (src == dst || src == 0 || dst == 0 || src > n || dst > n) return {};
    if (excluded.count(src) || excluded.count(dst)) return {};
    constexpr std::uint32_t kInf = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> dist(n + 1, kInf);
    std::deque<NodeId> q{dst};
    dist[dst] = 0;
    while (!q.empty()) {
        const NodeId v = q.front();
        q.pop_front();
        if (v == src) break;
        for (NodeId u : topo.neighbors(v)) {
            if (dist[u] != kInf || excluded.count(u)) continue;
            dist[u] = dist[v] + 1;
            q.push_back(u);
        }
    }
    if (dist[src] == kInf) return {};
    std::vector<NodeId> route{src};
    NodeId cur = src;
    while (cur != dst) {
        for (NodeId u : topo.neighbors(cur)) {
            if (dist[u] != kInf && dist[u] + 1 == dist[cur] && !excluded.count(u)) {
                cur = u;
                break;
            }
        }
        route.push_back(cur);
    }
    return route;
}

// ---------------------------------------------------------------------------

const char* to_string(DropReason r) {
    switch (r) {
    case DropReason::BufferFull: return "BufferFull";
    case DropReason::Malicious: return "Malicious";
    case DropReason::NoRoute: return "NoRoute";
    }
    return "?";
}

std::uint64_t FlowLedger::dropped_total() const {
    std::uint64_t s = 0;
    for (const auto& [r, n] : dropped) s += n;
    return s;
}

// ---------------------------------------------------------------------------
// World

World::World(ScenarioConfig cfg)
    : cfg_(std::move(cfg)), rng_(cfg_.rng_seed), authority_(derive_secret(cfg_.rng_seed, kAuthorityId)) {
    validate(cfg_);
    const std::uint32_t n = cfg_.node_count;
    truth_.node_count = n;
    truth_.duration_ms = to_ms(cfg_.duration_s);

    std::ostringstream meta;
    meta << "nodes=" << n << " duration_ms=" << truth_.duration_ms << " tx_range=" << cfg_.tx_range_m
         << " width=" << cfg_.width_m << " height=" << cfg_.height_m << " seed=" << cfg_.rng_seed
         << " preset=" << cfg_.preset;
    log_.add(0, EventKind::Meta, 0, 0, meta.str());

    std::vector<NodeId> pool(n);
    for (NodeId i = 0; i < n; ++i) pool[i] = i + 1;
    for (std::uint32_t i = 0; i < cfg_.malicious_count; ++i)
        std::swap(pool[i], pool[i + rng_.below(n - i)]);
    truth_.malicious.insert(pool.begin(), pool.begin() + cfg_.malicious_count);
    if (!cfg_.malicious_nodes.empty()) truth_.malicious = cfg_.malicious_nodes;

    const ProtocolParams params = cfg_.protocol_params();
    for (NodeId id = 1; id <= n; ++id) {
        const Secret secret = derive_secret(cfg_.rng_seed, id);
        const Binding binding = authority_.enroll_key(secret);
        const std::string credential = "hw-" + std::to_string(id);
        authority_.issue_identity(id, std::span(reinterpret_cast<const std::uint8_t*>(credential.data()),
                                                credential.size()),
                                  binding);
        Misbehavior conduct;
        if (truth_.malicious.count(id)) {
            const AdversaryProfile& a = cfg_.adversary;
            adversaries_[id] = a;
            conduct.drops_certificates = a.drops_certificates;
            conduct.drops_feedback_in_aggregate = a.drops_feedback_in_aggregate;
            conduct.tampers_certificates = a.tampers_certificates;
            conduct.false_accuser = a.false_accuser;
            conduct.silent_on_challenge = a.silent_on_challenge;
            if (a.colluding)
                for (NodeId m : truth_.malicious)
                    if (m != id) conduct.colluding_set.insert(m);
            std::ostringstream d;
            d << "drop=" << a.drop_prob << " tamper=" << a.tamper_prob << " drops_certs=" << a.drops_certificates
              << " drops_feedback=" << a.drops_feedback_in_aggregate << " tampers_certs=" << a.tampers_certificates
              << " false_accuser=" << a.false_accuser << " silent=" << a.silent_on_challenge
              << " colluding=" << a.colluding;
            log_.add(0, EventKind::Adversary, id, id, d.str());
        }
        nodes_.push_back(std::make_unique<Node>(id, secret, authority_, params, *this, std::move(conduct)));
    }

    if (cfg_.fixed_positions.empty()) {
        mobility_ = initial_mobility(n, cfg_.width_m, cfg_.height_m, cfg_.mobility, rng_);
    } else {
        mobility_.width_m = cfg_.width_m;
        mobility_.height_m = cfg_.height_m;
        for (const auto& p : cfg_.fixed_positions) mobility_.nodes.push_back({p, p, 0.0, 0.0});
    }
    std::vector<Vec2> pos;
    for (const auto& m : mobility_.nodes) pos.push_back(m.position);
    topo_ = Topology::from_positions(pos, cfg_.tx_range_m);
    for (NodeId a = 1; a <= n; ++a)
        for (NodeId b : topo_.neighbors(a))
            if (a < b) log_.add(0, EventKind::LinkUp, a, b);

    buffers_.resize(n + 1);
    serving_.assign(n + 1, false);
    next_slot_.assign(n + 1, 0);

    const std::uint64_t period = std::max<std::uint64_t>(1, to_ms(1.0 / std::max(cfg_.flow_rate_pps, 1e-9)));
    const std::uint32_t flow_count =
        cfg_.fixed_flows.empty() ? cfg_.flow_count : static_cast<std::uint32_t>(cfg_.fixed_flows.size());
    for (std::uint32_t f = 0; f < flow_count; ++f) {
        Flow fl;
        if (!cfg_.fixed_flows.empty()) {
            fl.src = cfg_.fixed_flows[f].first;
            fl.dst = cfg_.fixed_flows[f].second;
        } else {
            fl.src = static_cast<NodeId>(1 + rng_.below(n));
            do {
                fl.dst = static_cast<NodeId>(1 + rng_.below(n));
            } while (fl.dst == fl.src);
        }
        flow_defs_.push_back(fl);
        ledgers_.emplace_back();
        push(rng_.below(period), Ev::FlowSend, 0, 0, f);
    }

    const std::uint64_t interval = params.exchange_interval_ms;
    for (NodeId id = 1; id <= n; ++id) node(id).start(1 + rng_.below(interval));

    if (cfg_.fixed_positions.empty()) push(cfg_.topology_step_ms, Ev::Topology);

    const std::uint64_t accuse = std::max<std::uint64_t>(1, to_ms(cfg_.false_accuse_interval_s));
    for (const auto& [id, a] : adversaries_)
        if (a.false_accuser) push(1 + rng_.below(accuse), Ev::FalseAccuse, id);
}

World::~World() = default;

void World::push(std::uint64_t at, Ev kind, NodeId a, NodeId b, std::uint64_t ref) {
    queue_.push(Event{std::max(at, now_), seq_++, kind, a, b, ref});
}

void World::schedule_challenge(NodeId accuser, NodeId suspect, std::uint64_t at_ms) {
    push(at_ms, Ev::Challenge, accuser, suspect);
}

void World::record(EventKind kind, NodeId actor, NodeId subject, std::string details) {
    log_.add(now_, kind, actor, subject, std::move(details));
}

void World::wake_at(NodeId node, std::uint64_t at_ms) { push(at_ms, Ev::Wake, node); }

void World::declare_isolated(NodeId subject) { isolated_.insert(subject); }

void World::send(NodeId from, NodeId to, Bytes frame) {
    const auto type = static_cast<RepMessType>(frame.size() > 1 ? frame[1] : 0);
    ++overhead_.frames[type];
    overhead_.control_bytes += frame.size();
    if (!topo_.adjacent(from, to)) {
        ++overhead_.lost_frames;
        return;
    }
    const std::uint64_t ref = next_ref_++;
    frames_[ref] = std::move(frame);
    push(now_ + cfg_.hop_latency_ms, Ev::Deliver, from, to, ref);
}

void World::send_routed(NodeId from, NodeId to, Bytes frame) {
    const auto type = static_cast<RepMessType>(frame.size() > 1 ? frame[1] : 0);
    std::set<NodeId> excluded = isolated_;
    excluded.erase(from);
    excluded.erase(to);
    const auto route = compute_route(from, to, topo_, excluded);
    const std::uint64_t hops = route.empty() ? 0 : route.size() - 1;
    overhead_.frames[type] += std::max<std::uint64_t>(hops, 1);
    overhead_.control_bytes += frame.size() * std::max<std::uint64_t>(hops, 1);
    if (route.empty()) {
        ++overhead_.lost_frames;
        return;
    }
    const std::uint64_t ref = next_ref_++;
    frames_[ref] = std::move(frame);
    push(now_ + cfg_.hop_latency_ms * hops, Ev::Deliver, from, to, ref);
}

RunResult World::run() {
    if (ran_) throw std::logic_error("World::run called twice");
    ran_ = true;
    const std::uint64_t end = truth_.duration_ms;
    while (!queue_.empty()) {
        const Event e = queue_.top();
        if (e.time > end) break;
        queue_.pop();
        now_ = e.time;
        switch (e.kind) {
        case Ev::Topology: step_topology(); break;
        case Ev::FlowSend: on_flow_send(static_cast<std::uint32_t>(e.ref)); break;
        case Ev::Service: on_service(e.a); break;
        case Ev::Arrive: on_arrive(e.a, e.ref); break;
        case Ev::Deliver: {
            auto it = frames_.find(e.ref);
            Bytes bytes = std::move(it->second);
            frames_.erase(it);
            node(e.b).receive(e.a, bytes);
            break;
        }
        case Ev::Wake: node(e.a).tick(now_); break;
        case Ev::ObsDeadline: {
            auto it = pending_obs_.find(e.ref);
            const Pending p = it->second;
            pending_obs_.erase(it);
            if (topo_.adjacent(p.witness, p.subject)) {
                record(EventKind::Obs, p.witness, p.subject, to_string(Outcome::Dropped));
                node(p.witness).observe({p.subject, Outcome::Dropped, now_});
            } else {
                node(p.witness).monitor_discard(p.subject);
            }
            break;
        }
        case Ev::FalseAccuse: on_false_accuse(e.a); break;
        case Ev::Challenge:
            if (topo_.adjacent(e.a, e.b) && !node(e.a).challenge(e.b)) node(e.a).initiate_challenge(e.b);
            break;
        }
        check_conservation();
    }
    now_ = end;

    std::uint64_t sent = 0, delivered = 0, dropped = 0, frames = 0;
    for (const auto& l : ledgers_) {
        sent += l.sent;
        delivered += l.delivered;
        dropped += l.dropped_total();
    }
    for (const auto& [t, c] : overhead_.frames) frames += c;
    std::ostringstream s;
    s << "sent=" << sent << " delivered=" << delivered << " dropped=" << dropped << " control_frames=" << frames
      << " control_bytes=" << overhead_.control_bytes << " piggyback_bytes=" << overhead_.piggyback_bytes
      << " data_bytes=" << overhead_.data_bytes << " route_discoveries=" << overhead_.route_discoveries
      << " lost_frames=" << overhead_.lost_frames;
    log_.add(end, EventKind::Summary, 0, 0, s.str());

    RunResult r;
    r.log = std::move(log_);
    r.truth = truth_;
    r.overhead = overhead_;
    r.flows = ledgers_;
    return r;
}

void World::check_conservation() const {
    for (const auto& l : ledgers_)
        if (!l.balanced()) throw std::logic_error("packet conservation violated");
}

void World::step_topology() {
    step_mobility(mobility_, static_cast<double>(cfg_.topology_step_ms) / 1000.0, cfg_.mobility, rng_);
    std::vector<Vec2> pos;
    pos.reserve(mobility_.nodes.size());
    for (const auto& m : mobility_.nodes) pos.push_back(m.position);
    Topology next = Topology::from_positions(pos, cfg_.tx_range_m);

    std::vector<std::pair<std::pair<NodeId, NodeId>, bool>> changes;
    for (NodeId a = 1; a <= cfg_.node_count; ++a) {
        auto before = topo_.neighbors(a);
        auto after = next.neighbors(a);
        std::vector<NodeId> up, down;
        std::set_difference(after.begin(), after.end(), before.begin(), before.end(), std::back_inserter(up));
        std::set_difference(before.begin(), before.end(), after.begin(), after.end(), std::back_inserter(down));
        for (NodeId b : up)
            if (a < b) changes.push_back({{a, b}, true});
        for (NodeId b : down)
            if (a < b) changes.push_back({{a, b}, false});
    }
    std::sort(changes.begin(), changes.end());
    topo_ = std::move(next);
    for (const auto& [pair, up] : changes) {
        record(up ? EventKind::LinkUp : EventKind::LinkDown, pair.first, pair.second, {});
        node(pair.first).on_link_change(pair.second, up);
        node(pair.second).on_link_change(pair.first, up);
    }
    push(now_ + cfg_.topology_step_ms, Ev::Topology);
}

bool World::route_usable(const std::vector<NodeId>& route) const {
    if (route.size() < 2) return false;
    for (std::size_t i = 0; i + 1 < route.size(); ++i) {
        if (!topo_.adjacent(route[i], route[i + 1])) return false;
        if (i > 0 && isolated_.count(route[i])) return false;
    }
    return !isolated_.count(route.back());
}

bool World::route_packet(Packet& p, NodeId from) {
    std::set<NodeId> excluded = isolated_;
    excluded.erase(from);
    auto route = compute_route(from, p.dst, topo_, excluded);
    if (route.empty()) return false;
    std::vector<NodeId> full(p.source_route.begin(), p.source_route.begin() + static_cast<long>(p.hop_index));
    full.insert(full.end(), route.begin(), route.end());
    p.source_route = std::move(full);
    return true;
}

void World::on_flow_send(std::uint32_t f) {
    Flow& fl = flow_defs_[f];
    FlowLedger& l = ledgers_[f];
    const std::uint64_t period = std::max<std::uint64_t>(1, to_ms(1.0 / cfg_.flow_rate_pps));
    push(now_ + period, Ev::FlowSend, 0, 0, f);

    Packet p;
    p.id = next_packet_++;
    p.flow = f;
    p.src = fl.src;
    p.dst = fl.dst;
    p.created_ms = now_;
    p.payload_digest = digest64(std::span(reinterpret_cast<const std::uint8_t*>(&p.id), sizeof p.id));
    ++l.sent;

    if (isolated_.count(fl.src)) {
        ++l.dropped[DropReason::NoRoute];
        return;
    }
    if (!route_usable(fl.route)) {
        fl.route = compute_route(fl.src, fl.dst, topo_, isolated_);
        ++overhead_.route_discoveries;
        record(EventKind::RouteDiscovery, fl.src, fl.dst, "flow=" + std::to_string(f));
    }
    auto route = fl.route;
    if (route.empty()) {
        ++l.dropped[DropReason::NoRoute];
        record(EventKind::PacketDrop, fl.src, 0, "reason=NoRoute flow=" + std::to_string(f));
        return;
    }
    p.source_route = std::move(route);
    const std::uint64_t id = p.id;
    packets_.emplace(id, std::move(p));
    enqueue(fl.src, id);
}

void World::enqueue(NodeId node_id, std::uint64_t packet_id) {
    auto& buf = buffers_[node_id];
    if (buf.size() >= cfg_.buffer_capacity) {
        drop(packet_id, node_id, DropReason::BufferFull, true);
        return;
    }
    buf.push_back(packet_id);
    ++ledgers_[packets_.at(packet_id).flow].in_buffer;
    if (!serving_[node_id]) {
        serving_[node_id] = true;
        push(std::max(now_, next_slot_[node_id]), Ev::Service, node_id);
    }
}

void World::drop(std::uint64_t packet_id, NodeId at, DropReason reason, bool observable) {
    auto it = packets_.find(packet_id);
    Packet& p = it->second;
    ++ledgers_[p.flow].dropped[reason];
    record(EventKind::PacketDrop, at, p.dst,
           std::string("reason=") + to_string(reason) + " flow=" + std::to_string(p.flow));
    for (const auto& [w, sampled_at] : p.witnesses) {
        if (observable) {
            const std::uint64_t ref = next_ref_++;
            pending_obs_[ref] = {w, at};
            push(sampled_at + cfg_.monitor.observation_deadline_ms, Ev::ObsDeadline, w, at, ref);
        } else {
            node(w).monitor_discard(at);
        }
    }
    packets_.erase(it);
}

void World::sample_witnesses(Packet& p, NodeId upstream, NodeId forwarder) {
    std::vector<NodeId> candidates{upstream};
    auto nu = topo_.neighbors(upstream);
    auto nf = topo_.neighbors(forwarder);
    std::set_intersection(nu.begin(), nu.end(), nf.begin(), nf.end(), std::back_inserter(candidates));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    p.witnesses.clear();
    for (NodeId w : candidates) {
        if (w == forwarder || isolated_.count(w)) continue;
        if (!rng_.bernoulli(cfg_.monitor.sampling_prob)) continue;
        node(w).monitor_sampled(forwarder);
        p.witnesses.emplace_back(w, now_);
    }
}

void World::resolve_witnesses(Packet& p, NodeId forwarder, Outcome outcome) {
    for (const auto& [w, sampled_at] : p.witnesses) {
        if (topo_.adjacent(w, forwarder)) {
            record(EventKind::Obs, w, forwarder, to_string(outcome));
            node(w).observe({forwarder, outcome, now_});
        } else {
            node(w).monitor_discard(forwarder);
        }
    }
    p.witnesses.clear();
}

void World::on_service(NodeId at) {
    auto& buf = buffers_[at];
    if (buf.empty()) {
        serving_[at] = false;
        return;
    }
    next_slot_[at] = now_ + cfg_.slot_ms;
    const std::uint64_t id = buf.front();
    buf.pop_front();
    Packet& p = packets_.at(id);
    FlowLedger& l = ledgers_[p.flow];
    --l.in_buffer;

    auto reschedule = [this, at]() {
        if (buffers_[at].empty())
            serving_[at] = false;
        else
            push(next_slot_[at], Ev::Service, at);
    };

    const auto adv = adversaries_.find(at);
    if (adv != adversaries_.end() && p.hop_index > 0) {
        if (rng_.bernoulli(adv->second.drop_prob)) {
            drop(id, at, DropReason::Malicious, true);
            reschedule();
            return;
        }
        if (rng_.bernoulli(adv->second.tamper_prob)) {
            p.altered = true;
            p.payload_digest ^= 0x9e3779b97f4a7c15ULL;
        }
    }

    NodeId next = p.source_route[p.hop_index + 1];
    if (!topo_.adjacent(at, next) || isolated_.count(next)) {
        ++overhead_.route_discoveries;
        record(EventKind::RouteDiscovery, at, p.dst, "salvage flow=" + std::to_string(p.flow));
        if (!route_packet(p, at)) {
            drop(id, at, DropReason::NoRoute, false);
            reschedule();
            return;
        }
        next = p.source_route[p.hop_index + 1];
    }

    if (p.hop_index > 0) resolve_witnesses(p, at, p.altered ? Outcome::Modified : Outcome::Forwarded);
    overhead_.data_bytes += cfg_.packet_bytes;
    const auto keys = node(at).piggyback_keys();
    if (!keys.empty()) {
        overhead_.piggyback_bytes += keys.size() * 16;
        node(next).on_piggyback(at, keys);
    }
    ++p.hop_index;
    ++l.in_flight;
    push(now_ + cfg_.hop_latency_ms, Ev::Arrive, next, 0, id);
    reschedule();
}

void World::on_arrive(NodeId at, std::uint64_t packet_id) {
    Packet& p = packets_.at(packet_id);
    FlowLedger& l = ledgers_[p.flow];
    --l.in_flight;
    if (at == p.dst) {
        ++l.delivered;
        packets_.erase(packet_id);
        return;
    }
    sample_witnesses(p, p.source_route[p.hop_index - 1], at);
    enqueue(at, packet_id);
}

void World::on_false_accuse(NodeId id) {
    push(now_ + std::max<std::uint64_t>(1, to_ms(cfg_.false_accuse_interval_s)), Ev::FalseAccuse, id);
    std::vector<NodeId> targets;
    for (NodeId v : topo_.neighbors(id))
        if (!truth_.malicious.count(v) && !isolated_.count(v)) targets.push_back(v);
    if (targets.empty()) return;
    node(id).false_accuse(targets[rng_.below(targets.size())]);
}

RunResult run(const ScenarioConfig& cfg) {
    World w(cfg);
    return w.run();
}

}  // namespace trustwatch
