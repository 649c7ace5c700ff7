#include "trustwatch/node_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace trustwatch {

namespace {

constexpr std::uint8_t kAlarmRaised = 0;
constexpr std::uint8_t kAlarmVerdict = 1;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

void write_key(ByteWriter& w, const CertKey& k) { w.u32(k.subject).u32(k.issuer).u64(k.issued_at_ms); }

CertKey read_key(ByteReader& r) {
    CertKey k;
    k.subject = r.u32();
    k.issuer = r.u32();
    k.issued_at_ms = r.u64();
    return k;
}

}  // namespace

const char* to_string(Outcome o) {
    switch (o) {
    case Outcome::Forwarded: return "ok";
    case Outcome::Dropped: return "drop";
    case Outcome::Modified: return "mod";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// MonitorWindow

void MonitorWindow::count(Outcome o, int delta) {
    switch (o) {
    case Outcome::Forwarded: ok_ += delta; break;
    case Outcome::Dropped: dropped_ += delta; break;
    case Outcome::Modified: modified_ += delta; break;
    }
}

void MonitorWindow::record(Outcome o, std::uint64_t now_ms) {
    discard();
    prune(now_ms);
    events_.emplace_back(now_ms, o);
    count(o, +1);
}

void MonitorWindow::prune(std::uint64_t now_ms) {
    while (!events_.empty() && events_.front().first + window_ms_ < now_ms) {
        count(events_.front().second, -1);
        events_.pop_front();
    }
}

// ---------------------------------------------------------------------------

AlarmOutcome tally_votes(const std::map<NodeId, bool>& votes) {
    if (votes.empty()) return AlarmOutcome::NoDecision;
    std::size_t yes = 0;
    for (const auto& [voter, vote] : votes) yes += vote ? 1 : 0;
    return 2 * yes > votes.size() ? AlarmOutcome::Isolated : AlarmOutcome::Rejected;
}

const CertificateCache::Entry* CertificateCache::find(const CertKey& k) const {
    auto it = entries_.find(k);
    return it == entries_.end() ? nullptr : &it->second;
}

std::optional<CertKey> CertificateCache::insert(GroupTrustCertificate cert, Bytes bytes) {
    const CertKey key = cert.key();
    std::optional<CertKey> evicted;
    if (!entries_.count(key) && entries_.size() >= capacity_ && capacity_ > 0) {
        auto oldest = std::min_element(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
            return a.second.seq < b.second.seq;
        });
        evicted = oldest->first;
        entries_.erase(oldest);
    }
    Entry e;
    e.digest = digest64(bytes);
    e.cert = std::move(cert);
    e.bytes = std::move(bytes);
    e.seq = next_seq_++;
    entries_[key] = std::move(e);
    return evicted;
}

std::vector<CertKey> CertificateCache::keys() const {
    std::vector<CertKey> out;
    out.reserve(entries_.size());
    for (const auto& [k, e] : entries_) out.push_back(k);
    return out;
}

std::vector<CertKey> CertificateCache::most_recent(std::size_t n) const {
    std::vector<std::pair<std::uint64_t, CertKey>> by_seq;
    for (const auto& [k, e] : entries_) by_seq.emplace_back(e.seq, k);
    std::sort(by_seq.begin(), by_seq.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<CertKey> out;
    for (std::size_t i = 0; i < by_seq.size() && i < n; ++i) out.push_back(by_seq[i].second);
    return out;
}

std::vector<NodeId> initial_flood_targets(std::span<const NodeId> neighbors, double f_fraction,
                                          Network& net) {
    const std::size_t n = neighbors.size();
    const double want = std::ceil(std::clamp(f_fraction, 0.0, 1.0) * static_cast<double>(n) - 1e-9);
    const std::size_t k = std::min(n, static_cast<std::size_t>(std::max(0.0, want)));
    std::vector<NodeId> pool(neighbors.begin(), neighbors.end());
    for (std::size_t i = 0; i < k; ++i) {
        auto j = i + static_cast<std::size_t>(net.uniform01() * static_cast<double>(n - i));
        if (j >= n) j = n - 1;
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

// ---------------------------------------------------------------------------
// Node

Node::Node(NodeId id, Secret secret, const Authority& authority, ProtocolParams params,
           Network& net, Misbehavior conduct)
    : id_(id),
      secret_(secret),
      authority_(authority),
      params_(params),
      net_(net),
      conduct_(std::move(conduct)),
      cache_(params.cache_capacity) {}

void Node::start(std::uint64_t first_exchange_ms) {
    started_ = true;
    next_exchange_ms_ = first_exchange_ms;
    net_.wake_at(id_, first_exchange_ms);
}

void Node::log(EventKind kind, NodeId subject, std::string details) {
    net_.record(kind, id_, subject, std::move(details));
}

bool Node::is_neighbor(NodeId other) const {
    auto n = net_.neighbors_of(id_);
    return std::binary_search(n.begin(), n.end(), other);
}

Bytes Node::make_frame(RepMessType type, NodeId subject, std::uint16_t rep_val, Bytes payload) {
    ReputationHeader h;
    h.type = type;
    h.subject = subject;
    h.rep_val = rep_val;
    h.timestamp_ms = net_.now_ms();
    h.nonce = ++nonce_counter_;
    h.sender = id_;
    return encode_rep_mess(h, payload, secret_);
}

void Node::send_frame(NodeId to, RepMessType type, NodeId subject, std::uint16_t rep_val, Bytes payload) {
    Bytes frame = make_frame(type, subject, rep_val, std::move(payload));
    stats_.bytes_sent += frame.size();
    net_.send(id_, to, std::move(frame));
}

// monitor --------------------------------------------------------------------

void Node::monitor_sampled(NodeId subject) {
    monitors_.try_emplace(subject, params_.monitor.window_ms).first->second.sampled();
}

void Node::monitor_discard(NodeId subject) {
    auto it = monitors_.find(subject);
    if (it != monitors_.end()) it->second.discard();
}

std::optional<Suspicion> Node::monitor_observe(const ForwardingEvent& event) {
    if (event.subject == id_) return std::nullopt;
    auto& w = monitors_.try_emplace(event.subject, params_.monitor.window_ms).first->second;
    w.record(event.outcome, event.time_ms);
    const double m = w.maliciousness();
    if (w.resolved() >= params_.monitor.min_samples && m > params_.monitor.threshold)
        return Suspicion{event.subject, m};
    return std::nullopt;
}

void Node::observe(const ForwardingEvent& event) {
    if (auto s = monitor_observe(event)) react_to_suspicion(*s);
}

const MonitorWindow* Node::window(NodeId subject) const {
    auto it = monitors_.find(subject);
    return it == monitors_.end() ? nullptr : &it->second;
}

void Node::react_to_suspicion(const Suspicion& s) {
    const auto now = net_.now_ms();
    if (isolated_.count(s.subject) || challenges_.count(s.subject) || !is_neighbor(s.subject)) return;
    if (auto it = cooldown_until_.find(s.subject); it != cooldown_until_.end() && now < it->second) return;
    if (auto it = last_alarm_seen_.find(s.subject);
        it != last_alarm_seen_.end() && now < it->second + params_.alarm_holdoff_ms)
        return;
    log(EventKind::Suspicion, s.subject, "m=" + fmt_double(s.maliciousness));
    initiate_challenge(s.subject);
}

// collector ------------------------------------------------------------------

void Node::initiate_challenge(NodeId suspect) {
    if (challenges_.count(suspect))
        throw ProtocolError(ProtocolError::Code::ChallengeAlreadyOpen,
                            "challenge already open for node " + std::to_string(suspect));
    const auto now = net_.now_ms();
    ChallengeState st;
    st.subject = suspect;
    st.initiated_at_ms = now;
    st.ack_deadline_ms = now + params_.ack_deadline_ms;
    st.cert_deadline_ms =
        now + params_.ack_deadline_ms + params_.collection_window_ms + params_.certificate_grace_ms;
    challenges_[suspect] = st;

    double m = 0.0;
    if (auto* w = window(suspect)) m = w->maliciousness();
    send_frame(suspect, RepMessType::Challenge, suspect, to_fixed(m), {});
    log(EventKind::Challenge, suspect);
    net_.wake_at(id_, st.ack_deadline_ms);
}

const ChallengeState* Node::challenge(NodeId subject) const {
    auto it = challenges_.find(subject);
    return it == challenges_.end() ? nullptr : &it->second;
}

void Node::false_accuse(NodeId target) {
    if (target == id_) return;
    accused_targets_.insert(target);
    if (!challenges_.count(target) && is_neighbor(target)) initiate_challenge(target);
    raise_global_alarm(target, "accusation");
}

void Node::on_challenge(const Frame& f) {
    const NodeId accuser = f.header.sender;
    if (f.header.subject != id_ || conduct_.silent_on_challenge) return;
    if (!is_neighbor(accuser)) return;
    const auto now = net_.now_ms();

    if (!collection_) {
        auto neighbors = net_.neighbors_of(id_);
        if (neighbors.empty()) {
            log(EventKind::ChallengeLapse, accuser, "no_neighbors");
            return;
        }
        CollectionState c;
        c.round = (static_cast<std::uint64_t>(id_) << 32) | ++round_counter_;
        c.deadline_ms = now + params_.collection_window_ms;
        c.expected.insert(neighbors.begin(), neighbors.end());
        collection_ = std::move(c);

        ByteWriter w;
        w.u64(collection_->round);
        const Bytes payload = w.take();
        for (NodeId n : neighbors) send_frame(n, RepMessType::VerifyBehavior, id_, 0, payload);
        log(EventKind::VerifyBehavior, id_, "round=" + std::to_string(collection_->round) +
                                                " n=" + std::to_string(neighbors.size()));
        net_.wake_at(id_, collection_->deadline_ms);
    }
    ByteWriter w;
    w.u64(collection_->round);
    send_frame(accuser, RepMessType::ChallengeAck, id_, 0, w.take());
    note_interaction(accuser);
}

void Node::on_challenge_ack(const Frame& f) {
    auto it = challenges_.find(f.header.sender);
    if (it == challenges_.end() || it->second.acked) return;
    ByteReader r(f.payload);
    it->second.acked = true;
    it->second.round = r.u64();
    log(EventKind::ChallengeAck, f.header.sender, "round=" + std::to_string(it->second.round));
    net_.wake_at(id_, it->second.cert_deadline_ms);
}

void Node::on_verify_behavior(const Frame& f) {
    const NodeId accused = f.header.sender;
    if (f.header.subject != accused || !is_neighbor(accused)) return;
    ByteReader r(f.payload);
    const std::uint64_t round = r.u64();
    const auto now = net_.now_ms();

    double m = 0.0;
    std::uint32_t samples = 0;
    if (auto it = monitors_.find(accused); it != monitors_.end()) {
        it->second.prune(now);
        m = it->second.maliciousness();
        samples = it->second.resolved();
    }
    if (conduct_.colluding_set.count(accused)) {
        m = 0.0;
        samples = std::max<std::uint32_t>(samples, 1);
    } else if (conduct_.false_accuser && accused_targets_.count(accused)) {
        m = 1.0;
        samples = std::max<std::uint32_t>(samples, 1);
    }
    const auto s16 = static_cast<std::uint16_t>(std::min<std::uint32_t>(samples, 65535));
    ResponseRecord rec = sign_response(round, accused, id_, m, s16, secret_);
    my_responses_[{accused, round}] = rec;
    my_response_times_[{accused, round}] = now;

    ByteWriter w;
    w.u64(round).u16(rec.samples).raw(rec.tag);
    send_frame(accused, RepMessType::RepResponse, accused, rec.maliciousness, w.take());
    log(EventKind::Response, accused,
        "round=" + std::to_string(round) + " m=" + fmt_double(from_fixed(rec.maliciousness)) +
            " samples=" + std::to_string(rec.samples));
    note_interaction(accused);
}

void Node::on_response(const Frame& f) {
    if (!collection_ || f.header.subject != id_) return;
    ByteReader r(f.payload);
    const std::uint64_t round = r.u64();
    if (round != collection_->round) return;
    const NodeId respondent = f.header.sender;
    if (!collection_->expected.count(respondent) || collection_->collected.count(respondent)) return;
    ResponseRecord rec;
    rec.respondent = respondent;
    rec.maliciousness = f.header.rep_val;
    rec.samples = r.u16();
    auto tag = r.raw(kTagSize);
    std::copy(tag.begin(), tag.end(), rec.tag.begin());
    collection_->collected[respondent] = rec;
    if (collection_->collected.size() == collection_->expected.size()) aggregate_responses();
}

void Node::aggregate_responses() {
    if (!collection_) return;
    const auto now = net_.now_ms();
    const double threshold = params_.trust.maliciousness_threshold;
    GroupTrustCertificate cert;
    cert.subject = id_;
    cert.issuer = id_;
    cert.round = collection_->round;
    cert.issued_at_ms = now;
    for (const auto& [respondent, rec] : collection_->collected) {
        if (conduct_.drops_feedback_in_aggregate && rec.samples > 0 &&
            from_fixed(rec.maliciousness) >= threshold)
            continue;
        cert.responses.push_back(rec);
    }
    if (conduct_.tampers_certificates) {
        for (auto& rec : cert.responses) {
            if (rec.samples > 0 && from_fixed(rec.maliciousness) >= threshold) {
                rec.maliciousness = 0;
                break;
            }
        }
    }
    finalize_certificate(cert, threshold, secret_);
    collection_.reset();

    Bytes bytes = serialize_certificate(cert);
    const CertKey key = cert.key();
    log(EventKind::CertIssued, id_,
        "key=" + to_string(key) + " round=" + std::to_string(cert.round) +
            " gt=" + fmt_double(from_fixed(cert.group_trust)) +
            " n=" + std::to_string(cert.responses.size()));
    cache_.insert(cert, bytes);
    log(EventKind::CertHeld, id_, "key=" + to_string(key));

    auto neighbors = net_.neighbors_of(id_);
    const std::vector<NodeId> seeds = initial_flood_targets(neighbors, params_.f_fraction, net_);
    const auto* entry = cache_.find(key);
    for (NodeId n : std::vector<NodeId>(neighbors.begin(), neighbors.end())) {
        const bool seed = std::binary_search(seeds.begin(), seeds.end(), n);
        send_certificate(n, *entry, seed ? kFlagSeed : 0);
    }
}

// maintainer -------------------------------------------------------------------

double Node::trust_of(NodeId subject) const {
    auto it = table_.find(subject);
    return it == table_.end() ? 1.0 : it->second.rep_val;
}

Verdict Node::handle_certificate(const GroupTrustCertificate& cert, std::span<const std::uint8_t> bytes,
                                 NodeId from, std::uint8_t flags) {
    const CertKey key = cert.key();
    std::set<NodeId> expected;
    for (const auto& r : cert.responses) expected.insert(r.respondent);
    const auto mine = my_responses_.find({cert.subject, cert.round});
    if (mine != my_responses_.end()) expected.insert(id_);

    if (const auto* held = cache_.find(key)) {
        if (!std::equal(held->bytes.begin(), held->bytes.end(), bytes.begin(), bytes.end())) {
            const Verdict v = verify_group_certificate(cert, expected, params_.trust, authority_);
            if (v != Verdict::Valid) {
                ++stats_.tamper_evidence;
                log(EventKind::TamperDetected, from, "key=" + to_string(key) + " verdict=" + to_string(v));
            }
            return v;
        }
        return Verdict::Valid;
    }

    const Verdict verdict = verify_group_certificate(cert, expected, params_.trust, authority_);
    ++stats_.verdicts[verdict];
    if (verdict != Verdict::Valid) {
        log(EventKind::CertRejected, cert.subject,
            "key=" + to_string(key) + " verdict=" + to_string(verdict) + " from=" + std::to_string(from));
        if (verdict == Verdict::DroppedFeedback && mine != my_responses_.end()) {
            const bool omitted = std::none_of(cert.responses.begin(), cert.responses.end(),
                                              [this](const ResponseRecord& r) { return r.respondent == id_; });
            const bool adverse = mine->second.samples > 0 &&
                                 from_fixed(mine->second.maliciousness) >= params_.trust.maliciousness_threshold;
            if (omitted && adverse) escalate(cert.subject, "dropped_feedback");
        }
        return verdict;
    }

    ++stats_.certs_accepted;
    cache_.insert(cert, Bytes(bytes.begin(), bytes.end()));
    log(EventKind::CertHeld, cert.subject, "key=" + to_string(key));
    note_interaction(from);

    std::vector<Observation> obs = certificate_observations(cert, params_.respondent_weight);
    for (auto& o : obs) o.respondent_trust = trust_of(o.respondent);
    bool majority_adverse = false;

    if (cert.subject != id_) {
        double a1 = 0.0;
        if (!obs.empty()) {
            majority_adverse = partition_majority(obs, params_.trust.maliciousness_threshold).majority_adverse;
            double W = params_.trust.W;
            if (!(W > 0.0)) W = params_.respondent_weight * static_cast<double>(cert.responses.size());
            if (W > 0.0)
                a1 = alpha1(majority_observations(obs, params_.trust.maliciousness_threshold), W);
        }
        const std::uint64_t fp = respondent_fingerprint(cert);
        RepEntry& entry = table_[cert.subject];
        const long long k = entry.accepted_respondent_sets.count(fp) ? 2 : 1;
        const double b = beta(a1, params_.trust.alpha2, alpha3(k));
        const double delta = params_.delta_per_certificate ? params_.trust.delta : 0.0;
        const double before = entry.rep_val;
        entry.rep_val = update_trust(before, from_fixed(cert.group_trust), params_.trust.alpha, b, delta);
        entry.last_updated_ms = net_.now_ms();
        entry.informed = entry.informed || b > 0.0;
        entry.accepted_respondent_sets.insert(fp);
        log(EventKind::TrustUpdate, cert.subject,
            "old=" + fmt_double(before) + " new=" + fmt_double(entry.rep_val) + " beta=" + fmt_double(b) +
                " k=" + std::to_string(k));
    }

    if (auto it = challenges_.find(cert.subject); it != challenges_.end()) {
        if (!it->second.acked || it->second.round == cert.round) complete_challenge(cert.subject);
    }

    if (!conduct_.drops_certificates) {
        const auto* entry = cache_.find(key);
        auto neighbors = net_.neighbors_of(id_);
        const std::vector<NodeId> nbrs(neighbors.begin(), neighbors.end());
        if (majority_adverse) {
            for (NodeId n : nbrs)
                if (n != from && n != cert.subject && expected.count(n)) send_certificate(n, *entry, 0);
        }
        if (flags & kFlagSeed) {
            for (NodeId n : nbrs)
                if (n != from && n != cert.subject && !(majority_adverse && expected.count(n)))
                    send_certificate(n, *entry, 0);
        }
    }

    if (cert.subject != id_ && trust_of(cert.subject) < kMaliciousBelow) request_alarm(cert.subject, "trust");
    return Verdict::Valid;
}

void Node::escalate(NodeId subject, std::string_view reason) {
    log(EventKind::Escalation, subject, "reason=" + std::string(reason));
    RepEntry& entry = table_[subject];
    entry.rep_val = update_trust(entry.rep_val, 0.0, params_.trust.alpha, params_.trust.alpha2, 0.0);
    entry.last_updated_ms = net_.now_ms();
    entry.informed = true;
    if (!alarm_suppressed(subject)) raise_global_alarm(subject, reason);
}

void Node::complete_challenge(NodeId subject) {
    challenges_.erase(subject);
    cooldown_until_[subject] = net_.now_ms() + params_.challenge_cooldown_ms;
    if (auto it = monitors_.find(subject); it != monitors_.end()) it->second.reset();
    log(EventKind::ChallengeDone, subject);
}

// propagator -------------------------------------------------------------------

void Node::send_certificate(NodeId to, const CertificateCache::Entry& e, std::uint8_t flags) {
    Bytes body = e.bytes;
    if (conduct_.tampers_certificates && e.cert.subject != id_) {
        GroupTrustCertificate forged = e.cert;
        if (!forged.responses.empty()) {
            auto& m = forged.responses.front().maliciousness;
            m = m >= kFixedScale / 2 ? 0 : kFixedScale;
        } else {
            forged.group_trust = forged.group_trust >= kFixedScale / 2 ? 0 : kFixedScale;
        }
        body = serialize_certificate(forged);
    }
    ByteWriter w;
    w.u8(flags).raw(body);
    send_frame(to, RepMessType::RepBroadcast, e.cert.subject, e.cert.group_trust, w.take());
}

void Node::exchange_with(NodeId neighbor) {
    if (conduct_.drops_certificates || isolated_.count(neighbor) || !is_neighbor(neighbor)) return;
    ByteWriter w;
    const auto keys = cache_.keys();
    w.u16(static_cast<std::uint16_t>(keys.size()));
    for (const auto& k : keys) {
        write_key(w, k);
        w.u64(cache_.find(k)->digest);
    }
    send_frame(neighbor, RepMessType::CertExchange, 0, 0, w.take());
    note_interaction(neighbor);
}

std::vector<CertKey> Node::piggyback_keys() const {
    if (conduct_.drops_certificates) return {};
    return cache_.most_recent(params_.piggyback_budget);
}

void Node::on_piggyback(NodeId from, std::span<const CertKey> keys) {
    for (const auto& k : keys)
        if (!cache_.contains(k)) wanted_.try_emplace(k, from);
}

void Node::on_rep_broadcast(NodeId from, const Frame& f) {
    if (f.payload.empty()) return;
    const std::uint8_t flags = f.payload[0];
    std::span<const std::uint8_t> body(f.payload.data() + 1, f.payload.size() - 1);
    GroupTrustCertificate cert;
    try {
        cert = parse_certificate(body);
    } catch (const CodecError& e) {
        ++stats_.frames_rejected;
        log(EventKind::CertRejected, f.header.subject, std::string("codec=") + to_string(e.code()));
        return;
    }
    handle_certificate(cert, body, from, flags);
}

void Node::on_rep_request(NodeId from, const Frame& f) {
    if (conduct_.drops_certificates) return;
    ByteReader r(f.payload);
    const std::uint16_t n = r.u16();
    for (std::uint16_t i = 0; i < n; ++i) {
        const CertKey k = read_key(r);
        if (const auto* e = cache_.find(k)) send_certificate(from, *e, kFlagExchange);
    }
}

void Node::on_cert_exchange(NodeId from, const Frame& f) {
    if (conduct_.drops_certificates || isolated_.count(from)) return;
    note_interaction(from);
    ByteReader r(f.payload);
    const std::uint16_t n = r.u16();
    std::map<CertKey, std::uint64_t> offered;
    for (std::uint16_t i = 0; i < n; ++i) {
        const CertKey k = read_key(r);
        offered[k] = r.u64();
    }
    for (const auto& k : cache_.keys())
        if (!offered.count(k)) send_certificate(from, *cache_.find(k), kFlagExchange);

    std::vector<CertKey> wanted;
    for (const auto& [k, digest] : offered) {
        const auto* mine = cache_.find(k);
        if (!mine || mine->digest != digest) wanted.push_back(k);
    }
    if (wanted.empty()) return;
    ByteWriter w;
    w.u16(static_cast<std::uint16_t>(wanted.size()));
    for (const auto& k : wanted) write_key(w, k);
    send_frame(from, RepMessType::RepRequest, 0, 0, w.take());
}

// alarm raiser -------------------------------------------------------------------

const AlarmState* Node::open_alarm(NodeId subject) const {
    auto it = alarms_.find(subject);
    return it == alarms_.end() ? nullptr : &it->second;
}

bool Node::alarm_suppressed(NodeId subject) const {
    if (subject == id_ || isolated_.count(subject) || alarms_.count(subject)) return true;
    auto it = last_alarm_seen_.find(subject);
    return it != last_alarm_seen_.end() && net_.now_ms() < it->second + params_.alarm_holdoff_ms;
}

void Node::request_alarm(NodeId subject, std::string_view reason) {
    if (alarm_suppressed(subject) || pending_alarms_.count(subject)) return;
    const auto at = net_.now_ms() +
                    static_cast<std::uint64_t>(net_.uniform01() * static_cast<double>(params_.alarm_backoff_ms));
    pending_alarms_[subject] = at;
    pending_reasons_[subject] = std::string(reason);
    net_.wake_at(id_, at);
}

void Node::raise_global_alarm(NodeId subject, std::string_view reason) {
    if (subject == id_) return;
    if (isolated_.count(subject) || alarms_.count(subject)) {
        log(EventKind::AlarmSuppressed, subject, "reason=" + std::string(reason));
        return;
    }
    const auto now = net_.now_ms();
    AlarmState st;
    st.subject = subject;
    st.nonce = ++nonce_counter_;
    st.voting_deadline_ms = now + params_.vote_window_ms;
    last_alarm_seen_[subject] = now;
    pending_alarms_.erase(subject);
    log(EventKind::GlobalAlarm, subject, "reason=" + std::string(reason) + " nonce=" + std::to_string(st.nonce));
    alarms_[subject] = st;
    flood_alarm(kAlarmRaised, subject, id_, st.nonce, kAuthorityId);
    net_.wake_at(id_, st.voting_deadline_ms);
}

void Node::flood_alarm(std::uint8_t kind, NodeId subject, NodeId raiser, std::uint64_t nonce, NodeId except) {
    seen_alarms_.insert({kind, subject, raiser, nonce});
    ByteWriter w;
    w.u8(kind).u32(raiser).u64(nonce);
    const Bytes payload = w.take();
    auto neighbors = net_.neighbors_of(id_);
    for (NodeId n : std::vector<NodeId>(neighbors.begin(), neighbors.end()))
        if (n != except) send_frame(n, RepMessType::GlobalAlarm, subject, 0, payload);
}

bool Node::eligible_voter(NodeId subject) const {
    if (subject == id_) return false;
    if (is_neighbor(subject)) return true;
    auto it = last_interaction_.find(subject);
    return it != last_interaction_.end() && net_.now_ms() <= it->second + params_.interaction_window_ms;
}

std::optional<bool> Node::opinion(NodeId subject) const {
    if (conduct_.colluding_set.count(subject)) return false;
    if (conduct_.false_accuser && accused_targets_.count(subject)) return true;
    if (auto it = table_.find(subject); it != table_.end() && it->second.informed)
        return it->second.rep_val < kMaliciousBelow;
    if (auto it = monitors_.find(subject); it != monitors_.end() && it->second.resolved() > 0)
        return it->second.maliciousness() > params_.monitor.threshold;
    return std::nullopt;
}

void Node::on_global_alarm(NodeId from, const Frame& f) {
    ByteReader r(f.payload);
    const std::uint8_t kind = r.u8();
    const NodeId raiser = r.u32();
    const std::uint64_t nonce = r.u64();
    const NodeId subject = f.header.subject;
    if (seen_alarms_.count({kind, subject, raiser, nonce})) return;

    if (kind == kAlarmVerdict) {
        mark_isolated(subject);
        flood_alarm(kind, subject, raiser, nonce, from);
        return;
    }
    last_alarm_seen_[subject] = net_.now_ms();
    pending_alarms_.erase(subject);
    flood_alarm(kind, subject, raiser, nonce, from);
    if (raiser == id_ || !eligible_voter(subject)) return;
    const auto vote = opinion(subject);
    if (!vote) return;
    ByteWriter w;
    w.u32(raiser).u64(nonce).u8(*vote ? 1 : 0);
    Bytes frame = make_frame(RepMessType::AlarmVote, subject, 0, w.take());
    stats_.bytes_sent += frame.size();
    net_.send_routed(id_, raiser, std::move(frame));
    log(EventKind::Vote, subject, std::string("raiser=") + std::to_string(raiser) + " vote=" + (*vote ? "1" : "0"));
}

void Node::on_alarm_vote(const Frame& f) {
    ByteReader r(f.payload);
    const NodeId raiser = r.u32();
    const std::uint64_t nonce = r.u64();
    const bool vote = r.u8() != 0;
    if (raiser != id_) return;
    auto it = alarms_.find(f.header.subject);
    if (it == alarms_.end() || it->second.nonce != nonce) return;
    if (net_.now_ms() > it->second.voting_deadline_ms) return;
    it->second.votes.emplace(f.header.sender, vote);
}

void Node::decide_alarm(NodeId subject) {
    auto it = alarms_.find(subject);
    if (it == alarms_.end()) return;
    const AlarmState st = it->second;
    alarms_.erase(it);
    std::size_t yes = 0;
    for (const auto& [v, b] : st.votes) yes += b ? 1 : 0;
    const std::string tally = "yes=" + std::to_string(yes) + " total=" + std::to_string(st.votes.size());
    switch (tally_votes(st.votes)) {
    case AlarmOutcome::NoDecision:
        log(EventKind::AlarmExpired, subject, tally);
        break;
    case AlarmOutcome::Rejected:
        log(EventKind::AlarmRejected, subject, tally);
        break;
    case AlarmOutcome::Isolated: {
        log(EventKind::Isolated, subject, tally);
        mark_isolated(subject);
        net_.declare_isolated(subject);
        flood_alarm(kAlarmVerdict, subject, id_, ++nonce_counter_, kAuthorityId);
        break;
    }
    }
}

void Node::mark_isolated(NodeId subject) {
    isolated_.insert(subject);
    challenges_.erase(subject);
    pending_alarms_.erase(subject);
}

// bookkeeping ----------------------------------------------------------------------

void Node::note_interaction(NodeId other) {
    if (other != id_) last_interaction_[other] = net_.now_ms();
}

void Node::on_link_change(NodeId other, bool /*up*/) { note_interaction(other); }

void Node::prune(std::uint64_t now) {
    const auto window = params_.replay_window_ms();
    if (now <= window) return;
    const auto horizon = now - window;
    std::erase_if(seen_nonces_, [horizon](const auto& kv) { return kv.second < horizon; });
    for (auto it = my_response_times_.begin(); it != my_response_times_.end();) {
        if (it->second < horizon) {
            my_responses_.erase(it->first);
            it = my_response_times_.erase(it);
        } else {
            ++it;
        }
    }
}

void Node::receive(NodeId from, std::span<const std::uint8_t> bytes) {
    Frame f;
    try {
        f = decode_rep_mess(bytes);
    } catch (const CodecError&) {
        ++stats_.frames_rejected;
        return;
    }
    if (!authority_.verify_frame(bytes)) {
        ++stats_.frames_rejected;
        return;
    }
    const auto now = net_.now_ms();
    if (f.header.timestamp_ms + params_.replay_window_ms() < now) {
        ++stats_.replays_rejected;
        return;
    }
    const auto nonce_key = std::make_pair(f.header.sender, f.header.nonce);
    if (seen_nonces_.count(nonce_key)) {
        ++stats_.replays_rejected;
        return;
    }
    seen_nonces_[nonce_key] = f.header.timestamp_ms;

    try {
        switch (f.header.type) {
        case RepMessType::Challenge: on_challenge(f); break;
        case RepMessType::ChallengeAck: on_challenge_ack(f); break;
        case RepMessType::VerifyBehavior: on_verify_behavior(f); break;
        case RepMessType::RepResponse: on_response(f); break;
        case RepMessType::RepBroadcast: on_rep_broadcast(from, f); break;
        case RepMessType::RepRequest: on_rep_request(from, f); break;
        case RepMessType::CertExchange: on_cert_exchange(from, f); break;
        case RepMessType::GlobalAlarm: on_global_alarm(from, f); break;
        case RepMessType::AlarmVote: on_alarm_vote(f); break;
        }
    } catch (const CodecError&) {
        ++stats_.frames_rejected;
    }
}

TickSummary Node::tick(std::uint64_t now) {
    TickSummary s;

    for (auto it = challenges_.begin(); it != challenges_.end();) {
        const ChallengeState st = it->second;
        const bool ack_missed = !st.acked && now >= st.ack_deadline_ms;
        const bool cert_missed = st.acked && now >= st.cert_deadline_ms;
        if (!ack_missed && !cert_missed) {
            ++it;
            continue;
        }
        it = challenges_.erase(it);
        ++s.expired_challenges;
        cooldown_until_[st.subject] = now + params_.challenge_cooldown_ms;
        if (is_neighbor(st.subject) && !isolated_.count(st.subject)) {
            escalate(st.subject, ack_missed ? "silent" : "no_certificate");
        } else {
            log(EventKind::ChallengeLapse, st.subject, "out_of_range");
        }
    }

    if (collection_ && now >= collection_->deadline_ms) {
        aggregate_responses();
        ++s.aggregated;
    }

    for (auto it = pending_alarms_.begin(); it != pending_alarms_.end();) {
        if (it->second > now) {
            ++it;
            continue;
        }
        const NodeId subject = it->first;
        it = pending_alarms_.erase(it);
        if (!alarm_suppressed(subject)) {
            raise_global_alarm(subject, pending_reasons_[subject]);
            ++s.alarms_raised;
        }
    }

    std::vector<NodeId> due;
    for (const auto& [subject, st] : alarms_)
        if (now >= st.voting_deadline_ms) due.push_back(subject);
    for (NodeId subject : due) {
        decide_alarm(subject);
        ++s.alarms_decided;
    }

    if (started_ && now >= next_exchange_ms_) {
        while (next_exchange_ms_ <= now) next_exchange_ms_ += params_.exchange_interval_ms;
        prune(now);
        if (!params_.delta_per_certificate) {
            for (auto& [subject, entry] : table_) entry.rep_val = replenish(entry.rep_val, params_.trust.delta);
        }
        s.replenished = !table_.empty();
        auto neighbors = net_.neighbors_of(id_);
        const std::vector<NodeId> nbrs(neighbors.begin(), neighbors.end());
        if (!conduct_.drops_certificates) {
            for (NodeId n : nbrs) {
                if (isolated_.count(n)) continue;
                exchange_with(n);
                ++s.exchanges;
            }
            std::map<NodeId, std::vector<CertKey>> by_source;
            for (const auto& [k, src] : wanted_)
                if (!cache_.contains(k) && std::binary_search(nbrs.begin(), nbrs.end(), src))
                    by_source[src].push_back(k);
            for (const auto& [src, keys] : by_source) {
                ByteWriter w;
                w.u16(static_cast<std::uint16_t>(keys.size()));
                for (const auto& k : keys) write_key(w, k);
                send_frame(src, RepMessType::RepRequest, 0, 0, w.take());
            }
            wanted_.clear();
        }
        log(EventKind::Exchange, 0, "neighbors=" + std::to_string(s.exchanges));
        net_.wake_at(id_, next_exchange_ms_);
    }
    return s;
}

}  // namespace trustwatch
