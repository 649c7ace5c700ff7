#include "trustwatch/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace trustwatch {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void invalid(const std::string& field, const std::string& msg) {
    throw ConfigInvalid({{field, msg}});
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        invalid(key, "not a number: '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(d)) invalid(key, "not a number: '" + v + "'");
    return d;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    if (d < 0 || d != std::floor(d) || d > 4294967295.0) invalid(key, "not a non-negative integer: '" + v + "'");
    return static_cast<std::uint64_t>(d);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    invalid(key, "not a boolean: '" + v + "'");
}

std::uint64_t ms(double s) { return static_cast<std::uint64_t>(std::llround(s * 1000.0)); }

using Setter = std::function<void(ScenarioConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto num = [&t](const char* key, auto member) {
            t[key] = [member](ScenarioConfig& c, const std::string& k, const std::string& v) {
                c.*member = parse_double(k, v);
            };
        };
        auto count = [&t](const char* key, auto member) {
            t[key] = [member](ScenarioConfig& c, const std::string& k, const std::string& v) {
                c.*member = static_cast<std::remove_reference_t<decltype(c.*member)>>(parse_count(k, v));
            };
        };
        num("duration_s", &ScenarioConfig::duration_s);
        num("width_m", &ScenarioConfig::width_m);
        num("height_m", &ScenarioConfig::height_m);
        count("node_count", &ScenarioConfig::node_count);
        num("tx_range_m", &ScenarioConfig::tx_range_m);
        count("flow_count", &ScenarioConfig::flow_count);
        num("flow_rate_pps", &ScenarioConfig::flow_rate_pps);
        count("packet_bytes", &ScenarioConfig::packet_bytes);
        count("buffer_capacity", &ScenarioConfig::buffer_capacity);
        count("malicious_count", &ScenarioConfig::malicious_count);
        num("false_accuse_interval_s", &ScenarioConfig::false_accuse_interval_s);
        num("exchange_interval_s", &ScenarioConfig::exchange_interval_s);
        num("F_fraction", &ScenarioConfig::f_fraction);
        count("slot_ms", &ScenarioConfig::slot_ms);
        count("hop_latency_ms", &ScenarioConfig::hop_latency_ms);
        count("topology_step_ms", &ScenarioConfig::topology_step_ms);
        count("seed", &ScenarioConfig::rng_seed);
        t["max_speed_mps"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.mobility.max_speed_mps = parse_double(k, v);
        };
        t["pause_s"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.mobility.pause_s = parse_double(k, v);
        };
        t["drop_prob"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.adversary.drop_prob = parse_double(k, v);
        };
        t["tamper_prob"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.adversary.tamper_prob = parse_double(k, v);
        };
        auto flag = [&t](const char* key, bool AdversaryProfile::*member) {
            t[key] = [member](ScenarioConfig& c, const std::string& k, const std::string& v) {
                c.adversary.*member = parse_bool(k, v);
            };
        };
        flag("drops_certificates", &AdversaryProfile::drops_certificates);
        flag("drops_feedback_in_aggregate", &AdversaryProfile::drops_feedback_in_aggregate);
        flag("tampers_certificates", &AdversaryProfile::tampers_certificates);
        flag("false_accuser", &AdversaryProfile::false_accuser);
        flag("silent_on_challenge", &AdversaryProfile::silent_on_challenge);
        flag("colluding", &AdversaryProfile::colluding);
        auto trust = [&t](const char* key, double UpdateParams::*member) {
            t[key] = [member](ScenarioConfig& c, const std::string& k, const std::string& v) {
                c.trust.*member = parse_double(k, v);
            };
        };
        trust("alpha", &UpdateParams::alpha);
        trust("alpha2", &UpdateParams::alpha2);
        trust("delta", &UpdateParams::delta);
        trust("W", &UpdateParams::W);
        trust("maliciousness_threshold", &UpdateParams::maliciousness_threshold);
        t["delta_per_certificate"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.delta_per_certificate = parse_bool(k, v);
        };
        t["sampling_prob"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.monitor.sampling_prob = parse_double(k, v);
        };
        t["monitor_threshold"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.monitor.threshold = parse_double(k, v);
        };
        t["monitor_window_s"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.monitor.window_ms = ms(parse_double(k, v));
        };
        t["min_samples"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.monitor.min_samples = static_cast<std::uint32_t>(parse_count(k, v));
        };
        t["observation_deadline_ms"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.monitor.observation_deadline_ms = parse_count(k, v);
        };
        t["malicious_fraction"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
            const double f = parse_double(k, v);
            if (f < 0 || f > 1) invalid(k, "must lie in [0,1]");
            c.malicious_count = static_cast<std::uint32_t>(std::llround(f * c.node_count));
        };
        return t;
    }();
    return table;
}

std::vector<std::pair<std::string, std::string>> parse_lines(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream is(text);
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) invalid("line " + std::to_string(n), "expected 'key = value'");
        std::string key = trim(std::string_view(t).substr(0, eq));
        std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) invalid("line " + std::to_string(n), "missing key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) invalid("file", "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

CertKey parse_cert_key(const std::string& s) {
    CertKey k;
    const auto a = s.find(':');
    const auto b = s.find(':', a + 1);
    if (a == std::string::npos || b == std::string::npos) throw IncompleteLog("malformed certificate key '" + s + "'");
    k.subject = static_cast<NodeId>(std::stoul(s.substr(0, a)));
    k.issuer = static_cast<NodeId>(std::stoul(s.substr(a + 1, b - a - 1)));
    k.issued_at_ms = std::stoull(s.substr(b + 1));
    return k;
}

std::uint64_t summary_field(const std::string& details, const char* key) {
    const std::string v = detail_field(details, key);
    return v.empty() ? 0 : std::stoull(v);
}

}  // namespace

GroundTruth ground_truth_from_log(const EventLog& log) {
    GroundTruth t;
    bool meta = false;
    for (const auto& r : log.records()) {
        if (r.kind == EventKind::Meta) {
            meta = true;
            t.node_count = static_cast<std::uint32_t>(std::stoul(detail_field(r.details, "nodes")));
            t.duration_ms = std::stoull(detail_field(r.details, "duration_ms"));
        } else if (r.kind == EventKind::Adversary) {
            t.malicious.insert(r.actor);
        }
    }
    if (!meta) throw IncompleteLog("event log has no META record");
    return t;
}

// ---------------------------------------------------------------------------

LocResult loc_baseline(const EventLog& log, const LocParams& params) {
    LocResult out;
    std::map<std::pair<NodeId, NodeId>, MonitorWindow> windows;
    std::map<std::pair<NodeId, NodeId>, std::uint64_t> last_alarm;
    auto check = [&](const std::pair<NodeId, NodeId>& key, MonitorWindow& w, std::uint64_t now) {
        w.prune(now);
        if (w.resolved() < params.monitor.min_samples || !(w.maliciousness() > params.monitor.threshold)) return;
        auto it = last_alarm.find(key);
        if (params.holdoff_ms > 0 && it != last_alarm.end() && now < it->second + params.holdoff_ms) return;
        last_alarm[key] = now;
        out.alarms.push_back({now, key.first, key.second});
        out.accused.insert(key.second);
    };
    for (const auto& r : log.records()) {
        if (r.kind != EventKind::Obs) continue;
        const auto key = std::make_pair(r.actor, r.subject);
        auto& w = windows.try_emplace(key, params.monitor.window_ms).first->second;
        const Outcome o = r.details == "drop" ? Outcome::Dropped
                          : r.details == "mod" ? Outcome::Modified
                                               : Outcome::Forwarded;
        w.record(o, r.time_ms);
        check(key, w, r.time_ms);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, std::optional<double>>> MetricsReport::fields() const {
    auto d = [](auto v) { return std::optional<double>(static_cast<double>(v)); };
    return {
        {"false_positive_rate", false_positive_rate},
        {"false_alarm_count", d(false_alarm_count)},
        {"global_alarm_count", d(global_alarm_count)},
        {"detection_rate", detection_rate},
        {"honest_isolated", d(honest_isolated)},
        {"certificates_issued", d(certificates_issued)},
        {"certificates_converged", d(certificates_converged)},
        {"certificates_unconverged", d(certificates_unconverged)},
        {"total_convergence_time_s", total_convergence_time_s},
        {"effective_convergence_time_s", effective_convergence_time_s},
        {"overhead_window_start_s", overhead_window_start_s},
        {"comm_overhead", d(comm_overhead)},
        {"control_bytes", d(control_bytes)},
        {"piggyback_bytes", d(piggyback_bytes)},
        {"route_discoveries", d(route_discoveries)},
        {"loc_alarm_count", d(loc_alarm_count)},
        {"loc_false_alarm_count", d(loc_false_alarm_count)},
        {"loc_false_positive_rate", loc_false_positive_rate},
        {"loc_detection_rate", loc_detection_rate},
        {"loc_overhead_window_start_s", loc_overhead_window_start_s},
        {"loc_comm_overhead", d(loc_comm_overhead)},
    };
}

MetricsReport compute_metrics(const EventLog& log, const GroundTruth& truth, const MetricsOptions& opt) {
    MetricsReport m;
    const auto& recs = log.records();
    if (recs.empty() || recs.front().kind != EventKind::Meta) throw IncompleteLog("event log does not start with META");
    if (recs.back().kind != EventKind::Summary) throw IncompleteLog("event log has no SUMMARY record");

    std::set<NodeId> honest;
    for (NodeId v = 1; v <= truth.node_count; ++v)
        if (!truth.malicious.count(v)) honest.insert(v);

    std::set<NodeId> alarmed, isolated;
    std::vector<std::uint64_t> alarm_times;
    std::map<std::string, std::uint64_t> issued;
    std::vector<std::string> issue_order;
    std::map<std::string, std::map<NodeId, std::uint64_t>> holders;
    std::map<NodeId, std::set<NodeId>> met;

    for (const auto& r : recs) {
        switch (r.kind) {
        case EventKind::GlobalAlarm:
            ++m.global_alarm_count;
            alarm_times.push_back(r.time_ms);
            alarmed.insert(r.subject);
            if (!truth.malicious.count(r.subject)) ++m.false_alarm_count;
            break;
        case EventKind::Isolated: isolated.insert(r.subject); break;
        case EventKind::CertIssued: {
            const std::string key = detail_field(r.details, "key");
            if (issued.emplace(key, r.time_ms).second) issue_order.push_back(key);
            break;
        }
        case EventKind::CertHeld: holders[detail_field(r.details, "key")].try_emplace(r.actor, r.time_ms); break;
        case EventKind::LinkUp:
            met[r.actor].insert(r.subject);
            met[r.subject].insert(r.actor);
            break;
        case EventKind::Summary:
            m.control_bytes = summary_field(r.details, "control_bytes");
            m.piggyback_bytes = summary_field(r.details, "piggyback_bytes");
            m.route_discoveries = summary_field(r.details, "route_discoveries");
            break;
        default: break;
        }
    }

    std::size_t honest_alarmed = 0;
    for (NodeId v : alarmed) honest_alarmed += honest.count(v);
    m.false_positive_rate = honest.empty() ? 0.0 : static_cast<double>(honest_alarmed) / honest.size();
    std::size_t caught = 0;
    for (NodeId v : isolated) {
        if (truth.malicious.count(v))
            ++caught;
        else
            ++m.honest_isolated;
    }
    m.detection_rate = truth.malicious.empty() ? 0.0 : static_cast<double>(caught) / truth.malicious.size();

    std::vector<double> totals, effectives;
    for (const auto& key : issue_order) {
        CertificateConvergence c;
        c.key = parse_cert_key(key);
        c.issued_ms = issued[key];
        const auto& held = holders[key];
        auto finish = [&](const std::set<NodeId>& need) -> std::optional<double> {
            std::uint64_t last = c.issued_ms;
            for (NodeId v : need) {
                auto it = held.find(v);
                if (it == held.end()) return std::nullopt;
                last = std::max(last, it->second);
            }
            return static_cast<double>(last - c.issued_ms) / 1000.0;
        };
        std::set<NodeId> neighbours;
        for (NodeId v : met[c.key.subject])
            if (honest.count(v)) neighbours.insert(v);
        c.total_s = finish(honest);
        c.effective_s = finish(neighbours);
        ++m.certificates_issued;
        if (c.total_s) {
            ++m.certificates_converged;
            totals.push_back(*c.total_s);
        } else if (c.issued_ms + ms(opt.convergence_horizon_s) <= truth.duration_ms) {
            ++m.certificates_unconverged;
        }
        if (c.effective_s) effectives.push_back(*c.effective_s);
        m.certificates.push_back(c);
    }
    if (!totals.empty()) m.total_convergence_time_s = mean_of(totals);
    if (!effectives.empty()) m.effective_convergence_time_s = mean_of(effectives);

    const LocResult loc = loc_baseline(log, opt.loc);
    m.loc_alarm_count = loc.alarms.size();
    std::size_t loc_honest = 0, loc_caught = 0;
    for (const auto& a : loc.alarms) m.loc_false_alarm_count += truth.malicious.count(a.subject) ? 0 : 1;
    for (NodeId v : loc.accused) {
        loc_honest += honest.count(v);
        loc_caught += truth.malicious.count(v);
    }
    m.loc_false_positive_rate = honest.empty() ? 0.0 : static_cast<double>(loc_honest) / honest.size();
    m.loc_detection_rate = truth.malicious.empty() ? 0.0 : static_cast<double>(loc_caught) / truth.malicious.size();

    const std::uint64_t span = ms(opt.overhead_window_s);
    auto window_start = [&](const std::vector<std::uint64_t>& times) -> std::uint64_t {
        if (opt.overhead_window_start_s) return ms(*opt.overhead_window_start_s);
        return times.empty() ? 0 : times.front();
    };
    auto count_in = [span](const std::vector<std::uint64_t>& times, std::uint64_t start) {
        std::uint64_t n = 0;
        for (auto t : times) n += (t >= start && t < start + span) ? 1 : 0;
        return n;
    };
    std::vector<std::uint64_t> loc_times;
    for (const auto& a : loc.alarms) loc_times.push_back(a.time_ms);
    const std::uint64_t start = window_start(alarm_times);
    const std::uint64_t loc_start = window_start(loc_times);
    m.overhead_window_start_s = static_cast<double>(start) / 1000.0;
    m.loc_overhead_window_start_s = static_cast<double>(loc_start) / 1000.0;
    m.comm_overhead = count_in(alarm_times, start);
    m.loc_comm_overhead = count_in(loc_times, loc_start);
    return m;
}

// ---------------------------------------------------------------------------

std::vector<std::string> setting_keys() {
    std::vector<std::string> keys{"preset"};
    for (const auto& [k, s] : setters()) keys.push_back(k);
    return keys;
}

void apply_setting(ScenarioConfig& cfg, const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) invalid(key, "unknown key");
    it->second(cfg, key, value);
}

ScenarioConfig parse_scenario(const std::string& text) {
    const auto lines = parse_lines(text);
    std::string preset = "multihop";
    for (const auto& [k, v] : lines)
        if (k == "preset") preset = v;
    auto base = preset_config(preset);
    if (!base) invalid("preset", "unknown preset '" + preset + "'");
    ScenarioConfig cfg = *base;
    std::optional<std::string> fraction;
    for (const auto& [k, v] : lines) {
        if (k == "preset") continue;
        if (k == "malicious_fraction") {
            fraction = v;
            continue;
        }
        apply_setting(cfg, k, v);
    }
    if (fraction) apply_setting(cfg, "malicious_fraction", *fraction);
    validate(cfg);
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

// ---------------------------------------------------------------------------

const char* to_string(SweepVariable v) {
    switch (v) {
    case SweepVariable::NodeCount: return "node_count";
    case SweepVariable::FFraction: return "F_fraction";
    case SweepVariable::MaliciousFraction: return "malicious_fraction";
    case SweepVariable::MaxSpeed: return "max_speed";
    }
    return "?";
}

SweepVariable parse_sweep_variable(const std::string& s) {
    for (auto v : {SweepVariable::NodeCount, SweepVariable::FFraction, SweepVariable::MaliciousFraction,
                   SweepVariable::MaxSpeed})
        if (s == to_string(v)) return v;
    invalid("variable", "unknown sweep variable '" + s + "'");
}

SweepSpec parse_sweep_spec(const std::string& text) {
    SweepSpec spec;
    std::string base_text;
    bool have_values = false;
    for (const auto& [k, v] : parse_lines(text)) {
        if (k.rfind("base.", 0) == 0) {
            base_text += k.substr(5) + " = " + v + "\n";
        } else if (k == "variable") {
            spec.variable = parse_sweep_variable(v);
        } else if (k == "values") {
            spec.values.clear();
            std::istringstream is(v);
            std::string item;
            while (std::getline(is, item, ',')) spec.values.push_back(parse_double("values", trim(item)));
            have_values = true;
        } else if (k == "repetitions") {
            spec.repetitions = static_cast<std::uint32_t>(parse_count(k, v));
        } else if (k == "seed") {
            spec.base_seed = parse_count(k, v);
        } else if (k == "seed_policy") {
            if (v == "paired")
                spec.seed_policy = SeedPolicy::Paired;
            else if (v == "distinct")
                spec.seed_policy = SeedPolicy::Distinct;
            else
                invalid(k, "expected 'paired' or 'distinct'");
        } else if (k == "metric") {
            const MetricsReport probe;
            bool known = false;
            for (const auto& [name, val] : probe.fields()) known = known || name == v;
            if (!known) invalid(k, "unknown metric '" + v + "'");
            spec.metric = v;
        } else {
            invalid(k, "unknown key");
        }
    }
    if (!have_values || spec.values.empty()) invalid("values", "at least one value is required");
    if (spec.repetitions < 1) invalid("repetitions", "must be at least 1");
    spec.base = parse_scenario(base_text);
    for (double v : spec.values) validate(sweep_point(spec, v, spec.base_seed));
    return spec;
}

std::uint64_t sweep_seed(const SweepSpec& spec, std::size_t value_index, std::uint32_t rep) {
    if (spec.seed_policy == SeedPolicy::Paired) return spec.base_seed + rep;
    return spec.base_seed + value_index * spec.repetitions + rep;
}

ScenarioConfig sweep_point(const SweepSpec& spec, double value, std::uint64_t seed) {
    ScenarioConfig c = spec.base;
    switch (spec.variable) {
    case SweepVariable::NodeCount:
        if (value < 1 || value != std::floor(value)) invalid("node_count", "sweep values must be positive integers");
        c.node_count = static_cast<std::uint32_t>(value);
        break;
    case SweepVariable::FFraction: c.f_fraction = value; break;
    case SweepVariable::MaliciousFraction:
        if (value < 0 || value > 1) invalid("malicious_fraction", "must lie in [0,1]");
        c.malicious_count = static_cast<std::uint32_t>(std::llround(value * c.node_count));
        break;
    case SweepVariable::MaxSpeed: c.mobility.max_speed_mps = value; break;
    }
    c.rng_seed = seed;
    validate(c);
    return c;
}

std::vector<SweepAggregate> aggregate_rows(const std::vector<SweepRow>& rows) {
    std::vector<SweepAggregate> out;
    std::vector<double> order;
    std::map<double, std::vector<const SweepRow*>> by_value;
    for (const auto& r : rows) {
        if (!by_value.count(r.value)) order.push_back(r.value);
        by_value[r.value].push_back(&r);
    }
    for (double v : order) {
        SweepAggregate a;
        a.value = v;
        std::map<std::string, std::vector<double>> samples;
        std::vector<std::string> names;
        for (const auto* row : by_value[v]) {
            for (const auto& [name, val] : row->report.fields()) {
                if (!samples.count(name)) names.push_back(name);
                auto& s = samples[name];
                if (val) s.push_back(*val);
            }
        }
        for (const auto& name : names) {
            const auto& s = samples[name];
            if (s.empty()) {
                a.mean[name] = std::nullopt;
                a.stddev[name] = std::nullopt;
                continue;
            }
            const double mu = mean_of(s);
            double ss = 0.0;
            for (double x : s) ss += (x - mu) * (x - mu);
            a.mean[name] = mu;
            a.stddev[name] = s.size() > 1 ? std::sqrt(ss / static_cast<double>(s.size() - 1)) : 0.0;
        }
        out.push_back(std::move(a));
    }
    return out;
}

SweepResult run_sweep(const SweepSpec& spec, const MetricsOptions& opt) {
    SweepResult result;
    result.spec = spec;
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep) {
            const std::uint64_t seed = sweep_seed(spec, i, rep);
            const ScenarioConfig cfg = sweep_point(spec, spec.values[i], seed);
            const RunResult run_result = run(cfg);
            SweepRow row;
            row.run_id = "v" + std::to_string(i) + "r" + std::to_string(rep);
            row.seed = seed;
            row.value = spec.values[i];
            row.report = compute_metrics(run_result.log, run_result.truth, opt);
            result.rows.push_back(std::move(row));
        }
    }
    result.aggregates = aggregate_rows(result.rows);
    return result;
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_csv(const SweepResult& result, std::ostream& os) {
    const MetricsReport probe;
    const auto names = probe.fields();
    os << "run_id,seed,independent_var,value";
    for (const auto& [name, v] : names) os << ',' << name;
    os << '\n';
    const char* var = to_string(result.spec.variable);
    for (const auto& row : result.rows) {
        os << row.run_id << ',' << row.seed << ',' << var << ',' << format_number(row.value);
        for (const auto& [name, v] : row.report.fields()) os << ',' << (v ? format_number(*v) : "");
        os << '\n';
    }
    for (const char* kind : {"mean", "stddev"}) {
        for (const auto& a : result.aggregates) {
            const auto& src = std::string(kind) == "mean" ? a.mean : a.stddev;
            os << kind << ",," << var << ',' << format_number(a.value);
            for (const auto& [name, v] : names) {
                auto it = src.find(name);
                os << ',' << (it != src.end() && it->second ? format_number(*it->second) : "");
            }
            os << '\n';
        }
    }
}

void write_svg(const SweepResult& result, const std::string& metric, std::ostream& os) {
    constexpr double W = 640, H = 420, L = 80, R = 30, T = 40, B = 60;
    struct Pt {
        double x, y, sd;
    };
    std::vector<Pt> pts;
    for (const auto& a : result.aggregates) {
        auto m = a.mean.find(metric);
        if (m == a.mean.end() || !m->second) continue;
        auto s = a.stddev.find(metric);
        pts.push_back({a.value, *m->second, s != a.stddev.end() && s->second ? *s->second : 0.0});
    }
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!pts.empty()) {
        x0 = x1 = pts.front().x;
        y1 = pts.front().y;
        for (const auto& p : pts) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y - p.sd);
            y1 = std::max(y1, p.y + p.sd);
        }
    }
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) y1 = y0 + 1;
    auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    auto f = [](double v) { return format_number(std::round(v * 100) / 100); };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
       << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << metric << " vs "
       << to_string(result.spec.variable) << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = y0 + (y1 - y0) * i / 4.0;
        os << "<line x1=\"" << L - 4 << "\" y1=\"" << f(sy(yv)) << "\" x2=\"" << L << "\" y2=\"" << f(sy(yv))
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << L - 8 << "\" y=\"" << f(sy(yv) + 4) << "\" text-anchor=\"end\">" << format_number(yv)
           << "</text>\n";
    }
    for (const auto& p : pts) {
        os << "<text x=\"" << f(sx(p.x)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
           << format_number(p.x) << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
       << to_string(result.spec.variable) << "</text>\n";
    if (!pts.empty()) {
        os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << f(sx(pts[i].x)) << ',' << f(sy(pts[i].y));
        os << "\"/>\n";
    }
    for (const auto& p : pts) {
        os << "<line x1=\"" << f(sx(p.x)) << "\" y1=\"" << f(sy(p.y - p.sd)) << "\" x2=\"" << f(sx(p.x))
           << "\" y2=\"" << f(sy(p.y + p.sd)) << "\" stroke=\"gray\"/>\n";
        os << "<circle cx=\"" << f(sx(p.x)) << "\" cy=\"" << f(sy(p.y)) << "\" r=\"4\" fill=\"steelblue\"/>\n";
    }
    os << "</svg>\n";
}

}  // namespace trustwatch
