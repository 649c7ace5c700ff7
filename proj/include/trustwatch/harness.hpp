#pragma once

// Metrics over event logs, the LOC comparison baseline, scenario files and
// parameter sweeps with CSV and SVG output.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trustwatch/event_log.hpp"
#include "trustwatch/node_protocol.hpp"
#include "trustwatch/sim.hpp"

namespace trustwatch {

class IncompleteLog : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads the META and ADVERSARY records. Throws IncompleteLog without META.
GroundTruth ground_truth_from_log(const EventLog& log);

// ---------------------------------------------------------------------------
// LOC baseline

/// Monitor settings for LOC: same window and threshold, no minimum sample count.
inline MonitorParams loc_monitor_defaults() {
    MonitorParams p;
    p.min_samples = 5;
    return p;
}

struct LocParams {
    MonitorParams monitor = loc_monitor_defaults();
    std::uint64_t holdoff_ms = 0;  // minimum spacing per (monitor, suspect); 0 = none
};

struct LocAlarm {
    std::uint64_t time_ms = 0;
    NodeId monitor = 0;
    NodeId subject = 0;
};

struct LocResult {
    std::vector<LocAlarm> alarms;
    std::set<NodeId> accused;
};

/// Replays OBS records through per-monitor windows and floods an alarm on
/// every observation that leaves the window above threshold. No challenge,
/// no consensus.
LocResult loc_baseline(const EventLog& log, const LocParams& params = {});

// ---------------------------------------------------------------------------
// Metrics

struct MetricsOptions {
    double overhead_window_s = 160.0;
    /// Start of the overhead window. By default each protocol is measured
    /// from its own first alarm.
    std::optional<double> overhead_window_start_s;
    /// Certificates issued this close to the end are not counted as unconverged.
    double convergence_horizon_s = 180.0;
    LocParams loc;
};

struct CertificateConvergence {
    CertKey key;
    std::uint64_t issued_ms = 0;
    std::optional<double> total_s;
    std::optional<double> effective_s;
};

struct MetricsReport {
    double false_positive_rate = 0.0;  // honest nodes ever alarmed / honest nodes
    std::uint64_t false_alarm_count = 0;
    std::uint64_t global_alarm_count = 0;
    double detection_rate = 0.0;       // malicious Isolated / malicious
    std::uint64_t honest_isolated = 0;
    std::uint64_t certificates_issued = 0;
    std::uint64_t certificates_converged = 0;
    std::uint64_t certificates_unconverged = 0;
    std::optional<double> total_convergence_time_s;      // mean over converged
    std::optional<double> effective_convergence_time_s;  // mean over converged
    double overhead_window_start_s = 0.0;
    std::uint64_t comm_overhead = 0;  // global alarms inside the window
    std::uint64_t control_bytes = 0;
    std::uint64_t piggyback_bytes = 0;
    std::uint64_t route_discoveries = 0;
    std::uint64_t loc_alarm_count = 0;
    std::uint64_t loc_false_alarm_count = 0;
    double loc_false_positive_rate = 0.0;
    double loc_detection_rate = 0.0;
    double loc_overhead_window_start_s = 0.0;
    std::uint64_t loc_comm_overhead = 0;
    std::vector<CertificateConvergence> certificates;

    /// Scalar fields in a fixed order, for CSV output.
    std::vector<std::pair<std::string, std::optional<double>>> fields() const;
};

MetricsReport compute_metrics(const EventLog& log, const GroundTruth& truth, const MetricsOptions& opt = {});

// ---------------------------------------------------------------------------
// Scenario files

/// Applies one `key = value` setting. Throws ConfigInvalid on unknown keys or bad values.
void apply_setting(ScenarioConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> setting_keys();

/// Parses `key = value` lines with `#` comments; `preset` is applied first.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepVariable { NodeCount, FFraction, MaliciousFraction, MaxSpeed };
const char* to_string(SweepVariable v);
SweepVariable parse_sweep_variable(const std::string& s);

enum class SeedPolicy { Paired, Distinct };

struct SweepSpec {
    SweepVariable variable = SweepVariable::MaxSpeed;
    std::vector<double> values;
    std::uint32_t repetitions = 1;
    ScenarioConfig base;
    std::uint64_t base_seed = 1;
    SeedPolicy seed_policy = SeedPolicy::Paired;  // paired: same seeds for every value
    std::string metric = "effective_convergence_time_s";
};

/// Throws ConfigInvalid.
SweepSpec parse_sweep_spec(const std::string& text);

ScenarioConfig sweep_point(const SweepSpec& spec, double value, std::uint64_t seed);
std::uint64_t sweep_seed(const SweepSpec& spec, std::size_t value_index, std::uint32_t rep);

struct SweepRow {
    std::string run_id;
    std::uint64_t seed = 0;
    double value = 0.0;
    MetricsReport report;
};

struct SweepAggregate {
    double value = 0.0;
    std::map<std::string, std::optional<double>> mean;
    std::map<std::string, std::optional<double>> stddev;
};

struct SweepResult {
    SweepSpec spec;
    std::vector<SweepRow> rows;
    std::vector<SweepAggregate> aggregates;
};

SweepResult run_sweep(const SweepSpec& spec, const MetricsOptions& opt = {});
std::vector<SweepAggregate> aggregate_rows(const std::vector<SweepRow>& rows);

void write_csv(const SweepResult& result, std::ostream& os);
void write_svg(const SweepResult& result, const std::string& metric, std::ostream& os);

std::string format_number(double v);

}  // namespace trustwatch
