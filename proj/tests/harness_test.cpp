#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "trustwatch/harness.hpp"

using namespace trustwatch;

namespace {

struct LogBuilder {
    EventLog log;
    explicit LogBuilder(std::uint32_t nodes, std::uint64_t duration_ms = 1000000) {
        log.add(0, EventKind::Meta, 0, 0,
                "nodes=" + std::to_string(nodes) + " duration_ms=" + std::to_string(duration_ms));
    }
    LogBuilder& adversary(NodeId id) {
        log.add(0, EventKind::Adversary, id, id, "drop=1");
        return *this;
    }
    LogBuilder& add(std::uint64_t t, EventKind k, NodeId a, NodeId s, std::string d = {}) {
        log.add(t, k, a, s, std::move(d));
        return *this;
    }
    EventLog done(std::uint64_t end = 1000000) {
        log.add(end, EventKind::Summary, 0, 0, "control_bytes=10 piggyback_bytes=2 route_discoveries=3");
        return log;
    }
};

MetricsReport metrics_of(const EventLog& log, const MetricsOptions& opt = {}) {
    return compute_metrics(log, ground_truth_from_log(log), opt);
}

}  // namespace

TEST(Metrics, DetectionAndFalsePositives) {
    LogBuilder b(10);
    for (NodeId v = 1; v <= 5; ++v) b.adversary(v);
    for (NodeId v = 1; v <= 5; ++v) {
        b.add(1000 * v, EventKind::GlobalAlarm, 9, v);
        b.add(1000 * v + 500, EventKind::Isolated, 9, v);
    }
    const MetricsReport m = metrics_of(b.done());
    EXPECT_DOUBLE_EQ(m.detection_rate, 1.0);
    EXPECT_DOUBLE_EQ(m.false_positive_rate, 0.0);
    EXPECT_EQ(m.false_alarm_count, 0u);
    EXPECT_EQ(m.global_alarm_count, 5u);
    EXPECT_EQ(m.control_bytes, 10u);
    EXPECT_EQ(m.route_discoveries, 3u);
}

TEST(Metrics, HonestAccused) {
    LogBuilder b(4);
    b.adversary(1).add(10, EventKind::GlobalAlarm, 1, 2).add(20, EventKind::GlobalAlarm, 3, 2);
    const MetricsReport m = metrics_of(b.done());
    EXPECT_EQ(m.false_alarm_count, 2u);
    EXPECT_NEAR(m.false_positive_rate, 1.0 / 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(m.detection_rate, 0.0);
}

TEST(Metrics, NoCertificatesMeansNoConvergence) {
    const MetricsReport m = metrics_of(LogBuilder(5).done());
    EXPECT_FALSE(m.total_convergence_time_s.has_value());
    EXPECT_FALSE(m.effective_convergence_time_s.has_value());
    EXPECT_EQ(m.certificates_issued, 0u);
}

TEST(Metrics, InstantFloodConvergesAtZero) {
    LogBuilder b(3);
    b.add(500, EventKind::CertIssued, 1, 1, "key=1:1:500");
    for (NodeId v = 1; v <= 3; ++v) b.add(500, EventKind::CertHeld, v, 1, "key=1:1:500");
    const MetricsReport m = metrics_of(b.done());
    ASSERT_TRUE(m.total_convergence_time_s.has_value());
    EXPECT_DOUBLE_EQ(*m.total_convergence_time_s, 0.0);
    EXPECT_EQ(m.certificates_converged, 1u);
}

TEST(Metrics, EffectiveCoversOnlyPastAndFutureNeighbours) {
    LogBuilder b(4);
    b.add(0, EventKind::LinkUp, 1, 2).add(70000, EventKind::LinkUp, 1, 3);
    b.add(1000, EventKind::CertIssued, 1, 1, "key=1:1:1000");
    b.add(1000, EventKind::CertHeld, 1, 1, "key=1:1:1000");
    b.add(3000, EventKind::CertHeld, 2, 1, "key=1:1:1000");
    b.add(61000, EventKind::CertHeld, 3, 1, "key=1:1:1000");
    b.add(121000, EventKind::CertHeld, 4, 1, "key=1:1:1000");
    const MetricsReport m = metrics_of(b.done());
    EXPECT_DOUBLE_EQ(*m.effective_convergence_time_s, 60.0);
    EXPECT_DOUBLE_EQ(*m.total_convergence_time_s, 120.0);
}

TEST(Metrics, UnconvergedRespectsHorizon) {
    LogBuilder b(3, 1000000);
    b.add(100000, EventKind::CertIssued, 1, 1, "key=1:1:100000");
    b.add(900000, EventKind::CertIssued, 2, 2, "key=2:2:900000");
    const MetricsReport m = metrics_of(b.done());
    EXPECT_EQ(m.certificates_issued, 2u);
    EXPECT_EQ(m.certificates_unconverged, 1u);
}

TEST(Metrics, OverheadWindow) {
    LogBuilder b(6);
    b.adversary(1);
    for (std::uint64_t t : {100000, 150000, 259999, 260000, 400000}) b.add(t, EventKind::GlobalAlarm, 2, 1);
    const MetricsReport m = metrics_of(b.done());
    EXPECT_DOUBLE_EQ(m.overhead_window_start_s, 100.0);
    EXPECT_EQ(m.comm_overhead, 3u);

    MetricsOptions fixed;
    fixed.overhead_window_start_s = 200.0;
    EXPECT_EQ(metrics_of(LogBuilder(b).done(), fixed).comm_overhead, 2u);
}

TEST(Metrics, IncompleteLogRejected) {
    EventLog no_meta;
    no_meta.add(0, EventKind::Summary, 0, 0);
    EXPECT_THROW(ground_truth_from_log(no_meta), IncompleteLog);
    LogBuilder b(3);
    EXPECT_THROW(compute_metrics(b.log, ground_truth_from_log(b.log)), IncompleteLog);
}

TEST(Loc, QuietLogNoAlarms) {
    LogBuilder b(4);
    for (int i = 0; i < 50; ++i) b.add(i * 100, EventKind::Obs, 1, 2, "ok");
    EXPECT_TRUE(loc_baseline(b.done()).alarms.empty());
}

TEST(Loc, DropperDetected) {
    LogBuilder b(4);
    b.adversary(2);
    for (int i = 0; i < 8; ++i) b.add(i * 100, EventKind::Obs, 1, 2, "drop");
    const LocResult r = loc_baseline(b.done());
    EXPECT_EQ(r.alarms.size(), 4u);  // observations 5 through 8
    EXPECT_EQ(r.accused, (std::set<NodeId>{2}));
    const MetricsReport m = metrics_of(b.done());
    EXPECT_DOUBLE_EQ(m.loc_detection_rate, 1.0);
}

TEST(Scenario, ParsesAndValidates) {
    const ScenarioConfig c = parse_scenario(
        "# comment\n"
        "node_count = 20\n"
        "malicious_fraction = 0.25\n"
        "preset = congestion\n"
        "max_speed_mps = 5  # trailing\n");
    EXPECT_EQ(c.preset, "congestion");
    EXPECT_EQ(c.node_count, 20u);
    EXPECT_EQ(c.malicious_count, 5u);
    EXPECT_DOUBLE_EQ(c.mobility.max_speed_mps, 5.0);
}

TEST(Scenario, ErrorsNameTheField) {
    auto field_of = [](const std::string& text) {
        try {
            parse_scenario(text);
        } catch (const ConfigInvalid& e) {
            return e.issues().front().field;
        }
        return std::string("<none>");
    };
    EXPECT_EQ(field_of("bogus = 1\n"), "bogus");
    EXPECT_EQ(field_of("node_count = many\n"), "node_count");
    EXPECT_EQ(field_of("max_speed_mps = 0\n"), "max_speed");
    EXPECT_EQ(field_of("preset = nowhere\n"), "preset");
    EXPECT_EQ(field_of("just words\n"), "line 1");
    EXPECT_EQ(field_of("drops_certificates = maybe\n"), "drops_certificates");
}

TEST(Sweep, SpecParsing) {
    const SweepSpec s = parse_sweep_spec(
        "variable = F_fraction\nvalues = 0.2, 0.5,1\nrepetitions = 3\nseed = 10\n"
        "metric = total_convergence_time_s\nbase.duration_s = 100\n");
    EXPECT_EQ(s.variable, SweepVariable::FFraction);
    EXPECT_EQ(s.values, (std::vector<double>{0.2, 0.5, 1.0}));
    EXPECT_EQ(s.base.duration_s, 100.0);
    EXPECT_EQ(sweep_seed(s, 2, 1), 11u);
    EXPECT_EQ(sweep_point(s, 0.5, 3).f_fraction, 0.5);
    EXPECT_THROW(parse_sweep_spec("variable = colour\nvalues = 1\n"), ConfigInvalid);
    EXPECT_THROW(parse_sweep_spec("variable = max_speed\nvalues = 0, 5\n"), ConfigInvalid);
    EXPECT_THROW(parse_sweep_spec("variable = max_speed\n"), ConfigInvalid);
}

TEST(Sweep, DistinctSeeds) {
    SweepSpec s;
    s.repetitions = 4;
    s.base_seed = 100;
    s.seed_policy = SeedPolicy::Distinct;
    EXPECT_EQ(sweep_seed(s, 0, 0), 100u);
    EXPECT_EQ(sweep_seed(s, 1, 0), 104u);
    EXPECT_EQ(sweep_seed(s, 2, 3), 111u);
}

TEST(Sweep, AggregationMatchesHandComputation) {
    std::vector<SweepRow> rows;
    const double vals[] = {2.0, 4.0, 9.0};
    for (int i = 0; i < 3; ++i) {
        SweepRow r;
        r.run_id = "v0r" + std::to_string(i);
        r.value = 5.0;
        r.report.detection_rate = vals[i];
        if (i != 1) r.report.total_convergence_time_s = vals[i];
        rows.push_back(r);
    }
    const auto agg = aggregate_rows(rows);
    ASSERT_EQ(agg.size(), 1u);
    EXPECT_DOUBLE_EQ(*agg[0].mean.at("detection_rate"), 5.0);
    EXPECT_NEAR(*agg[0].stddev.at("detection_rate"), std::sqrt((9.0 + 1.0 + 16.0) / 2.0), 1e-12);
    EXPECT_DOUBLE_EQ(*agg[0].mean.at("total_convergence_time_s"), 5.5);
    EXPECT_FALSE(agg[0].mean.at("effective_convergence_time_s").has_value());
}

TEST(Sweep, CsvLayout) {
    SweepResult r;
    r.spec.variable = SweepVariable::MaxSpeed;
    SweepRow row;
    row.run_id = "v0r0";
    row.seed = 7;
    row.value = 5;
    row.report.detection_rate = 0.5;
    r.rows = {row};
    r.aggregates = aggregate_rows(r.rows);
    std::ostringstream os;
    write_csv(r, os);
    std::istringstream is(os.str());
    std::string header, line1, mean, sd;
    std::getline(is, header);
    std::getline(is, line1);
    std::getline(is, mean);
    std::getline(is, sd);
    EXPECT_EQ(header.rfind("run_id,seed,independent_var,value,false_positive_rate,", 0), 0u);
    EXPECT_EQ(line1.rfind("v0r0,7,max_speed,5,0,0,0,0.5,", 0), 0u);
    EXPECT_EQ(mean.rfind("mean,,max_speed,5,", 0), 0u);
    EXPECT_EQ(sd.rfind("stddev,,max_speed,5,", 0), 0u);
    const auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
    EXPECT_EQ(commas(header), commas(line1));
    EXPECT_EQ(commas(header), commas(sd));

    std::ostringstream svg;
    write_svg(r, "detection_rate", svg);
    EXPECT_NE(svg.str().find("<svg"), std::string::npos);
    EXPECT_NE(svg.str().find("<circle"), std::string::npos);
}
