// trustwatch: run scenarios and sweeps, inspect frames, replay logs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "trustwatch/harness.hpp"
#include "trustwatch/messages.hpp"
#include "trustwatch/sim.hpp"

namespace fs = std::filesystem;
using namespace trustwatch;

namespace {

ConfigInvalid config_error(const std::string& field, const std::string& message) {
    return ConfigInvalid(std::vector<ConfigInvalid::Issue>{{field, message}});
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("TRUSTWATCH_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used == std::string(s).size()) return v;
    } catch (const std::exception&) {
    }
    throw config_error("TRUSTWATCH_SEED", std::string("not an unsigned integer: '") + s + "'");
}

nlohmann::ordered_json report_json(const MetricsReport& m) {
    nlohmann::ordered_json j;
    for (const auto& [name, v] : m.fields()) j[name] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
    return j;
}

void print_report(const MetricsReport& m) {
    for (const auto& [name, v] : m.fields()) std::cout << name << " = " << (v ? format_number(*v) : "-") << '\n';
}

int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed, const std::string& out) {
    ScenarioConfig cfg = load_scenario(scenario);
    if (auto s = env_seed()) cfg.rng_seed = *s;
    if (seed) cfg.rng_seed = *seed;
    const RunResult r = run(cfg);
    const MetricsReport m = compute_metrics(r.log, r.truth);
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream(fs::path(out) / "events.log") << r.log.to_string();
        std::ofstream(fs::path(out) / "metrics.json") << report_json(m).dump(2) << '\n';
    }
    std::cout << "seed = " << cfg.rng_seed << '\n';
    print_report(m);
    return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out) {
    std::ifstream in(spec_path);
    if (!in) throw config_error("spec", "cannot open '" + spec_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    SweepSpec spec = parse_sweep_spec(ss.str());
    if (auto s = env_seed()) spec.base_seed = *s;
    const SweepResult result = run_sweep(spec);
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "sweep.csv");
    write_csv(result, csv);
    std::ofstream svg(fs::path(out) / "sweep.svg");
    write_svg(result, spec.metric, svg);
    for (const auto& a : result.aggregates) {
        auto it = a.mean.find(spec.metric);
        std::cout << to_string(spec.variable) << " = " << format_number(a.value) << "  mean " << spec.metric << " = "
                  << (it != a.mean.end() && it->second ? format_number(*it->second) : "-") << '\n';
    }
    std::cout << "wrote " << (fs::path(out) / "sweep.csv").string() << " and "
              << (fs::path(out) / "sweep.svg").string() << '\n';
    return 0;
}

int cmd_inspect(const std::string& hex) {
    const Bytes bytes = from_hex(hex);
    try {
        const Frame f = decode_rep_mess(bytes);
        const auto& h = f.header;
        std::cout << "version     " << int(h.version) << '\n'
                  << "type        " << int(h.type) << " (" << to_string(h.type) << ")\n"
                  << "subject     " << h.subject << '\n'
                  << "rep_val     " << h.rep_val << " (" << format_number(from_fixed(h.rep_val)) << ")\n"
                  << "timestamp   " << h.timestamp_ms << " ms\n"
                  << "nonce       " << h.nonce << '\n'
                  << "sender      " << h.sender << '\n'
                  << "payload_len " << h.payload_len << '\n'
                  << "payload     " << to_hex(f.payload) << '\n'
                  << "tag         " << to_hex(f.tag) << '\n';
        return 0;
    } catch (const CodecError& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 1;
    }
}

int cmd_replay(const std::string& path, const std::string& baseline) {
    if (baseline != "loc") throw config_error("baseline", "only 'loc' is supported");
    std::ifstream in(path);
    if (!in) throw config_error("log", "cannot open '" + path + "'");
    const EventLog log = EventLog::read(in);
    const GroundTruth truth = ground_truth_from_log(log);
    const MetricsReport m = compute_metrics(log, truth);
    std::cout << "                    proposed  loc\n";
    std::cout << "alarms              " << m.global_alarm_count << "  " << m.loc_alarm_count << '\n';
    std::cout << "false alarms        " << m.false_alarm_count << "  " << m.loc_false_alarm_count << '\n';
    std::cout << "false positive rate " << format_number(m.false_positive_rate) << "  "
              << format_number(m.loc_false_positive_rate) << '\n';
    std::cout << "detection rate      " << format_number(m.detection_rate) << "  "
              << format_number(m.loc_detection_rate) << '\n';
    std::cout << "alarms in window    " << m.comm_overhead << "  " << m.loc_comm_overhead << "  (from "
              << format_number(m.overhead_window_start_s) << " s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trustwatch: trust-certificate reputation simulator"};
    app.require_subcommand(1);

    auto* run_cmd = app.add_subcommand("run", "run one scenario");
    std::string scenario, run_out;
    std::optional<std::uint64_t> seed;
    run_cmd->add_option("--scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--seed", seed, "random seed (overrides TRUSTWATCH_SEED and the file)");
    run_cmd->add_option("--out", run_out, "directory for events.log and metrics.json");

    auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep");
    std::string spec, sweep_out;
    sweep_cmd->add_option("--spec", spec, "sweep spec file")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--out", sweep_out, "output directory")->required();

    auto* codec_cmd = app.add_subcommand("codec", "frame codec tools");
    codec_cmd->require_subcommand(1);
    auto* inspect_cmd = codec_cmd->add_subcommand("inspect", "decode a hex-encoded frame");
    std::string hex;
    inspect_cmd->add_option("hex", hex, "frame bytes as hex")->required();

    auto* replay_cmd = app.add_subcommand("replay", "recompute metrics from a log");
    std::string log_path, baseline = "loc";
    replay_cmd->add_option("--log", log_path, "event log")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--baseline", baseline, "comparison baseline")->check(CLI::IsMember({"loc"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return cmd_run(scenario, seed, run_out);
        if (*sweep_cmd) return cmd_sweep(spec, sweep_out);
        if (*inspect_cmd) return cmd_inspect(hex);
        if (*replay_cmd) return cmd_replay(log_path, baseline);
    } catch (const ConfigInvalid& e) {
        for (const auto& i : e.issues()) std::cerr << "error: " << i.field << ": " << i.message << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
