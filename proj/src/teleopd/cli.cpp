#include "viewvr/teleopd/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <thread>

#include <CLI11.hpp>

#include "viewvr/config.hpp"
#include "viewvr/headctl.hpp"
#include "viewvr/recorder.hpp"
#include "viewvr/sim/world.hpp"

namespace viewvr::teleopd {

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

struct MissingInput {
    std::string what;
};

void require_file(const std::filesystem::path& p) {
    if (!std::filesystem::is_regular_file(p)) throw MissingInput{"no such file: " + p.string()};
}

sim::NetworkModel parse_net(const std::string& s) {
    sim::NetworkModel m;
    double v[4] = {0, 0, 0, 0};
    int n = 0;
    std::size_t start = 0;
    while (n < 4) {
        const std::size_t comma = s.find(',', start);
        const std::string part = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        std::size_t used = 0;
        try {
            v[n++] = std::stod(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != part.size()) throw CLI::ValidationError("--net", "expected L,J,p[,dup], got '" + s + "'");
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (n < 3 || s.find(',', start) != std::string::npos) {
        throw CLI::ValidationError("--net", "expected L,J,p[,dup], got '" + s + "'");
    }
    m = {v[0], v[1], v[2], v[3]};
    if (m.latency_ms < 0 || m.jitter_ms < 0 || m.jitter_ms > m.latency_ms || m.drop < 0 || m.drop > 1 ||
        m.duplicate < 0 || m.duplicate > 1) {
        throw CLI::ValidationError("--net", "need L >= J >= 0 and probabilities in [0, 1]");
    }
    return m;
}

struct Common {
    std::string record;
    ServiceConfig service;
};

robot::RobotConfig robot_settings(const Common& c) {
    for (const auto& f : {c.service.dh_file, c.service.limits_file})
        if (!f.empty()) require_file(f);
    return robot_config(c.service);
}

std::optional<rec::SessionWriter> open_writer(const Common& c) {
    if (c.record.empty()) return std::nullopt;
    return std::optional<rec::SessionWriter>(std::in_place, c.record);
}

// --------------------------------------------------------------------------- simulate

int do_simulate(const Common& c, const std::string& path, std::optional<std::uint64_t> seed,
                const std::string& net, bool json, std::ostream& out) {
    require_file(path);
    const sim::ScenarioScript script = sim::load_scenario(path);
    sim::RunOptions opt;
    opt.robot = robot_settings(c);
    if (!net.empty()) opt.net = parse_net(net);
    auto writer = open_writer(c);
    if (writer) opt.on_frame = [&](const rec::Frame& f) { writer->append(f); };
    const auto report = sim::run_scenario(script, seed.value_or(script.seed), opt);
    out << (json ? sim::report_json(report) : sim::format_report(report));
    return report.success ? kExitOk : kExitGoalFailure;
}

// --------------------------------------------------------------------------- replay

int do_replay(const Common& c, const std::string& path, const std::string& scenario, std::optional<std::uint64_t> seed,
              const std::string& net, bool json, std::ostream& out) {
    require_file(path);
    const rec::Session session = rec::load(std::filesystem::path(path));
    sim::ScenarioScript script;
    script.name = "replay";
    if (!scenario.empty()) {
        require_file(scenario);
        script = sim::load_scenario(scenario);
    } else {
        script.keyframes.push_back({});
    }
    const auto inputs = rec::replay(session);
    sim::RunOptions opt;
    opt.robot = robot_settings(c);
    if (!net.empty()) opt.net = parse_net(net);
    opt.replay = &inputs;

    auto writer = open_writer(c);
    std::size_t next = 0, compared = 0;
    double worst = 0.0;
    opt.on_frame = [&](const rec::Frame& f) {
        if (writer) writer->append(f);
        while (next < session.frames.size() && session.frames[next].t_us < f.t_us) ++next;
        if (next < session.frames.size() && session.frames[next].t_us == f.t_us) {
            for (int j = 0; j < 6; ++j) worst = std::max(worst, std::abs(f.joints[j] - session.frames[next].joints[j]));
            ++compared;
        }
    };
    const auto report = sim::run_scenario(script, seed.value_or(script.seed), opt);
    const bool match = compared == session.frames.size() && worst <= 1e-9;
    out << (json ? sim::report_json(report) : sim::format_report(report));
    char line[160];
    std::snprintf(line, sizeof line, "replay: frames=%zu compared=%zu max_joint_dev_rad=%.3e %s\n",
                  session.frames.size(), compared, worst, match ? "match" : "MISMATCH");
    out << line;
    return match ? kExitOk : kExitGoalFailure;
}

// --------------------------------------------------------------------------- home-demo

int do_home_demo(const Common& c, double roll_deg, double pitch_deg, const std::string& stuck, double limit_s,
                 std::ostream& out) {
    head::MotorLimits lim;
    head::PlantConfig pc;
    if (stuck == "roll") pc.hall_stuck[0] = true;
    if (stuck == "pitch") pc.hall_stuck[1] = true;
    head::HeadPlant plant(lim, pc, {geom::deg_to_rad(roll_deg), geom::deg_to_rad(pitch_deg)});
    head::HeadState st;
    auto writer = open_writer(c);
    head::Phase last[2] = {head::Phase::Unhomed, head::Phase::Unhomed};
    head::Phase last_fsm = st.fsm;
    const double dt = 1e-3;
    char line[200];
    std::snprintf(line, sizeof line, "start: roll=%.3f deg pitch=%.3f deg\n", roll_deg, pitch_deg);
    out << line;
    std::int64_t k = 0;
    for (; k * dt <= limit_s; ++k) {
        const auto r = head::homing_step(st, plant.sensors(), lim, dt);
        st = r.state;
        for (int a = 0; a < 2; ++a) {
            if (st.axis[a].phase != last[a]) {
                std::snprintf(line, sizeof line, "t=%.3f %s %s\n", k * dt, a == 0 ? "roll " : "pitch",
                              std::string(head::to_string(st.axis[a].phase)).c_str());
                out << line;
                last[a] = st.axis[a].phase;
            }
        }
        if (st.fsm != last_fsm) {
            std::snprintf(line, sizeof line, "t=%.3f head  %s\n", k * dt, std::string(head::to_string(st.fsm)).c_str());
            out << line;
            last_fsm = st.fsm;
        }
        if (writer && k % 10 == 0) {
            rec::Frame f;
            f.t_us = k * 1000;
            const auto ang = plant.angles();
            f.head = {ang[0], ang[1]};
            writer->append(f);
        }
        if (st.fsm == head::Phase::Homed || st.fsm == head::Phase::Faulted) break;
        plant.step(r.command, dt);
    }
    const auto ang = plant.angles();
    std::snprintf(line, sizeof line, "result: %s after %.3f s, true angles roll=%.6f pitch=%.6f rad, estimate roll=%.6f pitch=%.6f rad\n",
                  std::string(head::to_string(st.fsm)).c_str(), k * dt, ang[0], ang[1], st.roll, st.pitch);
    out << line;
    return st.fsm == head::Phase::Homed ? kExitOk : kExitGoalFailure;
}

// --------------------------------------------------------------------------- serve

int do_serve(Common c, double duration_s, std::ostream& out, std::ostream& err) {
    if (!c.record.empty()) c.service.record = c.record;
    if (const auto bad = check(c.service)) {
        err << "viewvr: " << *bad << "\n";
        return bad->rfind("no such file", 0) == 0 ? kExitNoInput : kExitUsage;
    }
    std::unique_ptr<Service> svc;
    try {
        svc = std::make_unique<Service>(c.service);
    } catch (const std::system_error& e) {
        err << "viewvr: " << e.what() << "\n";
        return kExitUnavailable;
    }
    g_interrupted = false;
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    svc->start();
    out << "serving: command udp " << svc->command_port() << ", telemetry udp " << c.service.telemetry_port
        << ", bridge tcp " << svc->bridge_port() << "\n"
        << std::flush;
    const auto t0 = std::chrono::steady_clock::now();
    while (!g_interrupted) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        if (duration_s > 0 && std::chrono::steady_clock::now() - t0 >= std::chrono::duration<double>(duration_s)) break;
    }
    svc->stop();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    const ServiceStats s = svc->stats();
    out << "stopped: steps=" << s.steps << " udp_accepted=" << s.udp_accepted << " udp_rejected=" << s.udp_rejected
        << " udp_stale=" << s.udp_stale << " bridge_clients=" << s.bridge_clients
        << " bridge_accepted=" << s.bridge_accepted << " bridge_errors=" << s.bridge_errors
        << " telemetry_frames=" << s.telemetry_frames << " telemetry_dropped=" << s.telemetry_dropped
        << " head_ticks=" << s.head_ticks << " head_spacing_us=" << s.head_tick_spacing_min_us << ".."
        << s.head_tick_spacing_max_us << "\n";
    return kExitOk;
}

} // namespace

int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& lookup) {
    CLI::App app{"ViewVR teleoperation stack without hardware", "viewvr"};
    app.require_subcommand(1);
    app.fallthrough();

    Common common;
    app.add_option("--record", common.record, "write a session file (one JSON record per line)");
    app.add_option("--dh", common.service.dh_file, "DH parameter file (default: built-in UR3; env VIEWVR_DH_FILE)");
    app.add_option("--limits", common.service.limits_file, "joint limits file (env VIEWVR_LIMITS_FILE)");

    std::string scenario, session, net, replay_scenario, stuck;
    std::optional<std::uint64_t> seed;
    bool json = false;
    double roll = 17.0, pitch = -11.0, limit = 20.0, duration = 0.0;

    auto* sim = app.add_subcommand("simulate", "run a scenario script in the deterministic world");
    sim->add_option("scenario", scenario, "scenario file")->required();
    sim->add_option("--seed", seed, "network RNG seed (default: the script's)");
    sim->add_option("--net", net, "network model L,J,p[,dup] (ms, ms, probability)");
    sim->add_flag("--json", json, "print the report as JSON");

    auto* rep = app.add_subcommand("replay", "re-run recorded operator inputs and compare joints");
    rep->add_option("session", session, "session file")->required();
    rep->add_option("--scenario", replay_scenario, "world settings of the recorded run");
    rep->add_option("--seed", seed, "network RNG seed");
    rep->add_option("--net", net, "network model L,J,p[,dup]");
    rep->add_flag("--json", json, "print the report as JSON");

    auto* home = app.add_subcommand("home-demo", "home a simulated head from an offset and print the phases");
    home->add_option("--roll", roll, "initial roll offset, degrees");
    home->add_option("--pitch", pitch, "initial pitch offset, degrees");
    home->add_option("--stuck-hall", stuck, "inject a stuck Hall sensor")->check(CLI::IsMember({"roll", "pitch"}));
    home->add_option("--limit", limit, "give up after this many simulated seconds")->check(CLI::PositiveNumber);

    auto* serve = app.add_subcommand("serve", "run the live service (UDP command/telemetry plus console bridge)");
    serve->add_option("--bridge-port", common.service.bridge_port, "console bridge TCP port (env VIEWVR_BRIDGE_PORT)");
    serve->add_option("--cmd-port", common.service.command_port, "command UDP port (env VIEWVR_CMD_PORT)");
    serve->add_option("--tlm-port", common.service.telemetry_port, "telemetry UDP port (env VIEWVR_TLM_PORT)");
    serve->add_option("--bind", common.service.bind_address, "address to bind");
    serve->add_option("--watchdog", common.service.watchdog_ms, "watchdog timeout, ms")->check(CLI::PositiveNumber);
    serve->add_option("--duration", duration, "stop after this many seconds (default: until interrupted)");

    try {
        apply_env(common.service, lookup);
    } catch (const std::invalid_argument& e) {
        err << "viewvr: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        std::vector<std::string> args;
        for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << "viewvr: " << e.what() << "\n" << sub->help();
        return kExitUsage;
    }

    try {
        if (sim->parsed()) return do_simulate(common, scenario, seed, net, json, out);
        if (rep->parsed()) return do_replay(common, session, replay_scenario, seed, net, json, out);
        if (home->parsed()) return do_home_demo(common, roll, pitch, stuck, limit, out);
        return do_serve(common, duration, out, err);
    } catch (const MissingInput& e) {
        err << "viewvr: " << e.what << "\n";
        return kExitNoInput;
    } catch (const CLI::ValidationError& e) {
        err << "viewvr: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sim::ScriptError& e) {
        err << "viewvr: " << e.what() << "\n";
        return kExitDataError;
    } catch (const rec::ParseError& e) {
        err << "viewvr: " << e.what() << "\n";
        return kExitDataError;
    } catch (const config::ConfigError& e) {
        err << "viewvr: " << e.what() << "\n";
        return kExitDataError;
    } catch (const std::exception& e) {
        err << "viewvr: " << e.what() << "\n";
        return kExitSoftware;
    }
}

} // namespace viewvr::teleopd
