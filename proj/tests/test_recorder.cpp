#include <doctest.h>

#include <cstring>
#include <sstream>

#include "frames.hpp"
#include "viewvr/recorder.hpp"
#include "viewvr/sim/world.hpp"

using namespace viewvr;
using namespace viewvr::rec;

TEST_CASE("one frame: one line, loads back equal") {
    gen::Rng rng(1);
    const Frame f = gen::frame(rng, 10);
    const auto path = gen::temp_path("one");
    Session s;
    append(s, f);
    save(s, path);

    std::ifstream in(path);
    std::string line, extra;
    REQUIRE(std::getline(in, line));
    CHECK_FALSE(std::getline(in, extra));
    CHECK(from_line(line, 1) == f);
    CHECK(load(path).frames == s.frames);
    std::filesystem::remove(path);
}

TEST_CASE("record uses the documented field names") {
    gen::Rng rng(2);
    const std::string line = to_line(gen::frame(rng, 1));
    for (const char* k : {"\"t_us\"", "\"op_hand\"", "\"op_head\"", "\"pinch\"", "\"joints\"", "\"head\"",
                          "\"aperture\"", "\"camera\"", "\"estop\""}) {
        CHECK(line.find(k) != std::string::npos);
    }
}

TEST_CASE("timestamps must strictly increase") {
    gen::Rng rng(3);
    Session s;
    append(s, gen::frame(rng, 100));
    CHECK_THROWS_AS(append(s, gen::frame(rng, 100)), OrderError);
    CHECK_THROWS_AS(append(s, gen::frame(rng, 99)), OrderError);
    CHECK(s.frames.size() == 1);

    const auto path = gen::temp_path("order");
    SessionWriter w(path);
    w.append(gen::frame(rng, 5));
    CHECK_THROWS_AS(w.append(gen::frame(rng, 5)), OrderError);
    std::filesystem::remove(path);
}

TEST_CASE("10k frame session roundtrips field-exact, order kept") {
    gen::Rng rng(4);
    Session s;
    std::int64_t t = 0;
    for (int i = 0; i < 10'000; ++i) {
        t += rng.integer(1, 20'000);
        append(s, gen::frame(rng, t));
    }
    const auto path = gen::temp_path("big");
    save(s, path);
    const Session back = load(path);
    REQUIRE(back.frames.size() == s.frames.size());
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
        // Bitwise, so -0.0 and tiny exponents count.
        CHECK(std::memcmp(&back.frames[i].joints, &s.frames[i].joints, sizeof(s.frames[i].joints)) == 0);
        CHECK(back.frames[i] == s.frames[i]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("empty session replays to an empty stream") {
    std::istringstream in("");
    CHECK(replay(load(in)).empty());
}

TEST_CASE("corrupt line N reports N") {
    gen::Rng rng(5);
    std::ostringstream out;
    for (int i = 1; i <= 6; ++i) out << (i == 4 ? std::string("{\"t_us\": 4, \"op_hand\": ") : to_line(gen::frame(rng, i))) << '\n';
    std::istringstream in(out.str());
    try {
        load(in);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
    }
}

TEST_CASE("bad fields are parse errors") {
    gen::Rng rng(6);
    std::string good = to_line(gen::frame(rng, 7));
    auto with = [&](const std::string& from, const std::string& to) {
        std::string s = good;
        const auto at = s.find(from);
        REQUIRE(at != std::string::npos);
        return s.replace(at, from.size(), to);
    };
    CHECK_THROWS_AS(from_line(with("\"t_us\":7", "\"t_us\":7.5"), 9), ParseError);
    CHECK_THROWS_AS(from_line(with("\"camera\":", "\"cam\":"), 9), ParseError);
    CHECK_THROWS_AS(from_line(with("\"joints\":[", "\"joints\":[1,"), 9), ParseError);
    CHECK_THROWS_AS(from_line("not json", 9), ParseError);
}

TEST_CASE("out-of-order file is a parse error on that line") {
    gen::Rng rng(7);
    std::istringstream in(to_line(gen::frame(rng, 10)) + "\n" + to_line(gen::frame(rng, 10)) + "\n");
    try {
        load(in);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("replaying a recorded run reproduces the joints") {
    for (const char* name : {"scenarios/pickplace.scn", "scenarios/pour.scn"}) {
        const auto script = sim::load_scenario(name);
        Session recorded;
        sim::RunOptions rec_opt;
        rec_opt.on_frame = [&](const Frame& f) { append(recorded, f); };
        sim::run_scenario(script, 42, rec_opt);

        const auto path = gen::temp_path("replay");
        save(recorded, path);
        const auto inputs = replay(load(path));
        std::filesystem::remove(path);
        REQUIRE(inputs.size() == recorded.frames.size());

        std::vector<Frame> again;
        sim::RunOptions rep_opt;
        rep_opt.replay = &inputs;
        rep_opt.on_frame = [&](const Frame& f) { again.push_back(f); };
        sim::run_scenario(script, 42, rep_opt);

        REQUIRE(again.size() == recorded.frames.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < again.size(); ++i) {
            CHECK(again[i].t_us == recorded.frames[i].t_us);
            for (int j = 0; j < 6; ++j) {
                worst = std::max(worst, std::abs(again[i].joints[j] - recorded.frames[i].joints[j]));
            }
        }
        CHECK(worst <= 1e-9);
    }
}
