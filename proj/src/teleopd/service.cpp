#include "viewvr/teleopd/service.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <deque>
#include <mutex>
#include <system_error>
#include <thread>
#include <vector>

#include "viewvr/config.hpp"
#include "viewvr/recorder.hpp"
#include "viewvr/teleopd/bridge.hpp"

namespace viewvr::teleopd {

namespace {

std::uint16_t parse_port(const char* name, const char* text) {
    const std::string_view s(text);
    unsigned v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v > 65535) {
        throw std::invalid_argument(std::string(name) + ": not a port number: '" + std::string(s) + "'");
    }
    return static_cast<std::uint16_t>(v);
}

[[noreturn]] void sys_fail(const std::string& what) { throw std::system_error(errno, std::generic_category(), what); }

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~Fd() { reset(); }
    int get() const { return fd_; }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) {
        throw std::invalid_argument("bad bind address '" + host + "'");
    }
    return a;
}

std::uint16_t local_port(int fd) {
    sockaddr_in a{};
    socklen_t n = sizeof a;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &n);
    return ntohs(a.sin_port);
}

Fd bind_socket(int type, const std::string& host, std::uint16_t port) {
    Fd fd(::socket(AF_INET, type, 0));
    if (fd.get() < 0) sys_fail("socket");
    const int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const sockaddr_in a = make_addr(host, port);
    if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&a), sizeof a) != 0) {
        sys_fail("bind " + host + ":" + std::to_string(port));
    }
    return fd;
}

template <class T>
class Mailbox {
public:
    void push(T v) {
        std::lock_guard lock(mu_);
        q_.push_back(std::move(v));
    }
    std::deque<T> drain() {
        std::lock_guard lock(mu_);
        return std::exchange(q_, {});
    }

private:
    std::mutex mu_;
    std::deque<T> q_;
};

struct Inbound {
    proto::Message msg;
    std::optional<sockaddr_in> peer;  // UDP sender, for telemetry
};

constexpr std::string_view kGet = "GET ";
constexpr auto kSniffWindow = std::chrono::milliseconds(100);
constexpr int kClientSendBuffer = 16 * 1024;

} // namespace

void apply_env(ServiceConfig& cfg, const EnvLookup& lookup) {
    if (const char* v = lookup("VIEWVR_CMD_PORT")) cfg.command_port = parse_port("VIEWVR_CMD_PORT", v);
    if (const char* v = lookup("VIEWVR_TLM_PORT")) cfg.telemetry_port = parse_port("VIEWVR_TLM_PORT", v);
    if (const char* v = lookup("VIEWVR_BRIDGE_PORT")) cfg.bridge_port = parse_port("VIEWVR_BRIDGE_PORT", v);
    if (const char* v = lookup("VIEWVR_DH_FILE")) cfg.dh_file = v;
    if (const char* v = lookup("VIEWVR_LIMITS_FILE")) cfg.limits_file = v;
}

std::optional<std::string> check(const ServiceConfig& cfg) {
    const std::uint16_t p[3] = {cfg.command_port, cfg.telemetry_port, cfg.bridge_port};
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (p[i] != 0 && p[i] == p[j]) return "ports must be distinct (" + std::to_string(p[i]) + " used twice)";
    for (const auto& f : {cfg.dh_file, cfg.limits_file}) {
        if (!f.empty() && !std::filesystem::exists(f)) return "no such file: " + f.string();
    }
    return std::nullopt;
}

robot::RobotConfig robot_config(const ServiceConfig& cfg) {
    robot::RobotConfig r;
    if (!cfg.dh_file.empty()) r.dh = config::load_dh(cfg.dh_file);
    if (!cfg.limits_file.empty()) r.limits = config::load_limits(cfg.limits_file);
    r.watchdog_ms = cfg.watchdog_ms;
    return r;
}

// ---------------------------------------------------------------------------

struct Service::Impl {
    ServiceConfig cfg;
    robot::RobotConfig rcfg;
    Fd cmd;
    Fd listener;
    Fd wake_r, wake_w;
    std::atomic<bool> stopping{false};
    bool started = false;
    std::thread receiver, bridge_thread, control;
    Mailbox<Inbound> inbox;
    Mailbox<std::string> telemetry_lines;

    mutable std::mutex stats_mu;
    ServiceStats stats;

    template <class F>
    void count(F f) {
        std::lock_guard lock(stats_mu);
        f(stats);
    }

    void wake() {
        const char b = 1;
        [[maybe_unused]] auto n = ::write(wake_w.get(), &b, 1);
    }

    void run_receiver();
    void run_bridge();
    void run_control();
};

Service::Service(const ServiceConfig& cfg) : impl_(std::make_unique<Impl>()) {
    impl_->cfg = cfg;
    impl_->rcfg = robot_config(cfg);
    impl_->cmd = bind_socket(SOCK_DGRAM, cfg.bind_address, cfg.command_port);
    impl_->listener = bind_socket(SOCK_STREAM, cfg.bind_address, cfg.bridge_port);
    if (::listen(impl_->listener.get(), 16) != 0) sys_fail("listen");
    set_nonblocking(impl_->listener.get());
    int p[2];
    if (::pipe(p) != 0) sys_fail("pipe");
    impl_->wake_r = Fd(p[0]);
    impl_->wake_w = Fd(p[1]);
    set_nonblocking(p[0]);
    set_nonblocking(p[1]);
}

Service::~Service() { stop(); }

void Service::start() {
    if (impl_->started) return;
    impl_->started = true;
    impl_->receiver = std::thread([this] { impl_->run_receiver(); });
    impl_->bridge_thread = std::thread([this] { impl_->run_bridge(); });
    impl_->control = std::thread([this] { impl_->run_control(); });
}

void Service::stop() {
    if (!impl_ || !impl_->started) return;
    impl_->stopping = true;
    impl_->wake();
    for (auto* t : {&impl_->receiver, &impl_->bridge_thread, &impl_->control})
        if (t->joinable()) t->join();
    impl_->started = false;
}

std::uint16_t Service::command_port() const { return local_port(impl_->cmd.get()); }
std::uint16_t Service::bridge_port() const { return local_port(impl_->listener.get()); }

ServiceStats Service::stats() const {
    std::lock_guard lock(impl_->stats_mu);
    return impl_->stats;
}

// --------------------------------------------------------------------------- receiver

void Service::Impl::run_receiver() {
    proto::ChannelState fresh;
    std::vector<std::uint8_t> buf(2048);
    while (!stopping) {
        pollfd p{cmd.get(), POLLIN, 0};
        if (::poll(&p, 1, 50) <= 0) continue;
        sockaddr_in from{};
        socklen_t len = sizeof from;
        const ssize_t n = ::recvfrom(cmd.get(), buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from), &len);
        if (n <= 0) continue;
        const proto::Decoded d = proto::decode({buf.data(), static_cast<std::size_t>(n)});
        if (!d.ok() || d.message->type() == proto::MsgType::Telemetry) {
            count([](ServiceStats& s) { ++s.udp_rejected; });
            continue;
        }
        if (proto::accept_fresh(fresh, d.message->type(), d.message->seq) == proto::Freshness::Stale) {
            count([](ServiceStats& s) { ++s.udp_stale; });
            continue;
        }
        count([](ServiceStats& s) { ++s.udp_accepted; });
        inbox.push({*d.message, from});
    }
}

// --------------------------------------------------------------------------- bridge

namespace {

struct Client {
    enum class Mode { Sniff, Line, WebSocket } mode = Mode::Sniff;
    Fd fd;
    std::chrono::steady_clock::time_point since;
    std::string in;
    std::string out;
    proto::ChannelState fresh;
    bridge::WsDecoder ws;
    bool close_after_flush = false;
    bool dead = false;

    void queue(std::string_view line) {
        if (mode == Mode::WebSocket) {
            out += bridge::ws_text_frame(line);
        } else {
            out.append(line);
            out.push_back('\n');
        }
    }
};

} // namespace

void Service::Impl::run_bridge() {
    std::vector<Client> clients;
    const std::string hello = bridge::hello_line({rcfg.dh, rcfg.limits, local_port(cmd.get()), cfg.telemetry_port});
    const std::size_t cap = cfg.client_queue_bytes;

    auto handle_line = [&](Client& c, std::string_view text) {
        if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
        if (text.empty()) return;
        const bridge::Parsed p = bridge::parse_line(text);
        if (const auto* e = std::get_if<bridge::BridgeError>(&p)) {
            count([](ServiceStats& s) { ++s.bridge_errors; });
            if (c.out.size() > 2 * cap) {
                c.dead = true;  // not reading its replies either
                return;
            }
            c.queue(bridge::error_line(*e));
            return;
        }
        const proto::Message& m = std::get<proto::Message>(p);
        if (proto::accept_fresh(c.fresh, m.type(), m.seq) == proto::Freshness::Stale) {
            count([](ServiceStats& s) { ++s.bridge_stale; });
            return;
        }
        count([](ServiceStats& s) { ++s.bridge_accepted; });
        inbox.push({m, std::nullopt});
    };

    auto become_line = [&](Client& c) {
        c.mode = Client::Mode::Line;
        c.queue(hello);
    };

    auto consume = [&](Client& c) {
        if (c.mode == Client::Mode::Sniff) {
            const std::size_t k = std::min(c.in.size(), kGet.size());
            if (c.in.compare(0, k, kGet.substr(0, k)) != 0) {
                become_line(c);
            } else {
                const auto end = c.in.find("\r\n\r\n");
                if (end == std::string::npos) {
                    if (c.in.size() > 8192) c.dead = true;
                    return;
                }
                const auto reply = bridge::websocket_handshake(std::string_view(c.in).substr(0, end + 2));
                if (!reply) {
                    c.out += "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n";
                    c.close_after_flush = true;
                    c.in.clear();
                    return;
                }
                c.out += *reply;
                c.mode = Client::Mode::WebSocket;
                c.queue(hello);
                c.in.erase(0, end + 4);
            }
        }
        if (c.mode == Client::Mode::Line) {
            std::size_t start = 0, nl;
            while ((nl = c.in.find('\n', start)) != std::string::npos) {
                handle_line(c, std::string_view(c.in).substr(start, nl - start));
                start = nl + 1;
            }
            c.in.erase(0, start);
            if (c.in.size() > 65536) c.dead = true;
        } else if (c.mode == Client::Mode::WebSocket) {
            for (const auto& msg : c.ws.feed(std::exchange(c.in, {}))) handle_line(c, msg);
            c.out += c.ws.take_replies();
            if (c.ws.failed()) c.dead = true;
            if (c.ws.closed()) c.close_after_flush = true;
        }
    };

    std::vector<pollfd> fds;
    char buf[4096];
    while (!stopping) {
        fds.clear();
        fds.push_back({listener.get(), POLLIN, 0});
        fds.push_back({wake_r.get(), POLLIN, 0});
        for (const auto& c : clients) {
            fds.push_back({c.fd.get(), static_cast<short>(POLLIN | (c.out.empty() ? 0 : POLLOUT)), 0});
        }
        ::poll(fds.data(), fds.size(), 20);
        if (stopping) break;
        if (fds[1].revents & POLLIN) {
            while (::read(wake_r.get(), buf, sizeof buf) > 0) {
            }
        }

        const auto now = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < clients.size(); ++i) {
            Client& c = clients[i];
            const short ev = fds[i + 2].revents;
            if (ev & (POLLIN | POLLHUP | POLLERR)) {
                const ssize_t n = ::recv(c.fd.get(), buf, sizeof buf, 0);
                if (n > 0) {
                    c.in.append(buf, static_cast<std::size_t>(n));
                    consume(c);
                } else if (n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK)) {
                    c.dead = true;
                }
            }
            if (c.mode == Client::Mode::Sniff && now - c.since > kSniffWindow) become_line(c);
        }

        for (const auto& line : telemetry_lines.drain()) {
            for (auto& c : clients) {
                if (c.mode == Client::Mode::Sniff || c.close_after_flush) continue;
                if (c.out.size() + line.size() + 16 > cap) {
                    count([](ServiceStats& s) { ++s.telemetry_dropped; });
                    continue;
                }
                c.queue(line);
            }
        }

        for (auto& c : clients) {
            if (c.dead || c.out.empty()) continue;
            const ssize_t n = ::send(c.fd.get(), c.out.data(), c.out.size(), MSG_NOSIGNAL);
            if (n > 0) {
                c.out.erase(0, static_cast<std::size_t>(n));
            } else if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) {
                c.dead = true;
            }
            if (c.out.empty() && c.close_after_flush) c.dead = true;
        }
        std::erase_if(clients, [](const Client& c) { return c.dead; });

        if (fds[0].revents & POLLIN) {
            for (;;) {
                const int fd = ::accept(listener.get(), nullptr, nullptr);
                if (fd < 0) break;
                set_nonblocking(fd);
                const int one = 1;
                ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
                // Keep the kernel's share of the backlog small too.
                const int sndbuf = kClientSendBuffer;
                ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &sndbuf, sizeof sndbuf);
                Client c;
                c.fd = Fd(fd);
                c.since = now;
                clients.push_back(std::move(c));
                count([](ServiceStats& s) { ++s.bridge_clients; });
            }
        }
    }
}

// --------------------------------------------------------------------------- control

void Service::Impl::run_control() {
    using clock = std::chrono::steady_clock;
    robot::Robot robot(rcfg);
    Fd out(::socket(AF_INET, SOCK_DGRAM, 0));
    std::optional<sockaddr_in> peer;
    head::FixedRateScheduler telemetry_sched(10'000);
    head::FixedRateScheduler head_ledger(robot::kHeadControlPeriodUs);
    head::FixedRateScheduler sample_sched(10'000);
    std::uint32_t telemetry_seq = 0;
    std::optional<std::int64_t> last_head_tick;

    std::optional<rec::SessionWriter> writer;
    if (cfg.record) writer.emplace(*cfg.record);
    geom::Pose last_arm = kin::fk(robot.joints(), rcfg.dh);
    double last_aperture = 1.0;
    const retarget::PinchConfig pinch;

    const auto t0 = clock::now();
    for (std::int64_t k = 0; !stopping; ++k) {
        const std::int64_t now_us = k * 1000;
        std::this_thread::sleep_until(t0 + std::chrono::microseconds(now_us));

        for (auto& in : inbox.drain()) {
            if (in.peer) peer = in.peer;
            if (robot.apply(in.msg, now_us) == robot::Outcome::Applied) {
                if (const auto* a = std::get_if<proto::ArmTarget>(&in.msg.payload)) last_arm = a->pose;
                if (const auto* g = std::get_if<proto::GripperCmd>(&in.msg.payload)) last_aperture = g->aperture;
            }
        }
        robot.control(now_us);

        for (std::int64_t due : head_ledger.tick(now_us)) {
            count([&](ServiceStats& s) {
                ++s.head_ticks;
                if (last_head_tick) {
                    const std::int64_t d = due - *last_head_tick;
                    s.head_tick_spacing_min_us = s.head_ticks == 2 ? d : std::min(s.head_tick_spacing_min_us, d);
                    s.head_tick_spacing_max_us = std::max(s.head_tick_spacing_max_us, d);
                }
            });
            last_head_tick = due;
        }

        if (!telemetry_sched.tick(now_us).empty()) {
            proto::Message m;
            m.seq = telemetry_seq++;
            m.timestamp_us = static_cast<std::uint64_t>(now_us);
            m.payload = robot.telemetry();
            if (peer) {
                sockaddr_in to = *peer;
                to.sin_port = htons(cfg.telemetry_port);
                const auto bytes = proto::encode(m);
                ::sendto(out.get(), bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&to), sizeof to);
            }
            telemetry_lines.push(bridge::to_line(m));
            wake();
            count([](ServiceStats& s) { ++s.telemetry_frames; });
        }

        if (writer && !sample_sched.tick(now_us).empty()) {
            rec::Frame f;
            f.t_us = now_us;
            f.op_hand = last_arm;
            const auto& ht = robot.head_target();
            f.op_head = geom::from_roll_pitch(ht.roll, ht.pitch);
            f.pinch = pinch.angle_closed_deg + last_aperture * (pinch.angle_open_deg - pinch.angle_closed_deg);
            f.joints = robot.joints().q;
            const auto ang = robot.head_angles();
            f.head = {ang[0], ang[1]};
            f.aperture = robot.aperture();
            f.camera = robot.camera();
            f.estop = robot.latched();
            writer->append(f);
        }

        robot.advance(now_us, 1e-3);
        count([](ServiceStats& s) { ++s.steps; });
    }
}

} // namespace viewvr::teleopd
