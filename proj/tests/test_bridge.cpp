#include <gtest/gtest.h>

#include <future>
#include <random>

#include "uavland/bridge.hpp"

using namespace uavland;
using namespace uavland::bridge;

namespace {

std::unique_ptr<LandingEnv> default_env() { return std::make_unique<LandingEnv>(); }

struct Loopback {
  Server server{0, default_env};
  Loopback() { server.start_background(); }
  std::string address() const { return "127.0.0.1:" + std::to_string(server.port()); }
  LineSocket raw() {
    LineSocket s = connect_to("127.0.0.1", server.port());
    EXPECT_EQ(nlohmann::json::parse(*s.read_line())["type"], "hello");
    EXPECT_EQ(nlohmann::json::parse(*s.read_line())["type"], "spec");
    return s;
  }
};

// Listening socket that accepts one client and replays a fixed script.
class FakeServer {
 public:
  explicit FakeServer(std::vector<std::string> script) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    ::listen(fd_, 1);
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this, script = std::move(script)] {
      LineSocket client(::accept(fd_, nullptr, nullptr));
      for (const auto& line : script) client.send_line(line);
      while (client.read_line()) {
      }
    });
  }
  ~FakeServer() {
    thread_.join();
    ::close(fd_);
  }
  std::string address() const { return "127.0.0.1:" + std::to_string(port_); }

 private:
  int fd_;
  std::uint16_t port_;
  std::thread thread_;
};

std::uint16_t unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace

TEST(Address, Split) {
  EXPECT_EQ(split_address("host:81"), std::make_pair(std::string("host"), std::uint16_t{81}));
  EXPECT_EQ(split_address("host").second, kDefaultPort);
  EXPECT_THROW(split_address("host:0"), std::invalid_argument);
  EXPECT_THROW(split_address("host:99999"), std::invalid_argument);
  EXPECT_THROW(split_address("host:x"), std::invalid_argument);
}

TEST(Messages, TransitionRoundTrip) {
  StepOutcome out;
  out.next_state = {0.1, -1.0 / 3.0, 2.5, 1e-17, -0.2, -1.5};
  out.reward = -12.345678901234567;
  out.done = true;
  out.termination = Termination::Landed;
  out.zone = Zone::Red;
  const auto parsed =
      outcome_from_json(nlohmann::json::parse(transition_message(out).dump()));
  EXPECT_EQ(parsed, out);
}

TEST(Bridge, ResetMatchesInProcess) {
  Loopback lb;
  RemoteEnv remote(lb.address());
  LandingEnv local;
  EXPECT_EQ(remote.reset(7), local.reset(std::uint64_t{7}));
  EXPECT_EQ(remote.state(), local.state());
}

TEST(Bridge, StepMatchesInProcessFieldForField) {
  Loopback lb;
  RemoteEnv remote(lb.address());
  LandingEnv local;
  remote.reset(11);
  local.reset(std::uint64_t{11});
  const StepOutcome a = remote.step({0.4, -0.3});
  const StepOutcome b = local.step({0.4, -0.3});
  EXPECT_EQ(a.next_state, b.next_state);
  EXPECT_EQ(a.reward, b.reward);
  EXPECT_EQ(a.done, b.done);
  EXPECT_EQ(a.termination, b.termination);
  EXPECT_EQ(a.zone, b.zone);
}

TEST(Bridge, FullEpisodesBitwiseEqual) {
  Loopback lb;
  RemoteEnv remote(lb.address());
  LandingEnv local;
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ASSERT_EQ(remote.reset(seed), local.reset(seed));
    for (;;) {
      const ActionCmd a{u(rng), u(rng)};
      const StepOutcome r = remote.step(a), l = local.step(a);
      ASSERT_EQ(r, l);
      if (l.done) break;
    }
  }
}

TEST(Bridge, MalformedInputGetsErrorThenClose) {
  Loopback lb;
  LineSocket s = lb.raw();
  s.send_line("{not json");
  const auto reply = nlohmann::json::parse(*s.read_line());
  EXPECT_EQ(reply["type"], "error");
  EXPECT_FALSE(s.read_line().has_value());
}

TEST(Bridge, UnknownTypeGetsErrorThenClose) {
  Loopback lb;
  LineSocket s = lb.raw();
  s.send_json({{"type", "teleport"}});
  EXPECT_EQ(nlohmann::json::parse(*s.read_line())["type"], "error");
  EXPECT_FALSE(s.read_line().has_value());
}

TEST(Bridge, StepBeforeResetIsAnErrorButSessionContinues) {
  Loopback lb;
  LineSocket s = lb.raw();
  s.send_json(step_message({0.0, 0.0}));
  EXPECT_EQ(nlohmann::json::parse(*s.read_line())["type"], "error");
  s.send_json(reset_message(3));
  EXPECT_EQ(nlohmann::json::parse(*s.read_line())["type"], "obs");
}

TEST(Bridge, RemoteStepBeforeResetThrows) {
  Loopback lb;
  RemoteEnv remote(lb.address());
  EXPECT_THROW(remote.step({0.0, 0.0}), ProtocolError);
}

TEST(Bridge, VersionMismatchIsAHandshakeError) {
  FakeServer fake({R"({"type":"hello","version":"2"})",
                   R"({"type":"spec","state_dim":6,"action_dim":2})"});
  try {
    RemoteEnv remote(fake.address());
    FAIL() << "handshake should have failed";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Bridge, DimensionMismatchIsAHandshakeError) {
  FakeServer fake({R"({"type":"hello","version":"1"})",
                   R"({"type":"spec","state_dim":4,"action_dim":2})"});
  EXPECT_THROW(RemoteEnv remote(fake.address()), ProtocolError);
}

TEST(Bridge, ServerDownIsAConnectionError) {
  EXPECT_THROW(RemoteEnv("127.0.0.1:" + std::to_string(unused_port())), ConnectionError);
}

TEST(Bridge, ConcurrentConnectionsAreIndependent) {
  Loopback lb;
  auto run = [&](std::uint64_t seed) {
    RemoteEnv remote(lb.address());
    LandingEnv local;
    bool same = remote.reset(seed) == local.reset(seed);
    for (int k = 0; k < 40 && same; ++k) {
      const ActionCmd a{0.1 * static_cast<double>(seed % 7), -0.2};
      const StepOutcome r = remote.step(a), l = local.step(a);
      same = r == l;
      if (l.done) break;
    }
    return same;
  };
  std::vector<std::future<bool>> jobs;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) jobs.push_back(std::async(std::launch::async, run, seed));
  for (auto& j : jobs) EXPECT_TRUE(j.get());
}

TEST(Bridge, StopWithOpenClientReturns) {
  auto lb = std::make_unique<Loopback>();
  RemoteEnv remote(lb->address());
  remote.reset(1);
  lb.reset();  // must not hang on the still-connected client
  EXPECT_THROW(remote.step({0.0, 0.0}), std::runtime_error);
}
