#pragma once

// Line-delimited JSON over TCP exposing a landing environment to a remote
// agent. One environment per connection.
//
//   server -> {"type":"hello","version":"1"}
//   server -> {"type":"spec","state_dim":6,"action_dim":2,"action_low":[..],"action_high":[..]}
//   client -> {"type":"reset","seed":N}            server -> {"type":"obs","obs":[6]}
//   client -> {"type":"step","action":[ax,ay]}     server -> {"type":"transition","obs":[6],
//                                                     "reward":r,"done":b,"termination":..,"zone":..}
//   client -> {"type":"close"}
//   server -> {"type":"error","message":".."} on protocol violations

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include "json.hpp"
#include "uavland/env.hpp"
#include "uavland/types.hpp"

namespace uavland::bridge {

inline constexpr const char* kProtocolVersion = "1";
inline constexpr std::uint16_t kDefaultPort = 7460;
inline constexpr std::size_t kMaxLineBytes = 1 << 16;

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConnectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- message encoding ------------------------------------------------------

inline nlohmann::json obs_array(const VehicleState& s) {
  const Observation o = observe(s);
  return nlohmann::json(std::vector<double>(o.begin(), o.end()));
}

inline VehicleState state_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != kStateDim) throw ProtocolError("obs must be an array of 6 numbers");
  Observation o{};
  for (std::size_t i = 0; i < kStateDim; ++i) {
    if (!j[i].is_number()) throw ProtocolError("obs must be an array of 6 numbers");
    o[i] = j[i].get<double>();
  }
  return state_from_observation(o);
}

inline nlohmann::json hello_message() { return {{"type", "hello"}, {"version", kProtocolVersion}}; }

inline nlohmann::json spec_message(const ScenarioConfig& cfg) {
  return {{"type", "spec"},
          {"state_dim", kStateDim},
          {"action_dim", kActionDim},
          {"action_low", {-cfg.a_max, -cfg.a_max}},
          {"action_high", {cfg.a_max, cfg.a_max}}};
}

inline nlohmann::json reset_message(std::uint64_t seed) { return {{"type", "reset"}, {"seed", seed}}; }

inline nlohmann::json step_message(const ActionCmd& a) {
  return {{"type", "step"}, {"action", {a.a_x, a.a_y}}};
}

inline nlohmann::json obs_message(const VehicleState& s) { return {{"type", "obs"}, {"obs", obs_array(s)}}; }

inline nlohmann::json transition_message(const StepOutcome& out) {
  return {{"type", "transition"},
          {"obs", obs_array(out.next_state)},
          {"reward", out.reward},
          {"done", out.done},
          {"termination", std::string(to_string(out.termination))},
          {"zone", std::string(to_string(out.zone))}};
}

inline nlohmann::json error_message(const std::string& text) {
  return {{"type", "error"}, {"message", text}};
}

inline StepOutcome outcome_from_json(const nlohmann::json& j) {
  try {
    StepOutcome out;
    out.next_state = state_from_json(j.at("obs"));
    out.reward = j.at("reward").get<double>();
    out.done = j.at("done").get<bool>();
    out.termination = termination_from_string(j.at("termination").get<std::string>());
    out.zone = zone_from_string(j.at("zone").get<std::string>());
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("bad transition message: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("bad transition message: ") + e.what());
  }
}

// ---- socket plumbing ---------------------------------------------------------

// Owns a connected socket and buffers incoming bytes into lines.
class LineSocket {
 public:
  LineSocket() = default;
  explicit LineSocket(int fd) : fd_(fd) {}
  LineSocket(const LineSocket&) = delete;
  LineSocket& operator=(const LineSocket&) = delete;
  LineSocket(LineSocket&& o) noexcept : fd_(std::exchange(o.fd_, -1)), buffer_(std::move(o.buffer_)) {}
  LineSocket& operator=(LineSocket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
      buffer_ = std::move(o.buffer_);
    }
    return *this;
  }
  ~LineSocket() { close(); }

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

  void send_line(const std::string& line) {
    std::string data = line;
    data.push_back('\n');
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ConnectionError(std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  void send_json(const nlohmann::json& j) { send_line(j.dump()); }

  // Empty optional on orderly peer shutdown.
  std::optional<std::string> read_line() {
    for (;;) {
      const auto pos = buffer_.find('\n');
      if (pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      if (buffer_.size() > kMaxLineBytes) throw ProtocolError("line too long");
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n == 0) return std::nullopt;
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ConnectionError(std::string("recv failed: ") + std::strerror(errno));
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_ = -1;
  std::string buffer_;
};

inline std::pair<std::string, std::uint16_t> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) return {address, kDefaultPort};
  const std::string port = address.substr(colon + 1);
  int value = 0;
  try {
    value = std::stoi(port);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in address '" + address + "'");
  }
  if (value <= 0 || value > 65535) throw std::invalid_argument("bad port in address '" + address + "'");
  return {address.substr(0, colon), static_cast<std::uint16_t>(value)};
}

inline LineSocket connect_to(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port_text = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &res); rc != 0) {
    throw ConnectionError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no addresses";
  for (addrinfo* p = res; p; p = p->ai_next) {
    int fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) {
      last_error = std::strerror(errno);
      continue;
    }
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return LineSocket(fd);
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw ConnectionError("cannot connect to " + host + ":" + port_text + ": " + last_error);
}

// ---- server ------------------------------------------------------------------

using EnvFactory = std::function<std::unique_ptr<LandingEnv>()>;

// Drives one connection to completion. Returns when the client closes, sends
// "close", or violates the protocol (after an error reply).
inline void serve_connection(LineSocket& sock, const EnvFactory& make_env) {
  auto env = make_env();
  bool episode_started = false;
  try {
    sock.send_json(hello_message());
    sock.send_json(spec_message(env->scenario()));
    while (auto line = sock.read_line()) {
      nlohmann::json msg;
      try {
        msg = nlohmann::json::parse(*line);
      } catch (const nlohmann::json::exception&) {
        sock.send_json(error_message("malformed message: not JSON"));
        return;
      }
      if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
        sock.send_json(error_message("malformed message: missing type"));
        return;
      }
      const std::string type = msg["type"].get<std::string>();
      if (type == "close") return;
      if (type == "reset") {
        if (!msg.contains("seed") || !msg["seed"].is_number_unsigned()) {
          sock.send_json(error_message("reset requires an unsigned integer seed"));
          return;
        }
        const VehicleState s = env->reset(msg["seed"].get<std::uint64_t>());
        episode_started = true;
        sock.send_json(obs_message(s));
      } else if (type == "step") {
        const auto& a = msg.contains("action") ? msg["action"] : nlohmann::json();
        if (!a.is_array() || a.size() != kActionDim || !a[0].is_number() || !a[1].is_number()) {
          sock.send_json(error_message("step requires an action array of 2 numbers"));
          return;
        }
        if (!episode_started || !env->active()) {
          sock.send_json(error_message("step before reset: no active episode"));
          continue;
        }
        sock.send_json(transition_message(env->step({a[0].get<double>(), a[1].get<double>()})));
      } else {
        sock.send_json(error_message("unknown message type '" + type + "'"));
        return;
      }
    }
  } catch (const ConnectionError&) {
    // peer went away
  } catch (const std::exception& e) {
    try {
      sock.send_json(error_message(e.what()));
    } catch (...) {
    }
  }
}

// Accept loop on a bound listening socket; one thread per connection.
class Server {
 public:
  Server(std::uint16_t port, EnvFactory make_env, const std::string& bind_host = "127.0.0.1")
      : make_env_(std::move(make_env)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ConnectionError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
      ::close(listen_fd_);
      throw std::invalid_argument("bad bind address '" + bind_host + "'");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 16) != 0) {
      const std::string err = std::strerror(errno);
      ::close(listen_fd_);
      throw ConnectionError("cannot listen on port " + std::to_string(port) + ": " + err);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  ~Server() { stop(); }

  std::uint16_t port() const { return port_; }

  // Blocks until stop() is called from another thread.
  void run() {
    while (!stopping_) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        break;
      }
      if (stopping_) {
        ::close(fd);
        break;
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      std::lock_guard lock(mutex_);
      open_fds_.push_back(fd);
      workers_.emplace_back([this, fd] {
        LineSocket sock(fd);
        serve_connection(sock, make_env_);
        std::lock_guard inner(mutex_);
        open_fds_.remove(fd);
      });
    }
  }

  void start_background() {
    acceptor_ = std::thread([this] { run(); });
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    {
      std::lock_guard lock(mutex_);
      for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : workers_) {
      if (t.joinable()) t.join();
    }
    ::close(listen_fd_);
  }

 private:
  EnvFactory make_env_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mutex_;
  std::list<std::thread> workers_;
  std::list<int> open_fds_;
};

// ---- client ------------------------------------------------------------------

// Environment handle backed by a remote server. Satisfies the same
// reset/step contract as LandingEnv.
class RemoteEnv final : public Environment {
 public:
  explicit RemoteEnv(const std::string& address, ScenarioConfig local_cfg = {})
      : cfg_(local_cfg) {
    auto [host, port] = split_address(address);
    sock_ = connect_to(host, port);
    const nlohmann::json hello = expect("hello");
    const std::string version = hello.value("version", "");
    if (version != kProtocolVersion) {
      sock_.close();
      throw ProtocolError("protocol version mismatch: server speaks '" + version +
                          "', client supports '" + kProtocolVersion + "'");
    }
    const nlohmann::json spec = expect("spec");
    if (spec.value("state_dim", 0) != static_cast<int>(kStateDim) ||
        spec.value("action_dim", 0) != static_cast<int>(kActionDim)) {
      sock_.close();
      throw ProtocolError("server environment has incompatible dimensions");
    }
    if (spec.contains("action_high") && spec["action_high"].is_array() && !spec["action_high"].empty()) {
      cfg_.a_max = spec["action_high"][0].get<double>();
    }
  }

  ~RemoteEnv() override {
    if (sock_.valid()) {
      try {
        sock_.send_json({{"type", "close"}});
      } catch (...) {
      }
    }
  }

  VehicleState reset(std::uint64_t seed) override {
    sock_.send_json(reset_message(seed));
    const nlohmann::json reply = expect("obs");
    state_ = state_from_json(reply.at("obs"));
    return state_;
  }

  StepOutcome step(const ActionCmd& action) override {
    sock_.send_json(step_message(action));
    const StepOutcome out = outcome_from_json(expect("transition"));
    state_ = out.next_state;
    return out;
  }

  VehicleState state() const override { return state_; }
  const ScenarioConfig& scenario() const override { return cfg_; }

 private:
  nlohmann::json expect(const std::string& type) {
    auto line = sock_.read_line();
    if (!line) throw ConnectionError("server closed the connection");
    nlohmann::json msg;
    try {
      msg = nlohmann::json::parse(*line);
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("server sent malformed JSON");
    }
    const std::string got = msg.value("type", "");
    if (got == "error") throw ProtocolError("server error: " + msg.value("message", ""));
    if (got != type) throw ProtocolError("expected '" + type + "' message, got '" + got + "'");
    return msg;
  }

  ScenarioConfig cfg_;
  LineSocket sock_;
  VehicleState state_{};
};

}  // namespace uavland::bridge
