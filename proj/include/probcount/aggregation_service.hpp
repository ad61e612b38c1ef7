// Copyright 2026 The probcount Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Trusted aggregator speaking a newline-terminated text protocol:
//
//   VOTE 1 | VOTE 0   -> ACK            (ERR released once released)
//   STATUS            -> COUNT <votes>
//   RELEASE           -> VALUE <level> ESTIMATE <estimate>
//   anything else     -> ERR malformed
//
// Votes from every connection go through one queue and one consumer, so the
// counter is only ever touched by a single thread.

#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <deque>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "probcount/counters.hpp"
#include "probcount/errors.hpp"
#include "probcount/fm_constant.hpp"
#include "probcount/random_source.hpp"
#include "probcount/survey_sim.hpp"

namespace probcount {

enum class ReleasePolicy { kOnCommand, kAfterResponses };

enum class ReleaseOutput { kLevelAndEstimate, kEstimateOnly };

struct ServiceConfig {
  std::string endpoint = "stdio";  // "stdio" or "host:port"
  Mechanism mechanism;
  std::uint64_t pre_count = 0;
  std::uint64_t seed = 0;
  ReleasePolicy release_policy = ReleasePolicy::kOnCommand;
  std::uint64_t release_after = 0;  // responses, for kAfterResponses
  ReleaseOutput output = ReleaseOutput::kLevelAndEstimate;

  void validate() const {
    mechanism.validate();
    if (release_policy == ReleasePolicy::kAfterResponses && release_after == 0) {
      throw DomainError("release after N responses needs N >= 1");
    }
  }
};

namespace detail {

inline std::string format_estimate(double v) {
  char buf[64];
  if (std::nearbyint(v) == v && std::fabs(v) < 9.0e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.15g", v);
  }
  return buf;
}

inline std::string join_levels(const std::vector<std::uint32_t>& levels) {
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(levels[i]);
  }
  return out;
}

}  // namespace detail

class Session {
 public:
  explicit Session(const ServiceConfig& config)
      : config_(config), source_(config.seed), state_(make_state(config)) {
    config_.validate();
    for (std::uint64_t i = 0; i < config_.pre_count; ++i) observe(true);
  }

  bool released() const { return released_; }
  std::uint64_t responses_seen() const { return responses_seen_; }

  // Reply to one protocol line; nothing for blank lines.
  std::optional<std::string> handle_line(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.remove_suffix(1);
    }
    if (line.empty()) return std::nullopt;
    if (line == "VOTE 1" || line == "VOTE 0") {
      if (released_) return "ERR released";
      observe(line.back() == '1');
      ++responses_seen_;
      if (config_.release_policy == ReleasePolicy::kAfterResponses &&
          responses_seen_ >= config_.release_after) {
        release();
      }
      return "ACK";
    }
    if (line == "STATUS") return "COUNT " + std::to_string(responses_seen_);
    if (line == "RELEASE") {
      if (released_) return "ERR released";
      release();
      return release_line_;
    }
    return "ERR malformed";
  }

  // The VALUE line, once released.
  const std::string& release_line() const { return release_line_; }

 private:
  struct Laplace {
    std::uint64_t count = 0;
  };
  using State = std::variant<MorrisCounter, MaxGeoCounter, PcsaCounter, HllCounter, Laplace>;

  static State make_state(const ServiceConfig& config) {
    switch (config.mechanism.kind) {
      case MechanismKind::kMorris:
        return MorrisCounter{};
      case MechanismKind::kMaxGeo:
        return MaxGeoCounter{};
      case MechanismKind::kPcsa:
        return PcsaCounter(config.mechanism.lots);
      case MechanismKind::kHyperLogLog:
        return HllCounter(config.mechanism.lots);
      case MechanismKind::kLaplace:
        return Laplace{};
    }
    throw DomainError("unknown mechanism");
  }

  void observe(bool datum) {
    std::visit(
        [&](auto& s) {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, Laplace>) {
            s.count += datum ? 1 : 0;
          } else {
            s.observe(datum, source_);
          }
        },
        state_);
  }

  void release() {
    released_ = true;
    const double n0 = static_cast<double>(config_.pre_count);
    const FMConstant& phi = flajolet_martin_constant();
    std::string level;
    double estimate = 0.0;
    if (auto* m = std::get_if<MorrisCounter>(&state_)) {
      level = std::to_string(m->level());
      estimate = std::ldexp(1.0, static_cast<int>(m->level())) - 2.0 - n0;
    } else if (auto* g = std::get_if<MaxGeoCounter>(&state_)) {
      level = std::to_string(g->level());
      estimate = static_cast<double>(maxgeo_estimate(*g, phi)) - n0;
    } else if (auto* h = std::get_if<HllCounter>(&state_)) {
      level = detail::join_levels(h->levels());
      estimate = hll_estimate(*h) - n0;
    } else if (auto* p = std::get_if<PcsaCounter>(&state_)) {
      level = detail::join_levels(p->levels());
      estimate = static_cast<double>(pcsa_estimate(*p, phi)) - n0;
    } else {
      const auto& lap = std::get<Laplace>(state_);
      const double noisy = static_cast<double>(lap.count) +
                           laplace_sample(source_, config_.mechanism.laplace_scale);
      level = detail::format_estimate(noisy);
      estimate = noisy - n0;
    }
    if (config_.output == ReleaseOutput::kEstimateOnly) {
      release_line_ = "ESTIMATE " + detail::format_estimate(estimate);
    } else {
      release_line_ = "VALUE " + level + " ESTIMATE " + detail::format_estimate(estimate);
    }
  }

  ServiceConfig config_;
  RandomSource source_;
  State state_;
  std::uint64_t responses_seen_ = 0;
  bool released_ = false;
  std::string release_line_;
};

// Runs one session over a line stream (one client). Returns 0 once the
// session has been released, 1 if input ended first.
inline int serve_stream(const ServiceConfig& config, std::istream& in, std::ostream& out) {
  Session session(config);
  std::string line;
  while (!session.released() && std::getline(in, line)) {
    const bool was_released = session.released();
    if (auto reply = session.handle_line(line)) out << *reply << '\n';
    if (!was_released && session.released() && line.rfind("RELEASE", 0) != 0) {
      out << session.release_line() << '\n';
    }
    out.flush();
  }
  return session.released() ? 0 : 1;
}

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

inline Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon + 1 >= text.size()) {
    throw DomainError("endpoint must be host:port or stdio, got '" + std::string(text) + "'");
  }
  Endpoint e;
  e.host = std::string(text.substr(0, colon));
  if (e.host.empty()) e.host = "127.0.0.1";
  unsigned long port = 0;
  for (char c : text.substr(colon + 1)) {
    if (c < '0' || c > '9') throw DomainError("bad port in endpoint");
    port = port * 10 + static_cast<unsigned long>(c - '0');
    if (port > 65535) throw DomainError("port out of range");
  }
  e.port = static_cast<std::uint16_t>(port);
  return e;
}

// TCP front end: one reader thread per connection feeding a single consumer.
class TcpAggregator {
 public:
  explicit TcpAggregator(ServiceConfig config) : config_(std::move(config)) {
    config_.validate();
  }
  TcpAggregator(const TcpAggregator&) = delete;
  TcpAggregator& operator=(const TcpAggregator&) = delete;
  ~TcpAggregator() {
    stop();
    if (listen_fd_ >= 0) ::close(listen_fd_);
  }

  // Binds and listens; returns the bound port (useful with port 0).
  std::uint16_t bind() {
    const Endpoint ep = parse_endpoint(config_.endpoint);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(ep.port);
    if (::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
      throw ResourceError("cannot resolve " + ep.host);
    }
    listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (listen_fd_ < 0) {
      ::freeaddrinfo(res);
      throw ResourceError(std::string("socket: ") + std::strerror(errno));
    }
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 64) != 0) {
      const std::string why = std::strerror(errno);
      ::freeaddrinfo(res);
      throw ResourceError("cannot bind " + config_.endpoint + ": " + why);
    }
    ::freeaddrinfo(res);
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    return ntohs(bound.sin_port);
  }

  // Serves until the session is released. Returns 0.
  int run() {
    if (listen_fd_ < 0) bind();
    Session session(config_);
    std::thread acceptor([this] { accept_loop(); });
    while (!session.released()) {
      Item item;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !queue_.empty(); });
        item = std::move(queue_.front());
        queue_.pop_front();
      }
      const bool was_released = session.released();
      if (auto reply = session.handle_line(item.line)) send_line(*item.conn, *reply);
      if (!was_released && session.released() && item.line.rfind("RELEASE", 0) != 0) {
        send_line(*item.conn, session.release_line());
      }
    }
    stop();
    acceptor.join();
    std::vector<std::thread> readers;
    {
      std::lock_guard lock(mu_);
      readers.swap(readers_);
    }
    for (auto& t : readers) t.join();
    return 0;
  }

 private:
  struct Connection {
    int fd = -1;
    std::mutex write_mu;
    ~Connection() {
      if (fd >= 0) ::close(fd);
    }
  };
  struct Item {
    std::shared_ptr<Connection> conn;
    std::string line;
  };

  static void send_line(Connection& conn, const std::string& text) {
    std::lock_guard lock(conn.write_mu);
    const std::string wire = text + "\n";
    std::size_t sent = 0;
    while (sent < wire.size()) {
      const ssize_t n = ::send(conn.fd, wire.data() + sent, wire.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) return;
      sent += static_cast<std::size_t>(n);
    }
  }

  void stop() {
    stopping_.store(true);
    std::lock_guard lock(mu_);
    for (auto& weak : connections_) {
      if (auto c = weak.lock()) ::shutdown(c->fd, SHUT_RDWR);
    }
  }

  void accept_loop() {
    while (!stopping_.load()) {
      pollfd p{listen_fd_, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      auto conn = std::make_shared<Connection>();
      conn->fd = fd;
      std::lock_guard lock(mu_);
      if (stopping_.load()) {
        ::shutdown(fd, SHUT_RDWR);
      }
      connections_.push_back(conn);
      readers_.emplace_back([this, conn] { read_loop(conn); });
    }
  }

  void read_loop(const std::shared_ptr<Connection>& conn) {
    std::string pending;
    char buf[4096];
    for (;;) {
      const ssize_t n = ::recv(conn->fd, buf, sizeof buf, 0);
      if (n <= 0) return;
      pending.append(buf, static_cast<std::size_t>(n));
      std::size_t start = 0;
      for (std::size_t nl; (nl = pending.find('\n', start)) != std::string::npos; start = nl + 1) {
        std::lock_guard lock(mu_);
        queue_.push_back(Item{conn, pending.substr(start, nl - start)});
        cv_.notify_one();
      }
      pending.erase(0, start);
    }
  }

  ServiceConfig config_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Item> queue_;
  std::vector<std::weak_ptr<Connection>> connections_;
  std::vector<std::thread> readers_;
};

// Runs one session on the configured endpoint. `in`/`out` are used in stdio
// mode; `on_bound` receives the TCP port once listening.
inline int serve(const ServiceConfig& config, std::istream& in, std::ostream& out,
                 const std::function<void(std::uint16_t)>& on_bound = {}) {
  config.validate();
  if (config.endpoint == "stdio") return serve_stream(config, in, out);
  TcpAggregator server(config);
  const std::uint16_t port = server.bind();
  if (on_bound) on_bound(port);
  return server.run();
}

}  // namespace probcount
