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

#include "probcount/aggregation_service.hpp"

#include <arpa/inet.h>
#include <gtest/gtest.h>
#include <sys/socket.h>
#include <unistd.h>

#include <future>
#include <sstream>
#include <string>
#include <thread>

namespace probcount {
namespace {

TEST(Session, FreshReleaseIsLevelOne) {
  Session s(ServiceConfig{});
  EXPECT_EQ(s.handle_line("RELEASE"), "VALUE 1 ESTIMATE 0");
  EXPECT_TRUE(s.released());
}

TEST(Session, MalformedLines) {
  Session s(ServiceConfig{});
  for (const char* bad : {"VOTE x", "vote 1", "VOTE 1 extra", "VOTE", "HELLO"}) {
    EXPECT_EQ(s.handle_line(bad), "ERR malformed") << bad;
  }
  EXPECT_EQ(s.handle_line(""), std::nullopt);
  EXPECT_EQ(s.handle_line("VOTE 1\r\n"), "ACK");
}

TEST(Session, StatusCountsResponsesOnly) {
  Session s(ServiceConfig{});
  for (int i = 0; i < 50; ++i) s.handle_line(i % 2 ? "VOTE 1" : "VOTE 0");
  EXPECT_EQ(s.handle_line("STATUS"), "COUNT 50");
}

TEST(Session, NoVotesAfterRelease) {
  Session s(ServiceConfig{});
  s.handle_line("VOTE 1");
  const std::string released = *s.handle_line("RELEASE");
  EXPECT_EQ(s.handle_line("VOTE 1"), "ERR released");
  EXPECT_EQ(s.handle_line("RELEASE"), "ERR released");
  EXPECT_EQ(s.handle_line("STATUS"), "COUNT 1");
  EXPECT_EQ(s.release_line(), released);
}

TEST(Session, PreCountShiftsEstimate) {
  ServiceConfig c;
  c.pre_count = 100;
  c.seed = 9;
  Session s(c);
  const std::string line = *s.handle_line("RELEASE");
  unsigned level = 0;
  long long estimate = 0;
  ASSERT_EQ(std::sscanf(line.c_str(), "VALUE %u ESTIMATE %lld", &level, &estimate), 2);
  EXPECT_EQ(estimate, (1LL << level) - 2 - 100);
}

TEST(Session, AfterNPolicyReleasesAutomatically) {
  ServiceConfig c;
  c.release_policy = ReleasePolicy::kAfterResponses;
  c.release_after = 3;
  std::istringstream in("VOTE 1\nVOTE 0\nVOTE 1\nVOTE 1\n");
  std::ostringstream out;
  EXPECT_EQ(serve_stream(c, in, out), 0);
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("ACK\nACK\nACK\nVALUE ", 0), 0U) << text;
  EXPECT_EQ(text.find("ERR"), std::string::npos);
}

TEST(Session, EstimateOnlyOutput) {
  ServiceConfig c;
  c.output = ReleaseOutput::kEstimateOnly;
  Session s(c);
  EXPECT_EQ(s.handle_line("RELEASE"), "ESTIMATE 0");
}

TEST(Session, RegisterArraysReportEveryLevel) {
  ServiceConfig c;
  c.mechanism = Mechanism::hyperloglog(16);
  Session s(c);
  const std::string line = *s.handle_line("RELEASE");
  EXPECT_EQ(line.rfind("VALUE 1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1 ESTIMATE ", 0), 0U) << line;
}

TEST(ServeStream, EndOfInputWithoutRelease) {
  std::istringstream in("VOTE 1\n");
  std::ostringstream out;
  EXPECT_EQ(serve_stream(ServiceConfig{}, in, out), 1);
  EXPECT_EQ(out.str(), "ACK\n");
}

TEST(Endpoint, Parsing) {
  const Endpoint e = parse_endpoint("127.0.0.1:8080");
  EXPECT_EQ(e.host, "127.0.0.1");
  EXPECT_EQ(e.port, 8080);
  EXPECT_EQ(parse_endpoint(":0").host, "127.0.0.1");
  EXPECT_THROW(parse_endpoint("localhost"), DomainError);
  EXPECT_THROW(parse_endpoint("h:99999"), DomainError);
}

class Client {
 public:
  explicit Client(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      throw std::runtime_error("connect failed");
    }
  }
  ~Client() { ::close(fd_); }

  void send(const std::string& text) { ::send(fd_, text.data(), text.size(), MSG_NOSIGNAL); }

  std::string read_line() {
    std::string line;
    char c = 0;
    while (::recv(fd_, &c, 1, 0) == 1) {
      if (c == '\n') return line;
      line += c;
    }
    return line;
  }

 private:
  int fd_ = -1;
};

TEST(TcpAggregator, VotesFromTwoClientsShareOneCounter) {
  ServiceConfig c;
  c.endpoint = "127.0.0.1:0";
  TcpAggregator server(c);
  const std::uint16_t port = server.bind();
  auto done = std::async(std::launch::async, [&] { return server.run(); });
  Client a(port), b(port);
  for (int i = 0; i < 5; ++i) {
    a.send("VOTE 1\n");
    EXPECT_EQ(a.read_line(), "ACK");
    b.send("VOTE 1\n");
    EXPECT_EQ(b.read_line(), "ACK");
  }
  b.send("STATUS\n");
  EXPECT_EQ(b.read_line(), "COUNT 10");
  a.send("RELEASE\n");
  EXPECT_EQ(a.read_line().rfind("VALUE ", 0), 0U);
  EXPECT_EQ(done.get(), 0);
}

TEST(TcpAggregator, BindFailureIsReported) {
  ServiceConfig c;
  c.endpoint = "127.0.0.1:0";
  TcpAggregator first(c);
  const std::uint16_t port = first.bind();
  c.endpoint = "127.0.0.1:" + std::to_string(port);
  TcpAggregator second(c);
  EXPECT_THROW(second.bind(), ResourceError);
}

}  // namespace
}  // namespace probcount
