#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "scenekeeper/stream.hpp"

namespace scenekeeper {

void Subscription::offer(const DetectionFrame& f) {
  {
    std::lock_guard lock(mu_);
    if (ended_) return;
    if (slot_) {
      ++pendingDropped_;
      ++totalDropped_;
    }
    slot_ = f;
  }
  cv_.notify_all();
}

void Subscription::finish() {
  {
    std::lock_guard lock(mu_);
    ended_ = true;
  }
  cv_.notify_all();
}

std::optional<Delivery> Subscription::next() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return slot_.has_value() || ended_; });
  if (!slot_) return std::nullopt;
  Delivery d{std::move(*slot_), pendingDropped_};
  slot_.reset();
  pendingDropped_ = 0;
  return d;
}

std::optional<Delivery> Subscription::next_for(std::chrono::milliseconds timeout, bool* timedOut) {
  std::unique_lock lock(mu_);
  const bool ready = cv_.wait_for(lock, timeout, [&] { return slot_.has_value() || ended_; });
  if (timedOut) *timedOut = !ready;
  if (!slot_) return std::nullopt;
  Delivery d{std::move(*slot_), pendingDropped_};
  slot_.reset();
  pendingDropped_ = 0;
  return d;
}

bool Subscription::ended() const {
  std::lock_guard lock(mu_);
  return ended_ && !slot_;
}

std::int64_t Subscription::total_dropped() const {
  std::lock_guard lock(mu_);
  return totalDropped_;
}

std::shared_ptr<Subscription> FrameBus::subscribe() {
  auto sub = std::make_shared<Subscription>();
  std::lock_guard lock(mu_);
  if (closed_) {
    sub->finish();
  } else {
    subs_.push_back(sub);
  }
  return sub;
}

void FrameBus::unsubscribe(const std::shared_ptr<Subscription>& sub) {
  std::lock_guard lock(mu_);
  subs_.erase(std::remove(subs_.begin(), subs_.end(), sub), subs_.end());
}

void FrameBus::publish(const DetectionFrame& f) {
  std::lock_guard lock(mu_);
  if (closed_) throw Error("stream-closed");
  if (last_ && f.frame <= *last_) {
    throw Error("non-monotone-frame", std::to_string(f.frame) + " after " + std::to_string(*last_));
  }
  last_ = f.frame;
  for (const auto& s : subs_) s->offer(f);
}

void FrameBus::close() {
  std::lock_guard lock(mu_);
  if (closed_) return;
  closed_ = true;
  for (const auto& s : subs_) s->finish();
  subs_.clear();
}

bool FrameBus::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

void pump(const FrameSource& source, double rate, FrameBus& bus, const std::atomic<bool>* stop) {
  if (!(rate > 0.0)) throw Error("invalid-rate", std::to_string(rate));
  using Clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration<double>(1.0 / rate);
  const auto start = Clock::now();
  std::int64_t i = 0;
  while (!stop || !stop->load()) {
    std::optional<DetectionFrame> f = source();
    if (!f) break;
    // Absolute schedule so per-frame overhead does not accumulate.
    std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(period * i));
    bus.publish(*f);
    ++i;
  }
  bus.close();
}

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

TcpFrameServer::TcpFrameServer(FrameBus& bus, const std::string& host, int port) : bus_(bus) {
  listenFd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listenFd_ < 0) throw Error("bind", std::strerror(errno));
  int yes = 1;
  ::setsockopt(listenFd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listenFd_);
    throw Error("bind", "bad address " + host);
  }
  if (::bind(listenFd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listenFd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listenFd_);
    throw Error("bind", host + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listenFd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

TcpFrameServer::~TcpFrameServer() { stop(); }

void TcpFrameServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listenFd_, SHUT_RDWR);
  ::close(listenFd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : clientFds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.join();
}

void TcpFrameServer::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept(listenFd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    auto sub = bus_.subscribe();
    std::lock_guard lock(mu_);
    clientFds_.push_back(fd);
    workers_.emplace_back([this, fd, sub] { serve(fd, sub); });
  }
}

void TcpFrameServer::serve(int fd, std::shared_ptr<Subscription> sub) {
  while (!stopping_) {
    bool timedOut = false;
    auto d = sub->next_for(std::chrono::milliseconds(100), &timedOut);
    if (timedOut) continue;
    if (!d) break;
    if (!send_all(fd, encode_frame(d->frame))) break;
  }
  bus_.unsubscribe(sub);
  std::lock_guard lock(mu_);
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
  clientFds_.erase(std::remove(clientFds_.begin(), clientFds_.end(), fd), clientFds_.end());
}

TcpFrameClient::TcpFrameClient(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw Error("connect", "cannot resolve " + host);
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const bool ok = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
  const std::string why = std::strerror(errno);
  ::freeaddrinfo(res);
  if (!ok) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    throw Error("connect", host + ":" + service + ": " + why);
  }
}

TcpFrameClient::~TcpFrameClient() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<DetectionFrame> TcpFrameClient::next() {
  for (;;) {
    const std::size_t nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      const std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return decoder_.decode(line);
    }
    if (fd_ < 0) return std::nullopt;
    char chunk[65536];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      // A partial trailing line means the connection was cut mid-frame.
      ::close(fd_);
      fd_ = -1;
      buffer_.clear();
      return std::nullopt;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace scenekeeper
