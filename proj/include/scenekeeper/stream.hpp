#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "scenekeeper/error.hpp"
#include "scenekeeper/frame.hpp"

namespace scenekeeper {

inline constexpr double kDefaultRate = 30.0;

/// Canonical number text: fixed 6 decimals with trailing zeros (and a bare
/// point) removed, "-0" folded to "0". Throws Error("invalid-frame") for
/// non-finite values.
std::string format_number(double value);

/// One newline-terminated line. Throws Error("invalid-frame") for invalid
/// boxes or non-finite numbers.
std::string encode_frame(const DetectionFrame& f);

/// Raised for any malformed line; field() names the offending key
/// ("bbox", "frame", ...) or "json" for a syntax error.
class DecodeError : public Error {
 public:
  DecodeError(std::string field, const std::string& message)
      : Error("decode-error", field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Stateless decode of a single line (trailing newline optional). Unknown
/// keys are ignored.
DetectionFrame decode_frame(std::string_view line);

/// Decoder for one stream: additionally rejects frame ids that do not
/// strictly increase (DecodeError with field "frame").
class FrameDecoder {
 public:
  DetectionFrame decode(std::string_view line);

 private:
  std::optional<std::int64_t> last_;
};

/// What a subscriber receives: the frame plus how many frames it missed
/// since the previous delivery.
struct Delivery {
  DetectionFrame frame;
  std::int64_t dropped = 0;
};

class FrameBus;

/// Single-slot mailbox. A slow reader skips to the newest frame.
class Subscription {
 public:
  /// Blocks until a frame or end of stream (nullopt).
  std::optional<Delivery> next();
  /// Like next() but gives up after `timeout`; `timedOut` tells the cases apart.
  std::optional<Delivery> next_for(std::chrono::milliseconds timeout, bool* timedOut = nullptr);
  bool ended() const;
  /// Frames overwritten before this subscriber read them.
  std::int64_t total_dropped() const;

 private:
  friend class FrameBus;
  void offer(const DetectionFrame& f);
  void finish();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::optional<DetectionFrame> slot_;
  std::int64_t pendingDropped_ = 0;
  std::int64_t totalDropped_ = 0;
  bool ended_ = false;
};

/// In-process pub-sub: one producer, any number of isolated consumers.
class FrameBus {
 public:
  std::shared_ptr<Subscription> subscribe();
  void unsubscribe(const std::shared_ptr<Subscription>& sub);
  /// Throws Error("non-monotone-frame") if ids do not strictly increase
  /// and Error("stream-closed") after close().
  void publish(const DetectionFrame& f);
  /// Signals end of stream to every current and future subscriber.
  void close();
  bool closed() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Subscription>> subs_;
  std::optional<std::int64_t> last_;
  bool closed_ = false;
};

using FrameSource = std::function<std::optional<DetectionFrame>()>;

/// Publishes frames from `source` at `rate` Hz (wall clock) until it runs
/// dry or `stop` is set, then closes the bus. Throws Error("invalid-rate")
/// when rate <= 0.
void pump(const FrameSource& source, double rate, FrameBus& bus,
          const std::atomic<bool>* stop = nullptr);

/// Appends canonical lines to a file.
class FrameRecorder {
 public:
  /// Throws Error("io") when the file cannot be created.
  explicit FrameRecorder(const std::filesystem::path& path);
  void write(const DetectionFrame& f);
  void close();
  std::int64_t count() const { return count_; }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::int64_t count_ = 0;
};

void record(const std::filesystem::path& path, const std::vector<DetectionFrame>& frames);

/// Sequential reader over a recording; errors carry the 1-based line
/// number: Error("replay", "line N: ...").
class ReplayReader {
 public:
  explicit ReplayReader(const std::filesystem::path& path);
  std::optional<DetectionFrame> next();
  std::int64_t line() const { return line_; }

 private:
  std::ifstream in_;
  FrameDecoder decoder_;
  std::int64_t line_ = 0;
};

std::vector<DetectionFrame> load_recording(const std::filesystem::path& path);

/// Re-emits a recording to `sink`, spacing frames by their original time
/// deltas divided by `speed`; speed 0 means no waiting at all. Stops early
/// when `stop` is set. Returns the number of frames delivered. Throws
/// Error("invalid-speed") for negative speed.
std::int64_t replay(const std::filesystem::path& path, double speed,
                    const std::function<void(const DetectionFrame&)>& sink,
                    const std::atomic<bool>* stop = nullptr);

/// Serves the bus over TCP: every accepted connection receives canonical
/// lines with latest-wins backpressure, and is closed at end of stream.
class TcpFrameServer {
 public:
  /// Binds host:port (port 0 picks a free one). Throws Error("bind").
  TcpFrameServer(FrameBus& bus, const std::string& host, int port);
  ~TcpFrameServer();
  TcpFrameServer(const TcpFrameServer&) = delete;
  TcpFrameServer& operator=(const TcpFrameServer&) = delete;

  int port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve(int fd, std::shared_ptr<Subscription> sub);

  FrameBus& bus_;
  int listenFd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> clientFds_;
};

/// Reads lines from a TcpFrameServer. next() returns nullopt on end of
/// stream or connection loss; malformed lines throw DecodeError.
class TcpFrameClient {
 public:
  /// Throws Error("connect").
  TcpFrameClient(const std::string& host, int port);
  ~TcpFrameClient();
  TcpFrameClient(const TcpFrameClient&) = delete;
  TcpFrameClient& operator=(const TcpFrameClient&) = delete;

  std::optional<DetectionFrame> next();

 private:
  int fd_ = -1;
  std::string buffer_;
  FrameDecoder decoder_;
};

}  // namespace scenekeeper
