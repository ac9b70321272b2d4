#include <chrono>
#include <cmath>
#include <thread>

#include "scenekeeper/stream.hpp"

namespace scenekeeper {

FrameRecorder::FrameRecorder(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw Error("io", "cannot write " + path.string());
}

void FrameRecorder::write(const DetectionFrame& f) {
  out_ << encode_frame(f);
  if (!out_) throw Error("io", "write failed: " + path_.string());
  ++count_;
}

void FrameRecorder::close() {
  out_.flush();
  out_.close();
}

void record(const std::filesystem::path& path, const std::vector<DetectionFrame>& frames) {
  FrameRecorder rec(path);
  for (const DetectionFrame& f : frames) rec.write(f);
  rec.close();
}

ReplayReader::ReplayReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw Error("io", "cannot read " + path.string());
}

std::optional<DetectionFrame> ReplayReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (text.empty()) continue;
    try {
      return decoder_.decode(text);
    } catch (const DecodeError& e) {
      throw Error("replay", "line " + std::to_string(line_) + ": " + e.detail());
    }
  }
  return std::nullopt;
}

std::vector<DetectionFrame> load_recording(const std::filesystem::path& path) {
  ReplayReader reader(path);
  std::vector<DetectionFrame> frames;
  while (auto f = reader.next()) frames.push_back(std::move(*f));
  return frames;
}

std::int64_t replay(const std::filesystem::path& path, double speed,
                    const std::function<void(const DetectionFrame&)>& sink,
                    const std::atomic<bool>* stop) {
  if (!(speed >= 0.0) || !std::isfinite(speed)) throw Error("invalid-speed", std::to_string(speed));
  using Clock = std::chrono::steady_clock;
  ReplayReader reader(path);
  std::optional<double> t0;
  const auto start = Clock::now();
  std::int64_t count = 0;
  while (!stop || !stop->load()) {
    std::optional<DetectionFrame> f = reader.next();
    if (!f) break;
    if (!t0) t0 = f->t;
    if (speed > 0.0) {
      const std::chrono::duration<double> offset((f->t - *t0) / speed);
      std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(offset));
    }
    sink(*f);
    ++count;
  }
  return count;
}

}  // namespace scenekeeper
