#pragma once

// Point-prompted segmenters: a ground-truth-aware oracle, an image-only flood
// fill, and a client for an external model server that speaks line-delimited
// JSON over the standard streams of a spawned process.

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spider/error.hpp"
#include "spider/imaging.hpp"

namespace spider {

/// Rounds half away from zero, then clamps into [0, W-1] x [0, H-1].
inline std::pair<int, int> round_point(Point p, Dims dims) {
  const auto rx = static_cast<long>(std::lround(p.x));
  const auto ry = static_cast<long>(std::lround(p.y));
  return {static_cast<int>(std::clamp(rx, 0L, static_cast<long>(dims.width - 1))),
          static_cast<int>(std::clamp(ry, 0L, static_cast<long>(dims.height - 1)))};
}

/// Returns the region containing the rounded point, else the one whose bbox
/// center is nearest (first wins on ties).
inline RegionMask segment_oracle(Point point, const std::vector<RegionMask>& regions) {
  if (regions.empty()) fail(ErrorCode::NoRegions, "oracle segmenter needs at least one region");
  const auto [px, py] = round_point(point, regions.front().dims());
  for (const auto& r : regions) {
    if (r.contains(px, py)) return r;
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (regions[i].empty()) continue;
    const Point c = bbox_of_mask(regions[i]).center;
    const double d = std::hypot(c.x - point.x, c.y - point.y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return regions[best];
}

/// 4-connected region grown from the rounded point over pixels whose largest
/// per-channel difference from the seed pixel is at most `color_tol`.
inline RegionMask segment_flood_fill(Point point, const ImageBuffer& img, int color_tol) {
  if (!(point.x >= 0 && point.y >= 0 && point.x <= img.width() && point.y <= img.height())) {
    fail(ErrorCode::OutOfFrame, "flood fill seed lies outside the image");
  }
  if (color_tol < 0) fail(ErrorCode::DegenerateInput, "color tolerance must be non-negative");
  const auto [sx, sy] = round_point(point, img.dims());
  const Rgb seed = img.pixel(sx, sy);
  const auto admits = [&](int x, int y) {
    const Rgb p = img.pixel(x, y);
    for (std::size_t c = 0; c < 3; ++c) {
      if (std::abs(int{p[c]} - int{seed[c]}) > color_tol) return false;
    }
    return true;
  };
  RegionMask out(img.dims());
  std::deque<std::pair<int, int>> frontier{{sx, sy}};
  out.set(sx, sy);
  while (!frontier.empty()) {
    const auto [x, y] = frontier.front();
    frontier.pop_front();
    constexpr int dx[4] = {1, -1, 0, 0};
    constexpr int dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k];
      const int ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= img.width() || ny >= img.height() || out.test(nx, ny) || !admits(nx, ny)) continue;
      out.set(nx, ny);
      frontier.emplace_back(nx, ny);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wire protocol

struct SegmentRequest {
  std::string id;
  std::string image;
  Point point;  // already rounded and clamped
  Dims dims;
};

struct SegmentResponse {
  std::string id;
  Rle rle;
  Dims dims;
};

inline SegmentRequest make_request(std::string id, std::string image, Point point, Dims dims) {
  const auto [x, y] = round_point(point, dims);
  return {std::move(id), std::move(image), Point{static_cast<double>(x), static_cast<double>(y)}, dims};
}

inline std::string encode_request(const SegmentRequest& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["image"] = r.image;
  j["point"] = {r.point.x, r.point.y};
  j["width"] = r.dims.width;
  j["height"] = r.dims.height;
  return j.dump();
}

inline std::string encode_response(const SegmentResponse& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["rle"] = r.rle.counts;
  j["width"] = r.dims.width;
  j["height"] = r.dims.height;
  return j.dump();
}

namespace detail {

[[noreturn]] inline void protocol_violation(const std::string& what, std::string_view payload) {
  fail(ErrorCode::ProtocolViolation, what + " in payload: " + std::string(payload));
}

}  // namespace detail

inline SegmentRequest decode_request(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) detail::protocol_violation("request is not a JSON object", line);
  if (!j.contains("id") || !j["id"].is_string() || !j.contains("image") || !j["image"].is_string() ||
      !j.contains("point") || !j["point"].is_array() || j["point"].size() != 2 || !j["point"][0].is_number() ||
      !j["point"][1].is_number() || !j.contains("width") || !j["width"].is_number_integer() || !j.contains("height") ||
      !j["height"].is_number_integer()) {
    detail::protocol_violation("malformed request", line);
  }
  return {j["id"].get<std::string>(), j["image"].get<std::string>(),
          Point{j["point"][0].get<double>(), j["point"][1].get<double>()},
          Dims{j["width"].get<int>(), j["height"].get<int>()}};
}

/// Parses a response line and checks it against the frame it answers.
inline SegmentResponse decode_response(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) detail::protocol_violation("response is not a JSON object", line);
  if (!j.contains("id") || !j["id"].is_string()) detail::protocol_violation("missing string id", line);
  if (!j.contains("width") || !j["width"].is_number_integer() || !j.contains("height") ||
      !j["height"].is_number_integer()) {
    detail::protocol_violation("missing integer width/height", line);
  }
  if (!j.contains("rle") || !j["rle"].is_array()) detail::protocol_violation("missing rle array", line);
  SegmentResponse r;
  r.id = j["id"].get<std::string>();
  r.dims = {j["width"].get<int>(), j["height"].get<int>()};
  if (r.dims.width < 1 || r.dims.height < 1) detail::protocol_violation("non-positive dimensions", line);
  std::uint64_t total = 0;
  for (const auto& c : j["rle"]) {
    if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<long long>() >= 0)) {
      detail::protocol_violation("run lengths must be non-negative integers", line);
    }
    if (c.get<std::uint64_t>() > std::numeric_limits<std::uint32_t>::max()) detail::protocol_violation("run too long", line);
    r.rle.counts.push_back(c.get<std::uint32_t>());
    total += r.rle.counts.back();
  }
  if (total != r.dims.area()) {
    detail::protocol_violation("run lengths sum to " + std::to_string(total) + ", expected " +
                                   std::to_string(r.dims.area()),
                               line);
  }
  return r;
}

/// Checks a decoded response against its request and returns the mask.
inline RegionMask mask_from_response(const SegmentRequest& req, const SegmentResponse& resp, std::string_view line) {
  if (resp.id != req.id) detail::protocol_violation("response id '" + resp.id + "' does not match '" + req.id + "'", line);
  require_same_dims(resp.dims, req.dims, "segmenter response");
  return rle_decode(resp.rle, resp.dims);
}

/// A child process driven through its stdin/stdout, one request line and one
/// response line at a time.
class PeerProcess {
 public:
  explicit PeerProcess(const std::string& command) {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) fail(ErrorCode::PeerUnreachable, "pipe: " + std::string(std::strerror(errno)));
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      fail(ErrorCode::PeerUnreachable, "pipe: " + std::string(std::strerror(errno)));
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      fail(ErrorCode::PeerUnreachable, "fork: " + std::string(std::strerror(errno)));
    }
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    ::fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
    ::fcntl(read_fd_, F_SETFD, FD_CLOEXEC);
  }

  PeerProcess(const PeerProcess&) = delete;
  PeerProcess& operator=(const PeerProcess&) = delete;

  ~PeerProcess() {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  void send_line(const std::string& line) {
    std::string payload = line + "\n";
    std::size_t off = 0;
    while (off < payload.size()) {
      const ssize_t n = ::write(write_fd_, payload.data() + off, payload.size() - off);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) fail(ErrorCode::PeerUnreachable, "peer closed its input");
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) fail(ErrorCode::PeerUnreachable, "peer closed its output");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
};

/// Client for one peer; one request in flight at a time.
class ExternalSegmenter {
 public:
  explicit ExternalSegmenter(const std::string& command) : peer_(command) {}

  RegionMask segment(const std::string& id, const std::string& image_ref, Point point, Dims dims) {
    const SegmentRequest req = make_request(id, image_ref, point, dims);
    peer_.send_line(encode_request(req));
    const std::string line = peer_.read_line();
    return mask_from_response(req, decode_response(line), line);
  }

 private:
  PeerProcess peer_;
};

}  // namespace spider
