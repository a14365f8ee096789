#include "twinarch/socket.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "twinarch/error.hpp"

namespace twinarch {

namespace {

sockaddr_un address(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) fail(ErrorCode::InvalidArgument, "socket path too long: " + path);
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

[[noreturn]] void sys_fail(const std::string& what) {
  fail(ErrorCode::IoError, what + ": " + std::strerror(errno));
}

}  // namespace

LineChannel::LineChannel(LineChannel&& o) noexcept : fd_(o.fd_), buf_(std::move(o.buf_)) { o.fd_ = -1; }

LineChannel& LineChannel::operator=(LineChannel&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.fd_;
    buf_ = std::move(o.buf_);
    o.fd_ = -1;
  }
  return *this;
}

LineChannel::~LineChannel() {
  if (fd_ >= 0) ::close(fd_);
}

LineChannel LineChannel::connect(const std::string& path, int timeout_ms) {
  const sockaddr_un addr = address(path);
  for (int waited = 0;; waited += 20) {
    int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) return LineChannel(fd);
    const int err = errno;
    ::close(fd);
    if ((err != ENOENT && err != ECONNREFUSED) || waited >= timeout_ms) {
      errno = err;
      sys_fail("connect " + path);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void LineChannel::send_line(std::string_view line) {
  std::string data(line);
  data += '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineChannel::read_line() {
  for (;;) {
    if (auto nl = buf_.find('\n'); nl != std::string::npos) {
      std::string line = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      return line;
    }
    char chunk[4096];
    ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("recv");
    }
    if (n == 0) {
      if (buf_.empty()) return std::nullopt;
      std::string line = std::move(buf_);
      buf_.clear();
      return line;
    }
    buf_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::size_t serve_lines(const std::string& path, const std::function<std::string(std::string_view)>& handle) {
  const sockaddr_un addr = address(path);
  int srv = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (srv < 0) sys_fail("socket");
  ::unlink(path.c_str());
  if (::bind(srv, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(srv, 1) != 0) {
    const int err = errno;
    ::close(srv);
    errno = err;
    sys_fail("bind " + path);
  }
  int fd = ::accept(srv, nullptr, nullptr);
  ::close(srv);
  ::unlink(path.c_str());
  if (fd < 0) sys_fail("accept");
  LineChannel ch(fd);
  std::size_t lines = 0;
  while (auto line = ch.read_line()) {
    ++lines;
    std::string reply = handle(*line);
    if (!reply.empty()) ch.send_line(reply);
  }
  return lines;
}

}  // namespace twinarch
