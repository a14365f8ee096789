#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace twinarch {

/// Newline-delimited messages over a Unix domain stream socket.
class LineChannel {
 public:
  LineChannel() = default;
  explicit LineChannel(int fd) : fd_(fd) {}
  LineChannel(LineChannel&& o) noexcept;
  LineChannel& operator=(LineChannel&& o) noexcept;
  ~LineChannel();

  /// Retries for up to `timeout_ms` while the server is not yet listening.
  static LineChannel connect(const std::string& path, int timeout_ms = 5000);

  void send_line(std::string_view line);
  /// nullopt at end of stream.
  std::optional<std::string> read_line();
  bool open() const noexcept { return fd_ >= 0; }

 private:
  int fd_ = -1;
  std::string buf_;
};

/// Binds `path`, accepts a single client and calls `handle` for each line it
/// sends. A non-empty reply is written back. Returns the number of lines seen.
std::size_t serve_lines(const std::string& path,
                        const std::function<std::string(std::string_view)>& handle);

}  // namespace twinarch
