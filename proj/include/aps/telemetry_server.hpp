#pragma once

// Telemetry endpoint. One listening port carries two framings of the same
// newline-delimited message schema: raw TCP (one JSON document per line) and
// WebSocket text frames (one document per frame) for browsers. Plain HTTP GETs
// are answered from a static directory when one is configured.
//
// Threading: an accept thread owns the listening socket and reaps finished
// connections; each connection has a reader thread (protocol sniffing, then
// command lines) and a writer thread draining a bounded per-client queue.
// Broadcasting only appends to queues, so it never blocks on the network. A
// client whose queue overflows is disconnected.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include <json.hpp>

#include "aps/protocol.hpp"

namespace aps::net {

using ClientId = std::uint64_t;

struct ServerOptions {
  std::uint16_t port = 0;  // 0 picks an ephemeral port
  std::string bind_address = "0.0.0.0";
  std::size_t client_queue_capacity = 1024;  // messages
  std::string static_dir;                    // empty: no static files
  std::chrono::milliseconds sniff_timeout{200};
  int send_buffer_bytes = 0;  // 0 keeps the kernel default
};

struct ServerStats {
  std::size_t connected = 0;
  std::uint64_t accepted = 0;
  std::uint64_t disconnected_overflow = 0;
  std::uint64_t messages_enqueued = 0;
  std::size_t max_queue_depth = 0;
};

namespace detail {

inline std::string base64(const unsigned char* data, std::size_t n) {
  std::string out(4 * ((n + 2) / 3), '\0');
  const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data,
                                      static_cast<int>(n));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

inline std::string websocket_accept_key(const std::string& client_key) {
  static constexpr const char* kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  const std::string joined = client_key + kGuid;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest);
  return base64(digest, sizeof digest);
}

/// Unmasked server-to-client frame with FIN set.
inline std::string websocket_frame(std::string_view payload, std::uint8_t opcode = 0x1) {
  std::string f;
  f.push_back(static_cast<char>(0x80 | opcode));
  const std::size_t n = payload.size();
  if (n < 126) {
    f.push_back(static_cast<char>(n));
  } else if (n <= 0xFFFF) {
    f.push_back(126);
    f.push_back(static_cast<char>((n >> 8) & 0xFF));
    f.push_back(static_cast<char>(n & 0xFF));
  } else {
    f.push_back(127);
    for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xFF));
  }
  f.append(payload);
  return f;
}

struct WebSocketFrame {
  bool fin = true;
  std::uint8_t opcode = 0;
  std::string payload;
};

/// Parses one frame from the front of `buf`; returns nullopt when more bytes
/// are needed. Consumed bytes are erased.
inline std::optional<WebSocketFrame> take_websocket_frame(std::string& buf) {
  if (buf.size() < 2) return std::nullopt;
  const auto b0 = static_cast<unsigned char>(buf[0]);
  const auto b1 = static_cast<unsigned char>(buf[1]);
  std::size_t pos = 2;
  std::uint64_t len = b1 & 0x7F;
  if (len == 126) {
    if (buf.size() < 4) return std::nullopt;
    len = (static_cast<unsigned char>(buf[2]) << 8) | static_cast<unsigned char>(buf[3]);
    pos = 4;
  } else if (len == 127) {
    if (buf.size() < 10) return std::nullopt;
    len = 0;
    for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<unsigned char>(buf[2 + i]);
    pos = 10;
  }
  const bool masked = b1 & 0x80;
  unsigned char mask[4] = {0, 0, 0, 0};
  if (masked) {
    if (buf.size() < pos + 4) return std::nullopt;
    std::memcpy(mask, buf.data() + pos, 4);
    pos += 4;
  }
  if (buf.size() < pos + len) return std::nullopt;
  WebSocketFrame frame;
  frame.fin = b0 & 0x80;
  frame.opcode = b0 & 0x0F;
  frame.payload = buf.substr(pos, len);
  if (masked) {
    for (std::size_t i = 0; i < frame.payload.size(); ++i) frame.payload[i] ^= static_cast<char>(mask[i % 4]);
  }
  buf.erase(0, pos + len);
  return frame;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct HttpRequest {
  std::string method;
  std::string target;
  std::map<std::string, std::string> headers;  // lower-cased names
};

inline std::optional<HttpRequest> parse_http_request(const std::string& head) {
  std::istringstream in(head);
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  HttpRequest req;
  std::istringstream first(line);
  std::string version;
  if (!(first >> req.method >> req.target >> version)) return std::nullopt;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) break;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    req.headers[lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
  }
  return req;
}

inline std::string content_type(const std::filesystem::path& p) {
  const auto ext = lower(p.extension().string());
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
  if (ext == ".css") return "text/css; charset=utf-8";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

inline bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

/// Telemetry line with the per-connection sequence number spliced in; same
/// bytes as protocol::encode.
inline std::string splice_line(std::string_view kind, const std::string& payload_dump, std::uint64_t seq) {
  std::string s;
  s.reserve(payload_dump.size() + 48);
  s += "{\"kind\":\"";
  s += kind;
  s += "\",\"payload\":";
  s += payload_dump;
  s += ",\"seq\":";
  s += std::to_string(seq);
  s += "}\n";
  return s;
}

}  // namespace detail

class TelemetryServer {
 public:
  /// Called on a reader thread for every complete inbound line.
  using CommandHandler = std::function<void(ClientId, const std::string& line)>;
  /// Produces the state payload sent as each client's first message.
  using SnapshotProvider = std::function<nlohmann::json()>;

  TelemetryServer(ServerOptions options, SnapshotProvider snapshot, CommandHandler on_command)
      : options_(std::move(options)), snapshot_(std::move(snapshot)), on_command_(std::move(on_command)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(options_.port);
    if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) != 1) {
      ::close(listen_fd_);
      throw std::invalid_argument("bad bind address " + options_.bind_address);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
      const int err = errno;
      ::close(listen_fd_);
      throw std::system_error(err, std::generic_category(),
                              "cannot bind port " + std::to_string(options_.port) +
                                  (err == EADDRINUSE ? " (port busy)" : ""));
    }
    if (::listen(listen_fd_, 64) < 0) {
      const int err = errno;
      ::close(listen_fd_);
      throw std::system_error(err, std::generic_category(), "listen");
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  TelemetryServer(const TelemetryServer&) = delete;
  TelemetryServer& operator=(const TelemetryServer&) = delete;

  ~TelemetryServer() { stop(); }

  [[nodiscard]] std::uint16_t port() const { return port_; }

  /// Fans a message out to every streaming client. Never blocks on I/O.
  void broadcast(protocol::MessageKind kind, const nlohmann::json& payload) {
    const std::string dump = payload.dump();
    std::lock_guard lock(clients_mutex_);
    for (auto& [id, c] : clients_) {
      if (c->streaming) enqueue(*c, kind, dump);
    }
  }

  /// Sends to one client; returns false when it is gone.
  bool send_to(ClientId id, protocol::MessageKind kind, const nlohmann::json& payload) {
    const std::string dump = payload.dump();
    std::lock_guard lock(clients_mutex_);
    auto it = clients_.find(id);
    if (it == clients_.end() || !it->second->streaming) return false;
    return enqueue(*it->second, kind, dump);
  }

  [[nodiscard]] ServerStats stats() const {
    std::lock_guard lock(clients_mutex_);
    ServerStats s = stats_;
    s.connected = 0;
    for (const auto& [id, c] : clients_) s.connected += c->streaming && c->alive ? 1 : 0;
    return s;
  }

  /// Waits until every live client's queue has been written out. Returns
  /// false on timeout.
  bool drain(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      bool idle = true;
      {
        std::lock_guard lock(clients_mutex_);
        for (auto& [id, c] : clients_) {
          std::lock_guard client_lock(c->mutex);
          if (c->alive && c->streaming && (!c->queue.empty() || c->sending)) idle = false;
        }
      }
      if (idle) return true;
      if (std::chrono::steady_clock::now() >= deadline) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    if (accept_thread_.joinable()) accept_thread_.join();
    std::map<ClientId, std::shared_ptr<Client>> all;
    {
      std::lock_guard lock(clients_mutex_);
      all.swap(clients_);
    }
    for (auto& [id, c] : all) kill(*c);
    for (auto& [id, c] : all) finish(*c);
    ::close(listen_fd_);
  }

 private:
  struct Client {
    ClientId id = 0;
    int fd = -1;
    bool websocket = false;
    bool streaming = false;  // registered for telemetry
    std::atomic<bool> alive{true};
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::string> queue;
    bool sending = false;
    std::mutex send_mutex;  // one writer on the socket at a time
    std::uint64_t next_seq = 0;
    std::thread reader;
    std::thread writer;
    std::atomic<bool> reader_done{false};
  };

  // Caller holds clients_mutex_.
  bool enqueue(Client& c, protocol::MessageKind kind, const std::string& payload_dump) {
    if (!c.alive) return false;
    {
      std::lock_guard lock(c.mutex);
      if (c.queue.size() >= options_.client_queue_capacity) {
        ++stats_.disconnected_overflow;
        kill(c);
        return false;
      }
      c.queue.push_back(detail::splice_line(protocol::to_string(kind), payload_dump, c.next_seq++));
      stats_.max_queue_depth = std::max(stats_.max_queue_depth, c.queue.size());
    }
    ++stats_.messages_enqueued;
    c.cv.notify_one();
    return true;
  }

  static void kill(Client& c) {
    if (c.alive.exchange(false)) ::shutdown(c.fd, SHUT_RDWR);
    c.cv.notify_all();
  }

  static void finish(Client& c) {
    if (c.reader.joinable()) c.reader.join();
    if (c.writer.joinable()) c.writer.join();
    if (c.fd >= 0) ::close(c.fd);
    c.fd = -1;
  }

  void accept_loop() {
    while (!stopping_) {
      pollfd p{listen_fd_, POLLIN, 0};
      const int r = ::poll(&p, 1, 50);
      reap();
      if (r <= 0) continue;
      const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) continue;
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      if (options_.send_buffer_bytes > 0) {
        ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &options_.send_buffer_bytes, sizeof options_.send_buffer_bytes);
      }
      auto c = std::make_shared<Client>();
      c->fd = fd;
      {
        std::lock_guard lock(clients_mutex_);
        c->id = next_id_++;
        ++stats_.accepted;
        clients_[c->id] = c;
      }
      c->reader = std::thread([this, c] {
        serve_connection(*c);
        kill(*c);
        c->reader_done = true;
      });
    }
  }

  // Joins and forgets connections whose reader has finished.
  void reap() {
    std::vector<std::shared_ptr<Client>> dead;
    {
      std::lock_guard lock(clients_mutex_);
      for (auto it = clients_.begin(); it != clients_.end();) {
        if (it->second->reader_done) {
          dead.push_back(it->second);
          it = clients_.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& c : dead) finish(*c);
  }

  void start_streaming(Client& c, bool websocket) {
    c.websocket = websocket;
    // Registration and the snapshot happen under the clients lock so no
    // broadcast can slip in ahead of the snapshot.
    std::lock_guard lock(clients_mutex_);
    nlohmann::json snap = snapshot_ ? snapshot_() : nlohmann::json::object();
    snap["snapshot"] = true;
    snap["protocol_version"] = protocol::kProtocolVersion;
    c.streaming = true;
    enqueue(c, protocol::MessageKind::State, snap.dump());
    c.writer = std::thread([this, &c] { write_loop(c); });
  }

  void write_loop(Client& c) {
    while (true) {
      std::string line;
      {
        std::unique_lock lock(c.mutex);
        c.cv.wait(lock, [&] { return !c.queue.empty() || !c.alive; });
        if (!c.alive) return;
        line = std::move(c.queue.front());
        c.queue.pop_front();
        c.sending = true;
      }
      bool ok = false;
      {
        std::lock_guard send_lock(c.send_mutex);
        ok = c.websocket
                 ? detail::send_all(c.fd, detail::websocket_frame(std::string_view(line).substr(0, line.size() - 1)))
                 : detail::send_all(c.fd, line);
      }
      {
        std::lock_guard lock(c.mutex);
        c.sending = false;
      }
      c.cv.notify_all();
      if (!ok) {
        kill(c);
        return;
      }
    }
  }

  // Reads up to `n` bytes; 0 on EOF/error.
  static ssize_t read_some(int fd, char* buf, std::size_t n) {
    while (true) {
      const ssize_t r = ::recv(fd, buf, n, 0);
      if (r < 0 && errno == EINTR) continue;
      return r < 0 ? 0 : r;
    }
  }

  void serve_connection(Client& c) {
    // Sniff: browsers speak first, raw telemetry clients usually wait.
    pollfd p{c.fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(options_.sniff_timeout.count()));
    if (ready > 0 && (p.revents & POLLIN)) {
      char peek[4];
      const ssize_t n = ::recv(c.fd, peek, sizeof peek, MSG_PEEK);
      if (n <= 0) return;
      if (n >= 4 && std::string_view(peek, 4) == "GET ") {
        serve_http(c);
        return;
      }
    }
    start_streaming(c, false);
    read_raw(c);
  }

  void read_raw(Client& c) {
    protocol::LineSplitter splitter;
    char buf[4096];
    while (c.alive) {
      const ssize_t n = read_some(c.fd, buf, sizeof buf);
      if (n == 0) return;
      splitter.feed(std::string_view(buf, static_cast<std::size_t>(n)));
      while (auto line = splitter.next()) {
        if (on_command_) on_command_(c.id, line->text);
      }
    }
  }

  void serve_http(Client& c) {
    std::string head;
    char buf[2048];
    while (head.find("\r\n\r\n") == std::string::npos) {
      if (head.size() > 16384) return;
      const ssize_t n = read_some(c.fd, buf, sizeof buf);
      if (n == 0) return;
      head.append(buf, static_cast<std::size_t>(n));
    }
    const auto split = head.find("\r\n\r\n");
    std::string rest = head.substr(split + 4);
    const auto req = detail::parse_http_request(head.substr(0, split));
    if (!req) return respond(c.fd, 400, "text/plain", "bad request\n");

    const auto upgrade = req->headers.find("upgrade");
    if (upgrade != req->headers.end() && detail::lower(upgrade->second) == "websocket") {
      const auto key = req->headers.find("sec-websocket-key");
      if (key == req->headers.end()) return respond(c.fd, 400, "text/plain", "missing Sec-WebSocket-Key\n");
      const std::string response =
          "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
          "Sec-WebSocket-Accept: " + detail::websocket_accept_key(key->second) + "\r\n\r\n";
      if (!detail::send_all(c.fd, response)) return;
      start_streaming(c, true);
      read_websocket(c, std::move(rest));
      return;
    }
    serve_static(c.fd, req->target);
  }

  void read_websocket(Client& c, std::string buffer) {
    std::string message;
    char buf[4096];
    while (c.alive) {
      while (auto frame = detail::take_websocket_frame(buffer)) {
        switch (frame->opcode) {
          case 0x0:
          case 0x1:
          case 0x2:
            message += frame->payload;
            if (frame->fin) {
              deliver_message(c, message);
              message.clear();
            }
            break;
          case 0x8: {
            std::lock_guard lock(c.send_mutex);
            detail::send_all(c.fd, detail::websocket_frame(frame->payload.substr(0, 2), 0x8));
            return;
          }
          case 0x9: {
            std::lock_guard lock(c.send_mutex);
            detail::send_all(c.fd, detail::websocket_frame(frame->payload, 0xA));
            break;
          }
          default: break;
        }
      }
      const ssize_t n = read_some(c.fd, buf, sizeof buf);
      if (n == 0) return;
      buffer.append(buf, static_cast<std::size_t>(n));
    }
  }

  // A WebSocket message holds one document, or several newline-separated.
  void deliver_message(Client& c, const std::string& message) {
    protocol::LineSplitter splitter;
    splitter.feed(message);
    if (message.empty() || message.back() != '\n') splitter.feed("\n");
    while (auto line = splitter.next()) {
      if (on_command_) on_command_(c.id, line->text);
    }
  }

  static void respond(int fd, int status, const std::string& type, const std::string& body) {
    const char* reason = status == 200 ? "OK" : status == 404 ? "Not Found" : status == 400 ? "Bad Request" : "Error";
    std::string out = "HTTP/1.1 " + std::to_string(status) + " " + reason + "\r\nContent-Type: " + type +
                      "\r\nContent-Length: " + std::to_string(body.size()) + "\r\nConnection: close\r\n\r\n";
    out += body;
    detail::send_all(fd, out);
  }

  void serve_static(int fd, std::string target) {
    if (options_.static_dir.empty()) return respond(fd, 404, "text/plain", "no static bundle configured\n");
    if (const auto q = target.find_first_of("?#"); q != std::string::npos) target.resize(q);
    if (target.empty() || target.front() != '/' || target.find("..") != std::string::npos) {
      return respond(fd, 400, "text/plain", "bad path\n");
    }
    std::filesystem::path path = std::filesystem::path(options_.static_dir) / target.substr(1);
    if (target.back() == '/') path /= "index.html";
    std::ifstream in(path, std::ios::binary);
    if (!in) return respond(fd, 404, "text/plain", "not found\n");
    std::ostringstream body;
    body << in.rdbuf();
    respond(fd, 200, detail::content_type(path), body.str());
  }

  ServerOptions options_;
  SnapshotProvider snapshot_;
  CommandHandler on_command_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;

  mutable std::mutex clients_mutex_;
  std::map<ClientId, std::shared_ptr<Client>> clients_;
  ClientId next_id_ = 1;
  ServerStats stats_;
};

}  // namespace aps::net
