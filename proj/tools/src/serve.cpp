#include "serve.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "tensegrity/teleop.hpp"

namespace tensegrity::cli {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

std::string content_type(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

http::response<http::string_body> static_response(const http::request<http::string_body>& req,
                                                  const std::string& assets) {
  http::response<http::string_body> res{http::status::ok, req.version()};
  res.keep_alive(false);
  const auto reply = [&](http::status status, const std::string& type, std::string body) {
    res.result(status);
    res.set(http::field::content_type, type);
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  };
  if (req.method() != http::verb::get) return reply(http::status::method_not_allowed, "text/plain", "GET only\n");
  if (assets.empty()) {
    return reply(http::status::ok, "text/plain", "tensegrity teleop server: open a WebSocket on this port\n");
  }
  std::string target(req.target());
  if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);
  if (target.empty() || target.back() == '/') target += "index.html";
  if (target.find("..") != std::string::npos) return reply(http::status::bad_request, "text/plain", "bad path\n");
  const std::filesystem::path path = std::filesystem::path(assets) / target.substr(1);
  std::ifstream in(path, std::ios::binary);
  if (!in) return reply(http::status::not_found, "text/plain", "not found\n");
  std::ostringstream body;
  body << in.rdbuf();
  return reply(http::status::ok, content_type(path), body.str());
}

// Drives one WebSocket session on its own io_context: an async read loop feeds
// the session and a pump writes whatever the session queues, one frame at a time.
class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(websocket::stream<tcp::socket> ws, std::unique_ptr<LiveSession> session)
      : ws_(std::move(ws)), session_(std::move(session)), timer_(ws_.get_executor()) {}

  void start() {
    read();
    pump();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->session_->close("client_disconnected");
        return;
      }
      self->session_->receive(beast::buffers_to_string(self->buffer_.data()));
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void pump() {
    if (done_) return;
    auto message = session_->next_outgoing(std::chrono::milliseconds(0));
    if (!message) {
      if (session_->ended()) {
        finish();
        return;
      }
      timer_.expires_after(std::chrono::milliseconds(2));
      timer_.async_wait([self = shared_from_this()](beast::error_code) { self->pump(); });
      return;
    }
    outgoing_ = std::move(*message);
    ws_.text(true);
    ws_.async_write(net::buffer(outgoing_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->session_->close("client_disconnected");
        self->done_ = true;
        return;
      }
      self->pump();
    });
  }

  void finish() {
    done_ = true;
    if (!ws_.is_open()) return;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<tcp::socket> ws_;
  std::unique_ptr<LiveSession> session_;
  net::steady_timer timer_;
  beast::flat_buffer buffer_;
  std::string outgoing_;
  bool done_ = false;
};

// Returns true when the connection was a WebSocket session.
bool handle(net::io_context& ioc, tcp::socket socket, const ScenarioConfig& config, const ServeOptions& options,
            int id) {
  beast::error_code ec;
  beast::flat_buffer buffer;
  http::request<http::string_body> req;
  http::read(socket, buffer, req, ec);
  if (ec) return false;
  if (!websocket::is_upgrade(req)) {
    auto res = static_response(req, options.assets_dir);
    http::write(socket, res, ec);
    socket.shutdown(tcp::socket::shutdown_both, ec);
    return false;
  }
  websocket::stream<tcp::socket> ws(std::move(socket));
  ws.accept(req, ec);
  if (ec) return false;

  LiveOptions live;
  live.frame_rate = options.frame_rate;
  if (!options.log_dir.empty()) {
    std::filesystem::create_directories(options.log_dir);
    live.log_path = (std::filesystem::path(options.log_dir) / ("session-" + std::to_string(id) + ".jsonl")).string();
  }
  std::unique_ptr<LiveSession> session;
  try {
    session = std::make_unique<LiveSession>(config, live);
  } catch (const std::exception& e) {
    ws.text(true);
    ws.write(net::buffer(error_frame_json("session_failed", e.what())), ec);
    ws.close(websocket::close_code::internal_error, ec);
    return true;
  }
  std::cerr << "session " << id << " opened" << (live.log_path.empty() ? "" : ", log " + live.log_path) << '\n';
  std::make_shared<Connection>(std::move(ws), std::move(session))->start();
  ioc.run();
  std::cerr << "session " << id << " closed\n";
  return true;
}

}  // namespace

int serve(const ScenarioConfig& config, const ServeOptions& options) {
  net::io_context accept_context;
  tcp::acceptor acceptor(accept_context, {net::ip::make_address(options.address), options.port});
  // Resolve the gait once so sessions start quickly.
  ScenarioConfig resolved = config;
  if (resolved.gait.empty()) resolved.gait = default_gait(resolved);
  const unsigned short port = acceptor.local_endpoint().port();
  std::cerr << "listening on ws://" << options.address << ':' << port << "/\n";
  if (options.on_listening) options.on_listening(port);

  std::atomic<int> next_id{0};
  for (;;) {
    auto context = std::make_shared<net::io_context>();
    tcp::socket socket = acceptor.accept(*context);
    const int id = next_id++;
    if (options.once) {
      // Plain HTTP requests do not count as the session.
      if (handle(*context, std::move(socket), resolved, options, id)) return 0;
      continue;
    }
    std::thread([context, socket = std::move(socket), &resolved, &options, id]() mutable {
      handle(*context, std::move(socket), resolved, options, id);
    }).detach();
  }
}

}  // namespace tensegrity::cli
