#include "http_server.hpp"

#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/thread_pool.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>

#include "iccs/gateway/gateway.hpp"
#include "iccs/gateway/panels.hpp"
#include "iccs/logging.hpp"

namespace iccs::gateway {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

std::string url_decode(std::string_view in) {
  std::string out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '+') {
      out += ' ';
    } else if (in[i] == '%' && i + 2 < in.size()) {
      out += static_cast<char>(std::stoi(std::string(in.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else {
      out += in[i];
    }
  }
  return out;
}

std::string query_param(std::string_view target, std::string_view key) {
  auto q = target.find('?');
  if (q == std::string_view::npos) return {};
  auto query = target.substr(q + 1);
  while (!query.empty()) {
    auto amp = query.find('&');
    auto pair = query.substr(0, amp);
    auto eq = pair.find('=');
    if (pair.substr(0, eq) == key && eq != std::string_view::npos) return url_decode(pair.substr(eq + 1));
    if (amp == std::string_view::npos) break;
    query = query.substr(amp + 1);
  }
  return {};
}

std::string_view path_of(std::string_view target) { return target.substr(0, target.find('?')); }

std::string_view target_of(const Request& req) { return {req.target().data(), req.target().size()}; }

std::string mime_type(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

Response make_response(const Request& req, http::status status, std::string body, std::string type) {
  Response res{status, req.version()};
  res.set(http::field::server, "iccs-gateway");
  res.set(http::field::content_type, type);
  res.set(http::field::cache_control, "no-store");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

Response json_response(const Request& req, http::status status, const json& body) {
  return make_response(req, status, body.dump(), "application/json");
}

Response error_response(const Request& req, http::status status, ErrorCode code, const std::string& message) {
  return json_response(req, status, {{"error", {{"code", to_string(code)}, {"message", message}}}});
}

const char* kPlaceholderPage =
    "<!doctype html><title>ICCS gateway</title>"
    "<p>The console is not installed here. API: /api/broadview, /api/styles, /api/panels.</p>";

}  // namespace

struct HttpServer::Impl {
  Impl(Gateway& g, std::string dir) : gateway(g), static_dir(std::move(dir)) {}

  Gateway& gateway;
  std::string static_dir;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  net::thread_pool pool{2};  // request handlers that talk to the facility
  std::thread io_thread;
  std::uint16_t bound_port = 0;
  std::atomic<bool> stopped{false};

  Response handle(const Request& req);
  void accept();
};

namespace {

// One upgraded console connection.
class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, Gateway& gateway) : ws_(std::move(socket)), gateway_(gateway) {}

  void start(Request req) {
    operator_ = query_param(target_of(req), "operator");
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    auto weak = weak_from_this();
    auto limit = gateway_.outbox_limit();
    id_ = gateway_.open_session(
        operator_,
        [weak, limit](const std::string& text) {
          auto self = weak.lock();
          if (!self) return true;
          if (self->queued_.fetch_add(1) + 1 > limit) return false;
          net::post(self->ws_.get_executor(), [self, text] { self->enqueue(text); });
          return true;
        },
        [weak] {
          if (auto self = weak.lock()) {
            net::post(self->ws_.get_executor(), [self] { self->close(); });
          }
        });
    read();
  }

  void read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      finish();
      return;
    }
    gateway_.session_message(id_, beast::buffers_to_string(buffer_.data()));
    buffer_.consume(buffer_.size());
    read();
  }

  void enqueue(std::string text) {
    if (closing_) return;
    outbox_.push_back(std::move(text));
    if (outbox_.size() == 1) write();
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()),
                    beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      finish();
      return;
    }
    outbox_.pop_front();
    --queued_;
    if (!outbox_.empty()) write();
  }

  void close() {
    if (closing_) return;
    closing_ = true;
    outbox_.clear();
    ws_.async_close(websocket::close_code::policy_error, [self = shared_from_this()](beast::error_code) {
      self->finish();
    });
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    gateway_.close_session(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  Gateway& gateway_;
  beast::flat_buffer buffer_;
  std::string operator_;
  std::uint64_t id_ = 0;
  std::deque<std::string> outbox_;
  std::atomic<std::size_t> queued_{0};
  bool closing_ = false;
  bool finished_ = false;
};

// One plain HTTP connection; hands itself over to WsSession on upgrade.
class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, HttpServer::Impl* server) : stream_(std::move(socket)), server_(server) {}

  void start() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::read, shared_from_this()));
  }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (websocket::is_upgrade(req_)) {
      if (path_of(target_of(req_)) != "/ws") {
        reply(error_response(req_, http::status::not_found, ErrorCode::kNoSuchObject, "no such endpoint"));
        return;
      }
      if (query_param(target_of(req_), "operator").empty()) {
        reply(error_response(req_, http::status::bad_request, ErrorCode::kBadArgs, "operator required"));
        return;
      }
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), server_->gateway)->start(std::move(req_));
      return;
    }
    // Handlers may block on the facility; keep them off the I/O thread.
    net::post(server_->pool, [self = shared_from_this()] {
      auto res = std::make_shared<Response>(self->server_->handle(self->req_));
      net::post(self->stream_.get_executor(), [self, res] { self->reply(std::move(*res)); });
    });
  }

  void reply(Response res) {
    res_ = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *res_, beast::bind_front_handler(&HttpSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) return;
    if (!res_->keep_alive()) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    read();
  }

  beast::tcp_stream stream_;
  HttpServer::Impl* server_;  // outlives every queued handler
  beast::flat_buffer buffer_;
  Request req_;
  std::shared_ptr<Response> res_;
};

}  // namespace

Response HttpServer::Impl::handle(const Request& req) {
  if (req.method() != http::verb::get && req.method() != http::verb::head) {
    return error_response(req, http::status::method_not_allowed, ErrorCode::kBadArgs, "GET only");
  }
  std::string path(path_of(target_of(req)));
  try {
    if (path == "/api/broadview") return json_response(req, http::status::ok, gateway.broadview());
    if (path == "/api/styles") return json_response(req, http::status::ok, gateway.styles());
    if (path == "/api/panels") {
      json all = json::object();
      for (const auto& [tag, d] : panel_descriptors()) all[tag] = d;
      return json_response(req, http::status::ok, all);
    }
    if (path.rfind("/api/panels/", 0) == 0) {
      auto tag = path.substr(std::string("/api/panels/").size());
      if (auto d = panel_for(tag)) return json_response(req, http::status::ok, *d);
      return error_response(req, http::status::not_found, ErrorCode::kNoSuchObject,
                            fmt::format("no panel for type '{}'", tag));
    }
    if (path.rfind("/api/", 0) == 0) {
      return error_response(req, http::status::not_found, ErrorCode::kNoSuchObject, "no such endpoint");
    }
  } catch (const Error& e) {
    return error_response(req, http::status::internal_server_error, e.code(), e.what());
  }

  if (static_dir.empty()) {
    if (path == "/" || path == "/index.html") {
      return make_response(req, http::status::ok, kPlaceholderPage, "text/html; charset=utf-8");
    }
    return error_response(req, http::status::not_found, ErrorCode::kNoSuchObject, "not found");
  }
  if (path.find("..") != std::string::npos) {
    return error_response(req, http::status::bad_request, ErrorCode::kBadArgs, "bad path");
  }
  std::filesystem::path file = std::filesystem::path(static_dir) / path.substr(1);
  if (path == "/" || std::filesystem::is_directory(file)) file /= "index.html";
  std::ifstream in(file, std::ios::binary);
  if (!in) return error_response(req, http::status::not_found, ErrorCode::kNoSuchObject, "not found");
  std::ostringstream body;
  body << in.rdbuf();
  return make_response(req, http::status::ok, body.str(), mime_type(file));
}

void HttpServer::Impl::accept() {
  acceptor.async_accept(net::make_strand(ioc), [self = this](beast::error_code ec, tcp::socket s) {
    if (ec) {
      if (!self->stopped) log::warning("gateway: accept: {}", ec.message());
      return;
    }
    std::make_shared<HttpSession>(std::move(s), self)->start();
    self->accept();
  });
}

HttpServer::HttpServer(Gateway& gateway, const std::string& host, std::uint16_t port, std::string static_dir)
    : impl_(std::make_unique<Impl>(gateway, std::move(static_dir))) {
  tcp::endpoint ep{net::ip::make_address(host), port};
  beast::error_code ec;
  impl_->acceptor.open(ep.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(ep, ec);
  if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw Error(ErrorCode::kCommFailure, fmt::format("gateway listen on {}:{}: {}", host, port, ec.message()));
  impl_->bound_port = impl_->acceptor.local_endpoint().port();
  impl_->accept();
  impl_->io_thread = std::thread([impl = impl_.get()] { impl->ioc.run(); });
}

HttpServer::~HttpServer() { stop(); }

std::uint16_t HttpServer::port() const { return impl_->bound_port; }

void HttpServer::stop() {
  if (impl_->stopped.exchange(true)) return;
  net::post(impl_->ioc, [impl = impl_.get()] {
    beast::error_code ec;
    impl->acceptor.close(ec);
  });
  impl_->pool.join();
  impl_->ioc.stop();
  if (impl_->io_thread.joinable()) impl_->io_thread.join();
}

}  // namespace iccs::gateway
