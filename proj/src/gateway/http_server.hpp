#pragma once

#include <cstdint>
#include <memory>
#include <string>

namespace iccs::gateway {

class Gateway;

/// HTTP and WebSocket listener for consoles:
///   GET /api/broadview, /api/styles, /api/panels, /api/panels/<type_tag>
///   GET /ws?operator=<id>  (WebSocket upgrade)
///   anything else is served from static_dir when set.
class HttpServer {
 public:
  HttpServer(Gateway& gateway, const std::string& host, std::uint16_t port, std::string static_dir);
  ~HttpServer();

  std::uint16_t port() const;
  void stop();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace iccs::gateway
