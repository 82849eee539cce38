#pragma once

// JSON-over-HTTP front end for a read-only engine.
//
//   POST /query   {"question": "...", "prompt": false}  -> query envelope
//   GET  /stats                                        -> store statistics
//   GET  /healthz                                      -> "ok"

#include <memory>
#include <string>

#include "hgrag/engine.hpp"

namespace httplib {
class Server;
}

namespace hgrag {

class Server {
 public:
  explicit Server(Engine& engine);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Bind to `host:port`; port 0 picks a free port. Throws StorageError
  /// when the bind fails.
  int bind(const std::string& host, int port);
  /// Serve until stop(); call after bind().
  void run();
  void stop();

 private:
  Engine& engine_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace hgrag
