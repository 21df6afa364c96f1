#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "vtank/error.hpp"
#include "vtank/platform.hpp"

namespace httplib {
class Server;
}

namespace vtank {

struct ApiOptions {
  /// Where 500 responses leave their ticket files.
  std::filesystem::path tickets_dir;
  /// The HTTP layer's own authorization pre-checks. Switching them off
  /// leaves only the catalogue's checks, which must still hold.
  bool api_checks = true;
};

/// Maps an error code to its HTTP status. 500 means "write a ticket".
int http_status(Errc code) noexcept;

/// JSON web service over a Platform. Bearer-token sessions for users,
/// per-simulation tokens for the job callbacks.
class ApiServer {
 public:
  ApiServer(Platform& platform, ApiOptions options = {});
  ~ApiServer();

  /// Binds (port 0 picks a free one) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

  httplib::Server& server() { return *server_; }
  const ApiOptions& options() const { return options_; }

 private:
  void routes();

  Platform& p_;
  ApiOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace vtank
