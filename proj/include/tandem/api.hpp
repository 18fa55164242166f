#pragma once

#include <memory>
#include <string>

#include "tandem/analysis_config.hpp"
#include "tandem/store.hpp"

namespace tandem {

struct ApiOptions {
  AnalysisConfig config;
  // Adds permissive cross-origin headers and answers preflight requests.
  bool cors = false;
};

// The HTTP/JSON service over a SessionStore. Every JSON body is written with
// dump_canonical, and every error body is
//   {"status": int, "code": string, "message": string, "detail": any|null}
// with code one of bad_transcript, not_found, conflict, validation_failed,
// internal.
class ApiServer {
 public:
  ApiServer(SessionStore& store, ApiOptions options);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Port 0 picks a free port. Returns false when the address cannot be bound.
  bool bind(const std::string& host, int port);
  int port() const;

  // Serves until stop(); returns false if the server could not run.
  bool run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tandem
