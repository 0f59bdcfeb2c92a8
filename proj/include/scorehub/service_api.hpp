#pragma once

#include <map>
#include <memory>
#include <string>
#include <thread>

#include "scorehub/runtime.hpp"

namespace httplib {
class Server;
}

namespace scorehub {

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

using QueryParams = std::multimap<std::string, std::string>;

// Maps the v3 URL surface onto a ScoringService. Transport-free, so it can
// be driven directly in tests.
//
//   /v3/scores/                               contexts and their models
//   /v3/scores/{context}?models=a|b&revids=1|2
//   /v3/scores/{context}?model_info[=path]&models=a|b
//   /v3/scores/{context}/{rev_id}[?models=a|b]
//   /v3/scores/{context}/{rev_id}/{model}[?features&feature.{name}=v]
//   /metrics
//
// Path segments win over the equivalent query parameters.
class ApiHandler {
 public:
  explicit ApiHandler(ScoringService& service) : service_(service) {}

  HttpResponse handle(const std::string& path, const QueryParams& params);

  // HTTP status for an error escaping a request.
  static int status_for(ErrorCode code);

 private:
  HttpResponse scores(const std::string& context, const std::string* rev_segment,
                      const std::string* model_segment, const QueryParams& params);
  HttpResponse model_info(const std::string& context, const QueryParams& params);
  HttpResponse listing();

  ScoringService& service_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t http_threads = 8;
};

// httplib front end. start() returns once the socket is listening.
class HttpServer {
 public:
  HttpServer(ScoringService& service, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Returns the bound port. Throws kIoError.
  int start();
  // Blocks until stop() is called from elsewhere.
  void wait();
  // Stops accepting and lets in-flight requests finish.
  void stop();

 private:
  ApiHandler handler_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace scorehub
