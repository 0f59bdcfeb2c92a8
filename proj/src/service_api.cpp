#include "scorehub/service_api.hpp"

#include <charconv>

#include <httplib.h>

namespace scorehub {

using nlohmann::ordered_json;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::int64_t parse_rev_id(const std::string& text) {
  std::int64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty() || value < 0) {
    throw Error(ErrorCode::kMalformedRequest, "'" + text + "' is not a revision id");
  }
  return value;
}

const std::string* param(const QueryParams& params, const std::string& name) {
  auto it = params.find(name);
  return it == params.end() ? nullptr : &it->second;
}

// Non-empty pipe-separated list.
std::vector<std::string> pipe_list(const std::string& raw, const std::string& name) {
  auto items = split(raw, '|');
  for (const auto& item : items) {
    if (item.empty()) {
      throw Error(ErrorCode::kMalformedRequest, "empty entry in '" + name + "' list");
    }
  }
  return items;
}

HttpResponse json_response(int status, const ordered_json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_response(const Error& e) {
  ordered_json body = {{"error", to_json(error_document(e))}};
  return json_response(ApiHandler::status_for(e.code()), body);
}

std::vector<std::string> path_segments(const std::string& path) {
  std::vector<std::string> out;
  for (auto& s : split(path, '/')) {
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

bool is_truthy_flag(const std::string& value) {
  return value.empty() || value == "true" || value == "1";
}

}  // namespace

int ApiHandler::status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kContextNotFound:
      return 404;
    case ErrorCode::kLoadShed:
      return 503;
    case ErrorCode::kMalformedRequest:
    case ErrorCode::kTypeMismatch:
    case ErrorCode::kUnknownDependent:
    case ErrorCode::kUnknownFieldPath:
    case ErrorCode::kSyntaxError:
    case ErrorCode::kUnknownMetric:
    case ErrorCode::kBoundOutOfRange:
    case ErrorCode::kModelNotFound:
      return 400;
    default:
      return 500;
  }
}

HttpResponse ApiHandler::handle(const std::string& path, const QueryParams& params) {
  try {
    auto segments = path_segments(path);
    if (segments.size() == 1 && segments[0] == "metrics") {
      return {200, "text/plain; version=0.0.4", service_.metrics().snapshot()};
    }
    if (segments.size() < 2 || segments.size() > 5 || segments[0] != "v3" ||
        segments[1] != "scores") {
      return json_response(
          404, {{"error", {{"type", "MalformedRequest"}, {"message", "no route for " + path}}}});
    }
    if (segments.size() == 2) return listing();
    const auto& context = segments[2];
    if (segments.size() == 3 && params.count("model_info")) return model_info(context, params);
    return scores(context, segments.size() > 3 ? &segments[3] : nullptr,
                  segments.size() > 4 ? &segments[4] : nullptr, params);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return error_response(Error(ErrorCode::kInternalError, e.what()));
  }
}

HttpResponse ApiHandler::listing() {
  ordered_json out = ordered_json::object();
  for (const auto& context : service_.registry().contexts()) {
    ordered_json models = ordered_json::object();
    for (const auto& name : service_.registry().model_names(context)) {
      models[name] = {{"version", service_.registry().get(context, name)->version}};
    }
    out[context] = {{"models", std::move(models)}};
  }
  return json_response(200, out);
}

HttpResponse ApiHandler::scores(const std::string& context, const std::string* rev_segment,
                                const std::string* model_segment, const QueryParams& params) {
  if (!service_.registry().has_context(context)) {
    throw Error(ErrorCode::kContextNotFound, "unknown context '" + context + "'");
  }
  ScoreRequest request;
  request.context_id = context;
  if (model_segment) {
    request.model_names = {*model_segment};
  } else if (const auto* models = param(params, "models")) {
    request.model_names = pipe_list(*models, "models");
  } else if (rev_segment) {
    request.model_names = service_.registry().model_names(context);
  } else {
    throw Error(ErrorCode::kMalformedRequest, "'models' is required");
  }
  if (rev_segment) {
    request.revision_ids = {parse_rev_id(*rev_segment)};
  } else if (const auto* revids = param(params, "revids")) {
    for (const auto& id : pipe_list(*revids, "revids")) {
      request.revision_ids.push_back(parse_rev_id(id));
    }
  } else {
    throw Error(ErrorCode::kMalformedRequest, "'revids' is required");
  }
  if (const auto* features = param(params, "features")) {
    request.include_features = is_truthy_flag(*features);
  }
  for (const auto& [name, value] : params) {
    if (name.rfind("feature.", 0) == 0 || name.rfind("datasource.", 0) == 0) {
      request.overlay[name] = value;
    }
  }
  return json_response(200, service_.scores(request).to_json());
}

HttpResponse ApiHandler::model_info(const std::string& context, const QueryParams& params) {
  if (!service_.registry().has_context(context)) {
    throw Error(ErrorCode::kContextNotFound, "unknown context '" + context + "'");
  }
  std::vector<std::string> names;
  if (const auto* models = param(params, "models")) {
    names = pipe_list(*models, "models");
  } else {
    names = service_.registry().model_names(context);
  }
  std::string field_path = *param(params, "model_info");
  if (const auto* path = param(params, "field_path")) field_path = *path;

  ordered_json models = ordered_json::object();
  for (const auto& name : names) {
    try {
      models[name] = service_.model_info(context, name, field_path);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kModelNotFound) throw;
      models[name] = {{"error", to_json(error_document(e))}};
    }
  }
  ordered_json out = {{context, {{"models", std::move(models)}}}};
  return json_response(200, out);
}

HttpServer::HttpServer(ScoringService& service, ServerOptions options)
    : handler_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto threads = options_.http_threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    QueryParams params(req.params.begin(), req.params.end());
    auto response = handler_.handle(req.path, params);
    res.status = response.status;
    res.set_content(response.body, response.content_type);
  };
  server_->Get(R"(/.*)", route);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) {
    throw Error(ErrorCode::kIoError, "cannot listen on " + options_.host + ":" +
                                         std::to_string(options_.port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void HttpServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace scorehub
