#include "scorehub/precache.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>
#include <iostream>

namespace scorehub {

using nlohmann::json;

PrecacheEvent parse_precache_event(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRequest, std::string("event is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("context") || !doc["context"].is_string() ||
      !doc.contains("event") || !doc["event"].is_string() || !doc.contains("rev_id") ||
      !doc["rev_id"].is_number_integer()) {
    throw Error(ErrorCode::kMalformedRequest,
                "event needs string context, string event and integer rev_id");
  }
  return {doc["context"].get<std::string>(), doc["event"].get<std::string>(),
          doc["rev_id"].get<std::int64_t>()};
}

void PrecacheConfig::add(const std::string& context, const std::string& model,
                         const std::string& event) {
  entries_[context][model].insert(event);
}

PrecacheConfig PrecacheConfig::from_json(const json& doc) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kInvalidParams, "precache config must be an object of contexts");
  }
  PrecacheConfig config;
  for (const auto& [context, models] : doc.items()) {
    if (!models.is_object()) {
      throw Error(ErrorCode::kInvalidParams,
                  "precache config for '" + context + "' must map models to event lists");
    }
    for (const auto& [model, events] : models.items()) {
      if (!events.is_array()) {
        throw Error(ErrorCode::kInvalidParams,
                    "precache events for '" + context + "/" + model + "' must be a list");
      }
      for (const auto& event : events) config.add(context, model, event.get<std::string>());
    }
  }
  return config;
}

PrecacheConfig PrecacheConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + file.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidParams, file.string() + ": " + e.what());
  }
}

PrecacheConfig PrecacheConfig::for_all_models(const ModelRegistry& registry,
                                              const std::vector<std::string>& events) {
  PrecacheConfig config;
  for (const auto& context : registry.contexts()) {
    for (const auto& model : registry.model_names(context)) {
      for (const auto& event : events) config.add(context, model, event);
    }
  }
  return config;
}

std::vector<std::string> PrecacheConfig::models_for(const std::string& context,
                                                    const std::string& event) const {
  std::vector<std::string> out;
  auto it = entries_.find(context);
  if (it == entries_.end()) return out;
  for (const auto& [model, events] : it->second) {
    if (events.count(event)) out.push_back(model);
  }
  return out;
}

void PrecacheConfig::validate(const ModelRegistry& registry) const {
  for (const auto& [context, models] : entries_) {
    for (const auto& [model, events] : models) registry.get(context, model);
  }
}

Precacher::Precacher(ScoringService& service, PrecacheConfig config,
                     std::size_t queue_capacity)
    : service_(service), config_(std::move(config)), capacity_(queue_capacity) {
  config_.validate(service_.registry());
  consumer_ = std::thread([this] { run(); });
}

Precacher::~Precacher() { stop(); }

void Precacher::stop() {
  {
    std::lock_guard lock(mutex_);
    if (stopping_ && !consumer_.joinable()) return;
    stopping_ = true;
  }
  ready_.notify_all();
  if (consumer_.joinable()) consumer_.join();
  idle_.notify_all();
}

bool Precacher::offer(std::string_view line) {
  PrecacheEvent event;
  try {
    event = parse_precache_event(line);
  } catch (const Error&) {
    service_.metrics().add(Counter::kMalformedEvents);
    return false;
  }
  return offer(std::move(event));
}

bool Precacher::offer(PrecacheEvent event) {
  {
    std::lock_guard lock(mutex_);
    if (stopping_ || queue_.size() >= capacity_) {
      service_.metrics().add(Counter::kDroppedEvents);
      return false;
    }
    queue_.push_back(std::move(event));
  }
  ready_.notify_one();
  return true;
}

void Precacher::drain() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [this] { return (queue_.empty() && !busy_) || stopping_; });
}

void Precacher::run() {
  for (;;) {
    PrecacheEvent event;
    {
      std::unique_lock lock(mutex_);
      ready_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      event = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
    }
    for (const auto& model : config_.models_for(event.context, event.event)) {
      ++scheduled_;
      try {
        service_.precache(event.context, model, event.rev_id);
      } catch (const Error& e) {
        service_.metrics().count_error(e.code());
      } catch (const std::exception&) {
        service_.metrics().count_error(ErrorCode::kInternalError);
      }
    }
    ++processed_;
    {
      std::lock_guard lock(mutex_);
      busy_ = false;
    }
    idle_.notify_all();
  }
}

void Precacher::consume(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    {
      std::lock_guard lock(mutex_);
      if (stopping_) return;
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    offer(line);
  }
}

namespace {

int connect_tcp(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (int rc = getaddrinfo(host.c_str(), port.c_str(), &hints, &found); rc != 0) {
    throw Error(ErrorCode::kIoError,
                "cannot resolve " + host + ":" + port + ": " + gai_strerror(rc));
  }
  int fd = -1;
  for (auto* ai = found; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(found);
  if (fd < 0) throw Error(ErrorCode::kIoError, "cannot connect to " + host + ":" + port);
  return fd;
}

}  // namespace

void Precacher::consume_source(const std::string& source) {
  if (source == "-") {
    consume(std::cin);
    return;
  }
  constexpr std::string_view kTcp = "tcp://";
  if (source.rfind(kTcp, 0) == 0) {
    auto address = source.substr(kTcp.size());
    auto colon = address.rfind(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::kInvalidFlag, "tcp source needs host:port, got '" + source + "'");
    }
    int fd = connect_tcp(address.substr(0, colon), address.substr(colon + 1));
    std::string pending;
    char buffer[4096];
    for (;;) {
      ssize_t n = ::read(fd, buffer, sizeof buffer);
      if (n <= 0) break;
      pending.append(buffer, static_cast<std::size_t>(n));
      std::size_t start = 0;
      for (auto nl = pending.find('\n'); nl != std::string::npos;
           nl = pending.find('\n', start)) {
        std::string_view line(pending.data() + start, nl - start);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) offer(line);
        start = nl + 1;
      }
      pending.erase(0, start);
    }
    ::close(fd);
    if (pending.find_first_not_of(" \t\r") != std::string::npos) offer(pending);
    return;
  }
  std::ifstream in(source);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open event source " + source);
  consume(in);
}

}  // namespace scorehub
