#include "protocolnet/service.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

// httplib's default backlog of 5 drops bursts of concurrent clients.
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#include <httplib.h>

#include "protocolnet/error.hpp"

namespace protocolnet {

using nlohmann::json;

namespace {

HttpReply error_reply(int status, Errc code, const std::string& message) {
  return {status, {{"error", std::string(errc_name(code))}, {"message", message}}};
}

int status_for(Errc code) {
  switch (code) {
    case Errc::PayloadTooLarge: return 413;
    case Errc::ModelNotReady: return 503;
    case Errc::StorageFailure: return 500;
    default: return 400;
  }
}

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::StorageFailure, std::string("write: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

json parse_body(std::string_view body) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw Error(Errc::ValidationFailure, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(Errc::ValidationFailure, std::string("malformed JSON: ") + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* name, T fallback) {
  if (!j.contains(name) || j.at(name).is_null()) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::ValidationFailure, std::string("field '") + name + "' has the wrong type");
  }
}

}  // namespace

json FeedbackEvent::to_json() const {
  json j = {{"timestamp", timestamp},
            {"sequence", sequence},
            {"order_id", order_id},
            {"indication", indication},
            {"diagnosis", diagnosis},
            {"model_id", model_id},
            {"threshold", threshold},
            {"mode", mode},
            {"served_labels", served_labels},
            {"chosen_label", chosen_label},
            {"override", override}};
  j["comment"] = comment ? json(*comment) : json(nullptr);
  return j;
}

FeedbackEvent FeedbackEvent::from_json(const json& j, bool require_log_fields) {
  if (!j.is_object()) throw Error(Errc::ValidationFailure, "feedback event must be a JSON object");
  auto require = [&j](const char* name) {
    if (!j.contains(name)) throw Error(Errc::ValidationFailure, std::string("missing field '") + name + "'");
  };
  FeedbackEvent e;
  if (require_log_fields) {
    require("timestamp");
    require("sequence");
  }
  require("mode");
  require("served_labels");
  require("chosen_label");
  require("threshold");
  e.timestamp = field_or<std::int64_t>(j, "timestamp", 0);
  e.sequence = field_or<std::uint64_t>(j, "sequence", 0);
  e.order_id = field_or<std::string>(j, "order_id", "");
  e.indication = field_or<std::string>(j, "indication", "");
  e.diagnosis = field_or<std::string>(j, "diagnosis", "");
  e.model_id = field_or<std::string>(j, "model_id", "");
  e.threshold = field_or<double>(j, "threshold", 0.0);
  e.mode = field_or<std::string>(j, "mode", "");
  e.served_labels = field_or<std::vector<std::string>>(j, "served_labels", {});
  e.chosen_label = field_or<std::string>(j, "chosen_label", "");
  e.override = field_or<bool>(j, "override", false);
  if (j.contains("comment") && !j.at("comment").is_null()) e.comment = field_or<std::string>(j, "comment", "");
  if (e.mode != "AP" && e.mode != "CDS") throw Error(Errc::ValidationFailure, "mode must be \"AP\" or \"CDS\"");
  if (e.order_id.empty() && e.indication.empty() && e.diagnosis.empty()) {
    throw Error(Errc::ValidationFailure, "need order_id or inline indication/diagnosis");
  }
  return e;
}

FeedbackLog::FeedbackLog(std::filesystem::path path) : path_(std::move(path)) {
  std::error_code ec;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);

  if (std::filesystem::exists(path_)) {
    const std::string text = read_text(path_);
    std::size_t good_end = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      if (nl == std::string::npos) break;
      try {
        const auto event = FeedbackEvent::from_json(json::parse(std::string_view(text).substr(pos, nl - pos)), true);
        next_sequence_ = event.sequence + 1;
        last_timestamp_ = event.timestamp;
      } catch (const std::exception&) {
        break;
      }
      pos = nl + 1;
      good_end = pos;
    }
    if (good_end < text.size()) {
      quarantined_bytes_ = text.size() - good_end;
      std::ofstream quarantine(path_.string() + ".quarantine", std::ios::binary | std::ios::app);
      quarantine.write(text.data() + good_end, static_cast<std::streamsize>(quarantined_bytes_));
      quarantine << '\n';
      quarantine.flush();
      if (!quarantine) throw Error(Errc::StorageFailure, "cannot write quarantine file");
      std::filesystem::resize_file(path_, good_end, ec);
      if (ec) throw Error(Errc::StorageFailure, "cannot truncate " + path_.string() + ": " + ec.message());
    }
  }

  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(Errc::StorageFailure, "cannot open " + path_.string() + ": " + std::strerror(errno));
}

FeedbackLog::~FeedbackLog() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t FeedbackLog::append(FeedbackEvent event) {
  std::lock_guard lock(mutex_);
  event.timestamp = std::max(now_ms(), last_timestamp_);
  event.sequence = next_sequence_;
  const std::string line = event.to_json().dump() + "\n";
  write_all(fd_, line);
  if (::fsync(fd_) != 0) throw Error(Errc::StorageFailure, std::string("fsync: ") + std::strerror(errno));
  last_timestamp_ = event.timestamp;
  return next_sequence_++;
}

std::uint64_t FeedbackLog::size() const {
  std::lock_guard lock(mutex_);
  return next_sequence_ - 1;
}

std::vector<FeedbackEvent> FeedbackLog::read_all(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<FeedbackEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) events.push_back(FeedbackEvent::from_json(json::parse(line), true));
  }
  return events;
}

RecommendService::RecommendService(MlpModel model, ProtocolHierarchy hierarchy, std::string model_digest,
                                   const std::filesystem::path& feedback_log, ServiceOptions options)
    : model_(std::move(model)),
      hierarchy_(std::move(hierarchy)),
      digest_(std::move(model_digest)),
      options_(options),
      log_(feedback_log) {
  if (model_.labels != hierarchy_.labels(model_.level)) {
    throw Error(Errc::ModelLoadFailure, "model labels do not match the hierarchy at level " +
                                            std::string(level_name(model_.level)));
  }
  const auto max_k = std::min(kMaxTopK, model_.labels.size());
  if (options_.default_k < 1 || options_.default_k > max_k) {
    throw Error(Errc::ModelLoadFailure, "default k must lie in [1, " + std::to_string(max_k) + "]");
  }
  if (!(options_.default_threshold >= 0.0)) throw Error(Errc::ModelLoadFailure, "default threshold must be >= 0");
}

HttpReply RecommendService::healthz() const {
  return {200, {{"status", "ok"}, {"model_digest", digest_}, {"label_count", model_.labels.size()}}};
}

HttpReply RecommendService::protocols(std::string_view level_text) const {
  try {
    const auto level = parse_level(level_text);
    return {200, {{"level", level_name(level)}, {"labels", hierarchy_.labels(level)}}};
  } catch (const Error& e) {
    return error_reply(status_for(e.code()), e.code(), e.what());
  }
}

HttpReply RecommendService::recommend(std::string_view body) const {
  try {
    if (model_.labels.empty()) throw Error(Errc::ModelNotReady, "no model loaded");
    const auto request = parse_body(body);
    Order order;
    order.indication = field_or<std::string>(request, "indication", "");
    order.diagnosis = field_or<std::string>(request, "diagnosis", "");
    if (order.indication.size() > kMaxFieldBytes || order.diagnosis.size() > kMaxFieldBytes) {
      throw Error(Errc::PayloadTooLarge, "indication and diagnosis are limited to 16 KiB each");
    }
    const double threshold = field_or<double>(request, "threshold", options_.default_threshold);
    if (!(threshold >= 0.0)) throw Error(Errc::ValidationFailure, "threshold must be >= 0");
    const auto k = field_or<std::int64_t>(request, "k", static_cast<std::int64_t>(options_.default_k));
    const auto max_k = static_cast<std::int64_t>(std::min(kMaxTopK, model_.labels.size()));
    if (k < 1 || k > max_k) throw Error(Errc::InvalidK, "k must lie in [1, " + std::to_string(max_k) + "]");

    EncodingEcho echo;
    const Eigen::VectorXd logits = infer_order(model_, order, &echo).cast<double>().transpose();
    const auto routed = route(logits, model_.labels, threshold, static_cast<std::size_t>(k));

    json recs = json::array();
    for (const auto& r : routed.ranked) recs.push_back({{"label", r.label}, {"normalized_score", r.score}});
    return {200,
            {{"mode", route_mode_name(routed.mode)},
             {"delta", routed.delta},
             {"threshold_used", routed.threshold_used},
             {"recommendations", recs},
             {"dropped_tokens", {{"indication", echo.indication_dropped}, {"diagnosis", echo.diagnosis_dropped}}}}};
  } catch (const Error& e) {
    return error_reply(status_for(e.code()), e.code(), e.what());
  }
}

HttpReply RecommendService::feedback(std::string_view body) {
  try {
    auto event = FeedbackEvent::from_json(parse_body(body), false);
    if (event.model_id.empty()) event.model_id = digest_;
    if (event.model_id != digest_) throw Error(Errc::ValidationFailure, "model_id does not match the served model");
    if (event.indication.size() > kMaxFieldBytes || event.diagnosis.size() > kMaxFieldBytes) {
      throw Error(Errc::PayloadTooLarge, "indication and diagnosis are limited to 16 KiB each");
    }
    for (const auto& label : event.served_labels) {
      if (!hierarchy_.contains(label, model_.level)) {
        throw Error(Errc::ValidationFailure, "served label '" + label + "' is not a model label");
      }
    }
    const bool served =
        std::find(event.served_labels.begin(), event.served_labels.end(), event.chosen_label) != event.served_labels.end();
    if (!served) {
      if (!event.override) {
        throw Error(Errc::ValidationFailure, "chosen label was not served; set override to choose another protocol");
      }
      if (!hierarchy_.contains(event.chosen_label, model_.level)) {
        throw Error(Errc::ValidationFailure, "chosen label '" + event.chosen_label + "' is not a valid protocol");
      }
    }
    const auto sequence = log_.append(std::move(event));
    return {200, {{"accepted", true}, {"sequence", sequence}}};
  } catch (const Error& e) {
    return error_reply(status_for(e.code()), e.code(), e.what());
  }
}

struct HttpFrontend::Impl {
  RecommendService& service;
  httplib::Server server;

  explicit Impl(RecommendService& s) : service(s) {
    auto send = [](httplib::Response& res, const HttpReply& reply) {
      res.status = reply.status;
      res.set_content(reply.body.dump(), "application/json");
    };
    server.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, service.healthz());
    });
    server.Get("/api/v1/protocols", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.protocols(req.has_param("level") ? req.get_param_value("level") : "local"));
    });
    server.Post("/api/v1/recommend", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.recommend(req.body));
    });
    server.Post("/api/v1/feedback", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.feedback(req.body));
    });
    // Two 16 KiB fields plus JSON framing.
    server.set_payload_max_length(64 * 1024);
  }
};

HttpFrontend::HttpFrontend(RecommendService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(Errc::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpFrontend::run() { impl_->server.listen_after_bind(); }

void HttpFrontend::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

std::pair<std::string, int> parse_bind_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(Errc::FlagValidation, "bind address must be host:port");
  }
  const std::string host(address.substr(0, colon));
  const std::string port_text(address.substr(colon + 1));
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw Error(Errc::FlagValidation, "invalid port '" + port_text + "'");
  return {host, port};
}

}  // namespace protocolnet
