#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "protocolnet/model.hpp"
#include "protocolnet/protocols.hpp"
#include "protocolnet/router.hpp"

namespace protocolnet {

inline constexpr std::size_t kMaxFieldBytes = 16 * 1024;

/// One radiologist decision about a served recommendation. Serialized as one JSON line
/// with exactly these field names.
struct FeedbackEvent {
  std::int64_t timestamp = 0;  // UTC milliseconds, assigned by the log
  std::uint64_t sequence = 0;  // assigned by the log
  std::string order_id;
  std::string indication;
  std::string diagnosis;
  std::string model_id;
  double threshold = 0.0;
  std::string mode;  // "AP" | "CDS"
  std::vector<std::string> served_labels;
  std::string chosen_label;
  bool override = false;
  std::optional<std::string> comment;

  nlohmann::json to_json() const;
  /// Throws ValidationFailure on missing or mistyped fields.
  static FeedbackEvent from_json(const nlohmann::json& j, bool require_log_fields);
};

/// Append-only JSON-lines log. Every append is fsync'd before it returns.
/// On open, a trailing line that is incomplete or unparseable (and anything after it)
/// is moved to `<path>.quarantine` and cut from the log.
class FeedbackLog {
 public:
  explicit FeedbackLog(std::filesystem::path path);
  ~FeedbackLog();
  FeedbackLog(const FeedbackLog&) = delete;
  FeedbackLog& operator=(const FeedbackLog&) = delete;

  /// Assigns timestamp and sequence, persists, returns the sequence. Throws StorageFailure.
  std::uint64_t append(FeedbackEvent event);

  std::uint64_t size() const;
  std::size_t quarantined_bytes() const { return quarantined_bytes_; }
  const std::filesystem::path& path() const { return path_; }

  /// Parses every line of a log file.
  static std::vector<FeedbackEvent> read_all(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  int fd_ = -1;
  std::uint64_t next_sequence_ = 1;
  std::int64_t last_timestamp_ = 0;
  std::size_t quarantined_bytes_ = 0;
};

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

struct ServiceOptions {
  double default_threshold = 0.1;
  std::size_t default_k = kDefaultTopK;
};

/// Endpoint logic independent of the transport. Recommendation is const and thread-safe;
/// feedback appends go through the log's single writer.
class RecommendService {
 public:
  /// Throws ModelLoadFailure if the model's labels are not the hierarchy's labels at its level,
  /// or if default_k is outside [1, min(10, n)].
  RecommendService(MlpModel model, ProtocolHierarchy hierarchy, std::string model_digest,
                   const std::filesystem::path& feedback_log, ServiceOptions options = {});

  HttpReply healthz() const;
  HttpReply protocols(std::string_view level) const;
  HttpReply recommend(std::string_view body) const;
  HttpReply feedback(std::string_view body);

  const MlpModel& model() const { return model_; }
  const std::string& model_digest() const { return digest_; }
  const FeedbackLog& log() const { return log_; }

 private:
  MlpModel model_;
  ProtocolHierarchy hierarchy_;
  std::string digest_;
  ServiceOptions options_;
  FeedbackLog log_;
};

/// HTTP transport (cpp-httplib) over a RecommendService.
class HttpFrontend {
 public:
  explicit HttpFrontend(RecommendService& service);
  ~HttpFrontend();

  /// Port 0 picks a free port. Returns the bound port; throws BindFailure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// "host:port" -> (host, port); throws FlagValidation.
std::pair<std::string, int> parse_bind_address(std::string_view address);

}  // namespace protocolnet
