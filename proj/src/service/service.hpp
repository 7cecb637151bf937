#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "agent/agent.hpp"
#include "common/event_log.hpp"
#include "gateway/gateway.hpp"
#include "service/store.hpp"

namespace httplib {
class Server;
}

namespace straptor::service {

enum class JobStatus { Queued, Running, Succeeded, Failed };
std::string_view to_string(JobStatus s) noexcept;

struct UploadedFile {
  std::string name;
  std::string bytes;
};

struct BuildParams {
  t2t::BuildMode mode = t2t::BuildMode::Heuristic;
  double tau = t2t::kDefaultThreshold;
};

struct FileOutcome {
  std::string name;
  bool ok = false;
  std::string tree_id;
  std::string error;  // "<Code>: message" on failure
};

struct BuildJob {
  std::string id;
  JobStatus status = JobStatus::Queued;
  std::vector<std::string> tree_ids;
  std::string message;
  std::string submitted_at;
  std::string finished_at;
  std::vector<std::pair<JobStatus, std::string>> history;
  std::vector<FileOutcome> files;

  json to_json() const;
};

struct ServiceOptions {
  std::filesystem::path data_dir = "data";
  std::optional<std::filesystem::path> config_file;
  std::string cors_origin = "*";
  std::size_t workers = 2;
  std::size_t max_body_bytes = 32u << 20;
  std::ostream* log_echo = nullptr;
};

class Service {
 public:
  static constexpr const char* kSuccessMessage = "HO-Tree generated successfully";

  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Rejects unknown extensions synchronously (UnsupportedFormat).
  std::string submit_tables(std::vector<UploadedFile> files, const BuildParams& params);
  BuildJob job(const std::string& id) const;  // throws JobNotFound
  BuildJob wait_job(const std::string& id, std::chrono::milliseconds timeout) const;

  FileTreeStore& trees() { return trees_; }
  FileSessionStore& sessions() { return sessions_; }
  agent::Agent& agent() { return *agent_; }
  EventLog& log() { return log_; }

  json model_config() const;
  // Validates, swaps the live gateway and persists to config/models.json.
  void set_model_config(const json& j);

  // Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host, int port);
  // Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();
  bool running() const;

 private:
  void worker();
  void process(const std::string& job_id);
  void set_status(BuildJob& job, JobStatus s);
  FileOutcome build_file(const std::string& job_id, const UploadedFile& f, const BuildParams& params,
                         const gateway::Gateway* gw);
  void install_routes();
  std::shared_ptr<const gateway::Gateway> make_gateway(const gateway::GatewayConfig& cfg) const;
  std::string save_upload(const std::string& prefix, const std::string& name, const std::string& bytes);

  ServiceOptions options_;
  EventLog log_;
  FileTreeStore trees_;
  FileSessionStore sessions_;
  std::unique_ptr<agent::Agent> agent_;
  gateway::GatewayConfig gateway_config_;

  mutable std::mutex jobs_mu_;
  mutable std::condition_variable jobs_cv_;
  std::map<std::string, BuildJob> jobs_;
  std::map<std::string, std::pair<std::vector<UploadedFile>, BuildParams>> pending_;
  std::deque<std::string> queue_;
  std::uint64_t job_counter_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;

  std::unique_ptr<httplib::Server> http_;
  std::thread http_thread_;
};

}  // namespace straptor::service
