#include "service/service.hpp"

#include <random>

#include <httplib.h>

#include "common/text.hpp"
#include "ingest/ingest.hpp"

namespace straptor::service {

namespace fs = std::filesystem;

std::string_view to_string(JobStatus s) noexcept {
  switch (s) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Succeeded: return "succeeded";
    case JobStatus::Failed: return "failed";
  }
  return "queued";
}

json BuildJob::to_json() const {
  json hist = json::array();
  for (const auto& [s, at] : history) hist.push_back({{"status", service::to_string(s)}, {"at", at}});
  json fs_json = json::array();
  for (const auto& f : files) {
    json j{{"name", f.name}, {"ok", f.ok}};
    if (f.ok) j["tree_id"] = f.tree_id;
    else j["error"] = f.error;
    fs_json.push_back(std::move(j));
  }
  return {{"job_id", id},
          {"status", service::to_string(status)},
          {"tree_ids", tree_ids},
          {"message", message},
          {"submitted_at", submitted_at},
          {"finished_at", finished_at.empty() ? json(nullptr) : json(finished_at)},
          {"history", hist},
          {"files", fs_json}};
}

namespace {

std::string random_id(char prefix) {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  return std::string(1, prefix) + text::hex64(rng()).substr(0, 12);
}

std::string upload_path(const std::string& prefix, const std::string& name) {
  std::string safe;
  for (char c : fs::path(name).filename().string())
    safe.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ? c : '_');
  if (safe.empty() || safe.front() == '.') safe = "upload" + safe;
  return (fs::path("uploads") / (prefix + "-" + safe)).string();
}

}  // namespace

Service::Service(ServiceOptions options)
    : options_(std::move(options)),
      log_((fs::create_directories(options_.data_dir / "logs"), options_.data_dir / "logs" / "app.jsonl")),
      trees_(options_.data_dir / "trees"),
      sessions_(options_.data_dir / "sessions") {
  fs::create_directories(options_.data_dir / "uploads");
  if (options_.log_echo) log_.set_echo(options_.log_echo);
  const auto saved = options_.data_dir / "config" / "models.json";
  if (options_.config_file) {
    gateway_config_ = gateway::GatewayConfig::from_file(*options_.config_file);
  } else if (fs::exists(saved)) {
    gateway_config_ = gateway::GatewayConfig::from_file(saved);
  }
  agent_ = std::make_unique<agent::Agent>(make_gateway(gateway_config_), trees_, sessions_, &log_);
  for (std::size_t i = 0; i < std::max<std::size_t>(1, options_.workers); ++i) workers_.emplace_back([this] { worker(); });
  log_.emit("service", "started", {{"data_dir", options_.data_dir.string()}, {"trees", trees_.list().size()},
                                   {"sessions", sessions_.list().size()}});
}

Service::~Service() {
  stop();
  {
    std::lock_guard lock(jobs_mu_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  for (auto& w : workers_) w.join();
}

std::shared_ptr<const gateway::Gateway> Service::make_gateway(const gateway::GatewayConfig& cfg) const {
  return std::make_shared<const gateway::Gateway>(cfg, gateway::file_resource_resolver(options_.data_dir));
}

json Service::model_config() const {
  std::lock_guard lock(jobs_mu_);
  return gateway_config_.to_json();
}

void Service::set_model_config(const json& j) {
  auto cfg = gateway::GatewayConfig::from_json(j);
  const auto dir = options_.data_dir / "config";
  for (auto& [kind, p] : cfg.providers) {
    if (!p.endpoint.starts_with("mock://")) continue;
    fs::path script = p.endpoint.substr(7);
    if (script.is_relative()) p.endpoint = "mock://" + (dir / script).lexically_normal().string();
  }
  auto gw = make_gateway(cfg);
  fs::create_directories(dir);
  write_atomic(dir / "models.json", cfg.to_json().dump(2) + "\n");
  {
    std::lock_guard lock(jobs_mu_);
    gateway_config_ = cfg;
  }
  agent_->set_gateway(std::move(gw));
  log_.emit("service", "model_config_updated", {{"providers", cfg.to_json()}});
}

std::string Service::save_upload(const std::string& prefix, const std::string& name, const std::string& bytes) {
  const auto rel = upload_path(prefix, name);
  write_atomic(options_.data_dir / rel, bytes);
  return rel;
}

std::string Service::submit_tables(std::vector<UploadedFile> files, const BuildParams& params) {
  if (files.empty()) fail(ErrorCode::InvalidArgument, "no files uploaded");
  for (const auto& f : files)
    if (!ingest::classify_extension(f.name))
      fail(ErrorCode::UnsupportedFormat, "unsupported file type: " + (f.name.empty() ? "(unnamed)" : f.name));
  if (params.mode == t2t::BuildMode::ModelAssisted && !(params.tau > 0 && params.tau <= 1))
    fail(ErrorCode::InvalidArgument, "tau must lie in (0, 1]");
  BuildJob job;
  job.id = random_id('j');
  job.submitted_at = tree::utc_timestamp_now();
  set_status(job, JobStatus::Queued);
  std::vector<std::string> names;
  for (const auto& f : files) {
    names.push_back(f.name);
    save_upload(job.id, f.name, f.bytes);
  }
  log_.emit("jobs", "queued", {{"job_id", job.id}, {"files", names}, {"mode", t2t::to_string(params.mode)}});
  {
    std::lock_guard lock(jobs_mu_);
    jobs_[job.id] = job;
    pending_[job.id] = {std::move(files), params};
    queue_.push_back(job.id);
  }
  jobs_cv_.notify_all();
  return job.id;
}

void Service::set_status(BuildJob& job, JobStatus s) {
  job.status = s;
  job.history.emplace_back(s, tree::utc_timestamp_now());
}

BuildJob Service::job(const std::string& id) const {
  std::lock_guard lock(jobs_mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) fail(ErrorCode::JobNotFound, "unknown job " + id);
  return it->second;
}

BuildJob Service::wait_job(const std::string& id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(jobs_mu_);
  if (!jobs_.count(id)) fail(ErrorCode::JobNotFound, "unknown job " + id);
  jobs_cv_.wait_for(lock, timeout, [&] {
    const auto s = jobs_.at(id).status;
    return s == JobStatus::Succeeded || s == JobStatus::Failed;
  });
  return jobs_.at(id);
}

void Service::worker() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(jobs_mu_);
      jobs_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
    }
    process(id);
  }
}

FileOutcome Service::build_file(const std::string& job_id, const UploadedFile& f, const BuildParams& params,
                                const gateway::Gateway* gw) {
  FileOutcome out;
  out.name = f.name;
  t2t::BuildOptions opts;
  opts.mode = params.mode;
  opts.threshold = params.tau;
  try {
    t2t::BuildResult built;
    if (ingest::is_image(f.name)) {
      built = agent::extract_table_image({upload_path(job_id, f.name), f.name}, gw, opts);
    } else {
      built = t2t::build_sheets(ingest::parse_table_file(f.name, f.bytes), gw, opts);
    }
    out.tree_id = trees_.add(qa::tag_field_types(built.tree), built.report);
    out.ok = true;
    log_.emit("jobs", "file_built",
              {{"job_id", job_id}, {"file", f.name}, {"tree_id", out.tree_id},
               {"report", built.report.to_json()}});
  } catch (const Error& e) {
    out.error = std::string(straptor::to_string(e.code())) + ": " + e.what();
    log_.emit("jobs", "file_failed", {{"job_id", job_id}, {"file", f.name}, {"error", out.error}});
  } catch (const std::exception& e) {
    out.error = std::string("Internal: ") + e.what();
    log_.emit("jobs", "file_failed", {{"job_id", job_id}, {"file", f.name}, {"error", out.error}});
  }
  return out;
}

void Service::process(const std::string& id) {
  std::vector<UploadedFile> files;
  BuildParams params;
  {
    std::lock_guard lock(jobs_mu_);
    auto node = pending_.extract(id);
    files = std::move(node.mapped().first);
    params = node.mapped().second;
    set_status(jobs_.at(id), JobStatus::Running);
  }
  jobs_cv_.notify_all();
  log_.emit("jobs", "running", {{"job_id", id}});
  const auto gw = agent_->gateway();
  std::vector<FileOutcome> outcomes;
  for (const auto& f : files) outcomes.push_back(build_file(id, f, params, gw.get()));
  {
    std::lock_guard lock(jobs_mu_);
    auto& job = jobs_.at(id);
    job.files = outcomes;
    std::vector<std::string> failures;
    for (const auto& o : outcomes) {
      if (o.ok) job.tree_ids.push_back(o.tree_id);
      else failures.push_back(o.name + " (" + o.error + ")");
    }
    if (job.tree_ids.empty()) {
      job.message = "HO-Tree generation failed: " + text::join(failures, "; ");
      set_status(job, JobStatus::Failed);
    } else {
      job.message = kSuccessMessage;
      if (!failures.empty()) job.message += "; failed: " + text::join(failures, "; ");
      set_status(job, JobStatus::Succeeded);
    }
    job.finished_at = job.history.back().second;
    log_.emit("jobs", to_string(job.status), {{"job_id", id}, {"tree_ids", job.tree_ids}, {"message", job.message}});
  }
  jobs_cv_.notify_all();
}

}  // namespace straptor::service
