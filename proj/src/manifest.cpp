#include "tokrl/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>

#include <json.hpp>

#include "tokrl/errors.hpp"
#include "tokrl/jsonl.hpp"

namespace fs = std::filesystem;

namespace tokrl {

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunDir::RunDir(const std::string& dir, std::string command, std::uint64_t seed, bool overwrite)
    : dir_(dir), command_(std::move(command)), seed_(seed) {
  require(!dir_.empty(), "run directory path is empty");
  fs::path p(dir_);
  if (fs::exists(p)) {
    require(fs::is_directory(p), "run directory path exists and is not a directory: " + dir_);
    if (!fs::is_empty(p)) {
      require(overwrite, "run directory is not empty: " + dir_);
      for (const auto& entry : fs::directory_iterator(p)) fs::remove_all(entry.path());
    }
  } else {
    fs::create_directories(p);
  }
}

std::string RunDir::file(const std::string& name) const {
  return (fs::path(dir_) / name).string();
}

void RunDir::record_input(const std::string& path) {
  input_hashes_[path] = content_hash(path);
}

void RunDir::finalize() {
  write_file(file("config.snapshot"), config_text_);
  nlohmann::json j;
  j["command"] = command_;
  j["seed"] = seed_;
  j["created_at"] = utc_now();
  j["inputs"] = input_hashes_;
  j["outputs"] = nlohmann::json::array();

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir_))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    nlohmann::json e;
    e["path"] = fs::relative(f, dir_).generic_string();
    e["hash"] = content_hash(f.string());
    e["bytes"] = static_cast<std::uint64_t>(fs::file_size(f));
    j["outputs"].push_back(e);
  }
  nlohmann::json self;
  self["path"] = "manifest.json";
  self["hash"] = "";
  self["bytes"] = 0;
  j["outputs"].push_back(self);
  write_file(file("manifest.json"), j.dump(2) + "\n");
}

RunManifest read_manifest(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.created_at = j.at("created_at").get<std::string>();
    m.input_hashes = j.at("inputs").get<std::map<std::string, std::string>>();
    for (const auto& e : j.at("outputs")) {
      ManifestEntry entry;
      entry.path = e.at("path").get<std::string>();
      entry.hash = e.at("hash").get<std::string>();
      entry.bytes = e.at("bytes").get<std::uint64_t>();
      m.outputs.push_back(entry);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed manifest " + path + ": " + e.what());
  }
  return m;
}

}  // namespace tokrl
