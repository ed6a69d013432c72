#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tokrl {

struct ManifestEntry {
  std::string path;  // relative to the run directory
  std::string hash;  // empty only for manifest.json itself
  std::uint64_t bytes = 0;
};

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string created_at;                            // ISO-8601 UTC
  std::map<std::string, std::string> input_hashes;   // input path -> content hash
  std::vector<ManifestEntry> outputs;
};

// Run directory holding one command's artifacts.  finalize() writes
// config.snapshot, scans every file in the directory, and writes
// manifest.json listing them all (itself included, hashless: a file cannot
// contain its own digest).
class RunDir {
 public:
  // Creates dir (parents included); refuses an existing non-empty dir unless
  // overwrite is set.
  RunDir(const std::string& dir, std::string command, std::uint64_t seed, bool overwrite = true);

  const std::string& path() const { return dir_; }
  std::string file(const std::string& name) const;

  void record_input(const std::string& path);     // hashes an input file
  void set_config_snapshot(const std::string& text) { config_text_ = text; }

  void finalize();

 private:
  std::string dir_;
  std::string command_;
  std::uint64_t seed_;
  std::string config_text_;
  std::map<std::string, std::string> input_hashes_;
};

RunManifest read_manifest(const std::string& path);

}  // namespace tokrl
