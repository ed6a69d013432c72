#include "tokrl/jsonl.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "tokrl/errors.hpp"

namespace tokrl {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open file for writing: " + path);
  out << content;
  require(out.good(), "write failed: " + path);
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path);
  std::vector<nlohmann::json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ValidationError(path + ": line " + std::to_string(lineno) + ": malformed JSON");
    rows.push_back(std::move(j));
  }
  return rows;
}

void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& rows) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open file for writing: " + path);
  for (const auto& r : rows) out << r.dump() << "\n";
  require(out.good(), "write failed: " + path);
}

std::string bytes_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string content_hash(const std::string& path) { return bytes_hash(read_file(path)); }

}  // namespace tokrl
