#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace tokrl {

// Parses one JSON object per line; errors cite the 1-based line number.
std::vector<nlohmann::json> read_jsonl(const std::string& path);

void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& rows);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// FNV-1a over file bytes, hex-encoded.  Used for manifest content hashes.
std::string content_hash(const std::string& path);
std::string bytes_hash(const std::string& bytes);

}  // namespace tokrl
