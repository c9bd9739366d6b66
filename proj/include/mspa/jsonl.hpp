#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mspa/error.hpp"

namespace mspa {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

// One compact JSON document per line, '\n' terminated.
template <typename T>
std::string encode_jsonl(const std::vector<T>& records) {
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  return out;
}

template <typename T>
std::vector<T> decode_jsonl(const std::string& bytes, const std::string& source = "<memory>") {
  std::vector<T> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) end = bytes.size();
    ++line_no;
    std::string_view line(bytes.data() + pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<T>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  return decode_jsonl<T>(read_file(path), path.string());
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& records) {
  write_file(path, encode_jsonl(records));
}

}  // namespace mspa
