#include "mspa/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace mspa::log {

namespace {

std::atomic<Level> g_min{Level::info};
std::ostream* g_sink = nullptr;
std::mutex g_mutex;

const char* name(Level l) {
  switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
  }
  return "info";
}

void append_value(std::string& out, std::string_view v) {
  const bool quote = v.empty() || v.find_first_of(" \t\n\"=") != std::string_view::npos;
  if (!quote) {
    out += v;
    return;
  }
  out += '"';
  for (char c : v) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  out += '"';
}

}  // namespace

std::string format_line(Level level, std::string_view event, std::initializer_list<Field> fields) {
  std::string line = name(level);
  line += " event=";
  append_value(line, event);
  for (const auto& f : fields) {
    line += ' ';
    line += f.key;
    line += '=';
    append_value(line, f.value);
  }
  return line;
}

void write(Level level, std::string_view event, std::initializer_list<Field> fields) {
  if (level < g_min.load()) return;
  const auto line = format_line(level, event, fields);
  std::lock_guard lock(g_mutex);
  (g_sink ? *g_sink : std::cerr) << line << '\n';
}

void set_min_level(Level level) { g_min.store(level); }

void set_sink(std::ostream* sink) {
  std::lock_guard lock(g_mutex);
  g_sink = sink;
}

}  // namespace mspa::log
