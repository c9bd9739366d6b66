#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

#include <fmt/format.h>

namespace mspa::log {

enum class Level { debug, info, warn, error };

struct Field {
  std::string key;
  std::string value;

  template <typename T>
  Field(std::string k, const T& v) : key(std::move(k)) {
    if constexpr (std::is_convertible_v<const T&, std::string_view>) {
      value = std::string(std::string_view(v));
    } else {
      value = fmt::format("{}", v);
    }
  }
};

// One line per event on stderr: `level event=name key=value ...`. Values
// containing spaces, quotes or '=' are double-quoted with escapes.
void write(Level level, std::string_view event, std::initializer_list<Field> fields = {});

inline void debug(std::string_view e, std::initializer_list<Field> f = {}) { write(Level::debug, e, f); }
inline void info(std::string_view e, std::initializer_list<Field> f = {}) { write(Level::info, e, f); }
inline void warn(std::string_view e, std::initializer_list<Field> f = {}) { write(Level::warn, e, f); }
inline void error(std::string_view e, std::initializer_list<Field> f = {}) { write(Level::error, e, f); }

void set_min_level(Level level);
// nullptr restores stderr.
void set_sink(std::ostream* sink);

std::string format_line(Level level, std::string_view event, std::initializer_list<Field> fields);

}  // namespace mspa::log
