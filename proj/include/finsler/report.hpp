#pragma once

/// \file report.hpp
/// Deterministic report serialization. The JSON writer emits keys in
/// insertion order and formats every floating-point number with 17
/// significant digits, so identical inputs produce byte-identical files.
/// Output files are written atomically (temp file + rename).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace finsler {

class JsonWriter {
 public:
  JsonWriter& begin_object() {
    comma();
    out_ += '{';
    stack_.push_back(true);
    return *this;
  }
  JsonWriter& end_object() {
    out_ += '}';
    stack_.pop_back();
    return *this;
  }
  JsonWriter& begin_array() {
    comma();
    out_ += '[';
    stack_.push_back(true);
    return *this;
  }
  JsonWriter& end_array() {
    out_ += ']';
    stack_.pop_back();
    return *this;
  }
  JsonWriter& key(const std::string& name) {
    comma();
    append_string(name);
    out_ += ':';
    pending_value_ = true;
    return *this;
  }
  JsonWriter& value(double v) {
    comma();
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out_ += buf;
    return *this;
  }
  JsonWriter& value(long long v) {
    comma();
    out_ += std::to_string(v);
    return *this;
  }
  JsonWriter& value(int v) { return value(static_cast<long long>(v)); }
  JsonWriter& value(bool v) {
    comma();
    out_ += v ? "true" : "false";
    return *this;
  }
  JsonWriter& value(const std::string& v) {
    comma();
    append_string(v);
    return *this;
  }
  JsonWriter& value(const char* v) { return value(std::string(v)); }
  template <class T>
  JsonWriter& array_of(const std::vector<T>& vs) {
    begin_array();
    for (const auto& v : vs) value(v);
    return end_array();
  }

  const std::string& str() const { return out_; }

 private:
  void comma() {
    if (pending_value_) {
      pending_value_ = false;
      return;
    }
    if (!stack_.empty()) {
      if (!stack_.back()) out_ += ',';
      stack_.back() = false;
    }
  }
  void append_string(const std::string& s) {
    out_ += '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        case '\r': out_ += "\\r"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += c;
          }
      }
    }
    out_ += '"';
  }

  std::string out_;
  std::vector<bool> stack_;  // true = container still empty
  bool pending_value_ = false;
};

/// CSV table with a fixed column layout; floats at 17 significant digits.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) out_ += ',';
      out_ += columns_[i];
    }
    out_ += '\n';
  }
  void row(const std::vector<double>& values) {
    if (values.size() != columns_.size())
      throw std::invalid_argument("CsvWriter: column count mismatch");
    char buf[40];
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ += ',';
      std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
      out_ += buf;
    }
    out_ += '\n';
  }
  const std::string& str() const { return out_; }

 private:
  std::vector<std::string> columns_;
  std::string out_;
};

/// Atomic write: data lands under the target name only if complete.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace finsler
