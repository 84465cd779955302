#pragma once

#include <string>
#include <vector>

namespace rbm {

/// Header plus rows of already formatted cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  std::string to_csv() const;
};

/// Shortest round-trip-safe decimal text of v (up to 15 significant digits).
std::string fmt(double v);
std::string fmt(long long v);
inline std::string fmt(int v) { return fmt(static_cast<long long>(v)); }
inline std::string fmt(std::size_t v) { return fmt(static_cast<long long>(v)); }

std::string sha256_hex(const std::string& bytes);

/// Writes text to path, creating parent directories. Throws rbm::Error.
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace rbm
