// csv.hpp — small RFC-4180-style CSV reader/writer (UTF-8, header row).
#pragma once

#include <string>
#include <vector>

namespace ctrl::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_file(const std::string& path);

std::string escape(const std::string& field);

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

}  // namespace ctrl::csv
