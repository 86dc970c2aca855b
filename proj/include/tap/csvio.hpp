#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace tap {

// CSV writer with a commented JSON provenance header.  Bodies are
// deterministic; the timestamp is isolated on its own comment line so
// byte-comparisons can strip it.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& header_json);
    void comment(const std::string& line);
    void columns(const std::vector<std::string>& names);
    void row(const std::vector<std::string>& cells);
    static std::string quote(const std::string& s);
    static std::string num(double v);

private:
    std::ofstream out_;
};

std::uint64_t fnv1a(const std::string& s);

}  // namespace tap
