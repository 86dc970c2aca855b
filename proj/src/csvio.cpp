#include "tap/csvio.hpp"

#include <cmath>
#include <ctime>
#include <sstream>
#include <stdexcept>

namespace tap {

CsvWriter::CsvWriter(const std::string& path, const std::string& header_json) {
    out_.open(path);
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
    out_ << "# " << header_json << "\n";
    std::time_t now = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out_ << "# generated: " << buf << "\n";
}

void CsvWriter::comment(const std::string& line) { out_ << "# " << line << "\n"; }

void CsvWriter::columns(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) out_ << (i ? "," : "") << names[i];
    out_ << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
}

std::string CsvWriter::quote(const std::string& s) {
    std::string r = "\"";
    for (char c : s) {
        if (c == '"') r += "\"\"";
        else r += c;
    }
    r += "\"";
    return r;
}

std::string CsvWriter::num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace tap
