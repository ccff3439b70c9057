#include "regfuse/io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "regfuse/error.hpp"

namespace regfuse::io {
namespace {

bool skippable(std::string_view line) {
    const auto first = line.find_first_not_of(" \t\r");
    return first == std::string_view::npos || line[first] == '#';
}

// Parses whitespace-separated doubles; returns the count, or -1 on garbage.
int parse_numbers(std::string_view line, double* out, int max_count) {
    int count = 0;
    std::size_t pos = 0;
    while (true) {
        pos = line.find_first_not_of(" \t\r,", pos);
        if (pos == std::string_view::npos) break;
        if (count == max_count) return -1;
        const char* begin = line.data() + pos;
        const char* end = line.data() + line.size();
        if (*begin == '+') ++begin;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc() || (ptr != end && *ptr != ' ' && *ptr != '\t' && *ptr != '\r' && *ptr != ',')) {
            return -1;
        }
        out[count++] = v;
        pos = static_cast<std::size_t>(ptr - line.data());
    }
    return count;
}

void append_number(std::string& s, double v, int precision) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, precision);
    if (ec != std::errc()) throw FormatError("failed to format number");
    s.append(buf.data(), ptr);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    return in;
}

}  // namespace

PointCloud read_cloud(std::istream& in) {
    std::vector<Vec3> pts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skippable(line)) continue;
        double v[3];
        if (parse_numbers(line, v, 3) != 3) {
            throw FormatError("malformed point on line " + std::to_string(line_no));
        }
        pts.emplace_back(v[0], v[1], v[2]);
    }
    try {
        return PointCloud(std::move(pts));
    } catch (const InvalidInput& e) {
        throw FormatError(e.what());
    }
}

PointCloud read_cloud(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return read_cloud(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_cloud(std::ostream& out, const PointCloud& cloud) {
    std::string s;
    s.reserve(cloud.size() * 64);
    for (const auto& p : cloud) {
        append_number(s, p.x(), 17);
        s += ' ';
        append_number(s, p.y(), 17);
        s += ' ';
        append_number(s, p.z(), 17);
        s += '\n';
    }
    out << s;
}

RigidTransform read_transform(std::istream& in) {
    Mat4 m;
    int row = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (skippable(line)) continue;
        if (row == 4) throw FormatError("transform has more than 4 rows");
        double v[4];
        if (parse_numbers(line, v, 4) != 4) throw FormatError("transform row must hold 4 numbers");
        for (int c = 0; c < 4; ++c) m(row, c) = v[c];
        ++row;
    }
    if (row != 4) throw FormatError("transform needs 4 rows");
    try {
        return RigidTransform::from_matrix(m);
    } catch (const InvalidInput& e) {
        throw FormatError(e.what());
    }
}

RigidTransform read_transform(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return read_transform(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_transform(std::ostream& out, const RigidTransform& t) {
    const Mat4 m = t.matrix();
    std::string s;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            if (c) s += ' ';
            append_number(s, m(r, c), 17);
        }
        s += '\n';
    }
    out << s;
}

std::vector<bool> read_mask(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<bool> mask;
    std::string line;
    while (std::getline(in, line)) {
        if (skippable(line)) continue;
        const auto first = line.find_first_not_of(" \t");
        const auto last = line.find_last_not_of(" \t\r");
        const std::string_view tok(line.data() + first, last - first + 1);
        if (tok == "0") {
            mask.push_back(false);
        } else if (tok == "1") {
            mask.push_back(true);
        } else {
            throw FormatError(path.string() + ": mask entries must be 0 or 1");
        }
    }
    return mask;
}

void write_mask(std::ostream& out, const std::vector<bool>& mask) {
    std::string s;
    s.reserve(mask.size() * 2);
    for (bool b : mask) {
        s += b ? '1' : '0';
        s += '\n';
    }
    out << s;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw FormatError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw FormatError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_csv_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
    std::ostringstream ss;
    write_cloud(ss, cloud);
    write_file_atomic(path, ss.str());
}

void save_transform(const std::filesystem::path& path, const RigidTransform& t) {
    std::ostringstream ss;
    write_transform(ss, t);
    write_file_atomic(path, ss.str());
}

void save_mask(const std::filesystem::path& path, const std::vector<bool>& mask) {
    std::ostringstream ss;
    write_mask(ss, mask);
    write_file_atomic(path, ss.str());
}

}  // namespace regfuse::io
