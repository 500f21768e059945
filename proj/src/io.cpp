#include "mgt/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mgt/errors.hpp"

namespace mgt {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

namespace {

std::string encode_le(const Eigen::MatrixXd& m) {
    std::string bytes(static_cast<std::size_t>(m.size()) * 8, '\0');
    std::size_t o = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j, o += 8) {
            std::uint64_t u;
            const double v = m(i, j);
            std::memcpy(&u, &v, 8);
            if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
            std::memcpy(bytes.data() + o, &u, 8);
        }
    return bytes;
}

fs::path with_suffix(const fs::path& base, const char* ext) {
    fs::path p = base;
    p += ext;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw IoError("short write on " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::vector<fs::path> write_field(const fs::path& base, const Eigen::MatrixXd& m, const nlohmann::json& meta) {
    const std::string bytes = encode_le(m);
    nlohmann::ordered_json side;
    side["rows"] = m.rows();
    side["cols"] = m.cols();
    side["dtype"] = "float64";
    side["byte_order"] = "little";
    side["layout"] = "row-major";
    side["sha256"] = sha256_hex(bytes);
    side["meta"] = meta;
    const fs::path bin = with_suffix(base, ".bin"), js = with_suffix(base, ".json");
    write_text(bin, bytes);
    write_text(js, side.dump(2) + "\n");
    return {bin, js};
}

Eigen::MatrixXd read_field(const fs::path& base) {
    nlohmann::json side;
    try {
        side = nlohmann::json::parse(slurp(with_suffix(base, ".json")));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad sidecar: ") + e.what());
    }
    const std::string bytes = slurp(with_suffix(base, ".bin"));
    const auto rows = side.at("rows").get<Eigen::Index>(), cols = side.at("cols").get<Eigen::Index>();
    if (static_cast<std::size_t>(rows * cols) * 8 != bytes.size()) throw IoError("field size does not match sidecar");
    if (sha256_hex(bytes) != side.at("sha256").get<std::string>()) throw IoError("field checksum mismatch");
    Eigen::MatrixXd m(rows, cols);
    std::size_t o = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j, o += 8) {
            std::uint64_t u;
            std::memcpy(&u, bytes.data() + o, 8);
            if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
            std::memcpy(&m(i, j), &u, 8);
        }
    return m;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void CsvTable::add(std::vector<Cell> row) {
    if (!header.empty() && row.size() != header.size()) throw ShapeMismatch("CSV row width differs from header");
    rows.push_back(std::move(row));
}

std::string CsvTable::render() const {
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    };
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + quote(header[i]);
    out += "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out += ",";
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>)
                        out += format_double(v);
                    else if constexpr (std::is_same_v<T, long long>)
                        out += std::to_string(v);
                    else
                        out += quote(v);
                },
                r[i]);
        }
        out += "\n";
    }
    return out;
}

void write_csv(const fs::path& path, const CsvTable& table) { write_text(path, table.render()); }

}  // namespace mgt
