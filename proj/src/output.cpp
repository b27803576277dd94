#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hardylab/cli_io.hpp"
#include "hardylab/error.hpp"

namespace hardylab {
namespace {

void dump_value(const nlohmann::json& j, int indent, int depth, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad + nlohmann::json(it.key()).dump() + ": ";
                dump_value(it.value(), indent, depth + 1, out);
            }
            out += "\n" + close_pad + "}";
            return;
        }
        case nlohmann::json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i > 0) out += ",\n";
                out += pad;
                dump_value(j[i], indent, depth + 1, out);
            }
            out += "\n" + close_pad + "]";
            return;
        }
        case nlohmann::json::value_t::number_float: {
            const double x = j.get<double>();
            out += std::isfinite(x) ? format_number(x) : "null";
            return;
        }
        default:
            out += j.dump();
    }
}

}  // namespace

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string dump_json(const nlohmann::json& j, int indent) {
    std::string out;
    dump_value(j, indent, 0, out);
    out += "\n";
    return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << content;
        os.flush();
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string field_csv(const Grid& grid, const Field& u) {
    if (u.size() != grid.num_interior()) throw PreconditionError("field_csv: field size does not match grid");
    std::string out = "r,theta,value\n";
    for (int k = 0; k < grid.num_interior(); ++k) {
        const auto [i, j] = grid.node(k);
        out += format_number(grid.r(i)) + "," + format_number(grid.theta(j)) + "," + format_number(u[k]) + "\n";
    }
    return out;
}

std::string boundary_csv(const std::vector<double>& times, const Eigen::MatrixXd& values) {
    if (static_cast<Eigen::Index>(times.size()) != values.rows()) {
        throw PreconditionError("boundary_csv: one time per row is required");
    }
    std::string out = "t,face_id,value\n";
    for (Eigen::Index n = 0; n < values.rows(); ++n) {
        const std::string t = format_number(times[static_cast<std::size_t>(n)]) + ",";
        for (Eigen::Index f = 0; f < values.cols(); ++f) {
            out += t + std::to_string(f) + "," + format_number(values(n, f)) + "\n";
        }
    }
    return out;
}

std::string series_csv(const std::vector<double>& times, const std::vector<double>& energy,
                       const std::vector<double>& mass) {
    if (times.size() != energy.size() || times.size() != mass.size()) {
        throw PreconditionError("series_csv: series lengths differ");
    }
    std::string out = "t,energy,mass\n";
    for (std::size_t n = 0; n < times.size(); ++n) {
        out += format_number(times[n]) + "," + format_number(energy[n]) + "," + format_number(mass[n]) + "\n";
    }
    return out;
}

std::string content_hash(std::string_view text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace hardylab
