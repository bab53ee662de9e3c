#include "wclb/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <ostream>
#include <istream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "binary frames assume a little-endian host");

namespace wclb {

namespace {

constexpr char kMagic[4] = {'W', 'C', 'L', 'B'};
constexpr std::uint32_t kVersion = 1;

std::ostream& cell(std::ostream& os, double v) {
    os << std::setprecision(17) << v;
    return os;
}

} // namespace

void write_matrix_csv(std::ostream& os, const Mat& m,
                      const std::vector<std::string>& header) {
    for (size_t i = 0; i < header.size(); ++i)
        os << (i ? "," : "") << header[i];
    os << '\n';
    for (long r = 0; r < m.rows(); ++r) {
        for (long c = 0; c < m.cols(); ++c) {
            if (c) os << ',';
            cell(os, m(r, c));
        }
        os << '\n';
    }
}

void write_trajectory_csv(std::ostream& os, const CoupledTrajectory& traj) {
    const long d = traj.x.empty() ? 0 : traj.x.front().size();
    os << "step";
    for (long j = 0; j < d; ++j) os << ",x" << j;
    for (long j = 0; j < d; ++j) os << ",y" << j;
    os << ",distance,rho\n";
    for (size_t k = 0; k < traj.steps.size(); ++k) {
        os << traj.steps[k];
        for (long j = 0; j < d; ++j) {
            os << ',';
            cell(os, traj.x[k][j]);
        }
        for (long j = 0; j < d; ++j) {
            os << ',';
            cell(os, traj.y[k][j]);
        }
        os << ',';
        cell(os, traj.distance[k]);
        os << ',';
        cell(os, traj.rho[k]);
        os << '\n';
    }
}

void write_measures_csv(std::ostream& os, const std::vector<EmpiricalMeasure>& ms) {
    const int d = ms.empty() ? 0 : ms.front().d();
    os << "step,row";
    for (int j = 0; j < d; ++j) os << ",c" << j;
    os << '\n';
    for (const auto& m : ms) {
        for (long r = 0; r < m.n(); ++r) {
            os << m.step << ',' << r;
            for (int j = 0; j < d; ++j) {
                os << ',';
                cell(os, m.points(r, j));
            }
            os << '\n';
        }
    }
}

void write_wclb_frame(std::ostream& os, const Mat& points) {
    os.write(kMagic, 4);
    const std::uint32_t version = kVersion;
    os.write(reinterpret_cast<const char*>(&version), sizeof version);
    const std::uint64_t n = static_cast<std::uint64_t>(points.rows());
    const std::uint64_t d = static_cast<std::uint64_t>(points.cols());
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(&d), sizeof d);
    for (long r = 0; r < points.rows(); ++r)
        for (long c = 0; c < points.cols(); ++c) {
            const double v = points(r, c);
            os.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
}

Mat read_matrix_csv(std::istream& is) {
    std::string line;
    std::vector<std::vector<double>> rows;
    long cols = -1;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            // A header row is any row whose first cell is not a number.
            char* end = nullptr;
            (void)std::strtod(line.c_str(), &end);
            if (end == line.c_str()) continue;
        }
        std::vector<double> row;
        const char* p = line.c_str();
        while (*p != '\0') {
            char* end = nullptr;
            const double v = std::strtod(p, &end);
            if (end == p) throw std::runtime_error("csv: non-numeric cell in '" + line + "'");
            row.push_back(v);
            p = end;
            while (*p == ' ' || *p == '\t') ++p;
            if (*p == ',') ++p;
            else if (*p != '\0') throw std::runtime_error("csv: unexpected character in '" + line + "'");
        }
        if (cols == -1) cols = static_cast<long>(row.size());
        if (static_cast<long>(row.size()) != cols)
            throw std::runtime_error("csv: ragged row in '" + line + "'");
        rows.push_back(std::move(row));
    }
    if (rows.empty() || cols <= 0) throw std::runtime_error("csv: no data rows");
    Mat out(static_cast<long>(rows.size()), cols);
    for (size_t r = 0; r < rows.size(); ++r)
        for (long c = 0; c < cols; ++c) out(static_cast<long>(r), c) = rows[r][static_cast<size_t>(c)];
    return out;
}

Mat read_wclb_frame(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("binary frame: bad magic");
    std::uint32_t version = 0;
    if (!is.read(reinterpret_cast<char*>(&version), sizeof version) ||
        version != kVersion)
        throw std::runtime_error("binary frame: unsupported version");
    std::uint64_t n = 0, d = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    is.read(reinterpret_cast<char*>(&d), sizeof d);
    if (!is) throw std::runtime_error("binary frame: truncated header");
    if (n > (1ull << 32) || d > (1ull << 20))
        throw std::runtime_error("binary frame: implausible dimensions");
    Mat out(static_cast<long>(n), static_cast<long>(d));
    for (std::uint64_t r = 0; r < n; ++r)
        for (std::uint64_t c = 0; c < d; ++c) {
            double v = 0;
            if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
                throw std::runtime_error("binary frame: truncated payload");
            out(static_cast<long>(r), static_cast<long>(c)) = v;
        }
    return out;
}

} // namespace wclb
