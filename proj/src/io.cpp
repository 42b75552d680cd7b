#include "parcelforge/io.hpp"

#include <bit>
#include <boost/crc.hpp>
#include <cstring>
#include <fstream>
#include <iomanip>
#include "json.hpp"
#include <sstream>

#include "parcelforge/error.hpp"

namespace parcelforge::io {

static_assert(std::endian::native == std::endian::little, "f64 files are written in host byte order");

namespace {

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void write_f64(const fs::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
}

Matrix read_f64(const fs::path& path, Eigen::Index cols) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (cols <= 0 || bytes % (sizeof(double) * static_cast<std::size_t>(cols)) != 0)
        throw ShapeError(path.string() + ": size " + std::to_string(bytes) + " bytes is not a multiple of " +
                         std::to_string(cols) + " float64 columns");
    const auto rows = static_cast<Eigen::Index>(bytes / (sizeof(double) * static_cast<std::size_t>(cols)));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(bytes));
    return rm;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
        out << '\n';
    }
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    CsvTable t;
    t.header = split_csv_line(line);
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != t.header.size())
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
        std::vector<double> row;
        for (const auto& c : cells) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(c, &used));
                if (used != c.size()) throw std::invalid_argument(c);
            } catch (const std::exception&) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return t;
}

std::vector<std::uint32_t> mask_to_rle(const std::vector<std::uint8_t>& mask) {
    // Alternating run lengths, starting with a (possibly empty) run of false.
    std::vector<std::uint32_t> runs;
    std::uint8_t state = 0;
    std::uint32_t len = 0;
    for (auto m : mask) {
        const std::uint8_t v = m ? 1 : 0;
        if (v != state) {
            runs.push_back(len);
            state = v;
            len = 0;
        }
        ++len;
    }
    runs.push_back(len);
    return runs;
}

std::vector<std::uint8_t> rle_to_mask(const std::vector<std::uint32_t>& runs, std::size_t cells) {
    std::vector<std::uint8_t> mask;
    mask.reserve(cells);
    std::uint8_t state = 0;
    for (auto len : runs) {
        mask.insert(mask.end(), len, state);
        state ^= 1;
    }
    if (mask.size() != cells)
        throw FormatError("mask_rle covers " + std::to_string(mask.size()) + " cells, grid has " + std::to_string(cells));
    return mask;
}

void save_dataset(const fs::path& dir, const BoldDataset& data, const DesignMatrix* design) {
    fs::create_directories(dir);
    const auto& g = data.grid();
    nlohmann::ordered_json j;
    j["dims"] = {g.dims()[0], g.dims()[1], g.dims()[2]};
    j["mask_rle"] = mask_to_rle(g.mask());
    j["n_timepoints"] = data.n_timepoints();
    j["tr_seconds"] = data.tr_seconds();
    write_text(dir / "grid.json", j.dump(2) + "\n");
    write_f64(dir / "X.f64", data.X());
    if (design) write_csv(dir / "design.csv", design->names, design->Y);
}

BoldDataset load_dataset(const fs::path& dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(dir / "grid.json"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError((dir / "grid.json").string() + ": " + e.what());
    }
    for (const char* key : {"dims", "mask_rle", "n_timepoints", "tr_seconds"})
        if (!j.contains(key)) throw FormatError((dir / "grid.json").string() + ": missing field '" + key + "'");
    const auto d = j["dims"].get<std::vector<int>>();
    if (d.size() != 3) throw FormatError("grid.json: dims must have 3 entries");
    const Coord dims{d[0], d[1], d[2]};
    const std::size_t cells = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    VolumeGrid grid(dims, rle_to_mask(j["mask_rle"].get<std::vector<std::uint32_t>>(), cells));
    Matrix X = read_f64(dir / "X.f64", j["n_timepoints"].get<Eigen::Index>());
    return BoldDataset(std::move(grid), std::move(X), j["tr_seconds"].get<double>());
}

std::optional<DesignMatrix> load_design(const fs::path& dir) {
    if (!fs::exists(dir / "design.csv")) return std::nullopt;
    auto t = read_csv(dir / "design.csv");
    return DesignMatrix(std::move(t.values), std::move(t.header));
}

std::string file_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    boost::crc_32_type crc;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        crc.process_bytes(buf, static_cast<std::size_t>(in.gcount()));
    }
    std::ostringstream os;
    os << std::hex << std::setw(8) << std::setfill('0') << crc.checksum();
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace parcelforge::io
