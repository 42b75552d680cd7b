#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "parcelforge/dataset.hpp"

namespace parcelforge::io {

namespace fs = std::filesystem;

/// Raw little-endian float64, row-major.
void write_f64(const fs::path& path, const Matrix& m);
/// Reads a row-major float64 file with a known column count.
Matrix read_f64(const fs::path& path, Eigen::Index cols);

struct CsvTable {
    std::vector<std::string> header;
    Matrix values;
};
void write_csv(const fs::path& path, const std::vector<std::string>& header, const Matrix& m);
CsvTable read_csv(const fs::path& path);

std::vector<std::uint32_t> mask_to_rle(const std::vector<std::uint8_t>& mask);
std::vector<std::uint8_t> rle_to_mask(const std::vector<std::uint32_t>& runs, std::size_t cells);

/// Dataset directory: grid.json, X.f64 and optionally design.csv.
void save_dataset(const fs::path& dir, const BoldDataset& data, const DesignMatrix* design = nullptr);
BoldDataset load_dataset(const fs::path& dir);
std::optional<DesignMatrix> load_design(const fs::path& dir);

/// CRC-32 of a file's bytes, as 8 hex digits.
std::string file_checksum(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace parcelforge::io
