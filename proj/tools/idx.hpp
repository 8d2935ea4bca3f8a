#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace c2st::cli {

inline constexpr std::uint32_t kIdxLabelMagic = 2049;
inline constexpr std::uint32_t kIdxImageMagic = 2051;

struct IdxFile {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;
};

// Big-endian magic and dimension sizes, then raw unsigned bytes.
IdxFile parse_idx(const std::vector<std::uint8_t>& bytes, std::uint32_t expected_magic, const std::string& origin);
IdxFile read_idx_file(const std::string& path, std::uint32_t expected_magic);

struct IdxDataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major, scaled to [0, 1]
  std::vector<std::uint8_t> labels;
};

// Images flattened row-major at 1/255 per unit; keeps only the listed classes when given.
IdxDataset read_idx(const std::string& images_path, const std::string& labels_path,
                    const std::optional<std::vector<int>>& classes = std::nullopt);
IdxDataset load_idx(const IdxFile& images, const IdxFile& labels,
                    const std::optional<std::vector<int>>& classes = std::nullopt);

}  // namespace c2st::cli
