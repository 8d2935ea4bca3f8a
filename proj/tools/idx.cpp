#include "idx.hpp"

#include "cli_error.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

namespace c2st::cli {

namespace {

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace

IdxFile parse_idx(const std::vector<std::uint8_t>& bytes, std::uint32_t expected_magic, const std::string& origin) {
  if (bytes.size() < 4) raise(C2ST_ERR_TRUNCATED, origin + ": shorter than the 4-byte magic");
  IdxFile f;
  f.magic = be32(bytes, 0);
  if (f.magic != expected_magic) {
    raise(C2ST_ERR_MAGIC_MISMATCH,
          origin + ": magic " + std::to_string(f.magic) + ", expected " + std::to_string(expected_magic));
  }
  const std::size_t ndim = f.magic == kIdxImageMagic ? 3 : 1;
  if (bytes.size() < 4 + 4 * ndim) raise(C2ST_ERR_TRUNCATED, origin + ": header truncated");
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    f.dims.push_back(be32(bytes, 4 + 4 * i));
    count *= f.dims.back();
  }
  const std::size_t start = 4 + 4 * ndim;
  if (bytes.size() - start < count) {
    raise(C2ST_ERR_TRUNCATED, origin + ": payload has " + std::to_string(bytes.size() - start) + " bytes, header promises " +
                                  std::to_string(count));
  }
  f.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                   bytes.begin() + static_cast<std::ptrdiff_t>(start + count));
  return f;
}

IdxFile read_idx_file(const std::string& path, std::uint32_t expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(C2ST_ERR_IO, "cannot open '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes, expected_magic, path);
}

IdxDataset load_idx(const IdxFile& images, const IdxFile& labels, const std::optional<std::vector<int>>& classes) {
  if (images.magic != kIdxImageMagic || labels.magic != kIdxLabelMagic) {
    raise(C2ST_ERR_MAGIC_MISMATCH, "expected an image file (2051) and a label file (2049)");
  }
  const std::size_t n = images.dims[0];
  if (labels.dims[0] != n) {
    raise(C2ST_ERR_COUNT_MISMATCH,
          std::to_string(n) + " images but " + std::to_string(labels.dims[0]) + " labels");
  }
  IdxDataset d;
  d.cols = std::size_t{images.dims[1]} * images.dims[2];
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels.payload[i];
    if (classes && std::find(classes->begin(), classes->end(), label) == classes->end()) continue;
    for (std::size_t j = 0; j < d.cols; ++j) d.values.push_back(images.payload[i * d.cols + j] / 255.0);
    d.labels.push_back(static_cast<std::uint8_t>(label));
    ++d.rows;
  }
  return d;
}

IdxDataset read_idx(const std::string& images_path, const std::string& labels_path,
                    const std::optional<std::vector<int>>& classes) {
  return load_idx(read_idx_file(images_path, kIdxImageMagic), read_idx_file(labels_path, kIdxLabelMagic), classes);
}

}  // namespace c2st::cli
