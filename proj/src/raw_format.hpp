#pragma once

// Internal reader/writer for the shared "text header + raw float32" file
// format used by volumes and images. Not installed.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ppcreg::detail {

struct RawHeader {
    std::array<int, 3> dims{};
    Eigen::Vector3d spacing;
    Eigen::Vector3d origin;
    std::optional<std::string> style; // only present in image files
};

struct RawFile {
    RawHeader header;
    std::vector<float> data;
};

/// Parses header + payload. Throws FormatError with the byte offset of the
/// first offending header line or of the data-length mismatch.
RawFile read_raw_file(const std::filesystem::path& path);

void write_raw_file(const std::filesystem::path& path, const RawHeader& header,
                    const std::vector<float>& data);

} // namespace ppcreg::detail
