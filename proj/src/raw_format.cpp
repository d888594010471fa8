#include "raw_format.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ppcreg/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "the raw file format assumes a little-endian host");
static_assert(sizeof(float) == 4);

namespace ppcreg::detail {

namespace {

std::vector<double> parse_numbers(const std::string& text, std::size_t expect, long offset,
                                  const std::string& key) {
    std::istringstream ss(text);
    std::vector<double> out;
    double v;
    while (ss >> v) out.push_back(v);
    if (!ss.eof() || out.size() != expect)
        throw FormatError("header key '" + key + "' expects " + std::to_string(expect) +
                              " numeric values",
                          offset);
    for (double x : out)
        if (!std::isfinite(x)) throw FormatError("non-finite value for key '" + key + "'", offset);
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

RawFile read_raw_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");

    RawFile file;
    bool have_dims = false, have_spacing = false, have_origin = false, have_dtype = false,
         have_order = false;

    long offset = 0;
    std::string line;
    while (true) {
        const long line_offset = offset;
        if (!std::getline(in, line))
            throw FormatError("unexpected end of header", line_offset);
        offset += static_cast<long>(line.size()) + 1;
        if (line.empty()) break; // blank line terminates the header

        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw FormatError("header line has no 'key: value' separator", line_offset);
        const std::string key = line.substr(0, colon);
        std::string value = line.substr(colon + 1);
        if (!value.empty() && value.front() == ' ') value.erase(0, 1);

        if (key == "dims") {
            const auto v = parse_numbers(value, 3, line_offset, key);
            for (int a = 0; a < 3; ++a) {
                if (v[static_cast<std::size_t>(a)] < 1 ||
                    v[static_cast<std::size_t>(a)] != std::floor(v[static_cast<std::size_t>(a)]))
                    throw FormatError("dims must be positive integers", line_offset);
                file.header.dims[static_cast<std::size_t>(a)] =
                    static_cast<int>(v[static_cast<std::size_t>(a)]);
            }
            have_dims = true;
        } else if (key == "spacing") {
            const auto v = parse_numbers(value, 3, line_offset, key);
            file.header.spacing = {v[0], v[1], v[2]};
            have_spacing = true;
        } else if (key == "origin") {
            const auto v = parse_numbers(value, 3, line_offset, key);
            file.header.origin = {v[0], v[1], v[2]};
            have_origin = true;
        } else if (key == "dtype") {
            if (value != "float32") throw FormatError("unsupported dtype '" + value + "'", line_offset);
            have_dtype = true;
        } else if (key == "byte_order") {
            if (value != "little")
                throw FormatError("unsupported byte_order '" + value + "'", line_offset);
            have_order = true;
        } else if (key == "style") {
            file.header.style = value;
        } else {
            throw FormatError("unknown header key '" + key + "'", line_offset);
        }
    }

    if (!have_dims || !have_spacing || !have_origin || !have_dtype || !have_order)
        throw FormatError("header is missing required keys", offset);

    const std::size_t count = static_cast<std::size_t>(file.header.dims[0]) *
                              static_cast<std::size_t>(file.header.dims[1]) *
                              static_cast<std::size_t>(file.header.dims[2]);
    file.data.resize(count);
    in.read(reinterpret_cast<char*>(file.data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    const std::size_t got = static_cast<std::size_t>(in.gcount());
    if (got != count * sizeof(float))
        throw FormatError("data section ends early: expected " +
                              std::to_string(count * sizeof(float)) + " bytes, found " +
                              std::to_string(got),
                          offset + static_cast<long>(got));
    // Exactly one payload, nothing trailing.
    char extra;
    if (in.read(&extra, 1))
        throw FormatError("trailing bytes after data section",
                          offset + static_cast<long>(count * sizeof(float)));

    for (std::size_t i = 0; i < count; ++i)
        if (!std::isfinite(file.data[i]))
            throw FormatError("non-finite data value at element " + std::to_string(i),
                              offset + static_cast<long>(i * sizeof(float)));
    return file;
}

void write_raw_file(const std::filesystem::path& path, const RawHeader& header,
                    const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");

    out << "dims: " << header.dims[0] << ' ' << header.dims[1] << ' ' << header.dims[2] << '\n';
    out << "spacing: " << format_double(header.spacing.x()) << ' '
        << format_double(header.spacing.y()) << ' ' << format_double(header.spacing.z()) << '\n';
    out << "origin: " << format_double(header.origin.x()) << ' '
        << format_double(header.origin.y()) << ' ' << format_double(header.origin.z()) << '\n';
    out << "dtype: float32\n";
    out << "byte_order: little\n";
    if (header.style) out << "style: " << *header.style << '\n';
    out << '\n';
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

} // namespace ppcreg::detail
