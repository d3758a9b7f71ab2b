#pragma once

// Volume and label-field persistence.
//
// Two formats are supported:
//   * MetaImage: a text header (.mhd) plus a little-endian payload
//     (.raw next to it, or LOCAL data appended after the header).
//     DimSize is written in MetaImage's native x y z order, i.e.
//     "cols rows slices"; ElementSpacing is "dx dy dz".
//   * raw + sidecar: a bare little-endian payload (.raw) and a JSON sidecar
//     with the same stem: {"dims":[rows,cols,slices],"spacing":[dx,dy,dz],
//     "dtype":"u16"}.
// Payload order is the library's storage order: j fastest, then i, then z.

#include "vertegrow/error.hpp"
#include "vertegrow/grid.hpp"
#include "vertegrow/volume.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace vertegrow {

static_assert(std::endian::native == std::endian::little,
              "payload encoding assumes a little-endian host");

enum class FileFormat : std::uint8_t { metaimage, raw_sidecar };

[[nodiscard]] inline FileFormat parse_format(std::string_view s) {
    if (s == "mhd" || s == "metaimage") return FileFormat::metaimage;
    if (s == "raw") return FileFormat::raw_sidecar;
    throw InvalidArgument("unknown file format '" + std::string(s) + "' (expected mhd or raw)");
}

/// Picks the format from the extension: .mhd -> MetaImage, .raw -> raw+sidecar.
[[nodiscard]] inline FileFormat format_from_path(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".mhd") return FileFormat::metaimage;
    if (ext == ".raw") return FileFormat::raw_sidecar;
    throw InvalidArgument("cannot infer format from '" + p.string() + "' (use .mhd or .raw)");
}

namespace detail {

// ---------------------------------------------------------------------------
// Raw payload encoding
// ---------------------------------------------------------------------------

template <class T>
void append_le(std::vector<char>& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

template <class T>
T read_le(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

/// Encodes integer-valued samples, rejecting values the element type cannot hold.
template <class Sample>
std::vector<char> encode(std::span<const Sample> values, ElementType type) {
    std::vector<char> out;
    out.reserve(values.size() * element_size(type));
    auto check = [](auto v, double lo, double hi) {
        if (static_cast<double>(v) < lo || static_cast<double>(v) > hi) {
            throw FormatError("label out of range for format (value " +
                              std::to_string(static_cast<double>(v)) + ")");
        }
    };
    for (Sample v : values) {
        switch (type) {
            case ElementType::u8:
                check(v, 0, 255);
                append_le<std::uint8_t>(out, static_cast<std::uint8_t>(v));
                break;
            case ElementType::i8:
                check(v, -128, 127);
                append_le<std::int8_t>(out, static_cast<std::int8_t>(v));
                break;
            case ElementType::u16:
                check(v, 0, 65535);
                append_le<std::uint16_t>(out, static_cast<std::uint16_t>(v));
                break;
            case ElementType::i16:
                check(v, -32768, 32767);
                append_le<std::int16_t>(out, static_cast<std::int16_t>(v));
                break;
            case ElementType::f32:
                append_le<float>(out, static_cast<float>(v));
                break;
        }
    }
    return out;
}

template <class Sample>
std::vector<Sample> decode(const std::vector<char>& bytes, ElementType type, std::size_t count) {
    std::vector<Sample> out(count);
    const std::size_t step = element_size(type);
    for (std::size_t n = 0; n < count; ++n) {
        const char* p = bytes.data() + n * step;
        switch (type) {
            case ElementType::u8:  out[n] = static_cast<Sample>(read_le<std::uint8_t>(p)); break;
            case ElementType::i8:  out[n] = static_cast<Sample>(read_le<std::int8_t>(p)); break;
            case ElementType::u16: out[n] = static_cast<Sample>(read_le<std::uint16_t>(p)); break;
            case ElementType::i16: out[n] = static_cast<Sample>(read_le<std::int16_t>(p)); break;
            case ElementType::f32: out[n] = static_cast<Sample>(read_le<float>(p)); break;
        }
    }
    return out;
}

inline std::vector<char> read_file(const std::filesystem::path& p, std::size_t offset = 0) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open '" + p.string() + "'");
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    if (offset > size) throw FormatError("payload size mismatch in '" + p.string() + "'");
    std::vector<char> bytes(size - offset);
    in.seekg(static_cast<std::streamoff>(offset));
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw IoError("failed reading '" + p.string() + "'");
    return bytes;
}

inline void write_file(const std::filesystem::path& p, std::string_view header,
                       const std::vector<char>& payload) {
    if (p.empty()) throw IoError("empty output path");
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("failed writing '" + p.string() + "'");
}

// ---------------------------------------------------------------------------
// MetaImage header
// ---------------------------------------------------------------------------

inline std::string_view metaimage_type_name(ElementType t) {
    switch (t) {
        case ElementType::u8:  return "MET_UCHAR";
        case ElementType::i8:  return "MET_CHAR";
        case ElementType::u16: return "MET_USHORT";
        case ElementType::i16: return "MET_SHORT";
        case ElementType::f32: return "MET_FLOAT";
    }
    return "";
}

inline ElementType parse_metaimage_type(const std::string& s) {
    if (s == "MET_UCHAR") return ElementType::u8;
    if (s == "MET_CHAR") return ElementType::i8;
    if (s == "MET_USHORT") return ElementType::u16;
    if (s == "MET_SHORT") return ElementType::i16;
    if (s == "MET_FLOAT") return ElementType::f32;
    throw FormatError("unsupported element type '" + s + "'");
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct RawImage {
    Dims dims;
    Spacing spacing;
    ElementType type = ElementType::u8;
    std::vector<char> payload;
};

inline RawImage read_metaimage(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");

    RawImage img;
    bool have_ndims = false, have_dims = false, have_type = false;
    std::string data_file;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<std::size_t, 3> dim_size{0, 0, 0};
    std::size_t header_bytes = 0;
    std::string line;

    while (std::getline(in, line)) {
        header_bytes += line.size() + 1;
        const auto eq = line.find('=');
        if (trim(line).empty()) continue;
        if (eq == std::string::npos) throw FormatError("malformed header line: '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        std::istringstream vs(value);

        if (key == "NDims") {
            int n = 0;
            if (!(vs >> n) || n != 3) throw FormatError("malformed header: NDims must be 3");
            have_ndims = true;
        } else if (key == "DimSize") {
            for (auto& d : dim_size) {
                long long v = 0;
                if (!(vs >> v) || v <= 0) throw FormatError("malformed header: bad DimSize");
                d = static_cast<std::size_t>(v);
            }
            have_dims = true;
        } else if (key == "ElementSpacing" || key == "ElementSize") {
            for (auto& s : spacing) {
                if (!(vs >> s) || !(s > 0)) throw FormatError("malformed header: bad " + key);
            }
        } else if (key == "ElementType") {
            img.type = parse_metaimage_type(value);
            have_type = true;
        } else if (key == "BinaryDataByteOrderMSB" || key == "ElementByteOrderMSB") {
            if (value == "True") throw FormatError("big-endian MetaImage payloads are not supported");
        } else if (key == "CompressedData") {
            if (value == "True") throw FormatError("compressed MetaImage payloads are not supported");
        } else if (key == "ObjectType" || key == "BinaryData") {
            // Always Image / True for the files this library reads.
        } else if (key == "ElementDataFile") {
            data_file = value;
            break;  // by convention the last header key
        } else {
            std::clog << "warning: ignoring MetaImage key '" << key << "' in " << path.string()
                      << "\n";
        }
    }
    if (!have_ndims || !have_dims || !have_type || data_file.empty()) {
        throw FormatError("malformed header: missing NDims, DimSize, ElementType or ElementDataFile");
    }

    img.dims = {dim_size[1], dim_size[0], dim_size[2]};
    img.spacing = {spacing[0], spacing[1], spacing[2]};
    if (data_file == "LOCAL") {
        in.close();
        img.payload = read_file(path, header_bytes);
    } else {
        img.payload = read_file(path.parent_path() / data_file);
    }
    const std::size_t expected = img.dims.size() * element_size(img.type);
    if (img.payload.size() != expected) {
        throw FormatError("payload size mismatch: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(img.payload.size()));
    }
    return img;
}

inline void write_metaimage(const std::filesystem::path& path, const Dims& dims,
                            const Spacing& spacing, ElementType type,
                            const std::vector<char>& payload) {
    if (path.empty()) throw IoError("empty output path");
    auto raw_path = path;
    raw_path.replace_extension(".raw");
    std::ostringstream h;
    h.precision(17);
    h << "ObjectType = Image\n"
      << "NDims = 3\n"
      << "BinaryData = True\n"
      << "BinaryDataByteOrderMSB = False\n"
      << "CompressedData = False\n"
      << "DimSize = " << dims.cols << ' ' << dims.rows << ' ' << dims.slices << '\n'
      << "ElementSpacing = " << spacing.dx << ' ' << spacing.dy << ' ' << spacing.dz << '\n'
      << "ElementType = " << metaimage_type_name(type) << '\n'
      << "ElementDataFile = " << raw_path.filename().string() << '\n';
    write_file(raw_path, {}, payload);
    write_file(path, h.str(), {});
}

inline std::filesystem::path sidecar_path(std::filesystem::path raw) {
    return raw.replace_extension(".json");
}

inline RawImage read_raw_sidecar(const std::filesystem::path& path) {
    const auto side = sidecar_path(path);
    std::ifstream in(side);
    if (!in) throw IoError("cannot open sidecar '" + side.string() + "'");
    RawImage img;
    try {
        const auto j = nlohmann::json::parse(in);
        const auto dims = j.at("dims").get<std::vector<long long>>();
        if (dims.size() != 3) throw FormatError("malformed sidecar: dims must have 3 entries");
        for (auto d : dims) {
            if (d <= 0) throw FormatError("malformed sidecar: dims must be positive");
        }
        img.dims = {static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                    static_cast<std::size_t>(dims[2])};
        if (j.contains("spacing")) {
            const auto sp = j.at("spacing").get<std::vector<double>>();
            if (sp.size() != 3) throw FormatError("malformed sidecar: spacing must have 3 entries");
            img.spacing = {sp[0], sp[1], sp[2]};
            if (!img.spacing.valid()) throw FormatError("malformed sidecar: spacing must be positive");
        }
        img.type = parse_dtype(j.value("dtype", std::string("u16")));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed sidecar '" + side.string() + "': " + e.what());
    }
    img.payload = read_file(path);
    const std::size_t expected = img.dims.size() * element_size(img.type);
    if (img.payload.size() != expected) {
        throw FormatError("payload size mismatch: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(img.payload.size()));
    }
    return img;
}

inline void write_raw_sidecar(const std::filesystem::path& path, const Dims& dims,
                              const Spacing& spacing, ElementType type,
                              const std::vector<char>& payload) {
    if (path.empty()) throw IoError("empty output path");
    nlohmann::json j;
    j["dims"] = {dims.rows, dims.cols, dims.slices};
    j["spacing"] = {spacing.dx, spacing.dy, spacing.dz};
    j["dtype"] = dtype_name(type);
    write_file(path, {}, payload);
    write_file(sidecar_path(path), j.dump(2) + "\n", {});
}

inline RawImage read_image(const std::filesystem::path& path, FileFormat format) {
    if (path.empty()) throw IoError("empty input path");
    return format == FileFormat::metaimage ? read_metaimage(path) : read_raw_sidecar(path);
}

inline void write_image(const std::filesystem::path& path, FileFormat format, const Dims& dims,
                        const Spacing& spacing, ElementType type, const std::vector<char>& payload) {
    if (format == FileFormat::metaimage) {
        write_metaimage(path, dims, spacing, type, payload);
    } else {
        write_raw_sidecar(path, dims, spacing, type, payload);
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

/// Reads a scalar exam. Accepted element types: u8, u16, f32.
[[nodiscard]] inline Volume load_volume(const std::filesystem::path& path, FileFormat format) {
    auto img = detail::read_image(path, format);
    if (img.type != ElementType::u8 && img.type != ElementType::u16 &&
        img.type != ElementType::f32) {
        throw FormatError("unsupported element type " + std::string(dtype_name(img.type)) +
                          " for a volume (expected u8, u16 or f32)");
    }
    auto values = detail::decode<float>(img.payload, img.type, img.dims.size());
    return Volume(Grid<float>(img.dims, std::move(values)), img.spacing, img.type);
}

[[nodiscard]] inline Volume load_volume(const std::filesystem::path& path) {
    return load_volume(path, format_from_path(path));
}

inline void save_volume(const Volume& vol, const std::filesystem::path& path, FileFormat format) {
    vol.validate();
    auto payload = detail::encode<float>(vol.intensities.values(), vol.dtype);
    detail::write_image(path, format, vol.dims(), vol.spacing, vol.dtype, payload);
}

inline void save_volume(const Volume& vol, const std::filesystem::path& path) {
    save_volume(vol, path, format_from_path(path));
}

/// Writes labels as signed 8-bit (default) or 16-bit integers.
inline void save_labels(const LabelField& labels, const std::filesystem::path& path,
                        FileFormat format, ElementType type = ElementType::i8,
                        const Spacing& spacing = {}) {
    if (type != ElementType::i8 && type != ElementType::i16) {
        throw FormatError("labels must be stored as i8 or i16");
    }
    if (!labels.dims().valid()) throw DimensionError("label dimensions must all be >= 1");
    auto payload = detail::encode<Label>(labels.values(), type);
    detail::write_image(path, format, labels.dims(), spacing, type, payload);
}

inline void save_labels(const LabelField& labels, const std::filesystem::path& path) {
    save_labels(labels, path, format_from_path(path));
}

/// Reads labels stored as i8, i16 or u8.
[[nodiscard]] inline LabelField load_labels(const std::filesystem::path& path, FileFormat format) {
    auto img = detail::read_image(path, format);
    if (img.type == ElementType::f32 || img.type == ElementType::u16) {
        throw FormatError("unsupported element type " + std::string(dtype_name(img.type)) +
                          " for labels (expected i8, i16 or u8)");
    }
    return LabelField(img.dims, detail::decode<Label>(img.payload, img.type, img.dims.size()));
}

[[nodiscard]] inline LabelField load_labels(const std::filesystem::path& path) {
    return load_labels(path, format_from_path(path));
}

inline void save_mask(const Mask& mask, const std::filesystem::path& path, FileFormat format,
                      const Spacing& spacing = {}) {
    std::vector<char> payload(mask.values().begin(), mask.values().end());
    for (auto& b : payload) b = b != 0 ? 1 : 0;
    detail::write_image(path, format, mask.dims(), spacing, ElementType::u8, payload);
}

inline void save_mask(const Mask& mask, const std::filesystem::path& path) {
    save_mask(mask, path, format_from_path(path));
}

/// Reads any supported scalar file as a binary mask (nonzero -> 1).
[[nodiscard]] inline Mask load_mask(const std::filesystem::path& path, FileFormat format) {
    auto img = detail::read_image(path, format);
    auto values = detail::decode<double>(img.payload, img.type, img.dims.size());
    std::vector<std::uint8_t> bits(values.size());
    for (std::size_t n = 0; n < values.size(); ++n) bits[n] = values[n] != 0.0 ? 1 : 0;
    return Mask(img.dims, std::move(bits));
}

[[nodiscard]] inline Mask load_mask(const std::filesystem::path& path) {
    return load_mask(path, format_from_path(path));
}

} // namespace vertegrow
