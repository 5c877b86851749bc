// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/scene_io.hpp"

#include "splat4d/error.hpp"

#include <png.h>

#include <csetjmp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace splat4d::io {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

class Writer {
public:
    template <typename T>
    void put(T v) {
        const T le = to_little(v);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&le);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_magic(std::string_view magic) { bytes_.insert(bytes_.end(), magic.begin(), magic.end()); }
    Bytes& bytes() { return bytes_; }

private:
    Bytes bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get(std::string_view what) {
        if (pos_ + sizeof(T) > bytes_.size()) {
            throw TruncatedError("file truncated while reading " + std::string(what));
        }
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return to_little(v);
    }
    std::size_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void check_magic(std::span<const std::uint8_t> bytes, std::string_view expected) {
    if (bytes.size() < expected.size()) {
        throw TruncatedError("file shorter than its magic");
    }
    const std::string found(reinterpret_cast<const char*>(bytes.data()), expected.size());
    if (found != expected) {
        std::string printable;
        for (const char c : found) {
            printable += (c >= 32 && c < 127) ? c : '?';
        }
        throw VersionError(printable, std::string(expected));
    }
}

void verify_trailer(std::span<const std::uint8_t> bytes, std::size_t body_size) {
    if (bytes.size() < body_size + sizeof(std::uint64_t)) {
        throw TruncatedError("file truncated: expected " + std::to_string(body_size + 8) + " bytes, found " +
                             std::to_string(bytes.size()));
    }
    if (bytes.size() > body_size + sizeof(std::uint64_t)) {
        throw DimensionError("file size " + std::to_string(bytes.size()) + " does not match header dimensions (" +
                             std::to_string(body_size + 8) + " bytes expected)");
    }
    Reader r(bytes.subspan(body_size));
    const auto stored = r.get<std::uint64_t>("checksum");
    const auto actual = checksum(bytes.first(body_size));
    if (stored != actual) {
        throw ChecksumError("checksum mismatch");
    }
}

constexpr std::uint32_t kHasMotion = 1u;
constexpr std::size_t kMotionEntryBytes = 4 + 15 * 8;

// --- PNG plumbing ---------------------------------------------------------------

struct PngWriteState {
    Bytes* out;
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* state = static_cast<PngWriteState*>(png_get_io_ptr(png));
    state->out->insert(state->out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

void png_warning_handler(png_structp, png_const_charp) {}

Bytes encode_png(int width, int height, int color_type, int bit_depth, const std::vector<std::uint8_t>& rows_data,
                 std::size_t row_bytes) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_handler);
    if (png == nullptr) {
        throw FormatError("png: cannot create write struct");
    }
    png_infop info = png_create_info_struct(png);
    Bytes out;
    PngWriteState state{&out};
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("png: encoding failed");
    }
    png_set_write_fn(png, &state, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(rows_data.data() + static_cast<std::size_t>(y) * row_bytes));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

struct PngReadState {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep data, png_size_t length) {
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->pos + length > state->bytes.size()) {
        png_error(png, "unexpected end of data");
    }
    std::memcpy(data, state->bytes.data() + state->pos, length);
    state->pos += length;
}

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::uint16_t> samples;  // row-major interleaved
};

// Reads raw rows into `raw`; returns false when libpng reported an error.
bool read_png_rows(std::span<const std::uint8_t> bytes, DecodedPng& out, std::vector<std::uint8_t>& raw,
                   std::size_t& row_bytes) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_handler);
    if (png == nullptr) {
        return false;
    }
    png_infop info = png_create_info_struct(png);
    PngReadState state{bytes, 0};
    std::vector<png_bytep> rows;
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, &state, png_read_from_span);
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    row_bytes = png_get_rowbytes(png, info);
    raw.resize(row_bytes * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) {
        rows[y] = raw.data() + static_cast<std::size_t>(y) * row_bytes;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

DecodedPng decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw FormatError("not a PNG file");
    }
    DecodedPng out;
    std::vector<std::uint8_t> raw;
    std::size_t row_bytes = 0;
    if (!read_png_rows(bytes, out, raw, row_bytes)) {
        throw FormatError("png: malformed or truncated image");
    }
    const std::size_t per_row = static_cast<std::size_t>(out.width) * out.channels;
    out.samples.resize(per_row * out.height);
    for (int y = 0; y < out.height; ++y) {
        const std::uint8_t* row = raw.data() + static_cast<std::size_t>(y) * row_bytes;
        for (std::size_t i = 0; i < per_row; ++i) {
            // 16-bit PNG samples are big-endian.
            out.samples[y * per_row + i] = out.bit_depth == 16
                                               ? static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1])
                                               : row[i];
        }
    }
    return out;
}

double parse_double(std::string_view token, int line_no) {
    double v = 0.0;
    const auto* begin = token.data();
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ParseError("trajectory line " + std::to_string(line_no) + ": bad number '" + std::string(token) + "'");
    }
    return v;
}

}  // namespace

std::uint64_t checksum(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (const std::uint8_t b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FileError("cannot open '" + path.string() + "' for reading");
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FileError("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw FileError("failed writing '" + path.string() + "'");
    }
}

// --- Scene ------------------------------------------------------------------------

Bytes encode_scene(const Scene& scene) {
    const SplatMap& map = scene.map;
    map.validate();
    if (scene.intrinsics.width != map.width || scene.intrinsics.height != map.height) {
        throw DimensionError("scene intrinsics image size differs from the splat map");
    }
    Writer w;
    w.put_magic(kSceneMagic);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(map.height));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(map.width));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(map.layers));
    w.put<double>(scene.intrinsics.fx);
    w.put<double>(scene.intrinsics.fy);
    w.put<double>(scene.intrinsics.cx);
    w.put<double>(scene.intrinsics.cy);
    w.put<std::uint32_t>(kConventionRDF);
    w.put<std::uint32_t>(scene.motion ? kHasMotion : 0u);
    for (const float v : map.base_depth) {
        w.put<float>(v);
    }
    for (const float v : map.params) {
        w.put<float>(v);
    }
    for (const std::int32_t id : map.object_id) {
        w.put<std::int32_t>(id);
    }
    if (scene.motion) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(scene.motion->size()));
        for (const auto& [id, m] : *scene.motion) {
            w.put<std::int32_t>(id);
            for (const Vec3* v : {&m.linear_velocity, &m.linear_acceleration, &m.angular_velocity,
                                  &m.angular_acceleration, &m.centroid}) {
                for (int i = 0; i < 3; ++i) {
                    w.put<double>((*v)[i]);
                }
            }
        }
    }
    const std::uint64_t sum = checksum(w.bytes());
    w.put<std::uint64_t>(sum);
    return std::move(w.bytes());
}

Scene decode_scene(std::span<const std::uint8_t> bytes) {
    check_magic(bytes, kSceneMagic);
    Reader r(bytes.subspan(kSceneMagic.size()));
    const auto height = r.get<std::uint32_t>("height");
    const auto width = r.get<std::uint32_t>("width");
    const auto layers = r.get<std::uint32_t>("layers");
    Scene scene;
    scene.intrinsics.fx = r.get<double>("fx");
    scene.intrinsics.fy = r.get<double>("fy");
    scene.intrinsics.cx = r.get<double>("cx");
    scene.intrinsics.cy = r.get<double>("cy");
    const auto convention = r.get<std::uint32_t>("convention");
    const auto flags = r.get<std::uint32_t>("flags");
    if (width == 0 || height == 0 || layers == 0 || width > 65536 || height > 65536 || layers > 1024) {
        throw DimensionError("implausible scene dimensions " + std::to_string(width) + "x" + std::to_string(height) +
                             "x" + std::to_string(layers));
    }
    if (convention != kConventionRDF) {
        throw FormatError("unsupported coordinate convention tag");
    }
    const std::size_t pixels = static_cast<std::size_t>(width) * height;
    const std::size_t header = kSceneMagic.size() + r.position();
    std::size_t body = header + pixels * 4 + pixels * layers * kChannelCount * 4 + pixels * 4;

    std::uint32_t motion_count = 0;
    if (flags & kHasMotion) {
        if (bytes.size() < body + 4) {
            throw TruncatedError("scene truncated before motion table");
        }
        Reader mr(bytes.subspan(body));
        motion_count = mr.get<std::uint32_t>("motion count");
        body += 4 + static_cast<std::size_t>(motion_count) * kMotionEntryBytes;
    }
    verify_trailer(bytes, body);

    scene.intrinsics.width = static_cast<int>(width);
    scene.intrinsics.height = static_cast<int>(height);
    SplatMap& map = scene.map;
    map.width = static_cast<int>(width);
    map.height = static_cast<int>(height);
    map.layers = static_cast<int>(layers);
    map.base_depth.resize(pixels);
    map.params.resize(pixels * layers * kChannelCount);
    map.object_id.resize(pixels);
    Reader body_reader(bytes.subspan(header));
    for (float& v : map.base_depth) {
        v = body_reader.get<float>("base depth");
    }
    for (float& v : map.params) {
        v = body_reader.get<float>("parameters");
    }
    for (std::int32_t& id : map.object_id) {
        id = body_reader.get<std::int32_t>("object ids");
    }
    if (flags & kHasMotion) {
        body_reader.get<std::uint32_t>("motion count");
        MotionTable table;
        for (std::uint32_t k = 0; k < motion_count; ++k) {
            ObjectMotion m;
            m.object_id = body_reader.get<std::int32_t>("motion id");
            for (Vec3* v : {&m.linear_velocity, &m.linear_acceleration, &m.angular_velocity, &m.angular_acceleration,
                            &m.centroid}) {
                for (int i = 0; i < 3; ++i) {
                    (*v)[i] = body_reader.get<double>("motion entry");
                }
            }
            if (m.object_id < 0) {
                throw FormatError("negative object id in motion table");
            }
            table.set(m);
        }
        scene.motion = std::move(table);
    }

    try {
        scene.intrinsics.validate();
        map.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("scene violates invariants: ") + e.what());
    }
    return scene;
}

void save_scene(const std::filesystem::path& path, const Scene& scene) { write_file(path, encode_scene(scene)); }

Scene load_scene(const std::filesystem::path& path) { return decode_scene(read_file(path)); }

// --- Depth planes -------------------------------------------------------------------

Bytes encode_depth(const Image& depth) {
    if (depth.channels != 1) {
        throw DimensionError("depth maps must have one channel");
    }
    Writer w;
    w.put_magic(kDepthMagic);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(depth.height));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(depth.width));
    for (const double v : depth.data) {
        w.put<float>(static_cast<float>(v));
    }
    const std::uint64_t sum = checksum(w.bytes());
    w.put<std::uint64_t>(sum);
    return std::move(w.bytes());
}

Image decode_depth(std::span<const std::uint8_t> bytes) {
    check_magic(bytes, kDepthMagic);
    Reader r(bytes.subspan(kDepthMagic.size()));
    const auto height = r.get<std::uint32_t>("height");
    const auto width = r.get<std::uint32_t>("width");
    if (width == 0 || height == 0 || width > 65536 || height > 65536) {
        throw DimensionError("implausible depth map dimensions");
    }
    const std::size_t header = kDepthMagic.size() + r.position();
    const std::size_t pixels = static_cast<std::size_t>(width) * height;
    verify_trailer(bytes, header + pixels * 4);
    Image depth(static_cast<int>(width), static_cast<int>(height), 1);
    Reader body(bytes.subspan(header));
    for (double& v : depth.data) {
        v = body.get<float>("depth");
    }
    return depth;
}

void save_depth(const std::filesystem::path& path, const Image& depth) { write_file(path, encode_depth(depth)); }

Image load_depth(const std::filesystem::path& path) { return decode_depth(read_file(path)); }

// --- PNG ------------------------------------------------------------------------------

std::uint8_t quantize_unit(double c) {
    const double v = std::floor(255.0 * c + 0.5);
    if (!(v > 0.0)) {
        return 0;
    }
    return v >= 255.0 ? 255 : static_cast<std::uint8_t>(v);
}

Bytes encode_png_rgb(const Image& rgb) {
    if (rgb.channels != 3) {
        throw DimensionError("encode_png_rgb expects a 3-channel image");
    }
    std::vector<std::uint8_t> data(rgb.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        data[i] = quantize_unit(rgb.data[i]);
    }
    return encode_png(rgb.width, rgb.height, PNG_COLOR_TYPE_RGB, 8, data, static_cast<std::size_t>(rgb.width) * 3);
}

void save_png_rgb(const std::filesystem::path& path, const Image& rgb) { write_file(path, encode_png_rgb(rgb)); }

Image decode_png_rgb(std::span<const std::uint8_t> bytes) {
    const DecodedPng png = decode_png(bytes);
    const double peak = png.bit_depth == 16 ? 65535.0 : 255.0;
    Image out(png.width, png.height, 3);
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        for (int c = 0; c < 3; ++c) {
            const int src = png.channels >= 3 ? c : 0;
            out.data[p * 3 + c] = png.samples[p * png.channels + src] / peak;
        }
    }
    return out;
}

Image load_png_rgb(const std::filesystem::path& path) { return decode_png_rgb(read_file(path)); }

LabelMap decode_mask(std::span<const std::uint8_t> bytes, int expected_width, int expected_height) {
    const DecodedPng png = decode_png(bytes);
    if (png.channels != 1) {
        throw FormatError("mask must be a single-channel image, found " + std::to_string(png.channels) +
                          " channels");
    }
    if ((expected_width > 0 && png.width != expected_width) || (expected_height > 0 && png.height != expected_height)) {
        throw DimensionError("mask is " + std::to_string(png.width) + "x" + std::to_string(png.height) +
                             ", expected " + std::to_string(expected_width) + "x" + std::to_string(expected_height));
    }
    LabelMap mask(png.width, png.height);
    for (std::size_t i = 0; i < mask.labels.size(); ++i) {
        mask.labels[i] = static_cast<std::int32_t>(png.samples[i]);
    }
    return mask;
}

LabelMap load_mask(const std::filesystem::path& path, int expected_width, int expected_height) {
    return decode_mask(read_file(path), expected_width, expected_height);
}

Bytes encode_mask(const LabelMap& mask, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) {
        throw DimensionError("mask bit depth must be 8 or 16");
    }
    const std::int32_t limit = bit_depth == 8 ? 255 : 65535;
    const std::size_t bytes_per = bit_depth / 8;
    std::vector<std::uint8_t> data(mask.labels.size() * bytes_per);
    for (std::size_t i = 0; i < mask.labels.size(); ++i) {
        const std::int32_t v = mask.labels[i];
        if (v < 0 || v > limit) {
            throw DimensionError("label " + std::to_string(v) + " does not fit a " + std::to_string(bit_depth) +
                                 "-bit mask");
        }
        if (bit_depth == 8) {
            data[i] = static_cast<std::uint8_t>(v);
        } else {
            data[2 * i] = static_cast<std::uint8_t>(v >> 8);  // PNG samples are big-endian
            data[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
        }
    }
    return encode_png(mask.width, mask.height, PNG_COLOR_TYPE_GRAY, bit_depth, data,
                      static_cast<std::size_t>(mask.width) * bytes_per);
}

void save_mask(const std::filesystem::path& path, const LabelMap& mask) {
    const bool fits8 = std::all_of(mask.labels.begin(), mask.labels.end(), [](std::int32_t v) { return v <= 255; });
    write_file(path, encode_mask(mask, fits8 ? 8 : 16));
}

// --- Trajectories ------------------------------------------------------------------------

Trajectory::Trajectory(std::vector<TrajectorySample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) {
        throw ParseError("trajectory has no samples");
    }
    for (std::size_t i = 1; i < samples_.size(); ++i) {
        if (!(samples_[i].time > samples_[i - 1].time)) {
            throw ParseError("trajectory times must be strictly increasing (sample " + std::to_string(i) + ")");
        }
    }
}

Trajectory Trajectory::parse(std::string_view text) {
    std::vector<TrajectorySample> samples;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(start, end - start);
        ++line_no;
        start = end + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        std::vector<std::string_view> tokens;
        std::size_t p = 0;
        while (p < line.size()) {
            while (p < line.size() && std::isspace(static_cast<unsigned char>(line[p]))) {
                ++p;
            }
            std::size_t q = p;
            while (q < line.size() && !std::isspace(static_cast<unsigned char>(line[q]))) {
                ++q;
            }
            if (q > p) {
                tokens.push_back(line.substr(p, q - p));
            }
            p = q;
        }
        if (tokens.empty()) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        if (tokens.size() != 8) {
            throw ParseError("trajectory line " + std::to_string(line_no) + ": expected 8 values, found " +
                             std::to_string(tokens.size()));
        }
        double v[8];
        for (int i = 0; i < 8; ++i) {
            v[i] = parse_double(tokens[i], line_no);
        }
        try {
            samples.push_back({v[0], Pose::from_wxyz(v[1], v[2], v[3], v[4], Vec3(v[5], v[6], v[7]))});
        } catch (const DomainError& e) {
            throw ParseError("trajectory line " + std::to_string(line_no) + ": " + e.what());
        }
        if (end == text.size()) {
            break;
        }
    }
    return Trajectory(std::move(samples));
}

Trajectory Trajectory::load(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string Trajectory::to_text() const {
    std::ostringstream out;
    out << "# time qw qx qy qz tx ty tz (camera-from-world, +x right, +y down, +z forward)\n";
    out << std::setprecision(17);
    for (const auto& s : samples_) {
        const Vec4 q = s.pose.wxyz();
        const Vec3& t = s.pose.translation();
        out << s.time << ' ' << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << ' ' << t.x() << ' ' << t.y()
            << ' ' << t.z() << '\n';
    }
    return out.str();
}

void Trajectory::save(const std::filesystem::path& path) const {
    const std::string text = to_text();
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

double Trajectory::start_time() const { return samples_.front().time; }
double Trajectory::end_time() const { return samples_.back().time; }

Pose Trajectory::interpolate(double time) const {
    if (samples_.empty()) {
        throw DomainError("interpolate on an empty trajectory");
    }
    if (!(time >= start_time() && time <= end_time())) {
        throw DomainError("time " + std::to_string(time) + " outside trajectory range [" +
                          std::to_string(start_time()) + ", " + std::to_string(end_time()) + "]");
    }
    const auto it = std::lower_bound(samples_.begin(), samples_.end(), time,
                                     [](const TrajectorySample& s, double t) { return s.time < t; });
    if (it->time == time) {
        return it->pose;
    }
    const TrajectorySample& b = *it;
    const TrajectorySample& a = *(it - 1);
    const double f = (time - a.time) / (b.time - a.time);
    const Quat q = a.pose.rotation().slerp(f, b.pose.rotation()).normalized();
    const Vec3 t = a.pose.translation() + f * (b.pose.translation() - a.pose.translation());
    return Pose(q, t);
}

}  // namespace splat4d::io
