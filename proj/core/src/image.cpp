#include "fga/image.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace fga {

namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& payload) {
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
    put_u32(out, crc);
}

std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw IoError("png: deflate failed");
    }
    out.resize(bound);
    return out;
}

std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& comp, std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    uLongf len = static_cast<uLongf>(expected);
    const int rc = uncompress(out.data(), &len, comp.data(), static_cast<uLong>(comp.size()));
    if (rc != Z_OK || len != expected) throw IoError("png: inflate failed or size mismatch");
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

std::vector<std::uint8_t> encode_png(const ImageU8& img) {
    if (img.width < 1 || img.height < 1) throw ValueError("png: empty image");
    int color_type;
    switch (img.channels) {
        case 1: color_type = 0; break;
        case 3: color_type = 2; break;
        case 4: color_type = 6; break;
        default: throw ValueError("png: unsupported channel count " + std::to_string(img.channels));
    }
    std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);

    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(img.width));
    put_u32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(static_cast<std::uint8_t>(color_type));
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    put_chunk(out, "IHDR", ihdr);

    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter type none
        raw.insert(raw.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(y * stride),
                   img.pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
    }
    put_chunk(out, "IDAT", zlib_deflate(raw));
    put_chunk(out, "IEND", {});
    return out;
}

void write_png(const ImageU8& img, const std::string& path) {
    const std::vector<std::uint8_t> bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + path);
}

ImageU8 decode_png(const std::uint8_t* data, std::size_t len) {
    if (len < 8 || std::memcmp(data, kPngSignature, 8) != 0) throw IoError("png: bad signature");
    std::size_t pos = 8;
    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> idat;
    std::vector<std::uint8_t> palette;  // rgb triples
    bool seen_ihdr = false, seen_iend = false;
    while (pos + 8 <= len && !seen_iend) {
        const std::uint32_t chunk_len = get_u32(data + pos);
        if (pos + 12 + chunk_len > len) throw IoError("png: truncated chunk at byte " + std::to_string(pos));
        const char* type = reinterpret_cast<const char*>(data + pos + 4);
        const std::uint8_t* payload = data + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (chunk_len != 13) throw IoError("png: bad IHDR");
            width = static_cast<int>(get_u32(payload));
            height = static_cast<int>(get_u32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw IoError("png: interlaced images unsupported");
            if (bit_depth != 8) throw IoError("png: only bit depth 8 supported, got " + std::to_string(bit_depth));
            seen_ihdr = true;
        } else if (std::memcmp(type, "PLTE", 4) == 0) {
            palette.assign(payload, payload + chunk_len);
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + chunk_len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            seen_iend = true;
        }
        pos += 12 + chunk_len;
    }
    if (!seen_ihdr || idat.empty()) throw IoError("png: missing IHDR or IDAT");
    if (!seen_iend) throw IoError("png: truncated stream (no IEND) at byte " + std::to_string(pos));
    if (width < 1 || height < 1) throw IoError("png: bad dimensions");

    int src_channels;
    switch (color_type) {
        case 0: src_channels = 1; break;
        case 2: src_channels = 3; break;
        case 3: src_channels = 1; break;  // palette indices
        case 4: src_channels = 2; break;
        case 6: src_channels = 4; break;
        default: throw IoError("png: unsupported color type " + std::to_string(color_type));
    }
    const std::size_t stride = static_cast<std::size_t>(width) * src_channels;
    const std::vector<std::uint8_t> raw =
        zlib_inflate(idat, (stride + 1) * static_cast<std::size_t>(height));

    // Undo per-scanline filters.
    std::vector<std::uint8_t> flat(stride * static_cast<std::size_t>(height));
    const int bpp = src_channels;
    for (int y = 0; y < height; ++y) {
        const std::uint8_t filter = raw[(stride + 1) * static_cast<std::size_t>(y)];
        const std::uint8_t* src = raw.data() + (stride + 1) * static_cast<std::size_t>(y) + 1;
        std::uint8_t* dst = flat.data() + stride * static_cast<std::size_t>(y);
        const std::uint8_t* prev = y > 0 ? flat.data() + stride * static_cast<std::size_t>(y - 1) : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int left = i >= static_cast<std::size_t>(bpp) ? dst[i - static_cast<std::size_t>(bpp)] : 0;
            const int up = prev ? prev[i] : 0;
            const int upleft = (prev && i >= static_cast<std::size_t>(bpp)) ? prev[i - static_cast<std::size_t>(bpp)] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += left; break;
                case 2: v += up; break;
                case 3: v += (left + up) / 2; break;
                case 4: v += paeth(left, up, upleft); break;
                default: throw IoError("png: unknown filter type " + std::to_string(filter));
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xff);
        }
    }

    ImageU8 img;
    img.width = width;
    img.height = height;
    if (color_type == 3) {
        if (palette.empty()) throw IoError("png: palette image without PLTE");
        img.channels = 3;
        img.pixels.resize(static_cast<std::size_t>(width) * height * 3);
        for (std::size_t i = 0; i < flat.size(); ++i) {
            const std::size_t p = static_cast<std::size_t>(flat[i]) * 3;
            if (p + 2 >= palette.size()) throw IoError("png: palette index out of range");
            img.pixels[i * 3] = palette[p];
            img.pixels[i * 3 + 1] = palette[p + 1];
            img.pixels[i * 3 + 2] = palette[p + 2];
        }
    } else if (color_type == 4) {
        img.channels = 1;  // drop alpha
        img.pixels.resize(static_cast<std::size_t>(width) * height);
        for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = flat[i * 2];
    } else {
        img.channels = src_channels;
        img.pixels = std::move(flat);
    }
    return img;
}

namespace {

struct PnmReader {
    const std::uint8_t* data;
    std::size_t len;
    std::size_t pos = 0;

    void skip_space_and_comments() {
        while (pos < len) {
            const char c = static_cast<char>(data[pos]);
            if (c == '#') {
                while (pos < len && data[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    int next_int() {
        skip_space_and_comments();
        if (pos >= len || data[pos] < '0' || data[pos] > '9') throw IoError("pnm: expected integer in header");
        int v = 0;
        while (pos < len && data[pos] >= '0' && data[pos] <= '9') {
            v = v * 10 + (data[pos] - '0');
            ++pos;
        }
        return v;
    }
};

} // namespace

ImageU8 decode_pnm(const std::uint8_t* data, std::size_t len) {
    if (len < 2 || data[0] != 'P') throw IoError("pnm: bad magic");
    const char kind = static_cast<char>(data[1]);
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
        throw IoError(std::string("pnm: unsupported format P") + kind);
    }
    const bool color = kind == '3' || kind == '6';
    const bool binary = kind == '5' || kind == '6';
    PnmReader r{data, len, 2};
    const int width = r.next_int();
    const int height = r.next_int();
    const int maxval = r.next_int();
    if (width < 1 || height < 1) throw IoError("pnm: bad dimensions");
    if (maxval < 1 || maxval > 255) throw IoError("pnm: only maxval <= 255 supported");

    ImageU8 img;
    img.width = width;
    img.height = height;
    img.channels = color ? 3 : 1;
    const std::size_t count = static_cast<std::size_t>(width) * height * img.channels;
    img.pixels.resize(count);
    if (binary) {
        r.pos += 1;  // single whitespace after maxval
        if (r.pos + count > len) throw IoError("pnm: truncated pixel data");
        std::memcpy(img.pixels.data(), data + r.pos, count);
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const int v = r.next_int();
            if (v > maxval) throw IoError("pnm: sample exceeds maxval");
            img.pixels[i] = static_cast<std::uint8_t>(v);
        }
    }
    return img;
}

ImageU8 read_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
        return decode_png(bytes.data(), bytes.size());
    }
    if (bytes.size() >= 2 && bytes[0] == 'P') {
        return decode_pnm(bytes.data(), bytes.size());
    }
    throw IoError("unrecognized image format: " + path + " (PNG and PGM/PPM are supported)");
}

Tensor image_to_tensor(const ImageU8& img) {
    Tensor t(Shape{img.height, img.width, 3});
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const int src = img.channels >= 3 ? c : 0;
                t[(static_cast<std::int64_t>(y) * img.width + x) * 3 + c] =
                    static_cast<double>(img.at(y, x, src));
            }
        }
    }
    return t;
}

} // namespace fga
