#include "ostb/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "ostb/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ostb {

namespace {

void append_u32_be(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

void append_chunk(std::string& out, const char type[4], const std::string& payload) {
    append_u32_be(out, static_cast<uint32_t>(payload.size()));
    std::string body(type, 4);
    body += payload;
    out += body;
    uint32_t crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    append_u32_be(out, crc);
}

void atomic_write(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("write failed for " + tmp);
    }
    fs::rename(tmp, path);
}

std::string sanitize(const std::string& id) {
    std::string s = id;
    for (char& c : s)
        if (c == '/' || c == '\\' || c == ':') c = '_';
    return s;
}

}  // namespace

void write_png(const std::string& path, const TfrImage& image) {
    const int side = image.side;
    std::string raw;
    raw.reserve(static_cast<std::size_t>(side) * (side * 3 + 1));
    for (int y = 0; y < side; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < side; ++x) {
            const float p = image.gray[static_cast<std::size_t>(y) * side + x];
            const unsigned char v =
                static_cast<unsigned char>(std::lround(255.0 * std::clamp(p, 0.0f, 1.0f)));
            raw.push_back(static_cast<char>(v));
            raw.push_back(static_cast<char>(v));
            raw.push_back(static_cast<char>(v));
        }
    }

    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::string compressed(comp_len, '\0');
    if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &comp_len,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                  6) != Z_OK)
        throw DataError("write_png: deflate failed for " + path);
    compressed.resize(comp_len);

    std::string png("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    append_u32_be(ihdr, static_cast<uint32_t>(side));
    append_u32_be(ihdr, static_cast<uint32_t>(side));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type: truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // interlace
    append_chunk(png, "IHDR", ihdr);
    append_chunk(png, "IDAT", compressed);
    append_chunk(png, "IEND", "");
    atomic_write(path, png);
}

void write_f32(const std::string& path, const TfrImage& image) {
    std::string bytes(image.gray.size() * 4, '\0');
    std::memcpy(bytes.data(), image.gray.data(), bytes.size());
    atomic_write(path, bytes);
}

TfrImage read_f32(const std::string& path, int side, const std::string& source_id,
                  const std::string& kind, const std::string& params_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("read_f32: cannot open " + path);
    TfrImage img;
    img.side = side;
    img.source_id = source_id;
    img.kind = kind;
    img.params_digest = params_digest;
    img.gray.resize(static_cast<std::size_t>(side) * side);
    in.read(reinterpret_cast<char*>(img.gray.data()), static_cast<std::streamsize>(img.gray.size() * 4));
    if (in.gcount() != static_cast<std::streamsize>(img.gray.size() * 4))
        throw DataError("read_f32: truncated sidecar " + path);
    return img;
}

ImageCache::ImageCache(std::string root, std::string digest, TfrKind kind, int side)
    : root_(std::move(root)), digest_(std::move(digest)), kind_(kind), side_(side) {
    dir_ = (fs::path(root_) / digest_).string();
    fs::create_directories(dir_);
    const fs::path index = fs::path(dir_) / "index.json";
    if (fs::exists(index)) {
        std::ifstream in(index);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw DataError("ImageCache: bad index " + index.string() + ": " + e.what());
        }
        if (j.at("digest").get<std::string>() != digest_)
            throw DataError("ImageCache: digest mismatch in " + index.string());
        side_ = j.at("side").get<int>();
        entries_ = j.at("entries").get<std::map<std::string, std::string>>();
    }
}

bool ImageCache::contains(const std::string& source_id) const { return entries_.count(source_id) > 0; }

bool ImageCache::put(const std::string& source_id, const TfrImage& image) {
    if (contains(source_id)) return false;
    if (image.side != side_) throw DataError("ImageCache: image side mismatch for " + source_id);
    const std::string stem = sanitize(source_id);
    write_png((fs::path(dir_) / (stem + ".png")).string(), image);
    write_f32((fs::path(dir_) / (stem + ".f32")).string(), image);
    entries_[source_id] = stem;
    return true;
}

TfrImage ImageCache::get(const std::string& source_id) const {
    auto it = entries_.find(source_id);
    if (it == entries_.end()) throw DataError("ImageCache: no entry for " + source_id);
    return read_f32((fs::path(dir_) / (it->second + ".f32")).string(), side_, source_id,
                    to_string(kind_), digest_);
}

void ImageCache::save_index() const {
    json j;
    j["digest"] = digest_;
    j["kind"] = to_string(kind_);
    j["side"] = side_;
    j["entries"] = entries_;
    atomic_write((fs::path(dir_) / "index.json").string(), j.dump(2) + "\n");
}

}  // namespace ostb
