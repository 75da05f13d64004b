#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ostb/tfr.hpp"

namespace ostb {

// 8-bit RGB PNG of the rendered image, value = round(255 * pixel), all three
// channels identical.
void write_png(const std::string& path, const TfrImage& image);

// Raw little-endian f32 sidecar of the pre-quantization grayscale plane.
void write_f32(const std::string& path, const TfrImage& image);
TfrImage read_f32(const std::string& path, int side, const std::string& source_id,
                  const std::string& kind, const std::string& params_digest);

// On-disk image cache: <root>/<digest>/{index.json, *.png, *.f32}. Writes go
// through a temp file + rename so readers never observe partial entries.
class ImageCache {
public:
    ImageCache(std::string root, std::string digest, TfrKind kind, int side);

    bool contains(const std::string& source_id) const;
    // Renders are stored under both PNG and f32; returns false on cache hit.
    bool put(const std::string& source_id, const TfrImage& image);
    TfrImage get(const std::string& source_id) const;

    void save_index() const;
    std::size_t size() const { return entries_.size(); }
    const std::string& dir() const { return dir_; }
    int side() const { return side_; }

private:
    std::string root_, digest_, dir_;
    TfrKind kind_;
    int side_;
    std::map<std::string, std::string> entries_;  // source_id -> file stem
};

}  // namespace ostb
