#include "ostb/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <zlib.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace ostb {

namespace {

constexpr uint16_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    uint16_t u16() { return static_cast<uint16_t>(u8() | (u8() << 8)); }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(u8()) << (8 * i);
        return v;
    }
    uint64_t u64() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(u8()) << (8 * i);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void floats(float* dst, std::size_t n) {
        need(n * 4);
        std::memcpy(dst, bytes_.data() + pos_, n * 4);
        pos_ += n * 4;
    }
    std::size_t pos() const { return pos_; }
    const std::string& bytes() const { return bytes_; }

private:
    unsigned u8() {
        need(1);
        return static_cast<unsigned char>(bytes_[pos_++]);
    }
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw DataError("checkpoint: truncated file");
    }
    std::string bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const SiameseModel<float>& model) {
    std::string out;
    out += "OSTB";
    put_u16(out, kVersion);
    put_u32(out, static_cast<uint32_t>(model.params.size()));
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const std::string& name = model.param_names[i];
        const Tensor<float>& t = *model.params[i];
        put_u32(out, static_cast<uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) put_u64(out, static_cast<uint64_t>(d));
        const std::size_t off = out.size();
        out.resize(off + t.data.size() * 4);
        std::memcpy(out.data() + off, t.data.data(), t.data.size() * 4);
    }
    const uint32_t crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size()));
    put_u32(out, crc);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("save_checkpoint: cannot open " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw DataError("save_checkpoint: write failed for " + tmp);
    }
    fs::rename(tmp, path);

    std::ofstream side(path + ".json", std::ios::trunc);
    if (!side) throw DataError("save_checkpoint: cannot open " + path + ".json");
    side << model.config_json.dump(2) << "\n";
}

SiameseModel<float> load_checkpoint(const std::string& path) {
    std::ifstream side_in(path + ".json");
    if (!side_in) throw DataError("load_checkpoint: missing config sidecar " + path + ".json");
    json cfg;
    try {
        side_in >> cfg;
    } catch (const json::exception& e) {
        throw DataError("load_checkpoint: bad sidecar JSON: " + std::string(e.what()));
    }

    Rng rng(0);  // values are overwritten below
    SiameseModel<float> model;
    const std::string arch = cfg.at("arch").get<std::string>();
    if (arch == "conv")
        model = build_conv_siamese<float>(ConvSiameseConfig::from_json(cfg), rng);
    else if (arch == "residual")
        model = build_residual_siamese<float>(ResidualSiameseConfig::from_json(cfg), rng);
    else
        throw DataError("load_checkpoint: unknown architecture '" + arch + "'");

    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 14) throw DataError("load_checkpoint: truncated file " + path);

    const uint32_t stored_crc = static_cast<unsigned char>(bytes[bytes.size() - 4]) |
                                (static_cast<unsigned char>(bytes[bytes.size() - 3]) << 8) |
                                (static_cast<unsigned char>(bytes[bytes.size() - 2]) << 16) |
                                (static_cast<uint32_t>(static_cast<unsigned char>(bytes[bytes.size() - 1])) << 24);
    const uint32_t crc =
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size() - 4));
    if (crc != stored_crc) throw DataError("load_checkpoint: CRC mismatch in " + path);
    bytes.resize(bytes.size() - 4);

    Reader r(std::move(bytes));
    if (r.str(4) != "OSTB") throw DataError("load_checkpoint: bad magic in " + path);
    if (r.u16() != kVersion) throw DataError("load_checkpoint: unsupported version in " + path);
    const uint32_t n_params = r.u32();
    if (n_params != model.params.size())
        throw DataError("load_checkpoint: parameter count mismatch in " + path);

    for (uint32_t i = 0; i < n_params; ++i) {
        const uint32_t name_len = r.u32();
        const std::string name = r.str(name_len);
        if (name != model.param_names[i])
            throw DataError("load_checkpoint: unexpected parameter '" + name + "' (wanted '" +
                            model.param_names[i] + "')");
        const uint32_t rank = r.u32();
        std::vector<int> dims(rank);
        for (uint32_t d = 0; d < rank; ++d) dims[d] = static_cast<int>(r.u64());
        Tensor<float>& t = *model.params[i];
        if (dims != t.shape) throw DataError("load_checkpoint: shape mismatch for '" + name + "'");
        r.floats(t.data.data(), t.data.size());
    }
    return model;
}

}  // namespace ostb
