#include "camoadapt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace camo {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'C', 'D'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v & 0xff));
    out.push_back(uint8_t((v >> 8) & 0xff));
    out.push_back(uint8_t((v >> 16) & 0xff));
    out.push_back(uint8_t((v >> 24) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file " + path);
    }
    uint32_t u32() {
        need(4);
        uint32_t v = uint32_t(buf[pos]) | (uint32_t(buf[pos + 1]) << 8) | (uint32_t(buf[pos + 2]) << 16) |
                     (uint32_t(buf[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    float f32() {
        uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

}  // namespace

uint32_t crc32_ieee(const uint8_t* data, size_t len, uint32_t seed) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
            table[i] = c;
        }
        init = true;
    }
    uint32_t c = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(const std::vector<ParamRef<float>>& params, const std::string& path) {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kVersion);
    put_u32(buf, (uint32_t)params.size());
    for (const auto& p : params) {
        put_u32(buf, (uint32_t)p.name.size());
        buf.insert(buf.end(), p.name.begin(), p.name.end());
        buf.push_back(0);  // dtype tag: f32
        buf.push_back((uint8_t)p.v.shape().size());
        for (int d : p.v.shape()) put_u32(buf, (uint32_t)d);
        for (float f : p.v.data()) put_f32(buf, f);
    }
    put_u32(buf, crc32_ieee(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), (std::streamsize)buf.size());
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw std::runtime_error("checkpoint: truncated file " + path);

    const uint32_t stored = uint32_t(buf[buf.size() - 4]) | (uint32_t(buf[buf.size() - 3]) << 8) |
                            (uint32_t(buf[buf.size() - 2]) << 16) | (uint32_t(buf[buf.size() - 1]) << 24);
    if (crc32_ieee(buf.data(), buf.size() - 4) != stored)
        throw std::runtime_error("checkpoint: CRC mismatch in " + path + ", refusing to load");

    Reader r{buf, 0, path};
    if (r.str(4) != std::string(kMagic, 4)) throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version) + " in " +
                                 path);
    const uint32_t count = r.u32();
    std::vector<CheckpointEntry> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        e.name = r.str(r.u32());
        const uint8_t dtype = r.u8();
        if (dtype != 0) throw std::runtime_error("checkpoint: unknown dtype tag for " + e.name);
        const int rank = r.u8();
        size_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            e.shape.push_back((int)r.u32());
            numel *= (size_t)e.shape.back();
        }
        e.data.resize(numel);
        for (size_t j = 0; j < numel; ++j) e.data[j] = r.f32();
        out.push_back(std::move(e));
    }
    return out;
}

void apply_checkpoint(Model<float>& model, const std::string& path) {
    auto entries = load_checkpoint(path);
    if (entries.size() != model.params.size())
        throw std::runtime_error("checkpoint: " + path + " holds " + std::to_string(entries.size()) +
                                 " tensors but the model has " + std::to_string(model.params.size()) +
                                 " (config mismatch?)");
    for (size_t i = 0; i < entries.size(); ++i) {
        auto& p = model.params[i];
        const auto& e = entries[i];
        if (e.name != p.name)
            throw std::runtime_error("checkpoint: tensor order mismatch at '" + e.name + "' (expected '" +
                                     p.name + "')");
        if (e.shape != p.v.shape())
            throw std::runtime_error("checkpoint: shape mismatch for tensor '" + e.name + "': file " +
                                     shape_str(e.shape) + " vs model " + shape_str(p.v.shape()));
        p.v.data() = e.data;
    }
}

}  // namespace camo
