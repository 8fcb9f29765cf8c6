#include "wmerge/diffusion/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <map>
#include <vector>

namespace wmerge::diffusion {

namespace {

constexpr char kMagic[4] = {'M', 'I', 'P', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& buf, std::uint16_t v) {
    buf.push_back(static_cast<std::uint8_t>(v & 0xff));
    buf.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tensor(std::vector<std::uint8_t>& buf, const std::string& name, const Grid& t) {
    if (name.size() > 0xffff) throw FormatError("checkpoint: tensor name too long");
    put_u16(buf, static_cast<std::uint16_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    buf.push_back(2);  // ndim
    put_u32(buf, static_cast<std::uint32_t>(t.rows()));
    put_u32(buf, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        const float f = static_cast<float>(t.data()[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(buf, bits);
    }
}

struct Reader {
    const std::uint8_t* p;
    std::size_t n;
    std::size_t off = 0;

    void need(std::size_t k, const char* what) {
        if (off + k > n)
            throw FormatError("checkpoint: truncated " + std::string(what) + " at byte offset " +
                              std::to_string(off));
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(p[off] | (p[off + 1] << 8));
        off += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return p[off++];
    }
};

int config_int(const std::map<std::string, Grid>& t, const std::string& key) {
    auto it = t.find("config." + key);
    if (it == t.end()) throw FormatError("checkpoint: missing config." + key);
    return static_cast<int>(std::llround(it->second(0, 0)));
}

Grid scalar(double v) {
    Grid g(1, 1);
    g(0, 0) = v;
    return g;
}

}  // namespace

void save_checkpoint(const DenoiserParams& params, const std::string& path) {
    std::vector<std::pair<std::string, Grid>> tensors;
    const ModelConfig& c = params.cfg;
    tensors.emplace_back("config.h", scalar(c.h));
    tensors.emplace_back("config.w", scalar(c.w));
    tensors.emplace_back("config.d", scalar(c.d));
    tensors.emplace_back("config.d_text", scalar(c.d_text));
    tensors.emplace_back("config.d_img", scalar(c.d_img));
    tensors.emplace_back("config.n_layers", scalar(c.n_layers));
    tensors.emplace_back("config.mlp_hidden", scalar(c.mlp_hidden));
    tensors.emplace_back("config.vocab", scalar(c.vocab));
    tensors.emplace_back("config.max_text_len", scalar(c.max_text_len));
    tensors.emplace_back("config.t_steps", scalar(c.t_steps));
    tensors.emplace_back("config.max_refs", scalar(c.max_refs));
    tensors.emplace_back("config.merge_mode", scalar(static_cast<int>(c.merge_mode)));
    tensors.emplace_back("config.null_image_mode", scalar(static_cast<int>(c.null_image_mode)));
    params.for_each_tensor(
        [&](const std::string& name, const Grid& t) { tensors.emplace_back(name, t); });

    std::vector<std::uint8_t> payload;
    for (const auto& [name, t] : tensors) put_tensor(payload, name, t);

    std::vector<std::uint8_t> file;
    file.insert(file.end(), kMagic, kMagic + 4);
    put_u32(file, kVersion);
    put_u32(file, static_cast<std::uint32_t>(tensors.size()));
    file.insert(file.end(), payload.begin(), payload.end());
    put_u32(file, static_cast<std::uint32_t>(
                      ::crc32(0, payload.data(), static_cast<uInt>(payload.size()))));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
    if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

DenoiserParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

    if (file.size() < 16 || std::memcmp(file.data(), kMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic at byte offset 0");
    Reader r{file.data(), file.size() - 4, 4};
    const std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported format version " + std::to_string(version) +
                          " (this build reads version 1)");
    const std::uint32_t count = r.u32("tensor count");

    const std::size_t payload_begin = r.off;
    std::map<std::string, Grid> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16("tensor name length");
        r.need(name_len, "tensor name");
        std::string name(reinterpret_cast<const char*>(file.data() + r.off), name_len);
        r.off += name_len;
        const std::uint8_t ndim = r.u8("ndim");
        if (ndim != 2) throw FormatError("checkpoint: tensor '" + name + "' has ndim != 2");
        const std::uint32_t rows = r.u32("rows");
        const std::uint32_t cols = r.u32("cols");
        Grid t(rows, cols);
        for (Eigen::Index k = 0; k < t.size(); ++k) {
            const std::uint32_t bits = r.u32("tensor data");
            float f;
            std::memcpy(&f, &bits, 4);
            t.data()[k] = static_cast<double>(f);
        }
        tensors.emplace(std::move(name), std::move(t));
    }

    const std::size_t payload_end = r.off;
    if (payload_end + 4 > file.size())
        throw FormatError("checkpoint: truncated CRC at byte offset " + std::to_string(payload_end));
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<std::uint32_t>(file[payload_end + i]) << (8 * i);
    const std::uint32_t actual = static_cast<std::uint32_t>(::crc32(
        0, file.data() + payload_begin, static_cast<uInt>(payload_end - payload_begin)));
    if (stored != actual)
        throw FormatError("checkpoint: CRC mismatch at byte offset " + std::to_string(payload_end));

    ModelConfig cfg;
    cfg.h = config_int(tensors, "h");
    cfg.w = config_int(tensors, "w");
    cfg.d = config_int(tensors, "d");
    cfg.d_text = config_int(tensors, "d_text");
    cfg.d_img = config_int(tensors, "d_img");
    cfg.n_layers = config_int(tensors, "n_layers");
    cfg.mlp_hidden = config_int(tensors, "mlp_hidden");
    cfg.vocab = config_int(tensors, "vocab");
    cfg.max_text_len = config_int(tensors, "max_text_len");
    cfg.t_steps = config_int(tensors, "t_steps");
    cfg.max_refs = config_int(tensors, "max_refs");
    cfg.merge_mode = static_cast<MergeMode>(config_int(tensors, "merge_mode"));
    cfg.null_image_mode = static_cast<NullImageMode>(config_int(tensors, "null_image_mode"));

    Rng dummy(0);
    DenoiserParams p = DenoiserParams::init(cfg, dummy);
    p.for_each_tensor([&](const std::string& name, Grid& t) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw FormatError("checkpoint: missing tensor '" + name + "'");
        if (it->second.rows() != t.rows() || it->second.cols() != t.cols())
            throw FormatError("checkpoint: tensor '" + name + "' has shape " +
                              numkit::shape_str(it->second) + ", expected " + numkit::shape_str(t));
        t = it->second;
    });
    return p;
}

}  // namespace wmerge::diffusion
