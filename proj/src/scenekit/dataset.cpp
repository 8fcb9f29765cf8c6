#include "wmerge/scenekit/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

namespace wmerge::scenekit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json record_to_json(const ManifestRecord& r) {
    json objs = json::array();
    for (const auto& o : r.objects) {
        objs.push_back({{"text", o.text},
                        {"bbox", {o.bbox.x, o.bbox.y, o.bbox.w, o.bbox.h}},
                        {"shape", o.shape},
                        {"color", o.color},
                        {"text_emb", o.text_emb},
                        {"img_emb", o.img_emb}});
    }
    json j{{"image", r.image_path}, {"prompt", r.prompt}, {"objects", objs}};
    if (r.scores) {
        j["scores"] = {{"single", r.scores->single_object},
                       {"pair", r.scores->object_pair},
                       {"total", r.scores->total}};
    }
    return j;
}

ManifestRecord record_from_json(const json& j) {
    ManifestRecord r;
    r.image_path = j.at("image").get<std::string>();
    r.prompt = j.at("prompt").get<std::string>();
    for (const auto& o : j.at("objects")) {
        ManifestObject mo;
        mo.text = o.at("text").get<std::string>();
        const auto& b = o.at("bbox");
        mo.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
        mo.shape = o.value("shape", -1);
        mo.color = o.value("color", -1);
        mo.text_emb = o.value("text_emb", -1);
        mo.img_emb = o.value("img_emb", -1);
        r.objects.push_back(std::move(mo));
    }
    if (j.contains("scores")) {
        Scores s;
        s.single_object = j["scores"].at("single").get<double>();
        s.object_pair = j["scores"].at("pair").get<double>();
        s.total = j["scores"].at("total").get<double>();
        r.scores = s;
    }
    return r;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("embedding cache: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("save_manifest: cannot open '" + path + "'");
    for (const auto& r : m.records) out << record_to_json(r).dump() << "\n";
    if (!out) throw IoError("save_manifest: write failed for '" + path + "'");
    out.close();

    const std::string emb_path = path + ".emb";
    std::ofstream eb(emb_path, std::ios::binary | std::ios::trunc);
    if (!eb) throw IoError("save_manifest: cannot open '" + emb_path + "'");
    const std::uint32_t dim =
        m.embeddings.empty() ? 0 : static_cast<std::uint32_t>(m.embeddings[0].size());
    put_u32(eb, static_cast<std::uint32_t>(m.embeddings.size()));
    put_u32(eb, dim);
    for (const auto& e : m.embeddings) {
        if (static_cast<std::uint32_t>(e.size()) != dim)
            throw DataError("save_manifest: inconsistent embedding dims");
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            const float f = static_cast<float>(e(i));
            eb.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    if (!eb) throw IoError("save_manifest: write failed for '" + emb_path + "'");
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_manifest: cannot open '" + path + "'");
    Manifest m;
    m.dir = fs::path(path).parent_path().string();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw FormatError("load_manifest: bad JSON at line " + std::to_string(line_no));
        m.records.push_back(record_from_json(j));
    }

    const std::string emb_path = path + ".emb";
    std::ifstream eb(emb_path, std::ios::binary);
    if (eb) {
        const std::uint32_t count = get_u32(eb);
        const std::uint32_t dim = get_u32(eb);
        m.embeddings.reserve(count);
        for (std::uint32_t k = 0; k < count; ++k) {
            Vec e(dim);
            for (std::uint32_t i = 0; i < dim; ++i) {
                float f;
                eb.read(reinterpret_cast<char*>(&f), 4);
                if (!eb) throw FormatError("embedding cache: truncated data");
                e(i) = static_cast<double>(f);
            }
            m.embeddings.push_back(std::move(e));
        }
    }
    return m;
}

Manifest build_dataset(const DatasetOptions& opt, Embedder& embedder, const std::string& out_dir) {
    if (opt.n_images < 1) throw ArgumentError("build_dataset: n_images must be >= 1");
    if (opt.max_objects < 1 || opt.max_objects > 4)
        throw ArgumentError("build_dataset: max_objects must be in [1, 4]");
    if (static_cast<int>(opt.count_mixture.size()) < opt.max_objects)
        throw ArgumentError("build_dataset: count_mixture shorter than max_objects");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("build_dataset: cannot create '" + out_dir + "': " + ec.message());

    double mix_total = 0.0;
    for (int i = 0; i < opt.max_objects; ++i) mix_total += opt.count_mixture[static_cast<std::size_t>(i)];
    if (!(mix_total > 0)) throw ArgumentError("build_dataset: count mixture sums to zero");

    Manifest m;
    m.dir = out_dir;
    for (int idx = 0; idx < opt.n_images; ++idx) {
        Rng rng(Rng::derive_seed(opt.seed, "scene", static_cast<std::uint64_t>(idx)));
        const double u = rng.uniform() * mix_total;
        int n_objects = opt.max_objects;
        double acc = 0.0;
        for (int i = 0; i < opt.max_objects; ++i) {
            acc += opt.count_mixture[static_cast<std::size_t>(i)];
            if (u < acc) {
                n_objects = i + 1;
                break;
            }
        }
        const Scene scene = gen_scene(rng, n_objects);

        char name[32];
        std::snprintf(name, sizeof(name), "img_%06d.png", idx);
        write_png(scene.image, (fs::path(out_dir) / name).string());

        ManifestRecord rec;
        rec.image_path = name;
        rec.prompt = scene.spec.prompt;
        for (const auto& obj : scene.spec.objects) {
            ManifestObject mo;
            mo.text = obj.label();
            mo.bbox = obj.bbox;
            mo.shape = obj.shape;
            mo.color = obj.color;
            mo.text_emb = static_cast<int>(m.embeddings.size());
            m.embeddings.push_back(f32_snap(embedder.embed_text(mo.text)));
            mo.img_emb = static_cast<int>(m.embeddings.size());
            m.embeddings.push_back(f32_snap(embedder.embed_image(crop(scene.image, obj.bbox))));
            rec.objects.push_back(std::move(mo));
        }
        m.records.push_back(std::move(rec));
    }
    save_manifest(m, (fs::path(out_dir) / "manifest.jsonl").string());
    return m;
}

}  // namespace wmerge::scenekit
