#include "wmerge/scenekit/embedder.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <sstream>

namespace wmerge::scenekit {

namespace {

std::string base64_encode(const std::vector<std::uint8_t>& data) {
    static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < data.size(); i += 3) {
        std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
        if (i + 1 < data.size()) v |= static_cast<std::uint32_t>(data[i + 1]) << 8;
        if (i + 2 < data.size()) v |= data[i + 2];
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(i + 1 < data.size() ? tbl[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < data.size() ? tbl[v & 63] : '=');
    }
    return out;
}

class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(HttpEmbedderOptions opt, int dim) : opt_(std::move(opt)), dim_(dim) {}

    Vec embed_text(const std::string& label) override { return request("text", label); }

    Vec embed_image(const Image& crop) override {
        // Raw RGB payload: "w,h," + base64 of the pixel bytes.
        std::ostringstream os;
        os << crop.w << "," << crop.h << "," << base64_encode(crop.rgb);
        return request("image", os.str());
    }

    int dim() const override { return dim_; }

private:
    Vec request(const char* kind, const std::string& payload) {
        nlohmann::json body{{"kind", kind}, {"payload", payload}};
        const std::string body_str = body.dump();
        std::string last_error;
        for (int attempt = 0; attempt <= opt_.retries; ++attempt) {
            httplib::Client client(opt_.host, opt_.port);
            client.set_connection_timeout(opt_.timeout_sec);
            client.set_read_timeout(opt_.timeout_sec);
            auto res = client.Post(opt_.path, body_str, "application/json");
            if (!res) {
                last_error = "connection failed";
                continue;
            }
            if (res->status != 200) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            const auto j = nlohmann::json::parse(res->body, nullptr, false);
            if (j.is_discarded() || !j.contains("vector"))
                throw DataError("embedding service returned malformed body");
            const auto& v = j["vector"];
            Vec out(static_cast<Eigen::Index>(v.size()));
            for (std::size_t i = 0; i < v.size(); ++i)
                out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
            return out;
        }
        throw IoError("embedding service unreachable after " + std::to_string(opt_.retries + 1) +
                      " attempts (" + last_error + ")");
    }

    HttpEmbedderOptions opt_;
    int dim_;
};

}  // namespace

std::unique_ptr<Embedder> make_http_embedder(const HttpEmbedderOptions& opt, int dim) {
    return std::make_unique<HttpEmbedder>(opt, dim);
}

}  // namespace wmerge::scenekit
