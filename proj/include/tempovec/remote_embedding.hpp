#pragma once

// HTTP client for an external embedding service.
//
// Protocol: POST {endpoint}/embed, body {"texts": [string]}, response
// {"vectors": [[float; dimension]]}. Vectors are L2-normalized client-side
// so the unit-norm invariant holds regardless of the server.

#include <chrono>
#include <cmath>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "tempovec/embedding.hpp"
#include "tempovec/types.hpp"

namespace tempovec {

class RemoteEmbedder : public Embedder {
public:
    explicit RemoteEmbedder(const EmbedderConfig& config)
        : dimension_(config.dimension),
          timeout_ms_(config.remote_timeout_ms),
          in_flight_(std::max(1, config.remote_max_in_flight)) {
        if (!config.remote_endpoint || config.remote_endpoint->empty())
            throw UsageError("remote embedder requires an endpoint");
        split_endpoint(*config.remote_endpoint);
    }

    EmbeddingVector embed(std::string_view text) override {
        auto vecs = embed_batch({std::string(text)});
        return std::move(vecs.front());
    }

    std::vector<EmbeddingVector> embed_batch(
        const std::vector<std::string>& texts) override {
        if (texts.empty())
            return {};

        nlohmann::json body;
        body["texts"] = texts;

        in_flight_.acquire();
        struct Release {
            std::counting_semaphore<>& sem;
            ~Release() { sem.release(); }
        } release{in_flight_};

        httplib::Client client(base_url_);
        auto timeout = std::chrono::milliseconds(timeout_ms_);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        auto res = client.Post(path_prefix_ + "/embed", body.dump(),
                               "application/json");
        if (!res)
            throw EmbeddingError("embedding service unreachable: " +
                                     httplib::to_string(res.error()),
                                 true);
        if (res->status != 200)
            throw EmbeddingError("embedding service returned HTTP " +
                                     std::to_string(res->status),
                                 false);

        nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("vectors") ||
            !parsed["vectors"].is_array())
            throw EmbeddingError("embedding service returned malformed body", false);
        const auto& vectors = parsed["vectors"];
        if (vectors.size() != texts.size())
            throw EmbeddingError("embedding service returned " +
                                     std::to_string(vectors.size()) +
                                     " vectors for " +
                                     std::to_string(texts.size()) + " texts",
                                 false);

        std::vector<EmbeddingVector> out;
        out.reserve(vectors.size());
        for (const auto& v : vectors) {
            if (!v.is_array() || v.size() != dimension_)
                throw DimensionMismatchError(dimension_, v.size());
            EmbeddingVector vec;
            vec.reserve(dimension_);
            double norm_sq = 0.0;
            for (const auto& x : v) {
                if (!x.is_number())
                    throw EmbeddingError("embedding component is not a number", false);
                float f = x.get<float>();
                if (!std::isfinite(f))
                    throw EmbeddingError("embedding component is not finite", false);
                norm_sq += static_cast<double>(f) * f;
                vec.push_back(f);
            }
            if (norm_sq <= 0.0)
                throw EmbeddingError("embedding service returned a zero vector", false);
            float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
            for (float& f : vec)
                f *= inv;
            out.push_back(std::move(vec));
        }
        count_ops(texts.size());
        return out;
    }

    std::size_t dimension() const override { return dimension_; }
    EmbedderProvider provider() const override { return EmbedderProvider::remote; }

private:
    // "http://host:port/prefix" -> base "http://host:port", prefix "/prefix".
    void split_endpoint(const std::string& endpoint) {
        auto scheme_end = endpoint.find("://");
        std::size_t host_start = (scheme_end == std::string::npos) ? 0 : scheme_end + 3;
        auto slash = endpoint.find('/', host_start);
        if (slash == std::string::npos) {
            base_url_ = endpoint;
        } else {
            base_url_ = endpoint.substr(0, slash);
            path_prefix_ = endpoint.substr(slash);
            while (!path_prefix_.empty() && path_prefix_.back() == '/')
                path_prefix_.pop_back();
        }
    }

    std::size_t dimension_;
    int timeout_ms_;
    std::string base_url_;
    std::string path_prefix_;
    std::counting_semaphore<> in_flight_;
};

inline std::unique_ptr<Embedder> make_remote_embedder(const EmbedderConfig& config) {
    return std::make_unique<RemoteEmbedder>(config);
}

}  // namespace tempovec
