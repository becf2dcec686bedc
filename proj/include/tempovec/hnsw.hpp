#pragma once

// Hierarchical navigable small-world graph for approximate nearest-neighbor
// search over unit vectors (cosine similarity = dot product).
//
// Layout follows the standard construction: each node gets a geometrically
// sampled top layer, greedy descent locates the neighborhood, and a beam
// search (ef_construction wide) selects M diverse neighbors per layer via
// the closer-to-query-than-to-any-chosen heuristic. Layer 0 allows 2M links.
//
// Deletion is logical: tombstoned nodes keep their edges and stay
// traversable so the graph never fragments, but they are excluded from
// results. Rebuild (compaction) happens above this class.
//
// The node-id space is caller-assigned and sparse-friendly: ids never seen
// by insert() simply do not exist in the graph.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <queue>
#include <random>
#include <shared_mutex>
#include <vector>

#include "tempovec/types.hpp"

namespace tempovec {

struct HnswParams {
    std::size_t dimension = 384;
    std::size_t M = 16;
    std::size_t ef_construction = 200;
    std::size_t ef_search = 64;
    std::uint64_t seed = 0x7e3a21c5u;
};

class HnswIndex {
public:
    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    explicit HnswIndex(HnswParams params = {}) : params_(params), rng_(params.seed) {
        if (params_.dimension == 0)
            throw UsageError("index dimension must be positive");
        if (params_.M < 2)
            throw UsageError("M must be at least 2");
        inv_log_m_ = 1.0 / std::log(static_cast<double>(params_.M));
    }

    const HnswParams& params() const { return params_; }

    std::size_t size() const {
        std::shared_lock lk(mu_);
        return node_count_;
    }

    std::size_t live_count() const {
        std::shared_lock lk(mu_);
        return live_count_;
    }

    bool contains(std::uint32_t id) const {
        std::shared_lock lk(mu_);
        return exists(id);
    }

    bool is_live(std::uint32_t id) const {
        std::shared_lock lk(mu_);
        return exists(id) && !nodes_[id].dead;
    }

    void insert(std::uint32_t id, const float* vec) {
        std::unique_lock lk(mu_);
        if (id == kNone)
            throw UsageError("node id out of range");
        if (exists(id))
            throw ConflictError("node id already in index: " + std::to_string(id));

        int level = sample_level();
        ensure_slot(id);
        std::copy(vec, vec + params_.dimension, vector_ptr(id));
        Node& node = nodes_[id];
        node.present = true;
        node.dead = false;
        node.level = level;
        node.links.assign(static_cast<std::size_t>(level) + 1, {});
        ++node_count_;
        ++live_count_;

        if (entry_ == kNone) {
            entry_ = id;
            max_level_ = level;
            return;
        }

        // Greedy descent through layers above the node's top layer.
        std::vector<std::uint32_t> entries{entry_};
        for (int layer = max_level_; layer > level; --layer)
            entries[0] = greedy_closest(vec, entries[0], layer);

        for (int layer = std::min(level, max_level_); layer >= 0; --layer) {
            // The whole beam carries down to the next layer, not just the
            // closest hit; single-entry descent loses too much neighborhood
            // quality on weakly clustered data.
            auto candidates = search_layer(vec, entries, params_.ef_construction,
                                           layer, /*include_dead=*/true);
            std::size_t max_links = degree_cap(layer);
            extend_candidates(vec, candidates, layer);
            // New nodes take the full layer cap (2M on layer 0); denser
            // base-layer linkage buys recall on weakly clustered data.
            auto selected = select_neighbors(vec, candidates, max_links);
            node.links[static_cast<std::size_t>(layer)] = selected;
            for (std::uint32_t peer : selected) {
                auto& peer_links = nodes_[peer].links[static_cast<std::size_t>(layer)];
                peer_links.push_back(id);
                if (peer_links.size() > max_links)
                    shrink_links(peer, layer, max_links);
            }
            entries.clear();
            for (const auto& [sim, cid] : candidates)
                entries.push_back(cid);
            if (entries.empty())
                entries.push_back(entry_);
        }

        if (level > max_level_) {
            max_level_ = level;
            entry_ = id;
        }
    }

    // Logical delete: node stays traversable, never returned.
    void remove(std::uint32_t id) {
        std::unique_lock lk(mu_);
        if (!exists(id) || nodes_[id].dead)
            throw ConflictError("node id not live: " + std::to_string(id));
        nodes_[id].dead = true;
        --live_count_;
    }

    // Top-k live ids by descending similarity; ties by ascending id.
    // ef_override widens the beam (0 = configured ef_search).
    std::vector<std::pair<float, std::uint32_t>> search(
        const float* query, std::size_t k, std::size_t ef_override = 0) const {
        std::shared_lock lk(mu_);
        if (k == 0 || live_count_ == 0)
            return {};

        std::size_t ef = std::max(ef_override ? ef_override : params_.ef_search, k);
        std::vector<std::pair<float, std::uint32_t>> found;

        if (live_count_ <= ef || entry_ == kNone) {
            // Beam would cover everything: scan instead, exact and safe even
            // if deletions have thinned the graph.
            for (std::uint32_t id = 0; id < nodes_.size(); ++id)
                if (nodes_[id].present && !nodes_[id].dead)
                    found.emplace_back(similarity(query, id), id);
        } else {
            std::uint32_t cursor = entry_;
            for (int layer = max_level_; layer > 0; --layer)
                cursor = greedy_closest(query, cursor, layer);
            found = search_layer(query, {cursor}, ef, 0, /*include_dead=*/false);
        }

        std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first)
                return a.first > b.first;
            return a.second < b.second;
        });
        if (found.size() > k)
            found.resize(k);
        return found;
    }

    // Directed reachability from the entry point, tombstones traversable.
    // The structural invariant: every live node is reachable on layer 0.
    std::vector<std::uint32_t> unreachable_live_nodes() const {
        std::shared_lock lk(mu_);
        std::vector<std::uint32_t> missing;
        if (entry_ == kNone) {
            for (std::uint32_t id = 0; id < nodes_.size(); ++id)
                if (nodes_[id].present && !nodes_[id].dead)
                    missing.push_back(id);
            return missing;
        }
        std::vector<bool> seen(nodes_.size(), false);
        std::vector<std::uint32_t> stack{entry_};
        seen[entry_] = true;
        while (!stack.empty()) {
            std::uint32_t id = stack.back();
            stack.pop_back();
            for (std::uint32_t peer : nodes_[id].links[0]) {
                if (!seen[peer]) {
                    seen[peer] = true;
                    stack.push_back(peer);
                }
            }
        }
        for (std::uint32_t id = 0; id < nodes_.size(); ++id)
            if (nodes_[id].present && !nodes_[id].dead && !seen[id])
                missing.push_back(id);
        return missing;
    }

    std::size_t max_degree(int layer) const {
        std::shared_lock lk(mu_);
        std::size_t worst = 0;
        for (const auto& node : nodes_) {
            if (!node.present || layer > node.level)
                continue;
            worst = std::max(worst, node.links[static_cast<std::size_t>(layer)].size());
        }
        return worst;
    }

private:
    struct Node {
        bool present = false;
        bool dead = false;
        int level = 0;
        std::vector<std::vector<std::uint32_t>> links;
    };

    bool exists(std::uint32_t id) const {
        return id < nodes_.size() && nodes_[id].present;
    }

    void ensure_slot(std::uint32_t id) {
        if (id >= nodes_.size()) {
            nodes_.resize(id + 1);
            vectors_.resize((static_cast<std::size_t>(id) + 1) * params_.dimension);
        }
    }

    float* vector_ptr(std::uint32_t id) {
        return vectors_.data() + static_cast<std::size_t>(id) * params_.dimension;
    }

    const float* vector_ptr(std::uint32_t id) const {
        return vectors_.data() + static_cast<std::size_t>(id) * params_.dimension;
    }

    float similarity(const float* q, std::uint32_t id) const {
        const float* v = vector_ptr(id);
        float dot = 0.0f;
        for (std::size_t i = 0; i < params_.dimension; ++i)
            dot += q[i] * v[i];
        return dot;
    }

    std::size_t degree_cap(int layer) const {
        return layer == 0 ? 2 * params_.M : params_.M;
    }

    // Geometric layer assignment: floor(-ln(U) / ln(M)).
    int sample_level() {
        double u = (static_cast<double>(rng_() >> 11) + 1.0) / 9007199254740993.0;
        return static_cast<int>(-std::log(u) * inv_log_m_);
    }

    std::uint32_t greedy_closest(const float* q, std::uint32_t start, int layer) const {
        std::uint32_t best = start;
        float best_sim = similarity(q, best);
        bool improved = true;
        while (improved) {
            improved = false;
            for (std::uint32_t peer : nodes_[best].links[static_cast<std::size_t>(layer)]) {
                float sim = similarity(q, peer);
                if (sim > best_sim) {
                    best_sim = sim;
                    best = peer;
                    improved = true;
                }
            }
        }
        return best;
    }

    // Beam search within one layer from one or more entry points. Returns
    // up to ef nodes sorted by descending similarity. Dead nodes are
    // traversed either way; they are kept as candidates only when
    // include_dead (construction needs their edges; queries must not see
    // them).
    std::vector<std::pair<float, std::uint32_t>> search_layer(
        const float* q, const std::vector<std::uint32_t>& starts, std::size_t ef,
        int layer, bool include_dead) const {
        // Max-heap of nodes to expand, min-heap of results to keep.
        std::priority_queue<std::pair<float, std::uint32_t>> to_expand;
        std::priority_queue<std::pair<float, std::uint32_t>,
                            std::vector<std::pair<float, std::uint32_t>>,
                            std::greater<>>
            results;
        std::vector<bool> seen(nodes_.size(), false);

        for (std::uint32_t start : starts) {
            if (seen[start])
                continue;
            seen[start] = true;
            float start_sim = similarity(q, start);
            to_expand.emplace(start_sim, start);
            if (include_dead || !nodes_[start].dead) {
                results.emplace(start_sim, start);
                if (results.size() > ef)
                    results.pop();
            }
        }

        while (!to_expand.empty()) {
            auto [sim, id] = to_expand.top();
            if (results.size() >= ef && sim < results.top().first)
                break;
            to_expand.pop();
            for (std::uint32_t peer : nodes_[id].links[static_cast<std::size_t>(layer)]) {
                if (seen[peer])
                    continue;
                seen[peer] = true;
                float peer_sim = similarity(q, peer);
                if (results.size() < ef || peer_sim > results.top().first) {
                    to_expand.emplace(peer_sim, peer);
                    if (include_dead || !nodes_[peer].dead) {
                        results.emplace(peer_sim, peer);
                        if (results.size() > ef)
                            results.pop();
                    }
                }
            }
        }

        std::vector<std::pair<float, std::uint32_t>> out;
        out.resize(results.size());
        for (std::size_t i = results.size(); i-- > 0;) {
            out[i] = results.top();
            results.pop();
        }
        return out;
    }

    // Widens a selection pool with the candidates' own layer neighbors,
    // re-sorted by similarity to the query.
    void extend_candidates(const float* q,
                           std::vector<std::pair<float, std::uint32_t>>& candidates,
                           int layer) const {
        std::vector<bool> seen(nodes_.size(), false);
        for (const auto& [sim, id] : candidates)
            seen[id] = true;
        std::size_t original = candidates.size();
        for (std::size_t i = 0; i < original; ++i) {
            for (std::uint32_t peer :
                 nodes_[candidates[i].second].links[static_cast<std::size_t>(layer)]) {
                if (seen[peer])
                    continue;
                seen[peer] = true;
                candidates.emplace_back(similarity(q, peer), peer);
            }
        }
        std::sort(candidates.begin(), candidates.end(),
                  [](const auto& a, const auto& b) {
                      if (a.first != b.first)
                          return a.first > b.first;
                      return a.second < b.second;
                  });
    }

    // Diversity heuristic: keep a candidate only if it is closer to the
    // query than to every neighbor already kept. Rejected candidates then
    // backfill remaining capacity closest-first; near-orthogonal data would
    // otherwise leave nodes badly under-linked.
    std::vector<std::uint32_t> select_neighbors(
        const float* q,
        const std::vector<std::pair<float, std::uint32_t>>& candidates,
        std::size_t m) const {
        std::vector<std::uint32_t> out;
        std::vector<std::uint32_t> pruned;
        for (const auto& [sim_to_q, id] : candidates) {
            if (out.size() >= m)
                break;
            bool diverse = true;
            for (std::uint32_t kept : out) {
                if (similarity(vector_ptr(id), kept) > sim_to_q) {
                    diverse = false;
                    break;
                }
            }
            if (diverse)
                out.push_back(id);
            else
                pruned.push_back(id);
        }
        for (std::size_t i = 0; out.size() < m && i < pruned.size(); ++i)
            out.push_back(pruned[i]);
        return out;
    }

    void shrink_links(std::uint32_t id, int layer, std::size_t max_links) {
        auto& links = nodes_[id].links[static_cast<std::size_t>(layer)];
        std::vector<std::pair<float, std::uint32_t>> scored;
        scored.reserve(links.size());
        const float* v = vector_ptr(id);
        for (std::uint32_t peer : links)
            scored.emplace_back(similarity(v, peer), peer);
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first)
                return a.first > b.first;
            return a.second < b.second;
        });
        links = select_neighbors(v, scored, max_links);
    }

    HnswParams params_;
    double inv_log_m_;
    std::mt19937_64 rng_;

    mutable std::shared_mutex mu_;
    std::vector<Node> nodes_;
    std::vector<float> vectors_;
    std::size_t node_count_ = 0;
    std::size_t live_count_ = 0;
    std::uint32_t entry_ = kNone;
    int max_level_ = -1;
};

}  // namespace tempovec
