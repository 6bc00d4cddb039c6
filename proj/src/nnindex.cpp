#include "te/nnindex.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <queue>

#include "te/io.hpp"

namespace te {

double l1_distance(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw GeometryError("l1: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::abs(a.data[i] - b.data[i]);
    return acc;
}

int exact_nn(const EmbeddingStore& store, const Tensor& query) {
    if (store.items.empty()) throw GeometryError("exact_nn: empty store");
    int best = 0;
    double best_d = l1_distance(store.items[0].embedding, query);
    for (int i = 1; i < static_cast<int>(store.items.size()); ++i) {
        double d = l1_distance(store.items[static_cast<std::size_t>(i)].embedding, query);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

namespace {

int build_node(std::vector<RPForest::Node>& nodes, const EmbeddingStore& store,
               std::vector<int> items, int leaf_capacity, Rng& rng) {
    int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (static_cast<int>(items.size()) <= leaf_capacity) {
        nodes[static_cast<std::size_t>(id)].items = std::move(items);
        return id;
    }
    const int dim = store.dim();
    // midpoint split along the coordinate where two random items differ most
    int a = items[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(items.size()) - 1))];
    int b = items[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(items.size()) - 1))];
    const Tensor& ea = store.items[static_cast<std::size_t>(a)].embedding;
    const Tensor& eb = store.items[static_cast<std::size_t>(b)].embedding;
    int split_dim = 0;
    double best_gap = -1.0;
    for (int d = 0; d < dim; ++d) {
        double gap = std::abs(ea.data[static_cast<std::size_t>(d)] -
                              eb.data[static_cast<std::size_t>(d)]);
        if (gap > best_gap) {
            best_gap = gap;
            split_dim = d;
        }
    }
    double threshold = 0.5 * (ea.data[static_cast<std::size_t>(split_dim)] +
                              eb.data[static_cast<std::size_t>(split_dim)]);
    std::vector<int> left, right;
    for (int it : items)
        (store.items[static_cast<std::size_t>(it)].embedding.data[static_cast<std::size_t>(split_dim)] <
                 threshold
             ? left
             : right)
            .push_back(it);
    if (left.empty() || right.empty()) {
        // degenerate pick (identical items); fall back to a leaf
        nodes[static_cast<std::size_t>(id)].items = std::move(items);
        return id;
    }
    int l = build_node(nodes, store, std::move(left), leaf_capacity, rng);
    int r = build_node(nodes, store, std::move(right), leaf_capacity, rng);
    nodes[static_cast<std::size_t>(id)].split_dim = split_dim;
    nodes[static_cast<std::size_t>(id)].threshold = threshold;
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = r;
    return id;
}

}  // namespace

RPForest build_index(const EmbeddingStore& store, int tree_count, int leaf_capacity,
                     std::uint64_t seed) {
    if (store.items.empty()) throw GeometryError("build_index: empty store");
    if (tree_count < 1) throw GeometryError("build_index: tree count must be >= 1");
    RPForest f;
    f.tree_count = tree_count;
    f.leaf_capacity = leaf_capacity;
    f.seed = seed;
    Rng rng(seed);
    std::vector<int> all(store.items.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    for (int t = 0; t < tree_count; ++t) {
        std::vector<RPForest::Node> nodes;
        build_node(nodes, store, all, leaf_capacity, rng);
        f.trees.push_back(std::move(nodes));
    }
    return f;
}

int query_nn(const RPForest& forest, const EmbeddingStore& store, const Tensor& query,
             int search_budget) {
    if (forest.trees.empty()) throw GeometryError("query_nn: forest not built");
    if (search_budget <= 0) search_budget = forest.default_budget();
    // best-first over (margin to the splitting plane, tree, node)
    struct Entry {
        double priority;
        int tree, node;
        bool operator<(const Entry& o) const { return priority < o.priority; }
    };
    std::priority_queue<Entry> pq;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    for (int t = 0; t < forest.tree_count; ++t) pq.push({kInf, t, 0});
    std::vector<char> seen(store.items.size(), 0);
    int best = -1;
    double best_d = kInf;
    int scanned = 0;
    while (!pq.empty() && scanned < search_budget) {
        Entry e = pq.top();
        pq.pop();
        const auto& node =
            forest.trees[static_cast<std::size_t>(e.tree)][static_cast<std::size_t>(e.node)];
        if (node.is_leaf()) {
            for (int id : node.items) {
                if (seen[static_cast<std::size_t>(id)]) continue;
                seen[static_cast<std::size_t>(id)] = 1;
                ++scanned;
                double d = l1_distance(store.items[static_cast<std::size_t>(id)].embedding, query);
                if (d < best_d || (d == best_d && id < best)) {
                    best_d = d;
                    best = id;
                }
            }
            continue;
        }
        double qv = query.data[static_cast<std::size_t>(node.split_dim)];
        double margin = std::abs(qv - node.threshold);
        int near = qv < node.threshold ? node.left : node.right;
        int far = qv < node.threshold ? node.right : node.left;
        pq.push({e.priority, e.tree, near});
        pq.push({std::min(e.priority, -margin), e.tree, far});
    }
    if (best < 0) best = exact_nn(store, query);  // budget smaller than any leaf
    return best;
}

constexpr std::uint16_t kTcnnVersion = 1;

void save_index(const std::filesystem::path& path, const RPForest& forest,
                const EmbeddingStore& store) {
    AtomicFile f(path);
    std::ostream& os = f.stream();
    bin::write_bytes(os, "TCNN", 4);
    bin::write_le<std::uint16_t>(os, kTcnnVersion);
    bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(store.dim()));
    bin::write_le<std::uint64_t>(os, store.items.size());
    for (const auto& it : store.items) {
        bin::write_string(os, it.game_id);
        bin::write_string(os, it.level_id);
        bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(it.x));
        bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(it.y));
        for (double v : it.embedding.data) bin::write_f32(os, static_cast<float>(v));
        for (double v : it.tile.data) bin::write_f32(os, static_cast<float>(v));
        for (auto b : it.affordance.bits) bin::write_le<std::uint8_t>(os, b);
    }
    bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(forest.tree_count));
    bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(forest.leaf_capacity));
    bin::write_le<std::uint64_t>(os, forest.seed);
    for (const auto& tree : forest.trees) {
        bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tree.size()));
        for (const auto& n : tree) {
            bin::write_le<std::uint8_t>(os, n.is_leaf() ? 1 : 0);
            if (n.is_leaf()) {
                bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(n.items.size()));
                for (int id : n.items) bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(id));
            } else {
                bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(n.split_dim));
                bin::write_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(n.threshold));
                bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(n.left));
                bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(n.right));
            }
        }
    }
    f.commit();
}

std::pair<RPForest, EmbeddingStore> load_index(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[4];
    bin::read_bytes(is, magic, 4, "TCNN magic");
    if (std::string(magic, 4) != "TCNN") throw IoError("bad magic, not a TCNN file");
    auto version = bin::read_le<std::uint16_t>(is, "TCNN version");
    if (version != kTcnnVersion) throw IoError("TCNN version mismatch: " + std::to_string(version));
    int dim = static_cast<int>(bin::read_le<std::uint32_t>(is, "embedding dim"));
    auto count = bin::read_le<std::uint64_t>(is, "item count");
    EmbeddingStore store;
    for (std::uint64_t i = 0; i < count; ++i) {
        StoreItem it;
        it.game_id = bin::read_string(is, "game id");
        it.level_id = bin::read_string(is, "level id");
        it.x = static_cast<int>(bin::read_le<std::uint32_t>(is, "x"));
        it.y = static_cast<int>(bin::read_le<std::uint32_t>(is, "y"));
        it.embedding = Tensor({dim});
        for (double& v : it.embedding.data) v = bin::read_f32(is, "embedding");
        it.tile = Tensor({kTilePx, kTilePx, 3});
        for (double& v : it.tile.data) v = bin::read_f32(is, "tile");
        for (auto& b : it.affordance.bits) b = bin::read_le<std::uint8_t>(is, "flags");
        store.items.push_back(std::move(it));
    }
    RPForest f;
    f.tree_count = static_cast<int>(bin::read_le<std::uint32_t>(is, "tree count"));
    f.leaf_capacity = static_cast<int>(bin::read_le<std::uint32_t>(is, "leaf capacity"));
    f.seed = bin::read_le<std::uint64_t>(is, "forest seed");
    for (int t = 0; t < f.tree_count; ++t) {
        auto n_nodes = bin::read_le<std::uint32_t>(is, "node count");
        std::vector<RPForest::Node> nodes;
        for (std::uint32_t k = 0; k < n_nodes; ++k) {
            RPForest::Node n;
            auto leaf = bin::read_le<std::uint8_t>(is, "node kind");
            if (leaf) {
                auto cnt = bin::read_le<std::uint32_t>(is, "leaf size");
                for (std::uint32_t j = 0; j < cnt; ++j)
                    n.items.push_back(static_cast<int>(bin::read_le<std::uint32_t>(is, "leaf item")));
            } else {
                n.split_dim = static_cast<int>(bin::read_le<std::uint32_t>(is, "split dim"));
                n.threshold = std::bit_cast<double>(bin::read_le<std::uint64_t>(is, "threshold"));
                n.left = static_cast<int>(bin::read_le<std::uint32_t>(is, "left"));
                n.right = static_cast<int>(bin::read_le<std::uint32_t>(is, "right"));
            }
            nodes.push_back(std::move(n));
        }
        f.trees.push_back(std::move(nodes));
    }
    return {std::move(f), std::move(store)};
}

}  // namespace te
