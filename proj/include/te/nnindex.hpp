#pragma once

#include <filesystem>

#include "te/corpus.hpp"
#include "te/tensor.hpp"

namespace te {

// A stored embedding and everything needed to paste its tile back into a
// generated level.
struct StoreItem {
    Tensor embedding;          // [dim]
    Tensor tile;               // [16,16,3]
    AffordanceVector affordance;
    std::string game_id, level_id;
    int x = 0, y = 0;
};

struct EmbeddingStore {
    std::vector<StoreItem> items;
    int dim() const { return items.empty() ? 0 : items.front().embedding.dim(0); }
};

double l1_distance(const Tensor& a, const Tensor& b);

// Exhaustive L1 scan; ties broken by lowest id. The test oracle for the forest.
int exact_nn(const EmbeddingStore& store, const Tensor& query);

// Forest of axis-aligned random projection trees. Node split: pick two random
// items, split at the midpoint of the coordinate where they differ most.
struct RPForest {
    struct Node {
        int split_dim = -1;          // -1 marks a leaf
        double threshold = 0.0;
        int left = -1, right = -1;
        std::vector<int> items;      // leaf only
        bool is_leaf() const { return split_dim < 0; }
    };
    int tree_count = 0;
    int leaf_capacity = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<Node>> trees;  // node 0 is each tree's root

    // High-dimensional L1 neighborhoods concentrate, so the default budget is
    // deliberately generous: small stores degrade gracefully to an exact scan
    // while large stores still get a bounded-cost approximate search.
    int default_budget() const { return tree_count * 512; }
};

RPForest build_index(const EmbeddingStore& store, int tree_count = 10, int leaf_capacity = 16,
                     std::uint64_t seed = 0);

// Best-first search across all trees; stops once `search_budget` distinct
// candidates have been scored. budget <= 0 uses the forest default.
int query_nn(const RPForest& forest, const EmbeddingStore& store, const Tensor& query,
             int search_budget = 0);

// TCNN container: store payloads + forest topology, byte-exact round trip.
void save_index(const std::filesystem::path& path, const RPForest& forest,
                const EmbeddingStore& store);
std::pair<RPForest, EmbeddingStore> load_index(const std::filesystem::path& path);

}  // namespace te
