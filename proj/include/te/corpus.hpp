#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "te/png_io.hpp"
#include "te/tensor.hpp"

namespace te {

// The unified affordance vocabulary, in the fixed bit order used everywhere.
constexpr int kNumTags = 13;
const std::array<std::string, kNumTags>& tag_names();
std::optional<int> tag_index(const std::string& name_any_case);

constexpr int kTilePx = 16;       // working tile edge after ingestion
constexpr int kContextPx = 48;    // 3x3 tile neighborhood
constexpr char kOobChar = '\x01'; // out-of-bounds marker in dedup keys

struct CorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AffordanceVector {
    std::array<std::uint8_t, kNumTags> bits{};

    bool operator==(const AffordanceVector&) const = default;
    bool any() const {
        for (auto b : bits)
            if (b) return true;
        return false;
    }
    int count() const {
        int n = 0;
        for (auto b : bits) n += b;
        return n;
    }
    std::vector<std::string> to_tags() const;
};

struct TileLegend {
    std::string game_id;
    std::map<char, AffordanceVector> char_to_affordances;
    int tile_px = kTilePx;  // 8 or 16 in source images
};

struct LevelGrid {
    std::string game_id;
    std::string level_id;
    int width = 0, height = 0;          // tile counts
    std::vector<std::string> chars;     // empty for unannotated games
    Image pixels;                       // 16*H x 16*W, [0,1]
    std::vector<AffordanceVector> affordances;  // row-major H*W

    AffordanceVector& aff(int y, int x) { return affordances[static_cast<std::size_t>(y) * width + x]; }
    const AffordanceVector& aff(int y, int x) const {
        return affordances[static_cast<std::size_t>(y) * width + x];
    }
    bool annotated() const { return !chars.empty(); }
};

struct ContextSample {
    Tensor pixels;  // [48,48,3]
    AffordanceVector center_affordance;
    std::string dedup_key;
    std::string game_id, level_id;
    int x = 0, y = 0;
};

struct Dataset {
    std::vector<ContextSample> samples;
    Tensor label_weights;  // [13]
    std::vector<std::string> tag_order;
};

// Legend JSON: {"tile_px": 16, "tiles": {"<char>": ["<tag>", ...]}}.
TileLegend load_legend(const std::filesystem::path& path, const std::string& game_id);
TileLegend parse_legend(const std::string& json_text, const std::string& game_id);

LevelGrid ingest_level(const std::filesystem::path& image_path,
                       const std::optional<std::filesystem::path>& grid_path,
                       const std::optional<TileLegend>& legend);
LevelGrid ingest_level_from(const Image& image, const std::vector<std::string>& grid_rows,
                            const std::optional<TileLegend>& legend, const std::string& game_id,
                            const std::string& level_id);

std::vector<ContextSample> extract_contexts(const LevelGrid& level);
std::vector<ContextSample> dedup_contexts(const std::vector<ContextSample>& samples);

// Smoothed IDF, mean-normalized: w_i = ln(N/(1+df_i)) + 1, then w /= mean(w).
Tensor compute_label_weights(const std::vector<ContextSample>& samples);

struct GameCorpus {
    std::optional<TileLegend> legend;
    std::vector<LevelGrid> levels;
};

// Dedup is applied per game; weights are computed over the merged samples.
Dataset build_dataset(const std::vector<GameCorpus>& games);

// Loads `corpus/<game>/legend.json` + `corpus/<game>/levels/*.png` (+ .txt).
GameCorpus load_game(const std::filesystem::path& game_dir);

// TCDS binary export with a JSON sidecar for weights and tag order.
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace te
