#pragma once

#include <optional>

#include "te/lstm.hpp"
#include "te/nnindex.hpp"
#include "te/xae.hpp"

namespace te {

struct EmbeddedLevel {
    std::string game_id, level_id;
    int height = 0, width = 0;
    std::vector<Tensor> cells;  // row-major H*W, each [emb_dim]

    Tensor& cell(int y, int x) { return cells[static_cast<std::size_t>(y) * width + x]; }
    const Tensor& cell(int y, int x) const {
        return cells[static_cast<std::size_t>(y) * width + x];
    }
};

// Input t carries the previous cell's embedding (zeros at t=0) plus the
// normalized coordinates of the cell being predicted; target t is that
// cell's embedding.
struct SequenceSample {
    Tensor inputs;   // [T, emb_dim+2]
    Tensor targets;  // [T, emb_dim]
};

constexpr int kHistoryRows = 3;
constexpr int kWindowRows = 2 * kHistoryRows;  // 3 context rows + 3 target rows

struct GeneratorTrainConfig {
    int hidden = 512;
    int max_epochs = 100;
    double val_fraction = 0.2;
    int patience = 10;
    AdamConfig adam;
    std::uint64_t seed = 0;
    bool positional = true;  // required; kept explicit so omission is a hard error
    double target_train_loss = 0.0;
};

struct Generator {
    int emb_dim = 0, hidden = 0;
    LstmLayer lstm;
    Dense out;  // hidden -> emb_dim, tanh

    std::vector<ParamRef> params();
    void zero_grads();
    Tensor forward(const Tensor& inputs, LstmLayer::Cache& cache, Tensor& h_seq);
    void save(const std::filesystem::path& path) const;
    static Generator load(const std::filesystem::path& path);
};

enum class GenMode { RowWise, SymmetricColumns };

struct GenerationConfig {
    GenMode mode = GenMode::RowWise;
    int target_height = 0, target_width = 0;
    double noise_scale = 0.0;
    std::uint64_t seed = 0;
};

struct GeneratedLevel {
    LevelGrid level;       // pixels + affordances pasted from snapped payloads
    std::vector<int> item_ids;  // row-major, store ids of every cell
    EmbeddedLevel snapped;      // embeddings after snapping
};

EmbeddedLevel embed_level(Xae& xae, const LevelGrid& level);

// Sliding 6-row windows, stride 3, cells flattened row-major.
std::vector<SequenceSample> make_sequences(const std::vector<EmbeddedLevel>& levels);
// Whole levels flattened column-major, for the symmetric half-level mode.
std::vector<SequenceSample> make_column_sequences(const std::vector<EmbeddedLevel>& levels);

std::pair<Generator, TrainReport> train_generator(const std::vector<SequenceSample>& sequences,
                                                  const GeneratorTrainConfig& cfg);

GeneratedLevel generate(Generator& gen, const RPForest& forest, const EmbeddingStore& store,
                        const GenerationConfig& cfg,
                        const std::optional<EmbeddedLevel>& seed_rows = std::nullopt);

GeneratedLevel generate_symmetric(Generator& gen, const RPForest& forest,
                                  const EmbeddingStore& store, const EmbeddedLevel& left_half,
                                  const GenerationConfig& cfg);

// Builds the snapping store from corpus levels: one item per cell.
EmbeddingStore build_store(Xae& xae, const std::vector<LevelGrid>& levels);

void render(const LevelGrid& level, const std::filesystem::path& path);
Image render_image(const LevelGrid& level);

}  // namespace te
