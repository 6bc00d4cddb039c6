#pragma once

#include <filesystem>
#include <string>

#include "te/levelgen.hpp"
#include "te/metrics.hpp"

namespace te {

// One structured config drives every pipeline command; CLI flags override
// individual keys. See README for the key reference.
struct PipelineConfig {
    std::filesystem::path corpus_root = "corpus";
    std::vector<std::string> games;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 0;
    int threads = 1;

    AutoencoderConfig autoencoder;
    TrainConfig train;
    int index_trees = 10;
    int index_leaf_capacity = 16;
    GeneratorTrainConfig generator;
    GenerationConfig generation;
    std::string seed_level;  // "game/level" whose top rows seed row-wise generation
    std::string symmetric_source;  // "game/level" whose left half conditions symmetric mode
    std::vector<AlphaParams> alpha_grid = default_alpha_grid();

    static PipelineConfig from_file(const std::filesystem::path& path);
    static PipelineConfig from_json_text(const std::string& text);
    std::string to_json() const;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Pipeline commands. Each writes its primary artifacts plus a manifest JSON
// under out_dir and returns the list of files written.
std::vector<std::filesystem::path> cmd_ingest(const PipelineConfig& cfg);
std::vector<std::filesystem::path> cmd_train_ae(const PipelineConfig& cfg);
std::vector<std::filesystem::path> cmd_crossfold(const PipelineConfig& cfg,
                                                 const std::string& hold_out_game);
std::vector<std::filesystem::path> cmd_embed(const PipelineConfig& cfg);
std::vector<std::filesystem::path> cmd_index(const PipelineConfig& cfg);
std::vector<std::filesystem::path> cmd_train_gen(const PipelineConfig& cfg);
std::vector<std::filesystem::path> cmd_generate(const PipelineConfig& cfg);
std::vector<std::filesystem::path> cmd_eval_levels(const PipelineConfig& cfg);
std::vector<std::filesystem::path> cmd_report(const PipelineConfig& cfg);

}  // namespace te
