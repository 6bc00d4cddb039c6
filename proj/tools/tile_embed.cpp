// tile_embed: pipeline front end.
//   ingest -> train-ae -> crossfold -> embed -> index -> train-gen ->
//   generate -> eval-levels -> report
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "te/io.hpp"
#include "te/pipeline.hpp"

namespace {

struct CliOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
    std::string hold_out;
    std::optional<std::string> mode;
};

te::PipelineConfig resolve(const CliOverrides& o) {
    te::PipelineConfig cfg = o.config_path.empty()
                                 ? te::PipelineConfig{}
                                 : te::PipelineConfig::from_file(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (o.out_dir) cfg.out_dir = *o.out_dir;
    if (o.threads) cfg.threads = *o.threads;
    if (o.mode) {
        if (*o.mode == "row")
            cfg.generation.mode = te::GenMode::RowWise;
        else if (*o.mode == "symmetric")
            cfg.generation.mode = te::GenMode::SymmetricColumns;
        else
            throw te::ConfigError("--mode must be row or symmetric");
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tile embedding pipeline"};
    app.require_subcommand(1);

    CliOverrides o;
    app.add_option("--config", o.config_path, "pipeline config JSON");
    app.add_option("--seed", o.seed, "global seed override");
    app.add_option("--out", o.out_dir, "output directory override");
    app.add_option("--threads", o.threads, "thread count (1 = reproducible)");

    auto* ingest = app.add_subcommand("ingest", "build the training dataset from the corpus");
    auto* train_ae = app.add_subcommand("train-ae", "train the autoencoder on the dataset");
    auto* crossfold = app.add_subcommand("crossfold", "held-out-game affordance evaluation");
    crossfold->add_option("--hold-out", o.hold_out, "game to hold out")->required();
    auto* embed = app.add_subcommand("embed", "dump per-level embedding tensors");
    auto* index = app.add_subcommand("index", "build the nearest-neighbor snap index");
    auto* train_gen = app.add_subcommand("train-gen", "train the level generator LSTM");
    auto* generate = app.add_subcommand("generate", "generate a level and render it");
    generate->add_option("--mode", o.mode, "row | symmetric");
    train_gen->add_option("--mode", o.mode, "row | symmetric");
    auto* eval_levels = app.add_subcommand("eval-levels", "expressive-range CSV for levels");
    auto* report = app.add_subcommand("report", "aggregate reports in the output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        te::PipelineConfig cfg = resolve(o);
        std::vector<std::filesystem::path> outs;
        if (ingest->parsed()) outs = te::cmd_ingest(cfg);
        else if (train_ae->parsed()) outs = te::cmd_train_ae(cfg);
        else if (crossfold->parsed()) outs = te::cmd_crossfold(cfg, o.hold_out);
        else if (embed->parsed()) outs = te::cmd_embed(cfg);
        else if (index->parsed()) outs = te::cmd_index(cfg);
        else if (train_gen->parsed()) outs = te::cmd_train_gen(cfg);
        else if (generate->parsed()) outs = te::cmd_generate(cfg);
        else if (eval_levels->parsed()) outs = te::cmd_eval_levels(cfg);
        else if (report->parsed()) outs = te::cmd_report(cfg);
        for (const auto& p : outs) std::cout << p.string() << "\n";
        return 0;
    } catch (const te::ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const te::CorpusError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const te::MetricError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const te::IoError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const te::GeometryError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
