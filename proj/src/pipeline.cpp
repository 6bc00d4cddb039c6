#include "te/pipeline.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "te/io.hpp"

namespace te {

namespace {

using nlohmann::json;

template <class T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("config parse failure: " + std::string(e.what()));
    }
    PipelineConfig c;
    std::string s;
    maybe(j, "corpus_root", s);
    if (!s.empty()) c.corpus_root = s;
    maybe(j, "games", c.games);
    s.clear();
    maybe(j, "out_dir", s);
    if (!s.empty()) c.out_dir = s;
    maybe(j, "seed", c.seed);
    maybe(j, "threads", c.threads);

    if (j.contains("autoencoder")) {
        const json& a = j.at("autoencoder");
        maybe(a, "conv_filters", c.autoencoder.conv_filters);
        maybe(a, "aff_encoder", c.autoencoder.aff_encoder);
        maybe(a, "embedding_dim", c.autoencoder.embedding_dim);
        maybe(a, "aff_decoder", c.autoencoder.aff_decoder);
        maybe(a, "img_decoder_filters", c.autoencoder.img_decoder_filters);
        maybe(a, "image_loss_weight", c.autoencoder.image_loss_weight);
        maybe(a, "affordance_loss_weight", c.autoencoder.affordance_loss_weight);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        maybe(t, "batch_size", c.train.batch_size);
        maybe(t, "max_epochs", c.train.max_epochs);
        maybe(t, "val_fraction", c.train.val_fraction);
        maybe(t, "patience", c.train.patience);
        maybe(t, "lr", c.train.adam.lr);
        maybe(t, "target_train_loss", c.train.target_train_loss);
    }
    if (j.contains("index")) {
        maybe(j.at("index"), "trees", c.index_trees);
        maybe(j.at("index"), "leaf_capacity", c.index_leaf_capacity);
    }
    if (j.contains("generator")) {
        const json& g = j.at("generator");
        maybe(g, "hidden", c.generator.hidden);
        maybe(g, "max_epochs", c.generator.max_epochs);
        maybe(g, "val_fraction", c.generator.val_fraction);
        maybe(g, "patience", c.generator.patience);
        maybe(g, "lr", c.generator.adam.lr);
        maybe(g, "positional", c.generator.positional);
        maybe(g, "target_train_loss", c.generator.target_train_loss);
    }
    if (j.contains("generation")) {
        const json& g = j.at("generation");
        std::string mode = "row";
        maybe(g, "mode", mode);
        if (mode == "row")
            c.generation.mode = GenMode::RowWise;
        else if (mode == "symmetric")
            c.generation.mode = GenMode::SymmetricColumns;
        else
            throw ConfigError("generation.mode must be \"row\" or \"symmetric\"");
        maybe(g, "target_height", c.generation.target_height);
        maybe(g, "target_width", c.generation.target_width);
        maybe(g, "noise_scale", c.generation.noise_scale);
        maybe(g, "seed_level", c.seed_level);
        maybe(g, "symmetric_source", c.symmetric_source);
    }
    if (j.contains("alpha_grid")) {
        c.alpha_grid.clear();
        for (const auto& row : j.at("alpha_grid")) {
            if (!row.is_array() || row.size() != 3)
                throw ConfigError("alpha_grid entries must be [alpha, beta, gamma]");
            c.alpha_grid.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
        }
    }
    return c;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json_text(ss.str());
}

std::string PipelineConfig::to_json() const {
    json j;
    j["corpus_root"] = corpus_root.string();
    j["games"] = games;
    j["out_dir"] = out_dir.string();
    j["seed"] = seed;
    j["threads"] = threads;
    j["autoencoder"] = {{"conv_filters", autoencoder.conv_filters},
                        {"aff_encoder", autoencoder.aff_encoder},
                        {"embedding_dim", autoencoder.embedding_dim},
                        {"aff_decoder", autoencoder.aff_decoder},
                        {"img_decoder_filters", autoencoder.img_decoder_filters},
                        {"image_loss_weight", autoencoder.image_loss_weight},
                        {"affordance_loss_weight", autoencoder.affordance_loss_weight}};
    j["train"] = {{"batch_size", train.batch_size},
                  {"max_epochs", train.max_epochs},
                  {"val_fraction", train.val_fraction},
                  {"patience", train.patience},
                  {"lr", train.adam.lr},
                  {"target_train_loss", train.target_train_loss}};
    j["index"] = {{"trees", index_trees}, {"leaf_capacity", index_leaf_capacity}};
    j["generator"] = {{"hidden", generator.hidden},
                      {"max_epochs", generator.max_epochs},
                      {"val_fraction", generator.val_fraction},
                      {"patience", generator.patience},
                      {"lr", generator.adam.lr},
                      {"positional", generator.positional},
                      {"target_train_loss", generator.target_train_loss}};
    j["generation"] = {{"mode", generation.mode == GenMode::RowWise ? "row" : "symmetric"},
                       {"target_height", generation.target_height},
                       {"target_width", generation.target_width},
                       {"noise_scale", generation.noise_scale},
                       {"seed_level", seed_level},
                       {"symmetric_source", symmetric_source}};
    json grid = json::array();
    for (const auto& a : alpha_grid) grid.push_back({a.alpha, a.beta, a.gamma});
    j["alpha_grid"] = grid;
    return j.dump(2);
}

namespace {

std::vector<GameCorpus> load_games(const PipelineConfig& cfg) {
    std::vector<std::string> names = cfg.games;
    if (names.empty()) {
        if (!std::filesystem::is_directory(cfg.corpus_root))
            throw CorpusError("corpus root " + cfg.corpus_root.string() + " does not exist");
        for (const auto& e : std::filesystem::directory_iterator(cfg.corpus_root))
            if (e.is_directory()) names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
    }
    if (names.empty()) throw CorpusError("no games under " + cfg.corpus_root.string());
    std::vector<GameCorpus> games;
    for (const auto& n : names) games.push_back(load_game(cfg.corpus_root / n));
    return games;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    AtomicFile f(path);
    f.stream() << text;
    f.commit();
}

// Run manifest: enough to re-run the producing command. No timestamps, so
// re-runs are byte-identical.
std::filesystem::path write_manifest(const PipelineConfig& cfg, const std::string& command,
                                     const std::vector<std::filesystem::path>& inputs,
                                     const std::vector<std::filesystem::path>& outputs) {
    json m;
    m["command"] = command;
    m["seed"] = cfg.seed;
    m["threads"] = cfg.threads;
    m["config"] = json::parse(cfg.to_json());
    m["config_hash"] = fnv1a(cfg.to_json());
    m["format_versions"] = {{"TCDS", 1}, {"TCWT", 1}, {"TCNN", 1}};
    json in = json::array(), out = json::array();
    for (const auto& p : inputs) in.push_back(p.string());
    for (const auto& p : outputs) out.push_back(p.string());
    m["inputs"] = in;
    m["outputs"] = out;
    auto path = cfg.out_dir / (command + ".manifest.json");
    write_text(path, m.dump(2) + "\n");
    return path;
}

LevelGrid find_level(const std::vector<GameCorpus>& games, const std::string& spec) {
    auto slash = spec.find('/');
    if (slash == std::string::npos)
        throw ConfigError("level reference \"" + spec + "\" must be <game>/<level>");
    std::string game = spec.substr(0, slash), level = spec.substr(slash + 1);
    for (const auto& g : games)
        for (const auto& l : g.levels)
            if (l.game_id == game && l.level_id == level) return l;
    throw CorpusError("level " + spec + " not found in the corpus");
}

TrainConfig seeded_train(const PipelineConfig& cfg) {
    TrainConfig t = cfg.train;
    t.seed = cfg.seed;
    return t;
}

void write_embedded(const EmbeddedLevel& emb, const std::filesystem::path& base,
                    std::vector<std::filesystem::path>& outs) {
    // raw f32 LE H*W*dim tensor
    AtomicFile f(base.string() + ".emb");
    for (const auto& cell : emb.cells)
        for (double v : cell.data) bin::write_f32(f.stream(), static_cast<float>(v));
    f.commit();
    outs.push_back(base.string() + ".emb");
}

void write_affordances(const LevelGrid& lvl, const std::filesystem::path& path,
                       std::vector<std::filesystem::path>& outs) {
    json rows = json::array();
    for (int y = 0; y < lvl.height; ++y) {
        json row = json::array();
        for (int x = 0; x < lvl.width; ++x) row.push_back(lvl.aff(y, x).to_tags());
        rows.push_back(row);
    }
    json j = {{"height", lvl.height}, {"width", lvl.width}, {"cells", rows}};
    write_text(path, j.dump() + "\n");
    outs.push_back(path);
}

}  // namespace

std::vector<std::filesystem::path> cmd_ingest(const PipelineConfig& cfg) {
    auto games = load_games(cfg);
    Dataset ds = build_dataset(games);
    std::filesystem::create_directories(cfg.out_dir);
    auto ds_path = cfg.out_dir / "dataset.tcds";
    save_dataset(ds_path, ds);
    std::vector<std::filesystem::path> outs = {ds_path, ds_path.string() + ".json"};
    outs.push_back(write_manifest(cfg, "ingest", {cfg.corpus_root}, outs));
    return outs;
}

std::vector<std::filesystem::path> cmd_train_ae(const PipelineConfig& cfg) {
    auto ds_path = cfg.out_dir / "dataset.tcds";
    Dataset ds = load_dataset(ds_path);
    AutoencoderConfig ac = cfg.autoencoder;
    ac.seed = cfg.seed;
    Xae model = Xae::build(ac);
    TrainReport rep = model.train(ds.samples, ds.label_weights, seeded_train(cfg));
    auto model_path = cfg.out_dir / "xae.tcwt";
    model.save(model_path);
    json r;
    r["train_total"] = rep.train_total;
    r["train_image"] = rep.train_image;
    r["train_affordance"] = rep.train_affordance;
    r["val_total"] = rep.val_total;
    r["val_image"] = rep.val_image;
    r["val_affordance"] = rep.val_affordance;
    r["stopping_epoch"] = rep.stopping_epoch;
    r["best_epoch"] = rep.best_epoch;
    r["label_weights"] = ds.label_weights.data;
    auto rep_path = cfg.out_dir / "train_ae.report.json";
    write_text(rep_path, r.dump(2) + "\n");
    std::vector<std::filesystem::path> outs = {model_path, model_path.string() + ".json", rep_path};
    outs.push_back(write_manifest(cfg, "train-ae", {ds_path}, outs));
    return outs;
}

std::vector<std::filesystem::path> cmd_crossfold(const PipelineConfig& cfg,
                                                 const std::string& hold_out_game) {
    auto games = load_games(cfg);
    std::size_t fold = games.size();
    for (std::size_t i = 0; i < games.size(); ++i)
        if (!games[i].levels.empty() && games[i].levels.front().game_id == hold_out_game) fold = i;
    if (fold == games.size())
        throw ConfigError("hold-out game \"" + hold_out_game + "\" is not in the corpus");
    AutoencoderConfig ac = cfg.autoencoder;
    ac.seed = cfg.seed;
    FoldReport rep = crossfold(games, fold, ac, seeded_train(cfg));
    json j;
    j["held_out_game"] = rep.held_out_game;
    j["model"] = json::parse(rep.model.to_json());
    j["mfl_baseline"] = json::parse(rep.mfl.to_json());
    std::filesystem::create_directories(cfg.out_dir);
    auto path = cfg.out_dir / ("crossfold_" + hold_out_game + ".json");
    write_text(path, j.dump(2) + "\n");
    std::vector<std::filesystem::path> outs = {path};
    outs.push_back(write_manifest(cfg, "crossfold", {cfg.corpus_root}, outs));
    return outs;
}

std::vector<std::filesystem::path> cmd_embed(const PipelineConfig& cfg) {
    auto games = load_games(cfg);
    Xae model = Xae::load(cfg.out_dir / "xae.tcwt");
    std::vector<std::filesystem::path> outs;
    for (const auto& g : games)
        for (const auto& lvl : g.levels) {
            EmbeddedLevel emb = embed_level(model, lvl);
            auto dir = cfg.out_dir / "embeddings" / lvl.game_id;
            std::filesystem::create_directories(dir);
            write_embedded(emb, dir / lvl.level_id, outs);
        }
    outs.push_back(write_manifest(cfg, "embed", {cfg.corpus_root, cfg.out_dir / "xae.tcwt"}, outs));
    return outs;
}

std::vector<std::filesystem::path> cmd_index(const PipelineConfig& cfg) {
    auto games = load_games(cfg);
    Xae model = Xae::load(cfg.out_dir / "xae.tcwt");
    std::vector<LevelGrid> levels;
    for (const auto& g : games)
        for (const auto& lvl : g.levels) levels.push_back(lvl);
    EmbeddingStore store = build_store(model, levels);
    RPForest forest = build_index(store, cfg.index_trees, cfg.index_leaf_capacity, cfg.seed);
    auto path = cfg.out_dir / "index.tcnn";
    save_index(path, forest, store);
    std::vector<std::filesystem::path> outs = {path};
    outs.push_back(write_manifest(cfg, "index", {cfg.corpus_root, cfg.out_dir / "xae.tcwt"}, outs));
    return outs;
}

std::vector<std::filesystem::path> cmd_train_gen(const PipelineConfig& cfg) {
    auto games = load_games(cfg);
    Xae model = Xae::load(cfg.out_dir / "xae.tcwt");
    std::vector<EmbeddedLevel> embedded;
    for (const auto& g : games)
        for (const auto& lvl : g.levels) embedded.push_back(embed_level(model, lvl));
    auto sequences = cfg.generation.mode == GenMode::SymmetricColumns
                         ? make_column_sequences(embedded)
                         : make_sequences(embedded);
    GeneratorTrainConfig gc = cfg.generator;
    gc.seed = cfg.seed;
    auto [gen, rep] = train_generator(sequences, gc);
    auto path = cfg.out_dir / "generator.tcwt";
    gen.save(path);
    json r = {{"train_total", rep.train_total},
              {"val_total", rep.val_total},
              {"stopping_epoch", rep.stopping_epoch},
              {"best_epoch", rep.best_epoch},
              {"sequences", sequences.size()}};
    auto rep_path = cfg.out_dir / "train_gen.report.json";
    write_text(rep_path, r.dump(2) + "\n");
    std::vector<std::filesystem::path> outs = {path, path.string() + ".json", rep_path};
    outs.push_back(write_manifest(cfg, "train-gen", {cfg.out_dir / "xae.tcwt"}, outs));
    return outs;
}

std::vector<std::filesystem::path> cmd_generate(const PipelineConfig& cfg) {
    Generator gen = Generator::load(cfg.out_dir / "generator.tcwt");
    auto [forest, store] = load_index(cfg.out_dir / "index.tcnn");
    GenerationConfig gc = cfg.generation;
    if (gc.seed == 0) gc.seed = cfg.seed;
    GeneratedLevel result;
    if (gc.mode == GenMode::SymmetricColumns) {
        if (cfg.symmetric_source.empty())
            throw ConfigError("symmetric mode needs generation.symmetric_source");
        auto games = load_games(cfg);
        Xae model = Xae::load(cfg.out_dir / "xae.tcwt");
        LevelGrid src = find_level(games, cfg.symmetric_source);
        EmbeddedLevel full = embed_level(model, src);
        EmbeddedLevel left;
        left.game_id = full.game_id;
        left.level_id = full.level_id;
        left.height = full.height;
        left.width = full.width / 2;
        for (int y = 0; y < left.height; ++y)
            for (int x = 0; x < left.width; ++x) left.cells.push_back(full.cell(y, x));
        result = generate_symmetric(gen, forest, store, left, gc);
    } else {
        std::optional<EmbeddedLevel> seed_rows;
        if (!cfg.seed_level.empty()) {
            auto games = load_games(cfg);
            Xae model = Xae::load(cfg.out_dir / "xae.tcwt");
            LevelGrid src = find_level(games, cfg.seed_level);
            EmbeddedLevel full = embed_level(model, src);
            EmbeddedLevel top;
            top.game_id = full.game_id;
            top.level_id = full.level_id;
            top.height = std::min(kHistoryRows, full.height);
            top.width = full.width;
            for (int y = 0; y < top.height; ++y)
                for (int x = 0; x < top.width; ++x) top.cells.push_back(full.cell(y, x));
            if (gc.target_width == 0) gc.target_width = full.width;
            seed_rows = std::move(top);
        }
        result = generate(gen, forest, store, gc, seed_rows);
    }
    auto dir = cfg.out_dir / "generated";
    std::filesystem::create_directories(dir);
    std::string name = gc.mode == GenMode::SymmetricColumns ? "level_symmetric" : "level_row";
    std::vector<std::filesystem::path> outs;
    render(result.level, dir / (name + ".png"));
    outs.push_back(dir / (name + ".png"));
    {
        std::ostringstream tiles;
        for (int y = 0; y < result.level.height; ++y) {
            for (int x = 0; x < result.level.width; ++x) {
                if (x) tiles << ' ';
                tiles << result.item_ids[static_cast<std::size_t>(y) * result.level.width + x];
            }
            tiles << '\n';
        }
        write_text(dir / (name + ".tiles.txt"), tiles.str());
        outs.push_back(dir / (name + ".tiles.txt"));
    }
    write_embedded(result.snapped, dir / name, outs);
    write_affordances(result.level, dir / (name + ".aff.json"), outs);
    outs.push_back(write_manifest(cfg, "generate",
                                  {cfg.out_dir / "generator.tcwt", cfg.out_dir / "index.tcnn"},
                                  outs));
    return outs;
}

std::vector<std::filesystem::path> cmd_eval_levels(const PipelineConfig& cfg) {
    // score every generated level (fall back to corpus levels when none exist)
    std::vector<LevelGrid> levels;
    auto gen_dir = cfg.out_dir / "generated";
    if (std::filesystem::is_directory(gen_dir)) {
        std::vector<std::filesystem::path> affs;
        for (const auto& e : std::filesystem::directory_iterator(gen_dir)) {
            auto n = e.path().filename().string();
            if (n.size() > 9 && n.substr(n.size() - 9) == ".aff.json") affs.push_back(e.path());
        }
        std::sort(affs.begin(), affs.end());
        for (const auto& p : affs) {
            std::ifstream is(p);
            json j = json::parse(is);
            LevelGrid lvl;
            lvl.level_id = p.filename().string();
            lvl.level_id = lvl.level_id.substr(0, lvl.level_id.size() - 9);
            lvl.height = j.at("height").get<int>();
            lvl.width = j.at("width").get<int>();
            lvl.affordances.assign(static_cast<std::size_t>(lvl.width) * lvl.height,
                                   AffordanceVector{});
            for (int y = 0; y < lvl.height; ++y)
                for (int x = 0; x < lvl.width; ++x)
                    for (const auto& tag : j.at("cells")[static_cast<std::size_t>(y)]
                                               [static_cast<std::size_t>(x)]) {
                        auto idx = tag_index(tag.get<std::string>());
                        if (idx) lvl.aff(y, x).bits[static_cast<std::size_t>(*idx)] = 1;
                    }
            levels.push_back(std::move(lvl));
        }
    }
    if (levels.empty()) {
        for (const auto& g : load_games(cfg))
            for (const auto& lvl : g.levels) levels.push_back(lvl);
    }
    auto points = expressive_range(levels);
    auto path = cfg.out_dir / "expressive_range.csv";
    write_text(path, expressive_range_csv(points));
    std::vector<std::filesystem::path> outs = {path};
    outs.push_back(write_manifest(cfg, "eval-levels", {gen_dir}, outs));
    return outs;
}

std::vector<std::filesystem::path> cmd_report(const PipelineConfig& cfg) {
    json summary;
    summary["folds"] = json::array();
    if (std::filesystem::is_directory(cfg.out_dir)) {
        std::vector<std::filesystem::path> folds;
        for (const auto& e : std::filesystem::directory_iterator(cfg.out_dir)) {
            auto n = e.path().filename().string();
            if (n.rfind("crossfold_", 0) == 0 && e.path().extension() == ".json")
                folds.push_back(e.path());
        }
        std::sort(folds.begin(), folds.end());
        for (const auto& p : folds) {
            std::ifstream is(p);
            summary["folds"].push_back(json::parse(is));
        }
    }
    auto csv = cfg.out_dir / "expressive_range.csv";
    if (std::filesystem::exists(csv)) {
        std::ifstream is(csv);
        std::stringstream ss;
        ss << is.rdbuf();
        summary["expressive_range_csv"] = ss.str();
    }
    auto path = cfg.out_dir / "report.json";
    write_text(path, summary.dump(2) + "\n");
    std::vector<std::filesystem::path> outs = {path};
    outs.push_back(write_manifest(cfg, "report", {cfg.out_dir}, outs));
    return outs;
}

}  // namespace te
