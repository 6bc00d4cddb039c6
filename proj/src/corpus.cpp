#include "te/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "te/io.hpp"

namespace te {

const std::array<std::string, kNumTags>& tag_names() {
    static const std::array<std::string, kNumTags> names = {
        "Block",  "Breakable", "Climbable", "Collectable", "Element", "Empty", "Hazard",
        "Moving", "Openable",  "Passable",  "Pipe",        "Solid",   "Wall"};
    return names;
}

std::optional<int> tag_index(const std::string& name_any_case) {
    std::string lower;
    for (char c : name_any_case) lower.push_back(static_cast<char>(std::tolower(c)));
    const auto& names = tag_names();
    for (int i = 0; i < kNumTags; ++i) {
        std::string cand;
        for (char c : names[static_cast<std::size_t>(i)])
            cand.push_back(static_cast<char>(std::tolower(c)));
        if (cand == lower) return i;
    }
    return std::nullopt;
}

std::vector<std::string> AffordanceVector::to_tags() const {
    std::vector<std::string> out;
    for (int i = 0; i < kNumTags; ++i)
        if (bits[static_cast<std::size_t>(i)]) out.push_back(tag_names()[static_cast<std::size_t>(i)]);
    return out;
}

TileLegend parse_legend(const std::string& json_text, const std::string& game_id) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError("legend parse failure: " + std::string(e.what()));
    }
    if (!j.contains("tile_px"))
        throw CorpusError("legend for " + game_id + " is missing tile_px");
    TileLegend legend;
    legend.game_id = game_id;
    legend.tile_px = j.at("tile_px").get<int>();
    if (legend.tile_px != 8 && legend.tile_px != 16)
        throw CorpusError("legend tile_px must be 8 or 16, got " + std::to_string(legend.tile_px));
    if (!j.contains("tiles") || !j.at("tiles").is_object())
        throw CorpusError("legend for " + game_id + " is missing the tiles table");
    for (auto& [key, tags] : j.at("tiles").items()) {
        if (key.size() != 1)
            throw CorpusError("legend tile key \"" + key + "\" must be a single character");
        AffordanceVector av;
        for (const auto& t : tags) {
            auto idx = tag_index(t.get<std::string>());
            if (!idx)
                throw CorpusError("unknown tag \"" + t.get<std::string>() + "\" for tile '" +
                                  key + "'");
            av.bits[static_cast<std::size_t>(*idx)] = 1;
        }
        legend.char_to_affordances[key[0]] = av;
    }
    return legend;
}

TileLegend load_legend(const std::filesystem::path& path, const std::string& game_id) {
    std::ifstream is(path);
    if (!is) throw CorpusError("cannot open legend " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_legend(ss.str(), game_id);
}

LevelGrid ingest_level_from(const Image& image, const std::vector<std::string>& grid_rows,
                            const std::optional<TileLegend>& legend, const std::string& game_id,
                            const std::string& level_id) {
    int tile_px = legend ? legend->tile_px : kTilePx;
    if (image.width % tile_px != 0 || image.height % tile_px != 0)
        throw CorpusError("level " + level_id + ": image " + std::to_string(image.width) + "x" +
                          std::to_string(image.height) + " is not a multiple of tile_px " +
                          std::to_string(tile_px));
    LevelGrid lvl;
    lvl.game_id = game_id;
    lvl.level_id = level_id;
    lvl.width = image.width / tile_px;
    lvl.height = image.height / tile_px;
    lvl.pixels = tile_px == 8 ? upscale2x(image) : image;
    lvl.affordances.assign(static_cast<std::size_t>(lvl.width) * lvl.height, AffordanceVector{});

    if (!grid_rows.empty()) {
        if (static_cast<int>(grid_rows.size()) != lvl.height)
            throw CorpusError("level " + level_id + ": grid has " +
                              std::to_string(grid_rows.size()) + " rows, image implies " +
                              std::to_string(lvl.height));
        for (const auto& row : grid_rows)
            if (static_cast<int>(row.size()) != lvl.width)
                throw CorpusError("level " + level_id + ": grid row width " +
                                  std::to_string(row.size()) + " vs image tile width " +
                                  std::to_string(lvl.width));
        if (!legend) throw CorpusError("level " + level_id + ": grid given without a legend");
        lvl.chars = grid_rows;
        for (int y = 0; y < lvl.height; ++y)
            for (int x = 0; x < lvl.width; ++x) {
                char c = grid_rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
                auto it = legend->char_to_affordances.find(c);
                if (it == legend->char_to_affordances.end())
                    throw CorpusError("level " + level_id + ": character '" + std::string(1, c) +
                                      "' is not in the legend");
                lvl.aff(y, x) = it->second;
            }
    }
    return lvl;
}

LevelGrid ingest_level(const std::filesystem::path& image_path,
                       const std::optional<std::filesystem::path>& grid_path,
                       const std::optional<TileLegend>& legend) {
    Image img = read_png(image_path);
    std::vector<std::string> rows;
    if (grid_path) {
        std::ifstream is(*grid_path);
        if (!is) throw CorpusError("cannot open grid " + grid_path->string());
        std::string line;
        while (std::getline(is, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) rows.push_back(line);
        }
    }
    return ingest_level_from(img, rows, legend, legend ? legend->game_id : std::string{},
                             image_path.stem().string());
}

namespace {

// Context pixels of cell (x,y): the 3x3 tile neighborhood, zero-padded.
Tensor cell_context(const LevelGrid& lvl, int cx, int cy) {
    Tensor px({kContextPx, kContextPx, 3});
    int x0 = cx * kTilePx - kTilePx;
    int y0 = cy * kTilePx - kTilePx;
    for (int y = 0; y < kContextPx; ++y) {
        int sy = y0 + y;
        if (sy < 0 || sy >= lvl.pixels.height) continue;
        for (int x = 0; x < kContextPx; ++x) {
            int sx = x0 + x;
            if (sx < 0 || sx >= lvl.pixels.width) continue;
            for (int c = 0; c < 3; ++c) px.at({y, x, c}) = lvl.pixels.at(sy, sx, c);
        }
    }
    return px;
}

std::string cell_dedup_key(const LevelGrid& lvl, const Tensor& context, int cx, int cy) {
    if (lvl.annotated()) {
        std::string key = "C:";
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                int y = cy + dy, x = cx + dx;
                bool in = y >= 0 && y < lvl.height && x >= 0 && x < lvl.width;
                key.push_back(in ? lvl.chars[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)]
                                 : kOobChar);
            }
        return key;
    }
    // Unannotated: pixels quantized to 8 bits/channel are the identity.
    std::string key = "P:";
    key.reserve(2 + context.data.size());
    for (double v : context.data)
        key.push_back(static_cast<char>(static_cast<unsigned char>(
            std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    return key;
}

}  // namespace

std::vector<ContextSample> extract_contexts(const LevelGrid& level) {
    std::vector<ContextSample> out;
    out.reserve(static_cast<std::size_t>(level.width) * level.height);
    for (int y = 0; y < level.height; ++y)
        for (int x = 0; x < level.width; ++x) {
            ContextSample s;
            s.pixels = cell_context(level, x, y);
            s.center_affordance = level.aff(y, x);
            s.dedup_key = cell_dedup_key(level, s.pixels, x, y);
            s.game_id = level.game_id;
            s.level_id = level.level_id;
            s.x = x;
            s.y = y;
            out.push_back(std::move(s));
        }
    return out;
}

std::vector<ContextSample> dedup_contexts(const std::vector<ContextSample>& samples) {
    std::vector<ContextSample> out;
    std::set<std::string> seen;
    for (const auto& s : samples)
        if (seen.insert(s.dedup_key).second) out.push_back(s);
    return out;
}

Tensor compute_label_weights(const std::vector<ContextSample>& samples) {
    std::array<long, kNumTags> df{};
    bool any = false;
    for (const auto& s : samples)
        for (int i = 0; i < kNumTags; ++i)
            if (s.center_affordance.bits[static_cast<std::size_t>(i)]) {
                ++df[static_cast<std::size_t>(i)];
                any = true;
            }
    if (!any) throw CorpusError("label weighting: no positive labels in the corpus");
    const double n = static_cast<double>(samples.size());
    Tensor w({kNumTags});
    double mean = 0.0;
    for (int i = 0; i < kNumTags; ++i) {
        w.data[static_cast<std::size_t>(i)] =
            std::log(n / (1.0 + static_cast<double>(df[static_cast<std::size_t>(i)]))) + 1.0;
        mean += w.data[static_cast<std::size_t>(i)];
    }
    mean /= kNumTags;
    for (double& v : w.data) v /= mean;
    return w;
}

Dataset build_dataset(const std::vector<GameCorpus>& games) {
    std::size_t total_levels = 0;
    for (const auto& g : games) total_levels += g.levels.size();
    if (total_levels == 0) throw CorpusError("build_dataset: no levels supplied");
    Dataset ds;
    for (const auto& g : games) {
        std::vector<ContextSample> game_samples;
        for (const auto& lvl : g.levels) {
            auto cs = extract_contexts(lvl);
            game_samples.insert(game_samples.end(), std::make_move_iterator(cs.begin()),
                                std::make_move_iterator(cs.end()));
        }
        auto unique = dedup_contexts(game_samples);
        ds.samples.insert(ds.samples.end(), std::make_move_iterator(unique.begin()),
                          std::make_move_iterator(unique.end()));
    }
    ds.label_weights = compute_label_weights(ds.samples);
    ds.tag_order.assign(tag_names().begin(), tag_names().end());
    return ds;
}

GameCorpus load_game(const std::filesystem::path& game_dir) {
    GameCorpus g;
    const std::string game_id = game_dir.filename().string();
    auto legend_path = game_dir / "legend.json";
    if (std::filesystem::exists(legend_path)) g.legend = load_legend(legend_path, game_id);
    auto levels_dir = game_dir / "levels";
    if (!std::filesystem::is_directory(levels_dir))
        throw CorpusError("no levels directory under " + game_dir.string());
    std::vector<std::filesystem::path> pngs;
    for (const auto& e : std::filesystem::directory_iterator(levels_dir))
        if (e.path().extension() == ".png") pngs.push_back(e.path());
    std::sort(pngs.begin(), pngs.end());
    for (const auto& p : pngs) {
        auto txt = p;
        txt.replace_extension(".txt");
        std::optional<std::filesystem::path> grid;
        if (std::filesystem::exists(txt)) grid = txt;
        auto lvl = ingest_level(p, grid, g.legend);
        lvl.game_id = game_id;
        g.levels.push_back(std::move(lvl));
    }
    if (g.levels.empty()) throw CorpusError("no level PNGs under " + levels_dir.string());
    return g;
}

constexpr std::uint16_t kTcdsVersion = 1;

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
    {
        AtomicFile f(path);
        std::ostream& os = f.stream();
        bin::write_bytes(os, "TCDS", 4);
        bin::write_le<std::uint16_t>(os, kTcdsVersion);
        bin::write_le<std::uint64_t>(os, ds.samples.size());
        for (const auto& s : ds.samples) {
            bin::write_string(os, s.game_id);
            bin::write_string(os, s.level_id);
            bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.x));
            bin::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.y));
            for (double v : s.pixels.data) bin::write_f32(os, static_cast<float>(v));
            for (auto b : s.center_affordance.bits) bin::write_le<std::uint8_t>(os, b);
        }
        f.commit();
    }
    nlohmann::json side;
    side["tag_order"] = ds.tag_order;
    side["label_weights"] = ds.label_weights.data;
    AtomicFile f(path.string() + ".json");
    f.stream() << side.dump(2) << "\n";
    f.commit();
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[4];
    bin::read_bytes(is, magic, 4, "TCDS magic");
    if (std::string(magic, 4) != "TCDS") throw IoError("bad magic, not a TCDS file");
    auto version = bin::read_le<std::uint16_t>(is, "TCDS version");
    if (version != kTcdsVersion)
        throw IoError("TCDS version mismatch: " + std::to_string(version));
    auto count = bin::read_le<std::uint64_t>(is, "sample count");
    Dataset ds;
    for (std::uint64_t k = 0; k < count; ++k) {
        ContextSample s;
        s.game_id = bin::read_string(is, "game id");
        s.level_id = bin::read_string(is, "level id");
        s.x = static_cast<int>(bin::read_le<std::uint32_t>(is, "x"));
        s.y = static_cast<int>(bin::read_le<std::uint32_t>(is, "y"));
        s.pixels = Tensor({kContextPx, kContextPx, 3});
        for (double& v : s.pixels.data) v = bin::read_f32(is, "pixels");
        for (auto& b : s.center_affordance.bits) b = bin::read_le<std::uint8_t>(is, "flags");
        ds.samples.push_back(std::move(s));
    }
    std::ifstream js(path.string() + ".json");
    if (!js) throw IoError("missing dataset sidecar " + path.string() + ".json");
    nlohmann::json side = nlohmann::json::parse(js);
    ds.tag_order = side.at("tag_order").get<std::vector<std::string>>();
    ds.label_weights = Tensor({kNumTags}, side.at("label_weights").get<std::vector<double>>());
    return ds;
}

}  // namespace te
