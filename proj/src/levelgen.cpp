#include "te/levelgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "te/io.hpp"
#include "te/losses.hpp"
#include "te/tensor_io.hpp"

namespace te {

EmbeddedLevel embed_level(Xae& xae, const LevelGrid& level) {
    EmbeddedLevel out;
    out.game_id = level.game_id;
    out.level_id = level.level_id;
    out.height = level.height;
    out.width = level.width;
    auto contexts = extract_contexts(level);  // row-major H*W
    for (const auto& s : contexts) out.cells.push_back(xae.encode(s.pixels, s.center_affordance));
    return out;
}

namespace {

int emb_dim_of(const std::vector<EmbeddedLevel>& levels) {
    for (const auto& l : levels)
        if (!l.cells.empty()) return l.cells.front().dim(0);
    throw GeometryError("make_sequences: no cells");
}

void fill_step(SequenceSample& seq, int t, const Tensor* prev_emb, int x, int y, int w, int h,
               const Tensor& target, int emb_dim) {
    for (int j = 0; j < emb_dim; ++j)
        seq.inputs.at({t, j}) = prev_emb ? prev_emb->data[static_cast<std::size_t>(j)] : 0.0;
    seq.inputs.at({t, emb_dim}) = static_cast<double>(x) / w;
    seq.inputs.at({t, emb_dim + 1}) = static_cast<double>(y) / h;
    for (int j = 0; j < emb_dim; ++j)
        seq.targets.at({t, j}) = target.data[static_cast<std::size_t>(j)];
}

}  // namespace

std::vector<SequenceSample> make_sequences(const std::vector<EmbeddedLevel>& levels) {
    const int dim = emb_dim_of(levels);
    std::vector<SequenceSample> out;
    for (const auto& lvl : levels) {
        if (lvl.height < kWindowRows) continue;  // too short for one window
        for (int start = 0; start + kWindowRows <= lvl.height; start += kHistoryRows) {
            SequenceSample seq;
            const int t_len = kWindowRows * lvl.width;
            seq.inputs = Tensor({t_len, dim + 2});
            seq.targets = Tensor({t_len, dim});
            const Tensor* prev = nullptr;
            int t = 0;
            for (int wy = 0; wy < kWindowRows; ++wy)
                for (int x = 0; x < lvl.width; ++x, ++t) {
                    int y = start + wy;
                    fill_step(seq, t, prev, x, y, lvl.width, lvl.height, lvl.cell(y, x), dim);
                    prev = &lvl.cell(y, x);
                }
            out.push_back(std::move(seq));
        }
    }
    return out;
}

std::vector<SequenceSample> make_column_sequences(const std::vector<EmbeddedLevel>& levels) {
    const int dim = emb_dim_of(levels);
    std::vector<SequenceSample> out;
    for (const auto& lvl : levels) {
        SequenceSample seq;
        const int t_len = lvl.height * lvl.width;
        seq.inputs = Tensor({t_len, dim + 2});
        seq.targets = Tensor({t_len, dim});
        const Tensor* prev = nullptr;
        int t = 0;
        for (int x = 0; x < lvl.width; ++x)
            for (int y = 0; y < lvl.height; ++y, ++t) {
                fill_step(seq, t, prev, x, y, lvl.width, lvl.height, lvl.cell(y, x), dim);
                prev = &lvl.cell(y, x);
            }
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<ParamRef> Generator::params() {
    auto p = lstm.params("lstm");
    p.push_back({"out.w", &out.w, &out.gw});
    p.push_back({"out.b", &out.b, &out.gb});
    return p;
}

void Generator::zero_grads() {
    lstm.zero_grads();
    out.zero_grads();
}

Tensor Generator::forward(const Tensor& inputs, LstmLayer::Cache& cache, Tensor& h_seq) {
    const int t_len = inputs.dim(0);
    Tensor x({1, t_len, inputs.dim(1)}, inputs.data);
    Tensor h3 = lstm.forward(x, cache);
    h_seq = Tensor({t_len, hidden}, h3.data);
    return tanh_fwd(out.forward(h_seq));
}

void Generator::save(const std::filesystem::path& path) const {
    auto* self = const_cast<Generator*>(this);
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto& p : self->params()) tensors.emplace_back(p.name, p.value);
    save_tensors(path, tensors);
    nlohmann::json side = {{"emb_dim", emb_dim}, {"hidden", hidden}};
    AtomicFile f(path.string() + ".json");
    f.stream() << side.dump(2) << "\n";
    f.commit();
}

Generator Generator::load(const std::filesystem::path& path) {
    std::ifstream js(path.string() + ".json");
    if (!js) throw IoError("missing generator sidecar " + path.string() + ".json");
    nlohmann::json side = nlohmann::json::parse(js);
    Generator g;
    g.emb_dim = side.at("emb_dim").get<int>();
    g.hidden = side.at("hidden").get<int>();
    Rng rng(0);
    g.lstm.init(g.emb_dim + 2, g.hidden, rng);
    g.out.init(g.hidden, g.emb_dim, rng);
    auto table = load_tensors(path);
    for (auto& p : g.params()) {
        auto it = table.find(p.name);
        if (it == table.end()) throw IoError("generator file is missing tensor " + p.name);
        if (it->second.shape != p.value->shape)
            throw IoError("generator tensor " + p.name + " shape mismatch");
        p.value->data = it->second.data;
    }
    return g;
}

std::pair<Generator, TrainReport> train_generator(const std::vector<SequenceSample>& sequences,
                                                  const GeneratorTrainConfig& cfg) {
    if (sequences.empty()) throw GeometryError("train_generator: no sequences");
    if (!cfg.positional)
        throw GeometryError("train_generator: positional inputs are required by this architecture");
    const int din = sequences.front().inputs.dim(1);
    const int emb_dim = sequences.front().targets.dim(1);
    if (din != emb_dim + 2)
        throw GeometryError("train_generator: inputs must be embedding plus 2 positional scalars");

    Generator g;
    g.emb_dim = emb_dim;
    g.hidden = cfg.hidden;
    Rng rng(cfg.seed);
    g.lstm.init(din, cfg.hidden, rng);
    g.out.init(cfg.hidden, emb_dim, rng);

    std::vector<int> idx(sequences.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    rng.shuffle(idx);
    std::size_t nval = static_cast<std::size_t>(
        std::llround(cfg.val_fraction * static_cast<double>(idx.size())));
    if (nval == 0 && idx.size() > 1) nval = 1;
    std::vector<int> val_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(nval));
    std::vector<int> train_idx(idx.begin() + static_cast<std::ptrdiff_t>(nval), idx.end());
    if (train_idx.empty()) {
        train_idx = val_idx;  // degenerate single-sequence corpus: validate on train
    }

    AdamState adam(cfg.adam);
    TrainReport rep;
    double best_val = std::numeric_limits<double>::infinity();
    Generator best = g;
    int since_best = 0;

    auto eval_mse = [&](const std::vector<int>& which) {
        double acc = 0.0;
        for (int i : which) {
            const auto& s = sequences[static_cast<std::size_t>(i)];
            LstmLayer::Cache cache;
            Tensor h_seq;
            Tensor pred = g.forward(s.inputs, cache, h_seq);
            acc += mse_loss(pred, s.targets);
        }
        return acc / static_cast<double>(which.size());
    };

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(train_idx);
        double tot = 0.0;
        for (int i : train_idx) {
            const auto& s = sequences[static_cast<std::size_t>(i)];
            LstmLayer::Cache cache;
            Tensor h_seq;
            Tensor pred = g.forward(s.inputs, cache, h_seq);
            Tensor dpred;
            tot += mse_loss(pred, s.targets, &dpred);
            g.zero_grads();
            Tensor dout = tanh_bwd(pred, dpred);
            Tensor dh = g.out.backward(h_seq, dout);
            Tensor dh3({1, s.inputs.dim(0), g.hidden}, dh.data);
            g.lstm.backward(dh3, cache);
            adam.update(g.params());
        }
        rep.train_total.push_back(tot / static_cast<double>(train_idx.size()));
        double val = eval_mse(val_idx.empty() ? train_idx : val_idx);
        rep.val_total.push_back(val);
        rep.stopping_epoch = epoch;
        if (val < best_val) {
            best_val = val;
            best = g;
            rep.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
        if (cfg.target_train_loss > 0.0 && rep.train_total.back() < cfg.target_train_loss) break;
    }
    return {best, rep};
}

namespace {

struct Walker {
    Generator& gen;
    Tensor h, c;
    explicit Walker(Generator& g) : gen(g), h({1, g.hidden}), c({1, g.hidden}) {}

    // Advances the state with prev_emb and the target cell's coordinates;
    // returns the predicted embedding for that cell.
    Tensor step(const Tensor* prev_emb, int x, int y, int w, int hgt) {
        Tensor x_t({1, gen.emb_dim + 2});
        for (int j = 0; j < gen.emb_dim; ++j)
            x_t.data[static_cast<std::size_t>(j)] =
                prev_emb ? prev_emb->data[static_cast<std::size_t>(j)] : 0.0;
        x_t.data[static_cast<std::size_t>(gen.emb_dim)] = static_cast<double>(x) / w;
        x_t.data[static_cast<std::size_t>(gen.emb_dim) + 1] = static_cast<double>(y) / hgt;
        Tensor h_t, c_t;
        gen.lstm.step(x_t, h, c, h_t, c_t);
        h = std::move(h_t);
        c = std::move(c_t);
        Tensor o = tanh_fwd(gen.out.forward(h));
        return Tensor({gen.emb_dim}, o.data);
    }
};

void paste_cell(LevelGrid& lvl, const StoreItem& item, int x, int y) {
    for (int py = 0; py < kTilePx; ++py)
        for (int px = 0; px < kTilePx; ++px)
            for (int ch = 0; ch < 3; ++ch)
                lvl.pixels.at(y * kTilePx + py, x * kTilePx + px, ch) = item.tile.at({py, px, ch});
    lvl.aff(y, x) = item.affordance;
}

LevelGrid blank_level(int height, int width, const std::string& id) {
    LevelGrid lvl;
    lvl.game_id = "generated";
    lvl.level_id = id;
    lvl.width = width;
    lvl.height = height;
    lvl.pixels.width = width * kTilePx;
    lvl.pixels.height = height * kTilePx;
    lvl.pixels.rgb.assign(static_cast<std::size_t>(lvl.pixels.width) * lvl.pixels.height * 3, 0.0);
    lvl.affordances.assign(static_cast<std::size_t>(width) * height, AffordanceVector{});
    return lvl;
}

void add_noise(Tensor& emb, double scale, Rng& rng) {
    if (scale <= 0.0) return;
    for (double& v : emb.data) v = std::clamp(v + rng.normal(0.0, scale), -1.0, 1.0);
}

}  // namespace

GeneratedLevel generate(Generator& gen, const RPForest& forest, const EmbeddingStore& store,
                        const GenerationConfig& cfg, const std::optional<EmbeddedLevel>& seed_rows) {
    const int w = cfg.target_width, h = cfg.target_height;
    if (w <= 0 || h <= 0) throw GeometryError("generate: target dimensions must be positive");
    int seed_h = 0;
    if (seed_rows) {
        if (seed_rows->width != w)
            throw GeometryError("generate: seed row width " + std::to_string(seed_rows->width) +
                                " does not match target width " + std::to_string(w));
        seed_h = seed_rows->height;
        if (h < seed_h) throw GeometryError("generate: target height is below the seed height");
    }
    Rng noise_rng(cfg.seed);
    Walker walk(gen);
    GeneratedLevel out;
    out.level = blank_level(h, w, "gen");
    out.snapped.height = h;
    out.snapped.width = w;
    out.snapped.game_id = "generated";
    const Tensor* prev = nullptr;
    Tensor prev_store;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Tensor pred = walk.step(prev, x, y, w, h);
            Tensor emb;
            if (y < seed_h) {
                emb = seed_rows->cell(y, x);  // teacher-forced prefix
            } else {
                add_noise(pred, cfg.noise_scale, noise_rng);
                emb = pred;
            }
            int id = query_nn(forest, store, emb);
            out.item_ids.push_back(id);
            paste_cell(out.level, store.items[static_cast<std::size_t>(id)], x, y);
            out.snapped.cells.push_back(store.items[static_cast<std::size_t>(id)].embedding);
            prev_store = std::move(emb);
            prev = &prev_store;
        }
    return out;
}

GeneratedLevel generate_symmetric(Generator& gen, const RPForest& forest,
                                  const EmbeddingStore& store, const EmbeddedLevel& left_half,
                                  const GenerationConfig& cfg) {
    const int h = left_half.height, half_w = left_half.width;
    const int full_w = 2 * half_w;
    if (cfg.target_width != 0 && cfg.target_width % 2 != 0)
        throw GeometryError("generate_symmetric: target width must be even");
    if (cfg.target_width != 0 && cfg.target_width != full_w)
        throw GeometryError("generate_symmetric: target width does not match 2x the left half");
    Rng noise_rng(cfg.seed);
    Walker walk(gen);
    const Tensor* prev = nullptr;
    // condition on the left half, column by column
    for (int x = 0; x < half_w; ++x)
        for (int y = 0; y < h; ++y) {
            walk.step(prev, x, y, full_w, h);
            prev = &left_half.cell(y, x);
        }
    // generate the right half
    std::vector<int> right_ids;
    Tensor prev_store;
    for (int x = half_w; x < full_w; ++x)
        for (int y = 0; y < h; ++y) {
            Tensor pred = walk.step(prev, x, y, full_w, h);
            add_noise(pred, cfg.noise_scale, noise_rng);
            int id = query_nn(forest, store, pred);
            right_ids.push_back(id);
            prev_store = std::move(pred);
            prev = &prev_store;
        }
    // full level = mirror(generated right half) ++ generated right half
    GeneratedLevel out;
    out.level = blank_level(h, full_w, "gen-sym");
    out.snapped.height = h;
    out.snapped.width = full_w;
    out.snapped.game_id = "generated";
    out.item_ids.assign(static_cast<std::size_t>(h) * full_w, -1);
    out.snapped.cells.assign(static_cast<std::size_t>(h) * full_w, Tensor({store.dim()}));
    for (int cx = 0; cx < half_w; ++cx)
        for (int y = 0; y < h; ++y) {
            int id = right_ids[static_cast<std::size_t>(cx) * h + y];
            int xr = half_w + cx;          // right-half position
            int xl = half_w - 1 - cx;      // mirrored position
            for (int x : {xr, xl}) {
                out.item_ids[static_cast<std::size_t>(y) * full_w + x] = id;
                paste_cell(out.level, store.items[static_cast<std::size_t>(id)], x, y);
                out.snapped.cell(y, x) = store.items[static_cast<std::size_t>(id)].embedding;
            }
        }
    return out;
}

EmbeddingStore build_store(Xae& xae, const std::vector<LevelGrid>& levels) {
    EmbeddingStore store;
    for (const auto& lvl : levels) {
        EmbeddedLevel emb = embed_level(xae, lvl);
        for (int y = 0; y < lvl.height; ++y)
            for (int x = 0; x < lvl.width; ++x) {
                StoreItem item;
                item.embedding = emb.cell(y, x);
                item.tile = Tensor({kTilePx, kTilePx, 3});
                for (int py = 0; py < kTilePx; ++py)
                    for (int px = 0; px < kTilePx; ++px)
                        for (int ch = 0; ch < 3; ++ch)
                            item.tile.at({py, px, ch}) =
                                lvl.pixels.at(y * kTilePx + py, x * kTilePx + px, ch);
                item.affordance = lvl.aff(y, x);
                item.game_id = lvl.game_id;
                item.level_id = lvl.level_id;
                item.x = x;
                item.y = y;
                store.items.push_back(std::move(item));
            }
    }
    return store;
}

Image render_image(const LevelGrid& level) {
    return level.pixels;
}

void render(const LevelGrid& level, const std::filesystem::path& path) {
    write_png(path, level.pixels);
}

}  // namespace te
