// Acceptance gate: one pass/fail line per shipped guarantee. Runs the whole
// stack, including the CLI binary (TE_CLI_PATH) for the reproducibility check.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "te/corpus.hpp"
#include "te/gradcheck.hpp"
#include "te/levelgen.hpp"
#include "te/metrics.hpp"
#include "te/nnindex.hpp"
#include "te/xae.hpp"

using namespace te;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

// ---- shared toy-level machinery ------------------------------------------

using Palette = std::map<char, std::array<double, 3>>;

Image paint(const std::vector<std::string>& rows, const Palette& palette) {
    int h = static_cast<int>(rows.size());
    int w = static_cast<int>(rows[0].size());
    Image img;
    img.width = w * kTilePx;
    img.height = h * kTilePx;
    img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0.0);
    for (int ty = 0; ty < h; ++ty)
        for (int tx = 0; tx < w; ++tx) {
            auto rgb = palette.at(rows[static_cast<std::size_t>(ty)][static_cast<std::size_t>(tx)]);
            for (int py = 0; py < kTilePx; ++py)
                for (int px = 0; px < kTilePx; ++px)
                    for (int ch = 0; ch < 3; ++ch)
                        img.at(ty * kTilePx + py, tx * kTilePx + px, ch) =
                            rgb[static_cast<std::size_t>(ch)];
        }
    return img;
}

TileLegend four_tile_legend(const std::string& game) {
    return parse_legend(R"({"tile_px": 16, "tiles": {
        "#": ["Solid"], "-": ["Empty"], "o": ["Collectable"], "^": ["Hazard"]
    }})",
                        game);
}

AffordanceVector av(std::initializer_list<int> set_bits) {
    AffordanceVector v;
    for (int i : set_bits) v.bits[static_cast<std::size_t>(i)] = 1;
    return v;
}

Tensor unit_weights() {
    Tensor w({kNumTags});
    w.fill(1.0);
    return w;
}

Tensor random_probs(const std::vector<int>& shape, Rng& rng, double lo, double hi) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Independent set-arithmetic oracle for one prediction row.
struct RowCounts {
    int inter = 0, truth = 0, pred = 0, uni = 0;
};
RowCounts count_row(const PredictionRow& r) {
    RowCounts c;
    for (int i = 0; i < kNumTags; ++i) {
        int t = r.truth.bits[static_cast<std::size_t>(i)];
        int p = r.pred.bits[static_cast<std::size_t>(i)];
        c.inter += t & p;
        c.truth += t;
        c.pred += p;
    }
    c.uni = c.truth + c.pred - c.inter;
    return c;
}

// ---- criteria -------------------------------------------------------------

Outcome check_gradient_soundness() {
    double worst = 0.0;
    std::string worst_where;
    int checks = 0;
    auto track = [&](const GradCheckReport& rep, const std::string& where) {
        ++checks;
        if (!rep.finite || rep.max_rel_err > worst) {
            worst = rep.max_rel_err;
            worst_where = where + "/" + rep.worst_param;
        }
        return rep.passed(1e-4);
    };
    auto projection_loss = [](const Tensor& y, const Tensor& proj) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * proj.data[i];
        return s;
    };

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const int n = rng.uniform_int(1, 2);
        const int h = rng.uniform_int(3, 6), w = rng.uniform_int(3, 6);
        const int cin = rng.uniform_int(1, 3), cout = rng.uniform_int(1, 3);
        const int stride = rng.uniform_int(1, 2);
        auto rand_t = [&](std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
            return random_probs(shape, rng, lo, hi);
        };

        {  // conv
            Conv2d conv;
            conv.init(cin, cout, stride, rng);
            Tensor x = rand_t({n, h, w, cin});
            Tensor proj = rand_t(conv.forward(x).shape);
            auto loss = [&] { return projection_loss(conv.forward(x), proj); };
            conv.zero_grads();
            Tensor gx = conv.backward(x, proj);
            std::vector<ParamRef> refs = {
                {"w", &conv.w, &conv.gw}, {"b", &conv.b, &conv.gb}, {"x", &x, &gx}};
            if (!track(grad_check(loss, refs, rng), "conv")) return {false, worst_where};
        }
        {  // deconv
            Deconv2d dec;
            dec.init(cin, cout, 2, rng);
            Tensor x = rand_t({n, h, w, cin});
            Tensor proj = rand_t(dec.forward(x).shape);
            auto loss = [&] { return projection_loss(dec.forward(x), proj); };
            dec.zero_grads();
            Tensor gx = dec.backward(x, proj);
            std::vector<ParamRef> refs = {
                {"w", &dec.w, &dec.gw}, {"b", &dec.b, &dec.gb}, {"x", &x, &gx}};
            if (!track(grad_check(loss, refs, rng), "deconv")) return {false, worst_where};
        }
        {  // dense + activations
            Dense d;
            const int din = rng.uniform_int(2, 8), dout = rng.uniform_int(2, 8);
            d.init(din, dout, rng);
            Tensor x = rand_t({n + 1, din});
            Tensor proj = rand_t({n + 1, dout});
            auto loss = [&] { return projection_loss(tanh_fwd(d.forward(x)), proj); };
            d.zero_grads();
            Tensor act = tanh_fwd(d.forward(x));
            Tensor gx = d.backward(x, tanh_bwd(act, proj));
            std::vector<ParamRef> refs = {{"w", &d.w, &d.gw}, {"b", &d.b, &d.gb}, {"x", &x, &gx}};
            if (!track(grad_check(loss, refs, rng), "dense+tanh")) return {false, worst_where};
        }
        {  // batchnorm (needs >= 2 rows)
            BatchNorm bn;
            const int c = rng.uniform_int(1, 4);
            bn.init(c);
            for (double& v : bn.gamma.data) v = rng.uniform(0.5, 1.5);
            Tensor x = rand_t({3, c});
            Tensor proj = rand_t({3, c});
            auto loss = [&] { return projection_loss(bn.forward(x, true), proj); };
            BatchNorm::Cache cache;
            bn.forward(x, true, &cache);
            bn.zero_grads();
            Tensor gx = bn.backward(proj, cache);
            std::vector<ParamRef> refs = {{"gamma", &bn.gamma, &bn.ggamma},
                                          {"beta", &bn.beta, &bn.gbeta},
                                          {"x", &x, &gx}};
            if (!track(grad_check(loss, refs, rng), "batchnorm")) return {false, worst_where};
        }
        {  // lstm over a short sequence (covers the single step too)
            LstmLayer lstm;
            const int din = rng.uniform_int(2, 4), dh = rng.uniform_int(2, 4);
            lstm.init(din, dh, rng);
            Tensor x = rand_t({n, 4, din});
            Tensor proj = rand_t({n, 4, dh});
            auto loss = [&] {
                LstmLayer::Cache cache;
                return projection_loss(lstm.forward(x, cache), proj);
            };
            LstmLayer::Cache cache;
            lstm.forward(x, cache);
            lstm.zero_grads();
            Tensor gx = lstm.backward(proj, cache);
            auto refs = lstm.params("lstm");
            refs.push_back({"x", &x, &gx});
            if (!track(grad_check(loss, refs, rng), "lstm")) return {false, worst_where};
        }
        {  // both losses, driven through a sigmoid so its gradient is covered
            Tensor z = rand_t({2, kNumTags});
            Tensor y({2, kNumTags});
            for (double& v : y.data) v = rng.uniform(0.0, 1.0) < 0.5 ? 1.0 : 0.0;
            Tensor w2 = random_probs({kNumTags}, rng, 0.5, 2.0);
            auto loss = [&] {
                Tensor p = sigmoid_fwd(z);
                return mse_loss(p, y) + weighted_bce_loss(p, y, w2);
            };
            Tensor p = sigmoid_fwd(z);
            Tensor d1, d2;
            mse_loss(p, y, &d1);
            weighted_bce_loss(p, y, w2, &d2);
            d1 += d2;
            Tensor gz = sigmoid_bwd(p, d1);
            std::vector<ParamRef> refs = {{"z", &z, &gz}};
            if (!track(grad_check(loss, refs, rng), "losses")) return {false, worst_where};
        }
    }

    // full composed autoencoder, sampled coordinates
    for (std::uint64_t seed : {41u, 42u}) {
        AutoencoderConfig cfg;
        cfg.conv_filters = {4, 4, 4};
        cfg.aff_encoder = {8, 4};
        cfg.embedding_dim = 24;
        cfg.aff_decoder = {4, 8};
        cfg.img_decoder_filters = {6, 6};
        cfg.seed = seed;
        Xae m = Xae::build(cfg);
        Rng rng(seed);
        std::vector<ContextSample> samples;
        for (int i = 0; i < 3; ++i) {
            ContextSample s;
            s.pixels = random_probs({kContextPx, kContextPx, 3}, rng, 0.0, 1.0);
            s.center_affordance.bits[static_cast<std::size_t>(i)] = 1;
            samples.push_back(std::move(s));
        }
        XaeBatch batch = make_batch(samples, {0, 1, 2});
        Tensor w = unit_weights();
        auto loss = [&] { return m.loss(batch, w, true, false).total; };
        m.zero_grads();
        m.loss(batch, w, true, true);
        if (!track(grad_check(loss, m.params(), rng, 3), "xae")) return {false, worst_where};
    }

    std::ostringstream os;
    os << checks << " checks, max rel err " << std::scientific << std::setprecision(2) << worst;
    return {true, os.str()};
}

Outcome check_eq2_oracle() {
    Rng rng(50);
    // unit weights == unweighted mean BCE, across random batches
    for (int trial = 0; trial < 30; ++trial) {
        int n = rng.uniform_int(1, 9);
        Tensor p = random_probs({n, kNumTags}, rng, 0.02, 0.98);
        Tensor y({n, kNumTags});
        for (double& v : y.data) v = rng.uniform(0.0, 1.0) < 0.4 ? 1.0 : 0.0;
        double plain = 0.0;
        for (int r = 0; r < n; ++r)
            for (int i = 0; i < kNumTags; ++i) {
                double pp = p.at({r, i}), yy = y.at({r, i});
                plain += -(yy * std::log(pp) + (1.0 - yy) * std::log(1.0 - pp));
            }
        plain /= n;
        double got = weighted_bce_loss(p, y, unit_weights());
        if (std::abs(got - plain) > 1e-12)
            return {false, "unit-weight mismatch " + std::to_string(got - plain)};
    }
    // hand-evaluated 13-label case: p = 0.5 everywhere, one positive label,
    // weights 1 except 2.0 on the positive -> (2 + 12) * ln 2
    Tensor p({1, kNumTags}), y({1, kNumTags}), w({kNumTags});
    p.fill(0.5);
    y.data[0] = 1.0;
    w.fill(1.0);
    w.data[0] = 2.0;
    double want = 14.0 * std::log(2.0);
    double got = weighted_bce_loss(p, y, w);
    if (std::abs(got - want) > 1e-9) return {false, "hand case off by " + std::to_string(got - want)};
    return {true, "unit-weight equality 1e-12, hand case 1e-9"};
}

Outcome check_eq1_oracle() {
    constexpr int kPassable = 9, kSolid = 11, kHazard = 6;
    if (alpha_score({{av({kSolid}), av({kSolid})}}, {1, 1, 1}) != 1.0)
        return {false, "perfect match is not 1.0"};
    PredictionSet named = {{av({kSolid, kPassable}), av({kSolid, kHazard})}};
    double a = alpha_score(named, {1, 1, 1});
    double b = alpha_score(named, {1, 0.75, 0.25});
    if (std::abs(a - 1.0 / 3.0) > 1e-15) return {false, "beta=gamma=1 case: " + std::to_string(a)};
    if (std::abs(b - 2.0 / 3.0) > 1e-15) return {false, "beta=.75 case: " + std::to_string(b)};

    // random small sets against the brute-force formula
    Rng rng(51);
    for (int trial = 0; trial < 500; ++trial) {
        int rows = rng.uniform_int(1, 4);
        PredictionSet p;
        for (int r = 0; r < rows; ++r) {
            AffordanceVector t, q;
            for (int i = 0; i < kNumTags; ++i) {
                t.bits[static_cast<std::size_t>(i)] = rng.uniform(0.0, 1.0) < 0.25;
                q.bits[static_cast<std::size_t>(i)] = rng.uniform(0.0, 1.0) < 0.25;
            }
            p.push_back({t, q});
        }
        AlphaParams ap{1.0 + rng.uniform_int(0, 2), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
        double want = 0.0;
        for (const auto& r : p) {
            RowCounts c = count_row(r);
            double miss = c.truth - c.inter, fal = c.pred - c.inter;
            double base = c.uni == 0 ? 1.0
                                     : std::max(0.0, 1.0 - (ap.beta * miss + ap.gamma * fal) / c.uni);
            want += std::pow(base, ap.alpha);
        }
        want /= rows;
        double got = alpha_score(p, ap);
        if (std::abs(got - want) > 1e-12) return {false, "random case off by " + std::to_string(got - want)};
    }
    return {true, "named cases exact, 500 random sets vs brute force"};
}

Outcome check_metric_brute_force() {
    // complete enumeration: all (truth, pred) pairs over subsets of 3 labels,
    // all row counts 1..3
    std::vector<AffordanceVector> subsets;
    for (int m = 0; m < 8; ++m) {
        AffordanceVector v;
        for (int b = 0; b < 3; ++b)
            if (m >> b & 1) v.bits[static_cast<std::size_t>(b)] = 1;
        subsets.push_back(v);
    }
    std::vector<PredictionRow> pairs;
    for (const auto& t : subsets)
        for (const auto& p : subsets) pairs.push_back({t, p});
    const std::size_t np = pairs.size();  // 64

    long long tested = 0;
    auto verify = [&](const PredictionSet& p) -> bool {
        ++tested;
        const double n = static_cast<double>(p.size());
        double emr = 0, prec = 0, rec = 0, acc = 0;
        std::array<int, kNumTags> tp{}, fp{}, fn{};
        for (const auto& r : p) {
            RowCounts c = count_row(r);
            emr += r.truth == r.pred ? 1 : 0;
            prec += c.pred ? static_cast<double>(c.inter) / c.pred : (c.truth == 0 ? 1.0 : 0.0);
            rec += c.truth ? static_cast<double>(c.inter) / c.truth : (c.pred == 0 ? 1.0 : 0.0);
            acc += c.uni ? static_cast<double>(c.inter) / c.uni : 1.0;
            for (int i = 0; i < kNumTags; ++i) {
                int t = r.truth.bits[static_cast<std::size_t>(i)];
                int q = r.pred.bits[static_cast<std::size_t>(i)];
                tp[static_cast<std::size_t>(i)] += t & q;
                fp[static_cast<std::size_t>(i)] += q & ~t & 1;
                fn[static_cast<std::size_t>(i)] += t & ~q & 1;
            }
        }
        double lprec = 0, lrec = 0, lacc = 0;
        for (int i = 0; i < kNumTags; ++i) {
            auto j = static_cast<std::size_t>(i);
            lprec += tp[j] + fp[j] ? static_cast<double>(tp[j]) / (tp[j] + fp[j]) : 0.0;
            lrec += tp[j] + fn[j] ? static_cast<double>(tp[j]) / (tp[j] + fn[j]) : 0.0;
            lacc += tp[j] + fp[j] + fn[j]
                        ? static_cast<double>(tp[j]) / (tp[j] + fp[j] + fn[j])
                        : 0.0;
        }
        Pra eb = example_based(p), lb = label_based(p);
        auto close = [](double x, double y) { return std::abs(x - y) <= 1e-12; };
        return close(exact_match_ratio(p), emr / n) && close(eb.precision, prec / n) &&
               close(eb.recall, rec / n) && close(eb.accuracy, acc / n) &&
               close(lb.precision, lprec / kNumTags) && close(lb.recall, lrec / kNumTags) &&
               close(lb.accuracy, lacc / kNumTags);
    };

    for (std::size_t i = 0; i < np; ++i)
        if (!verify({pairs[i]})) return {false, "1-row case " + std::to_string(i)};
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < np; ++j)
            if (!verify({pairs[i], pairs[j]}))
                return {false, "2-row case " + std::to_string(i) + "," + std::to_string(j)};
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = 0; j < np; ++j)
            for (std::size_t k = 0; k < np; ++k)
                if (!verify({pairs[i], pairs[j], pairs[k]}))
                    return {false, "3-row case " + std::to_string(i) + "," + std::to_string(j) +
                                       "," + std::to_string(k)};

    // MFL anchor: modal combination holds a 32% share of the test truths
    std::vector<AffordanceVector> train = {av({11}), av({11}), av({3})};
    std::vector<AffordanceVector> test;
    for (int i = 0; i < 32; ++i) test.push_back(av({11}));
    for (int i = 0; i < 40; ++i) test.push_back(av({5}));
    for (int i = 0; i < 28; ++i) test.push_back(av({3}));
    MetricsReport rep = mfl_baseline(train, test);
    if (std::abs(rep.emr - 0.32) > 1e-12) return {false, "mfl emr " + std::to_string(rep.emr)};

    std::ostringstream os;
    os << tested << " enumerated sets, mfl emr 0.32";
    return {true, os.str()};
}

const std::vector<std::string> kCapacityRows = {
    "#-o-#-o-#-",
    "-^-#-^-#-^",
    "o-#-o-#-o-",
    "-#-^-#-^-#",
    "#o#o#o#o#o",
};

Palette capacity_palette() {
    return {{'#', {0.15, 0.15, 0.2}},
            {'-', {0.9, 0.92, 0.95}},
            {'o', {0.85, 0.75, 0.1}},
            {'^', {0.7, 0.1, 0.1}}};
}

Outcome check_autoencoder_capacity() {
    LevelGrid level = ingest_level_from(paint(kCapacityRows, capacity_palette()), kCapacityRows,
                                        four_tile_legend("cap"), "cap", "L1");
    std::vector<ContextSample> samples = extract_contexts(level);  // 50 cells
    if (samples.size() != 50) return {false, "expected 50 samples"};
    Tensor weights = compute_label_weights(samples);

    AutoencoderConfig cfg;  // the full-size architecture
    cfg.seed = 60;
    Xae model = Xae::build(cfg);
    TrainConfig tc;
    tc.batch_size = 10;
    tc.max_epochs = 500;
    tc.patience = 500;  // run to the loss target, not the validation curve
    tc.val_fraction = 0.2;
    tc.seed = 60;
    tc.target_train_loss = 0.04;
    TrainReport rep = model.train(samples, weights, tc);
    double final_loss = rep.train_total.back();
    if (final_loss >= 0.05)
        return {false, "train loss " + std::to_string(final_loss) + " after " +
                           std::to_string(rep.stopping_epoch) + " epochs"};

    double mse_acc = 0.0;
    int aff_wrong = 0;
    for (const auto& s : samples) {
        Tensor emb = model.encode(s.pixels, s.center_affordance);
        auto [tile, probs] = model.decode(emb);
        double se = 0.0;
        for (int py = 0; py < kTilePx; ++py)
            for (int px = 0; px < kTilePx; ++px)
                for (int ch = 0; ch < 3; ++ch) {
                    double diff = tile.at({py, px, ch}) - s.pixels.at({16 + py, 16 + px, ch});
                    se += diff * diff;
                }
        mse_acc += se / (kTilePx * kTilePx * 3);
        auto [bits, p] = model.predict_affordances(s.pixels);
        if (!(bits == s.center_affordance)) ++aff_wrong;
    }
    double recon = mse_acc / static_cast<double>(samples.size());
    if (recon >= 0.01) return {false, "reconstruction mse " + std::to_string(recon)};
    if (aff_wrong > 0) return {false, std::to_string(aff_wrong) + "/50 affordance sets wrong"};

    std::ostringstream os;
    os << "loss " << std::fixed << std::setprecision(4) << final_loss << " @ epoch "
       << rep.stopping_epoch << ", recon mse " << std::setprecision(5) << recon
       << ", affordances 50/50";
    return {true, os.str()};
}

GameCorpus make_game(const std::string& id, const Palette& palette,
                     const std::vector<std::vector<std::string>>& levels) {
    GameCorpus g;
    g.legend = four_tile_legend(id);
    int n = 0;
    for (const auto& rows : levels)
        g.levels.push_back(ingest_level_from(paint(rows, palette), rows, g.legend, id,
                                             "L" + std::to_string(++n)));
    return g;
}

Outcome check_crossfold_beats_mfl() {
    // shared tile shapes (flat-color 16x16 squares), disjoint palettes
    Palette pal_a = {{'#', {0.1, 0.12, 0.18}},
                     {'-', {0.95, 0.9, 0.85}},
                     {'o', {0.9, 0.8, 0.15}},
                     {'^', {0.75, 0.05, 0.1}}};
    Palette pal_b = {{'#', {0.22, 0.18, 0.08}},
                     {'-', {0.8, 0.88, 0.97}},
                     {'o', {0.75, 0.7, 0.3}},
                     {'^', {0.6, 0.2, 0.25}}};
    // game A is wall-heavy: its modal combination is {Solid}
    GameCorpus a = make_game("gameA", pal_a,
                             {{
                                  "############",
                                  "#----o-----#",
                                  "####-####--#",
                                  "#--^----o--#",
                                  "#-####-###-#",
                                  "#o------^--#",
                                  "############",
                              },
                              {
                                  "############",
                                  "#-o------o-#",
                                  "#-##--##-#-#",
                                  "#----^-----#",
                                  "###-####-###",
                                  "#--o---^---#",
                                  "############",
                              }});
    // game B is open: {Solid} is a minority there, so MFL scores low
    GameCorpus b = make_game("gameB", pal_b,
                             {{
                                  "------------",
                                  "--o---o---o-",
                                  "------------",
                                  "-^---#---^--",
                                  "------------",
                                  "-o---^---o--",
                                  "############",
                              },
                              {
                                  "------------",
                                  "-o-o----o---",
                                  "-----#----^-",
                                  "--^---------",
                                  "----o---o---",
                                  "-^------^---",
                                  "############",
                              }});

    // the full-size architecture: smaller models lean on the affordance-input
    // shortcut and collapse under the zero-vector prediction protocol
    AutoencoderConfig ac;
    ac.seed = 61;
    TrainConfig tc;
    tc.batch_size = 16;
    tc.max_epochs = 400;
    tc.patience = 400;
    tc.adam.lr = 2e-3;
    tc.seed = 61;
    tc.target_train_loss = 0.015;

    FoldReport fold = crossfold({a, b}, 1, ac, tc);
    std::ostringstream os;
    os << "model emr " << std::fixed << std::setprecision(3) << fold.model.emr << " vs mfl "
       << fold.mfl.emr << " on " << fold.model.rows << " held-out contexts";
    if (fold.model.emr <= fold.mfl.emr) return {false, os.str()};
    return {true, os.str()};
}

Outcome check_ann_quality() {
    Rng rng(70);
    EmbeddingStore store;
    for (int i = 0; i < 5000; ++i) {
        StoreItem item;
        item.embedding = random_probs({256}, rng, -1.0, 1.0);
        item.tile = Tensor({kTilePx, kTilePx, 3});
        store.items.push_back(std::move(item));
    }
    RPForest forest = build_index(store);  // default settings
    int hits = 0;
    const int n_queries = 500;
    std::vector<Tensor> queries;
    std::vector<int> exact(n_queries);
    for (int q = 0; q < n_queries; ++q) queries.push_back(random_probs({256}, rng, -1.0, 1.0));
    for (int q = 0; q < n_queries; ++q) exact[static_cast<std::size_t>(q)] = exact_nn(store, queries[static_cast<std::size_t>(q)]);
    for (int q = 0; q < n_queries; ++q)
        if (query_nn(forest, store, queries[static_cast<std::size_t>(q)]) ==
            exact[static_cast<std::size_t>(q)])
            ++hits;
    double recall = static_cast<double>(hits) / n_queries;

    int agree = 0;
    for (int q = 0; q < n_queries; ++q)
        if (query_nn(forest, store, queries[static_cast<std::size_t>(q)], 5000) ==
            exact[static_cast<std::size_t>(q)])
            ++agree;

    std::ostringstream os;
    os << "recall@1 " << std::fixed << std::setprecision(3) << recall << ", exhaustive agreement "
       << agree << "/" << n_queries;
    if (recall < 0.95 || agree != n_queries) return {false, os.str()};
    return {true, os.str()};
}

Outcome check_generation_fidelity() {
    // deterministic 3-row-periodic corpus
    std::vector<std::string> rows;
    const int H = 12, W = 8;
    const std::array<char, 3> cycle = {'#', '-', 'o'};
    for (int y = 0; y < H; ++y)
        rows.push_back(std::string(W, cycle[static_cast<std::size_t>(y % 3)]));
    LevelGrid level = ingest_level_from(paint(rows, capacity_palette()), rows,
                                        four_tile_legend("pat"), "pat", "L1");

    AutoencoderConfig ac;
    ac.conv_filters = {4, 4, 4};
    ac.aff_encoder = {8, 4};
    ac.embedding_dim = 16;
    ac.aff_decoder = {4, 8};
    ac.img_decoder_filters = {6, 6};
    ac.seed = 80;
    Xae xae = Xae::build(ac);  // untrained: embeddings only need to be distinct
    EmbeddedLevel emb = embed_level(xae, level);

    GeneratorTrainConfig gc;
    gc.hidden = 64;
    gc.max_epochs = 400;
    gc.patience = 400;
    gc.seed = 80;
    gc.target_train_loss = 1e-5;
    gc.adam.lr = 3e-3;
    auto [gen, rep] = train_generator(make_sequences({emb}), gc);

    EmbeddingStore store = build_store(xae, {level});
    RPForest forest = build_index(store, 10, 16, 80);

    EmbeddedLevel seed;
    seed.height = kHistoryRows;
    seed.width = W;
    for (int y = 0; y < kHistoryRows; ++y)
        for (int x = 0; x < W; ++x) seed.cells.push_back(emb.cell(y, x));
    GenerationConfig cfg;
    cfg.target_height = H;
    cfg.target_width = W;
    GeneratedLevel out = generate(gen, forest, store, cfg, seed);

    int match = 0, total = 0, closure_bad = 0;
    for (int y = kHistoryRows; y < H; ++y)
        for (int x = 0; x < W; ++x, ++total) {
            int id = out.item_ids[static_cast<std::size_t>(y) * W + x];
            if (id < 0 || id >= static_cast<int>(store.items.size())) {
                ++closure_bad;
                continue;
            }
            const StoreItem& item = store.items[static_cast<std::size_t>(id)];
            bool same = item.affordance == level.aff(y, x);
            for (int py = 0; same && py < kTilePx; ++py)
                for (int px = 0; same && px < kTilePx; ++px)
                    for (int ch = 0; ch < 3; ++ch)
                        if (std::abs(item.tile.at({py, px, ch}) -
                                     level.pixels.at(y * kTilePx + py, x * kTilePx + px, ch)) >
                            1e-9) {
                            same = false;
                            break;
                        }
            if (same) ++match;
        }
    double fidelity = static_cast<double>(match) / total;

    // symmetric mode: closure must hold on every cell there as well
    EmbeddedLevel left;
    left.height = H;
    left.width = W / 2;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W / 2; ++x) left.cells.push_back(emb.cell(y, x));
    auto [gen_c, rep_c] = train_generator(make_column_sequences({emb}), gc);
    GenerationConfig sym_cfg;
    GeneratedLevel sym = generate_symmetric(gen_c, forest, store, left, sym_cfg);
    for (int id : sym.item_ids)
        if (id < 0 || id >= static_cast<int>(store.items.size())) ++closure_bad;
    for (std::size_t i = 0; i < sym.item_ids.size(); ++i)
        if (sym.snapped.cells[i].data !=
            store.items[static_cast<std::size_t>(sym.item_ids[i])].embedding.data)
            ++closure_bad;
    for (std::size_t i = 0; i < out.item_ids.size(); ++i)
        if (out.snapped.cells[i].data !=
            store.items[static_cast<std::size_t>(out.item_ids[i])].embedding.data)
            ++closure_bad;

    std::ostringstream os;
    os << "continuation fidelity " << std::fixed << std::setprecision(3) << fidelity << " ("
       << match << "/" << total << "), closure violations " << closure_bad;
    if (fidelity < 0.9 || closure_bad != 0) return {false, os.str()};
    return {true, os.str()};
}

Outcome check_shape_anchors() {
    // 512x352 pixels at 16-px tiles -> 32x22 cells, 256-d embeddings
    Image img;
    img.width = 512;
    img.height = 352;
    img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0.0);
    Rng rng(90);
    for (double& v : img.rgb) v = rng.uniform(0.0, 1.0);
    LevelGrid level = ingest_level_from(img, {}, std::nullopt, "anchor", "L1");
    if (level.width != 32 || level.height != 22)
        return {false, "grid " + std::to_string(level.width) + "x" + std::to_string(level.height)};
    AutoencoderConfig cfg;  // default: 256-d embedding
    cfg.seed = 90;
    Xae model = Xae::build(cfg);
    EmbeddedLevel emb = embed_level(model, level);
    if (emb.width != 32 || emb.height != 22 || emb.cells.size() != 32 * 22)
        return {false, "embedded grid shape mismatch"};
    for (const auto& c : emb.cells)
        if (c.shape != std::vector<int>{256}) return {false, "embedding dim != 256"};
    if (kHistoryRows * 32 != 96) return {false, "history window tile count"};
    return {true, "512x352x3 -> 32x22x256; 3-row window at width 32 = 96 tiles"};
}

Outcome check_expressive_range_anchors() {
    constexpr int kSolid = 11, kCollect = 3, kHazard = 6;
    auto blank = [](int h, int w) {
        LevelGrid level;
        level.width = w;
        level.height = h;
        level.affordances.assign(static_cast<std::size_t>(h) * w, AffordanceVector{});
        return level;
    };
    LevelGrid flat = blank(5, 8);
    for (int x = 0; x < 8; ++x) flat.aff(3, x).bits[kSolid] = 1;
    if (linearity(flat) != 0.0) return {false, "collinear linearity != 0"};

    LevelGrid lenient = blank(10, 10);
    lenient.aff(1, 1).bits[kCollect] = 1;
    lenient.aff(1, 2).bits[kCollect] = 1;
    lenient.aff(8, 8).bits[kHazard] = 1;
    if (std::abs(leniency(lenient) - 0.01) > 1e-15) return {false, "0.01 leniency case"};

    LevelGrid harsh = blank(4, 5);
    for (auto& a : harsh.affordances) a.bits[kHazard] = 1;
    if (leniency(harsh) != -1.0) return {false, "all-hazard leniency != -1"};
    return {true, "collinear 0.0, sparse 0.01, all-hazard -1.0"};
}

int run_cli(const std::string& args, const fs::path& log) {
    std::string cmd = std::string(TE_CLI_PATH) + " " + args + " >> " + log.string() + " 2>&1";
    return std::system(cmd.c_str());
}

Outcome check_reproducibility() {
    fs::path root = fs::temp_directory_path() / "te_acceptance_repro";
    fs::remove_all(root);
    fs::path corpus = root / "corpus" / "toy";
    fs::create_directories(corpus / "levels");

    std::vector<std::string> rows = {
        "##########",
        "#--o---o-#",
        "#-####---#",
        "#---^--o-#",
        "#-#--###-#",
        "#o---^---#",
        "#--###--o#",
        "#-^----#-#",
        "##########",
    };
    Palette pal = capacity_palette();
    {
        std::ofstream legend(corpus / "legend.json");
        legend << R"({"tile_px": 16, "tiles": {"#": ["Solid"], "-": ["Empty"], "o": ["Collectable"], "^": ["Hazard"]}})"
               << "\n";
    }
    write_png(corpus / "levels" / "L1.png", paint(rows, pal));
    {
        std::ofstream grid(corpus / "levels" / "L1.txt");
        for (const auto& r : rows) grid << r << "\n";
    }

    fs::path out = root / "out";
    fs::path cfg_path = root / "config.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({
  "corpus_root": ")" << (root / "corpus").string() << R"(",
  "games": ["toy"],
  "out_dir": ")" << out.string() << R"(",
  "seed": 7,
  "threads": 1,
  "autoencoder": {"conv_filters": [4,4,4], "aff_encoder": [8,4], "embedding_dim": 16,
                   "aff_decoder": [4,8], "img_decoder_filters": [6,6]},
  "train": {"batch_size": 8, "max_epochs": 3, "patience": 3},
  "index": {"trees": 4, "leaf_capacity": 8},
  "generator": {"hidden": 24, "max_epochs": 3, "patience": 3},
  "generation": {"mode": "row", "target_height": 6, "target_width": 10,
                  "seed_level": "toy/L1"}
})" << "\n";
    }

    fs::path log = root / "cli.log";
    const std::vector<std::string> commands = {"ingest",    "train-ae", "embed",
                                               "index",     "train-gen", "generate",
                                               "eval-levels", "report"};
    auto run_all = [&]() -> bool {
        for (const auto& c : commands)
            if (run_cli("--config " + cfg_path.string() + " " + c, log) != 0) return false;
        return true;
    };

    if (!run_all()) return {false, "first pipeline run failed (see " + log.string() + ")"};
    fs::path snapshot = root / "snapshot";
    fs::copy(out, snapshot, fs::copy_options::recursive);
    if (!run_all()) return {false, "second pipeline run failed (see " + log.string() + ")"};

    int compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(snapshot)) {
        if (!e.is_regular_file()) continue;
        fs::path rel = fs::relative(e.path(), snapshot);
        fs::path fresh = out / rel;
        if (!fs::exists(fresh)) return {false, "missing on re-run: " + rel.string()};
        std::ifstream f1(e.path(), std::ios::binary), f2(fresh, std::ios::binary);
        std::string s1((std::istreambuf_iterator<char>(f1)), {});
        std::string s2((std::istreambuf_iterator<char>(f2)), {});
        if (s1 != s2) return {false, "differs on re-run: " + rel.string()};
        ++compared;
    }
    return {true, std::to_string(compared) + " artifacts byte-identical across re-runs"};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*fn)();
    };
    const std::vector<Criterion> criteria = {
        {"gradient-soundness", check_gradient_soundness},
        {"weighted-bce-oracle", check_eq2_oracle},
        {"alpha-score-oracle", check_eq1_oracle},
        {"metric-brute-force", check_metric_brute_force},
        {"autoencoder-capacity", check_autoencoder_capacity},
        {"crossfold-beats-mfl", check_crossfold_beats_mfl},
        {"ann-quality", check_ann_quality},
        {"generation-fidelity", check_generation_fidelity},
        {"shape-anchors", check_shape_anchors},
        {"expressive-range-anchors", check_expressive_range_anchors},
        {"reproducibility", check_reproducibility},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.ok ? "[PASS] " : "[FAIL] ") << c.name << " — " << o.detail << " ["
                  << std::fixed << std::setprecision(1) << secs << "s]" << std::endl;
        if (!o.ok) ++failures;
    }
    if (failures) std::cout << failures << " criteria failed" << std::endl;
    return failures == 0 ? 0 : 1;
}
