#include "te/xae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "te/io.hpp"
#include "te/tensor_io.hpp"

namespace te {

void AutoencoderConfig::validate() const {
    if (embedding_dim <= 0) throw GeometryError("autoencoder: embedding dim must be positive");
    if (std::abs(image_loss_weight + affordance_loss_weight - 1.0) > 1e-12)
        throw GeometryError("autoencoder: loss weights must sum to 1");
    for (int f : conv_filters)
        if (f <= 0) throw GeometryError("autoencoder: conv filter counts must be positive");
}

XaeBatch make_batch(const std::vector<ContextSample>& samples, const std::vector<int>& idx) {
    const int n = static_cast<int>(idx.size());
    XaeBatch b;
    b.context = Tensor({n, kContextPx, kContextPx, 3});
    b.aff_in = Tensor({n, kNumTags});
    b.tile_target = Tensor({n, kTilePx, kTilePx, 3});
    b.aff_target = Tensor({n, kNumTags});
    for (int i = 0; i < n; ++i) {
        const ContextSample& s = samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
        std::copy(s.pixels.data.begin(), s.pixels.data.end(),
                  b.context.data.begin() + static_cast<std::size_t>(i) * s.pixels.numel());
        for (int j = 0; j < kNumTags; ++j) {
            double v = s.center_affordance.bits[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
            b.aff_in.at({i, j}) = v;
            b.aff_target.at({i, j}) = v;
        }
        // the reconstruction target is the center tile of the context window
        for (int y = 0; y < kTilePx; ++y)
            for (int x = 0; x < kTilePx; ++x)
                for (int c = 0; c < 3; ++c)
                    b.tile_target.at({i, y, x, c}) = s.pixels.at({kTilePx + y, kTilePx + x, c});
    }
    return b;
}

Xae Xae::build(const AutoencoderConfig& cfg) {
    cfg.validate();
    Xae m;
    m.cfg = cfg;
    Rng rng(cfg.seed);
    m.conv1_.init(3, cfg.conv_filters[0], 2, rng);
    m.conv2_.init(cfg.conv_filters[0], cfg.conv_filters[1], 2, rng);
    m.conv3_.init(cfg.conv_filters[1], cfg.conv_filters[2], 2, rng);
    m.bn1_.init(cfg.conv_filters[0]);
    m.bn2_.init(cfg.conv_filters[1]);
    m.bn3_.init(cfg.conv_filters[2]);
    m.aff1_.init(kNumTags, cfg.aff_encoder[0], rng);
    m.aff2_.init(cfg.aff_encoder[0], cfg.aff_encoder[1], rng);
    m.merge_.init(cfg.flatten_dim() + cfg.aff_encoder[1], cfg.embedding_dim, rng);
    m.dec_fc_.init(cfg.embedding_dim, 4 * 4 * 16, rng);
    m.up1_.init(16, cfg.img_decoder_filters[0], 2, rng);
    m.up2_.init(cfg.img_decoder_filters[0], cfg.img_decoder_filters[1], 2, rng);
    m.out_conv_.init(cfg.img_decoder_filters[1], 3, 1, rng);
    m.daff1_.init(cfg.embedding_dim, cfg.aff_decoder[0], rng);
    m.daff2_.init(cfg.aff_decoder[0], cfg.aff_decoder[1], rng);
    m.daff_out_.init(cfg.aff_decoder[1], kNumTags, rng);
    return m;
}

Tensor Xae::encode_batch(const Tensor& context, const Tensor& aff, bool train, Cache* cache) {
    const int n = context.dim(0);
    require_shape(context, {n, kContextPx, kContextPx, 3}, "encode context");
    require_shape(aff, {n, kNumTags}, "encode affordances");
    Cache local;
    Cache& c = cache ? *cache : local;
    c.train = train;
    c.ctx = context;
    c.aff_in = aff;
    c.c1 = bn1_.forward(conv1_.forward(context), train, &c.bc1);
    c.t1 = tanh_fwd(c.c1);
    c.c2 = bn2_.forward(conv2_.forward(c.t1), train, &c.bc2);
    c.t2 = tanh_fwd(c.c2);
    c.c3 = bn3_.forward(conv3_.forward(c.t2), train, &c.bc3);
    c.t3 = tanh_fwd(c.c3);
    c.flat = Tensor({n, cfg.flatten_dim()}, c.t3.data);
    c.a1 = aff1_.forward(aff);
    c.a1t = tanh_fwd(c.a1);
    c.a2 = aff2_.forward(c.a1t);
    c.a2t = tanh_fwd(c.a2);
    const int fdim = cfg.flatten_dim(), adim = cfg.aff_encoder[1];
    c.merged_in = Tensor({n, fdim + adim});
    for (int i = 0; i < n; ++i) {
        std::copy(&c.flat.data[c.flat.offset({i, 0})], &c.flat.data[c.flat.offset({i, 0})] + fdim,
                  &c.merged_in.data[c.merged_in.offset({i, 0})]);
        std::copy(&c.a2t.data[c.a2t.offset({i, 0})], &c.a2t.data[c.a2t.offset({i, 0})] + adim,
                  &c.merged_in.data[c.merged_in.offset({i, fdim})]);
    }
    c.emb = tanh_fwd(merge_.forward(c.merged_in));
    return c.emb;
}

std::pair<Tensor, Tensor> Xae::decode_batch(const Tensor& emb, Cache* cache) {
    const int n = emb.dim(0);
    require_shape(emb, {n, cfg.embedding_dim}, "decode embedding");
    Cache local;
    Cache& c = cache ? *cache : local;
    c.fc = dec_fc_.forward(emb);
    c.fct = tanh_fwd(c.fc);
    c.r = Tensor({n, 4, 4, 16}, c.fct.data);
    c.u1 = up1_.forward(c.r);
    c.u1t = tanh_fwd(c.u1);
    c.u2 = up2_.forward(c.u1t);
    c.u2t = tanh_fwd(c.u2);
    c.oc = out_conv_.forward(c.u2t);
    c.tile = sigmoid_fwd(c.oc);
    c.d1 = daff1_.forward(emb);
    c.d1t = tanh_fwd(c.d1);
    c.d2 = daff2_.forward(c.d1t);
    c.d2t = tanh_fwd(c.d2);
    c.dout = daff_out_.forward(c.d2t);
    c.probs = sigmoid_fwd(c.dout);
    return {c.tile, c.probs};
}

Tensor Xae::encode(const Tensor& context, const AffordanceVector& aff) {
    Tensor ctx({1, kContextPx, kContextPx, 3}, context.data);
    Tensor a({1, kNumTags});
    for (int j = 0; j < kNumTags; ++j)
        a.data[static_cast<std::size_t>(j)] = aff.bits[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
    Tensor e = encode_batch(ctx, a, /*train=*/false);
    return Tensor({cfg.embedding_dim}, e.data);
}

std::pair<Tensor, Tensor> Xae::decode(const Tensor& embedding) {
    Tensor e({1, cfg.embedding_dim}, embedding.data);
    auto [tile, probs] = decode_batch(e);
    return {Tensor({kTilePx, kTilePx, 3}, tile.data), Tensor({kNumTags}, probs.data)};
}

LossParts Xae::loss(const XaeBatch& batch, const Tensor& label_weights, bool train,
                    bool with_grads) {
    if (batch.n() < 1) throw GeometryError("loss: empty batch");
    if (with_grads && !train) throw GeometryError("loss: gradients require train mode");
    Cache c;
    Tensor emb = encode_batch(batch.context, batch.aff_in, train, &c);
    auto [tile, probs] = decode_batch(emb, &c);

    LossParts parts;
    Tensor dtile, dprobs;
    parts.image_mse = mse_loss(tile, batch.tile_target, with_grads ? &dtile : nullptr);
    parts.affordance_wbce = weighted_bce_loss(probs, batch.aff_target, label_weights,
                                              with_grads ? &dprobs : nullptr);
    parts.total = cfg.image_loss_weight * parts.image_mse +
                  cfg.affordance_loss_weight * parts.affordance_wbce;
    if (!with_grads) return parts;

    dtile *= cfg.image_loss_weight;
    dprobs *= cfg.affordance_loss_weight;

    // image decoder
    Tensor doc = sigmoid_bwd(c.tile, dtile);
    Tensor du2t = out_conv_.backward(c.u2t, doc);
    Tensor du2 = tanh_bwd(c.u2t, du2t);
    Tensor du1t = up2_.backward(c.u1t, du2);
    Tensor du1 = tanh_bwd(c.u1t, du1t);
    Tensor dr = up1_.backward(c.r, du1);
    Tensor dfct(c.fct.shape, dr.data);
    Tensor dfc = tanh_bwd(c.fct, dfct);
    Tensor demb = dec_fc_.backward(c.emb, dfc);

    // affordance decoder
    Tensor ddout = sigmoid_bwd(c.probs, dprobs);
    Tensor dd2t = daff_out_.backward(c.d2t, ddout);
    Tensor dd2 = tanh_bwd(c.d2t, dd2t);
    Tensor dd1t = daff2_.backward(c.d1t, dd2);
    Tensor dd1 = tanh_bwd(c.d1t, dd1t);
    demb += daff1_.backward(c.emb, dd1);

    // merge and encoder
    Tensor dmerge_out = tanh_bwd(c.emb, demb);
    Tensor dmin = merge_.backward(c.merged_in, dmerge_out);
    const int n = batch.n(), fdim = cfg.flatten_dim(), adim = cfg.aff_encoder[1];
    Tensor dflat({n, fdim});
    Tensor da2t({n, adim});
    for (int i = 0; i < n; ++i) {
        std::copy(&dmin.data[dmin.offset({i, 0})], &dmin.data[dmin.offset({i, 0})] + fdim,
                  &dflat.data[dflat.offset({i, 0})]);
        std::copy(&dmin.data[dmin.offset({i, fdim})], &dmin.data[dmin.offset({i, fdim})] + adim,
                  &da2t.data[da2t.offset({i, 0})]);
    }
    Tensor da2 = tanh_bwd(c.a2t, da2t);
    Tensor da1t = aff2_.backward(c.a1t, da2);
    Tensor da1 = tanh_bwd(c.a1t, da1t);
    aff1_.backward(c.aff_in, da1);

    Tensor dt3(c.t3.shape, dflat.data);
    Tensor dc3 = bn3_.backward(tanh_bwd(c.t3, dt3), c.bc3);
    Tensor dt2 = conv3_.backward(c.t2, dc3);
    Tensor dc2 = bn2_.backward(tanh_bwd(c.t2, dt2), c.bc2);
    Tensor dt1 = conv2_.backward(c.t1, dc2);
    Tensor dc1 = bn1_.backward(tanh_bwd(c.t1, dt1), c.bc1);
    conv1_.backward(c.ctx, dc1);
    return parts;
}

std::pair<AffordanceVector, Tensor> Xae::predict_affordances(const Tensor& context,
                                                             double threshold) {
    Tensor emb = encode(context, AffordanceVector{});
    auto [tile, probs] = decode(emb);
    (void)tile;
    AffordanceVector av;
    for (int j = 0; j < kNumTags; ++j)
        av.bits[static_cast<std::size_t>(j)] = probs.data[static_cast<std::size_t>(j)] >= threshold;
    return {av, probs};
}

std::vector<ParamRef> Xae::params() {
    std::vector<ParamRef> p;
    auto add = [&](const std::string& n, Tensor& v, Tensor& g) { p.push_back({n, &v, &g}); };
    add("enc.conv1.w", conv1_.w, conv1_.gw);
    add("enc.conv1.b", conv1_.b, conv1_.gb);
    add("enc.conv2.w", conv2_.w, conv2_.gw);
    add("enc.conv2.b", conv2_.b, conv2_.gb);
    add("enc.conv3.w", conv3_.w, conv3_.gw);
    add("enc.conv3.b", conv3_.b, conv3_.gb);
    add("enc.bn1.gamma", bn1_.gamma, bn1_.ggamma);
    add("enc.bn1.beta", bn1_.beta, bn1_.gbeta);
    add("enc.bn2.gamma", bn2_.gamma, bn2_.ggamma);
    add("enc.bn2.beta", bn2_.beta, bn2_.gbeta);
    add("enc.bn3.gamma", bn3_.gamma, bn3_.ggamma);
    add("enc.bn3.beta", bn3_.beta, bn3_.gbeta);
    add("enc.aff1.w", aff1_.w, aff1_.gw);
    add("enc.aff1.b", aff1_.b, aff1_.gb);
    add("enc.aff2.w", aff2_.w, aff2_.gw);
    add("enc.aff2.b", aff2_.b, aff2_.gb);
    add("enc.merge.w", merge_.w, merge_.gw);
    add("enc.merge.b", merge_.b, merge_.gb);
    add("dec.fc.w", dec_fc_.w, dec_fc_.gw);
    add("dec.fc.b", dec_fc_.b, dec_fc_.gb);
    add("dec.up1.w", up1_.w, up1_.gw);
    add("dec.up1.b", up1_.b, up1_.gb);
    add("dec.up2.w", up2_.w, up2_.gw);
    add("dec.up2.b", up2_.b, up2_.gb);
    add("dec.out.w", out_conv_.w, out_conv_.gw);
    add("dec.out.b", out_conv_.b, out_conv_.gb);
    add("dec.aff1.w", daff1_.w, daff1_.gw);
    add("dec.aff1.b", daff1_.b, daff1_.gb);
    add("dec.aff2.w", daff2_.w, daff2_.gw);
    add("dec.aff2.b", daff2_.b, daff2_.gb);
    add("dec.aff_out.w", daff_out_.w, daff_out_.gw);
    add("dec.aff_out.b", daff_out_.b, daff_out_.gb);
    return p;
}

std::vector<std::pair<std::string, const Tensor*>> Xae::named_tensors() const {
    auto* self = const_cast<Xae*>(this);
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (const auto& p : self->params()) out.emplace_back(p.name, p.value);
    out.emplace_back("enc.bn1.run_mean", &bn1_.run_mean);
    out.emplace_back("enc.bn1.run_var", &bn1_.run_var);
    out.emplace_back("enc.bn2.run_mean", &bn2_.run_mean);
    out.emplace_back("enc.bn2.run_var", &bn2_.run_var);
    out.emplace_back("enc.bn3.run_mean", &bn3_.run_mean);
    out.emplace_back("enc.bn3.run_var", &bn3_.run_var);
    return out;
}

void Xae::zero_grads() {
    for (auto& p : params()) p.grad->zero();
}

std::size_t Xae::param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_tensors()) n += t->numel();
    return n;
}

namespace {

nlohmann::json config_to_json(const AutoencoderConfig& c) {
    return {{"conv_filters", c.conv_filters},
            {"aff_encoder", c.aff_encoder},
            {"embedding_dim", c.embedding_dim},
            {"aff_decoder", c.aff_decoder},
            {"img_decoder_filters", c.img_decoder_filters},
            {"image_loss_weight", c.image_loss_weight},
            {"affordance_loss_weight", c.affordance_loss_weight},
            {"seed", c.seed}};
}

AutoencoderConfig config_from_json(const nlohmann::json& j) {
    AutoencoderConfig c;
    c.conv_filters = j.at("conv_filters").get<std::array<int, 3>>();
    c.aff_encoder = j.at("aff_encoder").get<std::array<int, 2>>();
    c.embedding_dim = j.at("embedding_dim").get<int>();
    c.aff_decoder = j.at("aff_decoder").get<std::array<int, 2>>();
    c.img_decoder_filters = j.at("img_decoder_filters").get<std::array<int, 2>>();
    c.image_loss_weight = j.at("image_loss_weight").get<double>();
    c.affordance_loss_weight = j.at("affordance_loss_weight").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

void Xae::save(const std::filesystem::path& path) const {
    save_tensors(path, named_tensors());
    nlohmann::json side;
    side["config"] = config_to_json(cfg);
    side["tag_order"] = std::vector<std::string>(tag_names().begin(), tag_names().end());
    side["seed"] = cfg.seed;
    AtomicFile f(path.string() + ".json");
    f.stream() << side.dump(2) << "\n";
    f.commit();
}

Xae Xae::load(const std::filesystem::path& path) {
    std::ifstream js(path.string() + ".json");
    if (!js) throw IoError("missing model sidecar " + path.string() + ".json");
    nlohmann::json side = nlohmann::json::parse(js);
    Xae m = build(config_from_json(side.at("config")));
    auto table = load_tensors(path);
    for (auto& [name, dst] : m.named_tensors()) {
        auto it = table.find(name);
        if (it == table.end()) throw IoError("model file is missing tensor " + name);
        if (it->second.shape != dst->shape)
            throw IoError("model tensor " + name + " has shape " + shape_str(it->second.shape) +
                          ", expected " + shape_str(dst->shape));
        const_cast<Tensor*>(dst)->data = it->second.data;
    }
    return m;
}

TrainReport Xae::train(const std::vector<ContextSample>& samples, const Tensor& label_weights,
                       const TrainConfig& tc) {
    if (samples.size() < 2) throw GeometryError("train: need at least 2 samples");
    if (tc.val_fraction <= 0.0 || tc.val_fraction >= 1.0)
        throw GeometryError("train: validation fraction must be in (0,1)");
    if (tc.patience < 1) throw GeometryError("train: patience must be >= 1");
    Rng rng(tc.seed);

    // Stratified split: each game contributes val_fraction of its samples.
    std::map<std::string, std::vector<int>> by_game;
    for (std::size_t i = 0; i < samples.size(); ++i)
        by_game[samples[i].game_id].push_back(static_cast<int>(i));
    std::vector<int> train_idx, val_idx;
    for (auto& [game, idx] : by_game) {
        rng.shuffle(idx);
        std::size_t nval = static_cast<std::size_t>(
            std::llround(tc.val_fraction * static_cast<double>(idx.size())));
        if (nval == 0 && idx.size() > 1) nval = 1;
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < nval ? val_idx : train_idx).push_back(idx[i]);
    }
    if (train_idx.empty() || val_idx.empty())
        throw GeometryError("train: split produced an empty partition");
    if (static_cast<int>(samples.size()) < tc.batch_size)
        throw GeometryError("train: dataset smaller than one batch");
    int batch = std::min<int>(tc.batch_size, static_cast<int>(train_idx.size()));

    XaeBatch val_batch = make_batch(samples, val_idx);
    AdamState adam(tc.adam);
    TrainReport rep;
    double best_val = std::numeric_limits<double>::infinity();
    Xae best = *this;
    int since_best = 0;

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        rng.shuffle(train_idx);
        double tot = 0, timg = 0, taff = 0;
        int nb = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(batch)) {
            std::vector<int> bidx(train_idx.begin() + static_cast<std::ptrdiff_t>(start),
                                  train_idx.begin() +
                                      static_cast<std::ptrdiff_t>(std::min(
                                          start + static_cast<std::size_t>(batch), train_idx.size())));
            XaeBatch b = make_batch(samples, bidx);
            zero_grads();
            LossParts parts = loss(b, label_weights, /*train=*/true, /*with_grads=*/true);
            adam.update(params());
            tot += parts.total;
            timg += parts.image_mse;
            taff += parts.affordance_wbce;
            ++nb;
        }
        rep.train_total.push_back(tot / nb);
        rep.train_image.push_back(timg / nb);
        rep.train_affordance.push_back(taff / nb);

        LossParts vparts = loss(val_batch, label_weights, /*train=*/false, /*with_grads=*/false);
        rep.val_total.push_back(vparts.total);
        rep.val_image.push_back(vparts.image_mse);
        rep.val_affordance.push_back(vparts.affordance_wbce);
        rep.stopping_epoch = epoch;

        if (vparts.total < best_val) {
            best_val = vparts.total;
            best = *this;
            rep.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= tc.patience) {
            break;
        }
        if (tc.target_train_loss > 0.0 && rep.train_total.back() < tc.target_train_loss) break;
    }
    *this = best;
    return rep;
}

}  // namespace te
