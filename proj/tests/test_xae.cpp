#include <doctest.h>

#include <filesystem>

#include "te/gradcheck.hpp"
#include "te/xae.hpp"

using namespace te;

namespace {

// Shrunken model so the unit tests stay fast; geometry contracts are identical.
AutoencoderConfig small_config(std::uint64_t seed = 1) {
    AutoencoderConfig cfg;
    cfg.conv_filters = {4, 4, 4};
    cfg.aff_encoder = {8, 4};
    cfg.embedding_dim = 24;
    cfg.aff_decoder = {4, 8};
    cfg.img_decoder_filters = {6, 6};
    cfg.seed = seed;
    return cfg;
}

std::vector<ContextSample> random_samples(int n, std::uint64_t seed,
                                          const std::string& game = "g") {
    Rng rng(seed);
    std::vector<ContextSample> out;
    for (int i = 0; i < n; ++i) {
        ContextSample s;
        s.pixels = Tensor({kContextPx, kContextPx, 3});
        for (double& v : s.pixels.data) v = rng.uniform(0.0, 1.0);
        s.center_affordance.bits[static_cast<std::size_t>(i % kNumTags)] = 1;
        s.game_id = game;
        s.level_id = "L";
        s.x = i;
        out.push_back(std::move(s));
    }
    return out;
}

Tensor unit_weights() {
    Tensor w({kNumTags});
    w.fill(1.0);
    return w;
}

}  // namespace

TEST_CASE("config validation rejects loss weights that do not sum to one") {
    AutoencoderConfig cfg = small_config();
    cfg.image_loss_weight = 0.9;
    CHECK_THROWS_AS(Xae::build(cfg), GeometryError);
}

TEST_CASE("default config flattens 48px through three stride-2 convs") {
    AutoencoderConfig cfg;
    CHECK(cfg.flatten_dim() == 6 * 6 * 16);
    cfg.validate();
}

TEST_CASE("build is deterministic in the seed") {
    Xae a = Xae::build(small_config(5));
    Xae b = Xae::build(small_config(5));
    Xae c = Xae::build(small_config(6));
    auto ta = a.named_tensors(), tb = b.named_tensors(), tc = c.named_tensors();
    REQUIRE(ta.size() == tb.size());
    bool all_equal = true, any_diff_c = false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].second->data != tb[i].second->data) all_equal = false;
        if (ta[i].second->data != tc[i].second->data) any_diff_c = true;
    }
    CHECK(all_equal);
    CHECK(any_diff_c);
}

TEST_CASE("embedding is tanh-bounded with the configured width") {
    Xae m = Xae::build(small_config(7));
    auto samples = random_samples(3, 7);
    Tensor emb = m.encode(samples[0].pixels, samples[0].center_affordance);
    REQUIRE(emb.shape == std::vector<int>{24});
    for (double v : emb.data) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("batch encode agrees with single-sample encode in inference mode") {
    Xae m = Xae::build(small_config(8));
    auto samples = random_samples(3, 8);
    XaeBatch batch = make_batch(samples, {0, 1, 2});
    Tensor embs = m.encode_batch(batch.context, batch.aff_in, false);
    for (int i = 0; i < 3; ++i) {
        Tensor one = m.encode(samples[static_cast<std::size_t>(i)].pixels,
                              samples[static_cast<std::size_t>(i)].center_affordance);
        for (int d = 0; d < 24; ++d)
            CHECK(one.data[static_cast<std::size_t>(d)] ==
                  doctest::Approx(embs.at({i, d})).epsilon(1e-12));
    }
}

TEST_CASE("make_batch slices the center tile out of the context") {
    auto samples = random_samples(2, 9);
    XaeBatch batch = make_batch(samples, {0, 1});
    CHECK(batch.context.shape == std::vector<int>{2, 48, 48, 3});
    CHECK(batch.tile_target.shape == std::vector<int>{2, 16, 16, 3});
    CHECK(batch.aff_in.shape == std::vector<int>{2, 13});
    // target pixel (0,0) is context pixel (16,16)
    CHECK(batch.tile_target.at({0, 0, 0, 0}) ==
          doctest::Approx(batch.context.at({0, 16, 16, 0})));
    CHECK(batch.tile_target.at({1, 15, 15, 2}) ==
          doctest::Approx(batch.context.at({1, 31, 31, 2})));
    // affordance input mirrors the target labels
    CHECK(batch.aff_in.data == batch.aff_target.data);
}

TEST_CASE("loss decomposes with the configured branch weights") {
    Xae m = Xae::build(small_config(10));
    auto samples = random_samples(4, 10);
    XaeBatch batch = make_batch(samples, {0, 1, 2, 3});
    LossParts parts = m.loss(batch, unit_weights(), false, false);
    CHECK(parts.total ==
          doctest::Approx(0.8 * parts.image_mse + 0.2 * parts.affordance_wbce).epsilon(1e-12));
    CHECK(parts.image_mse > 0.0);
    CHECK(parts.affordance_wbce > 0.0);
}

TEST_CASE("gradients require train mode") {
    Xae m = Xae::build(small_config(11));
    auto samples = random_samples(2, 11);
    XaeBatch batch = make_batch(samples, {0, 1});
    CHECK_THROWS_AS(m.loss(batch, unit_weights(), false, true), GeometryError);
}

TEST_CASE("full-model gradients match finite differences on sampled coordinates") {
    Xae m = Xae::build(small_config(12));
    auto samples = random_samples(3, 12);
    XaeBatch batch = make_batch(samples, {0, 1, 2});
    Tensor w = unit_weights();
    auto loss_fn = [&] { return m.loss(batch, w, true, false).total; };
    m.zero_grads();
    m.loss(batch, w, true, true);
    Rng rng(12);
    auto rep = grad_check(loss_fn, m.params(), rng, 3);
    CAPTURE(rep.worst_param);
    CAPTURE(rep.max_rel_err);
    CHECK(rep.passed(1e-4));
}

TEST_CASE("predict_affordances thresholds the decoded probabilities") {
    Xae m = Xae::build(small_config(13));
    auto samples = random_samples(1, 13);
    auto [bits, probs] = m.predict_affordances(samples[0].pixels, 0.5);
    REQUIRE(probs.shape == std::vector<int>{kNumTags});
    for (int i = 0; i < kNumTags; ++i) {
        CHECK(probs.data[static_cast<std::size_t>(i)] > 0.0);
        CHECK(probs.data[static_cast<std::size_t>(i)] < 1.0);
        CHECK(bits.bits[static_cast<std::size_t>(i)] ==
              (probs.data[static_cast<std::size_t>(i)] >= 0.5 ? 1 : 0));
    }
}

TEST_CASE("training reduces the loss and stops within the epoch budget") {
    Xae m = Xae::build(small_config(14));
    auto samples = random_samples(12, 14);
    TrainConfig tc;
    tc.batch_size = 4;
    tc.max_epochs = 8;
    tc.patience = 3;
    tc.seed = 14;
    TrainReport rep = m.train(samples, unit_weights(), tc);
    REQUIRE(!rep.train_total.empty());
    CHECK(rep.stopping_epoch <= tc.max_epochs);
    CHECK(rep.train_total.back() < rep.train_total.front());
    CHECK(rep.best_epoch >= 1);
    CHECK(rep.best_epoch <= rep.stopping_epoch);
    CHECK(rep.val_total.size() == rep.train_total.size());
}

TEST_CASE("training rejects a dataset smaller than one batch") {
    Xae m = Xae::build(small_config(15));
    auto samples = random_samples(3, 15);
    TrainConfig tc;
    tc.batch_size = 32;
    CHECK_THROWS_AS(m.train(samples, unit_weights(), tc), GeometryError);
}

TEST_CASE("save/load round trip reproduces the model exactly") {
    Xae m = Xae::build(small_config(16));
    auto samples = random_samples(6, 16);
    TrainConfig tc;
    tc.batch_size = 3;
    tc.max_epochs = 2;
    tc.patience = 1;
    m.train(samples, unit_weights(), tc);
    auto path = std::filesystem::temp_directory_path() / "te_xae_test" / "model.tcwt";
    m.save(path);
    Xae back = Xae::load(path);
    Tensor a = m.encode(samples[0].pixels, samples[0].center_affordance);
    Tensor b = back.encode(samples[0].pixels, samples[0].center_affordance);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-5));
    auto [tile_a, probs_a] = m.decode(a);
    auto [tile_b, probs_b] = back.decode(b);
    for (std::size_t i = 0; i < probs_a.data.size(); ++i)
        CHECK(probs_a.data[i] == doctest::Approx(probs_b.data[i]).epsilon(1e-5));
}
