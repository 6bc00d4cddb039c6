#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "te/corpus.hpp"
#include "te/io.hpp"
#include "te/nnindex.hpp"
#include "te/tensor_io.hpp"

using namespace te;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path p = fs::temp_directory_path() / "te_io_test";
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("little-endian scalar round trip") {
    std::stringstream ss;
    bin::write_le<std::uint16_t>(ss, 0xBEEF);
    bin::write_le<std::uint32_t>(ss, 0xDEADBEEFu);
    bin::write_f32(ss, 1.5f);
    bin::write_string(ss, "hello");
    CHECK(bin::read_le<std::uint16_t>(ss, "a") == 0xBEEF);
    CHECK(bin::read_le<std::uint32_t>(ss, "b") == 0xDEADBEEFu);
    CHECK(bin::read_f32(ss, "c") == 1.5f);
    CHECK(bin::read_string(ss, "d") == "hello");
}

TEST_CASE("byte order on disk is little-endian") {
    std::stringstream ss;
    bin::write_le<std::uint32_t>(ss, 0x01020304u);
    std::string s = ss.str();
    REQUIRE(s.size() == 4);
    CHECK(static_cast<unsigned char>(s[0]) == 0x04);
    CHECK(static_cast<unsigned char>(s[3]) == 0x01);
}

TEST_CASE("truncated read reports the offset") {
    std::stringstream ss;
    bin::write_le<std::uint16_t>(ss, 7);
    try {
        (void)bin::read_le<std::uint64_t>(ss, "header");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        std::string msg = e.what();
        CHECK(msg.find("header") != std::string::npos);
        CHECK(msg.find("offset") != std::string::npos);
    }
}

TEST_CASE("tensor container round trip") {
    Rng rng(90);
    Tensor a({3, 4}), b({2, 2, 2});
    for (double& v : a.data) v = rng.uniform(-2.0, 2.0);
    for (double& v : b.data) v = rng.uniform(-2.0, 2.0);
    fs::path p = temp_dir() / "roundtrip.tcwt";
    save_tensors(p, {{"alpha", &a}, {"beta", &b}});
    auto loaded = load_tensors(p);
    REQUIRE(loaded.size() == 2);
    REQUIRE(loaded.count("alpha"));
    REQUIRE(loaded.count("beta"));
    CHECK(loaded["alpha"].shape == a.shape);
    CHECK(loaded["beta"].shape == b.shape);
    // storage is f32, so compare at float precision
    for (std::size_t i = 0; i < a.data.size(); ++i)
        CHECK(loaded["alpha"].data[i] == doctest::Approx(a.data[i]).epsilon(1e-6));
}

TEST_CASE("tensor container save is idempotent at the byte level") {
    Tensor a({5});
    a.data = {1, 2, 3, 4, 5};
    fs::path p1 = temp_dir() / "idem1.tcwt";
    fs::path p2 = temp_dir() / "idem2.tcwt";
    save_tensors(p1, {{"t", &a}});
    save_tensors(p2, {{"t", &a}});
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
}

TEST_CASE("tensor container rejects a bad version") {
    Tensor a({2});
    std::stringstream ss;
    write_tensors(ss, {{"t", &a}});
    std::string bytes = ss.str();
    bytes[4] = 0x7f;  // stomp the version field behind the 4-byte magic
    std::stringstream bad(bytes);
    CHECK_THROWS_AS(read_tensors(bad), IoError);
}

TEST_CASE("tensor container rejects garbage magic") {
    std::stringstream bad("NOPE additional garbage bytes here");
    CHECK_THROWS_AS(read_tensors(bad), IoError);
}

TEST_CASE("atomic file leaves no temp debris and replaces atomically") {
    fs::path p = temp_dir() / "atomic.bin";
    {
        AtomicFile f(p);
        f.stream() << "payload";
        f.commit();
    }
    CHECK(fs::exists(p));
    CHECK(!fs::exists(p.string() + ".tmp"));
    {
        AtomicFile f(p);
        f.stream() << "partial";
        // no commit: destructor must clean up and keep the old payload
    }
    std::ifstream in(p);
    std::string got((std::istreambuf_iterator<char>(in)), {});
    CHECK(got == "payload");
    CHECK(!fs::exists(p.string() + ".tmp"));
}

TEST_CASE("dataset round trip preserves samples and weights") {
    Rng rng(91);
    Dataset ds;
    ds.tag_order.assign(tag_names().begin(), tag_names().end());
    ds.label_weights = Tensor({kNumTags});
    for (double& v : ds.label_weights.data) v = rng.uniform(0.5, 2.0);
    for (int s = 0; s < 3; ++s) {
        ContextSample cs;
        cs.pixels = Tensor({kContextPx, kContextPx, 3});
        for (double& v : cs.pixels.data) v = rng.uniform(0.0, 1.0);
        cs.center_affordance.bits[static_cast<std::size_t>(s)] = 1;
        cs.game_id = "gameA";
        cs.level_id = "lvl" + std::to_string(s);
        cs.x = s;
        cs.y = 2 * s;
        cs.dedup_key = "C:key" + std::to_string(s);
        ds.samples.push_back(std::move(cs));
    }
    fs::path p = temp_dir() / "ds.tcds";
    save_dataset(p, ds);
    Dataset back = load_dataset(p);
    REQUIRE(back.samples.size() == 3);
    CHECK(back.tag_order == ds.tag_order);
    for (int i = 0; i < kNumTags; ++i)
        CHECK(back.label_weights.data[static_cast<std::size_t>(i)] ==
              doctest::Approx(ds.label_weights.data[static_cast<std::size_t>(i)]).epsilon(1e-6));
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(back.samples[s].game_id == ds.samples[s].game_id);
        CHECK(back.samples[s].level_id == ds.samples[s].level_id);
        CHECK(back.samples[s].x == ds.samples[s].x);
        CHECK(back.samples[s].y == ds.samples[s].y);
        CHECK(back.samples[s].center_affordance == ds.samples[s].center_affordance);
        for (std::size_t i = 0; i < back.samples[s].pixels.data.size(); ++i)
            CHECK(back.samples[s].pixels.data[i] ==
                  doctest::Approx(ds.samples[s].pixels.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("dataset load rejects a truncated file") {
    Rng rng(92);
    Dataset ds;
    ds.tag_order.assign(tag_names().begin(), tag_names().end());
    ds.label_weights = Tensor({kNumTags});
    ds.label_weights.fill(1.0);
    ContextSample cs;
    cs.pixels = Tensor({kContextPx, kContextPx, 3});
    cs.game_id = "g";
    cs.level_id = "l";
    ds.samples.push_back(std::move(cs));
    fs::path p = temp_dir() / "trunc.tcds";
    save_dataset(p, ds);
    auto size = fs::file_size(p);
    fs::resize_file(p, size / 2);
    CHECK_THROWS_AS(load_dataset(p), IoError);
}

TEST_CASE("index round trip preserves store and forest answers") {
    Rng rng(93);
    EmbeddingStore store;
    for (int i = 0; i < 40; ++i) {
        StoreItem item;
        item.embedding = Tensor({8});
        for (double& v : item.embedding.data) v = rng.uniform(-1.0, 1.0);
        item.tile = Tensor({16, 16, 3});
        item.affordance.bits[static_cast<std::size_t>(i % kNumTags)] = 1;
        item.game_id = "g";
        item.level_id = "l" + std::to_string(i);
        item.x = i;
        item.y = i / 2;
        store.items.push_back(std::move(item));
    }
    RPForest forest = build_index(store, 4, 8, 94);
    fs::path p = temp_dir() / "index.tcnn";
    save_index(p, forest, store);
    auto [forest2, store2] = load_index(p);
    REQUIRE(store2.items.size() == store.items.size());
    CHECK(store2.items[7].level_id == store.items[7].level_id);
    CHECK(store2.items[7].x == store.items[7].x);
    for (int q = 0; q < 10; ++q) {
        Tensor query({8});
        for (double& v : query.data) v = rng.uniform(-1.0, 1.0);
        CHECK(query_nn(forest, store, query) == query_nn(forest2, store2, query));
    }
}
