#include <doctest.h>

#include <random>

#include "punit/errors.hpp"
#include "punit/voxel_grid.hpp"

using namespace punit;

namespace {

VoxelGrid random_grid(std::mt19937& rng, std::array<std::int64_t, 3> dims) {
    VoxelGrid g(dims, 0);
    std::bernoulli_distribution coin(0.5);
    for (auto& v : g.data()) v = coin(rng) ? 1 : 0;
    return g;
}

} // namespace

TEST_CASE("grid construction and counting") {
    VoxelGrid g({80, 80, 80}, 1);
    CHECK(g.size() == 512000);
    CHECK(g.solid_count() == 512000);

    VoxelGrid e({4, 4, 4}, 0);
    CHECK(e.solid_count() == 0);
    e.set(1, 2, 3, 1);
    CHECK(e.at(1, 2, 3) == 1);
    CHECK(e.solid_count() == 1);

    CHECK_THROWS_AS(VoxelGrid({0, 4, 4}, 0), Error);
}

TEST_CASE("layout is x-fastest") {
    VoxelGrid g({3, 4, 5}, 0);
    CHECK(g.index(0, 0, 0) == 0);
    CHECK(g.index(1, 0, 0) == 1);
    CHECK(g.index(0, 1, 0) == 3);
    CHECK(g.index(0, 0, 1) == 12);
    CHECK(g.index(2, 3, 4) == g.size() - 1);
}

TEST_CASE("boolean operations") {
    VoxelGrid ones({4, 4, 4}, 1);
    VoxelGrid one({4, 4, 4}, 0);
    one.set(2, 2, 2, 1);

    auto diff = boolean(ones, one, BoolOp::subtract);
    CHECK(diff.solid_count() == 63);
    CHECK(diff.at(2, 2, 2) == 0);

    CHECK(boolean(ones, one, BoolOp::intersect).solid_count() == 1);
    CHECK(boolean(diff, one, BoolOp::unite).solid_count() == 64);

    VoxelGrid other({4, 4, 5}, 0);
    CHECK_THROWS_AS(boolean(ones, other, BoolOp::unite), Error);
}

TEST_CASE("boolean algebra properties") {
    std::mt19937 rng(42);
    VoxelGrid ones({8, 8, 8}, 1);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_grid(rng, {8, 8, 8});
        auto b = random_grid(rng, {8, 8, 8});
        auto neg = [&](const VoxelGrid& g) { return boolean(ones, g, BoolOp::subtract); };

        CHECK(boolean(a, b, BoolOp::unite) == boolean(b, a, BoolOp::unite));
        CHECK(boolean(a, b, BoolOp::intersect) == boolean(b, a, BoolOp::intersect));
        CHECK(boolean(a, a, BoolOp::unite) == a);
        CHECK(boolean(a, a, BoolOp::intersect) == a);
        CHECK(boolean(a, a, BoolOp::subtract).solid_count() == 0);
        // De Morgan: !(a|b) == !a & !b
        CHECK(neg(boolean(a, b, BoolOp::unite)) ==
              boolean(neg(a), neg(b), BoolOp::intersect));
    }
}

TEST_CASE("rasterize box at cell centers") {
    auto full = rasterize(Primitive::box({0, 0, 0}, {1, 1, 1}), {4, 4, 4});
    CHECK(full.solid_count() == 64);

    // Square bar modeled as a box: spans x, 2 of 8 centers in y and z.
    auto sq = rasterize(Primitive::box({0, 0.375, 0.375}, {1, 0.625, 0.625}), {8, 8, 8});
    CHECK(sq.solid_count() == 32);
}

TEST_CASE("rasterize sphere") {
    // At 2^3 every center is ~0.433 from the middle, so r=0.1 hits nothing.
    auto tiny = rasterize(Primitive::sphere({0.5, 0.5, 0.5}, 0.1), {2, 2, 2});
    CHECK(tiny.solid_count() == 0);

    auto s = rasterize(Primitive::sphere({0.5, 0.5, 0.5}, 0.3), {64, 64, 64});
    double frac = double(s.solid_count()) / double(s.size());
    double exact = 4.0 / 3.0 * 3.14159265358979323846 * 0.027;
    CHECK(frac == doctest::Approx(exact).epsilon(0.05));
}

TEST_CASE("rasterize circular bar") {
    auto b = rasterize(Primitive::bar(0, 0.5, 0.5, 0.25), {8, 8, 8});
    // 12 centers inside the disc per slice, 8 slices.
    CHECK(b.solid_count() == 96);
    // Runs the full length of its axis.
    for (std::int64_t i = 0; i < 8; ++i) CHECK(b.at(i, 4, 4) == 1);
}

TEST_CASE("primitive validation") {
    CHECK_THROWS_AS(Primitive::box({0, 0, 0}, {0, 1, 1}), Error);
    CHECK_THROWS_AS(Primitive::box({-0.1, 0, 0}, {1, 1, 1}), Error);
    CHECK_THROWS_AS(Primitive::sphere({0.5, 0.5, 0.5}, 0.0), Error);
    CHECK_THROWS_AS(Primitive::sphere({1.5, 0.5, 0.5}, 0.1), Error);
    CHECK_THROWS_AS(Primitive::bar(3, 0.5, 0.5, 0.1), Error);
}

TEST_CASE("csg script") {
    const char* script = R"([
      {"primitive": {"kind": "box", "lo": [0,0,0], "hi": [1,1,1]}, "op": "union"},
      {"primitive": {"kind": "sphere", "center": [0.5,0.5,0.5], "radius": 0.3}, "op": "subtract"}
    ])";
    auto steps = parse_csg_script(script);
    REQUIRE(steps.size() == 2);
    auto g = run_csg(steps, {16, 16, 16});
    auto box = rasterize(Primitive::box({0, 0, 0}, {1, 1, 1}), {16, 16, 16});
    auto sph = rasterize(Primitive::sphere({0.5, 0.5, 0.5}, 0.3), {16, 16, 16});
    CHECK(g == boolean(box, sph, BoolOp::subtract));

    CHECK_THROWS_AS(parse_csg_script("not json"), Error);
    CHECK_THROWS_AS(parse_csg_script(R"([{"primitive": {"kind": "box", "lo": [0,0,0],
        "hi": [1,1,1]}, "op": "xor"}])"), Error);
    CHECK_THROWS_AS(parse_csg_script(R"([{"op": "union"}])"), Error);
}

TEST_CASE("binary round trip") {
    std::mt19937 rng(7);
    auto g = random_grid(rng, {5, 7, 3});
    auto bytes = write_vgrid(g);
    CHECK(read_vgrid(bytes) == g);

    // Known header: magic, then dims little-endian.
    CHECK(bytes[0] == 'V');
    CHECK(bytes[4] == 'D');
    CHECK(bytes[7] == 1);
    CHECK(bytes[8] == 5);
    CHECK(bytes[12] == 7);
    CHECK(bytes[16] == 3);
    CHECK(bytes.size() == 20 + (5 * 7 * 3 + 7) / 8);

    auto bad = bytes;
    bad[1] = 'X';
    CHECK_THROWS_AS(read_vgrid(bad), Error);

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(read_vgrid(truncated), Error);

    auto padded = bytes;
    padded.push_back(0);
    CHECK_THROWS_AS(read_vgrid(padded), Error);
}

TEST_CASE("text round trip") {
    std::mt19937 rng(9);
    auto g = random_grid(rng, {4, 3, 2});
    CHECK(read_vgrid_text(write_vgrid_text(g)) == g);

    CHECK_THROWS_AS(read_vgrid_text("2 2"), Error);
    CHECK_THROWS_AS(read_vgrid_text("2 1 1\n1"), Error);
    CHECK_THROWS_AS(read_vgrid_text("1 1 1\n7"), Error);
}

TEST_CASE("file save and load") {
    std::mt19937 rng(11);
    auto g = random_grid(rng, {6, 6, 6});
    save_voxel_file(g, "roundtrip.vgrid");
    CHECK(load_voxel_file("roundtrip.vgrid") == g);
    save_voxel_file(g, "roundtrip.txt");
    CHECK(load_voxel_file("roundtrip.txt") == g);
    CHECK_THROWS_AS(load_voxel_file("does_not_exist.vgrid"), Error);
}
