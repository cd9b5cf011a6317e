#include "doctest.h"

#include "datasets.hpp"
#include "helpers.hpp"

#include <fstream>
#include <set>

using namespace ssgan;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
    return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 8),
            static_cast<unsigned char>(v)};
}

std::vector<unsigned char> cat(std::initializer_list<std::vector<unsigned char>> parts) {
    std::vector<unsigned char> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

// n images of size rows x cols with pixel value (i + r + c) % 256.
void write_fixture(const std::filesystem::path& dir, std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                   std::uint32_t n_labels) {
    std::vector<unsigned char> pixels;
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t r = 0; r < rows; ++r)
            for (std::uint32_t c = 0; c < cols; ++c) pixels.push_back(static_cast<unsigned char>((i * 7 + r + c) % 256));
    pixels[0] = 0;
    pixels[1] = 255;
    std::vector<unsigned char> labels;
    for (std::uint32_t i = 0; i < n_labels; ++i) labels.push_back(static_cast<unsigned char>(i % 10));
    write_bytes(dir / "img", cat({be32(0x803), be32(n), be32(rows), be32(cols), pixels}));
    write_bytes(dir / "lab", cat({be32(0x801), be32(n_labels), labels}));
}

// Nearest class mean: a linear classifier fit on the labelled rows.
double nearest_mean_error(const Dataset& train, const Dataset& test) {
    Matrix means = Matrix::Zero(train.num_classes, static_cast<Eigen::Index>(train.dim()));
    std::vector<int> counts(static_cast<std::size_t>(train.num_classes), 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const int y = (*train.labels)[i];
        means.row(y) += train.pixels.row(static_cast<Eigen::Index>(i));
        ++counts[static_cast<std::size_t>(y)];
    }
    for (int k = 0; k < train.num_classes; ++k) means.row(k) /= counts[static_cast<std::size_t>(k)];
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        Eigen::Index best = 0;
        (means.rowwise() - test.pixels.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&best);
        wrong += static_cast<int>(best) != (*test.labels)[i];
    }
    return static_cast<double>(wrong) / static_cast<double>(test.size());
}

}  // namespace

TEST_SUITE("unit") {

TEST_CASE("load_idx reads header dims and maps bytes onto [-1, 1]") {
    const auto dir = testkit::scratch_dir("idx");
    write_fixture(dir, 10, 28, 28, 10);
    const Dataset d = load_idx(dir / "img", dir / "lab");
    CHECK(d.size() == 10);
    CHECK(d.height == 28);
    CHECK(d.width == 28);
    CHECK(d.pixels(0, 0) == -1.0);
    CHECK(d.pixels(0, 1) == 1.0);
    CHECK(d.pixels.minCoeff() >= -1.0);
    CHECK(d.pixels.maxCoeff() <= 1.0);
    CHECK((*d.labels)[3] == 3);
    CHECK_NOTHROW(d.validate());
}

TEST_CASE("load_idx rejects a count mismatch and bad magic") {
    const auto dir = testkit::scratch_dir("idx-bad");
    write_fixture(dir, 10, 4, 4, 9);
    try {
        load_idx(dir / "img", dir / "lab");
        FAIL("expected a consistency error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::consistency);
    }
    write_bytes(dir / "img", cat({be32(0x801), be32(1), be32(1), be32(1), {0}}));
    try {
        load_idx(dir / "img", dir / "lab");
        FAIL("expected a format error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::format);
        CHECK(std::string(e.what()).find((dir / "img").string()) != std::string::npos);
    }
}

TEST_CASE("write_idx round-trips bit-exactly") {
    const auto dir = testkit::scratch_dir("idx-rt");
    write_fixture(dir, 12, 5, 3, 12);
    const Dataset d = load_idx(dir / "img", dir / "lab");
    write_idx(d, dir / "img2", dir / "lab2");
    std::ifstream a(dir / "img", std::ios::binary), b(dir / "img2", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
}

TEST_CASE("pad_to centres the image on a -1 background") {
    const auto blobs = synthetic_blobs(1, 2, 10.0, 1);
    const Dataset p = pad_to(blobs, 6);
    CHECK(p.height == 6);
    CHECK(p.pixels(0, 0) == -1.0);
    CHECK(p.pixels(0, 1 * 6 + 1) == blobs.pixels(0, 0));
    CHECK(p.pixels(1, 4 * 6 + 4) == blobs.pixels(1, 15));
    CHECK_THROWS_AS(pad_to(blobs, 3), Error);
}

TEST_CASE("stratified_split with 10 per class over 10 classes labels 100") {
    const Dataset d = synthetic_blobs(30, 10, 6.0, 4);
    const Split s = stratified_split(d, {10, 9});
    CHECK(s.labelled.size() == 100);
    CHECK(s.unlabelled.size() == 200);
    CHECK_FALSE(s.unlabelled.has_labels());
    CHECK(s.shadow.size() == 200);
}

TEST_CASE("stratified_split with count 0 leaves everything unlabelled") {
    const Dataset d = synthetic_blobs(5, 3, 6.0, 4);
    const Split s = stratified_split(d, {0, 1});
    CHECK(s.labelled.empty());
    CHECK(s.unlabelled.size() == d.size());
}

TEST_CASE("stratified_split reports an infeasible request") {
    const Dataset d = synthetic_blobs(3, 2, 6.0, 4);
    try {
        stratified_split(d, {4, 1});
        FAIL("expected infeasible split");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::infeasible_split);
    }
}

TEST_CASE("synthetic_blobs: one per class gives K labelled examples") {
    const Dataset d = synthetic_blobs(1, 3, 5.0, 2);
    REQUIRE(d.size() == 3);
    std::set<int> labels(d.labels->begin(), d.labels->end());
    CHECK(labels == std::set<int>{0, 1, 2});
    CHECK(synthetic_blobs(4, 3, 5.0, 2).pixels == synthetic_blobs(4, 3, 5.0, 2).pixels);
}

TEST_CASE("synthetic_blobs: a linear classifier on two labels per class is below 5% error") {
    const Dataset d = synthetic_blobs(200, 2, 12.0, 17);
    const Split s = stratified_split(d, {2, 3});
    std::vector<int> truth;
    for (ExampleId id : s.unlabelled.ids) truth.push_back(s.shadow.at(id));
    const Dataset test = s.unlabelled.with_labels(truth);
    CHECK(nearest_mean_error(s.labelled, test) < 0.05);
}

TEST_CASE("holdout_split and random_subset are seeded and disjoint") {
    const Dataset d = synthetic_blobs(20, 4, 6.0, 1);
    const auto [keep, held] = holdout_split(d, 0.25, 3);
    CHECK(held.size() == 20);
    CHECK(keep.size() == 60);
    std::set<ExampleId> ids(keep.ids.begin(), keep.ids.end());
    for (ExampleId id : held.ids) CHECK_FALSE(ids.contains(id));
    CHECK(random_subset(d, 7, 5).ids == random_subset(d, 7, 5).ids);
    CHECK(random_subset(d, 7, 5).size() == 7);
    CHECK(random_subset(d, 500, 5).size() == d.size());
}

}  // TEST_SUITE

TEST_SUITE("invariants") {

TEST_CASE("split properties: conservation, disjointness, stratification, determinism") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const int k = 2 + static_cast<int>(seed % 5);
        const int per_class = 3 + static_cast<int>(seed % 7);
        const Dataset d = synthetic_blobs(12, k, 4.0, seed);
        const Split s = stratified_split(d, {per_class, seed * 31});
        CHECK(s.labelled.size() + s.unlabelled.size() == d.size());
        std::set<ExampleId> lab(s.labelled.ids.begin(), s.labelled.ids.end());
        for (ExampleId id : s.unlabelled.ids) CHECK_FALSE(lab.contains(id));
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int y : *s.labelled.labels) ++counts[static_cast<std::size_t>(y)];
        for (int c : counts) CHECK(c == per_class);
        for (ExampleId id : s.unlabelled.ids) CHECK(d.labels->at(static_cast<std::size_t>(id)) == s.shadow.at(id));
        CHECK(stratified_split(d, {per_class, seed * 31}).labelled.ids == s.labelled.ids);
    }
}

TEST_CASE("loaded intensities stay within [-1, 1] and hit both ends") {
    const auto dir = testkit::scratch_dir("idx-range");
    write_fixture(dir, 40, 6, 6, 40);
    const Dataset d = load_idx(dir / "img", dir / "lab");
    CHECK(d.pixels.minCoeff() == -1.0);
    CHECK(d.pixels.maxCoeff() == 1.0);
}

}  // TEST_SUITE
