#pragma once

#include "common.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace ssgan {

enum class Source : std::uint8_t { real = 0, generated = 1 };

const char* source_name(Source s);

struct Image {
    ExampleId id = 0;
    Matrix pixels;  // height x width, intensities in [-1, 1]
};

// Row-per-image storage. Labels, when present, align 1:1 with rows.
struct Dataset {
    std::size_t height = 0;
    std::size_t width = 0;
    int num_classes = 0;
    Matrix pixels;
    std::vector<ExampleId> ids;
    std::optional<std::vector<int>> labels;
    std::vector<Source> sources;

    std::size_t size() const { return ids.size(); }
    bool empty() const { return ids.empty(); }
    bool has_labels() const { return labels.has_value(); }
    std::size_t dim() const { return height * width; }

    Image image(std::size_t row) const;

    // Throws consistency errors when shapes, label ranges, ids or intensities
    // break the dataset invariants.
    void validate() const;

    Dataset subset(std::span<const std::size_t> rows) const;
    Dataset without_labels() const;
    Dataset with_labels(std::vector<int> new_labels) const;

    // An empty dataset with this one's geometry.
    Dataset empty_like() const;
};

// Appends b's rows after a's; geometry and label presence must match.
Dataset concat(const Dataset& a, const Dataset& b);

// True labels of unlabelled examples, kept apart from the training data.
using ShadowLabels = std::map<ExampleId, int>;

struct SplitSpec {
    int count_per_class = 0;
    std::uint64_t seed = 0;
};

struct Split {
    Dataset labelled;
    Dataset unlabelled;
    ShadowLabels shadow;
};

// IDX loader; raw bytes [0, 255] map linearly onto [-1, 1].
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, int num_classes = 10);

// Writes the bit-exact IDX pair for a labelled dataset (intensities are
// mapped back to bytes with rounding).
void write_idx(const Dataset& d, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// Surrounds every image with background (-1) up to target x target.
Dataset pad_to(const Dataset& d, std::size_t target);

Split stratified_split(const Dataset& d, const SplitSpec& spec);

// Seeded stratified hold-out of round(fraction * |d|) rows (per class).
std::pair<Dataset, Dataset> holdout_split(const Dataset& d, double fraction,
                                          std::uint64_t seed);

// Uniform random subset of n rows (original order kept); n >= |d| returns d.
Dataset random_subset(const Dataset& d, std::size_t n, std::uint64_t seed);

// K Gaussian clusters embedded in 4x4 "images"; separation is the distance
// between cluster centres in units of the per-pixel noise deviation.
Dataset synthetic_blobs(int n_per_class, int num_classes, double separation,
                        std::uint64_t seed);

}  // namespace ssgan
