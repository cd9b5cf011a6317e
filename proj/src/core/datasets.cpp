#include "datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace ssgan {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
    std::array<unsigned char, 4> b{};
    in.read(reinterpret_cast<char*>(b.data()), 4);
    require(in.gcount() == 4, ErrorCode::format, "truncated IDX header in " + path.string());
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
           (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                                static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
    out.write(b.data(), 4);
}

std::ifstream open_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io, "cannot open " + path.string());
    return in;
}

std::vector<std::vector<std::size_t>> rows_by_class(const Dataset& d) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.num_classes));
    for (std::size_t i = 0; i < d.size(); ++i) by_class[static_cast<std::size_t>((*d.labels)[i])].push_back(i);
    return by_class;
}

// Partial Fisher-Yates: the first k entries become a uniform sample.
void shuffle_prefix(std::vector<std::size_t>& v, std::size_t k, Rng& rng) {
    for (std::size_t i = 0; i < k && i + 1 < v.size(); ++i) {
        const std::size_t j = i + uniform_index(rng, v.size() - i);
        std::swap(v[i], v[j]);
    }
}

}  // namespace

const char* source_name(Source s) {
    return s == Source::real ? "real" : "generated";
}

Image Dataset::image(std::size_t row) const {
    Image img;
    img.id = ids.at(row);
    img.pixels = Eigen::Map<const Matrix>(pixels.row(static_cast<Eigen::Index>(row)).data(),
                                          static_cast<Eigen::Index>(height), static_cast<Eigen::Index>(width));
    return img;
}

void Dataset::validate() const {
    require(num_classes >= 2, ErrorCode::consistency, "dataset needs at least 2 classes");
    require(static_cast<std::size_t>(pixels.rows()) == ids.size(), ErrorCode::consistency,
            "pixel rows do not match id count");
    require(ids.empty() || static_cast<std::size_t>(pixels.cols()) == dim(), ErrorCode::consistency,
            "pixel columns do not match image geometry");
    require(sources.size() == ids.size(), ErrorCode::consistency, "source tags do not match id count");
    if (labels) {
        require(labels->size() == ids.size(), ErrorCode::consistency, "labels do not align with images");
        for (int y : *labels)
            require(y >= 0 && y < num_classes, ErrorCode::consistency, "label out of range");
    }
    std::set<ExampleId> seen(ids.begin(), ids.end());
    require(seen.size() == ids.size(), ErrorCode::consistency, "duplicate example id");
    if (pixels.size() > 0)
        require(pixels.minCoeff() >= -1.0 && pixels.maxCoeff() <= 1.0, ErrorCode::consistency,
                "intensity outside [-1, 1]");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out = empty_like();
    out.pixels.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim()));
    out.ids.reserve(rows.size());
    out.sources.reserve(rows.size());
    if (labels) out.labels.emplace().reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t r = rows[k];
        out.pixels.row(static_cast<Eigen::Index>(k)) = pixels.row(static_cast<Eigen::Index>(r));
        out.ids.push_back(ids.at(r));
        out.sources.push_back(sources.at(r));
        if (labels) out.labels->push_back((*labels)[r]);
    }
    return out;
}

Dataset Dataset::without_labels() const {
    Dataset out = *this;
    out.labels.reset();
    return out;
}

Dataset Dataset::with_labels(std::vector<int> new_labels) const {
    require(new_labels.size() == size(), ErrorCode::consistency, "label count does not match dataset");
    Dataset out = *this;
    out.labels = std::move(new_labels);
    return out;
}

Dataset Dataset::empty_like() const {
    Dataset out;
    out.height = height;
    out.width = width;
    out.num_classes = num_classes;
    out.pixels.resize(0, static_cast<Eigen::Index>(dim()));
    if (labels) out.labels.emplace();
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.empty() && !b.empty() && a.has_labels() == b.has_labels()) return b;
    if (b.empty()) return a;
    require(a.height == b.height && a.width == b.width && a.num_classes == b.num_classes,
            ErrorCode::consistency, "cannot concatenate datasets of different geometry");
    require(a.has_labels() == b.has_labels(), ErrorCode::consistency,
            "cannot concatenate labelled with unlabelled data");
    Dataset out = a;
    out.pixels.resize(static_cast<Eigen::Index>(a.size() + b.size()), static_cast<Eigen::Index>(a.dim()));
    out.pixels.topRows(static_cast<Eigen::Index>(a.size())) = a.pixels;
    out.pixels.bottomRows(static_cast<Eigen::Index>(b.size())) = b.pixels;
    out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
    out.sources.insert(out.sources.end(), b.sources.begin(), b.sources.end());
    if (out.labels) out.labels->insert(out.labels->end(), b.labels->begin(), b.labels->end());
    return out;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 int num_classes) {
    std::ifstream img = open_binary(images_path);
    require(read_be32(img, images_path) == kImagesMagic, ErrorCode::format,
            "bad IDX image magic number in " + images_path.string());
    const std::uint32_t n = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);

    std::ifstream lab = open_binary(labels_path);
    require(read_be32(lab, labels_path) == kLabelsMagic, ErrorCode::format,
            "bad IDX label magic number in " + labels_path.string());
    const std::uint32_t n_labels = read_be32(lab, labels_path);
    require(n_labels == n, ErrorCode::consistency,
            "image/label count mismatch: " + std::to_string(n) + " images vs " + std::to_string(n_labels) +
                " labels");

    const std::size_t dim = std::size_t{rows} * cols;
    std::vector<unsigned char> raw(std::size_t{n} * dim);
    img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    require(static_cast<std::size_t>(img.gcount()) == raw.size(), ErrorCode::format,
            "truncated image payload in " + images_path.string());
    std::vector<unsigned char> raw_labels(n);
    lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(n));
    require(static_cast<std::size_t>(lab.gcount()) == n, ErrorCode::format,
            "truncated label payload in " + labels_path.string());

    Dataset d;
    d.height = rows;
    d.width = cols;
    d.num_classes = num_classes;
    d.pixels.resize(n, static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < raw.size(); ++i)
        d.pixels.data()[i] = static_cast<double>(raw[i]) / 127.5 - 1.0;
    d.ids.resize(n);
    std::iota(d.ids.begin(), d.ids.end(), ExampleId{0});
    d.sources.assign(n, Source::real);
    d.labels.emplace();
    d.labels->reserve(n);
    for (unsigned char y : raw_labels) {
        require(y < num_classes, ErrorCode::consistency, "label " + std::to_string(y) + " out of range in " +
                                                              labels_path.string());
        d.labels->push_back(y);
    }
    return d;
}

void write_idx(const Dataset& d, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
    require(d.has_labels(), ErrorCode::invalid_argument, "write_idx needs a labelled dataset");
    std::ofstream img(images_path, std::ios::binary);
    std::ofstream lab(labels_path, std::ios::binary);
    require(img.good() && lab.good(), ErrorCode::io, "cannot create IDX output files");
    write_be32(img, kImagesMagic);
    write_be32(img, static_cast<std::uint32_t>(d.size()));
    write_be32(img, static_cast<std::uint32_t>(d.height));
    write_be32(img, static_cast<std::uint32_t>(d.width));
    for (Eigen::Index i = 0; i < d.pixels.size(); ++i) {
        const double byte = std::round((d.pixels.data()[i] + 1.0) * 127.5);
        img.put(static_cast<char>(static_cast<unsigned char>(std::clamp(byte, 0.0, 255.0))));
    }
    write_be32(lab, kLabelsMagic);
    write_be32(lab, static_cast<std::uint32_t>(d.size()));
    for (int y : *d.labels) lab.put(static_cast<char>(y));
}

Dataset pad_to(const Dataset& d, std::size_t target) {
    require(target >= d.height && target >= d.width, ErrorCode::invalid_argument,
            "pad target smaller than image");
    if (target == d.height && target == d.width) return d;
    const std::size_t top = (target - d.height) / 2;
    const std::size_t left = (target - d.width) / 2;
    Dataset out = d;
    out.height = target;
    out.width = target;
    out.pixels = Matrix::Constant(static_cast<Eigen::Index>(d.size()),
                                  static_cast<Eigen::Index>(target * target), -1.0);
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t r = 0; r < d.height; ++r)
            out.pixels.row(static_cast<Eigen::Index>(i))
                .segment(static_cast<Eigen::Index>((top + r) * target + left), static_cast<Eigen::Index>(d.width)) =
                d.pixels.row(static_cast<Eigen::Index>(i))
                    .segment(static_cast<Eigen::Index>(r * d.width), static_cast<Eigen::Index>(d.width));
    return out;
}

Split stratified_split(const Dataset& d, const SplitSpec& spec) {
    require(d.has_labels(), ErrorCode::invalid_argument, "stratified_split needs labels");
    require(spec.count_per_class >= 0, ErrorCode::invalid_argument, "count_per_class must be >= 0");
    auto by_class = rows_by_class(d);
    const auto want = static_cast<std::size_t>(spec.count_per_class);

    std::vector<char> chosen(d.size(), 0);
    for (std::size_t k = 0; k < by_class.size(); ++k) {
        auto& rows = by_class[k];
        require(rows.size() >= want, ErrorCode::infeasible_split,
                "class " + std::to_string(k) + " has " + std::to_string(rows.size()) + " examples, " +
                    std::to_string(want) + " requested");
        Rng rng(derive_seed(spec.seed, "split", k));
        shuffle_prefix(rows, want, rng);
        for (std::size_t i = 0; i < want; ++i) chosen[rows[i]] = 1;
    }

    std::vector<std::size_t> lab_rows;
    std::vector<std::size_t> unl_rows;
    for (std::size_t i = 0; i < d.size(); ++i) (chosen[i] ? lab_rows : unl_rows).push_back(i);

    Split s;
    s.labelled = d.subset(lab_rows);
    Dataset unl = d.subset(unl_rows);
    for (std::size_t i = 0; i < unl.size(); ++i) s.shadow.emplace(unl.ids[i], (*unl.labels)[i]);
    s.unlabelled = unl.without_labels();
    return s;
}

std::pair<Dataset, Dataset> holdout_split(const Dataset& d, double fraction, std::uint64_t seed) {
    require(d.has_labels(), ErrorCode::invalid_argument, "holdout_split needs labels");
    require(fraction > 0.0 && fraction < 1.0, ErrorCode::invalid_argument, "hold-out fraction must be in (0, 1)");
    auto by_class = rows_by_class(d);
    std::vector<char> held(d.size(), 0);
    for (std::size_t k = 0; k < by_class.size(); ++k) {
        auto& rows = by_class[k];
        const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
        Rng rng(derive_seed(seed, "holdout", k));
        shuffle_prefix(rows, take, rng);
        for (std::size_t i = 0; i < take; ++i) held[rows[i]] = 1;
    }
    std::vector<std::size_t> keep_rows;
    std::vector<std::size_t> held_rows;
    for (std::size_t i = 0; i < d.size(); ++i) (held[i] ? held_rows : keep_rows).push_back(i);
    return {d.subset(keep_rows), d.subset(held_rows)};
}

Dataset random_subset(const Dataset& d, std::size_t n, std::uint64_t seed) {
    if (n >= d.size()) return d;
    std::vector<std::size_t> rows(d.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "subset"));
    shuffle_prefix(rows, n, rng);
    rows.resize(n);
    std::sort(rows.begin(), rows.end());
    return d.subset(rows);
}

Dataset synthetic_blobs(int n_per_class, int num_classes, double separation, std::uint64_t seed) {
    require(n_per_class >= 1, ErrorCode::invalid_argument, "n_per_class must be >= 1");
    require(num_classes >= 2, ErrorCode::invalid_argument, "need at least 2 classes");
    require(separation > 0.0, ErrorCode::invalid_argument, "separation must be positive");

    constexpr std::size_t side = 4;
    constexpr std::size_t dim = side * side;
    constexpr double sigma = 0.1;
    Rng rng(derive_seed(seed, "blobs"));

    // Orthogonal centres give pairwise distance exactly separation * sigma;
    // beyond dim classes fall back to random directions of the same norm.
    const double radius = separation * sigma / std::sqrt(2.0);
    Matrix centres = Matrix::Zero(num_classes, dim);
    for (int k = 0; k < num_classes; ++k) {
        if (static_cast<std::size_t>(k) < dim) {
            centres(k, k) = radius;
        } else {
            for (std::size_t j = 0; j < dim; ++j) centres(k, static_cast<Eigen::Index>(j)) = standard_normal(rng);
            centres.row(k) *= radius / centres.row(k).norm();
        }
    }

    Dataset d;
    d.height = side;
    d.width = side;
    d.num_classes = num_classes;
    const auto n = static_cast<std::size_t>(n_per_class) * static_cast<std::size_t>(num_classes);
    d.pixels.resize(static_cast<Eigen::Index>(n), dim);
    d.labels.emplace();
    for (std::size_t i = 0; i < n; ++i) {
        const int k = static_cast<int>(i % static_cast<std::size_t>(num_classes));
        for (std::size_t j = 0; j < dim; ++j) {
            const double v = centres(k, static_cast<Eigen::Index>(j)) + sigma * standard_normal(rng);
            d.pixels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::clamp(v, -1.0, 1.0);
        }
        d.ids.push_back(static_cast<ExampleId>(i));
        d.sources.push_back(Source::real);
        d.labels->push_back(k);
    }
    return d;
}

}  // namespace ssgan
