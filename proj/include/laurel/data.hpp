#pragma once

// Synthetic dataset generators and an IDX-format loader/writer.
// All generators are pure functions of their arguments, seed included.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "laurel/tensor.hpp"

namespace laurel {

struct Dataset {
    Tensor features;          // [n x d]
    std::vector<int> labels;  // values in [0, num_classes)
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.shape[1]; }
};

// `center_seed` fixes the class centers independently of the point draw, so
// train and eval splits generated with distinct `seed`s sample the same
// mixture.
inline Dataset gen_gaussian_mixture(std::size_t num_classes, std::size_t dim,
                                    std::size_t n_per_class, double spread, std::uint64_t seed,
                                    std::uint64_t center_seed = 42) {
    if (num_classes < 2 || dim < 2 || n_per_class < 1)
        throw std::invalid_argument("gen_gaussian_mixture: need num_classes >= 2, dim >= 2, "
                                    "n_per_class >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // class centers uniform on the unit sphere
    std::mt19937_64 center_rng(center_seed);
    std::vector<std::vector<double>> centers(num_classes, std::vector<double>(dim));
    for (auto& c : centers) {
        double norm2 = 0.0;
        for (double& x : c) {
            x = gauss(center_rng);
            norm2 += x * x;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : c) x *= inv;
    }
    const std::size_t n = num_classes * n_per_class;
    Dataset ds;
    ds.num_classes = num_classes;
    ds.features = Tensor::zeros({n, dim});
    ds.labels.resize(n);
    std::size_t row = 0;
    for (std::size_t c = 0; c < num_classes; ++c)
        for (std::size_t k = 0; k < n_per_class; ++k, ++row) {
            for (std::size_t j = 0; j < dim; ++j)
                ds.features.data[row * dim + j] = centers[c][j] + spread * gauss(rng);
            ds.labels[row] = static_cast<int>(c);
        }
    return ds;
}

inline Dataset gen_spirals(std::size_t num_classes, std::size_t n_per_class, double noise,
                           std::uint64_t seed) {
    if (num_classes < 2 || n_per_class < 1)
        throw std::invalid_argument("gen_spirals: need num_classes >= 2, n_per_class >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t n = num_classes * n_per_class;
    Dataset ds;
    ds.num_classes = num_classes;
    ds.features = Tensor::zeros({n, 2});
    ds.labels.resize(n);
    const double pi = 3.14159265358979323846;
    std::size_t row = 0;
    for (std::size_t c = 0; c < num_classes; ++c)
        for (std::size_t k = 0; k < n_per_class; ++k, ++row) {
            // radius grows linearly along the arm; arms are evenly rotated
            const double t = static_cast<double>(k) / static_cast<double>(n_per_class);
            const double radius = t;
            const double angle = 2.0 * pi * (1.5 * t + static_cast<double>(c) /
                                                            static_cast<double>(num_classes));
            ds.features.data[row * 2 + 0] = radius * std::cos(angle) + noise * gauss(rng);
            ds.features.data[row * 2 + 1] = radius * std::sin(angle) + noise * gauss(rng);
            ds.labels[row] = static_cast<int>(c);
        }
    return ds;
}

// ---------------------------------------------------------------------------
// IDX format: big-endian; images magic 0x00000803 with dims [n, rows, cols],
// labels magic 0x00000801 with [n]. Pixels are unsigned bytes scaled to
// [0, 1] by division by 255.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("idx: truncated header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path);
    const std::uint32_t img_magic = detail::read_be32(img, images_path);
    if (img_magic != kIdxImagesMagic)
        throw std::runtime_error("idx: bad magic in " + images_path + ": got 0x" +
                                 [&] {
                                     char buf[16];
                                     std::snprintf(buf, sizeof(buf), "%08x", img_magic);
                                     return std::string(buf);
                                 }() +
                                 ", expected 0x00000803");
    const std::size_t n = detail::read_be32(img, images_path);
    const std::size_t rows = detail::read_be32(img, images_path);
    const std::size_t cols = detail::read_be32(img, images_path);
    const std::size_t pixels = n * rows * cols;
    std::vector<unsigned char> raw(pixels);
    img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels));
    const std::size_t got = static_cast<std::size_t>(img.gcount());
    if (got != pixels)
        throw std::runtime_error("idx: truncated payload in " + images_path + ": expected " +
                                 std::to_string(pixels) + " bytes, got " + std::to_string(got));

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);
    const std::uint32_t lab_magic = detail::read_be32(lab, labels_path);
    if (lab_magic != kIdxLabelsMagic)
        throw std::runtime_error("idx: bad magic in " + labels_path + ": got 0x" +
                                 [&] {
                                     char buf[16];
                                     std::snprintf(buf, sizeof(buf), "%08x", lab_magic);
                                     return std::string(buf);
                                 }() +
                                 ", expected 0x00000801");
    const std::size_t n_lab = detail::read_be32(lab, labels_path);
    if (n_lab != n)
        throw std::runtime_error("idx: item count mismatch: " + std::to_string(n) +
                                 " images vs " + std::to_string(n_lab) + " labels");
    std::vector<unsigned char> lab_raw(n_lab);
    lab.read(reinterpret_cast<char*>(lab_raw.data()), static_cast<std::streamsize>(n_lab));
    if (static_cast<std::size_t>(lab.gcount()) != n_lab)
        throw std::runtime_error("idx: truncated payload in " + labels_path + ": expected " +
                                 std::to_string(n_lab) + " bytes, got " +
                                 std::to_string(lab.gcount()));

    Dataset ds;
    ds.features = Tensor::zeros({n, rows * cols});
    for (std::size_t i = 0; i < pixels; ++i)
        ds.features.data[i] = static_cast<double>(raw[i]) / 255.0;
    ds.labels.resize(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = static_cast<int>(lab_raw[i]);
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = static_cast<std::size_t>(max_label) + 1;
    return ds;
}

// Inverse of load_idx for datasets whose features are exact multiples of
// 1/255 (e.g. anything load_idx produced).
inline void save_idx(const Dataset& ds, const std::string& images_path,
                     const std::string& labels_path, std::size_t rows, std::size_t cols) {
    if (rows * cols != ds.dim())
        throw std::invalid_argument("save_idx: rows*cols != feature dim");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path + " for writing");
    detail::write_be32(img, kIdxImagesMagic);
    detail::write_be32(img, static_cast<std::uint32_t>(ds.size()));
    detail::write_be32(img, static_cast<std::uint32_t>(rows));
    detail::write_be32(img, static_cast<std::uint32_t>(cols));
    for (double v : ds.features.data) {
        const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
        img.write(reinterpret_cast<const char*>(&b), 1);
    }
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path + " for writing");
    detail::write_be32(lab, kIdxLabelsMagic);
    detail::write_be32(lab, static_cast<std::uint32_t>(ds.size()));
    for (int y : ds.labels) {
        const unsigned char b = static_cast<unsigned char>(y);
        lab.write(reinterpret_cast<const char*>(&b), 1);
    }
}

// ---------------------------------------------------------------------------
// Batching: seeded Fisher-Yates shuffle per epoch; the final partial batch
// is kept.
// ---------------------------------------------------------------------------

struct Batch {
    Tensor features;
    std::vector<int> labels;
};

inline std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size,
                                  std::uint64_t epoch_seed) {
    if (batch_size < 1) throw std::invalid_argument("batches: batch_size must be >= 1");
    const std::size_t n = ds.size(), d = ds.dim();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(epoch_seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }
    std::vector<Batch> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(start + batch_size, n);
        Batch b;
        b.features = Tensor::zeros({end - start, d});
        b.labels.resize(end - start);
        for (std::size_t i = start; i < end; ++i) {
            const std::size_t src = order[i];
            for (std::size_t j = 0; j < d; ++j)
                b.features.data[(i - start) * d + j] = ds.features.data[src * d + j];
            b.labels[i - start] = ds.labels[src];
        }
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace laurel
