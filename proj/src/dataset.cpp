#include "lsck/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "lsck/error.hpp"
#include "lsck/rng.hpp"

namespace ckm {

namespace {

constexpr std::array<char, 4> kMagic = {'E', 'M', 'B', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<unsigned char, 4> b = {
        static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) return false;
    v = std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
        std::uint32_t{b[3]} << 24;
    return true;
}

}  // namespace

EmbeddedDataset::EmbeddedDataset(std::size_t dim, std::vector<double> points,
                                 std::vector<TextRecord> records)
    : dim_(dim), points_(std::move(points)), records_(std::move(records)) {
    if (records_.empty()) throw Error("dataset: n >= 1 violated (empty corpus)");
    if (dim_ == 0) throw Error("dataset: dimension must be >= 1");
    if (points_.size() != records_.size() * dim_)
        throw Error("dataset: count mismatch between records (" + std::to_string(records_.size()) +
                    ") and embedding rows (" + std::to_string(points_.size() / dim_) + ")");
    for (double v : points_)
        if (!std::isfinite(v)) throw Error("dataset: non-finite embedding value");
    const bool labeled = records_.front().label.has_value();
    for (Index i = 0; i < records_.size(); ++i) {
        if (records_[i].id != i)
            throw Error("dataset: record ids must be dense 0..n-1 in order (got id " +
                        std::to_string(records_[i].id) + " at line " + std::to_string(i) + ")");
        if (records_[i].label.has_value() != labeled)
            throw Error("dataset: labels must be present on all records or none");
    }
}

Index EmbeddedDataset::point_of(Index record_id) const {
    if (record_id >= size()) throw Error("dataset: record id out of range");
    return record_id;
}

std::vector<int> EmbeddedDataset::labels() const {
    if (!has_labels()) throw Error("dataset: no ground-truth labels");
    std::vector<int> out;
    out.reserve(size());
    for (const auto& r : records_) out.push_back(*r.label);
    return out;
}

std::vector<double> read_embeddings(const std::filesystem::path& path, std::size_t& n,
                                    std::size_t& dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("embeddings: cannot open " + path.string());
    std::array<char, 4> magic{};
    std::uint32_t n32 = 0, d32 = 0;
    if (!in.read(magic.data(), 4) || magic != kMagic || !get_u32(in, n32) || !get_u32(in, d32))
        throw Error("embeddings: malformed header in " + path.string());
    n = n32;
    dim = d32;
    std::vector<double> values(n * dim);
    for (auto& v : values) {
        std::uint32_t bits = 0;
        if (!get_u32(in, bits)) throw Error("embeddings: truncated payload in " + path.string());
        v = static_cast<double>(std::bit_cast<float>(bits));
        if (!std::isfinite(v)) throw Error("embeddings: non-finite value in " + path.string());
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw Error("embeddings: trailing bytes in " + path.string());
    return values;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddedDataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("embeddings: cannot write " + path.string());
    out.write(kMagic.data(), 4);
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    put_u32(out, static_cast<std::uint32_t>(data.dim()));
    for (double v : data.points()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::vector<TextRecord> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("corpus: cannot open " + path.string());
    std::vector<TextRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            TextRecord r;
            r.id = j.at("id").get<Index>();
            r.text = j.at("text").get<std::string>();
            if (j.contains("label") && !j.at("label").is_null()) r.label = j.at("label").get<int>();
            records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw Error("corpus: line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

void write_corpus(const std::filesystem::path& path, const std::vector<TextRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error("corpus: cannot write " + path.string());
    for (const auto& r : records) {
        nlohmann::json j = {{"id", r.id}, {"text", r.text}};
        j["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr);
        out << j.dump() << '\n';
    }
}

EmbeddedDataset load_dataset(const std::filesystem::path& corpus_path,
                             const std::filesystem::path& embedding_path) {
    auto records = read_corpus(corpus_path);
    if (records.empty()) throw Error("dataset: n >= 1 violated (empty corpus)");
    std::size_t n = 0, dim = 0;
    auto points = read_embeddings(embedding_path, n, dim);
    if (n != records.size())
        throw Error("dataset: count mismatch: corpus has " + std::to_string(records.size()) +
                    " records, embeddings have " + std::to_string(n) + " rows");
    return EmbeddedDataset(dim, std::move(points), std::move(records));
}

EmbeddedDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.k_true < 2) throw Error("synthetic: k_true must be >= 2");
    if (!(spec.separation > 0)) throw Error("synthetic: separation must be > 0");
    if (spec.n == 0 || spec.dim == 0) throw Error("synthetic: n and dim must be >= 1");

    Rng rng(spec.seed);
    const auto k = static_cast<std::size_t>(spec.k_true);
    const std::size_t dim = spec.dim;

    std::vector<double> centers(k * dim, 0.0);
    if (k <= dim) {
        // Regular simplex: every pair of centers exactly `separation` apart.
        for (std::size_t c = 0; c < k; ++c) centers[c * dim + c] = spec.separation / std::sqrt(2.0);
    } else {
        // Rejection sampling in a cube just large enough to fit k centers,
        // grown slowly if the packing gets stuck.
        double side = spec.separation * std::pow(static_cast<double>(k), 1.0 / static_cast<double>(dim));
        const double min_sq = spec.separation * spec.separation;
        std::vector<double> candidate(dim);
        std::size_t placed = 0;
        int rejections = 0;
        while (placed < k) {
            for (auto& c : candidate) c = rng.uniform01() * side;
            bool ok = true;
            for (std::size_t c = 0; ok && c < placed; ++c) {
                double d = 0;
                for (std::size_t j = 0; j < dim; ++j) {
                    const double t = centers[c * dim + j] - candidate[j];
                    d += t * t;
                }
                ok = d >= min_sq;
            }
            if (ok) {
                std::copy(candidate.begin(), candidate.end(), centers.begin() + static_cast<std::ptrdiff_t>(placed * dim));
                ++placed;
                rejections = 0;
            } else if (++rejections == 1000) {
                side *= 1.1;
                rejections = 0;
            }
        }
    }

    // Balanced labels in shuffled order.
    std::vector<int> labels(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) labels[i] = static_cast<int>(i % k);
    for (std::size_t i = spec.n; i > 1; --i) std::swap(labels[i - 1], labels[rng.uniform_index(i)]);

    std::vector<double> points(spec.n * dim);
    std::vector<TextRecord> records(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const auto label = static_cast<std::size_t>(labels[i]);
        for (std::size_t j = 0; j < dim; ++j)
            // Round through f32 so the in-memory data equals what the binary format stores.
            points[i * dim + j] =
                static_cast<double>(static_cast<float>(centers[label * dim + j] + rng.normal()));
        records[i] = {i, "topic " + std::to_string(label) + " item " + std::to_string(i), labels[i]};
    }
    return EmbeddedDataset(dim, std::move(points), std::move(records));
}

}  // namespace ckm
