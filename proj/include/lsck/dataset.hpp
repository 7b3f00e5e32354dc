#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ckm {

using Index = std::size_t;

struct TextRecord {
    Index id = 0;
    std::string text;
    std::optional<int> label;
};

/// n points in a dim-dimensional embedding space, row-aligned with their
/// text records. Row i is the point of records[i]; that alignment is the
/// text/point mapping in both directions.
class EmbeddedDataset {
public:
    EmbeddedDataset() = default;
    EmbeddedDataset(std::size_t dim, std::vector<double> points, std::vector<TextRecord> records);

    std::size_t size() const { return records_.size(); }
    std::size_t dim() const { return dim_; }

    std::span<const double> point(Index i) const { return {points_.data() + i * dim_, dim_}; }
    const TextRecord& record(Index i) const { return records_[i]; }
    const std::vector<TextRecord>& records() const { return records_; }
    const std::vector<double>& points() const { return points_; }

    /// Text of point i.
    const std::string& text_of(Index i) const { return records_[i].text; }
    /// Point index of a record id (ids are dense, so this is the identity).
    Index point_of(Index record_id) const;

    bool has_labels() const { return !records_.empty() && records_.front().label.has_value(); }
    /// Ground-truth labels; throws if the dataset is unlabeled.
    std::vector<int> labels() const;

private:
    std::size_t dim_ = 0;
    std::vector<double> points_;
    std::vector<TextRecord> records_;
};

struct SyntheticSpec {
    int k_true = 2;
    std::size_t n = 10;
    std::size_t dim = 2;
    /// Minimum distance between blob centers, in component standard deviations.
    double separation = 10.0;
    std::uint64_t seed = 0;
};

// Embedding file: "EMB1", u32 n, u32 dim, n*dim f32, all little-endian.
std::vector<double> read_embeddings(const std::filesystem::path& path, std::size_t& n, std::size_t& dim);
void write_embeddings(const std::filesystem::path& path, const EmbeddedDataset& data);

std::vector<TextRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<TextRecord>& records);

EmbeddedDataset load_dataset(const std::filesystem::path& corpus_path,
                             const std::filesystem::path& embedding_path);

/// Isotropic unit-variance Gaussian blobs, labels = blob id.
EmbeddedDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace ckm
