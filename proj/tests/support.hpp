#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "lsck/dataset.hpp"
#include "lsck/oracle.hpp"

namespace testing {

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("lsck_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Rows of coordinates with optional labels; texts are "t<i>".
inline ckm::EmbeddedDataset make_dataset(const std::vector<std::vector<double>>& rows, std::vector<int> labels = {}) {
    std::vector<double> flat;
    std::vector<ckm::TextRecord> recs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        flat.insert(flat.end(), rows[i].begin(), rows[i].end());
        ckm::TextRecord r;
        r.id = i;
        r.text = "t" + std::to_string(i);
        if (!labels.empty()) r.label = labels[i];
        recs.push_back(r);
    }
    return ckm::EmbeddedDataset(rows.empty() ? 1 : rows[0].size(), flat, recs);
}

inline ckm::EmbeddedDataset line(const std::vector<double>& xs, std::vector<int> labels = {}) {
    std::vector<std::vector<double>> rows;
    for (double x : xs) rows.push_back({x});
    return make_dataset(rows, std::move(labels));
}

/// Oracle whose answers come from test callbacks.
class ScriptedOracle final : public ckm::Oracle {
public:
    std::function<ckm::MLGroupResponse(const ckm::MLGroupQuery&, std::uint32_t)> ml;
    std::function<ckm::CLMembershipResponse(const ckm::CLMembershipQuery&)> cl;

protected:
    ckm::MLGroupResponse ask_ml(const ckm::MLGroupQuery& q, std::uint32_t repeat, Exchange&) override {
        return ml(q, repeat);
    }
    ckm::CLMembershipResponse ask_cl(const ckm::CLMembershipQuery& q, Exchange&) override { return cl(q); }
};

inline std::vector<int> random_labels(std::mt19937_64& g, std::size_t n, int classes) {
    std::uniform_int_distribution<int> d(0, classes - 1);
    std::vector<int> v(n);
    for (auto& x : v) x = d(g);
    return v;
}

}  // namespace testing
