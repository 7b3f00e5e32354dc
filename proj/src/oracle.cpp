#include "lsck/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "lsck/error.hpp"
#include "lsck/rng.hpp"

namespace ckm {

namespace {

using Clock = std::chrono::steady_clock;

void validate(const MLGroupQuery& q) {
    if (q.ids.size() < 2) throw Error("ml query: need at least 2 texts");
    if (q.texts.size() != q.ids.size()) throw Error("ml query: ids/texts size mismatch");
    std::unordered_set<Index> seen(q.ids.begin(), q.ids.end());
    if (seen.size() != q.ids.size()) throw Error("ml query: duplicate text id");
}

void validate(const CLMembershipQuery& q) {
    if (q.set_ids.empty()) throw Error("cl query: empty set");
    if (q.set_texts.size() != q.set_ids.size()) throw Error("cl query: ids/texts size mismatch");
    if (std::find(q.set_ids.begin(), q.set_ids.end(), q.candidate_id) != q.set_ids.end())
        throw Error("cl query: candidate already in set");
}

void validate(const MLGroupResponse& r, std::size_t m) {
    std::vector<int> hits(m, 0);
    for (const auto& g : r.groups) {
        if (g.empty()) throw Error("ml response: empty group");
        for (auto i : g) {
            if (i >= m) throw Error("ml response: index out of range");
            ++hits[i];
        }
    }
    if (std::any_of(hits.begin(), hits.end(), [](int h) { return h != 1; }))
        throw Error("ml response: groups do not cover every text exactly once");
}

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

MLGroupResponse MLGroupResponse::canonical() const {
    MLGroupResponse out{groups};
    for (auto& g : out.groups) std::sort(g.begin(), g.end());
    std::sort(out.groups.begin(), out.groups.end());
    return out;
}

bool MLGroupResponse::same_partition(const MLGroupResponse& other) const {
    return canonical().groups == other.canonical().groups;
}

MLGroupQuery make_ml_query(const EmbeddedDataset& data, std::span<const Index> members) {
    MLGroupQuery q;
    for (Index i : members) {
        q.ids.push_back(data.record(i).id);
        q.texts.push_back(data.text_of(i));
    }
    return q;
}

CLMembershipQuery make_cl_query(const EmbeddedDataset& data, std::span<const Index> set, Index candidate) {
    CLMembershipQuery q;
    for (Index i : set) {
        q.set_ids.push_back(data.record(i).id);
        q.set_texts.push_back(data.text_of(i));
    }
    q.candidate_id = data.record(candidate).id;
    q.candidate_text = data.text_of(candidate);
    return q;
}

void QueryLedger::record(TranscriptEntry entry) {
    if (entry.kind == "ml")
        ml_.fetch_add(1);
    else if (entry.kind == "cl")
        cl_.fetch_add(1);
    else
        consistency_.fetch_add(1);
    if (keep_transcript_) {
        std::lock_guard lock(mu_);
        transcript_.push_back(std::move(entry));
    }
}

LedgerTotals QueryLedger::totals() const { return {ml_.load(), cl_.load(), consistency_.load()}; }

std::vector<TranscriptEntry> QueryLedger::transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
}

void QueryLedger::write_transcript(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("transcript: cannot write " + path.string());
    std::lock_guard lock(mu_);
    for (const auto& e : transcript_) {
        nlohmann::json j = {{"kind", e.kind},
                            {"request", e.request},
                            {"response", e.response},
                            {"latency_ms", e.latency_ms}};
        out << j.dump() << '\n';
    }
}

MLGroupResponse Oracle::run_ml(const MLGroupQuery& q, std::uint32_t repeat, const char* kind) {
    Exchange ex;
    const auto start = Clock::now();
    auto response = ask_ml(q, repeat, ex);
    validate(response, q.ids.size());
    ledger_.record({kind, std::move(ex.request), std::move(ex.response), elapsed_ms(start)});
    return response;
}

MLGroupResponse Oracle::query_ml_group(const MLGroupQuery& q) {
    validate(q);
    return run_ml(q, 0, "ml");
}

CLMembershipResponse Oracle::query_cl_membership(const CLMembershipQuery& q) {
    validate(q);
    Exchange ex;
    const auto start = Clock::now();
    auto response = ask_cl(q, ex);
    if (response.match && *response.match >= q.set_ids.size())
        throw Error("cl response: matched index out of range");
    ledger_.record({"cl", std::move(ex.request), std::move(ex.response), elapsed_ms(start)});
    return response;
}

bool Oracle::consistency_repeat(const MLGroupQuery& q, int alpha) {
    if (alpha < 1) throw Error("consistency_repeat: alpha must be >= 1");
    validate(q);
    const auto first = run_ml(q, 1, "consistency").canonical();
    bool consistent = true;
    for (int r = 2; r <= alpha; ++r)
        if (!run_ml(q, static_cast<std::uint32_t>(r), "consistency").same_partition(first))
            consistent = false;
    return consistent;
}

SimOracle::SimOracle(std::vector<int> labels, SimOracleConfig config)
    : labels_(std::move(labels)), config_(config) {
    if (!(config_.error_rate >= 0.0 && config_.error_rate <= 1.0))
        throw Error("sim oracle: error_rate must lie in [0, 1]");
}

int SimOracle::label_of(Index id) const {
    if (id >= labels_.size()) throw Error("sim oracle: text id without a label");
    return labels_[id];
}

bool SimOracle::flipped(std::uint64_t content, std::uint64_t salt, Index a, Index b) const {
    if (config_.error_rate <= 0.0) return false;
    if (a > b) std::swap(a, b);
    std::uint64_t h = hash_combine(mix64(config_.seed), content);
    h = hash_combine(h, salt);
    h = hash_combine(h, a);
    h = hash_combine(h, b);
    return hash_to_unit(h) < config_.error_rate;
}

MLGroupResponse SimOracle::ask_ml(const MLGroupQuery& q, std::uint32_t repeat, Exchange& ex) {
    const std::size_t m = q.ids.size();
    std::uint64_t content = 0x4d4cULL;
    for (Index id : q.ids) content = hash_combine(content, id);

    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
            const bool same = label_of(q.ids[a]) == label_of(q.ids[b]);
            if (same != flipped(content, repeat, q.ids[a], q.ids[b])) {
                const auto ra = find(a), rb = find(b);
                if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }

    MLGroupResponse out;
    std::vector<std::size_t> slot(m, SIZE_MAX);
    for (std::size_t i = 0; i < m; ++i) {
        const auto root = find(i);
        if (slot[root] == SIZE_MAX) {
            slot[root] = out.groups.size();
            out.groups.emplace_back();
        }
        out.groups[slot[root]].push_back(i);
    }
    ex.request = {{"ids", q.ids}, {"repeat", repeat}};
    ex.response = {{"groups", out.groups}};
    return out;
}

CLMembershipResponse SimOracle::ask_cl(const CLMembershipQuery& q, Exchange& ex) {
    std::uint64_t content = 0x434cULL;
    for (Index id : q.set_ids) content = hash_combine(content, id);
    content = hash_combine(content, q.candidate_id);

    CLMembershipResponse out;
    const int candidate = label_of(q.candidate_id);
    for (std::size_t i = 0; i < q.set_ids.size() && !out.match; ++i) {
        const bool same = label_of(q.set_ids[i]) == candidate;
        if (same != flipped(content, 0, q.set_ids[i], q.candidate_id)) out.match = i;
    }
    ex.request = {{"set", q.set_ids}, {"candidate", q.candidate_id}};
    ex.response = out.match ? nlohmann::json{{"match", *out.match}} : nlohmann::json{{"match", nullptr}};
    return out;
}

}  // namespace ckm
