#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsck/dataset.hpp"

namespace ckm {

/// Candidate texts to be grouped by topic. ids are dataset record ids.
struct MLGroupQuery {
    std::vector<Index> ids;
    std::vector<std::string> texts;
};

/// Partition of query positions [0, m) into topic groups.
struct MLGroupResponse {
    std::vector<std::vector<std::size_t>> groups;

    /// Groups sorted internally and ordered by smallest member, so equal
    /// partitions compare equal regardless of output order.
    MLGroupResponse canonical() const;
    bool same_partition(const MLGroupResponse& other) const;
};

struct CLMembershipQuery {
    std::vector<Index> set_ids;
    std::vector<std::string> set_texts;
    Index candidate_id = 0;
    std::string candidate_text;
};

/// nullopt = candidate shares a topic with no member ("NONE").
struct CLMembershipResponse {
    std::optional<std::size_t> match;
    bool operator==(const CLMembershipResponse&) const = default;
};

MLGroupQuery make_ml_query(const EmbeddedDataset& data, std::span<const Index> members);
CLMembershipQuery make_cl_query(const EmbeddedDataset& data, std::span<const Index> set, Index candidate);

struct LedgerTotals {
    std::uint64_t ml_queries = 0;
    std::uint64_t cl_queries = 0;
    std::uint64_t consistency_queries = 0;
    std::uint64_t total() const { return ml_queries + cl_queries + consistency_queries; }
};

struct TranscriptEntry {
    std::string kind;  // "ml", "cl" or "consistency"
    nlohmann::json request;
    nlohmann::json response;
    double latency_ms = 0.0;
};

/// Query counters plus an optional transcript. Thread-safe.
class QueryLedger {
public:
    explicit QueryLedger(bool keep_transcript = true) : keep_transcript_(keep_transcript) {}

    void record(TranscriptEntry entry);
    LedgerTotals totals() const;
    std::vector<TranscriptEntry> transcript() const;
    void write_transcript(const std::filesystem::path& path) const;

private:
    bool keep_transcript_;
    std::atomic<std::uint64_t> ml_{0};
    std::atomic<std::uint64_t> cl_{0};
    std::atomic<std::uint64_t> consistency_{0};
    mutable std::mutex mu_;
    std::vector<TranscriptEntry> transcript_;
};

/// Source of same-topic decisions. The public entry points validate, count
/// and log every query; backends implement the ask_* hooks.
class Oracle {
public:
    virtual ~Oracle() = default;

    MLGroupResponse query_ml_group(const MLGroupQuery& q);
    CLMembershipResponse query_cl_membership(const CLMembershipQuery& q);
    /// True iff alpha independent repeats of q all return the same partition.
    bool consistency_repeat(const MLGroupQuery& q, int alpha);

    QueryLedger& ledger() { return ledger_; }
    const QueryLedger& ledger() const { return ledger_; }

protected:
    /// Raw payloads of one exchange, filled by the backend for the transcript.
    struct Exchange {
        nlohmann::json request;
        nlohmann::json response;
    };

    /// repeat = 0 for ordinary queries, 1..alpha for consistency repeats.
    virtual MLGroupResponse ask_ml(const MLGroupQuery& q, std::uint32_t repeat, Exchange& ex) = 0;
    virtual CLMembershipResponse ask_cl(const CLMembershipQuery& q, Exchange& ex) = 0;

private:
    MLGroupResponse run_ml(const MLGroupQuery& q, std::uint32_t repeat, const char* kind);

    QueryLedger ledger_;
};

struct SimOracleConfig {
    /// Probability that each elementary same/different decision is flipped.
    double error_rate = 0.0;
    std::uint64_t seed = 0;
};

/// Label-driven oracle. Each unordered pair decision inside a query flips
/// with probability error_rate; ML groups are the transitive closure of the
/// resulting "same" verdicts. All randomness is a hash of (seed, query
/// content, repeat), so replays are identical.
class SimOracle final : public Oracle {
public:
    SimOracle(std::vector<int> labels, SimOracleConfig config);

    const SimOracleConfig& config() const { return config_; }

protected:
    MLGroupResponse ask_ml(const MLGroupQuery& q, std::uint32_t repeat, Exchange& ex) override;
    CLMembershipResponse ask_cl(const CLMembershipQuery& q, Exchange& ex) override;

private:
    int label_of(Index id) const;
    bool flipped(std::uint64_t content, std::uint64_t salt, Index a, Index b) const;

    std::vector<int> labels_;
    SimOracleConfig config_;
};

struct RemoteOracleConfig {
    std::string url;      // full chat-completions endpoint, http:// or https://
    std::string api_key;  // sent as a bearer token when non-empty
    std::string model = "gpt-4o-mini";
    double temperature = 0.7;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
    std::chrono::seconds timeout{60};
    int max_in_flight = 4;

    /// url and api_key from ORACLE_API_URL / ORACLE_API_KEY.
    static RemoteOracleConfig from_env(std::string model);
};

/// Prompt rendering and strict reply parsing for the chat backend.
namespace prompt {
std::string render_ml(const MLGroupQuery& q);
std::string render_cl(const CLMembershipQuery& q);
/// Lines "GROUP: i, j, k" with 1-based indices covering 1..m exactly once.
std::optional<MLGroupResponse> parse_ml(const std::string& reply, std::size_t m);
/// "NONE" or "MATCH: i" with a 1-based index into the set.
std::optional<CLMembershipResponse> parse_cl(const std::string& reply, std::size_t set_size);
}  // namespace prompt

/// Chat-completion client. Retries transport and parse failures with
/// exponential backoff, then fails with the last raw payload.
class RemoteOracle final : public Oracle {
public:
    explicit RemoteOracle(RemoteOracleConfig config);
    ~RemoteOracle() override;

protected:
    MLGroupResponse ask_ml(const MLGroupQuery& q, std::uint32_t repeat, Exchange& ex) override;
    CLMembershipResponse ask_cl(const CLMembershipQuery& q, Exchange& ex) override;

private:
    template <typename Parse>
    auto complete(const std::string& prompt, Exchange& ex, Parse parse) -> typename decltype(parse(std::string{}))::value_type;
    std::string post(const nlohmann::json& body, std::uint64_t correlation_id);

    RemoteOracleConfig config_;
    std::string scheme_host_port_;
    std::string path_;
    std::counting_semaphore<1024> in_flight_;
    std::atomic<std::uint64_t> next_id_{1};
};

}  // namespace ckm
