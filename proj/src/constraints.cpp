#include "lsck/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <set>

#include "lsck/error.hpp"
#include "lsck/rng.hpp"

namespace ckm {

std::size_t ConstraintCollection::constrained_count() const {
    std::set<Index> seen;
    for (const auto& s : ml_sets) seen.insert(s.members.begin(), s.members.end());
    for (const auto& s : cl_sets) seen.insert(s.members.begin(), s.members.end());
    return seen.size();
}

double set_diameter(const EmbeddedDataset& data, std::span<const Index> members) {
    double d = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b)
            d = std::max(d, sq_dist(data.point(members[a]), data.point(members[b])));
    return std::sqrt(d);
}

namespace {

struct Chunk {
    std::size_t level;
    std::vector<Index> members;
};

// Drops sets contained in another set (and exact duplicates).
void drop_subsets(std::vector<MLSet>& sets) {
    std::vector<char> drop(sets.size(), 0);
    for (std::size_t a = 0; a < sets.size(); ++a)
        for (std::size_t b = 0; b < sets.size() && !drop[a]; ++b) {
            if (a == b || drop[b]) continue;
            const auto& x = sets[a].members;
            const auto& y = sets[b].members;
            if (x.size() > y.size() || (x.size() == y.size() && a < b)) continue;
            drop[a] = std::includes(y.begin(), y.end(), x.begin(), x.end());
        }
    std::size_t w = 0;
    for (std::size_t i = 0; i < sets.size(); ++i)
        if (!drop[i]) {
            if (w != i) sets[w] = std::move(sets[i]);
            ++w;
        }
    sets.resize(w);
}

}  // namespace

std::vector<MLSet> generate_ml_sets(const EmbeddedDataset& data, Oracle& oracle, const GridPartition& grid,
                                    std::size_t m_max, unsigned workers) {
    if (m_max < 2) throw Error("generate_ml_sets: m_max must be >= 2");
    std::vector<Chunk> chunks;
    for (const auto& [key, members] : grid.cells) {
        for (std::size_t start = 0; start < members.size(); start += m_max) {
            const std::size_t end = std::min(members.size(), start + m_max);
            if (end - start < 2) continue;
            chunks.push_back({key.level, {members.begin() + static_cast<std::ptrdiff_t>(start),
                                          members.begin() + static_cast<std::ptrdiff_t>(end)}});
        }
    }

    std::vector<MLGroupResponse> responses(chunks.size());
    auto ask = [&](std::size_t i) {
        responses[i] = oracle.query_ml_group(make_ml_query(data, chunks[i].members));
    };
    if (workers <= 1) {
        for (std::size_t i = 0; i < chunks.size(); ++i) ask(i);
    } else {
        for (std::size_t base = 0; base < chunks.size(); base += workers) {
            std::vector<std::future<void>> window;
            for (std::size_t i = base; i < std::min(chunks.size(), base + workers); ++i)
                window.push_back(std::async(std::launch::async, ask, i));
            for (auto& f : window) f.get();
        }
    }

    std::vector<MLSet> out;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        for (const auto& group : responses[i].groups) {
            if (group.size() < 2) continue;
            MLSet s;
            for (auto pos : group) s.members.push_back(chunks[i].members[pos]);
            std::sort(s.members.begin(), s.members.end());
            s.diameter = set_diameter(data, s.members);
            s.level = chunks[i].level;
            s.query = i;
            out.push_back(std::move(s));
        }
    }
    drop_subsets(out);
    return out;
}

ThresholdSearch binary_search_threshold(std::span<const double> ascending,
                                        const std::function<bool(double)>& probe) {
    ThresholdSearch out;
    std::ptrdiff_t lo = 0, hi = static_cast<std::ptrdiff_t>(ascending.size()) - 1, best = -1;
    while (lo <= hi) {
        const auto mid = lo + (hi - lo) / 2;
        ++out.probes;
        if (probe(ascending[static_cast<std::size_t>(mid)])) {
            best = mid;
            lo = mid + 1;
        } else {
            hi = mid - 1;
        }
    }
    if (best >= 0) out.value = ascending[static_cast<std::size_t>(best)];
    return out;
}

ThresholdResult compute_hard_thresholds(const EmbeddedDataset& data, Oracle& oracle,
                                        std::span<const MLSet> candidates, int alpha_pair, int alpha_set) {
    auto search = [&](bool pairs, int alpha) {
        std::vector<double> diameters;
        for (const auto& s : candidates)
            if ((s.members.size() == 2) == pairs) diameters.push_back(s.diameter);
        std::sort(diameters.begin(), diameters.end());
        diameters.erase(std::unique(diameters.begin(), diameters.end()), diameters.end());
        return binary_search_threshold(diameters, [&](double psi) {
            const auto it = std::find_if(candidates.begin(), candidates.end(), [&](const MLSet& s) {
                return (s.members.size() == 2) == pairs && s.diameter == psi;
            });
            return oracle.consistency_repeat(make_ml_query(data, it->members), alpha);
        });
    };
    const auto pair = search(true, alpha_pair);
    const auto set = search(false, alpha_set);
    return {pair.value, set.value, pair.probes, set.probes};
}

void classify_hard_soft(std::span<MLSet> sets, const ThresholdResult& thresholds) {
    for (auto& s : sets)
        s.hard = s.diameter <= (s.members.size() == 2 ? thresholds.psi_pair : thresholds.psi_set);
}

std::vector<CLSet> generate_cl_sets(const EmbeddedDataset& data, Oracle& oracle, double radius, std::size_t k,
                                    std::uint64_t seed) {
    if (k < 2) throw Error("generate_cl_sets: k must be >= 2");
    const std::size_t n = data.size();
    Rng rng(seed);
    std::vector<char> covered(n, 0);
    std::vector<CLSet> out;
    std::vector<Index> pool;

    for (;;) {
        pool.clear();
        for (Index i = 0; i < n; ++i)
            if (!covered[i]) pool.push_back(i);
        if (pool.empty()) break;

        CLSet set;
        set.members.push_back(pool[rng.uniform_index(pool.size())]);
        // Distance from each point to the nearest current member; members
        // and rejected candidates are excluded for the rest of this set.
        std::vector<double> gap(n, std::numeric_limits<double>::infinity());
        std::vector<char> excluded(n, 0);
        auto admit = [&](Index m) {
            excluded[m] = 1;
            for (Index i : pool) gap[i] = std::min(gap[i], dist(data.point(i), data.point(m)));
        };
        admit(set.members.front());

        std::vector<Index> eligible;
        while (set.members.size() < k) {
            eligible.clear();
            for (Index i : pool)
                if (!excluded[i] && gap[i] > radius) eligible.push_back(i);
            if (eligible.empty()) break;
            const Index q = eligible[rng.uniform_index(eligible.size())];
            ++set.queries;
            const auto verdict = oracle.query_cl_membership(make_cl_query(data, set.members, q));
            if (verdict.match) {
                // a single matching pair settles a rejection
                ++set.pair_probes;
                excluded[q] = 1;
            } else {
                set.pair_probes += set.members.size();
                set.members.push_back(q);
                admit(q);
            }
        }
        for (Index m : set.members) covered[m] = 1;
        if (set.members.size() >= 2) out.push_back(std::move(set));
    }
    return out;
}

ConstraintCollection mix_constraints(std::span<const MLSet> ml_sets, std::span<const CLSet> cl_sets,
                                     double target_ratio, std::size_t n, std::uint64_t seed) {
    if (!(target_ratio >= 0.0 && target_ratio <= 1.0)) throw Error("mix_constraints: ratio must lie in [0, 1]");
    if (n == 0) throw Error("mix_constraints: n must be >= 1");
    ConstraintCollection out;
    if (target_ratio == 0.0) return out;

    Rng rng(seed);
    std::vector<char> constrained(n, 0);
    std::size_t count = 0;
    auto cover = [&](std::span<const Index> members) {
        for (Index i : members) {
            if (i >= n) throw Error("mix_constraints: constraint index out of range");
            if (!constrained[i]) {
                constrained[i] = 1;
                ++count;
            }
        }
    };
    auto reached = [&] { return static_cast<double>(count) >= target_ratio * static_cast<double>(n); };

    std::vector<std::size_t> cl_left(cl_sets.size()), ml_left(ml_sets.size());
    for (std::size_t i = 0; i < cl_left.size(); ++i) cl_left[i] = i;
    for (std::size_t i = 0; i < ml_left.size(); ++i) ml_left[i] = i;
    std::vector<char> ml_used(ml_sets.size(), 0);

    while (!reached() && !cl_left.empty()) {
        const auto pick = rng.uniform_index(cl_left.size());
        const auto& y = cl_sets[cl_left[pick]];
        cl_left.erase(cl_left.begin() + static_cast<std::ptrdiff_t>(pick));
        out.cl_sets.push_back(y);
        cover(y.members);
        for (std::size_t j = 0; j < ml_sets.size(); ++j) {
            if (ml_used[j]) continue;
            const auto& x = ml_sets[j].members;
            const bool touches = std::any_of(y.members.begin(), y.members.end(), [&](Index i) {
                return std::binary_search(x.begin(), x.end(), i);
            });
            if (touches) {
                ml_used[j] = 1;
                out.ml_sets.push_back(ml_sets[j]);
                cover(x);
            }
        }
    }
    std::erase_if(ml_left, [&](std::size_t j) { return ml_used[j] != 0; });
    while (!reached() && !ml_left.empty()) {
        const auto pick = rng.uniform_index(ml_left.size());
        out.ml_sets.push_back(ml_sets[ml_left[pick]]);
        cover(ml_sets[ml_left[pick]].members);
        ml_left.erase(ml_left.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    out.below_target = !reached();
    return out;
}

ConstraintCollection generate_constraints(const EmbeddedDataset& data, Oracle& oracle,
                                          const GenerationConfig& config) {
    if (config.k < 2 || config.k > data.size()) throw Error("generate_constraints: need 2 <= k <= n");
    const auto kcenter = gonzalez_kcenter(data, config.k, config.seed);
    const auto grid = build_grid(data, kcenter, hash_combine(config.seed, 0x4752), config.eps);

    ConstraintCollection out;
    out.ml_sets = generate_ml_sets(data, oracle, grid, config.m_max, config.workers);
    const auto thresholds =
        compute_hard_thresholds(data, oracle, out.ml_sets, config.alpha_pair, config.alpha_set);
    classify_hard_soft(out.ml_sets, thresholds);
    out.psi_pair = thresholds.psi_pair;
    out.psi_set = thresholds.psi_set;
    out.cl_sets = generate_cl_sets(data, oracle, kcenter.cost_kc, config.k, hash_combine(config.seed, 0x434c));
    out.ledger = oracle.ledger().totals();
    return out;
}

double QueryComparison::reduction() const {
    return total() == 0 ? 0.0 : static_cast<double>(pairwise_equivalent) / static_cast<double>(total());
}

QueryComparison compare_queries(const ConstraintCollection& selected, std::uint64_t consistency_queries) {
    QueryComparison q;
    std::set<std::size_t> ml_queries;
    for (const auto& x : selected.ml_sets) {
        ml_queries.insert(x.query);
        const auto m = x.members.size();
        q.pairwise_equivalent += m * (m - 1) / 2;
    }
    q.ml_queries = ml_queries.size();
    for (const auto& y : selected.cl_sets) {
        q.cl_queries += y.queries;
        q.pairwise_equivalent += y.pair_probes;
    }
    q.consistency_queries = consistency_queries;
    return q;
}

nlohmann::json to_json(const ConstraintCollection& c) {
    nlohmann::json ml = nlohmann::json::array(), cl = nlohmann::json::array();
    for (const auto& s : c.ml_sets)
        ml.push_back({{"members", s.members}, {"hard", s.hard}, {"level", s.level}, {"query", s.query}});
    for (const auto& s : c.cl_sets)
        cl.push_back({{"members", s.members}, {"queries", s.queries}, {"pair_probes", s.pair_probes}});
    return {{"ml", ml},
            {"cl", cl},
            {"meta",
             {{"ml_queries", c.ledger.ml_queries},
              {"cl_queries", c.ledger.cl_queries},
              {"consistency_queries", c.ledger.consistency_queries},
              {"psi_pair", c.psi_pair},
              {"psi_set", c.psi_set}}}};
}

ConstraintCollection constraints_from_json(const nlohmann::json& j, const EmbeddedDataset& data) {
    ConstraintCollection c;
    auto members = [&](const nlohmann::json& s) {
        auto m = s.at("members").get<std::vector<Index>>();
        for (Index i : m)
            if (i >= data.size()) throw Error("constraints: member index " + std::to_string(i) + " out of range");
        if (std::set<Index>(m.begin(), m.end()).size() != m.size())
            throw Error("constraints: duplicate member in a set");
        if (m.size() < 2) throw Error("constraints: every set needs at least 2 members");
        return m;
    };
    try {
        for (const auto& s : j.at("ml")) {
            MLSet x;
            x.members = members(s);
            std::sort(x.members.begin(), x.members.end());
            x.hard = s.value("hard", false);
            x.level = s.value("level", std::size_t{0});
            x.query = s.value("query", std::size_t{0});
            x.diameter = set_diameter(data, x.members);
            c.ml_sets.push_back(std::move(x));
        }
        for (const auto& s : j.at("cl")) {
            CLSet y;
            y.members = members(s);
            y.queries = s.value("queries", y.members.size() - 1);
            y.pair_probes = s.value("pair_probes", y.members.size() * (y.members.size() - 1) / 2);
            c.cl_sets.push_back(std::move(y));
        }
        if (j.contains("meta")) {
            const auto& m = j.at("meta");
            c.ledger.ml_queries = m.value("ml_queries", std::uint64_t{0});
            c.ledger.cl_queries = m.value("cl_queries", std::uint64_t{0});
            c.ledger.consistency_queries = m.value("consistency_queries", std::uint64_t{0});
            c.psi_pair = m.value("psi_pair", 0.0);
            c.psi_set = m.value("psi_set", 0.0);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("constraints: ") + e.what());
    }
    return c;
}

void save_constraints(const std::filesystem::path& path, const ConstraintCollection& c) {
    std::ofstream out(path);
    if (!out) throw Error("constraints: cannot write " + path.string());
    out << to_json(c).dump(1) << '\n';
}

ConstraintCollection load_constraints(const std::filesystem::path& path, const EmbeddedDataset& data) {
    std::ifstream in(path);
    if (!in) throw Error("constraints: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("constraints: ") + e.what());
    }
    return constraints_from_json(j, data);
}

}  // namespace ckm
