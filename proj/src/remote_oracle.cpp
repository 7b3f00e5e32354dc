#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cstdlib>
#include <regex>
#include <sstream>
#include <thread>

#include "lsck/error.hpp"
#include "lsck/oracle.hpp"

namespace ckm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// RAII permit for the in-flight limit.
class Permit {
public:
    explicit Permit(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
    ~Permit() { sem_.release(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

private:
    std::counting_semaphore<1024>& sem_;
};

}  // namespace

namespace prompt {

std::string render_ml(const MLGroupQuery& q) {
    std::ostringstream out;
    out << "Group the following texts by topic. Texts about the same topic belong in the same "
           "group.\n\n";
    for (std::size_t i = 0; i < q.texts.size(); ++i) out << i + 1 << ". " << q.texts[i] << '\n';
    out << "\nAnswer with one line per group in the form \"GROUP: i, j, k\" using the numbers above. "
           "Every number from 1 to "
        << q.texts.size()
        << " must appear in exactly one group; a text unrelated to all others forms its own "
           "group. Output nothing else.";
    return out.str();
}

std::string render_cl(const CLMembershipQuery& q) {
    std::ostringstream out;
    out << "Here is a set of texts:\n";
    for (std::size_t i = 0; i < q.set_texts.size(); ++i) out << i + 1 << ". " << q.set_texts[i] << '\n';
    out << "\nCandidate text: " << q.candidate_text
        << "\n\nDoes the candidate share its topic with any text in the set? Answer \"NONE\" if it "
           "shares a topic with none of them, otherwise \"MATCH: i\" where i is the number of the "
           "matching text. Output nothing else.";
    return out.str();
}

std::optional<MLGroupResponse> parse_ml(const std::string& reply, std::size_t m) {
    static const std::regex line_re(R"(^GROUP:\s*(\d+(?:\s*,\s*\d+)*)\s*$)");
    MLGroupResponse out;
    std::vector<int> hits(m, 0);
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::smatch match;
        if (!std::regex_match(line, match, line_re)) return std::nullopt;
        std::vector<std::size_t> group;
        std::istringstream nums(match[1].str());
        std::string tok;
        while (std::getline(nums, tok, ',')) {
            tok = trim(tok);
            if (tok.size() > 9) return std::nullopt;
            const auto v = std::stoull(tok);
            if (v < 1 || v > m) return std::nullopt;
            group.push_back(v - 1);
            ++hits[v - 1];
        }
        out.groups.push_back(std::move(group));
    }
    for (int h : hits)
        if (h != 1) return std::nullopt;
    return out;
}

std::optional<CLMembershipResponse> parse_cl(const std::string& reply, std::size_t set_size) {
    static const std::regex match_re(R"(^MATCH:\s*(\d+)$)");
    const auto text = trim(reply);
    if (text == "NONE") return CLMembershipResponse{};
    std::smatch match;
    if (!std::regex_match(text, match, match_re)) return std::nullopt;
    if (match[1].length() > 9) return std::nullopt;
    const auto v = std::stoull(match[1].str());
    if (v < 1 || v > set_size) return std::nullopt;
    return CLMembershipResponse{v - 1};
}

}  // namespace prompt

RemoteOracleConfig RemoteOracleConfig::from_env(std::string model) {
    RemoteOracleConfig c;
    const char* url = std::getenv("ORACLE_API_URL");
    if (!url || !*url) throw Error("remote oracle: ORACLE_API_URL is not set");
    c.url = url;
    if (const char* key = std::getenv("ORACLE_API_KEY")) c.api_key = key;
    if (!model.empty()) c.model = std::move(model);
    return c;
}

RemoteOracle::RemoteOracle(RemoteOracleConfig config)
    : config_(std::move(config)), in_flight_(std::max(1, config_.max_in_flight)) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.url, m, url_re)) throw Error("remote oracle: bad url " + config_.url);
    scheme_host_port_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "/";
    if (config_.max_attempts < 1) throw Error("remote oracle: max_attempts must be >= 1");
    if (config_.max_in_flight < 1 || config_.max_in_flight > 1024)
        throw Error("remote oracle: max_in_flight must lie in [1, 1024]");
}

RemoteOracle::~RemoteOracle() = default;

std::string RemoteOracle::post(const nlohmann::json& body, std::uint64_t correlation_id) {
    Permit permit(in_flight_);
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers = {{"X-Request-Id", std::to_string(correlation_id)}};
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw Error("transport error: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw Error("http status " + std::to_string(res->status) + ": " + res->body);
    return res->body;
}

template <typename Parse>
auto RemoteOracle::complete(const std::string& prompt, Exchange& ex, Parse parse)
    -> typename decltype(parse(std::string{}))::value_type {
    const auto id = next_id_.fetch_add(1);
    const nlohmann::json body = {
        {"model", config_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", config_.temperature}};
    ex.request = {{"id", id}, {"body", body}};

    std::string last_payload;
    std::string last_error;
    auto backoff = config_.initial_backoff;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        try {
            last_payload = post(body, id);
            const auto reply = nlohmann::json::parse(last_payload);
            const auto content =
                reply.at("choices").at(0).at("message").at("content").get<std::string>();
            if (auto parsed = parse(content)) {
                ex.response = {{"content", content}, {"attempts", attempt}};
                return *std::move(parsed);
            }
            last_error = "unparseable completion";
        } catch (const std::exception& e) {
            last_error = e.what();
        }
        if (attempt < config_.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw Error("remote oracle: query " + std::to_string(id) + " failed after " +
                std::to_string(config_.max_attempts) + " attempts (" + last_error +
                "); raw payload: " + last_payload);
}

MLGroupResponse RemoteOracle::ask_ml(const MLGroupQuery& q, std::uint32_t, Exchange& ex) {
    const auto m = q.ids.size();
    return complete(prompt::render_ml(q), ex, [m](const std::string& s) { return prompt::parse_ml(s, m); });
}

CLMembershipResponse RemoteOracle::ask_cl(const CLMembershipQuery& q, Exchange& ex) {
    const auto size = q.set_ids.size();
    return complete(prompt::render_cl(q), ex,
                    [size](const std::string& s) { return prompt::parse_cl(s, size); });
}

}  // namespace ckm
