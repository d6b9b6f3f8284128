// Eigen names a parameter _res, which <resolv.h> (pulled in by httplib)
// defines as a macro, so the project headers come first.
#include "lforge/generator.hpp"

#include <cstdlib>
#include <mutex>
#include <semaphore>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace lforge {

namespace {

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string path;   // path prefix without trailing slash
};

Endpoint split_url(std::string const& url)
{
    auto const scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("remote generator base_url needs a scheme: " + url);
    }
    auto const path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    e.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!e.path.empty() && e.path.back() == '/') {
        e.path.pop_back();
    }
    return e;
}

bool retryable_status(int status)
{
    return status == 408 || status == 429 || status >= 500;
}

} // namespace

struct RemoteGenerator::Impl {
    RemoteConfig config;
    Endpoint endpoint;
    std::counting_semaphore<1024> slots;
    std::mutex log_mutex;

    explicit Impl(RemoteConfig c)
        : config(std::move(c)), endpoint(split_url(config.base_url)),
          slots(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, std::min<std::size_t>(config.max_in_flight, 1024))))
    {
    }

    void log(std::string_view what, std::string const& body)
    {
        if (config.debug_log == nullptr) {
            return;
        }
        std::lock_guard lock(log_mutex);
        *config.debug_log << "[llm " << what << "] " << body << '\n';
        config.debug_log->flush();
    }
};

RemoteGenerator::RemoteGenerator(RemoteConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteGenerator::~RemoteGenerator() = default;

ProposalResponse RemoteGenerator::propose(ProposalRequest const& request)
{
    auto& cfg = impl_->config;
    nlohmann::json body = {
        {"model", cfg.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", cfg.temperature},
        {"max_tokens", std::min(cfg.max_tokens, request.max_tokens)},
    };
    std::string const payload = body.dump();
    httplib::Headers headers;
    if (char const* key = std::getenv(cfg.api_key_env.c_str()); key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    impl_->log("request", "POST " + impl_->endpoint.path + "/chat/completions (Authorization: <redacted>) " + payload);

    ProposalResponse out;
    out.status = ProposalStatus::TransportError;
    impl_->slots.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{impl_->slots};

    auto const seconds = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
    auto const micros = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - seconds);
    for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        if (attempt > 0) {
            auto const k = static_cast<std::size_t>(attempt - 1);
            if (!cfg.backoff.empty()) {
                std::this_thread::sleep_for(cfg.backoff[std::min(k, cfg.backoff.size() - 1)]);
            }
        }
        httplib::Client client(impl_->endpoint.origin);
        client.set_connection_timeout(seconds.count(), static_cast<time_t>(micros.count()));
        client.set_read_timeout(seconds.count(), static_cast<time_t>(micros.count()));
        client.set_write_timeout(seconds.count(), static_cast<time_t>(micros.count()));
        auto res = client.Post(impl_->endpoint.path + "/chat/completions", headers, payload, "application/json");
        if (!res) {
            out.error = "transport error: " + httplib::to_string(res.error());
            impl_->log("error", out.error);
            continue;
        }
        impl_->log("response", std::to_string(res->status) + " " + res->body);
        if (res->status != 200) {
            out.error = "HTTP status " + std::to_string(res->status);
            if (retryable_status(res->status)) {
                continue;
            }
            return out;
        }
        std::string content;
        try {
            auto const j = nlohmann::json::parse(res->body);
            content = j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (std::exception const& e) {
            out.status = ProposalStatus::ExtractionFailure;
            out.raw_text = res->body;
            out.error = std::string("malformed completion body: ") + e.what();
            return out;
        }
        return interpret_response(std::move(content), request.expr_dim, request.limits);
    }
    return out;
}

} // namespace lforge
