#include <doctest.h>

// Project headers before httplib: <resolv.h> defines a _res macro that
// collides with an Eigen parameter name.
#include "lforge/bundled_data.hpp"
#include "lforge/generator.hpp"

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

using namespace lforge;
using namespace std::chrono_literals;

namespace {

/// Minimal chat-completions endpoint on a random local port.
class FakeServer {
public:
    using Handler = std::function<void(httplib::Request const&, httplib::Response&)>;

    explicit FakeServer(Handler handler)
    {
        server_.Post("/v1/chat/completions", [this, handler](httplib::Request const& req, httplib::Response& res) {
            ++requests;
            handler(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~FakeServer()
    {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

    std::atomic<int> requests{0};

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string completion(std::string const& content)
{
    nlohmann::json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
    return j.dump();
}

RemoteConfig remote_config(std::string url)
{
    RemoteConfig c;
    c.base_url = std::move(url);
    c.model = "test-model";
    c.timeout = 5s;
    c.backoff = {1ms, 1ms};
    c.api_key_env = "LF_TEST_API_KEY";
    return c;
}

ProposalRequest request(std::string prompt = "make it multimodal")
{
    ProposalRequest r;
    r.prompt = std::move(prompt);
    r.expr_dim = 2;
    return r;
}

} // namespace

TEST_SUITE("generator")
{
    TEST_CASE("envelope extraction")
    {
        CHECK(extract_envelope("noise <expr>x1^2 - sin(x2)</expr> noise") == "x1^2 - sin(x2)");
        CHECK(extract_envelope("<expr> x1 </expr><expr>x2</expr>") == "x1");
        CHECK_FALSE(extract_envelope("x1 + x2").has_value());
        CHECK_FALSE(extract_envelope("<expr>x1 + x2").has_value());

        auto const ok = interpret_response("noise <expr>x1^2 - sin(x2)</expr> noise", 2);
        CHECK(ok.status == ProposalStatus::Ok);
        CHECK(ok.expr == to_canonical_text(parse("x1^2 - sin(x2)", 2)));

        auto const none = interpret_response("just x1 + x2", 2);
        CHECK(none.status == ProposalStatus::ExtractionFailure);
        CHECK_FALSE(none.expr.has_value());

        auto const bad = interpret_response("<expr>x1 + x7</expr>", 2);
        CHECK(bad.status == ProposalStatus::ExtractionFailure);
    }

    TEST_CASE("offline proposals are valid, new and deterministic")
    {
        OfflineGenerator gen;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            auto req = request();
            req.parent_expr = "x1+x2";
            req.seed = seed;
            auto const r = gen.propose(req);
            REQUIRE(r.status == ProposalStatus::Ok);
            REQUIRE(r.expr.has_value());
            auto const tree = parse(*r.expr, 2);
            CHECK(tree.size() <= req.limits.max_nodes);
            CHECK(tree.depth() <= req.limits.max_depth);
            CHECK(*r.expr != to_canonical_text(parse("x1+x2", 2)));
            CHECK(gen.propose(req).expr == r.expr);
        }
        auto fresh = request();
        fresh.seed = 3;
        auto const r = gen.propose(fresh);
        REQUIRE(r.expr.has_value());
        CHECK(parse(*r.expr, 2).uses_variables());
    }

    TEST_CASE("template rendering")
    {
        CHECK(render_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
        CHECK_THROWS(render_template("{{missing}}", {}));
        CHECK_THROWS(render_template("{{open", {{"open", ""}}));
        auto const t = std::string(bundled_prompt_template());
        for (auto const* key : {"{{targets}}", "{{grammar}}", "{{parent}}", "{{feedback}}"}) {
            CHECK(t.find(key) != std::string::npos);
        }
        CHECK(t.find("<expr>") != std::string::npos);
        CHECK(grammar_reference(2).find("x2") != std::string::npos);
    }

    TEST_CASE("remote: successful completion")
    {
        std::string seen_auth;
        nlohmann::json seen_body;
        FakeServer server([&](httplib::Request const& req, httplib::Response& res) {
            seen_auth = req.get_header_value("Authorization");
            seen_body = nlohmann::json::parse(req.body);
            res.set_content(completion("Here you go: <expr>x1^2 - sin(x2)</expr>"), "application/json");
        });
        ::setenv("LF_TEST_API_KEY", "sekrit-123", 1);
        std::ostringstream log;
        auto cfg = remote_config(server.url());
        cfg.debug_log = &log;
        RemoteGenerator gen(cfg);
        auto const r = gen.propose(request("hello prompt"));
        ::unsetenv("LF_TEST_API_KEY");

        REQUIRE(r.status == ProposalStatus::Ok);
        CHECK(r.expr == to_canonical_text(parse("x1^2 - sin(x2)", 2)));
        CHECK(seen_auth == "Bearer sekrit-123");
        CHECK(seen_body["model"] == "test-model");
        CHECK(seen_body["messages"][0]["content"] == "hello prompt");
        CHECK(log.str().find("hello prompt") != std::string::npos);
        CHECK(log.str().find("sekrit-123") == std::string::npos);
        CHECK(server.requests == 1);
    }

    TEST_CASE("remote: server errors are retried")
    {
        std::atomic<int> calls{0};
        FakeServer server([&](httplib::Request const&, httplib::Response& res) {
            if (calls++ < 2) {
                res.status = 503;
                return;
            }
            res.set_content(completion("<expr>x1</expr>"), "application/json");
        });
        RemoteGenerator gen(remote_config(server.url()));
        auto const r = gen.propose(request());
        CHECK(r.status == ProposalStatus::Ok);
        CHECK(server.requests == 3);
    }

    TEST_CASE("remote: retries are bounded")
    {
        FakeServer server([](httplib::Request const&, httplib::Response& res) { res.status = 500; });
        RemoteGenerator gen(remote_config(server.url()));
        auto const r = gen.propose(request());
        CHECK(r.status == ProposalStatus::TransportError);
        CHECK(server.requests == 3);
    }

    TEST_CASE("remote: client errors are not retried")
    {
        FakeServer server([](httplib::Request const&, httplib::Response& res) { res.status = 400; });
        RemoteGenerator gen(remote_config(server.url()));
        auto const r = gen.propose(request());
        CHECK(r.status == ProposalStatus::TransportError);
        CHECK(r.error.find("400") != std::string::npos);
        CHECK(server.requests == 1);
    }

    TEST_CASE("remote: malformed bodies and missing envelopes")
    {
        FakeServer server([](httplib::Request const& req, httplib::Response& res) {
            auto const body = nlohmann::json::parse(req.body);
            if (body["messages"][0]["content"] == "broken") {
                res.set_content("{\"nothing\": 1}", "application/json");
            } else {
                res.set_content(completion("I refuse."), "application/json");
            }
        });
        RemoteGenerator gen(remote_config(server.url()));
        CHECK(gen.propose(request("broken")).status == ProposalStatus::ExtractionFailure);
        CHECK(gen.propose(request("chatty")).status == ProposalStatus::ExtractionFailure);
    }

    TEST_CASE("remote: unreachable endpoint")
    {
        int port = 0;
        {
            httplib::Server probe;
            port = probe.bind_to_any_port("127.0.0.1");
        }
        auto cfg = remote_config("http://127.0.0.1:" + std::to_string(port) + "/v1");
        cfg.timeout = 500ms;
        RemoteGenerator gen(cfg);
        auto const r = gen.propose(request());
        CHECK(r.status == ProposalStatus::TransportError);
        CHECK_FALSE(r.error.empty());
    }

    TEST_CASE("remote: in-flight cap")
    {
        std::atomic<int> active{0};
        std::atomic<int> peak{0};
        FakeServer server([&](httplib::Request const&, httplib::Response& res) {
            int const now = ++active;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(30ms);
            --active;
            res.set_content(completion("<expr>x2</expr>"), "application/json");
        });
        auto cfg = remote_config(server.url());
        cfg.max_in_flight = 2;
        RemoteGenerator gen(cfg);
        std::vector<std::thread> threads;
        std::atomic<int> ok{0};
        for (int k = 0; k < 6; ++k) {
            threads.emplace_back([&] { ok += gen.propose(request()).status == ProposalStatus::Ok; });
        }
        for (auto& t : threads) {
            t.join();
        }
        CHECK(ok == 6);
        CHECK(peak <= 2);
    }
}
