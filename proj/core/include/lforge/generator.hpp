#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lforge/expr.hpp"

namespace lforge {

/// Bumped whenever data/prompt_template.txt changes meaning.
inline constexpr int kPromptTemplateVersion = 1;

struct ProposalRequest {
    std::string prompt;
    std::optional<std::string> parent_expr;
    std::size_t expr_dim = 2;
    std::vector<std::size_t> dims{2, 5, 10};
    std::size_t max_tokens = 2048;
    std::uint64_t seed = 0;
    ExprLimits limits;
};

enum class ProposalStatus { Ok, TransportError, ExtractionFailure };

std::string_view to_string(ProposalStatus status) noexcept;

struct ProposalResponse {
    ProposalStatus status = ProposalStatus::Ok;
    std::string raw_text;
    /// Canonical text of the extracted expression; set iff status is Ok.
    std::optional<std::string> expr;
    std::string error;
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual ProposalResponse propose(ProposalRequest const& request) = 0;
    virtual std::string name() const = 0;
};

/// Mutates the parent locally; a request without a parent gets a random
/// tree of depth <= 4. Deterministic in the request seed.
class OfflineGenerator final : public Generator {
public:
    ProposalResponse propose(ProposalRequest const& request) override;
    std::string name() const override { return "offline"; }
};

/// First text between "<expr>" and "</expr>", trimmed.
std::optional<std::string> extract_envelope(std::string_view text);

/// Extracts and parses an expression from model output.
ProposalResponse interpret_response(std::string raw_text, std::size_t expr_dim, ExprLimits limits = {});

/// Grammar summary embedded in prompts.
std::string grammar_reference(std::size_t expr_dim);

/// Replaces each "{{key}}" in `tmpl` with its value; unknown keys throw.
std::string render_template(std::string_view tmpl, std::map<std::string, std::string> const& values);

struct RemoteConfig {
    std::string base_url; // e.g. https://api.example.com/v1
    std::string model;
    double temperature = 0.8;
    std::size_t max_tokens = 2048;
    std::chrono::milliseconds timeout{120000};
    int retries = 2;
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(1000), std::chrono::milliseconds(4000)};
    std::size_t max_in_flight = 4;
    std::string api_key_env = "LF_API_KEY";
    /// Request and response bodies are written here when set.
    std::ostream* debug_log = nullptr;
};

/// Chat-completions client. Safe to call from several threads; at most
/// max_in_flight requests are outstanding.
class RemoteGenerator final : public Generator {
public:
    explicit RemoteGenerator(RemoteConfig config);
    ~RemoteGenerator() override;
    RemoteGenerator(RemoteGenerator const&) = delete;
    RemoteGenerator& operator=(RemoteGenerator const&) = delete;

    ProposalResponse propose(ProposalRequest const& request) override;
    std::string name() const override { return "remote"; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace lforge
