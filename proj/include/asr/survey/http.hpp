#pragma once

#include "asr/engine.hpp"
#include "asr/error.hpp"
#include "asr/survey/service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <optional>
#include <string>

namespace asr::survey {

inline int http_status(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidInput:
    case ErrorCode::ValidationError:
    case ErrorCode::ParseError:
    case ErrorCode::InvalidConversation:
    case ErrorCode::SchemaError: return 400;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::KeyConsumed:
    case ErrorCode::ProtocolError:
    case ErrorCode::PreconditionFailed:
    case ErrorCode::AlreadyVetted: return 409;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::EmptyGeneration: return 502;
    default: return 500;
    }
}

/// HTTP front end for the survey service and the live conversation hub.
class HttpServer
{
public:
    /// An empty admin token disables the admin endpoints.
    HttpServer(Service & service, ConversationHub * hub, std::string admin_token)
    : service_(service)
    , hub_(hub)
    , admin_token_(std::move(admin_token))
    {
        routes();
    }

    static std::string admin_token_from_env()
    {
        auto const * v = std::getenv("ASR_ADMIN_TOKEN");
        return v ? v : "";
    }

    /// Binds to an ephemeral port when `port` is 0; returns the bound port.
    int bind(std::string const & host, int port)
    {
        int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        require(bound > 0, ErrorCode::StorageError, "cannot bind " + host + ":" + std::to_string(port));
        spdlog::info("listening on http://{}:{}", host, bound);
        return bound;
    }

    void listen_after_bind() { server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() const { server_.wait_until_ready(); }
    [[nodiscard]] bool is_running() const { return server_.is_running(); }

private:
    using Req = httplib::Request;
    using Res = httplib::Response;

    static void send_json(Res & res, nlohmann::ordered_json const & body, int status = 200)
    {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <class F>
    httplib::Server::Handler guarded(F f)
    {
        return [f = std::move(f)](Req const & req, Res & res) {
            try {
                f(req, res);
            } catch (Error const & e) {
                send_json(res, {{"error", std::string(to_string(e.code()))}, {"message", e.detail()}},
                          http_status(e.code()));
            } catch (nlohmann::json::exception const & e) {
                send_json(res, {{"error", "InvalidInput"}, {"message", e.what()}}, 400);
            }
        };
    }

    static nlohmann::ordered_json body(Req const & req)
    {
        if (text::is_blank(req.body)) return nlohmann::ordered_json::object();
        try {
            return nlohmann::ordered_json::parse(req.body);
        } catch (nlohmann::json::exception const &) {
            fail(ErrorCode::InvalidInput, "request body is not valid JSON");
        }
    }

    void require_admin(Req const & req) const
    {
        auto const auth = req.get_header_value("Authorization");
        require(!admin_token_.empty() && auth == "Bearer " + admin_token_, ErrorCode::Unauthorized,
                "admin token required");
    }

    ConversationHub & hub() const
    {
        require(hub_ != nullptr, ErrorCode::ConfigError, "conversation endpoints are not configured");
        return *hub_;
    }

    void routes()
    {
        server_.Get("/healthz", [](Req const &, Res & res) { send_json(res, {{"status", "ok"}}); });

        server_.Post("/admin/keys", guarded([this](Req const & req, Res & res) {
            require_admin(req);
            auto b = body(req);
            require(b.contains("n") && b["n"].is_number_integer() && b["n"].get<long long>() >= 0,
                    ErrorCode::ValidationError, "body needs a non-negative integer 'n'");
            auto keys = service_.issue_keys(b["n"].get<std::size_t>());
            nlohmann::ordered_json out = nlohmann::ordered_json::array();
            for (auto const & k : keys) out.push_back({{"token", k.token}, {"issued_at", k.issued_at}});
            send_json(res, {{"keys", out}}, 201);
        }));

        server_.Get("/admin/export", guarded([this](Req const & req, Res & res) {
            require_admin(req);
            auto component = parse_component(req.get_param_value("component"));
            res.set_content(service_.export_csv(component), "text/csv");
        }));

        server_.Get(R"(/session/([A-Za-z0-9_\-]+))", guarded([this](Req const & req, Res & res) {
            require(req.has_param("component"), ErrorCode::InvalidInput, "query parameter 'component' is required");
            auto component = parse_component(req.get_param_value("component"));
            send_json(res, service_.start_session(req.matches[1], component));
        }));

        server_.Post(R"(/session/([A-Za-z0-9_\-]+)/responses)", guarded([this](Req const & req, Res & res) {
            send_json(res, service_.submit_response(req.matches[1], body(req)));
        }));

        server_.Post(R"(/session/([A-Za-z0-9_\-]+)/usefulness)", guarded([this](Req const & req, Res & res) {
            auto b = body(req);
            require(b.contains("score"), ErrorCode::ValidationError, "body needs 'score'");
            send_json(res, service_.submit_usefulness(req.matches[1], b["score"]));
        }));

        server_.Post(R"(/session/([A-Za-z0-9_\-]+)/uploads)", guarded([this](Req const & req, Res & res) {
            auto b = body(req);
            require(b.contains("slot") && b["slot"].is_number_integer(), ErrorCode::ValidationError,
                    "body needs an integer 'slot'");
            require(b.contains("conversation_type") && b["conversation_type"].is_string(), ErrorCode::ValidationError,
                    "body needs 'conversation_type'");
            require(b.contains("transcript") && b["transcript"].is_string(), ErrorCode::ValidationError,
                    "body needs 'transcript'");
            send_json(res, service_.upload_conversation(req.matches[1], b["slot"].get<int>(),
                                                        b["conversation_type"].get<std::string>(),
                                                        b["transcript"].get<std::string>()));
        }));

        server_.Post("/conversations", guarded([this](Req const &, Res & res) {
            send_json(res, {{"id", hub().create()}}, 201);
        }));

        server_.Post(R"(/conversations/([A-Za-z0-9_\-]+)/messages)", guarded([this](Req const & req, Res & res) {
            auto b = body(req);
            require(b.contains("role") && b["role"].is_string(), ErrorCode::InvalidInput, "body needs 'role'");
            require(b.contains("text") && b["text"].is_string(), ErrorCode::InvalidInput, "body needs 'text'");
            auto const role_name = b["role"].get<std::string>();
            Role role = Role::Interjection;
            if (role_name == "counterpart") role = Role::Counterpart;
            else if (role_name == "self") role = Role::SelfUser;
            else fail(ErrorCode::InvalidInput, "role must be 'counterpart' or 'self'");
            send_json(res, to_json(hub().post_message(req.matches[1], role, b["text"].get<std::string>())));
        }));

        server_.Post(R"(/conversations/([A-Za-z0-9_\-]+)/analyze)", guarded([this](Req const & req, Res & res) {
            auto b = body(req);
            auto trigger = ReasonTrigger::UserRequested;
            if (b.contains("trigger")) {
                auto t = b["trigger"].get<std::string>();
                if (t == "auto_warning") trigger = ReasonTrigger::AutoWarning;
                else require(t == "user_requested", ErrorCode::InvalidInput, "unknown trigger '" + t + "'");
            }
            send_json(res, to_json(hub().analyze(req.matches[1], trigger)));
        }));
    }

    Service & service_;
    ConversationHub * hub_;
    std::string admin_token_;
    httplib::Server server_;
};

} // namespace asr::survey
