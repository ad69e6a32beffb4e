#include "asmwb/http.hpp"

#include <httplib.h>

namespace asmwb {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::size_t kMaxStepsPerRequest = 10000;
constexpr int kWorkerThreads = 32;  // each open stream holds one

int http_status(ErrorCode code)
{
    switch (code) {
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::ResourceLimit: return 429;
    default: return 400;
    }
}

void send_json(httplib::Response& res, const ojson& body, int status = 200)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e)
{
    send_json(res, {{"error", error_code_name(e.code())}, {"message", e.message()}}, http_status(e.code()));
}

json parse_body(const httplib::Request& req, ErrorCode on_error)
{
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(on_error, std::string("body is not JSON: ") + e.what());
    }
}

OperatorCommand command_from(const json& j)
{
    if (!j.is_object() || !j.contains("command") || !j["command"].is_string())
        throw Error(ErrorCode::InvalidCommand, "expected {\"command\": name, \"value\": ...}");
    for (const auto& [k, v] : j.items())
        if (k != "command" && k != "value") throw Error(ErrorCode::InvalidCommand, "unknown field '" + k + "'");
    OperatorCommand c{j["command"].get<std::string>()};
    if (j.contains("value")) {
        const auto& v = j["value"];
        if (v.is_boolean())
            c.value = v.get<bool>() ? "true" : "false";
        else if (v.is_string())
            c.value = v.get<std::string>();
        else
            throw Error(ErrorCode::InvalidCommand, "value must be a boolean or a literal name");
    }
    return c;
}

ojson ack_json(const CommandAck& a) { return {{"sequence", a.sequence}, {"command", a.name}, {"value", a.value}}; }

// Runs a handler, turning library errors into JSON error responses.
template <class F>
auto guarded(F f)
{
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, e);
        }
    };
}

} // namespace

struct HttpService::Impl {
    SessionManager& sessions;
    httplib::Server server;

    explicit Impl(SessionManager& s) : sessions(s) { routes(); }

    std::shared_ptr<Session> session(const httplib::Request& req) { return sessions.get(req.path_params.at("id")); }

    void routes()
    {
        server.new_task_queue = [] { return new httplib::ThreadPool(kWorkerThreads); };
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = sessions.create(settings_from_json(parse_body(req, ErrorCode::InvalidConfig)));
            auto body = s->info();
            body["snapshot"] = s->to_json(s->snapshot());
            send_json(res, body, 201);
        }));

        server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
            ojson list = ojson::array();
            for (const auto& id : sessions.ids()) {
                try {
                    list.push_back(sessions.get(id)->info());
                } catch (const Error&) {
                    // removed concurrently
                }
            }
            send_json(res, {{"sessions", list}});
        }));

        server.Get("/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, session(req)->info());
        }));

        server.Delete("/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            sessions.remove(s->id());
            send_json(res, s->info());
        }));

        server.Post("/sessions/:id/commands", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const json body = parse_body(req, ErrorCode::InvalidCommand);
            if (body.is_array()) {
                std::vector<OperatorCommand> cmds;
                for (const auto& c : body) cmds.push_back(command_from(c));
                ojson acks = ojson::array();
                for (const auto& c : cmds) acks.push_back(ack_json(s->submit(c)));
                send_json(res, acks, 202);
            } else {
                send_json(res, ack_json(s->submit(command_from(body))), 202);
            }
        }));

        server.Get("/sessions/:id/snapshot", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            send_json(res, s->to_json(s->snapshot()));
        }));

        server.Post("/sessions/:id/step", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const json body = parse_body(req, ErrorCode::InvalidCommand);
            std::size_t count = 1;
            if (body.contains("count")) {
                if (!body["count"].is_number_unsigned()) throw Error(ErrorCode::InvalidCommand, "count must be a non-negative integer");
                count = body["count"].get<std::size_t>();
            }
            if (count > kMaxStepsPerRequest)
                throw Error(ErrorCode::ResourceLimit, "at most " + std::to_string(kMaxStepsPerRequest) + " steps per request");
            s->step(count);
            send_json(res, s->to_json(s->snapshot()));
        }));

        server.Post("/sessions/:id/pause", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            s->pause();
            send_json(res, s->info());
        }));

        server.Post("/sessions/:id/resume", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            s->resume();
            send_json(res, s->info());
        }));

        server.Get("/sessions/:id/log", guarded([this](const httplib::Request& req, httplib::Response& res) {
            res.set_content(session(req)->log(), "application/x-ndjson");
        }));

        server.Get("/sessions/:id/stream", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            std::size_t from = s->sample_count() - 1;
            if (req.has_param("from")) {
                try {
                    from = std::stoul(req.get_param_value("from"));
                } catch (const std::exception&) {
                    throw Error(ErrorCode::InvalidCommand, "from must be a sample index");
                }
            }
            auto cursor = std::make_shared<std::size_t>(from);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider("text/event-stream", [s, cursor](std::size_t, httplib::DataSink& sink) {
                while (sink.is_writable()) {
                    auto sample = s->wait_sample(*cursor, std::chrono::milliseconds(250));
                    if (sample) {
                        const std::string event = "id: " + std::to_string(sample->step) + "\nevent: sample\ndata: " +
                                                  s->to_json(*sample).dump() + "\n\n";
                        if (!sink.write(event.data(), event.size())) return false;
                        ++*cursor;
                        return true;
                    }
                    if (s->status() == SessionStatus::Stopped && *cursor >= s->sample_count()) {
                        const std::string end = "event: end\ndata: " + s->info().dump() + "\n\n";
                        sink.write(end.data(), end.size());
                        sink.done();
                        return true;
                    }
                    // keep-alive comment so dead clients are noticed
                    if (!sink.write(":\n\n", 3)) return false;
                }
                return false;
            });
        }));
    }
};

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port)
{
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::serve() { return impl_->server.listen_after_bind(); }

void HttpService::stop() { impl_->server.stop(); }

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

} // namespace asmwb
