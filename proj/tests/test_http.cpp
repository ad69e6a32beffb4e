#include "asmwb/http.hpp"
#include "asmwb/models.hpp"

#include <doctest.h>
#include <httplib.h>

#include <fstream>
#include <regex>
#include <set>
#include <thread>

using namespace asmwb;
using json = nlohmann::json;

namespace {

// Server on a free local port for the lifetime of the fixture.
struct Server {
    SessionManager sessions{3};
    HttpService http{sessions};
    int port = http.bind("127.0.0.1", 0);
    std::thread thread{[this] { http.serve(); }};

    Server() { http.wait_until_ready(); }
    ~Server()
    {
        http.stop();
        thread.join();
    }
    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(10, 0);
        return c;
    }
};

json body(const httplib::Result& r)
{
    REQUIRE(r);
    return json::parse(r->body);
}

std::string create(httplib::Client& c, const std::string& request = R"({"realtime": false})")
{
    auto r = c.Post("/sessions", request, "application/json");
    REQUIRE(r);
    REQUIRE(r->status == 201);
    return body(r)["id"];
}

// Reads `count` sample events (or until the stream ends).
std::vector<json> read_stream(const httplib::Client& base, const std::string& path, std::size_t count, bool* ended = nullptr)
{
    httplib::Client c("127.0.0.1", base.port());
    c.set_read_timeout(10, 0);
    std::vector<json> events;
    std::string buffer;
    c.Get(path, [&](const char* data, size_t len) {
        buffer.append(data, len);
        for (auto end = buffer.find("\n\n"); end != std::string::npos; end = buffer.find("\n\n")) {
            const std::string block = buffer.substr(0, end);
            buffer.erase(0, end + 2);
            if (block.find("event: end") != std::string::npos) {
                if (ended) *ended = true;
                return false;
            }
            const auto data_at = block.find("data: ");
            if (block.find("event: sample") == std::string::npos || data_at == std::string::npos) continue;
            events.push_back(json::parse(block.substr(data_at + 6)));
            if (events.size() == count) return false;
        }
        return true;
    });
    return events;
}

} // namespace

TEST_CASE("create, command, step and snapshot over HTTP")
{
    Server server;
    auto c = server.client();
    auto created = c.Post("/sessions", R"({"realtime": false, "config": "test"})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    CHECK(created->get_header_value("Content-Type") == "application/json");
    const auto info = body(created);
    const std::string id = info["id"];
    CHECK(info["status"] == "running");
    CHECK(info["snapshot"]["step"] == 0);
    CHECK(info["snapshot"]["controlled"]["state"] == "STARTUP");

    auto ack = c.Post("/sessions/" + id + "/commands", R"({"command": "startupEnded", "value": true})", "application/json");
    REQUIRE(ack);
    CHECK(ack->status == 202);
    CHECK(body(ack)["sequence"] == 1);

    auto stepped = body(c.Post("/sessions/" + id + "/step", "", "application/json"));
    CHECK(stepped["step"] == 1);
    CHECK(stepped["controlled"]["state"] == "SELFTEST");
    CHECK(stepped["commands"][0]["command"] == "startupEnded");

    auto batch = c.Post("/sessions/" + id + "/commands",
                        R"([{"command": "selfTestPassed"}, {"command": "respirationMode", "value": "PCV"}, {"command": "startVentilation"}])",
                        "application/json");
    REQUIRE(batch);
    CHECK(batch->status == 202);
    CHECK(body(batch).size() == 3);
    body(c.Post("/sessions/" + id + "/step", R"({"count": 2})", "application/json"));
    auto snap = body(c.Get("/sessions/" + id + "/snapshot"));
    CHECK(snap["step"] == 3);
    CHECK(snap["controlled"]["state"] == "PCV_STATE");
    CHECK(snap["controlled"]["phase"] == "INSPIRATION");
    CHECK(snap["controlled"]["iValve"] == "OPEN");
    CHECK(snap["lung"]["paw"] == 20.0);
    CHECK(snap["alarms"]["apnea"] == false);

    body(c.Post("/sessions/" + id + "/step", R"({"count": 100})", "application/json"));
    auto log = c.Get("/sessions/" + id + "/log");
    REQUIRE(log);
    CHECK(log->get_header_value("Content-Type") == "application/x-ndjson");
    CHECK(std::count(log->body.begin(), log->body.end(), '\n') == 104);
    auto settings = settings_from_json(json::parse(R"({"realtime": false, "config": "test"})"));
    CHECK(replay_log(log->body, settings).identical());

    auto listed = body(c.Get("/sessions"));
    CHECK(listed["sessions"].size() == 1);
    CHECK(listed["sessions"][0]["steps"] == 103);

    auto deleted = c.Delete("/sessions/" + id);
    REQUIRE(deleted);
    CHECK(deleted->status == 200);
    CHECK(body(deleted)["status"] == "stopped");
    CHECK(c.Get("/sessions/" + id + "/snapshot")->status == 404);
}

TEST_CASE("HTTP errors")
{
    Server server;
    auto c = server.client();
    auto missing = c.Get("/sessions/nope/snapshot");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(body(missing)["error"] == "UnknownSession");
    CHECK(c.Post("/sessions/nope/commands", R"({"command": "startupEnded"})", "application/json")->status == 404);
    CHECK(c.Delete("/sessions/nope")->status == 404);

    auto bad = c.Post("/sessions", R"({"level": 9})", "application/json");
    CHECK(bad->status == 400);
    CHECK(body(bad)["error"] == "InvalidConfig");
    CHECK(c.Post("/sessions", "{not json", "application/json")->status == 400);

    const auto id = create(c);
    auto unknown = c.Post("/sessions/" + id + "/commands", R"({"command": "selfDestruct"})", "application/json");
    CHECK(unknown->status == 400);
    CHECK(body(unknown)["error"] == "InvalidCommand");
    CHECK(c.Post("/sessions/" + id + "/commands", R"({"command": "respirationMode", "value": 3})", "application/json")->status == 400);
    CHECK(c.Post("/sessions/" + id + "/commands", R"({"cmd": "startupEnded"})", "application/json")->status == 400);
    CHECK(c.Post("/sessions/" + id + "/step", R"({"count": -1})", "application/json")->status == 400);
    CHECK(c.Post("/sessions/" + id + "/step", R"({"count": 20000})", "application/json")->status == 429);

    create(c);
    create(c);
    auto full = c.Post("/sessions", R"({"realtime": false})", "application/json");
    CHECK(full->status == 429);
    CHECK(body(full)["error"] == "ResourceLimit");

    const auto rt = body(c.Get("/sessions"))["sessions"][0]["id"].get<std::string>();
    c.Delete("/sessions/" + rt);
    const auto live = create(c, R"({"realtime": true})");
    CHECK(c.Post("/sessions/" + live + "/step", "", "application/json")->status == 400);
}

TEST_CASE("the stream fans out every sample in order")
{
    Server server;
    auto c = server.client();
    const auto id = create(c, R"({"realtime": true, "speed": 50})");
    std::vector<json> a, b;
    std::thread ta([&] { a = read_stream(c, "/sessions/" + id + "/stream?from=0", 40); });
    std::thread tb([&] { b = read_stream(c, "/sessions/" + id + "/stream?from=0", 40); });
    c.Post("/sessions/" + id + "/commands", R"({"command": "startupEnded"})", "application/json");
    ta.join();
    tb.join();
    REQUIRE(a.size() == 40);
    CHECK(a == b);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]["step"] == i);
    CHECK(a.back()["controlled"]["state"] == "SELFTEST");

    // pause, then a late subscriber starting at the latest sample
    c.Post("/sessions/" + id + "/pause", "", "application/json");
    CHECK(body(c.Get("/sessions/" + id))["status"] == "paused");
    const auto latest = body(c.Get("/sessions/" + id + "/snapshot"))["step"].get<std::size_t>();
    auto late = read_stream(c, "/sessions/" + id + "/stream", 1);
    REQUIRE(late.size() == 1);
    CHECK(late[0]["step"] == latest);

    // the stream closes with an end event when the session goes away
    bool ended = false;
    std::thread tail([&] { read_stream(c, "/sessions/" + id + "/stream", 1000, &ended); });
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    c.Delete("/sessions/" + id);
    tail.join();
    CHECK(ended);
}

TEST_CASE("responses carry exactly the fields the OpenAPI document declares")
{
    std::ifstream in(assets_dir() / "docs" / "openapi.json");
    REQUIRE(in);
    const auto doc = json::parse(in);
    const auto& schemas = doc["components"]["schemas"];
    auto keys = [](const json& object) {
        std::set<std::string> out;
        for (const auto& [k, v] : object.items()) out.insert(k);
        return out;
    };
    auto declared = [&](const char* schema) { return keys(schemas[schema]["properties"]); };

    for (const char* path : {"/sessions", "/sessions/{id}", "/sessions/{id}/commands", "/sessions/{id}/snapshot",
                             "/sessions/{id}/step", "/sessions/{id}/pause", "/sessions/{id}/resume",
                             "/sessions/{id}/stream", "/sessions/{id}/log"})
        CHECK_MESSAGE(doc["paths"].contains(path), path);

    Server server;
    auto c = server.client();
    const std::string id = create(c);
    const auto ack = body(c.Post("/sessions/" + id + "/commands", R"({"command": "startupEnded"})", "application/json"));
    CHECK(keys(ack) == declared("CommandAck"));
    const auto sample = body(c.Post("/sessions/" + id + "/step", "", "application/json"));
    CHECK(keys(sample) == declared("SessionSample"));
    CHECK(keys(sample["lung"]) == declared("LungSample"));
    CHECK(keys(sample["commands"][0]) == declared("CommandAck"));
    for (const auto& r : schemas["SessionSample"]["required"]) CHECK(sample.contains(r.get<std::string>()));

    const auto info = body(c.Get("/sessions/" + id));
    CHECK(keys(info) == declared("SessionInfo"));
    const auto error = body(c.Get("/sessions/nope"));
    CHECK(keys(error) == declared("Error"));

    std::set<std::string> request_fields = declared("SessionRequest");
    CHECK(request_fields == std::set<std::string>{"level", "config", "patient", "tickMs", "lungDtMs", "realtime", "speed"});
    for (const auto& field : request_fields) {
        // every declared request field is accepted on its own
        json request{{"realtime", false}};
        if (field == "level") request[field] = 2;
        else if (field == "config") request[field] = "test";
        else if (field == "patient") request[field] = "adult";
        else if (field == "tickMs") request[field] = 100;
        else if (field == "lungDtMs") request[field] = 10;
        else if (field == "speed") request[field] = 2.0;
        CHECK_NOTHROW(settings_from_json(request));
    }
}
