#include "dcad/model.hpp"
#include "dcad/server.hpp"

#include <doctest.h>
#include <httplib.h>

#include <thread>

using namespace dcad;

namespace {

const char* kBox = "param w = 1.0\nparam h = 1.0\nparam d = 1.0\nsolid b = box(w, h, d)\n";

std::string create(Service& svc, const std::string& text) {
    const auto r = svc.handle("POST", "/programs", json{{"text", text}}.dump());
    REQUIRE(r.status == 201);
    return r.body["id"].get<std::string>();
}

json pull_edit(long revision) {
    return {{"v", 1}, {"moved", {{{"vid", 6}, {"target", {1.5, 0.5, 0.5}}}}}, {"revision", revision}};
}

double vertex_x(const json& mesh, std::size_t v) { return mesh["vertices"][3 * v].get<double>(); }

} // namespace

TEST_CASE("create, read and re-create") {
    Service svc;
    const auto id = create(svc, kBox);
    const auto r = svc.handle("GET", "/programs/" + id, "");
    CHECK(r.status == 200);
    CHECK(r.body["mesh"]["vertices"].size() == 24);
    CHECK(r.body["revision"] == 0);
    const auto id2 = create(svc, kBox);
    CHECK(id2 != id);
    CHECK(svc.handle("GET", "/programs/" + id2 + "/mesh", "").body["vertices"] ==
          svc.handle("GET", "/programs/" + id + "/mesh", "").body["vertices"]);
    CHECK(svc.session_count() == 2);
}

TEST_CASE("bad programs and requests") {
    Service svc;
    auto r = svc.handle("POST", "/programs", json{{"text", "param w = \nsolid"}}.dump());
    CHECK(r.status == 422);
    CHECK_FALSE(r.body["diagnostics"].empty());
    CHECK(r.body["diagnostics"][0]["line"].get<int>() >= 1);
    r = svc.handle("POST", "/programs", json{{"text", "solid b = box(q, 1, 1)\n"}}.dump());
    CHECK(r.status == 422);
    CHECK(svc.handle("POST", "/programs", "{not json").status == 400);
    CHECK(svc.handle("POST", "/programs", json{{"txt", kBox}}.dump()).status == 400);
    CHECK(svc.handle("GET", "/programs/99", "").status == 404);
    CHECK(svc.handle("GET", "/nowhere", "").status == 404);
    CHECK(svc.handle("DELETE", "/programs/1", "").status == 404);
}

TEST_CASE("parameter and text updates") {
    Service svc;
    const auto id = create(svc, kBox);
    auto r = svc.handle("PUT", "/programs/" + id + "/params", R"({"w": 3.0})");
    REQUIRE(r.status == 200);
    CHECK(vertex_x(r.body["mesh"], 6) == doctest::Approx(1.5));
    CHECK(r.body["revision"] == 0);
    CHECK(svc.handle("PUT", "/programs/" + id + "/params", R"({"q": 3.0})").status == 400);
    CHECK(svc.handle("PUT", "/programs/" + id + "/params", R"({"w": "x"})").status == 400);

    r = svc.handle("PUT", "/programs/" + id, json{{"text", std::string(kBox) + "translate(b, 1, 0, 0)\n"}}.dump());
    REQUIRE(r.status == 200);
    CHECK(r.body["revision"] == 1);
    CHECK(vertex_x(r.body["mesh"], 6) == doctest::Approx(1.5));
    CHECK(svc.handle("PUT", "/programs/" + id, json{{"text", "solid"}}.dump()).status == 422);
    CHECK(svc.handle("GET", "/programs/" + id, "").body["revision"] == 1);
}

TEST_CASE("constraint-violating parameters are rejected") {
    Service svc;
    const auto id = create(svc, "param w = 2.0\nparam h = 1.0\nlet c = clamp(w, 0.5 * h, 3.0)\n"
                                "solid b = box(c, h, 1)\n");
    const auto r = svc.handle("PUT", "/programs/" + id + "/params", R"({"h": 8.0})");
    CHECK(r.status == 422);
    CHECK_FALSE(r.body["violated"].empty());
}

TEST_CASE("edit, select and re-edit") {
    Service svc;
    const auto id = create(svc, kBox);
    CHECK(svc.handle("POST", "/programs/" + id + "/edits", pull_edit(5).dump()).status == 409);
    json bad = pull_edit(0);
    bad["moved"][0]["vid"] = 100;
    CHECK(svc.handle("POST", "/programs/" + id + "/edits", bad.dump()).status == 400);

    auto r = svc.handle("POST", "/programs/" + id + "/edits", pull_edit(0).dump());
    REQUIRE(r.status == 200);
    CHECK(r.body["status"] == "done");
    const auto eid = r.body["edit_id"].get<std::string>();
    const auto& options = r.body["gallery"]["options"];
    REQUIRE(options.size() == 1);
    CHECK(options[0]["params"]["w"].get<double>() == doctest::Approx(3.0).epsilon(1e-4));
    CHECK(options[0]["vertices"].size() == 24);

    const auto sel = "/programs/" + id + "/edits/" + eid + "/select";
    CHECK(svc.handle("POST", sel, R"({"option": 1})").status == 400);
    r = svc.handle("POST", sel, R"({"option": 0})");
    REQUIRE(r.status == 200);
    const auto text = r.body["text"].get<std::string>();
    CHECK(text.find("param w = 3.0\n") != std::string::npos);
    CHECK(text.find("param h = 1.0\n") != std::string::npos);
    CHECK(r.body["revision"] == 0);
    const auto again = svc.handle("POST", sel, R"({"option": 0})");
    CHECK(again.status == 200);
    CHECK(again.body["text"] == r.body["text"]);
    CHECK(again.body["params"] == r.body["params"]);

    // Identity edit at the new state gives back the selected option.
    json same = pull_edit(0);
    r = svc.handle("POST", "/programs/" + id + "/edits", same.dump());
    REQUIRE(r.status == 200);
    REQUIRE(r.body["gallery"]["options"].size() == 1);
    CHECK(r.body["gallery"]["options"][0]["params"]["w"].get<double>() == doctest::Approx(3.0).epsilon(1e-4));
    CHECK(r.body["gallery"]["options"][0]["e_edit"].get<double>() <= 1e-10);

    // Text change makes older edits unselectable.
    svc.handle("PUT", "/programs/" + id, json{{"text", kBox}}.dump());
    CHECK(svc.handle("POST", sel, R"({"option": 0})").status == 409);
    CHECK(svc.handle("GET", "/programs/" + id + "/edits/77", "").status == 404);
}

TEST_CASE("slow edits answer 202 and can be polled") {
    ServiceOptions opt;
    opt.async_after_seconds = 0.0;
    Service svc(opt);
    const auto id = create(svc, kBox);
    auto r = svc.handle("POST", "/programs/" + id + "/edits", pull_edit(0).dump());
    REQUIRE((r.status == 202 || r.status == 200));
    const auto eid = r.body["edit_id"].get<std::string>();
    if (r.status == 202) {
        CHECK(r.body["status"] == "pending");
        CHECK(r.body["poll"] == "/programs/" + id + "/edits/" + eid);
    }
    for (int i = 0; i < 2000 && r.status == 202; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        r = svc.handle("GET", "/programs/" + id + "/edits/" + eid, "");
    }
    CHECK(r.status == 200);
    CHECK(r.body["status"] == "done");
}

TEST_CASE("dump restores a session") {
    Service svc;
    const auto id = create(svc, kBox);
    svc.handle("PUT", "/programs/" + id + "/params", R"({"d": 0.3333333333333333})");
    const auto d = svc.handle("GET", "/programs/" + id + "/dump", "");
    REQUIRE(d.status == 200);
    const auto r = svc.handle("POST", "/programs", d.body.dump());
    REQUIRE(r.status == 201);
    CHECK(r.body["params"] == d.body["params"]);
    CHECK(r.body["mesh"] == svc.handle("GET", "/programs/" + id, "").body["mesh"]);
}

TEST_CASE("idle sessions expire") {
    ServiceOptions opt;
    opt.session_ttl_seconds = 0.0;
    Service svc(opt);
    create(svc, kBox);
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    CHECK(svc.evict_expired() == 1);
    CHECK(svc.session_count() == 0);
}

TEST_CASE("HTTP round trip") {
    Service svc;
    HttpListener listener(svc);
    const int port = listener.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread t([&] { listener.run(); });
    httplib::Client client("127.0.0.1", port);
    auto res = client.Post("/programs", json{{"text", kBox}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 201);
    const auto id = json::parse(res->body)["id"].get<std::string>();
    res = client.Put("/programs/" + id + "/params", R"({"w": 2.0})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    res = client.Get("/programs/" + id + "/mesh");
    REQUIRE(res);
    CHECK(vertex_x(json::parse(res->body), 6) == doctest::Approx(1.0));
    res = client.Get("/programs/404");
    REQUIRE(res);
    CHECK(res->status == 404);
    listener.stop();
    t.join();
}
