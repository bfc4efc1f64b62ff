#include "dcad/server.hpp"

#include "dcad/error.hpp"

#include <httplib.h>

#include <cmath>
#include <sstream>

namespace dcad {

namespace {

Response error(int status, const std::string& message) {
    return {status, json{{"v", kSchemaVersion}, {"error", message}}};
}

Response diagnostics_error(std::vector<dsl::Diagnostic> ds, const std::string& message) {
    Response r = error(422, message);
    r.body["diagnostics"] = diagnostics_json(ds);
    return r;
}

dsl::Diagnostic diag_at(const std::string& message, int line, int col) {
    dsl::Diagnostic d;
    d.message = message;
    d.line = line;
    d.col = col;
    return d;
}

/// Compiles text into out, or returns the 422 to send back.
std::optional<Response> try_compile(const std::string& text, std::shared_ptr<const CompiledModel>& out) {
    try {
        out = std::make_shared<const CompiledModel>(compile_model(text));
        return std::nullopt;
    } catch (const SyntaxError& e) {
        return diagnostics_error({diag_at(e.bare_message(), e.line(), e.col())}, e.what());
    } catch (const ValidationError& e) {
        return diagnostics_error(e.diagnostics(), e.what());
    } catch (const InterpError& e) {
        return diagnostics_error({diag_at(e.what(), e.line(), e.col())}, e.what());
    } catch (const Error& e) {
        return diagnostics_error({}, e.what());
    }
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    std::string item;
    while (std::getline(ss, item, '/'))
        if (!item.empty()) parts.push_back(item);
    return parts;
}

/// Constraint descriptions violated by more than tol at P.
std::vector<std::string> violated(const CompiledModel& m, std::span<const double> P, double tol) {
    std::vector<std::string> out;
    const auto g = m.constraint_values(P);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(g[i] >= -tol)) out.push_back(m.interp.constraints[i].description);
    return out;
}

} // namespace

Service::Service(ServiceOptions opt) : opt_(std::move(opt)) {}

Service::~Service() = default;

std::shared_ptr<Service::Session> Service::find(const std::string& id) {
    evict_expired();
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return nullptr;
    return it->second;
}

std::size_t Service::session_count() {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

std::size_t Service::evict_expired() {
    const auto now = std::chrono::steady_clock::now();
    const auto ttl = std::chrono::duration<double>(opt_.session_ttl_seconds);
    std::vector<std::shared_ptr<Session>> dropped;
    {
        std::lock_guard lock(mutex_);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            std::unique_lock slock(it->second->mutex, std::try_to_lock);
            if (slock.owns_lock() && now - it->second->last_used > ttl) {
                slock.unlock();
                dropped.push_back(it->second);
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }
    return dropped.size();
}

json Service::session_json(const Session& s) const {
    const auto& m = *s.model;
    json j;
    j["v"] = kSchemaVersion;
    j["id"] = s.id;
    j["revision"] = s.revision;
    j["text"] = m.text;
    j["mesh"] = mesh_json(m.topology(), m.positions(s.P));
    j["params"] = params_json(m.param_names(), s.P)["params"];
    j["diagnostics"] = diagnostics_json(m.diagnostics);
    return j;
}

void Service::settle(EditJob& job) {
    if (job.gallery || !job.error.empty() || !job.future.valid()) return;
    if (job.future.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return;
    try {
        job.gallery = job.future.get();
    } catch (const std::exception& e) {
        job.error = e.what();
    }
}

Response Service::create_program(const json& body) {
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
        return error(400, "body must be {\"text\": string}");
    std::shared_ptr<const CompiledModel> model;
    if (auto fail = try_compile(body["text"].get<std::string>(), model)) return *fail;

    auto s = std::make_shared<Session>();
    s->model = model;
    s->P = model->initial_params();
    // A dump may carry parameter values that differ from the literals.
    if (body.contains("params")) {
        if (!body["params"].is_array()) return error(400, "'params' must be an array");
        for (const auto& p : body["params"]) {
            if (!p.is_object() || !p.contains("name") || !p.contains("value") || !p["value"].is_number())
                return error(400, "each param needs 'name' and numeric 'value'");
            const int k = model->param_index(p["name"].get<std::string>());
            if (k < 0) return error(400, "unknown parameter '" + p["name"].get<std::string>() + "'");
            s->P[static_cast<std::size_t>(k)] = p["value"].get<double>();
        }
    }
    s->last_used = std::chrono::steady_clock::now();
    {
        std::lock_guard lock(mutex_);
        s->id = std::to_string(next_id_++);
        sessions_[s->id] = s;
    }
    return {201, session_json(*s)};
}

Response Service::get_program(const std::string& id) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    std::lock_guard lock(s->mutex);
    s->last_used = std::chrono::steady_clock::now();
    return {200, session_json(*s)};
}

Response Service::update_program(const std::string& id, const json& body) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
        return error(400, "body must be {\"text\": string}");
    std::lock_guard lock(s->mutex);
    s->last_used = std::chrono::steady_clock::now();
    std::shared_ptr<const CompiledModel> model;
    if (auto fail = try_compile(body["text"].get<std::string>(), model)) return *fail;
    s->model = model;
    s->P = model->initial_params();
    ++s->revision;
    return {200, session_json(*s)};
}

Response Service::update_params(const std::string& id, const json& body) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    if (!body.is_object()) return error(400, "body must be {name: value}");
    std::lock_guard lock(s->mutex);
    s->last_used = std::chrono::steady_clock::now();
    const auto& m = *s->model;
    std::vector<double> P = s->P;
    for (const auto& [name, value] : body.items()) {
        const int k = m.param_index(name);
        if (k < 0) return error(400, "unknown parameter '" + name + "'");
        if (!value.is_number() || !std::isfinite(value.get<double>()))
            return error(400, "value of '" + name + "' must be a finite number");
        P[static_cast<std::size_t>(k)] = value.get<double>();
    }
    try {
        auto bad = violated(m, P, opt_.sync.feas_tol);
        if (!bad.empty()) {
            Response r = error(422, "parameter values violate the program's constraints");
            r.body["violated"] = bad;
            return r;
        }
    } catch (const NumericError& e) {
        return error(422, e.what());
    }
    s->P = std::move(P);
    return {200, session_json(*s)};
}

Response Service::get_mesh(const std::string& id) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    std::lock_guard lock(s->mutex);
    s->last_used = std::chrono::steady_clock::now();
    json j = mesh_json(s->model->topology(), s->model->positions(s->P));
    j["revision"] = s->revision;
    return {200, j};
}

Response Service::post_edit(const std::string& id, const json& body) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    std::shared_ptr<EditJob> job;
    std::string eid;
    {
        std::lock_guard lock(s->mutex);
        s->last_used = std::chrono::steady_clock::now();
        EditRequest req;
        try {
            req = parse_edit_request(body);
            if (req.revision && *req.revision != s->revision)
                return error(409, "program changed since revision " + std::to_string(*req.revision) +
                                      "; current revision is " + std::to_string(s->revision));
            req.edit.check(s->model->topology().num_vertices);
        } catch (const EditError& e) {
            return error(400, e.what());
        }
        job = std::make_shared<EditJob>();
        job->revision = s->revision;
        auto model = s->model;
        auto P = s->P;
        auto sopt = opt_.sync;
        job->future = std::async(std::launch::async, [model, P, edit = req.edit, config = req.config, sopt] {
                          return synchronize(model->tape, model->topology(), P, edit, config, sopt);
                      }).share();
        eid = std::to_string(s->next_edit++);
        s->edits[eid] = job;
    }
    job->future.wait_for(std::chrono::duration<double>(opt_.async_after_seconds));
    return poll_edit(id, eid);
}

Response Service::poll_edit(const std::string& id, const std::string& eid) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    std::lock_guard lock(s->mutex);
    s->last_used = std::chrono::steady_clock::now();
    auto it = s->edits.find(eid);
    if (it == s->edits.end()) return error(404, "unknown edit " + eid);
    EditJob& job = *it->second;
    settle(job);
    json j{{"v", kSchemaVersion}, {"edit_id", eid}, {"revision", job.revision}};
    if (!job.error.empty()) {
        j["status"] = "failed";
        j["error"] = job.error;
        return {422, j};
    }
    if (!job.gallery) {
        j["status"] = "pending";
        j["poll"] = "/programs/" + id + "/edits/" + eid;
        return {202, j};
    }
    j["status"] = "done";
    j["gallery"] = gallery_json(*job.gallery, s->model->param_names());
    for (std::size_t i = 0; i < job.gallery->options.size(); ++i)
        j["gallery"]["options"][i]["vertices"] = job.gallery->options[i].V;
    return {200, j};
}

Response Service::select_option(const std::string& id, const std::string& eid, const json& body) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    std::lock_guard lock(s->mutex);
    s->last_used = std::chrono::steady_clock::now();
    auto it = s->edits.find(eid);
    if (it == s->edits.end()) return error(404, "unknown edit " + eid);
    EditJob& job = *it->second;
    settle(job);
    if (!job.gallery) return error(409, job.error.empty() ? "edit still running" : job.error);
    if (job.revision != s->revision) return error(409, "edit belongs to an older revision");
    if (!body.is_object() || !body.contains("option") || !body["option"].is_number_integer())
        return error(400, "body must be {\"option\": index}");
    const long idx = body["option"].get<long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= job.gallery->options.size())
        return error(400, "option index out of range");
    const AppliedOption applied = apply_option(*job.gallery, static_cast<std::size_t>(idx));

    const auto& m = *s->model;
    std::vector<std::pair<std::string, double>> values;
    for (std::size_t i = 0; i < m.param_names().size(); ++i) values.emplace_back(m.param_names()[i], applied.P[i]);
    const std::string text = dsl::rewrite_params(m.text, m.program, values);
    std::shared_ptr<const CompiledModel> model;
    if (auto fail = try_compile(text, model)) return *fail;
    s->model = model;
    s->P = applied.P;
    json j = session_json(*s);
    j["option"] = idx;
    return {200, j};
}

Response Service::dump(const std::string& id) {
    auto s = find(id);
    if (!s) return error(404, "unknown session " + id);
    std::lock_guard lock(s->mutex);
    s->last_used = std::chrono::steady_clock::now();
    json j{{"v", kSchemaVersion}, {"id", s->id}, {"revision", s->revision}, {"text", s->model->text}};
    j["params"] = params_json(s->model->param_names(), s->P)["params"];
    j["edits"] = json::object();
    for (auto& [eid, job] : s->edits) {
        settle(*job);
        json e{{"revision", job->revision}};
        if (job->gallery)
            e["gallery"] = gallery_json(*job->gallery, s->model->param_names());
        else
            e["status"] = job->error.empty() ? "pending" : "failed";
        j["edits"][eid] = std::move(e);
    }
    return {200, j};
}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) {
    json j;
    if (method == "POST" || method == "PUT") {
        j = json::parse(body, nullptr, false);
        if (j.is_discarded()) return error(400, "request body is not valid JSON");
    }
    const auto p = split_path(path);
    if (p.empty() || p[0] != "programs") return error(404, "no route for " + path);
    try {
        if (p.size() == 1 && method == "POST") return create_program(j);
        if (p.size() == 2 && method == "GET") return get_program(p[1]);
        if (p.size() == 2 && method == "PUT") return update_program(p[1], j);
        if (p.size() == 3 && p[2] == "params" && method == "PUT") return update_params(p[1], j);
        if (p.size() == 3 && p[2] == "mesh" && method == "GET") return get_mesh(p[1]);
        if (p.size() == 3 && p[2] == "dump" && method == "GET") return dump(p[1]);
        if (p.size() == 3 && p[2] == "edits" && method == "POST") return post_edit(p[1], j);
        if (p.size() == 4 && p[2] == "edits" && method == "GET") return poll_edit(p[1], p[3]);
        if (p.size() == 5 && p[2] == "edits" && p[4] == "select" && method == "POST")
            return select_option(p[1], p[3], j);
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
    return error(404, "no route for " + method + " " + path);
}

HttpListener::HttpListener(Service& service) : http_(std::make_unique<httplib::Server>()) {
    auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
        const Response r = service.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    http_->Get(".*", handler);
    http_->Post(".*", handler);
    http_->Put(".*", handler);
}

HttpListener::~HttpListener() = default;

int HttpListener::bind(const std::string& host, int port) {
    const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    return bound;
}

void HttpListener::run() { http_->listen_after_bind(); }

void HttpListener::stop() { http_->stop(); }

void serve(Service& service, const std::string& host, int port) {
    HttpListener listener(service);
    listener.bind(host, port);
    listener.run();
}

} // namespace dcad
