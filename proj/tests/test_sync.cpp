#include "dcad/io.hpp"
#include "dcad/model.hpp"
#include "dcad/sync.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace dcad;

namespace {

EditRequest bundled_edit(const std::string& name) {
    return parse_edit_request(json::parse(read_file(models_dir() + "/edits/" + name)));
}

const GalleryOption* option_for(const OptionGallery& g, ObjectiveId id) {
    for (const auto& o : g.options)
        for (auto m : o.merged)
            if (m == id) return &o;
    return nullptr;
}

} // namespace

TEST_CASE("relative distance") {
    CHECK(relative_distance(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
    CHECK(relative_distance(std::vector<double>{0.0}, std::vector<double>{0.5}) == doctest::Approx(0.5));
    CHECK(relative_distance(std::vector<double>{10.0}, std::vector<double>{11.0}) == doctest::Approx(1.0 / 11.0));
}

TEST_CASE("identity edit keeps the parameters") {
    const auto m = load_bundled("bracket.dcad");
    const auto P0 = m.initial_params();
    const auto V0 = m.positions(P0);
    EditSpec e;
    for (std::size_t v : {0, 5, 11}) e.moved.push_back({v, Vec3(V0[3 * v], V0[3 * v + 1], V0[3 * v + 2])});
    const auto g = synchronize(m.tape, m.topology(), P0, e, ObjectiveConfig{});
    REQUIRE(g.options.size() == 1);
    CHECK(relative_distance(g.options[0].P, P0) <= 1e-6);
    CHECK(g.options[0].e_edit <= 1e-12);
    CHECK(g.options[0].merged.size() == ObjectiveConfig{}.enabled.size());
}

TEST_CASE("box pull widens the box") {
    const auto m = load_bundled("box.dcad");
    const auto req = bundled_edit("box_pull.json");
    const auto g = synchronize(m.tape, m.topology(), m.initial_params(), req.edit, req.config);
    REQUIRE(g.runs.size() == 6);
    for (const auto& r : g.runs) {
        CHECK(r.usable(SyncOptions{}));
        CHECK(std::abs(r.result.P[0] - 3.0) <= 1e-4);
    }
    REQUIRE(g.options.size() == 1);
    CHECK(g.options[0].merged.size() == 6);
    CHECK(g.options[0].P[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(g.options[0].P[2] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("gallery is sorted, deduplicated and topology preserving") {
    for (const std::string name : {"column", "box_depth", "dresser"}) {
        CAPTURE(name);
        const auto m = load_bundled(name + ".dcad");
        const std::string edit = name == "column" ? "column_shift.json"
                               : name == "box_depth" ? "box_depth_widen.json"
                                                     : "dresser_raise_top.json";
        const auto req = bundled_edit(edit);
        const auto g = synchronize(m.tape, m.topology(), m.initial_params(), req.edit, req.config);
        REQUIRE_FALSE(g.options.empty());
        SyncOptions opt;
        for (std::size_t i = 0; i < g.options.size(); ++i) {
            const auto& o = g.options[i];
            if (i > 0) CHECK(g.options[i - 1].e_edit <= o.e_edit);
            for (std::size_t j = 0; j < i; ++j) CHECK(relative_distance(g.options[j].P, o.P) >= opt.dedup_threshold);
            for (double c : m.constraint_values(o.P)) CHECK(c >= -1e-6);
            CHECK(o.V.size() == 3 * m.topology().num_vertices);
            CHECK(o.V == m.positions(o.P));
        }
        std::size_t usable = 0, merged = 0;
        for (const auto& r : g.runs) usable += r.usable(opt) ? 1 : 0;
        for (const auto& o : g.options) merged += o.merged.size();
        CHECK(merged == usable);
    }
}

TEST_CASE("applying an option is a fixpoint") {
    const auto m = load_bundled("box_depth.dcad");
    const auto req = bundled_edit("box_depth_widen.json");
    const auto g = synchronize(m.tape, m.topology(), m.initial_params(), req.edit, req.config);
    REQUIRE_FALSE(g.options.empty());
    for (std::size_t k = 0; k < g.options.size(); ++k) {
        const auto applied = apply_option(g, k);
        CHECK(applied.P == g.options[k].P);
        // Identity edit from the applied option returns it.
        EditSpec same;
        for (const auto& mv : req.edit.moved)
            same.moved.push_back({mv.vid, Vec3(applied.V[3 * mv.vid], applied.V[3 * mv.vid + 1],
                                               applied.V[3 * mv.vid + 2])});
        const auto again = synchronize(m.tape, m.topology(), applied.P, same, ObjectiveConfig{});
        REQUIRE(again.options.size() == 1);
        CHECK(relative_distance(again.options[0].P, applied.P) <= 1e-6);
    }
    CHECK_THROWS_AS(apply_option(g, g.options.size()), Error);
}

TEST_CASE("box depth widen keeps volume under vol") {
    const auto m = load_bundled("box_depth.dcad");
    const auto req = bundled_edit("box_depth_widen.json");
    const auto g = synchronize(m.tape, m.topology(), m.initial_params(), req.edit, req.config);
    const auto* vol = option_for(g, ObjectiveId::Vol);
    REQUIRE(vol != nullptr);
    CHECK(vol->e_edit <= 1e-4);
    const double v0 = 1.0, v = vol->P[0] * vol->P[1] * vol->P[2];
    CHECK(std::abs(v - v0) / v0 <= 0.01);
    const auto* edit = option_for(g, ObjectiveId::Edit);
    REQUIRE(edit != nullptr);
    CHECK(edit->P[0] == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("ARAP alternation does not increase the energy") {
    const auto m = load_bundled("bracket.dcad");
    const auto P0 = m.initial_params();
    const auto V0 = m.positions(P0);
    EditSpec e;
    e.moved.push_back({5, Vec3(V0[15] + 0.2, V0[16], V0[17] + 0.1)});
    ObjectiveConfig config;
    config.enabled = {ObjectiveId::Arap};
    const auto g = synchronize(m.tape, m.topology(), P0, e, config);
    REQUIRE(g.runs.size() == 1);
    const auto& run = g.runs[0];
    REQUIRE_FALSE(run.arap_trace.empty());
    for (const auto& stage : run.arap_trace) {
        CHECK(stage.size() <= static_cast<std::size_t>(config.arap_max_alternations));
        for (std::size_t i = 1; i < stage.size(); ++i) CHECK(stage[i] <= stage[i - 1] + 1e-9);
    }
}

TEST_CASE("column: bh keeps the rings aligned, baseline does not") {
    const auto m = load_bundled("column.dcad");
    const auto req = bundled_edit("column_shift.json");
    const auto P0 = m.initial_params();
    ObjectiveConfig config;
    config.enabled = {ObjectiveId::Edit, ObjectiveId::Bh};
    const auto g = synchronize(m.tape, m.topology(), P0, req.edit, config);
    const auto* bh = option_for(g, ObjectiveId::Bh);
    REQUIRE(bh != nullptr);
    // Shared base/capital offset and four shaft offsets all move by t/2.
    for (const char* p : {"sx", "ax", "bx", "cx", "dx"}) {
        CAPTURE(p);
        CHECK(bh->P[static_cast<std::size_t>(m.param_index(p))] == doctest::Approx(0.2).epsilon(1e-5));
    }
    for (const char* p : {"sy", "ay", "by", "cy", "dy"})
        CHECK(std::abs(bh->P[static_cast<std::size_t>(m.param_index(p))]) <= 1e-5);

    const auto base = project_then_fit_baseline(m.tape, m.topology(), P0, req.edit);
    CHECK(base.fit.status == OptStatus::Converged);
    CHECK(base.free_positions.size() == 3 * m.topology().num_vertices);
    // The free deformation honors the targets exactly.
    for (const auto& mv : req.edit.moved)
        for (int k = 0; k < 3; ++k)
            CHECK(base.free_positions[3 * mv.vid + static_cast<std::size_t>(k)] ==
                  doctest::Approx(mv.target[k]).epsilon(1e-9));
    for (std::size_t v : req.edit.fixed)
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(base.free_positions[3 * v + k] == doctest::Approx(m.positions(P0)[3 * v + k]).epsilon(1e-9));
}

TEST_CASE("baseline with an identity edit returns P0") {
    const auto m = load_bundled("bracket.dcad");
    const auto P0 = m.initial_params();
    const auto V0 = m.positions(P0);
    EditSpec e;
    e.moved.push_back({3, Vec3(V0[9], V0[10], V0[11])});
    const auto base = project_then_fit_baseline(m.tape, m.topology(), P0, e);
    CHECK(relative_distance(base.P, P0) <= 1e-6);
}

TEST_CASE("edit JSON round trip and errors") {
    const auto req = bundled_edit("column_shift.json");
    const auto back = parse_edit_request(to_json(req));
    CHECK(back.edit.moved.size() == req.edit.moved.size());
    CHECK(back.edit.fixed == req.edit.fixed);
    CHECK_THROWS_AS(parse_edit_request(json::parse(R"({"v":1,"moved":[{"vid":-1,"target":[0,0,0]}]})")), EditError);
    CHECK_THROWS_AS(parse_edit_request(json::parse(R"({"v":1,"moved":[{"vid":1,"target":[0,0]}]})")), EditError);
    CHECK_THROWS_AS(parse_edit_request(json::parse(R"({"v":1,"moved":[],"objectives":["nope"]})")), EditError);
    EditSpec dup;
    dup.moved.push_back({1, Vec3::Zero()});
    dup.fixed.push_back(1);
    CHECK_THROWS_AS(dup.check(8), EditError);
}
