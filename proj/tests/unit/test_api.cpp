#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "api_rig.hpp"
#include "vtank/io.hpp"
#include "vtank/results.hpp"

namespace vtank {
namespace {

using testkit::ApiRig;
using testkit::box_params;
using testkit::json_of;
namespace fs = std::filesystem;

// One live service for the whole suite; users and the LOCAL machine are
// expensive to set up, and every test makes its own records.
class Api : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    rig = new ApiRig();
    cube = rig->upload("alice", rig->org_a.id, testkit::ascii_stl(testkit::unit_cube()), "cube");
    cube_b = rig->upload("bob", rig->org_b.id, testkit::ascii_stl(testkit::unit_cube()), "cube");
  }
  static void TearDownTestSuite() {
    delete rig;
    rig = nullptr;
  }

  static std::string new_sim(const std::string& name, const std::string& visibility = "PRIVATE") {
    return rig->create("alice", rig->draft(rig->org_a.id, cube, name, 0, box_params(), visibility));
  }

  static std::string completed_sim(const std::string& name, double velocity = 2.0) {
    std::string id = rig->create("alice", rig->draft(rig->org_a.id, cube, name, 0, box_params(velocity)));
    EXPECT_EQ(rig->post("alice", "/simulations/" + id + "/submit")->status, 202);
    EXPECT_TRUE(rig->run_all({id}));
    return id;
  }

  static std::string error_code(const httplib::Result& r) { return json_of(r)["error"].value("code", ""); }

  static inline ApiRig* rig = nullptr;
  static inline std::string cube, cube_b;
};

TEST_F(Api, RequiresSession) {
  auto c = rig->client();
  auto r = c.Get("/simulations");
  EXPECT_EQ(r->status, 401);
  EXPECT_EQ(error_code(r), "UNAUTHENTICATED");
  r = c.Get("/simulations", {{"Authorization", "Bearer nope"}});
  EXPECT_EQ(r->status, 401);
  r = c.Post("/auth/login", Json{{"login", "alice"}, {"password", "wrong"}}.dump(), "application/json");
  EXPECT_EQ(r->status, 401);
  r = rig->get("alice", "/auth/me");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json_of(r)["login"], "alice");
}

TEST_F(Api, LogoutEndsSession) {
  auto r = rig->client().Post("/auth/login", Json{{"login", "carol"}, {"password", "pw-carol"}}.dump(),
                              "application/json");
  std::string token = json_of(r)["token"];
  httplib::Headers h = {{"Authorization", "Bearer " + token}};
  EXPECT_EQ(rig->client().Get("/auth/me", h)->status, 200);
  EXPECT_EQ(rig->client().Post("/auth/logout", h, "", "application/json")->status, 204);
  EXPECT_EQ(rig->client().Get("/auth/me", h)->status, 401);
}

TEST_F(Api, UnknownEndpointIsJson404) {
  auto r = rig->get("alice", "/nope");
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(error_code(r), "NOT_FOUND");
}

TEST_F(Api, GeometryUploadValidatesAndServesPreview) {
  auto g = json_of(rig->get("alice", "/geometries/" + cube));
  EXPECT_EQ(g["validation"], "VALID");
  auto prev = rig->get("alice", "/geometries/" + cube + "/preview");
  EXPECT_EQ(prev->status, 200);
  EXPECT_FALSE(prev->body.empty());
  EXPECT_EQ(rig->get("alice", "/geometries/" + cube + "/file")->body, testkit::ascii_stl(testkit::unit_cube()));
  // Geometries are private to their organization.
  EXPECT_EQ(rig->get("bob", "/geometries/" + cube)->status, 404);
}

TEST_F(Api, BrokenGeometryIsRejectedWithReport) {
  auto m = testkit::unit_cube();
  m.triangles.pop_back();
  std::string id = rig->upload("alice", rig->org_a.id, testkit::ascii_stl(m), "holey");
  auto g = json_of(rig->get("alice", "/geometries/" + id));
  EXPECT_EQ(g["validation"], "INVALID");
  auto r = rig->post("alice", "/simulations", rig->draft(rig->org_a.id, id, "on-holey"));
  EXPECT_EQ(r->status, 409);
  EXPECT_EQ(error_code(r), "GEOMETRY_NOT_VALID");
}

TEST_F(Api, CreateValidatesParameters) {
  PhysicalParameters p = box_params();
  p.mass = -1;
  auto r = rig->post("alice", "/simulations", rig->draft(rig->org_a.id, cube, "neg", 0, p));
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(error_code(r), "VALIDATION");
  r = rig->post("alice", "/simulations", Json{{"name", "x"}});
  EXPECT_EQ(r->status, 400);
  r = rig->client().Post("/simulations", rig->as("alice"), "{not json", "application/json");
  EXPECT_EQ(r->status, 400);
}

TEST_F(Api, SubmitThenResubmitConflicts) {
  std::string id = new_sim("submit-twice");
  auto r = rig->post("alice", "/simulations/" + id + "/submit");
  ASSERT_EQ(r->status, 202);
  EXPECT_EQ(json_of(r)["sim_id"], id);
  // While the first request is queued a repeat joins it.
  auto again = rig->post("alice", "/simulations/" + id + "/submit");
  EXPECT_EQ(again->status, 202);
  EXPECT_EQ(json_of(again)["task_id"], json_of(r)["task_id"]);
  ASSERT_TRUE(rig->run_all({id}));
  auto s = json_of(rig->get("alice", "/simulations/" + id));
  EXPECT_EQ(s["status"], "Completed");
  EXPECT_FALSE(s.contains("callback_token"));
  EXPECT_EQ(rig->post("alice", "/simulations/" + id + "/submit")->status, 409);
}

TEST_F(Api, CompletedRunServesResults) {
  std::string id = completed_sim("results");
  auto list = json_of(rig->get("alice", "/simulations/" + id + "/results"))["artifacts"];
  EXPECT_NE(std::find(list.begin(), list.end(), "summary.csv"), list.end());
  EXPECT_NE(std::find(list.begin(), list.end(), "pressure.vtk"), list.end());
  auto csv = rig->get("alice", "/simulations/" + id + "/results/summary.csv");
  ASSERT_EQ(csv->status, 200);
  EXPECT_EQ(csv->body.rfind("name;value;unit\n", 0), 0u);
  EXPECT_EQ(rig->get("alice", "/simulations/" + id + "/results/nope.csv")->status, 404);
  auto s = json_of(rig->get("alice", "/simulations/" + id));
  EXPECT_GT(s["summary"].value("wsa", 0.0), 2.0);
}

TEST_F(Api, StatusCallbacksUseSimulationToken) {
  std::string id = completed_sim("callbacks");
  const std::string token = rig->platform->catalogue().find_simulation(id)->callback_token;
  auto c = rig->client();
  // A late report after completion is accepted and changes nothing.
  auto r = c.Post("/simulations/" + id + "/status", {{"Authorization", "Bearer " + token}},
                  Json{{"step", 3}, {"message", "late"}}.dump(), "application/json");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json_of(r)["last_step"], 6);
  EXPECT_EQ(json_of(r)["status"], "Completed");
  // Session tokens and other simulations' tokens do not work.
  r = c.Post("/simulations/" + id + "/status", rig->as("alice"), Json{{"step", -4}}.dump(), "application/json");
  EXPECT_EQ(r->status, 401);
  r = c.Post("/simulations/" + id + "/status", {{"Authorization", "Bearer " + token}}, Json{{"step", "x"}}.dump(),
             "application/json");
  EXPECT_EQ(r->status, 400);
  r = c.Post("/simulations/" + id + "/notify", {{"Authorization", "Bearer " + token}},
             Json{{"event", "start"}, {"message", "m"}}.dump(), "application/json");
  EXPECT_EQ(r->status, 204);
}

TEST_F(Api, InternalErrorWritesOneTicket) {
  // Blobs are shared by content; a velocity no other test uses keeps the
  // damage to this run.
  std::string id = completed_sim("ticket", 1.75);
  const auto& blobs = rig->platform->blobs();
  std::string manifest = blobs.get(*rig->platform->catalogue().find_simulation(id)->results_ref);
  std::string digest;
  for (const auto& e : results::parse_manifest(manifest)) {
    if (e.path == "results/summary.csv") digest = e.sha256;
  }
  ASSERT_FALSE(digest.empty());
  {
    std::ofstream f(blobs.path_of(digest), std::ios::app);
    f << "tampered";
  }
  const fs::path tickets = rig->platform->config().data_dir / "tickets";
  auto count = [&] {
    if (!fs::exists(tickets)) return 0;
    return static_cast<int>(std::distance(fs::directory_iterator(tickets), fs::directory_iterator()));
  };
  const int before = count();
  auto r = rig->get("alice", "/simulations/" + id + "/results/summary.csv");
  ASSERT_EQ(r->status, 500);
  Json err = json_of(r)["error"];
  EXPECT_EQ(err["code"], "INTEGRITY");
  EXPECT_EQ(count(), before + 1);
  Json ticket = Json::parse(read_file(tickets / (err["ticket"].get<std::string>() + ".json")));
  EXPECT_EQ(ticket["path"], "/simulations/" + id + "/results/summary.csv");
  EXPECT_EQ(ticket["user_id"], rig->users["alice"].id);
  // Other artifacts are unaffected.
  EXPECT_EQ(rig->get("alice", "/simulations/" + id + "/results/manifest.json")->status, 200);
}

TEST_F(Api, HelpRequestNotifiesSupport) {
  std::string id = new_sim("help");
  auto r = rig->post("alice", "/simulations/" + id + "/help", {{"text", "why is my run slow?"}});
  ASSERT_EQ(r->status, 201);
  std::string help_id = json_of(r)["id"];
  std::string log = read_file(rig->platform->config().data_dir / "notifications.jsonl");
  EXPECT_NE(log.find("help-" + help_id), std::string::npos);
  EXPECT_NE(log.find("why is my run slow?"), std::string::npos);

  r = rig->post("alice", "/simulations/" + id + "/help", {{"text", "   "}});
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(error_code(r), "EMPTY_TEXT");
  EXPECT_EQ(rig->post("bob", "/simulations/" + id + "/help", {{"text", "hi"}})->status, 404);
  EXPECT_EQ(rig->post("alice", "/geometries/" + cube + "/help", {{"text", "hull question"}})->status, 201);
  EXPECT_EQ(rig->post("bob", "/geometries/" + cube + "/help", {{"text", "hull question"}})->status, 404);
}

TEST_F(Api, IdempotencyKeyReplaysResponse) {
  auto c = rig->client();
  auto h = rig->as("alice");
  h.emplace("Idempotency-Key", "create-once");
  const std::string body = rig->draft(rig->org_a.id, cube, "idem").dump();
  auto first = c.Post("/simulations", h, body, "application/json");
  auto second = c.Post("/simulations", h, body, "application/json");
  ASSERT_EQ(first->status, 201);
  EXPECT_EQ(second->status, 201);
  EXPECT_EQ(first->body, second->body);
  EXPECT_EQ(second->get_header_value("Idempotent-Replay"), "true");
  // Without the key the same body makes a second record.
  auto third = rig->post("alice", "/simulations", Json::parse(body));
  ASSERT_EQ(third->status, 201);
  EXPECT_NE(json_of(third)["id"], json_of(first)["id"]);
  EXPECT_FALSE(third->has_header("Idempotent-Replay"));
}

TEST_F(Api, AdminEndpointsAreGated) {
  for (bool checks : {true, false}) {
    EXPECT_EQ(rig->post("alice", "/organizations", {{"name", "C"}}, checks)->status, 404);
    EXPECT_EQ(rig->get("alice", "/users", checks)->status, 404);
    EXPECT_EQ(rig->post("alice", "/machines", {{"name", "m"}, {"root_folder", "/x"}}, checks)->status, 404);
    EXPECT_EQ(rig->post("alice", "/machines/" + rig->machine.id + "/disable", {}, checks)->status, 404);
  }
  EXPECT_EQ(rig->get("alice", "/monitor/consistency")->status, 404);
  auto r = rig->post("admin", "/machines",
                     {{"name", "cluster"}, {"root_folder", "/scratch"}, {"scheduler", "SLURM"}, {"address", "hpc"}});
  ASSERT_EQ(r->status, 201);
  EXPECT_EQ(json_of(r)["enabled"], false);
  auto machines = json_of(rig->get("alice", "/machines"));
  ASSERT_EQ(machines.size(), 1u);  // only the granted LOCAL machine
  EXPECT_EQ(machines[0]["id"], rig->machine.id);
  EXPECT_EQ(json_of(rig->get("admin", "/monitor/consistency"))["anomalies"].size(), 0u);
  auto health = json_of(rig->get("alice", "/monitor/health"));
  EXPECT_EQ(health["status"], "ok");
}

TEST_F(Api, VisibilityMatrixSameWithAndWithoutApiChecks) {
  // alice's private and public runs, a deleted public one and bob's private one.
  std::vector<std::pair<std::string, std::string>> recs = {
      {new_sim("m-private"), "A private"},
      {new_sim("m-public", "PUBLIC"), "A public"},
      {new_sim("m-deleted", "PUBLIC"), "A deleted"},
      {rig->create("bob", rig->draft(rig->org_b.id, cube_b, "m-bob")), "B private"},
  };
  ASSERT_EQ(rig->client().Delete("/simulations/" + recs[2].first, rig->as("alice"))->status, 200);
  for (const std::string login : {"alice", "bob", "carol"}) {
    const User& u = rig->users[login];
    for (const auto& [id, what] : recs) {
      auto s = *rig->platform->catalogue().find_simulation(id);
      bool want = testkit::rbac_oracle(u.approved, u.member_of(s.owner_org_id), s.visibility == Visibility::Public,
                                       s.deleted);
      for (bool checks : {true, false}) {
        auto r = rig->get(login, "/simulations/" + id, checks);
        EXPECT_EQ(r->status, want ? 200 : 404) << login << " " << what << " checks=" << checks;
        bool may_write = u.member_of(s.owner_org_id);
        auto del = rig->client(checks).Delete("/simulations/" + id + "-nope", rig->as(login));
        EXPECT_EQ(del->status, 404);
        if (!may_write) {
          EXPECT_EQ(rig->client(checks).Delete("/simulations/" + id, rig->as(login))->status, 404)
              << login << " " << what;
          EXPECT_EQ(rig->post(login, "/simulations/" + id + "/submit", {}, checks)->status, 404) << login << " " << what;
        }
      }
    }
  }
}

TEST_F(Api, RangeRunThroughApi) {
  std::string base = new_sim("curve");
  auto r = rig->post("alice", "/simulations/" + base + "/range",
                     {{"parameter", "velocity"}, {"lo", 1.0}, {"hi", 3.0}, {"count", 3}});
  ASSERT_EQ(r->status, 201) << r->body;
  std::vector<std::string> kids;
  Json made = json_of(r);
  for (const auto& k : made["children"]) kids.push_back(k["id"]);
  ASSERT_EQ(kids.size(), 3u);
  EXPECT_EQ(rig->get("alice", "/simulations/" + base + "/family")->status, 409);
  ASSERT_TRUE(rig->run_all(kids));
  auto header = json_of(rig->get("alice", "/simulations/" + base));
  EXPECT_EQ(header["family_status"], "Completed");
  auto pts = json_of(rig->get("alice", "/simulations/" + base + "/family?y=total_drag"))["points"];
  ASSERT_EQ(pts.size(), 3u);
  for (size_t i = 1; i < pts.size(); ++i) {
    EXPECT_LT(pts[i - 1]["x"].get<double>(), pts[i]["x"].get<double>());
    EXPECT_LT(pts[i - 1]["y"].get<double>(), pts[i]["y"].get<double>());
  }
  EXPECT_EQ(rig->post("alice", "/simulations/" + base + "/submit")->status, 409);
}

TEST_F(Api, SearchEndpoints) {
  std::string done = completed_sim("search-done");
  std::string idle = new_sim("search-idle");
  auto r = rig->get("alice", "/search/simulations?name=search-&status=Completed");
  ASSERT_EQ(r->status, 200);
  auto rows = json_of(r);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0]["id"], done);
  EXPECT_EQ(rig->get("alice", "/search/simulations?status=BOGUS")->status, 400);
  EXPECT_EQ(rig->get("alice", "/search/simulations?limit=-1")->status, 400);

  r = rig->post("alice", "/search/brush", {{"sim_ids", Json::array({done, idle})}, {"intervals", Json{{"velocity", Json::array({1.5, 2.5})}}}});
  ASSERT_EQ(r->status, 200) << r->body;
  EXPECT_EQ(json_of(r)["sim_ids"].size(), 2u);
  r = rig->post("alice", "/search/brush", {{"sim_ids", Json::array({done, idle})}, {"intervals", Json{{"velocity", Json::array({3.0, 4.0})}}}});
  EXPECT_EQ(json_of(r)["sim_ids"].size(), 0u);
  r = rig->post("alice", "/search/brush", {{"intervals", Json{{"no_such", Json::array({0, 1})}}}});
  EXPECT_EQ(r->status, 400);
  r = rig->get("alice", "/search/compare?ids=" + done + "," + idle + "&x=velocity&y=wsa");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json_of(r)["points"].size(), 1u);  // only the completed run has wsa
  // bob sees none of alice's private runs.
  EXPECT_EQ(json_of(rig->get("bob", "/search/simulations?name=search-")).size(), 0u);
}

TEST(HttpStatus, ErrorCodesMap) {
  EXPECT_EQ(http_status(Errc::Validation), 400);
  EXPECT_EQ(http_status(Errc::Unauthenticated), 401);
  EXPECT_EQ(http_status(Errc::NotAuthorized), 404);
  EXPECT_EQ(http_status(Errc::Conflict), 409);
  EXPECT_EQ(http_status(Errc::Unreachable), 503);
  EXPECT_EQ(http_status(Errc::Integrity), 500);
  EXPECT_EQ(http_status(Errc::Io), 500);
}

}  // namespace
}  // namespace vtank
