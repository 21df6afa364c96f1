#include <gtest/gtest.h>

#include "world.hpp"
#include "vtank/error.hpp"
#include "vtank/io.hpp"

using namespace vtank;
using testkit::World;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

}  // namespace

TEST(Catalogue, RegistrationNeedsApproval) {
  World w;
  auto u = w.cat->register_user("dave", "Dave", "secret");
  EXPECT_EQ(code_of([&] { w.cat->authenticate("dave", "secret"); }), Errc::Unauthenticated);
  w.cat->approve_user(w.admin, u.id);
  EXPECT_EQ(w.cat->authenticate("dave", "secret").id, u.id);
  EXPECT_EQ(code_of([&] { w.cat->authenticate("dave", "wrong"); }), Errc::Unauthenticated);
  EXPECT_EQ(code_of([&] { w.cat->register_user("dave", "", "x"); }), Errc::DuplicateName);
  EXPECT_EQ(code_of([&] { w.cat->approve_user(w.alice, u.id); }), Errc::NotAuthorized);
}

TEST(Catalogue, OrgNamesUnique) {
  World w;
  EXPECT_EQ(code_of([&] { w.cat->create_org(w.admin, "A"); }), Errc::DuplicateName);
  EXPECT_EQ(code_of([&] { w.cat->create_org(w.alice, "C"); }), Errc::NotAuthorized);
}

TEST(Catalogue, IdsArePrefixedSequences) {
  World w;
  EXPECT_EQ(w.org_a.id, "org-000001");
  EXPECT_EQ(w.org_b.id, "org-000002");
  EXPECT_EQ(w.machine.id, "machine-000001");
}

TEST(Catalogue, GeometryLifecycle) {
  World w;
  auto g = w.cat->create_geometry(w.alice, w.org_a.id, "cube", testkit::ascii_stl(testkit::unit_cube()), "cube.stl");
  EXPECT_EQ(g.validation, GeometryValidation::Pending);
  auto v = w.cat->validate_geometry(g.id);
  EXPECT_EQ(v.validation, GeometryValidation::Valid);
  ASSERT_TRUE(v.bbox);
  EXPECT_EQ(v.bbox->min, (Vec3{0, 0, 0}));
  EXPECT_EQ(v.bbox->max, (Vec3{1, 1, 1}));
  EXPECT_TRUE(w.blobs->exists(v.preview_ref));
  // Re-running is a no-op once decided.
  auto again = w.cat->validate_geometry(g.id);
  EXPECT_EQ(Json(again), Json(v));

  EXPECT_EQ(code_of([&] { w.cat->create_geometry(w.bob, w.org_a.id, "x", "solid", "x.stl"); }), Errc::NotAuthorized);
  EXPECT_EQ(code_of([&] { w.cat->create_geometry(w.alice, w.org_a.id, "cube", "solid", "x.stl"); }),
            Errc::DuplicateName);
  // Geometries are organization-private.
  EXPECT_EQ(code_of([&] { w.cat->get_geometry(w.bob, g.id); }), Errc::NotFound);
  EXPECT_EQ(w.cat->list_geometries(w.bob).size(), 0u);
  EXPECT_EQ(w.cat->list_geometries(w.alice).size(), 1u);
}

TEST(Catalogue, OpenBoxIsInvalid) {
  World w;
  auto m = testkit::unit_cube();
  m.triangles.resize(10);  // drop the x = hi face
  auto g = w.cat->create_geometry(w.alice, w.org_a.id, "open", testkit::ascii_stl(m), "open.stl");
  auto v = w.cat->validate_geometry(g.id);
  EXPECT_EQ(v.validation, GeometryValidation::Invalid);
  EXPECT_EQ(v.report.at("boundary_edge_count").get<int>(), 4);
}

TEST(Catalogue, GarbageUploadIsInvalid) {
  World w;
  auto g = w.cat->create_geometry(w.alice, w.org_a.id, "junk", "not a mesh at all", "junk.stl");
  auto v = w.cat->validate_geometry(g.id);
  EXPECT_EQ(v.validation, GeometryValidation::Invalid);
  EXPECT_FALSE(v.report.at("messages").empty());
}

TEST(Catalogue, CreateSimulationChecks) {
  World w;
  auto g = w.valid_geometry(w.alice, w.org_a.id);
  auto s = w.cat->create_simulation(w.alice, w.draft(w.org_a.id, g.id));
  EXPECT_EQ(s.status(), SimStatus::Created);
  ASSERT_EQ(s.status_history.size(), 1u);
  EXPECT_EQ(s.status_history[0].step, 0);

  // Machine outside the setup's supported set.
  MachineConfig other;
  other.name = "other";
  other.root_folder = "/tmp/other";
  other.enabled = true;
  other = w.cat->add_machine(w.admin, other);
  w.cat->grant_machine(w.admin, w.org_a.id, other.id);
  auto d = w.draft(w.org_a.id, g.id, "x");
  d.machine_id = other.id;
  EXPECT_EQ(code_of([&] { w.cat->create_simulation(w.alice, d); }), Errc::NotAuthorized);

  // Not a member.
  EXPECT_EQ(code_of([&] { w.cat->create_simulation(w.bob, w.draft(w.org_a.id, g.id, "y")); }), Errc::NotAuthorized);
  // Geometry from another organization.
  auto gb = w.valid_geometry(w.bob, w.org_b.id);
  EXPECT_EQ(code_of([&] { w.cat->create_simulation(w.alice, w.draft(w.org_a.id, gb.id, "z")); }),
            Errc::NotAuthorized);

  d = w.draft(w.org_a.id, g.id, "bad");
  d.params.mass = -5;
  try {
    w.cat->create_simulation(w.alice, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Validation);
    EXPECT_NE(std::string(e.what()).find("mass"), std::string::npos);
  }

  auto pending = w.cat->create_geometry(w.alice, w.org_a.id, "pending", testkit::ascii_stl(testkit::unit_cube()), "");
  EXPECT_EQ(code_of([&] { w.cat->create_simulation(w.alice, w.draft(w.org_a.id, pending.id, "p")); }),
            Errc::GeometryNotValid);

  w.cat->set_machine_enabled(w.admin, w.machine.id, false);
  EXPECT_EQ(code_of([&] { w.cat->create_simulation(w.alice, w.draft(w.org_a.id, g.id, "off")); }), Errc::Validation);
}

TEST(Catalogue, RbacMatrix) {
  World w;
  auto ga = w.valid_geometry(w.alice, w.org_a.id);
  auto gb = w.valid_geometry(w.bob, w.org_b.id);
  struct Rec {
    SimulationRecord sim;
    bool is_public;
  };
  std::vector<Rec> recs;
  for (auto vis : {Visibility::Private, Visibility::Public}) {
    recs.push_back({w.cat->create_simulation(w.alice, w.draft(w.org_a.id, ga.id, "a", vis)), vis == Visibility::Public});
    recs.push_back({w.cat->create_simulation(w.bob, w.draft(w.org_b.id, gb.id, "b", vis)), vis == Visibility::Public});
  }
  auto check_all = [&] {
    for (const User* u : {&w.alice, &w.bob, &w.carol}) {
      for (const auto& r : recs) {
        auto cur = *w.cat->find_simulation(r.sim.id);
        bool expect = testkit::rbac_oracle(u->approved, u->member_of(cur.owner_org_id), r.is_public, cur.deleted);
        bool got = true;
        try {
          auto s = w.cat->get_simulation(*u, r.sim.id);
          if (cur.deleted) EXPECT_EQ(s.status(), SimStatus::Deleted);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), Errc::NotFound);
          got = false;
        }
        EXPECT_EQ(got, expect) << u->login << " " << r.sim.id;
      }
    }
  };
  check_all();
  w.cat->soft_delete(w.alice, recs[2].sim.id);  // A public
  w.cat->soft_delete(w.bob, recs[1].sim.id);    // B private
  check_all();

  User pending = w.cat->register_user("eve", "", "pw");
  for (const auto& r : recs) EXPECT_EQ(code_of([&] { w.cat->get_simulation(pending, r.sim.id); }), Errc::NotFound);
}

TEST(Catalogue, SoftDelete) {
  World w;
  auto g = w.valid_geometry(w.alice, w.org_a.id);
  auto pub = w.cat->create_simulation(w.alice, w.draft(w.org_a.id, g.id, "p", Visibility::Public));
  auto priv = w.cat->create_simulation(w.alice, w.draft(w.org_a.id, g.id, "q"));
  EXPECT_EQ(code_of([&] { w.cat->soft_delete(w.bob, pub.id); }), Errc::NotAuthorized);
  EXPECT_EQ(code_of([&] { w.cat->soft_delete(w.bob, priv.id); }), Errc::NotFound);
  EXPECT_EQ(w.cat->soft_delete(w.alice, pub.id).status(), SimStatus::Deleted);
  EXPECT_EQ(w.cat->soft_delete(w.alice, pub.id).status(), SimStatus::Deleted);
  EXPECT_EQ(w.cat->get_simulation(w.alice, pub.id).status_history.size(), 1u);
}

TEST(Catalogue, ListenerSeesEveryWrite) {
  World w;
  int calls = 0;
  w.cat->on_simulation_changed([&](const SimulationRecord&) { ++calls; });
  auto g = w.valid_geometry(w.alice, w.org_a.id);
  auto s = w.cat->create_simulation(w.alice, w.draft(w.org_a.id, g.id));
  EXPECT_EQ(calls, 1);
  w.cat->update_simulation(s.id, [](SimulationRecord&) { return false; });
  EXPECT_EQ(calls, 1);
  w.cat->soft_delete(w.alice, s.id);
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(code_of([&] { w.cat->update_simulation("sim-999999", [](SimulationRecord&) { return true; }); }),
            Errc::UnknownSimulation);
}

TEST(Catalogue, DurableAcrossRestart) {
  testkit::TempDir dir("durable");
  ManualClock clock;
  BlobStore blobs(dir.path / "data");
  std::vector<std::pair<std::string, std::string>> before;
  std::string sim_id;
  {
    SqliteStore store(dir.path / "meta.db");
    Catalogue cat(store, blobs, clock);
    auto admin = User::system();
    auto org = cat.create_org(admin, "A");
    auto u = cat.register_user("u", "", "pw");
    cat.approve_user(admin, u.id);
    cat.add_member(admin, u.id, org.id);
    auto g = cat.create_geometry(cat.get_user(u.id), org.id, "g", testkit::ascii_stl(testkit::unit_cube()), "g.stl");
    cat.validate_geometry(g.id);
    for (RecordKind k : kAllRecordKinds) {
      for (const auto& doc : store.list(k)) before.emplace_back(to_string(k), doc.dump());
    }
  }
  SqliteStore store(dir.path / "meta.db");
  std::vector<std::pair<std::string, std::string>> after;
  for (RecordKind k : kAllRecordKinds) {
    for (const auto& doc : store.list(k)) after.emplace_back(to_string(k), doc.dump());
  }
  EXPECT_FALSE(before.empty());
  EXPECT_EQ(before, after);
  // Sequences continue rather than restart.
  Catalogue cat(store, blobs, clock);
  EXPECT_EQ(cat.create_org(User::system(), "B").id, "org-000002");
}

TEST(Catalogue, InsertSimulationsAllOrNone) {
  World w;
  auto g = w.valid_geometry(w.alice, w.org_a.id);
  auto base = w.cat->create_simulation(w.alice, w.draft(w.org_a.id, g.id));
  std::vector<SimulationRecord> batch(3, base);
  for (auto& r : batch) r.id.clear();
  auto stored = w.cat->insert_simulations(batch);
  EXPECT_EQ(stored.size(), 3u);
  EXPECT_EQ(w.cat->all_simulations().size(), 4u);
}

TEST(Catalogue, ConsistencyCheck) {
  World w;
  auto alive = [](const SimulationRecord&) -> std::optional<bool> { return false; };
  EXPECT_TRUE(w.cat->consistency_check(alive).empty());

  auto g = w.valid_geometry(w.alice, w.org_a.id);
  auto s = w.cat->create_simulation(w.alice, w.draft(w.org_a.id, g.id));
  w.cat->update_simulation(s.id, [](SimulationRecord& r) {
    r.status_history.push_back({1, "Submitted", 0});
    r.job_id = "42";
    return true;
  });
  auto a = w.cat->consistency_check(alive);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].kind, "RUNNING_WITHOUT_JOB");
  EXPECT_EQ(a[0].record_id, s.id);
  // Unreachable machine: no verdict.
  EXPECT_TRUE(w.cat->consistency_check([](const SimulationRecord&) { return std::optional<bool>(); }).empty());

  std::filesystem::remove(w.blobs->path_of(g.file_ref));
  auto b = w.cat->consistency_check([](const SimulationRecord&) { return std::optional<bool>(true); });
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].kind, "DANGLING_GEOMETRY");

  w.cat->update_simulation(s.id, [](SimulationRecord& r) {
    r.results_ref = std::string(64, 'a');
    return true;
  });
  auto c = w.cat->consistency_check([](const SimulationRecord&) { return std::optional<bool>(true); });
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[1].kind, "ORPHANED_RESULTS");
}

TEST(Catalogue, HelpRequests) {
  World w;
  auto g = w.valid_geometry(w.alice, w.org_a.id);
  auto s = w.cat->create_simulation(w.alice, w.draft(w.org_a.id, g.id));
  EXPECT_EQ(code_of([&] { w.cat->create_help_request(w.alice, "SIMULATION", s.id, "  "); }), Errc::EmptyText);
  EXPECT_EQ(code_of([&] { w.cat->create_help_request(w.bob, "SIMULATION", s.id, "help"); }), Errc::NotFound);
  auto h = w.cat->create_help_request(w.alice, "GEOMETRY", g.id, "why?");
  EXPECT_EQ(w.cat->list_help_requests().size(), 1u);
  EXPECT_EQ(w.cat->list_help_requests()[0].id, h.id);
}

TEST(Catalogue, SimSetupDictionaryMustBeDense) {
  World w;
  SimSetupConfig s;
  s.name = "gappy";
  s.statuses_dictionary = {{0, "a"}, {2, "c"}};
  EXPECT_EQ(code_of([&] { w.cat->add_simsetup(w.admin, s); }), Errc::Validation);
  s.statuses_dictionary = {{0, "a"}, {1, ""}};
  EXPECT_EQ(code_of([&] { w.cat->add_simsetup(w.admin, s); }), Errc::Validation);
}

TEST(Catalogue, RecordsRoundTripJson) {
  World w;
  auto g = w.valid_geometry(w.alice, w.org_a.id);
  auto s = w.cat->create_simulation(w.alice, w.draft(w.org_a.id, g.id, "r", Visibility::Public));
  Json j = s;
  EXPECT_EQ(Json(j.get<SimulationRecord>()), j);
  Json k = w.setup;
  EXPECT_EQ(Json(k.get<SimSetupConfig>()), k);
  Json m = w.machine;
  EXPECT_EQ(Json(m.get<MachineConfig>()), m);
}
