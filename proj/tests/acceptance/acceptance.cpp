// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. An optional argument runs only the criteria whose name
// contains it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "api_rig.hpp"
#include "mock_machine.hpp"
#include "oracles.hpp"
#include "pipeline_check.hpp"
#include "search_oracle.hpp"
#include "shapes.hpp"
#include "templates.hpp"
#include "vtank/log.hpp"
#include "vtank/mesh.hpp"
#include "vtank/scheduler.hpp"
#include "vtank/simsetup.hpp"

using namespace vtank;
using namespace vtank::testkit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Mesh oracle ------------------------------------------------------------------

struct OracleMesh {
  std::string name;
  mesh::TriangleMesh mesh;
  mesh::Attitude attitude;
  bool trusted = false;  // several bodies: the watertightness gate would refuse it
};

/// Prism over a polygon that is star-shaped about `c`, caps fanned from c.
mesh::TriangleMesh star_prism(const std::vector<std::pair<double, double>>& xz, std::pair<double, double> c,
                              double y0, double y1) {
  mesh::TriangleMesh m;
  const auto n = static_cast<std::uint32_t>(xz.size());
  for (auto [x, z] : xz) m.vertices.push_back({x, y0, z});
  for (auto [x, z] : xz) m.vertices.push_back({x, y1, z});
  m.vertices.push_back({c.first, y0, c.second});
  m.vertices.push_back({c.first, y1, c.second});
  const std::uint32_t c0 = 2 * n, c1 = 2 * n + 1;
  for (std::uint32_t k = 0; k < n; ++k) {
    std::uint32_t a = k, b = (k + 1) % n;
    m.triangles.push_back({c0, a, b});
    m.triangles.push_back({c1, n + b, n + a});
    m.triangles.push_back({a, n + a, n + b});
    m.triangles.push_back({a, n + b, b});
  }
  return m;
}

std::vector<OracleMesh> oracle_corpus() {
  std::vector<OracleMesh> c;
  auto add = [&](std::string name, mesh::TriangleMesh m, mesh::Attitude a = {}, bool trusted = false) {
    c.push_back({std::move(name), std::move(m), a, trusted});
  };
  // Cubes and boxes.
  add("unit cube", unit_cube());
  add("flat box", box({-1, -0.5, 0}, {3, 0.5, 0.4}));
  add("tall box", box({0, 0, -2}, {0.3, 0.6, 1}));
  add("offset box", box({10, 20, 5}, {12.5, 21, 6.2}));
  add("trimmed cube", unit_cube(), {0.0, 8.0, {0.5, 0.5, 0.5}});
  add("sunk trimmed box", box({0, -0.4, 0}, {2, 0.4, 0.6}), {-0.15, -5.0, {1.0, 0.0, 0.3}});
  // Prisms.
  add("triangle prism", prism({{0, 0}, {2, 0}, {1, 1.5}}, -0.5, 0.5));
  add("wedge hull", wedge(4.0, 1.2, 0.8));
  add("hexagon prism", prism({{1, 0}, {2, 0}, {2.5, 0.8}, {2, 1.6}, {1, 1.6}, {0.5, 0.8}}, 0, 1.5));
  add("trapezoid prism", prism({{0, 0}, {3, 0}, {2.5, 1}, {0.5, 1}}, -1, 1));
  add("chine section", prism({{0, 0.3}, {0.6, 0}, {1.4, 0}, {2, 0.3}, {2, 1}, {0, 1}}, 0, 6));
  add("heeled hexagon", prism({{1, 0}, {2, 0}, {2.5, 0.8}, {2, 1.6}, {1, 1.6}, {0.5, 0.8}}, 0, 1.5),
      {0.1, 12.0, {1.5, 0.75, 0.8}});
  // Icospheres.
  add("icosphere l1", icosphere(1));
  add("icosphere l2", icosphere(2, 0.7, {0.2, -0.3, 0.5}));
  add("icosphere l3", icosphere(3, 2.0, {5, 5, 1}));
  add("icosphere l3 small", icosphere(3, 0.25));
  add("trimmed icosphere", icosphere(2, 1.0, {0, 0, 0.4}), {0.0, 20.0, {0.3, 0.0, 0.2}});
  // Unions: polygon unions extruded into one closed surface, and disjoint bodies.
  add("L union", star_prism({{0, 0}, {2, 0}, {2, 0.5}, {0.5, 0.5}, {0.5, 2}, {0, 2}}, {0.25, 0.25}, 0, 1));
  add("T union", star_prism({{0.75, 0}, {1.25, 0}, {1.25, 1.5}, {2, 1.5}, {2, 2}, {0, 2}, {0, 1.5}, {0.75, 1.5}},
                            {1.0, 1.75}, -0.5, 0.5));
  add("plus union",
      star_prism({{1, 0}, {2, 0}, {2, 1}, {3, 1}, {3, 2}, {2, 2}, {2, 3}, {1, 3}, {1, 2}, {0, 2}, {0, 1}, {1, 1}},
                 {1.5, 1.5}, 0, 2));
  add("step union", star_prism({{0, 0}, {3, 0}, {3, 1}, {2, 1}, {2, 2}, {1, 2}, {1, 3}, {0, 3}}, {0.5, 0.5}, 0, 1));
  add("trimmed L union",
      star_prism({{0, 0}, {2, 0}, {2, 0.5}, {0.5, 0.5}, {0.5, 2}, {0, 2}}, {0.25, 0.25}, 0, 1),
      {0.0, -10.0, {1.0, 0.5, 0.5}});
  add("two boxes", merged(box({0, 0, 0}, {1, 1, 1}), box({2, 0, 0.3}, {3.5, 0.5, 0.9})), {}, true);
  add("box and sphere", merged(box({0, 0, 0}, {1, 1, 1}), icosphere(2, 0.5, {2.5, 0.5, 0.5})), {}, true);
  add("two spheres", merged(icosphere(2, 0.6, {0, 0, 0.5}), icosphere(2, 0.4, {2, 0, 0.2})), {}, true);
  return c;
}

struct MeshResult {
  double worst = 0.0;
  std::string where;
  std::string error;
};

MeshResult check_oracle_mesh(const OracleMesh& om, std::size_t samples, unsigned seed) {
  MeshResult r;
  try {
    const mesh::TriangleMesh placed = mesh::transformed(om.mesh, om.attitude);
    const auto bb = mesh::bounding_box(placed);
    std::vector<double> waterlines;
    for (double f : {0.1, 0.3, 0.5, 0.7, 0.9}) waterlines.push_back(bb.min.z + f * (bb.max.z - bb.min.z));
    const auto mc = monte_carlo_volumes(placed, samples, waterlines, seed);
    auto note = [&](double got, double want, const std::string& what) {
      double e = std::abs(got - want) / want;
      if (e > r.worst) {
        r.worst = e;
        r.where = om.name + " " + what;
      }
    };
    note(mesh::signed_volume(placed), mc.total, "volume");
    const auto check = om.trusted ? mesh::ClipCheck::Trusted : mesh::ClipCheck::Validate;
    for (std::size_t i = 0; i < waterlines.size(); ++i) {
      auto clip = mesh::clip_below_plane(om.mesh, waterlines[i], om.attitude, check);
      note(clip.submerged_volume, mc.below[i], "waterline " + std::to_string(i + 1));
    }
  } catch (const std::exception& e) {
    r.error = om.name + ": " + e.what();
  }
  return r;
}

Outcome mesh_oracle_suite() {
  const auto corpus = oracle_corpus();
  const std::size_t samples = 216u * 216u * 216u;  // just over 10^7
  std::vector<std::future<MeshResult>> jobs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    jobs.push_back(std::async(std::launch::async, check_oracle_mesh, std::cref(corpus[i]), samples,
                              static_cast<unsigned>(101 + i)));
  }
  MeshResult worst;
  for (auto& j : jobs) {
    MeshResult r = j.get();
    if (!r.error.empty()) return {false, r.error};
    if (r.worst >= worst.worst) worst = r;
  }
  Outcome o;
  o.pass = corpus.size() == 25 && worst.worst <= 0.003;
  o.detail = std::to_string(corpus.size()) + " meshes x (volume + 5 waterlines), worst relative error " +
             fmt("%.2e", worst.worst) + " (" + worst.where + "), limit 3e-3";
  return o;
}

// Watertightness -----------------------------------------------------------------

std::vector<std::pair<std::string, mesh::TriangleMesh>> defect_corpus() {
  std::vector<std::pair<std::string, mesh::TriangleMesh>> c;
  const std::vector<std::pair<std::string, mesh::TriangleMesh>> bases = {
      {"cube", unit_cube()},
      {"box", box({-1, 0, 0}, {2, 0.5, 0.3})},
      {"wedge", wedge(3, 1, 0.6)},
      {"hexagon", prism({{1, 0}, {2, 0}, {2.5, 0.8}, {2, 1.6}, {1, 1.6}, {0.5, 0.8}}, 0, 1.5)},
      {"sphere", icosphere(1)},
  };
  for (const auto& [name, m] : bases) {
    c.push_back({name + " intact", m});

    auto hole = m;  // one missing triangle
    hole.triangles.erase(hole.triangles.begin() + 1);
    c.push_back({name + " hole", hole});

    auto big_hole = m;  // a missing strip
    big_hole.triangles.resize(big_hole.triangles.size() - 3);
    c.push_back({name + " open", big_hole});

    auto flip = m;  // one inverted triangle
    std::swap(flip.triangles[2][0], flip.triangles[2][1]);
    c.push_back({name + " flip", flip});

    auto inside_out = m;  // every triangle inverted
    for (auto& t : inside_out.triangles) std::swap(t[0], t[1]);
    c.push_back({name + " inside-out", inside_out});

    auto dup = m;  // duplicate face
    dup.triangles.push_back(dup.triangles[0]);
    c.push_back({name + " duplicate face", dup});

    // T-junction: split one triangle's edge at its midpoint without
    // splitting the neighbour across that edge.
    auto tj = m;
    const auto t0 = tj.triangles[0];
    const Vec3 mid = (tj.vertices[t0[0]] + tj.vertices[t0[1]]) * 0.5;
    tj.vertices.push_back(mid);
    const auto k = static_cast<std::uint32_t>(tj.vertices.size() - 1);
    tj.triangles[0] = {t0[0], k, t0[2]};
    tj.triangles.push_back({k, t0[1], t0[2]});
    c.push_back({name + " T-junction", tj});

    auto two = merged(m, mesh::translated(m, {10, 0, 0}));  // two bodies
    c.push_back({name + " two bodies", two});
  }
  return c;
}

Outcome watertightness() {
  const auto corpus = defect_corpus();
  int agree = 0, watertight = 0;
  std::string first;
  for (const auto& [name, m] : corpus) {
    const bool got = mesh::validate_topology(m).is_valid;
    const bool want = brute_force_census(m).watertight_outward;
    watertight += want;
    if (got == want) {
      ++agree;
    } else if (first.empty()) {
      first = "; first disagreement: " + name;
    }
  }
  Outcome o;
  o.pass = corpus.size() == 40 && agree == static_cast<int>(corpus.size()) && watertight > 0 &&
           watertight < static_cast<int>(corpus.size());
  o.detail = std::to_string(agree) + "/" + std::to_string(corpus.size()) + " agree with the edge census (" +
             std::to_string(watertight) + " watertight)" + first;
  return o;
}

// Equilibrium --------------------------------------------------------------------

Outcome equilibrium() {
  using namespace simsetup;
  struct BoxCase {
    Vec3 lo, hi;
    double mass;
    double celsius;
  };
  const std::vector<BoxCase> boxes = {
      {{0, 0, 0}, {1, 1, 1}, 500, 15},       {{0, 0, 0}, {1, 1, 1}, 100, 4},
      {{-2, -0.5, 0}, {2, 0.5, 1}, 2500, 20}, {{0, -1, -0.5}, {6, 1, 1.5}, 12000, 10},
      {{3, 3, 3}, {3.5, 4, 3.4}, 90, 30},    {{0, 0, 0}, {10, 2, 1}, 15000, 25},
  };
  double worst_draft = 0.0, worst_trim = 0.0, worst_scale = 0.0;
  for (const auto& b : boxes) {
    PhysicalParameters p;
    p.mass = b.mass;
    p.water_temperature = b.celsius;
    p.cog = (b.lo + b.hi) * 0.5;
    p.cog.z = b.lo.z + 0.3 * (b.hi.z - b.lo.z);
    p.water_z = 0.5 * (b.lo.z + b.hi.z);
    Hull hull(box(b.lo, b.hi));
    const double rho = fluid_properties(b.celsius).rho;
    const double area = (b.hi.x - b.lo.x) * (b.hi.y - b.lo.y);
    const double want = b.mass / (rho * area);

    auto s1 = equilibrium_1dof(hull, p);
    worst_draft = std::max(worst_draft, std::abs((p.water_z - (b.lo.z + s1.sink)) - want));

    auto s2 = equilibrium_2dof(hull, p);
    worst_trim = std::max(worst_trim, std::abs(s2.trim));
    worst_draft = std::max(worst_draft, std::abs((p.water_z - (b.lo.z + s2.sink)) - want));

    // Archimedes: lengths x2, mass x8 gives the same attitude at twice the sink.
    Hull big(mesh::scaled(box(b.lo, b.hi), 2.0));
    PhysicalParameters q = p;
    q.mass *= 8.0;
    q.cog = p.cog * 2.0;
    q.water_z = p.water_z * 2.0;
    auto b1 = equilibrium_1dof(big, q);
    const double draft_small = p.water_z - (b.lo.z + s1.sink);
    const double draft_big = q.water_z - (2.0 * b.lo.z + b1.sink);
    worst_scale = std::max(worst_scale, std::abs(draft_big - 2.0 * draft_small) / (2.0 * draft_small));
  }
  // Symmetric non-box hulls float level too.
  for (const auto& m : {wedge(4, 1.2, 0.8), icosphere(3, 1.0, {0, 0, 1})}) {
    Hull hull(m);
    auto bb = hull.box();
    PhysicalParameters p;
    p.cog = (bb.min + bb.max) * 0.5;
    p.water_z = p.cog.z;
    p.mass = 0.3 * hull.volume() * fluid_properties(15).rho;
    worst_trim = std::max(worst_trim, std::abs(equilibrium_2dof(hull, p).trim));
  }
  Outcome o;
  o.pass = worst_draft <= 1e-6 && worst_trim < 1e-9 && worst_scale <= 1e-6;
  o.detail = "1-DoF draft error " + fmt("%.2e", worst_draft) + " m (limit 1e-6), 2-DoF |trim| " +
             fmt("%.2e", worst_trim) + " deg (limit 1e-9), lambda=2 scaling " + fmt("%.2e", worst_scale) +
             " rel (limit 1e-6)";
  return o;
}

// Submission state machine -------------------------------------------------------

Outcome state_machine() {
  FaultReport r = run_fault_schedules(1000, 20261019);
  Outcome o;
  o.pass = r.schedules >= 1000 && r.violations == 0 && r.completed + r.errored == r.simulations &&
           r.completed > 0 && r.errored > 0;
  o.detail = std::to_string(r.schedules) + " schedules, " + std::to_string(r.simulations) + " simulations: " +
             std::to_string(r.completed) + " Completed, " + std::to_string(r.errored) + " Error, " +
             std::to_string(r.violations) + " violations" + (r.first_violation.empty() ? "" : "; " + r.first_violation);
  return o;
}

// Scheduler scripts --------------------------------------------------------------

Outcome scheduler_scripts() {
  int equal = 0, total = 0;
  bool three_nodes = false;
  std::string first;
  for (auto c : template_matrix()) {
    three_nodes = three_nodes || c.job.nodes == 3;
    for (auto [kind, want] : {std::pair{SchedulerKind::Pbs, c.pbs}, std::pair{SchedulerKind::Slurm, c.slurm}}) {
      c.job.scheduler = kind;
      ++total;
      if (render_job_script(c.job) == want) {
        ++equal;
      } else if (first.empty()) {
        first = "; first mismatch: " + c.job.name + " " + to_string(kind);
      }
    }
  }
  Outcome o;
  o.pass = total == 6 && equal == total && three_nodes;
  o.detail = std::to_string(equal) + "/" + std::to_string(total) + " scripts byte-equal (3 cases x PBS/SLURM" +
             std::string(three_nodes ? ", one on 3 nodes)" : ")") + first;
  return o;
}

// End-to-end local pipeline ------------------------------------------------------

Outcome local_pipeline() {
  ApiRig rig;
  std::string geo = rig.upload("alice", rig.org_a.id, ascii_stl(unit_cube()), "box");
  int ok = 0, total = 0;
  double worst_wsa = 0.0, worst_drag = 0.0, slowest = 0.0;
  std::string first;
  for (double v : {0.0, 2.0}) {
    for (int dof : {0, 1, 2}) {
      const std::string tag = "v" + std::to_string(int(v)) + "-dof" + std::to_string(dof);
      auto r = run_pipeline_case(rig, geo, {v, dof}, tag);
      ++total;
      ok += r.ok;
      worst_wsa = std::max(worst_wsa, r.wsa_rel);
      worst_drag = std::max(worst_drag, r.drag_rel);
      slowest = std::max({slowest, r.cli_seconds, r.api_seconds});
      if (!r.ok && first.empty()) first = "; " + tag + ":" + r.detail;
    }
  }
  Outcome o;
  o.pass = ok == total && total == 6;
  o.detail = std::to_string(ok) + "/" + std::to_string(total) +
             " cases byte-identical between run --local and the API, wsa rel " + fmt("%.1e", worst_wsa) +
             ", drag rel " + fmt("%.1e", worst_drag) + ", slowest " + fmt("%.2f", slowest) + " s" + first;
  return o;
}

// Range run ----------------------------------------------------------------------

Outcome range_run() {
  ApiRig rig;
  std::string geo = rig.upload("alice", rig.org_a.id, ascii_stl(unit_cube()), "box");
  std::string base = rig.create("alice", rig.draft(rig.org_a.id, geo, "curve", 0, box_case_params(1.0)));
  auto r = rig.post("alice", "/simulations/" + base + "/range",
                    {{"parameter", "velocity"}, {"lo", 1.0}, {"hi", 5.0}, {"count", 5}});
  if (!r || r->status != 201) return {false, "range request failed"};
  Json made = json_of(r);
  std::vector<std::string> kids;
  std::vector<double> velocities;
  for (const auto& k : made["children"]) {
    kids.push_back(k["id"]);
    velocities.push_back(k["params"]["velocity"]);
  }
  if (!rig.run_all(kids)) return {false, "children did not finish"};
  Json family = json_of(rig.get("alice", "/simulations/" + base + "/family?y=total_drag"));
  Json header = json_of(rig.get("alice", "/simulations/" + base));
  const Json& pts = family["points"];
  bool sorted = pts.size() == 5, increasing = pts.size() == 5, matches = pts.size() == 5;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    matches = matches && pts[i]["sim_id"] == kids[i] && pts[i]["x"].get<double>() == velocities[i] &&
              velocities[i] == 1.0 + double(i);
    if (i > 0) {
      sorted = sorted && pts[i - 1]["x"].get<double>() < pts[i]["x"].get<double>();
      increasing = increasing && pts[i - 1]["y"].get<double>() < pts[i]["y"].get<double>();
    }
  }
  std::ostringstream drag;
  for (const auto& p : pts) drag << (drag.tellp() ? ", " : "") << fmt("%.3f", p["y"].get<double>());
  Outcome o;
  o.pass = sorted && increasing && matches && header["family_status"] == "Completed";
  o.detail = "velocities 1..5 m/s, total_drag [" + drag.str() + "] N, " +
             (increasing ? "strictly increasing" : "NOT increasing") + ", series order " +
             (sorted && matches ? "correct" : "wrong");
  return o;
}

// Search equivalence -------------------------------------------------------------

Outcome search_equivalence_check() {
  EquivalenceReport r = search_equivalence(500, 200, 20261019);
  Outcome o;
  o.pass = r.mismatches == 0 && r.queries >= 200;
  o.detail = "500 records, 200 rounds (" + std::to_string(r.queries) + " filter/brush queries), " +
             std::to_string(r.mismatches) + " mismatches" + (r.first_mismatch.empty() ? "" : ": " + r.first_mismatch);
  return o;
}

// RBAC matrix --------------------------------------------------------------------

Outcome rbac_matrix() {
  ApiRig rig;
  Catalogue& cat = rig.platform->catalogue();
  std::string ga = rig.upload("alice", rig.org_a.id, ascii_stl(unit_cube()), "a");
  std::string gb = rig.upload("bob", rig.org_b.id, ascii_stl(unit_cube()), "b");
  std::vector<std::string> recs = {
      rig.create("alice", rig.draft(rig.org_a.id, ga, "a-private")),
      rig.create("alice", rig.draft(rig.org_a.id, ga, "a-public", 0, box_params(), "PUBLIC")),
      rig.create("bob", rig.draft(rig.org_b.id, gb, "b-private")),
      rig.create("bob", rig.draft(rig.org_b.id, gb, "b-public", 0, box_params(), "PUBLIC")),
  };
  User eve = cat.register_user("eve", "eve", "pw-eve");  // registered, never approved
  int cells = 0, agree = 0;
  std::string first;
  auto check = [&](const std::string& phase) {
    for (const std::string login : {"alice", "bob", "carol", "eve"}) {
      const User u = login == "eve" ? cat.get_user(eve.id) : rig.users.at(login);
      for (const auto& id : recs) {
        const auto s = *cat.find_simulation(id);
        const bool member = u.member_of(s.owner_org_id);
        const bool want_read = rbac_oracle(u.approved, member, s.visibility == Visibility::Public, s.deleted);
        bool got_read = true;
        try {
          cat.get_simulation(u, id);
        } catch (const Error&) {
          got_read = false;
        }
        bool same = got_read == want_read;
        bool listed = false;
        for (const auto& x : cat.list_simulations(u)) listed = listed || x.id == id;
        same = same && listed == want_read;
        if (login != "eve") {
          for (bool checks : {true, false}) {
            auto r = rig.get(login, "/simulations/" + id, checks);
            same = same && r && r->status == (want_read ? 200 : 404);
            if (!member) {
              // Writes by non-members fail the same way whether or not the record is visible.
              auto d = rig.client(checks).Delete("/simulations/" + id, rig.as(login));
              same = same && d && d->status == 404;
            }
          }
        }
        ++cells;
        agree += same;
        if (!same && first.empty()) first = "; first disagreement: " + phase + " " + login + " " + s.name;
      }
    }
  };
  check("live");
  cat.soft_delete(rig.users.at("alice"), recs[1]);
  cat.soft_delete(rig.users.at("bob"), recs[2]);
  check("after deletes");
  Outcome o;
  o.pass = cells == 32 && agree == cells;
  o.detail = std::to_string(agree) + "/" + std::to_string(cells) +
             " cells match (3 approved users + 1 unapproved, 2 orgs, 4 records, before and after deletes; "
             "catalogue, listing and both HTTP front ends)" + first;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string only = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"mesh-oracle", mesh_oracle_suite},
      {"watertightness", watertightness},
      {"equilibrium", equilibrium},
      {"submission-state-machine", state_machine},
      {"scheduler-scripts", scheduler_scripts},
      {"local-pipeline", local_pipeline},
      {"range-run", range_run},
      {"search-equivalence", search_equivalence_check},
      {"rbac-matrix", rbac_matrix},
  };
  LogSink quiet = set_log_sink([](LogLevel level, const std::string& m) {
    if (level == LogLevel::Error) std::fprintf(stderr, "[vtank error] %s\n", m.c_str());
  });
  (void)quiet;
  int failed = 0, ran = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && name.find(only) == std::string::npos) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matches '%s'\n", only.c_str());
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
