#include <gtest/gtest.h>

#include "mock_machine.hpp"
#include "vtank/error.hpp"
#include "vtank/rangerun.hpp"

using namespace vtank;
using namespace vtank::testkit;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

RangeSpec velocity(double lo, double hi, int count) { return {ScalarParameter::Velocity, lo, hi, count}; }

/// Field-wise difference between two parameter sets, by name.
std::vector<std::string> differing_fields(const PhysicalParameters& a, const PhysicalParameters& b) {
  Json ja = a, jb = b;
  std::vector<std::string> out;
  for (auto it = ja.begin(); it != ja.end(); ++it) {
    if (jb.at(it.key()) != it.value()) out.push_back(it.key());
  }
  return out;
}

}  // namespace

TEST(RangeValues, InclusiveLinspace) {
  EXPECT_EQ(range_values(velocity(2, 6, 5)), (std::vector<double>{2, 3, 4, 5, 6}));
  EXPECT_EQ(range_values(velocity(1, 3, 2)), (std::vector<double>{1, 3}));
  auto v = range_values(velocity(0.1, 0.7, 7));
  EXPECT_EQ(v.back(), 0.7);
  for (size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], 0.1 + 0.1 * i, 1e-12);
}

TEST(Expand, CreatesNamedChildrenAndHeader) {
  MockRig rig;
  auto base = rig.new_sim("hull");
  auto kids = expand_range(*rig.w.cat, rig.w.alice, base.id, velocity(2, 6, 5));
  ASSERT_EQ(kids.size(), 5u);
  for (size_t i = 0; i < kids.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "hull_r%03zu", i + 1);
    EXPECT_EQ(kids[i].name, name);
    EXPECT_EQ(kids[i].range_parent_id, base.id);
    EXPECT_EQ(kids[i].params.velocity, 2.0 + i);
    EXPECT_EQ(kids[i].status(), SimStatus::Created);
    auto diff = differing_fields(kids[i].params, base.params);
    EXPECT_TRUE(diff.empty() || diff == std::vector<std::string>{"velocity"}) << kids[i].name;
  }
  auto header = *rig.w.cat->find_simulation(base.id);
  EXPECT_TRUE(header.range_header);
  EXPECT_EQ(family_children(*rig.w.cat, base.id).size(), 5u);
  EXPECT_EQ(code_of([&] { rig.orch.request_submit(rig.w.alice, base.id); }), Errc::Conflict);
  EXPECT_EQ(code_of([&] { expand_range(*rig.w.cat, rig.w.alice, base.id, velocity(1, 2, 2)); }), Errc::Conflict);
  EXPECT_NO_THROW(rig.orch.request_submit(rig.w.alice, kids[0].id));
}

TEST(Expand, ValidatesSpec) {
  MockRig rig;
  auto base = rig.new_sim("hull");
  auto& cat = *rig.w.cat;
  EXPECT_EQ(code_of([&] { expand_range(cat, rig.w.alice, base.id, velocity(1, 5, 1)); }), Errc::Validation);
  EXPECT_EQ(code_of([&] { expand_range(cat, rig.w.alice, base.id, velocity(5, 1, 3)); }), Errc::Validation);
  EXPECT_EQ(code_of([&] { expand_range(cat, rig.w.alice, base.id, {ScalarParameter::Mass, 0, 10, 3}); }),
            Errc::Validation);
  EXPECT_EQ(code_of([&] { expand_range(cat, rig.w.bob, base.id, velocity(1, 5, 5)); }), Errc::NotFound);
  EXPECT_FALSE(cat.find_simulation(base.id)->range_header);
  EXPECT_TRUE(family_children(cat, base.id).empty());
  rig.orch.status_callback(base.id, 1, "Submitted");
  EXPECT_EQ(code_of([&] { expand_range(cat, rig.w.alice, base.id, velocity(1, 5, 5)); }), Errc::Conflict);
}

TEST(FamilyStatus, Aggregation) {
  auto rec = [](int step, bool deleted = false) {
    SimulationRecord r;
    r.status_history.push_back({0, "Created", 0});
    if (step != 0) r.status_history.push_back({step, "", 0});
    r.deleted = deleted;
    return r;
  };
  EXPECT_EQ(family_status({rec(6), rec(6)}), SimStatus::Completed);
  EXPECT_EQ(family_status({rec(6), rec(3)}), SimStatus::Running);
  EXPECT_EQ(family_status({rec(0), rec(6)}), SimStatus::Running);
  EXPECT_EQ(family_status({rec(3), rec(-4)}), SimStatus::Error);
  EXPECT_EQ(family_status({rec(6), rec(-4, true)}), SimStatus::Completed);
  EXPECT_EQ(family_status({rec(6, true)}), SimStatus::Deleted);
}

TEST(FamilySeries, IncompleteFamilyNamesChildren) {
  MockRig rig;
  auto base = rig.new_sim("hull");
  auto kids = expand_range(*rig.w.cat, rig.w.alice, base.id, velocity(1, 3, 3));
  rig.orch.status_callback(kids[1].id, -4, "solver");
  try {
    family_series(*rig.w.cat, rig.w.alice, base.id, "total_drag");
    FAIL() << "expected INCOMPLETE_FAMILY";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IncompleteFamily);
    const std::string msg = e.what();
    for (const auto& k : kids) EXPECT_NE(msg.find(k.id), std::string::npos) << msg;
    EXPECT_NE(msg.find("Error"), std::string::npos);
  }
  EXPECT_EQ(family_status(family_children(*rig.w.cat, base.id)), SimStatus::Error);
}

TEST(FamilySeries, ResistanceCurveIncreasing) {
  MockRig rig;
  auto base = rig.new_sim("hull");
  auto kids = expand_range(*rig.w.cat, rig.w.alice, base.id, velocity(1, 5, 5));
  // Complete them out of order; the series must still come out sorted.
  for (int i : {3, 0, 4, 2, 1}) ASSERT_EQ(complete_with_solver(rig, kids[i].id).last_step(), 6);
  EXPECT_EQ(family_status(family_children(*rig.w.cat, base.id)), SimStatus::Completed);
  auto series = family_series(*rig.w.cat, rig.w.alice, base.id, "total_drag");
  ASSERT_EQ(series.size(), 5u);
  for (size_t i = 0; i < series.size(); ++i) {
    EXPECT_EQ(series[i].x, 1.0 + i);
    EXPECT_EQ(series[i].sim_id, kids[i].id);
    if (i > 0) {
      EXPECT_GT(series[i].y, series[i - 1].y);
    }
  }
  EXPECT_EQ(code_of([&] { family_series(*rig.w.cat, rig.w.bob, base.id, "total_drag"); }), Errc::NotFound);
  EXPECT_EQ(code_of([&] { family_series(*rig.w.cat, rig.w.alice, base.id, "colour"); }), Errc::UnknownCoordinate);
}
