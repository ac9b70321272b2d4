#include <gtest/gtest.h>

#include <set>

#include "scenekeeper/error.hpp"
#include "scenekeeper/tracking.hpp"
#include "support.hpp"

using namespace scenekeeper;
using namespace testing_support;

namespace {

Aabb cube_at(double x, double y, double side = 0.1) {
  return {{x - side / 2, y - side / 2, 0}, {x + side / 2, y + side / 2, side}};
}

}  // namespace

TEST(Associate, GreedyWithinGateAndKind) {
  std::vector<TrackedEntity> tracks{track("a", EntityKind::WorkObject, cube_at(0, 0)),
                                    track("b", EntityKind::WorkObject, cube_at(1, 0)),
                                    track("p", EntityKind::Person, cube_at(0.05, 0))};
  const std::vector<Observation> dets{{EntityKind::WorkObject, {1.1, 0, 0.05}},
                                      {EntityKind::WorkObject, {0.02, 0, 0.05}},
                                      {EntityKind::WorkObject, {5, 5, 0}}};
  const auto got = associate(tracks, dets, 0.3);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].track, 0u);
  EXPECT_EQ(got[0].detection, 1u);
  EXPECT_EQ(got[1].track, 1u);
  EXPECT_EQ(got[1].detection, 0u);
  EXPECT_THROW(associate(tracks, dets, 0.0), Error);
}

TEST(Associate, SkipsLostTracks) {
  std::vector<TrackedEntity> tracks{track("a", EntityKind::WorkObject, cube_at(0, 0))};
  tracks[0].state = Lost{tracks[0].centroid};
  const std::vector<Observation> dets{{EntityKind::WorkObject, tracks[0].centroid}};
  EXPECT_TRUE(associate(tracks, dets, 0.3).empty());
}

TEST(Associate, NeverAssignsTwiceProperty) {
  Gen g(21);
  for (int i = 0; i < 200; ++i) {
    std::vector<TrackedEntity> tracks;
    std::vector<Observation> dets;
    const int nt = g.integer(0, 8);
    const int nd = g.integer(0, 8);
    for (int k = 0; k < nt; ++k) {
      tracks.push_back(track("t" + std::to_string(k), EntityKind::WorkObject,
                             cube_at(g.uniform(0, 1), g.uniform(0, 1))));
    }
    for (int k = 0; k < nd; ++k) dets.push_back({EntityKind::WorkObject, {g.uniform(0, 1), g.uniform(0, 1), 0.05}});
    std::set<std::size_t> ts, ds;
    for (const Assignment& a : associate(tracks, dets, 0.3)) {
      EXPECT_TRUE(ts.insert(a.track).second);
      EXPECT_TRUE(ds.insert(a.detection).second);
      EXPECT_LE(a.distance, 0.3);
      EXPECT_DOUBLE_EQ(a.distance, distance(tracks[a.track].centroid, dets[a.detection].centroid));
    }
  }
}

TEST(Tracker, KeepsIdentityAcrossSmallMotion) {
  Tracker tr;
  tr.step(frame(1, 0.0, {}, {object("w", cube_at(0.5, 0.5), "wallet")}));
  const auto up = tr.step(frame(2, 0.1, {}, {object("w", cube_at(0.55, 0.5), "wallet")}));
  ASSERT_EQ(tr.tracks().size(), 1u);
  EXPECT_EQ(up.updated, std::vector<std::string>{"object-1"});
  EXPECT_TRUE(up.created.empty());
  EXPECT_EQ(tr.tracks()[0].label, "wallet");
  EXPECT_EQ(tr.tracks()[0].sourceId, "w");
  EXPECT_DOUBLE_EQ(tr.tracks()[0].firstSeen, 0.0);
  EXPECT_DOUBLE_EQ(tr.tracks()[0].lastSeen, 0.1);
}

TEST(Tracker, RejectsTimeRegression) {
  Tracker tr;
  tr.step(frame(1, 1.0, {}, {}));
  try {
    tr.step(frame(2, 1.0, {}, {}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "time-regression");
  }
}

TEST(Tracker, LosesAfterGraceAndResumes) {
  Tracker tr({.gate = 0.3, .lostGrace = 1.0, .holdRadius = 0.15, .reacquireRadius = 0.3});
  tr.step(frame(1, 0.0, {}, {object("", cube_at(0.5, 0.5))}));
  auto up = tr.step(frame(2, 0.5, {}, {}));
  EXPECT_TRUE(up.lost.empty());
  EXPECT_FALSE(tr.tracks()[0].present_at(0.5));
  EXPECT_FALSE(tr.tracks()[0].is_lost());
  up = tr.step(frame(3, 1.5, {}, {}));
  EXPECT_EQ(up.lost, std::vector<std::string>{"object-1"});
  EXPECT_TRUE(tr.tracks()[0].is_lost());

  up = tr.step(frame(4, 2.0, {}, {object("", cube_at(0.7, 0.5))}));
  EXPECT_EQ(up.appeared, std::vector<std::string>{"object-1"});
  EXPECT_TRUE(up.created.empty());
  EXPECT_EQ(tr.tracks().size(), 1u);

  // Far away: a new identity, never reusing the old id.
  tr.step(frame(5, 4.0, {}, {}));
  up = tr.step(frame(6, 5.0, {}, {object("", cube_at(1.5, 1.0))}));
  EXPECT_EQ(up.created, std::vector<std::string>{"object-2"});
}

TEST(Tracker, CarriedObjectFollowsHand) {
  Tracker tr;
  const Hand hand{{0.5, 0.5, 0.05}, std::nullopt};
  tr.step(frame(1, 0.0, {person("A", {0.5, -0.3, 0}, {hand})}, {object("", cube_at(0.5, 0.5))}));
  // Object vanishes from the detections (occluded by the hand) and the hand moves.
  const Hand moved{{0.6, 0.4, 0.05}, std::nullopt};
  tr.step(frame(2, 0.1, {person("A", {0.5, -0.3, 0}, {moved})}, {}));
  const TrackedEntity* obj = tr.find("object-1");
  ASSERT_NE(obj, nullptr);
  ASSERT_TRUE(obj->is_held());
  EXPECT_EQ(std::get<Held>(obj->state).agentId, "person-1");
  EXPECT_EQ(obj->centroid, moved.position);
  EXPECT_TRUE(obj->present_at(0.1));
}

TEST(Tracker, HeldByResolvesSourceIds) {
  Tracker tr;
  tr.step(frame(1, 0.0, {person("Bob", {0.5, -0.3, 0})}, {object("w", cube_at(0.5, 0.0), "wallet", "Bob")}));
  const TrackedEntity* obj = tr.find("object-1");
  ASSERT_NE(obj, nullptr);
  ASSERT_TRUE(obj->is_held());
  EXPECT_EQ(std::get<Held>(obj->state).agentId, "person-1");
  EXPECT_EQ(tr.find("person-1")->label, "Bob");
}

TEST(Tracker, IdsNeverReusedProperty) {
  Gen g(22);
  Tracker tr;
  std::set<std::string> seen_created;
  double t = 0.0;
  for (int f = 1; f <= 300; ++f) {
    t += 1.0 / 30;
    std::vector<FrameObject> objs;
    const int n = g.integer(0, 5);
    for (int k = 0; k < n; ++k) objs.push_back(object("", cube_at(g.uniform(0, 2), g.uniform(0, 1.2))));
    const auto up = tr.step(frame(f, t, {}, objs));
    for (const std::string& id : up.created) EXPECT_TRUE(seen_created.insert(id).second) << id;
  }
  EXPECT_EQ(seen_created.size(), tr.tracks().size());
}
