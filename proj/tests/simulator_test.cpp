#include <gtest/gtest.h>

#include "scenekeeper/detection.hpp"
#include "scenekeeper/error.hpp"
#include "scenekeeper/simulator.hpp"
#include "support.hpp"

using namespace scenekeeper;

namespace {

const char* kSmall = R"(
name: small
duration: 4
actors:
  - name: Ann
    path:
      - {t: 0, at: [1.0, -0.5]}
      - {t: 2, at: [1.0, -0.3]}
      - {t: 3, absent: true}
    gestures:
      - {from: 1, to: 2, hand: [1.0, 0.4, 0.9], point_at: [1.0, 1.0, 0.9]}
props:
  - label: cup
    size: [0.1, 0.1, 0.1]
    owner: Ann
    timeline:
      - {t: 0, at: [0.5, 0.5, 0]}
      - {t: 1, held_by: Ann}
      - {t: 2, at: [1.5, 0.5, 0]}
      - {t: 3.5, absent: true}
events:
  - {t: 3, utterance: "Celia, where is my cup?", speaker: Ann}
  - {t: 1, keyword: true}
)";

std::filesystem::path source(const std::string& rel) { return std::filesystem::path(SK_SOURCE_DIR) / rel; }

std::string scenario_error(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "scenario");
    return e.detail();
  }
  return "(accepted)";
}

}  // namespace

TEST(Scenario, ParsesAndDefaults) {
  const ScenarioScript s = parse_scenario(kSmall);
  EXPECT_EQ(s.name, "small");
  EXPECT_DOUBLE_EQ(s.rate, 30.0);
  EXPECT_EQ(s.room, (Aabb{{-1, -1, 0}, {3, 2.2, 0}}));
  EXPECT_EQ(s.microphone, (Vec3{1.0, 0.6, 2.5}));
  ASSERT_EQ(s.events.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<KeywordEvent>(s.events[0]));
  EXPECT_EQ(s.props[0].owner, "Ann");
  EXPECT_EQ(s.actors[0].gestures.size(), 1u);
}

TEST(Scenario, RejectsBadDocuments) {
  EXPECT_NE(scenario_error("name: x\nduration: 1\nbogus: 2\n").find("unknown key 'bogus'"), std::string::npos);
  EXPECT_NE(scenario_error("name: x\n").find("required"), std::string::npos);
  EXPECT_NE(scenario_error("name: x\nduration: -1\n").find("positive"), std::string::npos);
  EXPECT_NE(scenario_error("name: x\nduration: 1\nprops:\n  - {label: a, size: [1,1,1], timeline: [{t: 0, held_by: Zed}]}\n")
                .find("unknown actor"),
            std::string::npos);
  EXPECT_NE(scenario_error("name: x\nduration: 1\nprops:\n  - {label: a, size: [1,1,1], timeline: [{t: 2, at: [0,0,0]}]}\n")
                .find("outside"),
            std::string::npos);
  EXPECT_NE(scenario_error("name: x\nduration: 1\nprops:\n  - {label: a, size: [1,1,1], timeline: [{t: 0.5, at: [0,0,0]}, {t: 0.5, absent: true}]}\n")
                .find("increase"),
            std::string::npos);
  EXPECT_NE(scenario_error("name: [unclosed\n"), "(accepted)");
  EXPECT_THROW(load_scenario("/nonexistent.scn"), Error);
}

TEST(Scenario, ShippedScriptsLoad) {
  for (const char* f : {"scenarios/elder_care.scn", "scenarios/workshop.scn"}) {
    const ScenarioScript s = load_scenario(source(f));
    EXPECT_FALSE(s.props.empty()) << f;
    EXPECT_FALSE(s.events.empty()) << f;
  }
}

TEST(Pose, RestHeldAndAbsent) {
  const ScenarioScript s = parse_scenario(kSmall);
  ScenePose p = pose_at(s, 0.5);
  ASSERT_EQ(p.props.size(), 1u);
  EXPECT_EQ(p.props[0].box, (Aabb{{0.45, 0.45, 0}, {0.55, 0.55, 0.1}}));
  EXPECT_FALSE(p.props[0].heldBy);
  ASSERT_EQ(p.persons.size(), 1u);
  EXPECT_TRUE(p.persons[0].hands.empty());

  // Halfway between the two rests while carried.
  p = pose_at(s, 1.5);
  EXPECT_EQ(p.props[0].heldBy, "Ann");
  EXPECT_NEAR(p.props[0].box.center().x, 1.0, 1e-12);
  EXPECT_NEAR(p.props[0].box.center().z, 0.05, 1e-12);
  // One hand carries, one points.
  ASSERT_EQ(p.persons[0].hands.size(), 2u);
  ASSERT_TRUE(p.persons[0].hands[0].pointing);
  EXPECT_NEAR(p.persons[0].hands[0].pointing->y, 1.0, 1e-12);
  EXPECT_EQ(p.persons[0].hands[1].position, p.props[0].box.center());
  EXPECT_NEAR(p.persons[0].position.y, -0.35, 1e-12);

  p = pose_at(s, 3.2);
  EXPECT_TRUE(p.persons.empty());
  EXPECT_EQ(p.props.size(), 1u);
  EXPECT_TRUE(pose_at(s, 3.6).props.empty());
  EXPECT_THROW(pose_at(s, 4.5), Error);
  EXPECT_THROW(pose_at(s, -0.1), Error);
}

TEST(Pose, PickUpWithoutDestinationSettlesAtCarryPoint) {
  const ScenarioScript s = parse_scenario(R"(
name: lift
duration: 5
actors:
  - name: Bo
    path: [{t: 0, at: [1.0, -0.5]}]
props:
  - label: box
    size: [0.1, 0.1, 0.1]
    timeline:
      - {t: 0, at: [1.0, 0.2, 0]}
      - {t: 1, held_by: Bo}
)");
  // Carry point: 0.35 m from the body toward the work-area center, 0.9 m up.
  const Vec3 dir = normalized(Vec3{0.0, 1.1, 0.0});
  const Vec3 carry = Vec3{1.0, -0.5, 0.9} + dir * 0.35;
  const Vec3 at = pose_at(s, 4.0).props[0].box.center();
  EXPECT_NEAR(at.x, carry.x, 1e-12);
  EXPECT_NEAR(at.y, carry.y, 1e-12);
  EXPECT_NEAR(at.z, carry.z, 1e-12);
  const Vec3 mid = pose_at(s, 1.5).props[0].box.center();
  EXPECT_NEAR(mid.z, 0.5 * (0.05 + 0.9), 1e-12);
}

TEST(HeightMap, RendersPropsAndPersons) {
  const ScenarioScript s = parse_scenario(kSmall);
  const HeightMap m = render_height_map(s, 0.5);
  EXPECT_EQ(m.width(), 400);
  EXPECT_EQ(m.height(), 320);
  // Cup center cell and an empty cell.
  EXPECT_DOUBLE_EQ(m.at(150, 150), 0.1);
  EXPECT_DOUBLE_EQ(m.at(300, 250), 0.0);
  // Top of the head above the person's center.
  double top = 0;
  for (double h : m.samples()) top = std::max(top, h);
  EXPECT_NEAR(top, 1.7, 0.01);
}

TEST(HeightMap, DetectorSeesScene) {
  const ScenarioScript s = parse_scenario(kSmall);
  const DetectionFrame f = detect_frame(render_height_map(s, 0.5), detector_config(s), 0.5);
  EXPECT_EQ(f.persons.size(), 1u);
  ASSERT_EQ(f.objects.size(), 1u);
  EXPECT_NEAR(f.objects[0].centroid.x, 0.5, 0.01);

  // Pointing gesture: the arm reaches into the work area.
  const DetectionFrame g = detect_frame(render_height_map(s, 1.9), detector_config(s), 1.9);
  ASSERT_EQ(g.persons.size(), 1u);
  bool pointing = false;
  for (const Hand& h : g.persons[0].hands) pointing = pointing || h.pointing.has_value();
  EXPECT_TRUE(pointing);
}

TEST(Run, FramesAndTruth) {
  const ScenarioScript s = parse_scenario(kSmall);
  EXPECT_EQ(frame_times(s).size(), 121u);
  const ScenarioRun run = run_scenario(s, RunMode::ViaFrames);
  ASSERT_EQ(run.frames.size(), 121u);
  EXPECT_EQ(run.frames.front().frame, 1);
  EXPECT_EQ(run.frames.back().frame, 121);
  EXPECT_DOUBLE_EQ(run.frames.back().t, 4.0);
  EXPECT_EQ(run.truth.frames.size(), 121u);
  EXPECT_EQ(run.truth.ownership.at("cup"), "Ann");
  for (const DetectionFrame& f : run.frames) EXPECT_EQ(quantize(f), f);
  const DetectionFrame& first = run.frames.front();
  ASSERT_EQ(first.objects.size(), 1u);
  EXPECT_EQ(first.objects[0].label, "cup");
  EXPECT_EQ(first.persons[0].id, "Ann");

  const ScenarioRun viaMaps = run_scenario(s, RunMode::ViaHeightMaps, false);
  EXPECT_EQ(viaMaps.frames.size(), 121u);
  EXPECT_TRUE(viaMaps.truth.frames.empty());
}
