#include "scenekeeper/pipeline.hpp"

#include <algorithm>

namespace scenekeeper {

Session::Session(PipelineConfig cfg) : cfg_(std::move(cfg)), tracker_(cfg_.tracker) {}

void Session::process(const DetectionFrame& frame) {
  const TrackUpdate update = tracker_.step(frame);
  const double now = frame.t;
  const std::vector<TrackedEntity>& tracks = tracker_.tracks();

  if (!expectationsAdded_) {
    for (const Expectation& e : cfg_.expectations) kb_.add_expectation(e, now);
    expectationsAdded_ = true;
  }

  std::vector<OwnershipRecord> owned;
  for (const std::string& id : update.created) {
    const TrackedEntity* t = tracker_.find(id);
    if (!t || t->kind != EntityKind::WorkObject || kb_.owner_of(id)) continue;
    if (auto rec = infer_ownership(*t, tracks, cfg_.relations, now)) owned.push_back(*rec);
  }

  // The ledger picks objects and persons out of the same list by kind.
  const std::vector<Relation> touched = touches_.update(tracks, tracks, cfg_.relations, now);

  std::map<std::string, std::string> owners;
  for (const auto& [id, rec] : kb_.ownerships()) owners.emplace(id, rec.ownerId);
  for (const OwnershipRecord& rec : owned) owners.emplace(rec.objectId, rec.ownerId);

  RelationContext ctx;
  ctx.owners = &owners;
  ctx.lastTouched = touched;
  relations_ = compute_relations(tracks, cfg_.regions, relations_, cfg_.relations, now, ctx);
  kb_.record_frame(relations_, tracks, owned);
  kb_.check_expectations(now);
  dialog_.on_event(TickEvent{now}, WorldView{kb_, tracks, cfg_.microphone});

  ++frames_;
  lastFrameId_ = frame.frame;
}

std::optional<Answer> Session::handle(const DialogEvent& ev) {
  std::optional<Answer> answer =
      dialog_.on_event(ev, WorldView{kb_, tracker_.tracks(), cfg_.microphone});
  if (answer && answer->assertion) {
    const LabelAssertion& a = *answer->assertion;
    kb_.assert_label(a.objectId, a.label);
    // Only tracked people can own things; a bare name stays unresolved.
    const TrackedEntity* owner = a.ownerId ? tracker_.find(*a.ownerId) : nullptr;
    if (owner && owner->kind == EntityKind::Person) {
      kb_.add_ownership({a.objectId, owner->id, answer->time});
    }
  }
  return answer;
}

PipelineConfig pipeline_for(const ScenarioScript& script, PipelineConfig base) {
  // The script describes the scene, so its regions replace same-named ones.
  for (const LocationRegion& r : script.regions) {
    const auto known = std::find_if(base.regions.begin(), base.regions.end(),
                                    [&](const LocationRegion& x) { return x.name == r.name; });
    if (known == base.regions.end()) {
      base.regions.push_back(r);
    } else {
      known->box = r.box;
    }
  }
  for (const Expectation& e : script.expectations) {
    const bool known = std::any_of(base.expectations.begin(), base.expectations.end(),
                                   [&](const Expectation& x) { return x.id == e.id; });
    if (!known) base.expectations.push_back(e);
  }
  base.microphone = script.microphone;
  return base;
}

std::vector<Answer> play(Session& session, const std::vector<DetectionFrame>& frames,
                         const std::vector<DialogEvent>& events) {
  std::vector<Answer> answers;
  std::size_t next = 0;
  auto deliver_until = [&](std::optional<double> limit) {
    while (next < events.size() && (!limit || event_time(events[next]) < *limit)) {
      if (auto a = session.handle(events[next])) answers.push_back(std::move(*a));
      ++next;
    }
  };
  for (std::size_t i = 0; i < frames.size(); ++i) {
    session.process(frames[i]);
    deliver_until(i + 1 < frames.size() ? std::optional<double>(frames[i + 1].t) : std::nullopt);
  }
  if (frames.empty()) deliver_until(std::nullopt);
  return answers;
}

}  // namespace scenekeeper
