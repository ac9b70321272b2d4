#include "scenekeeper/tracking.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

#include "scenekeeper/error.hpp"

namespace scenekeeper {
namespace {

struct Candidate {
  double distance;
  std::size_t track;
  std::size_t detection;
};

// Greedy pick over candidate pairs already filtered by kind and radius.
template <typename Tracks>
std::vector<Assignment> greedy_pick(std::vector<Candidate> candidates, const Tracks& tracks) {
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, tracks[a.track].id, a.detection) <
           std::tie(b.distance, tracks[b.track].id, b.detection);
  });
  std::vector<char> track_used(tracks.size(), 0);
  std::vector<Assignment> out;
  std::vector<std::size_t> det_used;
  for (const Candidate& c : candidates) {
    if (track_used[c.track]) continue;
    if (std::find(det_used.begin(), det_used.end(), c.detection) != det_used.end()) continue;
    track_used[c.track] = 1;
    det_used.push_back(c.detection);
    out.push_back({c.track, c.detection, c.distance});
  }
  return out;
}

}  // namespace

std::vector<Assignment> associate(std::span<const TrackedEntity> tracks,
                                  std::span<const Observation> detections, double gate) {
  if (!(gate > 0.0)) throw Error("invalid-argument", "gate must be positive");
  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    if (tracks[t].is_lost()) continue;
    for (std::size_t d = 0; d < detections.size(); ++d) {
      if (tracks[t].kind != detections[d].kind) continue;
      const double dist = distance(tracks[t].centroid, detections[d].centroid);
      if (dist <= gate) candidates.push_back({dist, t, d});
    }
  }
  return greedy_pick(std::move(candidates), tracks);
}

const TrackedEntity* Tracker::find(const std::string& id) const {
  for (const TrackedEntity& t : tracks_) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

std::string Tracker::next_id(EntityKind kind) {
  return kind == EntityKind::Person ? "person-" + std::to_string(next_person_++)
                                    : "object-" + std::to_string(next_object_++);
}

TrackUpdate Tracker::step(const DetectionFrame& frame) {
  if (last_time_ && !(frame.t > *last_time_)) {
    throw Error("time-regression", "frame time " + std::to_string(frame.t) +
                                       " does not follow " + std::to_string(*last_time_));
  }
  const double now = frame.t;
  last_time_ = now;

  TrackUpdate update;
  update.frameTime = now;

  // Persons first so that heldBy references resolve within the same frame.
  std::vector<Observation> observations;
  for (const FramePerson& p : frame.persons) observations.push_back({EntityKind::Person, p.centroid});
  for (const FrameObject& o : frame.objects) {
    observations.push_back({EntityKind::WorkObject, o.centroid});
  }
  const std::size_t person_count = frame.persons.size();

  std::vector<std::optional<std::size_t>> det_track(observations.size());
  std::vector<char> track_matched(tracks_.size(), 0);
  for (const Assignment& a : associate(tracks_, observations, cfg_.gate)) {
    det_track[a.detection] = a.track;
    track_matched[a.track] = 1;
  }

  // Unmatched detections may resume a Lost track of the same kind.
  std::vector<Candidate> resumable;
  for (std::size_t d = 0; d < observations.size(); ++d) {
    if (det_track[d]) continue;
    for (std::size_t t = 0; t < tracks_.size(); ++t) {
      const auto* lost = std::get_if<Lost>(&tracks_[t].state);
      if (!lost || tracks_[t].kind != observations[d].kind) continue;
      const double dist = distance(lost->lastCentroid, observations[d].centroid);
      if (dist <= cfg_.reacquireRadius) resumable.push_back({dist, t, d});
    }
  }
  std::vector<char> resumed(tracks_.size(), 0);
  for (const Assignment& a : greedy_pick(std::move(resumable), tracks_)) {
    det_track[a.detection] = a.track;
    resumed[a.track] = 1;
  }

  for (std::size_t d = 0; d < observations.size(); ++d) {
    if (det_track[d]) continue;
    TrackedEntity fresh;
    fresh.kind = observations[d].kind;
    fresh.id = next_id(fresh.kind);
    fresh.firstSeen = now;
    det_track[d] = tracks_.size();
    tracks_.push_back(std::move(fresh));
    track_matched.push_back(0);
    resumed.push_back(0);
    update.appeared.push_back(tracks_.back().id);
    update.created.push_back(tracks_.back().id);
  }

  std::map<std::string, std::string> person_by_source;
  for (std::size_t d = 0; d < observations.size(); ++d) {
    TrackedEntity& track = tracks_[*det_track[d]];
    if (resumed[*det_track[d]]) {
      update.appeared.push_back(track.id);
    } else if (track_matched[*det_track[d]]) {
      update.updated.push_back(track.id);
    }
    track.lastSeen = now;
    track.state = Visible{};
    if (d < person_count) {
      const FramePerson& p = frame.persons[d];
      track.boundingBox = p.bbox;
      track.centroid = p.centroid;
      track.hands = p.hands;
      track.sourceId = p.id;
      if (!p.id.empty()) {
        track.label = p.id;
        person_by_source.emplace(p.id, track.id);
      }
    } else {
      const FrameObject& o = frame.objects[d - person_count];
      track.boundingBox = o.bbox;
      track.centroid = o.centroid;
      track.sourceId = o.id;
      if (o.label) track.label = o.label;
      if (o.heldBy) {
        if (const auto it = person_by_source.find(*o.heldBy); it != person_by_source.end()) {
          track.state = Held{it->second};
        }
      }
    }
  }

  struct HandRef {
    Vec3 position;
    std::string person;
  };
  std::vector<HandRef> hands;
  for (std::size_t d = 0; d < person_count; ++d) {
    for (const Hand& h : frame.persons[d].hands) {
      hands.push_back({h.position, tracks_[*det_track[d]].id});
    }
  }

  std::vector<char> seen(tracks_.size(), 0);
  for (const auto& t : det_track) seen[*t] = 1;
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    TrackedEntity& track = tracks_[t];
    if (seen[t] || track.is_lost()) continue;

    if (track.kind == EntityKind::WorkObject) {
      const HandRef* nearest = nullptr;
      double best = std::numeric_limits<double>::infinity();
      for (const HandRef& h : hands) {
        const Aabb region = Aabb::from_center_size(
            h.position, {2 * cfg_.holdRadius, 2 * cfg_.holdRadius, 2 * cfg_.holdRadius});
        if (!intersects(region, track.boundingBox)) continue;
        const double dist = distance(h.position, track.centroid);
        if (dist < best) {
          best = dist;
          nearest = &h;
        }
      }
      if (nearest) {
        track.boundingBox = track.boundingBox.translated(nearest->position - track.centroid);
        track.centroid = nearest->position;
        track.state = Held{nearest->person};
        track.lastSeen = now;
        update.updated.push_back(track.id);
        continue;
      }
    } else {
      track.hands.clear();
    }

    if (now - track.lastSeen > cfg_.lostGrace) {
      track.state = Lost{track.centroid};
      track.hands.clear();
      update.lost.push_back(track.id);
    }
  }
  return update;
}

}  // namespace scenekeeper
