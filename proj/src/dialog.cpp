#include "scenekeeper/dialog.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <regex>

#include "scenekeeper/error.hpp"

namespace scenekeeper {
namespace {

constexpr double kSameDistance = 1e-9;
constexpr double kMaxPointingRange = 20.0;
constexpr double kEngagedWindow = 2.0;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool iequals(std::string_view a, std::string_view b) { return lower(a) == lower(b); }

// Trims, folds typographic apostrophes, drops trailing punctuation and
// collapses runs of whitespace.
std::string normalize(std::string_view text) {
  std::string s(text);
  for (std::size_t pos; (pos = s.find("\xE2\x80\x99")) != std::string::npos;) s.replace(pos, 3, "'");
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  while (!out.empty() && (out.back() == '?' || out.back() == '.' || out.back() == '!' ||
                          out.back() == ' ')) {
    out.pop_back();
  }
  return out;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += i + 1 == names.size() ? " and " : ", ";
    out += "the " + names[i];
  }
  return out;
}

std::string relation_phrase(RelationKind kind) {
  switch (kind) {
    case RelationKind::In: return "in";
    case RelationKind::On: return "on";
    case RelationKind::Near: return "near";
    case RelationKind::NextTo: return "next to";
    default: return std::string(to_string(kind));
  }
}

bool is_generated_label(const ObjectFact& f) { return !f.label || *f.label == f.objectId; }

struct Clause {
  int rank;
  bool under;
  int preference;
  std::string landmarkName;
  std::string landmarkId;
  Relation relation;
  std::string text;
};

// Candidate answer clauses, most salient first: In > On > NextTo > Near,
// then landmarks that carry a real label or an owner.
std::vector<Clause> clauses_for(const ObjectFact& fact, const KnowledgeBase& kb) {
  std::vector<Clause> out;
  const std::string& target = fact.objectId;
  for (const Relation& r : fact.lastStableRelations) {
    int rank = -1;
    bool under = false;
    std::string landmark;
    std::string prep;
    if (r.kind == RelationKind::In && r.subject == target) {
      rank = 0, landmark = r.object, prep = "in";
    } else if (r.kind == RelationKind::On && r.subject == target) {
      rank = 1, landmark = r.object, prep = "on";
    } else if (r.kind == RelationKind::On && r.object == target) {
      rank = 1, under = true, landmark = r.subject, prep = "under";
    } else if (r.kind == RelationKind::NextTo && r.subject == target) {
      rank = 2, landmark = r.object, prep = "next to";
    } else if (r.kind == RelationKind::Near && r.subject == target) {
      rank = 3, landmark = r.object, prep = "near";
    }
    if (rank < 0) continue;
    const ObjectFact* lm = kb.object(landmark);
    const bool named = lm && !is_generated_label(*lm);
    const int preference = named || kb.owner_of(landmark) ? 0 : 1;
    const std::string name = kb.display_name(landmark);
    out.push_back({rank, under, preference, name, landmark, r, prep + " the " + name});
  }
  std::sort(out.begin(), out.end(), [](const Clause& a, const Clause& b) {
    return std::tie(a.rank, a.preference, a.landmarkName, a.landmarkId, a.under) <
           std::tie(b.rank, b.preference, b.landmarkName, b.landmarkId, b.under);
  });
  return out;
}

std::string format_seconds(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", t);
  return buf;
}

std::string referent_phrase(const Query& q, const std::string& label) {
  switch (q.owner.kind) {
    case OwnerRefKind::My: return "your " + label;
    case OwnerRefKind::Your: return "my " + label;
    case OwnerRefKind::Named: return q.owner.name + "'s " + label;
    default: return "the " + label;
  }
}

std::optional<std::string> resolve_speaker(const std::optional<std::string>& given,
                                           const WorldView& world) {
  if (given) {
    for (const TrackedEntity& t : world.tracks) {
      if (t.kind == EntityKind::Person && (t.id == *given || (t.label && iequals(*t.label, *given)))) {
        return t.id;
      }
    }
    if (const PersonFact* p = world.kb.find_person(*given)) return p->personId;
    return given;
  }
  const TrackedEntity* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const TrackedEntity& t : world.tracks) {
    if (t.kind != EntityKind::Person || t.is_lost()) continue;
    const double d = distance(t.centroid, world.microphone);
    if (d < best) {
      best = d;
      nearest = &t;
    }
  }
  if (nearest) return nearest->id;
  return std::nullopt;
}

std::optional<Ray> pointing_of(const std::optional<std::string>& speaker, const WorldView& world) {
  if (!speaker) return std::nullopt;
  for (const TrackedEntity& t : world.tracks) {
    if (t.id != *speaker || t.is_lost()) continue;
    for (const Hand& h : t.hands) {
      if (h.pointing) return Ray{h.position, *h.pointing};
    }
  }
  return std::nullopt;
}

std::string owner_phrase(const std::string& ownerId, const std::optional<std::string>& speaker,
                         const KnowledgeBase& kb) {
  if (speaker && ownerId == *speaker) return "your";
  return kb.display_name(ownerId) + "'s";
}

std::optional<Relation> stable_relation(const ObjectFact& f, RelationKind kind,
                                        const std::string& object) {
  for (const Relation& r : f.lastStableRelations) {
    if (r.kind == kind && r.subject == f.objectId && r.object == object) return r;
  }
  return std::nullopt;
}

}  // namespace

std::pair<bool, std::string> split_keyword(std::string_view text) {
  const std::string s = normalize(text);
  const std::string low = lower(s);
  const std::size_t n = kAttentionKeyword.size();
  if (low.compare(0, n, kAttentionKeyword) != 0) return {false, s};
  if (low.size() > n && std::isalnum(static_cast<unsigned char>(low[n]))) return {false, s};
  std::size_t i = n;
  while (i < s.size() && (s[i] == ',' || s[i] == ':' || s[i] == ';' || s[i] == '!' ||
                          s[i] == '.' || s[i] == ' ')) {
    ++i;
  }
  return {true, s.substr(i)};
}

Query parse_query(std::string_view text) {
  const std::string s = split_keyword(text).second;
  if (s.empty()) throw Error("unparsed-utterance", "empty request");

  static const std::regex where(R"(^where(?: is|'s) (my|your|the|(\S+)'s) (.+)$)",
                                std::regex::icase);
  static const std::regex whose(R"(^whose (.+) is (this|that)$)", std::regex::icase);
  static const std::regex what(R"(^what is (in|on|near|next to) (?:the (.+)|this|that)$)",
                               std::regex::icase);
  static const std::regex assert_label(R"(^this is (my|(\S+)'s) (.+)$)", std::regex::icase);

  std::smatch m;
  Query q;
  if (std::regex_match(s, m, where)) {
    q.intent = Intent::WhereIs;
    q.objectLabel = m[3].str();
    const std::string det = lower(m[1].str());
    if (det == "my") {
      q.owner.kind = OwnerRefKind::My;
    } else if (det == "your") {
      q.owner.kind = OwnerRefKind::Your;
    } else if (det == "the") {
      q.owner.kind = OwnerRefKind::The;
    } else {
      q.owner = {OwnerRefKind::Named, m[2].str()};
    }
    return q;
  }
  if (std::regex_match(s, m, whose)) {
    q.intent = Intent::WhoseIs;
    q.objectLabel = m[1].str();
    q.deictic = true;
    return q;
  }
  if (std::regex_match(s, m, what)) {
    q.intent = Intent::WhatIsRelated;
    const std::string rel = lower(m[1].str());
    q.relation = rel == "in"     ? RelationKind::In
                 : rel == "on"   ? RelationKind::On
                 : rel == "near" ? RelationKind::Near
                                 : RelationKind::NextTo;
    if (m[2].matched) {
      q.objectLabel = m[2].str();
      q.owner.kind = OwnerRefKind::The;
    } else {
      q.deictic = true;
    }
    return q;
  }
  if (std::regex_match(s, m, assert_label)) {
    q.intent = Intent::AssertLabel;
    q.objectLabel = m[3].str();
    q.deictic = true;
    if (lower(m[1].str()) == "my") {
      q.owner.kind = OwnerRefKind::My;
    } else {
      q.owner = {OwnerRefKind::Named, m[2].str()};
    }
    return q;
  }
  throw Error("unparsed-utterance", s);
}

std::pair<double, double> ray_box_distance(const Ray& ray, const Aabb& box) {
  // Distance to a convex set along a ray is convex in the ray parameter.
  auto at = [&](double s) { return point_box_distance(ray.origin + ray.direction * s, box); };
  if (segment_intersects_box(ray.origin, ray.origin + ray.direction * kMaxPointingRange, box)) {
    const auto span = clip_segment(ray.origin, ray.origin + ray.direction * kMaxPointingRange, box);
    return {0.0, span->first * kMaxPointingRange};
  }
  constexpr double kInvPhi = 0.6180339887498949;
  double lo = 0.0;
  double hi = kMaxPointingRange;
  double a = hi - kInvPhi * (hi - lo);
  double b = lo + kInvPhi * (hi - lo);
  double fa = at(a);
  double fb = at(b);
  while (hi - lo > 1e-7) {
    if (fa <= fb) {
      hi = b, b = a, fb = fa;
      a = hi - kInvPhi * (hi - lo);
      fa = at(a);
    } else {
      lo = a, a = b, fa = fb;
      b = lo + kInvPhi * (hi - lo);
      fb = at(b);
    }
  }
  const double s = 0.5 * (lo + hi);
  const double d0 = at(0.0);
  if (d0 <= at(s)) return {d0, 0.0};
  return {at(s), s};
}

GroundResult ground(const Query& q, const KnowledgeBase& kb, std::span<const TrackedEntity> tracks,
                    const std::optional<Ray>& pointing, const std::optional<std::string>& speaker,
                    double now) {
  if (q.deictic) {
    if (!pointing) return NoPointing{};
    // Utterances fall between frames; visibility is judged at the latest one.
    double seen = now;
    if (!tracks.empty()) {
      seen = std::max_element(tracks.begin(), tracks.end(), [](const TrackedEntity& a, const TrackedEntity& b) {
               return a.lastSeen < b.lastSeen;
             })->lastSeen;
    }
    auto pick = [&](bool label_only) -> std::optional<std::string> {
      const TrackedEntity* best = nullptr;
      double best_d = 0.0;
      double best_range = 0.0;
      for (const TrackedEntity& t : tracks) {
        if (t.kind != EntityKind::WorkObject || !t.present_at(seen)) continue;
        if (label_only) {
          const ObjectFact* f = kb.object(t.id);
          const std::optional<std::string>& label = f && f->label ? f->label : t.label;
          if (!label || !q.objectLabel || !iequals(*label, *q.objectLabel)) continue;
        }
        const auto [d, range] = ray_box_distance(*pointing, t.boundingBox);
        if (d > kPointingTolerance) continue;
        if (!best || d < best_d - kSameDistance ||
            (std::abs(d - best_d) <= kSameDistance && range < best_range)) {
          best = &t;
          best_d = d;
          best_range = range;
        }
      }
      if (best) return best->id;
      return std::nullopt;
    };
    // A spoken label narrows the choice unless the user is naming the thing.
    std::optional<std::string> id;
    if (q.intent != Intent::AssertLabel && q.objectLabel) id = pick(true);
    if (!id) id = pick(false);
    if (id) return Grounded{*id};
    return NotFound{};
  }

  if (!q.objectLabel) return NotFound{};
  std::optional<std::string> owner;
  switch (q.owner.kind) {
    case OwnerRefKind::My:
      if (!speaker) return NotFound{};
      owner = *speaker;
      break;
    case OwnerRefKind::Your:
      return NotFound{};
    case OwnerRefKind::Named: {
      const PersonFact* p = kb.find_person(q.owner.name);
      if (!p) return NotFound{};
      owner = p->personId;
      break;
    }
    default:
      break;
  }
  const LocateResult found = kb.locate(*q.objectLabel, owner);
  if (const auto* fact = std::get_if<ObjectFact>(&found)) return Grounded{fact->objectId};
  if (const auto* many = std::get_if<std::vector<ObjectFact>>(&found)) {
    Candidates c;
    for (const ObjectFact& f : *many) c.ids.push_back(f.objectId);
    return c;
  }
  return NotFound{};
}

Answer render_answer(const ObjectFact& fact, const KnowledgeBase& kb) {
  Answer answer;
  answer.groundedObject = fact.objectId;
  const std::vector<Clause> clauses = clauses_for(fact, kb);

  if (fact.present) {
    std::vector<const Clause*> chosen;
    for (const Clause& c : clauses) {
      if (chosen.size() == 2) break;
      const bool repeat = std::any_of(chosen.begin(), chosen.end(), [&](const Clause* p) {
        return p->landmarkId == c.landmarkId;
      });
      if (!repeat) chosen.push_back(&c);
    }
    std::stable_partition(chosen.begin(), chosen.end(), [](const Clause* c) { return !c->under; });
    if (!chosen.empty()) {
      answer.text = "It is ";
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        if (i > 0) answer.text += ", ";
        answer.text += chosen[i]->text;
        answer.relationsUsed.push_back(chosen[i]->relation);
      }
      return answer;
    }
    for (const Relation& r : fact.lastStableRelations) {
      if (r.kind == RelationKind::InLocation && r.subject == fact.objectId) {
        answer.text = "It is in the " + r.object;
        answer.relationsUsed.push_back(r);
        return answer;
      }
    }
  }

  // Historical description; nothing here is claimed to hold right now.
  answer.text = "I last saw it at " + format_seconds(fact.lastSeenAt) + " seconds";
  if (!clauses.empty()) {
    const auto side = std::find_if(clauses.begin(), clauses.end(), [](const Clause& c) { return !c.under; });
    answer.text += " near the " + (side != clauses.end() ? *side : clauses.front()).landmarkName;
  } else if (!fact.lastRegions.empty()) {
    answer.text += " in the " + fact.lastRegions.front();
  }
  return answer;
}

double event_time(const DialogEvent& ev) {
  return std::visit([](const auto& e) { return e.t; }, ev);
}

std::string_view mode_name(const AttentionState& s) {
  if (std::holds_alternative<DialogAttending>(s.mode)) return "attending";
  if (std::holds_alternative<DialogEngaged>(s.mode)) return "engaged";
  return "idle";
}

std::optional<Answer> DialogManager::on_event(const DialogEvent& ev, const WorldView& world) {
  const double now = event_time(ev);

  if (const auto* a = std::get_if<DialogAttending>(&state_.mode); a && now > a->deadline) {
    state_ = {};
  }
  if (const auto* e = std::get_if<DialogEngaged>(&state_.mode);
      e && now > e->askedAt + kEngagedWindow) {
    state_ = {};
  }

  if (const auto* k = std::get_if<KeywordEvent>(&ev)) {
    state_ = {DialogAttending{now + kAttentionWindow}, k->speaker};
    return std::nullopt;
  }
  if (const auto* g = std::get_if<GazeEvent>(&ev)) {
    state_ = {DialogAttending{now + kAttentionWindow}, g->speaker};
    return std::nullopt;
  }
  const auto* u = std::get_if<UtteranceEvent>(&ev);
  if (!u) return std::nullopt;

  auto [keyword, rest] = split_keyword(u->text);
  if (keyword && rest.empty()) {
    state_ = {DialogAttending{now + kAttentionWindow}, u->speaker};
    return std::nullopt;
  }

  const std::optional<std::string> named_speaker = u->speaker ? u->speaker : state_.speaker;
  const std::optional<std::string> speaker = resolve_speaker(named_speaker, world);

  if (const auto* e = std::get_if<DialogEngaged>(&state_.mode); e && !keyword) {
    const DialogEngaged engaged = *e;
    state_ = {};
    Answer a = follow_up(engaged, rest, speaker, now, world);
    a.time = now;
    a.speaker = speaker;
    return a;
  }

  if (!keyword && !std::holds_alternative<DialogAttending>(state_.mode)) return std::nullopt;

  state_ = {};
  Answer answer;
  try {
    answer = respond(parse_query(rest), speaker, now, world);
  } catch (const Error& err) {
    if (err.code() != "unparsed-utterance") throw;
    answer.text = std::string(kUnparsedReply);
  }
  answer.time = now;
  answer.speaker = speaker;
  return answer;
}

Answer DialogManager::respond(const Query& q, const std::optional<std::string>& speaker,
                              double now, const WorldView& world) {
  const KnowledgeBase& kb = world.kb;
  const GroundResult g = ground(q, kb, world.tracks, pointing_of(speaker, world), speaker, now);
  const std::string label = q.objectLabel.value_or("object");

  if (std::holds_alternative<NoPointing>(g)) {
    return Answer{"I cannot tell what you are pointing at.", {}, {}, now, speaker, {}};
  }
  if (const auto* c = std::get_if<Candidates>(&g)) {
    state_ = {DialogEngaged{q, c->ids, now}, speaker};
    return Answer{"Which one? I know " + std::to_string(c->ids.size()) + " objects called " + label +
                      ".",
                  {}, {}, now, speaker, {}};
  }
  if (std::holds_alternative<NotFound>(g)) {
    if (q.intent == Intent::WhereIs && q.owner.kind == OwnerRefKind::Your) {
      return Answer{"I do not own a " + label + ".", {}, {}, now, speaker, {}};
    }
    if (q.deictic) return Answer{"I do not see anything there.", {}, {}, now, speaker, {}};
    return Answer{"I have not seen " + referent_phrase(q, label) + ".", {}, {}, now, speaker, {}};
  }

  const std::string id = std::get<Grounded>(g).id;
  const ObjectFact* fact = kb.object(id);
  const std::string name = kb.display_name(id);

  switch (q.intent) {
    case Intent::WhereIs: {
      if (!fact) return Answer{"I have not seen " + referent_phrase(q, label) + ".", {}, {}, now, speaker, {}};
      return render_answer(*fact, kb);
    }
    case Intent::WhoseIs: {
      Answer a{{}, id, {}, now, speaker, {}};
      if (const auto owner = kb.owner_of(id)) {
        a.text = "It is " + owner_phrase(*owner, speaker, kb) + " " + name + ".";
        if (fact) {
          if (auto r = stable_relation(*fact, RelationKind::Belongs, *owner)) {
            a.relationsUsed.push_back(*r);
          }
        }
      } else {
        a.text = "I do not know whose " + name + " that is.";
      }
      return a;
    }
    case Intent::WhatIsRelated: {
      Answer a{{}, id, {}, now, speaker, {}};
      std::vector<std::string> names;
      if (fact) {
        for (const Relation& r : fact->lastStableRelations) {
          if (r.kind == *q.relation && r.object == id) {
            names.push_back(kb.display_name(r.subject));
            a.relationsUsed.push_back(r);
          }
        }
      }
      const std::string where = relation_phrase(*q.relation) + " the " + name;
      a.text = names.empty() ? "I see nothing " + where + "." : "I see " + join_names(names) + " " + where + ".";
      return a;
    }
    case Intent::AssertLabel: {
      LabelAssertion assertion{id, label, std::nullopt};
      std::string whose = "your";
      if (q.owner.kind == OwnerRefKind::My) {
        assertion.ownerId = speaker;
      } else if (const PersonFact* p = kb.find_person(q.owner.name)) {
        assertion.ownerId = p->personId;
        whose = kb.display_name(p->personId) + "'s";
      } else {
        whose = q.owner.name + "'s";
      }
      Answer a{"OK, this is " + whose + " " + label + ".", id, {}, now, speaker, assertion};
      const auto existing = kb.owner_of(id);
      if (existing && assertion.ownerId && *existing != *assertion.ownerId) {
        a.text = "OK, but I think it belongs to " + kb.display_name(*existing) + ".";
      }
      return a;
    }
  }
  return Answer{std::string(kUnparsedReply), {}, {}, now, speaker, {}};
}

Answer DialogManager::follow_up(const DialogEngaged& engaged, const std::string& text,
                                const std::optional<std::string>& speaker, double now,
                                const WorldView& world) {
  // A complete request starts over instead of answering the question.
  try {
    return respond(parse_query(text), speaker, now, world);
  } catch (const Error& err) {
    if (err.code() != "unparsed-utterance") throw;
  }

  static const std::regex mine(R"(^(?:mine|my one|the one that is mine)$)", std::regex::icase);
  static const std::regex named(R"(^(?:the one that is )?(\S+)'s(?: one)?$)", std::regex::icase);
  static const std::regex deictic(R"(^(?:this|that)(?: one)?$)", std::regex::icase);

  const KnowledgeBase& kb = world.kb;
  std::vector<std::string> remaining;
  std::smatch m;
  const std::string s = split_keyword(text).second;
  if (std::regex_match(s, m, mine)) {
    for (const std::string& id : engaged.candidates) {
      if (speaker && kb.owner_of(id) == *speaker) remaining.push_back(id);
    }
  } else if (std::regex_match(s, m, named)) {
    if (const PersonFact* p = kb.find_person(m[1].str())) {
      for (const std::string& id : engaged.candidates) {
        if (kb.owner_of(id) == p->personId) remaining.push_back(id);
      }
    }
  } else if (std::regex_match(s, m, deictic)) {
    Query q = engaged.pending;
    q.deictic = true;
    const GroundResult g = ground(q, kb, world.tracks, pointing_of(speaker, world), speaker, now);
    if (const auto* hit = std::get_if<Grounded>(&g)) {
      if (std::find(engaged.candidates.begin(), engaged.candidates.end(), hit->id) !=
          engaged.candidates.end()) {
        remaining.push_back(hit->id);
      }
    }
  }

  if (remaining.size() != 1) {
    return Answer{"Sorry, I still cannot tell which one you mean.", {}, {}, now, speaker, {}};
  }
  // Only location questions can yield several candidates.
  const ObjectFact* fact = kb.object(remaining.front());
  if (!fact) return Answer{"I have not seen it.", {}, {}, now, speaker, {}};
  return render_answer(*fact, kb);
}

}  // namespace scenekeeper
