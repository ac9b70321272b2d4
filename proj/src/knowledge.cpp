#include "scenekeeper/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "scenekeeper/error.hpp"

namespace scenekeeper {
namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kFormat = "scenekeeper-kb";
constexpr int kVersion = 1;

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool mentions(const Relation& r, const std::string& id) { return r.subject == id || r.object == id; }

Json vec_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

Json optional_json(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

Json relation_json(const Relation& r) {
  return Json{{"kind", std::string(to_string(r.kind))},
              {"subject", r.subject},
              {"object", r.object},
              {"since", r.since}};
}

// Field access that reports the missing or mistyped field by name.
const Json& field(const Json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw Error("snapshot", std::string("missing field '") + name + "'");
  return *it;
}

std::string get_string(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_string()) throw Error("snapshot", std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

double get_number(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number()) throw Error("snapshot", std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

bool get_bool(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_boolean()) throw Error("snapshot", std::string("field '") + name + "' must be a boolean");
  return v.get<bool>();
}

std::optional<std::string> get_optional_string(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) throw Error("snapshot", std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

Vec3 get_vec(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number()) {
    throw Error("snapshot", std::string("field '") + name + "' must be a 3-vector");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

Relation get_relation(const Json& j) {
  const auto kind = parse_relation_kind(get_string(j, "kind"));
  if (!kind) throw Error("snapshot", "unknown relation kind");
  return {*kind, get_string(j, "subject"), get_string(j, "object"), get_number(j, "since")};
}

}  // namespace

std::string_view to_string(AlertKind kind) {
  return kind == AlertKind::Missing ? "Missing" : "Misplaced";
}

void KnowledgeBase::record_frame(const RelationSet& rs, std::span<const TrackedEntity> tracks,
                                 std::span<const OwnershipRecord> newOwnerships) {
  const double now = rs.frameTime;
  if (last_time_ && now < *last_time_) {
    throw Error("time-regression", "knowledge base already at t=" + std::to_string(*last_time_));
  }
  last_time_ = now;

  for (const OwnershipRecord& r : newOwnerships) add_ownership(r);

  for (const TrackedEntity& t : tracks) {
    const bool present = t.present_at(now);
    if (t.kind == EntityKind::Person) {
      PersonFact& p = persons_[t.id];
      p.personId = t.id;
      if (t.label) p.label = t.label;
      p.present = present;
      if (present) {
        p.lastSeenAt = now;
        p.lastCentroid = t.centroid;
      }
      continue;
    }

    ObjectFact& f = objects_[t.id];
    f.objectId = t.id;
    if (!f.labelAsserted) {
      if (t.label) {
        f.label = t.label;
      } else if (!f.label) {
        f.label = t.id;
      }
    }
    f.present = present;
    if (!present) continue;

    f.lastSeenAt = now;
    f.lastCentroid = t.centroid;
    f.lastStableRelations.clear();
    std::vector<std::string> regions;
    for (const Relation& r : rs.stable) {
      if (!mentions(r, t.id)) continue;
      f.lastStableRelations.push_back(r);
      if (r.kind == RelationKind::LastTouchedBy && r.subject == t.id) f.lastTouchedBy = r.object;
      if (r.kind == RelationKind::InLocation && r.subject == t.id) regions.push_back(r.object);
    }
    if (!regions.empty()) f.lastRegions = std::move(regions);
  }

  for (const auto& [id, e] : expectations_) {
    for (const auto& [oid, f] : objects_) {
      if (f.present && f.label && iequals(*f.label, e.objectLabel) &&
          rs.has_stable(RelationKind::InLocation, oid, e.region)) {
        watch_[id].lastPresentAt = now;
        break;
      }
    }
  }
}

bool KnowledgeBase::add_ownership(const OwnershipRecord& record) {
  return ownership_.emplace(record.objectId, record).second;
}

std::optional<std::string> KnowledgeBase::owner_of(const std::string& objectId) const {
  if (const auto it = ownership_.find(objectId); it != ownership_.end()) return it->second.ownerId;
  return std::nullopt;
}

std::vector<std::string> KnowledgeBase::objects_of(const std::string& personId) const {
  std::vector<std::string> out;
  for (const auto& [id, r] : ownership_) {
    if (r.ownerId == personId) out.push_back(id);
  }
  return out;
}

LocateResult KnowledgeBase::locate(const std::string& label,
                                   const std::optional<std::string>& owner) const {
  std::vector<ObjectFact> matches;
  for (const auto& [id, f] : objects_) {
    if (!f.label || !iequals(*f.label, label)) continue;
    if (owner && owner_of(id) != owner) continue;
    matches.push_back(f);
  }
  if (matches.empty()) return NotFound{};
  if (matches.size() == 1) return matches.front();
  return matches;
}

void KnowledgeBase::assert_label(const std::string& objectId, const std::string& label) {
  ObjectFact& f = objects_[objectId];
  f.objectId = objectId;
  f.label = label;
  f.labelAsserted = true;
}

const ObjectFact* KnowledgeBase::object(const std::string& id) const {
  const auto it = objects_.find(id);
  return it == objects_.end() ? nullptr : &it->second;
}

const PersonFact* KnowledgeBase::person(const std::string& id) const {
  const auto it = persons_.find(id);
  return it == persons_.end() ? nullptr : &it->second;
}

const PersonFact* KnowledgeBase::find_person(const std::string& nameOrId) const {
  if (const PersonFact* p = person(nameOrId)) return p;
  for (const auto& [id, p] : persons_) {
    if (p.label && iequals(*p.label, nameOrId)) return &p;
  }
  return nullptr;
}

std::string KnowledgeBase::display_name(const std::string& id) const {
  if (const ObjectFact* f = object(id); f && f->label) return *f->label;
  if (const PersonFact* p = person(id); p && p->label) return *p->label;
  return id;
}

void KnowledgeBase::add_expectation(const Expectation& e, double now) {
  if (!(e.missingAfter > 0.0)) throw Error("invalid-expectation", "missingAfter must be positive");
  if (!expectations_.emplace(e.id, e).second) throw Error("invalid-expectation", "duplicate id " + e.id);
  watch_[e.id].lastPresentAt = now;
}

std::vector<Alert> KnowledgeBase::check_expectations(double now) {
  for (const auto& [id, e] : expectations_) {
    const bool missing = now - watch_[id].lastPresentAt > e.missingAfter;

    bool at_home = false;
    bool elsewhere = false;
    for (const auto& [oid, f] : objects_) {
      if (!f.label || !iequals(*f.label, e.objectLabel) || f.lastRegions.empty()) continue;
      if (std::find(f.lastRegions.begin(), f.lastRegions.end(), e.region) != f.lastRegions.end()) {
        at_home = true;
      } else {
        elsewhere = true;
      }
    }
    const bool misplaced = elsewhere && !at_home;

    for (const auto& [kind, active] : {std::pair{AlertKind::Missing, missing},
                                       std::pair{AlertKind::Misplaced, misplaced}}) {
      const auto key = std::pair{id, kind};
      if (active) {
        alerts_.try_emplace(key, Alert{kind, id, e.objectLabel, e.region, now});
      } else {
        alerts_.erase(key);
      }
    }
  }
  return active_alerts();
}

std::vector<Alert> KnowledgeBase::active_alerts() const {
  std::vector<Alert> out;
  for (const auto& [key, a] : alerts_) out.push_back(a);
  return out;
}

std::string KnowledgeBase::snapshot() const {
  std::ostringstream out;
  std::size_t count = 0;
  auto line = [&](const Json& j) {
    out << j.dump() << '\n';
    ++count;
  };

  line(Json{{"format", kFormat},
            {"version", kVersion},
            {"lastFrameTime", last_time_ ? Json(*last_time_) : Json(nullptr)}});
  for (const auto& [id, p] : persons_) {
    line(Json{{"record", "person"},
              {"personId", p.personId},
              {"label", optional_json(p.label)},
              {"lastSeenAt", p.lastSeenAt},
              {"lastCentroid", vec_json(p.lastCentroid)},
              {"present", p.present}});
  }
  for (const auto& [id, f] : objects_) {
    Json relations = Json::array();
    for (const Relation& r : f.lastStableRelations) relations.push_back(relation_json(r));
    line(Json{{"record", "object"},
              {"objectId", f.objectId},
              {"label", optional_json(f.label)},
              {"labelAsserted", f.labelAsserted},
              {"lastSeenAt", f.lastSeenAt},
              {"lastCentroid", vec_json(f.lastCentroid)},
              {"lastStableRelations", relations},
              {"lastTouchedBy", optional_json(f.lastTouchedBy)},
              {"lastRegions", f.lastRegions},
              {"present", f.present}});
  }
  for (const auto& [id, r] : ownership_) {
    line(Json{{"record", "ownership"},
              {"objectId", r.objectId},
              {"ownerId", r.ownerId},
              {"assignedAt", r.assignedAt}});
  }
  for (const auto& [id, e] : expectations_) {
    const auto w = watch_.find(id);
    line(Json{{"record", "expectation"},
              {"id", e.id},
              {"objectLabel", e.objectLabel},
              {"region", e.region},
              {"missingAfter", e.missingAfter},
              {"lastPresentAt", w == watch_.end() ? 0.0 : w->second.lastPresentAt}});
  }
  for (const auto& [key, a] : alerts_) {
    line(Json{{"record", "alert"},
              {"kind", std::string(to_string(a.kind))},
              {"expectationId", a.expectationId},
              {"objectLabel", a.objectLabel},
              {"region", a.region},
              {"raisedAt", a.raisedAt}});
  }
  out << Json{{"record", "end"}, {"count", count}}.dump() << '\n';
  return out.str();
}

void KnowledgeBase::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << snapshot();
  if (!out) throw Error("io", "write failed for " + path.string());
}

void KnowledgeBase::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  load_text(buf.str());
}

void KnowledgeBase::load_text(const std::string& text) {
  KnowledgeBase kb;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::size_t records = 0;
  bool ended = false;

  try {
    while (std::getline(in, raw)) {
      ++line_no;
      if (ended) throw Error("snapshot", "content after end record");
      Json j;
      try {
        j = Json::parse(raw);
      } catch (const Json::parse_error& e) {
        throw Error("snapshot", std::string("malformed JSON: ") + e.what());
      }
      if (!j.is_object()) throw Error("snapshot", "record must be an object");

      if (line_no == 1) {
        if (get_string(j, "format") != kFormat) throw Error("snapshot", "not a knowledge snapshot");
        if (get_number(j, "version") != kVersion) throw Error("snapshot", "unsupported version");
        const Json& t = field(j, "lastFrameTime");
        if (!t.is_null()) kb.last_time_ = get_number(j, "lastFrameTime");
        ++records;
        continue;
      }

      const std::string kind = get_string(j, "record");
      if (kind == "end") {
        if (static_cast<std::size_t>(get_number(j, "count")) != records) {
          throw Error("snapshot", "record count mismatch");
        }
        ended = true;
      } else if (kind == "person") {
        PersonFact p{get_string(j, "personId"), get_optional_string(j, "label"),
                     get_number(j, "lastSeenAt"), get_vec(j, "lastCentroid"),
                     get_bool(j, "present")};
        kb.persons_.emplace(p.personId, std::move(p));
      } else if (kind == "object") {
        ObjectFact f;
        f.objectId = get_string(j, "objectId");
        f.label = get_optional_string(j, "label");
        f.labelAsserted = get_bool(j, "labelAsserted");
        f.lastSeenAt = get_number(j, "lastSeenAt");
        f.lastCentroid = get_vec(j, "lastCentroid");
        const Json& rels = field(j, "lastStableRelations");
        if (!rels.is_array()) throw Error("snapshot", "field 'lastStableRelations' must be an array");
        for (const Json& r : rels) f.lastStableRelations.push_back(get_relation(r));
        f.lastTouchedBy = get_optional_string(j, "lastTouchedBy");
        const Json& regions = field(j, "lastRegions");
        if (!regions.is_array()) throw Error("snapshot", "field 'lastRegions' must be an array");
        for (const Json& r : regions) {
          if (!r.is_string()) throw Error("snapshot", "field 'lastRegions' must hold strings");
          f.lastRegions.push_back(r.get<std::string>());
        }
        f.present = get_bool(j, "present");
        kb.objects_.emplace(f.objectId, std::move(f));
      } else if (kind == "ownership") {
        OwnershipRecord r{get_string(j, "objectId"), get_string(j, "ownerId"),
                          get_number(j, "assignedAt")};
        if (!kb.add_ownership(r)) throw Error("snapshot", "duplicate ownership for " + r.objectId);
      } else if (kind == "expectation") {
        Expectation e{get_string(j, "id"), get_string(j, "objectLabel"), get_string(j, "region"),
                      get_number(j, "missingAfter")};
        kb.watch_[e.id].lastPresentAt = get_number(j, "lastPresentAt");
        kb.expectations_.emplace(e.id, std::move(e));
      } else if (kind == "alert") {
        const std::string k = get_string(j, "kind");
        if (k != "Missing" && k != "Misplaced") throw Error("snapshot", "unknown alert kind");
        Alert a{k == "Missing" ? AlertKind::Missing : AlertKind::Misplaced,
                get_string(j, "expectationId"), get_string(j, "objectLabel"),
                get_string(j, "region"), get_number(j, "raisedAt")};
        kb.alerts_.emplace(std::pair{a.expectationId, a.kind}, std::move(a));
      } else {
        throw Error("snapshot", "unknown record type '" + kind + "'");
      }
      if (kind != "end") ++records;
    }
    if (line_no == 0) throw Error("snapshot", "empty document");
    if (!ended) {
      ++line_no;
      throw Error("snapshot", "truncated document, end record missing");
    }
  } catch (const Error& e) {
    const std::string& why = e.code() == "snapshot" ? e.detail() : std::string(e.what());
    throw Error("snapshot", "line " + std::to_string(line_no) + ": " + why);
  }
  *this = std::move(kb);
}

}  // namespace scenekeeper
