#include "scenekeeper/service.hpp"

#include <condition_variable>
#include <deque>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "scenekeeper/error.hpp"
#include "scenekeeper/stream.hpp"

namespace scenekeeper {
namespace {

using Json = nlohmann::ordered_json;

Json vec_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }
Json box_json(const Aabb& b) { return Json{{"min", vec_json(b.min)}, {"max", vec_json(b.max)}}; }
Json opt(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

Json relation_json(const Relation& r) {
  return Json{{"kind", std::string(to_string(r.kind))},
              {"subject", r.subject},
              {"object", r.object},
              {"since", r.since}};
}

std::string_view state_name(const TrackedEntity& t) {
  if (t.is_lost()) return "lost";
  if (t.is_held()) return "held";
  return "visible";
}

Json entity_json(const Session& s, const TrackedEntity& t) {
  const double now = s.now().value_or(0.0);
  Json j{{"id", t.id},
         {"kind", t.kind == EntityKind::Person ? "person" : "object"},
         {"label", nullptr},
         {"centroid", vec_json(t.centroid)},
         {"bbox", box_json(t.boundingBox)},
         {"state", std::string(state_name(t))},
         {"present", t.present_at(now)}};
  if (t.kind == EntityKind::Person) {
    j["label"] = opt(t.label);
    Json hands = Json::array();
    for (const Hand& h : t.hands) {
      Json hj{{"pos", vec_json(h.position)}};
      if (h.pointing) hj["pointing"] = vec_json(*h.pointing);
      hands.push_back(hj);
    }
    j["hands"] = hands;
    return j;
  }
  const ObjectFact* f = s.kb().object(t.id);
  j["label"] = f ? opt(f->label) : opt(t.label);
  if (const auto* held = std::get_if<Held>(&t.state)) j["heldBy"] = held->agentId;
  j["owner"] = opt(s.kb().owner_of(t.id));
  j["lastTouchedBy"] = f ? opt(f->lastTouchedBy) : Json(nullptr);
  return j;
}

Json alert_json(const Alert& a) {
  return Json{{"kind", std::string(to_string(a.kind))},
              {"expectation", a.expectationId},
              {"label", a.objectLabel},
              {"region", a.region},
              {"raisedAt", a.raisedAt}};
}

Json alerts_array(const Session& s) {
  Json out = Json::array();
  for (const Alert& a : s.kb().active_alerts()) out.push_back(alert_json(a));
  return out;
}

Json attention_json(const AttentionState& st) {
  Json j{{"mode", std::string(mode_name(st))}, {"speaker", opt(st.speaker)}};
  if (const auto* a = std::get_if<DialogAttending>(&st.mode)) j["deadline"] = a->deadline;
  if (const auto* e = std::get_if<DialogEngaged>(&st.mode)) j["candidates"] = e->candidates;
  return j;
}

Json answer_object(const Answer& a) {
  Json rel = Json::array();
  for (const Relation& r : a.relationsUsed) rel.push_back(relation_json(r));
  Json j{{"answered", true},
         {"text", a.text},
         {"groundedObject", opt(a.groundedObject)},
         {"relationsUsed", rel},
         {"time", a.time},
         {"speaker", opt(a.speaker)}};
  if (a.assertion) {
    j["assertion"] = Json{{"objectId", a.assertion->objectId},
                          {"label", a.assertion->label},
                          {"ownerId", opt(a.assertion->ownerId)}};
  }
  return j;
}

Json regions_json(const Session& s) {
  Json out = Json::array();
  for (const LocationRegion& r : s.config().regions) {
    out.push_back(Json{{"name", r.name}, {"bbox", box_json(r.box)}});
  }
  return out;
}

// Immutable view of the pipeline handed from the worker to the readers.
struct Published {
  std::uint64_t version = 0;
  std::string state;
  std::string alerts;
  std::map<std::string, std::string> objects;  // id -> GET /objects body
  // Pieces the push channel diffs per client.
  std::map<std::string, std::string> entities;
  std::set<std::string> relations;
  std::string alertList;
  std::string attention;
  std::string regions;
  double t = 0.0;
  std::int64_t frame = 0;
};

Json parse_body(const httplib::Request& req) {
  Json body = Json::parse(req.body.empty() ? std::string("{}") : req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) throw Error("bad-request", "body must be a JSON object");
  return body;
}

std::optional<std::string> optional_string(const Json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error("bad-request", std::string(key) + " must be a string");
  return it->get<std::string>();
}

std::optional<double> optional_number(const Json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw Error("bad-request", std::string(key) + " must be a number");
  return it->get<double>();
}

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, Json{{"error", message}});
}

}  // namespace

std::string answer_json(const Answer& a) { return answer_object(a).dump(); }

std::string state_json(const Session& s, std::int64_t droppedFrames) {
  Json persons = Json::array();
  Json objects = Json::array();
  for (const TrackedEntity& t : s.tracker().tracks()) {
    (t.kind == EntityKind::Person ? persons : objects).push_back(entity_json(s, t));
  }
  Json relations = Json::array();
  for (const Relation& r : s.relations().stable) relations.push_back(relation_json(r));
  Json j{{"t", s.now() ? Json(*s.now()) : Json(nullptr)},
         {"frame", s.last_frame_id() ? Json(*s.last_frame_id()) : Json(nullptr)},
         {"framesProcessed", s.frames_processed()},
         {"droppedFrames", droppedFrames},
         {"persons", persons},
         {"objects", objects},
         {"regions", regions_json(s)},
         {"relations", relations},
         {"alerts", alerts_array(s)},
         {"attention", attention_json(s.attention())}};
  return j.dump();
}

std::optional<std::string> object_json(const Session& s, const std::string& id) {
  const ObjectFact* f = s.kb().object(id);
  if (!f) return std::nullopt;
  Json relations = Json::array();
  for (const Relation& r : f->lastStableRelations) relations.push_back(relation_json(r));
  Json j{{"id", f->objectId},
         {"label", opt(f->label)},
         {"labelAsserted", f->labelAsserted},
         {"present", f->present},
         {"lastSeenAt", f->lastSeenAt},
         {"lastCentroid", vec_json(f->lastCentroid)},
         {"owner", opt(s.kb().owner_of(id))},
         {"lastTouchedBy", opt(f->lastTouchedBy)},
         {"regions", f->lastRegions},
         {"relations", relations}};
  return j.dump();
}

std::string alerts_json(const Session& s) { return Json{{"alerts", alerts_array(s)}}.dump(); }

struct Service::Impl {
  explicit Impl(ServiceConfig c) : cfg(std::move(c)) {}

  ServiceConfig cfg;
  httplib::Server http;
  std::thread httpThread;
  int boundPort = 0;
  bool started = false;
  bool stopped = false;

  // Worker: the only thread touching `session`.
  struct Task {
    std::optional<DetectionFrame> frame;
    std::function<void()> call;
  };
  std::mutex qmu;
  std::condition_variable qcv;
  std::condition_variable qspace;
  std::deque<Task> queue;
  bool busy = false;
  bool workerStop = false;
  std::int64_t dropped = 0;
  std::thread worker;
  std::unique_ptr<Session> session;

  // Snapshots for readers and the push channel.
  std::mutex pubmu;
  std::condition_variable pubcv;
  std::shared_ptr<const Published> published = std::make_shared<Published>();
  std::vector<std::string> answers;
  std::atomic<bool> closing{false};

  // Frame source.
  std::mutex srcmu;  // guards source thread handle and liveScript
  std::thread source;
  std::atomic<bool> sourceStop{false};
  std::atomic<bool> sourceDone{true};
  std::atomic<bool> scenarioRunning{false};
  std::optional<ScenarioScript> liveScript;
  double simTime = 0.0;

  FrameBus bus;
  std::unique_ptr<TcpFrameServer> tcp;
  std::optional<std::int64_t> busLast;

  // ---- worker ----

  void run_worker() {
    for (;;) {
      Task task;
      {
        std::unique_lock lock(qmu);
        qcv.wait(lock, [&] { return workerStop || !queue.empty(); });
        if (queue.empty()) return;
        task = std::move(queue.front());
        queue.pop_front();
        busy = true;
      }
      qspace.notify_all();
      try {
        if (task.frame) {
          session->process(*task.frame);
        } else {
          task.call();
        }
      } catch (const std::exception& e) {
        std::cerr << "pipeline: " << e.what() << '\n';
      }
      publish();
      {
        std::lock_guard lock(qmu);
        busy = false;
      }
      qspace.notify_all();
    }
  }

  void enqueue_frame(DetectionFrame f, bool latestWins) {
    {
      std::unique_lock lock(qmu);
      if (latestWins && !queue.empty() && queue.back().frame) {
        queue.back().frame = std::move(f);
        ++dropped;
      } else {
        qspace.wait(lock, [&] { return queue.size() < 256 || workerStop; });
        queue.push_back({std::move(f), {}});
      }
    }
    qcv.notify_one();
  }

  void enqueue_call(std::function<void()> call) {
    {
      std::lock_guard lock(qmu);
      queue.push_back({std::nullopt, std::move(call)});
    }
    qcv.notify_one();
  }

  template <class F>
  auto run_on_worker(F&& fn) -> decltype(fn()) {
    using R = decltype(fn());
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(fn));
    std::future<R> result = task->get_future();
    enqueue_call([task] { (*task)(); });
    return result.get();
  }

  void publish() {
    auto p = std::make_shared<Published>();
    const Session& s = *session;
    std::int64_t drops;
    {
      std::lock_guard lock(qmu);
      drops = dropped;
    }
    p->state = state_json(s, drops);
    p->alerts = alerts_json(s);
    for (const auto& [id, f] : s.kb().objects()) p->objects[id] = *object_json(s, id);
    for (const TrackedEntity& t : s.tracker().tracks()) p->entities[t.id] = entity_json(s, t).dump();
    for (const Relation& r : s.relations().stable) p->relations.insert(relation_json(r).dump());
    p->alertList = alerts_array(s).dump();
    p->attention = attention_json(s.attention()).dump();
    p->regions = regions_json(s).dump();
    p->t = s.now().value_or(0.0);
    p->frame = s.last_frame_id().value_or(0);
    {
      std::lock_guard lock(pubmu);
      p->version = published->version + 1;
      published = std::move(p);
    }
    pubcv.notify_all();
  }

  std::shared_ptr<const Published> current() {
    std::lock_guard lock(pubmu);
    return published;
  }

  void record_answer(const Answer& a) {
    {
      std::lock_guard lock(pubmu);
      answers.push_back(answer_json(a));
    }
    pubcv.notify_all();
  }

  // ---- sources ----

  void forward_to_bus(const DetectionFrame& f) {
    if (!tcp || (busLast && f.frame <= *busLast)) return;
    busLast = f.frame;
    bus.publish(f);
  }

  void stop_source() {
    std::thread running;
    {
      std::lock_guard lock(srcmu);
      running = std::move(source);
    }
    sourceStop = true;
    if (running.joinable()) running.join();
    sourceStop = false;
    scenarioRunning = false;
  }

  void reset_session(PipelineConfig pc) {
    run_on_worker([this, pc = std::move(pc)]() mutable {
      session = std::make_unique<Session>(std::move(pc));
      std::lock_guard lock(qmu);
      dropped = 0;
    });
  }

  void start_scenario(ScenarioScript script, RunMode mode, double speed) {
    stop_source();
    reset_session(pipeline_for(script, cfg.pipeline));
    std::lock_guard lock(srcmu);
    liveScript = std::move(script);
    simTime = 0.0;
    scenarioRunning = true;
    sourceDone = false;
    source = std::thread([this, mode, speed] { run_live(mode, speed); });
  }

  void run_live(RunMode mode, double speed) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    DetectorConfig det = cfg.detector;
    std::vector<DialogEvent> events;
    double rate = 30.0;
    {
      std::lock_guard lock(srcmu);
      det.workArea = liveScript->workArea;
      events = liveScript->events;
      rate = liveScript->rate;
    }
    std::size_t nextEvent = 0;
    for (std::int64_t i = 0; !sourceStop; ++i) {
      const double t = quantize(static_cast<double>(i) / rate);
      ScenePose pose;
      std::optional<HeightMap> map;
      {
        std::lock_guard lock(srcmu);
        if (t > liveScript->duration + 1e-9) {
          scenarioRunning = false;
          // Batch runs end with the script; paced runs keep the last scene
          // alive so it can still be inspected and edited.
          if (speed == 0.0) break;
          liveScript->duration = t;
        }
        simTime = t;
        pose = pose_at(*liveScript, t);
        if (mode == RunMode::ViaHeightMaps) map = render_height_map(*liveScript, t);
      }
      DetectionFrame f = map ? quantize(detect_frame(*map, det, t)) : frame_from_pose(pose, i + 1);
      f.frame = i + 1;
      f.t = t;
      if (speed > 0.0) {
        std::this_thread::sleep_until(
            start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(t / speed)));
        if (sourceStop) break;
      }
      forward_to_bus(f);
      enqueue_frame(std::move(f), speed > 0.0);
      const double nextT = static_cast<double>(i + 1) / rate;
      while (nextEvent < events.size() && event_time(events[nextEvent]) < nextT) {
        DialogEvent ev = events[nextEvent++];
        enqueue_call([this, ev] {
          if (auto a = session->handle(ev)) record_answer(*a);
        });
      }
    }
    scenarioRunning = false;
    sourceDone = true;
    qcv.notify_all();
  }

  void start_replay(const std::filesystem::path& path, double speed) {
    stop_source();
    reset_session(cfg.pipeline);
    std::lock_guard lock(srcmu);
    liveScript.reset();
    sourceDone = false;
    source = std::thread([this, path, speed] {
      try {
        replay(path, speed, [&](const DetectionFrame& f) {
          forward_to_bus(f);
          enqueue_frame(f, speed > 0.0);
        }, &sourceStop);
      } catch (const std::exception& e) {
        std::cerr << "replay: " << e.what() << '\n';
      }
      sourceDone = true;
    });
  }

  // ---- HTTP ----

  void routes() {
    http.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, Json{{"status", "ok"}});
    });
    http.Get("/state", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(current()->state, "application/json");
    });
    http.Get("/alerts", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(current()->alerts, "application/json");
    });
    http.Get(R"(/objects/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto p = current();
      const auto it = p->objects.find(req.matches[1].str());
      if (it == p->objects.end()) return reply_error(res, 404, "unknown object");
      res.set_content(it->second, "application/json");
    });
    http.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
      Json body;
      std::optional<std::string> text, speaker;
      std::optional<double> time;
      try {
        body = parse_body(req);
        text = optional_string(body, "text");
        speaker = optional_string(body, "speaker");
        time = optional_number(body, "time");
      } catch (const Error& e) {
        return reply_error(res, 400, e.detail());
      }
      if (!text || text->empty()) return reply_error(res, 400, "text is required");
      const std::string out = run_on_worker([&]() -> std::string {
        const double now = session->now().value_or(0.0);
        const double t = time ? std::max(*time, now) : now;
        const std::optional<Answer> a = session->handle(UtteranceEvent{t, *text, speaker});
        if (a) {
          record_answer(*a);
          return answer_json(*a);
        }
        return Json{{"answered", false},
                    {"text", nullptr},
                    {"reason", "not listening"},
                    {"attention", attention_json(session->attention())}}
            .dump();
      });
      res.set_content(out, "application/json");
    });
    http.Post("/events", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> type, speaker;
      std::optional<double> time;
      try {
        const Json body = parse_body(req);
        type = optional_string(body, "type");
        speaker = optional_string(body, "speaker");
        time = optional_number(body, "time");
      } catch (const Error& e) {
        return reply_error(res, 400, e.detail());
      }
      if (type != "keyword" && type != "gaze") return reply_error(res, 400, "type must be keyword or gaze");
      const std::string out = run_on_worker([&]() -> std::string {
        const double now = session->now().value_or(0.0);
        const double t = time ? std::max(*time, now) : now;
        if (*type == "keyword") {
          session->handle(KeywordEvent{t, speaker});
        } else {
          session->handle(GazeEvent{t, speaker});
        }
        return Json{{"attention", attention_json(session->attention())}}.dump();
      });
      res.set_content(out, "application/json");
    });
    http.Post("/scenario", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> path, mode;
      std::optional<double> speed;
      try {
        const Json body = parse_body(req);
        path = optional_string(body, "path");
        mode = optional_string(body, "mode");
        speed = optional_number(body, "speed");
      } catch (const Error& e) {
        return reply_error(res, 400, e.detail());
      }
      if (!path) return reply_error(res, 400, "path is required");
      if (mode && *mode != "frames" && *mode != "heightmaps") {
        return reply_error(res, 400, "mode must be frames or heightmaps");
      }
      if (speed && *speed < 0.0) return reply_error(res, 400, "speed must not be negative");
      if (scenarioRunning) return reply_error(res, 409, "a scenario is already running");
      ScenarioScript script;
      try {
        script = load_scenario(*path);
      } catch (const Error& e) {
        return reply_error(res, 400, e.what());
      }
      const std::string name = script.name;
      start_scenario(std::move(script), mode == "heightmaps" ? RunMode::ViaHeightMaps : RunMode::ViaFrames,
                     speed.value_or(cfg.source.speed));
      reply(res, 202, Json{{"scenario", name}});
    });
    http.Post("/move", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> entity;
      std::vector<double> to;
      try {
        const Json body = parse_body(req);
        entity = optional_string(body, "entity");
        const auto it = body.find("to");
        if (it == body.end() || !it->is_array() || (it->size() != 2 && it->size() != 3)) {
          throw Error("bad-request", "to must hold 2 or 3 numbers");
        }
        for (const Json& v : *it) {
          if (!v.is_number()) throw Error("bad-request", "to must hold numbers");
          to.push_back(v.get<double>());
        }
      } catch (const Error& e) {
        return reply_error(res, 400, e.detail());
      }
      if (!entity) return reply_error(res, 400, "entity is required");
      std::lock_guard lock(srcmu);
      if (!liveScript || sourceDone) return reply_error(res, 409, "no live simulation");
      // Takes effect from the next generated frame on.
      const double t = simTime + 1e-6;
      for (Actor& a : liveScript->actors) {
        if (a.name != *entity) continue;
        std::erase_if(a.path, [&](const ActorKey& k) { return k.t >= t; });
        a.path.push_back({t, to[0], to[1], false});
        return reply(res, 200, Json{{"entity", a.name}, {"t", t}});
      }
      for (Prop& p : liveScript->props) {
        if (p.label != *entity) continue;
        std::erase_if(p.timeline, [&](const PropKey& k) { return k.t >= t; });
        p.timeline.push_back({t, PropKeyKind::Rest, {to[0], to[1], to.size() == 3 ? to[2] : 0.0}, {}});
        return reply(res, 200, Json{{"entity", p.label}, {"t", t}});
      }
      reply_error(res, 404, "unknown entity");
    });
    http.Post("/snapshot", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> path;
      try {
        path = optional_string(parse_body(req), "path");
      } catch (const Error& e) {
        return reply_error(res, 400, e.detail());
      }
      if (!path && !cfg.snapshotPath) return reply_error(res, 400, "path is required");
      const std::filesystem::path target = path ? std::filesystem::path(*path) : *cfg.snapshotPath;
      const std::string err = run_on_worker([&]() -> std::string {
        try {
          session->kb().save(target);
          return {};
        } catch (const std::exception& e) {
          return e.what();
        }
      });
      if (!err.empty()) return reply_error(res, 500, err);
      reply(res, 200, Json{{"path", target.string()}});
    });
    http.Get("/frames", [this](const httplib::Request&, httplib::Response& res) {
      res.set_chunked_content_provider("application/x-ndjson", push_provider());
    });
  }

  // Each push client gets a full state first, then deltas against what it
  // was last sent, plus every answer in order.
  std::function<bool(size_t, httplib::DataSink&)> push_provider() {
    struct Client {
      std::shared_ptr<const Published> sent;
      std::size_t answersSent = 0;
      bool greeted = false;
    };
    auto client = std::make_shared<Client>();
    {
      std::lock_guard lock(pubmu);
      client->answersSent = answers.size();
    }
    return [this, client](size_t, httplib::DataSink& sink) {
      std::shared_ptr<const Published> now;
      std::vector<std::string> fresh;
      {
        std::unique_lock lock(pubmu);
        pubcv.wait_for(lock, std::chrono::milliseconds(500), [&] {
          return closing || !client->greeted || published != client->sent ||
                 answers.size() > client->answersSent;
        });
        now = published;
        fresh.assign(answers.begin() + static_cast<std::ptrdiff_t>(client->answersSent), answers.end());
        client->answersSent = answers.size();
      }
      if (closing) {
        sink.done();
        return false;
      }
      std::string out;
      if (!client->greeted) {
        Json msg = Json::parse(now->state);
        Json full{{"type", "state"}, {"version", now->version}};
        full.update(msg);
        out += full.dump() + "\n";
        client->greeted = true;
      } else if (now != client->sent) {
        out += delta(*client->sent, *now) + "\n";
      }
      client->sent = now;
      for (const std::string& a : fresh) {
        Json msg = Json::parse(a);
        Json wrapped{{"type", "answer"}};
        wrapped.update(msg);
        out += wrapped.dump() + "\n";
      }
      if (out.empty()) out = Json{{"type", "ping"}}.dump() + "\n";
      if (!sink.is_writable() || !sink.write(out.data(), out.size())) return false;
      return true;
    };
  }

  static std::string delta(const Published& before, const Published& after) {
    Json upserted = Json::array();
    Json removed = Json::array();
    for (const auto& [id, body] : after.entities) {
      const auto it = before.entities.find(id);
      if (it == before.entities.end() || it->second != body) upserted.push_back(Json::parse(body));
    }
    for (const auto& [id, body] : before.entities) {
      if (!after.entities.contains(id)) removed.push_back(id);
    }
    Json added_rel = Json::array();
    Json removed_rel = Json::array();
    for (const std::string& r : after.relations) {
      if (!before.relations.contains(r)) added_rel.push_back(Json::parse(r));
    }
    for (const std::string& r : before.relations) {
      if (!after.relations.contains(r)) removed_rel.push_back(Json::parse(r));
    }
    Json d{{"type", "delta"},
           {"version", after.version},
           {"t", after.t},
           {"frame", after.frame},
           {"upserted", upserted},
           {"removed", removed},
           {"relationsAdded", added_rel},
           {"relationsRemoved", removed_rel}};
    if (after.alertList != before.alertList) d["alerts"] = Json::parse(after.alertList);
    if (after.attention != before.attention) d["attention"] = Json::parse(after.attention);
    if (after.regions != before.regions) d["regions"] = Json::parse(after.regions);
    return d.dump();
  }
};

Service::Service(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

Service::~Service() { stop(); }

int Service::port() const { return impl_->boundPort; }

void Service::start() {
  Impl& m = *impl_;
  if (m.started) return;

  // Validate the source before anything starts.
  std::optional<ScenarioScript> script;
  if (m.cfg.source.kind == SourceKind::LiveSim) {
    try {
      script = load_scenario(m.cfg.source.scenario);
    } catch (const Error& e) {
      throw Error("config", e.what());
    }
  } else if (m.cfg.source.kind == SourceKind::Replay && !std::filesystem::exists(m.cfg.source.recording)) {
    throw Error("config", "recording not found: " + m.cfg.source.recording.string());
  }

  m.session = std::make_unique<Session>(m.cfg.pipeline);
  m.publish();
  m.http.new_task_queue = [] { return new httplib::ThreadPool(16); };
  // The library default is SO_REUSEPORT, which would let two services share
  // a port silently.
  m.http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  m.routes();
  if (m.cfg.port == 0) {
    m.boundPort = m.http.bind_to_any_port(m.cfg.host);
    if (m.boundPort < 0) throw Error("bind", m.cfg.host);
  } else {
    if (!m.http.bind_to_port(m.cfg.host, m.cfg.port)) {
      throw Error("bind", m.cfg.host + ":" + std::to_string(m.cfg.port));
    }
    m.boundPort = m.cfg.port;
  }
  if (m.cfg.streamPort) m.tcp = std::make_unique<TcpFrameServer>(m.bus, m.cfg.host, *m.cfg.streamPort);

  m.started = true;
  m.worker = std::thread([&m] { m.run_worker(); });
  m.httpThread = std::thread([&m] { m.http.listen_after_bind(); });
  m.http.wait_until_ready();

  if (script) {
    m.start_scenario(std::move(*script), m.cfg.source.mode, m.cfg.source.speed);
  } else if (m.cfg.source.kind == SourceKind::Replay) {
    m.start_replay(m.cfg.source.recording, m.cfg.source.speed);
  }
}

bool Service::wait_idle(std::chrono::milliseconds timeout) {
  Impl& m = *impl_;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (m.sourceDone) {
      std::lock_guard lock(m.qmu);
      if (m.queue.empty() && !m.busy) return true;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return false;
}

void Service::stop() {
  Impl& m = *impl_;
  if (!m.started || m.stopped) return;
  m.stopped = true;
  m.stop_source();
  {
    std::lock_guard lock(m.qmu);
    m.workerStop = true;
  }
  m.qcv.notify_all();
  m.qspace.notify_all();
  if (m.worker.joinable()) m.worker.join();
  if (m.cfg.snapshotPath) {
    try {
      m.session->kb().save(*m.cfg.snapshotPath);
    } catch (const std::exception& e) {
      std::cerr << "snapshot: " << e.what() << '\n';
    }
  }
  m.closing = true;
  m.pubcv.notify_all();
  m.bus.close();
  if (m.tcp) m.tcp->stop();
  m.http.stop();
  if (m.httpThread.joinable()) m.httpThread.join();
}

}  // namespace scenekeeper
