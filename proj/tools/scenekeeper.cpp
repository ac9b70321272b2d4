// Command-line front end: runs the service, records and replays frame
// streams, plays scenario scripts and talks to a running service.

#include <csignal>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"
#include "scenekeeper/config.hpp"
#include "scenekeeper/error.hpp"
#include "scenekeeper/pipeline.hpp"
#include "scenekeeper/service.hpp"
#include "scenekeeper/simulator.hpp"
#include "scenekeeper/stream.hpp"

namespace sk = scenekeeper;
using Json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAssert = 2;

sk::RunMode parse_mode(const std::string& mode) {
  return mode == "heightmaps" ? sk::RunMode::ViaHeightMaps : sk::RunMode::ViaFrames;
}

sk::PipelineConfig base_pipeline(const std::string& configPath) {
  if (configPath.empty()) return {};
  return sk::load_config(configPath).pipeline;
}

std::vector<std::string> read_expected(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sk::Error("config", "cannot read " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.push_back(line);
  }
  return out;
}

std::string fmt_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", t);
  return buf;
}

int cmd_run(const std::string& configPath) {
  const sk::ServiceConfig cfg = sk::load_config(configPath);

  // Block termination signals in every thread; the main thread collects
  // them with sigwait once the service is up.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  sk::Service service(cfg);
  service.start();
  std::cerr << "listening on " << cfg.host << ":" << service.port() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down" << std::endl;
  service.stop();
  return kExitOk;
}

int cmd_replay(const std::string& file, double speed, const std::string& configPath,
               const std::string& snapshot) {
  sk::Session session(base_pipeline(configPath));
  const auto start = std::chrono::steady_clock::now();
  const std::int64_t n = sk::replay(file, speed, [&](const sk::DetectionFrame& f) { session.process(f); });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << n << " frames in " << fmt_time(secs) << " s\n";
  for (const sk::Alert& a : session.kb().active_alerts()) {
    std::cout << "alert " << sk::to_string(a.kind) << " " << a.objectLabel << " (" << a.region << ")\n";
  }
  if (!snapshot.empty()) session.kb().save(snapshot);
  return kExitOk;
}

int cmd_record(const std::string& file, const std::string& scenario, const std::string& mode,
               const std::string& from, std::int64_t limit) {
  if (scenario.empty() == from.empty()) throw sk::Error("config", "give exactly one of --scenario or --from");
  sk::FrameRecorder rec(file);
  if (!scenario.empty()) {
    const sk::ScenarioScript script = sk::load_scenario(scenario);
    for (const auto& f : sk::run_scenario(script, parse_mode(mode), false).frames) rec.write(f);
  } else {
    const auto colon = from.rfind(':');
    if (colon == std::string::npos) throw sk::Error("config", "--from expects host:port");
    sk::TcpFrameClient client(from.substr(0, colon), std::stoi(from.substr(colon + 1)));
    while (limit <= 0 || rec.count() < limit) {
      auto f = client.next();
      if (!f) break;
      rec.write(*f);
    }
  }
  rec.close();
  std::cout << rec.count() << " frames written to " << file << "\n";
  return kExitOk;
}

int cmd_scenario(const std::string& file, const std::string& expectedPath, const std::string& mode,
                 const std::string& configPath, const std::string& snapshot, const std::string& recordPath) {
  const sk::ScenarioScript script = sk::load_scenario(file);
  const std::vector<std::string> expected =
      expectedPath.empty() ? std::vector<std::string>{} : read_expected(expectedPath);

  const sk::ScenarioRun run = sk::run_scenario(script, parse_mode(mode), false);
  if (!recordPath.empty()) sk::record(recordPath, run.frames);
  sk::Session session(sk::pipeline_for(script, base_pipeline(configPath)));
  const std::vector<sk::Answer> answers = sk::play(session, run.frames, script.events);

  for (const sk::Answer& a : answers) {
    const std::string who = a.speaker ? session.kb().display_name(*a.speaker) : "?";
    std::cout << "[" << fmt_time(a.time) << "] " << who << " <- " << a.text << "\n";
  }
  for (const sk::Alert& a : session.kb().active_alerts()) {
    std::cout << "alert " << sk::to_string(a.kind) << " " << a.objectLabel << " (" << a.region << ")\n";
  }
  if (!snapshot.empty()) session.kb().save(snapshot);

  if (expectedPath.empty()) return kExitOk;
  bool ok = answers.size() == expected.size();
  for (std::size_t i = 0; i < std::max(answers.size(), expected.size()); ++i) {
    const std::string got = i < answers.size() ? answers[i].text : "(no answer)";
    const std::string want = i < expected.size() ? expected[i] : "(no answer)";
    if (got != want) {
      ok = false;
      std::cerr << "answer " << i + 1 << ": expected \"" << want << "\", got \"" << got << "\"\n";
    }
  }
  std::cout << (ok ? "PASS" : "FAIL") << " " << answers.size() << "/" << expected.size() << " answers\n";
  return ok ? kExitOk : kExitAssert;
}

httplib::Result post(const std::string& url, const std::string& path, const Json& body) {
  httplib::Client client(url);
  client.set_read_timeout(10, 0);
  httplib::Result r = client.Post(path, body.dump(), "application/json");
  if (!r) throw sk::Error("connect", url + ": " + httplib::to_string(r.error()));
  return r;
}

int cmd_query(const std::string& text, const std::string& url, const std::string& speaker, double time) {
  Json body{{"text", text}};
  if (!speaker.empty()) body["speaker"] = speaker;
  if (time >= 0.0) body["time"] = time;
  const httplib::Result r = post(url, "/query", body);
  const Json reply = Json::parse(r->body, nullptr, false);
  if (r->status != 200 || reply.is_discarded()) {
    std::cerr << "query failed (" << r->status << "): " << r->body << "\n";
    return kExitConfig;
  }
  if (reply.value("answered", false)) {
    std::cout << reply["text"].get<std::string>() << "\n";
  } else {
    std::cout << "(not listening)\n";
  }
  return kExitOk;
}

int cmd_snapshot(const std::string& path, const std::string& url) {
  const httplib::Result r = post(url, "/snapshot", Json{{"path", std::filesystem::absolute(path).string()}});
  if (r->status != 200) {
    std::cerr << "snapshot failed (" << r->status << "): " << r->body << "\n";
    return kExitConfig;
  }
  std::cout << "snapshot written to " << path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial relation tracking and question answering over a simulated workspace"};
  app.require_subcommand(1);

  std::string config, file, speaker, url = "http://127.0.0.1:8077", mode = "frames", expected,
                                     snapshot, scenario, from, text, recordPath;
  double speed = 1.0;
  double time = -1.0;
  std::int64_t limit = 0;

  auto* run = app.add_subcommand("run", "Run the service until SIGINT/SIGTERM");
  run->add_option("--config", config, "Service configuration file")->required();

  auto* rep = app.add_subcommand("replay", "Process a recording and report the result");
  rep->add_option("file", file, "Recording")->required();
  rep->add_option("--speed", speed, "Playback speed; 0 means as fast as possible")->check(CLI::NonNegativeNumber);
  rep->add_option("--config", config, "Take thresholds and regions from this service config");
  rep->add_option("--snapshot", snapshot, "Write the final knowledge base here");

  auto* rec = app.add_subcommand("record", "Record a frame stream to a file");
  rec->add_option("file", file, "Output recording")->required();
  rec->add_option("--scenario", scenario, "Generate frames from a scenario script");
  rec->add_option("--mode", mode, "frames or heightmaps")->check(CLI::IsMember({"frames", "heightmaps"}));
  rec->add_option("--from", from, "Read frames from a running stream (host:port)");
  rec->add_option("--frames", limit, "Stop after this many frames");

  auto* scn = app.add_subcommand("scenario", "Play a scenario script and print the answers");
  scn->add_option("file", file, "Scenario script")->required();
  scn->add_option("--assert", expected, "File of expected answers, one per line");
  scn->add_option("--mode", mode, "frames or heightmaps")->check(CLI::IsMember({"frames", "heightmaps"}));
  scn->add_option("--config", config, "Take thresholds and regions from this service config");
  scn->add_option("--snapshot", snapshot, "Write the final knowledge base here");
  scn->add_option("--record", recordPath, "Also write the generated frames here");

  auto* qry = app.add_subcommand("query", "Ask a running service a question");
  qry->add_option("text", text, "The question")->required();
  qry->add_option("--url", url, "Service address");
  qry->add_option("--speaker", speaker, "Who is asking");
  qry->add_option("--time", time, "Simulated time of the utterance");

  auto* snap = app.add_subcommand("snapshot", "Ask a running service to save its knowledge base");
  snap->add_option("path", file, "Output path")->required();
  snap->add_option("--url", url, "Service address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help is a ParseError too; everything else is a usage error.
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config);
    if (*rep) return cmd_replay(file, speed, config, snapshot);
    if (*rec) return cmd_record(file, scenario, mode, from, limit);
    if (*scn) return cmd_scenario(file, expected, mode, config, snapshot, recordPath);
    if (*qry) return cmd_query(text, url, speaker, time);
    if (*snap) return cmd_snapshot(file, url);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
