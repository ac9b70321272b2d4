#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "json.hpp"
#include "scenekeeper/stream.hpp"

namespace scenekeeper {
namespace {

using Json = nlohmann::json;

void append_number(std::string& out, double v) { out += format_number(v); }

void append_vec(std::string& out, const Vec3& v) {
  out += '[';
  append_number(out, v.x);
  out += ',';
  append_number(out, v.y);
  out += ',';
  append_number(out, v.z);
  out += ']';
}

void append_box(std::string& out, const Aabb& b) {
  if (!b.valid()) throw Error("invalid-frame", "box with min > max");
  out += "{\"min\":";
  append_vec(out, b.min);
  out += ",\"max\":";
  append_vec(out, b.max);
  out += '}';
}

void append_string(std::string& out, const std::string& s) { out += Json(s).dump(); }

const Json& require(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw DecodeError(key, "missing");
  return *it;
}

double read_number(const Json& j, const char* field) {
  if (!j.is_number()) throw DecodeError(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw DecodeError(field, "not finite");
  return v;
}

Vec3 read_vec(const Json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) throw DecodeError(field, "expected 3 numbers");
  return {read_number(j[0], field), read_number(j[1], field), read_number(j[2], field)};
}

Aabb read_box(const Json& j) {
  if (!j.is_object()) throw DecodeError("bbox", "expected an object");
  const auto min = j.find("min");
  const auto max = j.find("max");
  if (min == j.end() || max == j.end()) throw DecodeError("bbox", "needs min and max");
  const Aabb box{read_vec(*min, "bbox"), read_vec(*max, "bbox")};
  if (!box.valid()) throw DecodeError("bbox", "min exceeds max");
  return box;
}

std::string read_string(const Json& j, const char* field) {
  if (!j.is_string()) throw DecodeError(field, "expected a string");
  return j.get<std::string>();
}

const Json& read_array(const Json& j, const char* key) {
  const Json& a = require(j, key);
  if (!a.is_array()) throw DecodeError(key, "expected an array");
  return a;
}

}  // namespace

std::string format_number(double value) {
  if (!std::isfinite(value)) throw Error("invalid-frame", "non-finite number");
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s(buf, static_cast<std::size_t>(n));
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

double quantize(double value) {
  if (!std::isfinite(value)) return value;
  return std::strtod(format_number(value).c_str(), nullptr);
}

Vec3 quantize(const Vec3& v) { return {quantize(v.x), quantize(v.y), quantize(v.z)}; }

Aabb quantize(const Aabb& box) { return {quantize(box.min), quantize(box.max)}; }

DetectionFrame quantize(DetectionFrame frame) {
  frame.t = quantize(frame.t);
  for (FramePerson& p : frame.persons) {
    p.centroid = quantize(p.centroid);
    p.bbox = quantize(p.bbox);
    for (Hand& h : p.hands) {
      h.position = quantize(h.position);
      if (h.pointing) h.pointing = quantize(*h.pointing);
    }
  }
  for (FrameObject& o : frame.objects) {
    o.centroid = quantize(o.centroid);
    o.bbox = quantize(o.bbox);
  }
  return frame;
}

std::string encode_frame(const DetectionFrame& f) {
  std::string out;
  out.reserve(128 + 160 * (f.persons.size() + f.objects.size()));
  out += "{\"frame\":";
  out += std::to_string(f.frame);
  out += ",\"t\":";
  append_number(out, f.t);
  out += ",\"persons\":[";
  for (std::size_t i = 0; i < f.persons.size(); ++i) {
    const FramePerson& p = f.persons[i];
    if (i > 0) out += ',';
    out += "{\"id\":";
    append_string(out, p.id);
    out += ",\"centroid\":";
    append_vec(out, p.centroid);
    out += ",\"bbox\":";
    append_box(out, p.bbox);
    out += ",\"hands\":[";
    for (std::size_t k = 0; k < p.hands.size(); ++k) {
      if (k > 0) out += ',';
      out += "{\"pos\":";
      append_vec(out, p.hands[k].position);
      if (p.hands[k].pointing) {
        out += ",\"pointing\":";
        append_vec(out, *p.hands[k].pointing);
      }
      out += '}';
    }
    out += "]}";
  }
  out += "],\"objects\":[";
  for (std::size_t i = 0; i < f.objects.size(); ++i) {
    const FrameObject& o = f.objects[i];
    if (i > 0) out += ',';
    out += "{\"id\":";
    append_string(out, o.id);
    out += ",\"centroid\":";
    append_vec(out, o.centroid);
    out += ",\"bbox\":";
    append_box(out, o.bbox);
    if (o.heldBy) {
      out += ",\"heldBy\":";
      append_string(out, *o.heldBy);
    }
    if (o.label) {
      out += ",\"label\":";
      append_string(out, *o.label);
    }
    out += '}';
  }
  out += "]}\n";
  return out;
}

DetectionFrame decode_frame(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw DecodeError("json", e.what());
  }
  if (!j.is_object()) throw DecodeError("json", "expected an object");

  DetectionFrame f;
  const Json& frame = require(j, "frame");
  if (!frame.is_number_integer()) throw DecodeError("frame", "expected an integer");
  f.frame = frame.get<std::int64_t>();
  f.t = read_number(require(j, "t"), "t");

  for (const Json& pj : read_array(j, "persons")) {
    if (!pj.is_object()) throw DecodeError("persons", "expected objects");
    FramePerson p;
    p.id = read_string(require(pj, "id"), "id");
    p.centroid = read_vec(require(pj, "centroid"), "centroid");
    p.bbox = read_box(require(pj, "bbox"));
    for (const Json& hj : read_array(pj, "hands")) {
      if (!hj.is_object()) throw DecodeError("hands", "expected objects");
      Hand h;
      h.position = read_vec(require(hj, "pos"), "pos");
      if (const auto it = hj.find("pointing"); it != hj.end()) {
        h.pointing = read_vec(*it, "pointing");
      }
      p.hands.push_back(h);
    }
    f.persons.push_back(std::move(p));
  }
  for (const Json& oj : read_array(j, "objects")) {
    if (!oj.is_object()) throw DecodeError("objects", "expected objects");
    FrameObject o;
    o.id = read_string(require(oj, "id"), "id");
    o.centroid = read_vec(require(oj, "centroid"), "centroid");
    o.bbox = read_box(require(oj, "bbox"));
    if (const auto it = oj.find("heldBy"); it != oj.end()) o.heldBy = read_string(*it, "heldBy");
    if (const auto it = oj.find("label"); it != oj.end()) o.label = read_string(*it, "label");
    f.objects.push_back(std::move(o));
  }
  return f;
}

DetectionFrame FrameDecoder::decode(std::string_view line) {
  DetectionFrame f = decode_frame(line);
  if (last_ && f.frame <= *last_) {
    throw DecodeError("frame", "id " + std::to_string(f.frame) + " does not follow " +
                                   std::to_string(*last_));
  }
  last_ = f.frame;
  return f;
}

}  // namespace scenekeeper
