#include "iccs/gateway/panels.hpp"

namespace iccs::gateway {

json default_style_tokens() {
  return json::parse(R"({
    "colors": {
      "background": "#101418",
      "surface": "#1b2128",
      "text": "#e6e9ec",
      "muted": "#8a939c",
      "accent": "#3d9be9",
      "ok": "#3fb950",
      "fault": "#f85149"
    },
    "fonts": {
      "body": "\"IBM Plex Sans\", system-ui, sans-serif",
      "mono": "\"IBM Plex Mono\", ui-monospace, monospace",
      "size_base": "14px"
    },
    "severity": {
      "info": "#3d9be9",
      "warning": "#d29922",
      "critical": "#f85149"
    },
    "process_state": {
      "pending": "#8a939c",
      "starting": "#d29922",
      "ready": "#3fb950",
      "failed": "#f85149",
      "stopped": "#8a939c"
    },
    "spacing": [0, 4, 8, 12, 16, 24, 32]
  })");
}

namespace {

json field(const char* name, const char* display) { return {{"name", name}, {"display", display}}; }

json monitor(const char* f, double precision, int latency_ms) {
  return {{"stream", "monitor"}, {"field", f}, {"precision", precision}, {"latency_ms", latency_ms}};
}

json mapper(const char* m) { return {{"stream", "mapper"}, {"mapper", m}}; }

json command(const char* method, json args, bool reservation) {
  return {{"method", method}, {"args", std::move(args)}, {"requires_reservation", reservation}};
}

std::map<std::string, json> build() {
  std::map<std::string, json> out;
  out["actuator"] = {
      {"type_tag", "actuator"},
      {"panel_kind", "actuator"},
      // Axis fields beyond the device's axis count are absent from its
      // monitored_fields and are skipped by the console.
      {"fields", {field("position0", "number"), field("position1", "number"), field("position2", "number"),
                  field("position3", "number"), field("moving", "flag"), field("moves_completed", "counter")}},
      {"streams", {monitor("position0", 0.001, 100), monitor("position1", 0.001, 100),
                   monitor("position2", 0.001, 100), monitor("position3", 0.001, 100),
                   monitor("moving", 0, 100), monitor("moves_completed", 0, 100)}},
      {"commands", {command("move_to", {{"targets", "number[]"}}, true),
                    command("stop", json::object(), true)}}};
  out["shutter"] = {{"type_tag", "shutter"},
                    {"panel_kind", "shutter"},
                    {"fields", {field("state", "enum")}},
                    {"streams", {monitor("state", 0, 100)}},
                    {"commands", {command("open", json::object(), false), command("close", json::object(), false)}}};
  out["sensor"] = {{"type_tag", "sensor"},
                   {"panel_kind", "sensor"},
                   {"fields", {field("value", "strip_chart")}},
                   {"streams", {monitor("value", 0.001, 100)}},
                   {"commands", json::array()}};
  out["alignment_lcu"] = {
      {"type_tag", "alignment_lcu"},
      {"panel_kind", "alignment_lcu"},
      {"fields", {field("phase", "enum"), field("best", "number"), field("iteration", "counter"),
                  field("sensor", "number"), field("shutter", "enum")}},
      {"streams", {mapper("summary"), mapper("positions"), mapper("signal")}},
      {"commands", {command("align", {{"threshold", "number"}, {"max_iters", "integer"}}, false),
                    command("abort", json::object(), false), command("reset", json::object(), false)}}};
  out["lcu"] = {{"type_tag", "lcu"},
                {"panel_kind", "lcu"},
                {"fields", json::array()},
                {"streams", json::array()},
                {"commands", {command("evolve", {{"delta", "object"}}, false)}}};
  return out;
}

}  // namespace

const std::map<std::string, json>& panel_descriptors() {
  static const std::map<std::string, json> panels = build();
  return panels;
}

std::optional<json> panel_for(const std::string& type_tag) {
  const auto& all = panel_descriptors();
  auto it = all.find(type_tag);
  if (it == all.end()) return std::nullopt;
  return it->second;
}

bool requires_reservation(const std::string& type_tag, const std::string& method) {
  auto panel = panel_for(type_tag);
  if (!panel) return false;
  for (const auto& c : (*panel)["commands"]) {
    if (c["method"] == method) return c["requires_reservation"].get<bool>();
  }
  return false;
}

}  // namespace iccs::gateway
