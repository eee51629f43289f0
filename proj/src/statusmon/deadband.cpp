#include "iccs/statusmon/deadband.hpp"

#include <cmath>

#include "iccs/error.hpp"

namespace iccs::statusmon {

json to_json(const StatusReport& r) {
  return {{"device", r.device},
          {"field", r.field},
          {"value", iccs::to_json(r.value)},
          {"timestamp", r.timestamp},
          {"reason", r.reason == ReportReason::kInitial ? "initial" : "change"}};
}

StatusReport status_report_from_json(const json& j) {
  StatusReport r;
  r.device = j.at("device").get<std::string>();
  r.field = j.at("field").get<std::string>();
  r.value = field_value_from_json(j.at("value"));
  r.timestamp = j.value("timestamp", Timestamp{0});
  auto reason = j.value("reason", std::string("change"));
  if (reason != "initial" && reason != "change") throw Error(ErrorCode::kBadArgs, "bad report reason");
  r.reason = reason == "initial" ? ReportReason::kInitial : ReportReason::kChange;
  return r;
}

bool significant(const FieldValue& last, const FieldValue& sample, double precision) {
  const auto* a = std::get_if<double>(&last);
  const auto* b = std::get_if<double>(&sample);
  // An unchanged value is never significant, so precision 0 means "every change".
  if (a && b) return *b != *a && std::fabs(*b - *a) >= precision;
  return last != sample;
}

StepResult poll_step(const MonitorState& state, const FieldValue& sample, Timestamp ts) {
  StepResult out{state, std::nullopt};
  if (!state.active) return out;
  if (!state.last_reported) {
    out.report = StatusReport{state.spec.device, state.spec.field, sample, ts, ReportReason::kInitial};
  } else if (significant(*state.last_reported, sample, state.spec.precision)) {
    out.report = StatusReport{state.spec.device, state.spec.field, sample, ts, ReportReason::kChange};
  }
  if (out.report) out.state.last_reported = sample;
  return out;
}

}  // namespace iccs::statusmon
