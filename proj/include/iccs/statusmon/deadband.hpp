#pragma once

#include <optional>
#include <string>

#include "iccs/conduit/object_ref.hpp"
#include "iccs/value.hpp"

namespace iccs::statusmon {

enum class ReportReason { kInitial, kChange };

struct MonitorSpec {
  std::string device;
  std::string field;
  double precision = 0.0;  // absolute deadband in field units
  Millis latency{100};     // poll period
  conduit::ObjectRef subscriber;
};

struct StatusReport {
  std::string device;
  std::string field;
  FieldValue value;
  Timestamp timestamp = 0;
  ReportReason reason = ReportReason::kChange;
};

json to_json(const StatusReport& r);
StatusReport status_report_from_json(const json& j);

struct MonitorState {
  MonitorSpec spec;
  std::optional<FieldValue> last_reported;
  bool active = true;
};

struct StepResult {
  MonitorState state;
  std::optional<StatusReport> report;
};

/// Numbers are significant when |sample - last| >= precision; other kinds
/// (and a change of kind) when unequal.
bool significant(const FieldValue& last, const FieldValue& sample, double precision);

/// One poll of one monitor. The first sample always reports (initial);
/// afterwards a report is emitted only for a significant change against the
/// last reported value, which then becomes the new reference.
StepResult poll_step(const MonitorState& state, const FieldValue& sample, Timestamp ts);

}  // namespace iccs::statusmon
